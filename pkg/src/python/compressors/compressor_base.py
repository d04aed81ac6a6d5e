from abc import ABC, abstractmethod
import dataclasses
from typing import Optional, Tuple

from models.binary_image import BinaryImage
from models.container import Container, MethodTag
from models.errors import ContainerFormatError
from utils.logger import get_logger

logger = get_logger("Compressors")


class CompressorBase(ABC):
    """Base class for all image compressors."""

    def __init__(self, threads: int = 1):
        self._threads = max(1, threads)

    @property
    @abstractmethod
    def compressor_type(self) -> str:
        """Return the compressor type identifier (e.g., 'ifs')."""
        pass

    @property
    @abstractmethod
    def method_tag(self) -> MethodTag:
        pass

    @property
    @abstractmethod
    def display_name(self) -> str:
        pass

    @property
    def params_class(self) -> Optional[type]:
        """Return the parameter dataclass for this compressor."""
        return None

    @abstractmethod
    def encode(self, image: BinaryImage, params: dict) -> Container:
        """
        Compress an image.

        Args:
            image: Binary input image
            params: Compressor parameters dictionary

        Returns:
            Container ready to be serialized
        """
        pass

    @abstractmethod
    def decode(self, container: Container) -> BinaryImage:
        """Rebuild the image stored in a container of this compressor's method."""
        pass

    def validate_params(self, params: dict) -> Tuple[bool, str]:
        """
        Validate compressor parameters.

        Returns:
            Tuple of (is_valid, error_message)
        """
        cls = self.params_class
        if cls is None:
            return True, ""
        unknown = set(params) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            return False, f"Unknown {self.compressor_type} parameters: {', '.join(sorted(unknown))}"
        try:
            cls.from_dict(params)
        except (TypeError, ValueError) as e:
            return False, str(e)
        return True, ""

    def check_container(self, container: Container) -> None:
        if container.method != self.method_tag:
            logger.error(f"{self.display_name} got a {container.method.name} container")
            raise ContainerFormatError(
                f"{self.display_name} cannot decode a {container.method.name} container"
            )

from dataclasses import dataclass
from enum import IntEnum

from models.errors import ContainerFormatError

MAGIC = b"FNC1"
VERSION = 1


class MethodTag(IntEnum):
    IFS = 0
    AE = 1
    VQ = 2
    NET = 3

    @classmethod
    def parse(cls, value: int) -> "MethodTag":
        try:
            return cls(value)
        except ValueError:
            raise ContainerFormatError(f"Unknown method byte {value}") from None


@dataclass(frozen=True)
class Container:
    """
    One compressed artifact: a fixed little-endian header plus a method-specific payload.

    For series models width is the series length and height, block_side and padding are 0.
    """

    method: MethodTag
    width: int
    height: int
    payload: bytes
    block_side: int = 0
    pad_right: int = 0
    pad_bottom: int = 0
    version: int = VERSION

    def __post_init__(self):
        object.__setattr__(self, "method", MethodTag.parse(int(self.method)))
        for name, limit in (("width", 1 << 32), ("height", 1 << 32), ("block_side", 1 << 16),
                            ("pad_right", 1 << 16), ("pad_bottom", 1 << 16)):
            value = getattr(self, name)
            if not 0 <= value < limit:
                raise ContainerFormatError(f"{name}={value} does not fit its header field")
        object.__setattr__(self, "payload", bytes(self.payload))

    @property
    def payload_length(self) -> int:
        return len(self.payload)

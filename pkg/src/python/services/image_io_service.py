import os
import re
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from models.binary_image import BinaryImage
from models.errors import DataError, ImageFormatError
from utils.fs import atomic_write_bytes
from utils.logger import get_logger, log_execution

logger = get_logger("ImageIO")

PathLike = Union[str, Path]

SUPPORTED_MAGICS = {b"P1", b"P2", b"P4", b"P5"}
MAX_PIXELS = 1 << 31
DEFAULT_THRESHOLD = 0.5

_WHITESPACE = b" \t\r\n\v\f"
_COMMENT = re.compile(rb"#[^\n]*")


def _read_header(data: bytes, fields: int) -> Tuple[List[int], int]:
    """Parse `fields` decimal header values after the magic; returns them and the offset just past the last one."""
    pos = 2
    values = []
    while len(values) < fields:
        while pos < len(data) and (data[pos] in _WHITESPACE or data[pos] == ord("#")):
            if data[pos] == ord("#"):
                end = data.find(b"\n", pos)
                pos = len(data) if end < 0 else end + 1
            else:
                pos += 1
        start = pos
        while pos < len(data) and 48 <= data[pos] <= 57:
            pos += 1
        if pos == start:
            raise ImageFormatError("Truncated or malformed header")
        values.append(int(data[start:pos]))
    return values, pos


def _check_dimensions(width: int, height: int) -> None:
    if width < 1 or height < 1:
        raise ImageFormatError(f"Image dimensions must be positive, got {width}x{height}")
    if width * height > MAX_PIXELS:
        raise ImageFormatError(f"Image dimensions {width}x{height} overflow the {MAX_PIXELS} pixel limit")


def _raster_start(data: bytes, pos: int) -> int:
    """Binary formats take exactly one whitespace byte between header and raster."""
    if pos >= len(data) or data[pos] not in _WHITESPACE:
        raise ImageFormatError("Missing whitespace between header and raster")
    return pos + 1


def _plain_tokens(body: bytes) -> List[bytes]:
    return _COMMENT.sub(b"", body).split()


def _parse_p1(data: bytes, width: int, height: int, pos: int) -> BinaryImage:
    # plain bits may be run together without separators
    digits = b"".join(_plain_tokens(data[pos:]))
    if digits.translate(None, b"01"):
        raise ImageFormatError("Plain PBM raster contains characters other than 0 and 1")
    count = width * height
    if len(digits) < count:
        raise ImageFormatError(f"Truncated raster: {len(digits)} of {count} pixels")
    bits = np.frombuffer(digits[:count], dtype=np.uint8) - ord("0")
    return BinaryImage.from_bits(width, height, bits)


def _parse_p4(data: bytes, width: int, height: int, pos: int) -> BinaryImage:
    start = _raster_start(data, pos)
    row_bytes = (width + 7) // 8
    needed = row_bytes * height
    if len(data) - start < needed:
        raise ImageFormatError(f"Truncated raster: {len(data) - start} of {needed} bytes")
    rows = np.frombuffer(data, dtype=np.uint8, count=needed, offset=start).reshape(height, row_bytes)
    return BinaryImage(np.unpackbits(rows, axis=1)[:, :width].astype(bool))


def _gray_to_image(gray: np.ndarray, maxval: int, threshold: float) -> BinaryImage:
    # PGM 0 is black; dark pixels become set pixels
    return BinaryImage(gray < threshold * maxval)


def _parse_p2(data: bytes, width: int, height: int, maxval: int, pos: int, threshold: float) -> BinaryImage:
    tokens = _plain_tokens(data[pos:])
    count = width * height
    if len(tokens) < count:
        raise ImageFormatError(f"Truncated raster: {len(tokens)} of {count} pixels")
    try:
        gray = np.array([int(token) for token in tokens[:count]], dtype=np.int64)
    except ValueError as e:
        raise ImageFormatError(f"Plain PGM raster has a non-integer sample: {e}") from e
    if gray.min() < 0 or gray.max() > maxval:
        raise ImageFormatError(f"PGM sample outside [0, {maxval}]")
    return _gray_to_image(gray.reshape(height, width), maxval, threshold)


def _parse_p5(data: bytes, width: int, height: int, maxval: int, pos: int, threshold: float) -> BinaryImage:
    start = _raster_start(data, pos)
    sample = np.dtype(np.uint8) if maxval < 256 else np.dtype(">u2")
    needed = width * height * sample.itemsize
    if len(data) - start < needed:
        raise ImageFormatError(f"Truncated raster: {len(data) - start} of {needed} bytes")
    gray = np.frombuffer(data, dtype=sample, count=width * height, offset=start).astype(np.int64)
    if gray.max() > maxval:
        raise ImageFormatError(f"PGM sample outside [0, {maxval}]")
    return _gray_to_image(gray.reshape(height, width), maxval, threshold)


def parse_pbm(data: bytes, threshold: float = DEFAULT_THRESHOLD) -> BinaryImage:
    """
    Decode a P1/P4 bitmap, or a P2/P5 graymap binarized at `threshold`·maxval.

    Raises:
        ImageFormatError: bad magic, bad dimensions, truncated raster
    """
    magic = bytes(data[:2])
    if magic not in SUPPORTED_MAGICS:
        raise ImageFormatError(f"Unsupported magic {magic!r}; expected one of P1, P2, P4, P5")
    if not 0 < threshold <= 1:
        raise DataError(f"threshold must lie in (0, 1], got {threshold}")

    if magic in (b"P1", b"P4"):
        (width, height), pos = _read_header(data, 2)
        _check_dimensions(width, height)
        return _parse_p1(data, width, height, pos) if magic == b"P1" else _parse_p4(data, width, height, pos)

    (width, height, maxval), pos = _read_header(data, 3)
    _check_dimensions(width, height)
    if not 0 < maxval < 65536:
        raise ImageFormatError(f"PGM maxval must lie in [1, 65535], got {maxval}")
    if magic == b"P2":
        return _parse_p2(data, width, height, maxval, pos, threshold)
    return _parse_p5(data, width, height, maxval, pos, threshold)


def write_pbm(image: BinaryImage, mode: str = "P4") -> bytes:
    """Serialize as plain P1 (70 bits per line) or packed P4 (rows zero-padded to a byte)."""
    header = f"{mode}\n{image.width} {image.height}\n".encode("ascii")
    if mode == "P4":
        return header + np.packbits(image.pixels, axis=1).tobytes()
    if mode != "P1":
        raise DataError(f"Unsupported PBM mode '{mode}'; expected P1 or P4")
    digits = (image.bits().astype(np.uint8) + ord("0")).tobytes()
    lines = [digits[i:i + 70] for i in range(0, len(digits), 70)]
    return header + b"\n".join(lines) + b"\n"


@log_execution(start_msg="Image Load Started", end_msg="Image Load Completed")
def load_image(path: PathLike, threshold: float = DEFAULT_THRESHOLD) -> BinaryImage:
    if not os.path.exists(path):
        logger.error(f"Image Load Error: File not found at {path}")
        raise FileNotFoundError(f"File not found: {path}")
    image = parse_pbm(Path(path).read_bytes(), threshold)
    logger.info(f"Loaded {os.path.basename(path)}: {image.width}x{image.height}, {image.set_count} set pixels")
    return image


@log_execution(start_msg="Image Save Started", end_msg="Image Save Completed")
def save_image(image: BinaryImage, path: PathLike, mode: str = "P4") -> int:
    return atomic_write_bytes(path, write_pbm(image, mode))


@log_execution(start_msg="Series Load Started", end_msg="Series Load Completed")
def read_csv_series(path: PathLike, column: int = 0, skip_header: bool = False) -> np.ndarray:
    """One value per row from a comma-separated file; blank lines and `#` comments are skipped."""
    if not os.path.exists(path):
        logger.error(f"Series Load Error: File not found at {path}")
        raise FileNotFoundError(f"File not found: {path}")
    try:
        values = np.loadtxt(
            path,
            delimiter=",",
            usecols=column,
            skiprows=1 if skip_header else 0,
            ndmin=1,
            dtype=np.float64,
        )
    except (ValueError, IndexError) as e:
        logger.error(f"Series Load Error: {path}: {e}")
        raise DataError(f"Cannot read column {column} of {path}: {e}") from e
    if values.size == 0:
        raise DataError(f"No values in {path}")
    if not np.all(np.isfinite(values)):
        raise DataError(f"Series in {path} contains non-finite values")
    return values


def write_csv_series(values, path: PathLike) -> int:
    text = "".join(f"{float(v)!r}\n" for v in np.asarray(values, dtype=np.float64).ravel())
    return atomic_write_bytes(path, text.encode("ascii"))

"""GPT-2 checkpoint conversion to the AAWF container."""

from .aawf import ChecksumError, read_container, write_container
from .convert import ConversionError, convert, convert_check

__all__ = [
    "ChecksumError",
    "ConversionError",
    "convert",
    "convert_check",
    "read_container",
    "write_container",
]

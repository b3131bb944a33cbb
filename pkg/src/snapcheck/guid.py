"""GUID parsing, formatting, and EFI mixed-endian byte packing.

On disk a GUID is 16 bytes laid out EFI-style: the first three groups are
little-endian (u32, u16, u16), the trailing eight bytes are stored as-is.
Text form is restricted to the canonical 36-character hyphenated spelling,
hex case-insensitive.
"""

from __future__ import annotations

import re
import uuid

GUID_SIZE = 16

ZERO_GUID = uuid.UUID(int=0)

_CANONICAL = re.compile(
    r"\A[0-9a-fA-F]{8}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{12}\Z"
)


class GuidError(ValueError):
    """Raised for GUID text that is not in canonical hyphenated form."""


def parse_guid(text: str) -> uuid.UUID:
    if not _CANONICAL.match(text):
        raise GuidError(f"not a canonical GUID: {text!r}")
    return uuid.UUID(text)


def format_guid(guid: uuid.UUID) -> str:
    return str(guid)


def pack_guid(guid: uuid.UUID) -> bytes:
    return guid.bytes_le


def unpack_guid(data: bytes) -> uuid.UUID:
    if len(data) != GUID_SIZE:
        raise GuidError(f"GUID field must be {GUID_SIZE} bytes, got {len(data)}")
    return uuid.UUID(bytes_le=bytes(data))

"""Bit-exact manifest layout and a hardened, size-bounded reader.

A manifest is a single binary blob.  All integers are little-endian u32,
all records are packed with no alignment padding, and every variable-size
structure is reached through blob-relative byte offsets:

    header:     magic, version, boot partition index, booter string offset,
                partition count, then one u32 offset per partition
    partition:  type GUID (16), unique GUID (16), ACL rule count, ACL table
                offset, file count, then file entries inline
    file entry: u32 string offset + 48-byte digest (52 bytes, no padding)
    ACL record: flags, directory string offset, rule count, then one u32
                string offset per rule; the partition's ACL table is an
                array of u32 offsets locating these records
    string:     ASCII bytes terminated by a single 0x0A byte

The reader never trusts a field: every offset and size is funnelled through
:func:`checked_span`, which enforces 32-bit arithmetic and the declared blob
length, so any byte sequence either decodes or fails with a typed error.
Readers never touch a byte at or beyond the declared length even when the
underlying buffer is longer.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass

from .guid import GUID_SIZE, unpack_guid
from .sha384 import DIGEST_SIZE

STORAGE_MAGIC = 0x484F5353      # the bytes 'S','S','O','H' read as LE u32
STORAGE_VERSION = 0x10010000
BOOT_PARTITION_UNUSED = 0xFFFFFFFF

ACL_FLAG_WHITELIST = 0x1
ACL_FLAG_REGEX = 0x2
_ACL_FLAGS_KNOWN = ACL_FLAG_WHITELIST | ACL_FLAG_REGEX

HEADER_PREFIX_SIZE = 20
PARTITION_PREFIX_SIZE = 44
FILE_ENTRY_SIZE = 4 + DIGEST_SIZE   # 52, packed
ACL_PREFIX_SIZE = 12

STRING_TERMINATOR = b"\n"

U32_MAX = 0xFFFFFFFF


class ManifestError(Exception):
    """Base of every typed status the reader can return."""

    @property
    def token(self) -> str:
        return type(self).__name__


class BadMagic(ManifestError):
    pass


class BadVersion(ManifestError):
    pass


class Truncated(ManifestError):
    pass


class BootIndexOutOfRange(ManifestError):
    pass


class OffsetOutOfBounds(ManifestError):
    pass


class ArithmeticOverflow(ManifestError):
    pass


class UnsortedFileArray(ManifestError):
    pass


class DuplicateFilePath(ManifestError):
    pass


class BadString(ManifestError):
    pass


class UnterminatedString(BadString):
    pass


class BadAclFlags(ManifestError):
    pass


class DuplicateAclDirectory(ManifestError):
    pass


def checked_span(base: int, count: int, elem_size: int, limit: int) -> int:
    """Return ``base + count * elem_size`` under strict u32 discipline.

    Every intermediate product and sum must fit in 32 bits and the result
    must not exceed ``limit``.  This is the single arithmetic gate used by
    all readers; no offset or size combination bypasses it.
    """
    product = count * elem_size
    if product > U32_MAX:
        raise ArithmeticOverflow(
            f"{count} * {elem_size} does not fit in 32 bits"
        )
    end = base + product
    if end > U32_MAX:
        raise ArithmeticOverflow(
            f"{base} + {product} does not fit in 32 bits"
        )
    if end > limit:
        raise OffsetOutOfBounds(f"span [{base}, {end}) exceeds limit {limit}")
    return end


class ManifestView:
    """Read-only, size-bounded window over manifest bytes.

    ``length`` is the declared blob size; reads are capped there even when
    the underlying buffer is longer.  The buffer is only ever accessed
    through slicing, which keeps the view instrumentable by wrapper objects.
    """

    __slots__ = ("_data", "length")

    def __init__(self, data, length: int | None = None) -> None:
        if length is None:
            length = len(data)
        elif length > len(data):
            raise ValueError("declared length exceeds the underlying buffer")
        if length > U32_MAX:
            raise ArithmeticOverflow("blob length does not fit in 32 bits")
        self._data = data
        self.length = length

    def read(self, offset: int, size: int) -> bytes:
        end = checked_span(offset, 1, size, self.length)
        return bytes(self._data[offset:end])

    def read_u32(self, offset: int) -> int:
        end = checked_span(offset, 1, 4, self.length)
        return int.from_bytes(bytes(self._data[offset:end]), "little")

    def find_terminator(self, offset: int) -> int:
        """Index of the next 0x0A at or after ``offset``, or -1.

        The scan is capped at the declared length and proceeds in bounded
        chunks so no access reaches past it.
        """
        pos = offset
        length = self.length
        while pos < length:
            chunk_end = min(pos + 512, length)
            idx = bytes(self._data[pos:chunk_end]).find(STRING_TERMINATOR)
            if idx >= 0:
                return pos + idx
            pos = chunk_end
        return -1


def as_view(blob) -> ManifestView:
    if isinstance(blob, ManifestView):
        return blob
    return ManifestView(blob)


@dataclass(frozen=True, slots=True)
class StorageSetHeader:
    magic: int
    version: int
    boot_partition_index: int
    booter_file_offset: int
    partition_offsets: tuple[int, ...]

    @property
    def number_of_partitions(self) -> int:
        return len(self.partition_offsets)

    @property
    def boot_used(self) -> bool:
        return self.boot_partition_index != BOOT_PARTITION_UNUSED


@dataclass(frozen=True, slots=True)
class StorageFileEntry:
    offset: int     # blob offset of the path string
    hash: bytes     # 48-byte digest
    path: str       # resolved path string


@dataclass(frozen=True, slots=True)
class StorageAclRecord:
    flags: int
    directory_offset: int
    rule_offsets: tuple[int, ...]
    directory: str
    patterns: tuple[str, ...]

    @property
    def whitelist(self) -> bool:
        return bool(self.flags & ACL_FLAG_WHITELIST)

    @property
    def regex(self) -> bool:
        return bool(self.flags & ACL_FLAG_REGEX)


@dataclass(frozen=True, slots=True)
class StoragePartitionRecord:
    partition_type_guid: uuid.UUID
    unique_partition_guid: uuid.UUID
    acl_rule_offset: int
    acl_record_offsets: tuple[int, ...]
    files: tuple[StorageFileEntry, ...]
    acls: tuple[StorageAclRecord, ...]

    @property
    def number_of_files(self) -> int:
        return len(self.files)

    @property
    def number_of_acl_rules(self) -> int:
        return len(self.acls)


@dataclass(frozen=True, slots=True)
class ParsedManifest:
    header: StorageSetHeader
    booter_path: str | None     # None when the boot index is unused
    partitions: tuple[StoragePartitionRecord, ...]


def read_string_bytes(view: ManifestView, offset: int) -> bytes:
    """Raw string content at ``offset``, excluding the 0x0A terminator."""
    if offset >= view.length:
        raise OffsetOutOfBounds(
            f"string offset {offset} not inside blob of length {view.length}"
        )
    end = view.find_terminator(offset)
    if end < 0:
        raise UnterminatedString(f"no terminator after offset {offset}")
    return view.read(offset, end - offset)


def read_string(blob, offset: int) -> str:
    """Decode the 0x0A-terminated ASCII string at ``offset``."""
    raw = read_string_bytes(as_view(blob), offset)
    if b"\x00" in raw:
        raise BadString(f"NUL byte inside string at offset {offset}")
    try:
        return raw.decode("ascii")
    except UnicodeDecodeError:
        raise BadString(f"non-ASCII byte inside string at offset {offset}") from None


def read_header(blob) -> StorageSetHeader:
    view = as_view(blob)
    if view.length < HEADER_PREFIX_SIZE:
        raise Truncated(
            f"blob of {view.length} bytes is shorter than the {HEADER_PREFIX_SIZE}-byte header"
        )
    magic = view.read_u32(0)
    if magic != STORAGE_MAGIC:
        raise BadMagic(f"magic 0x{magic:08x}, expected 0x{STORAGE_MAGIC:08x}")
    version = view.read_u32(4)
    if version != STORAGE_VERSION:
        raise BadVersion(f"version 0x{version:08x}, expected 0x{STORAGE_VERSION:08x}")
    boot_index = view.read_u32(8)
    booter_offset = view.read_u32(12)
    n_partitions = view.read_u32(16)
    try:
        checked_span(HEADER_PREFIX_SIZE, n_partitions, 4, view.length)
    except OffsetOutOfBounds:
        raise Truncated(
            f"partition offset table for {n_partitions} partitions exceeds the blob"
        ) from None
    if boot_index != BOOT_PARTITION_UNUSED and boot_index >= n_partitions:
        raise BootIndexOutOfRange(
            f"boot partition index {boot_index} with only {n_partitions} partitions"
        )
    offsets = []
    for i in range(n_partitions):
        offset = view.read_u32(HEADER_PREFIX_SIZE + 4 * i)
        # a partition record needs at least its fixed prefix
        checked_span(offset, 1, PARTITION_PREFIX_SIZE, view.length)
        offsets.append(offset)
    return StorageSetHeader(
        magic=magic,
        version=version,
        boot_partition_index=boot_index,
        booter_file_offset=booter_offset,
        partition_offsets=tuple(offsets),
    )


def read_acl(blob, offset: int) -> StorageAclRecord:
    view = as_view(blob)
    checked_span(offset, 1, ACL_PREFIX_SIZE, view.length)
    flags = view.read_u32(offset)
    if flags & ~_ACL_FLAGS_KNOWN:
        raise BadAclFlags(f"unknown ACL flag bits set: 0x{flags:08x}")
    directory_offset = view.read_u32(offset + 4)
    n_rules = view.read_u32(offset + 8)
    directory = read_string(view, directory_offset)
    table_base = offset + ACL_PREFIX_SIZE
    checked_span(table_base, n_rules, 4, view.length)
    rule_offsets = []
    patterns = []
    for i in range(n_rules):
        rule_offset = view.read_u32(table_base + 4 * i)
        rule_offsets.append(rule_offset)
        patterns.append(read_string(view, rule_offset))
    return StorageAclRecord(
        flags=flags,
        directory_offset=directory_offset,
        rule_offsets=tuple(rule_offsets),
        directory=directory,
        patterns=tuple(patterns),
    )


def read_partition(blob, offset: int) -> StoragePartitionRecord:
    view = as_view(blob)
    checked_span(offset, 1, PARTITION_PREFIX_SIZE, view.length)
    type_guid = unpack_guid(view.read(offset, GUID_SIZE))
    unique_guid = unpack_guid(view.read(offset + 16, GUID_SIZE))
    n_acl = view.read_u32(offset + 32)
    acl_table_offset = view.read_u32(offset + 36)
    n_files = view.read_u32(offset + 40)

    files_base = offset + PARTITION_PREFIX_SIZE
    checked_span(files_base, n_files, FILE_ENTRY_SIZE, view.length)
    files = []
    previous: bytes | None = None
    for i in range(n_files):
        entry_offset = files_base + FILE_ENTRY_SIZE * i
        string_offset = view.read_u32(entry_offset)
        digest = view.read(entry_offset + 4, DIGEST_SIZE)
        raw = read_string_bytes(view, string_offset)
        if previous is not None:
            if raw == previous:
                raise DuplicateFilePath(f"file path {raw!r} listed twice")
            if raw < previous:
                raise UnsortedFileArray(
                    f"file path {raw!r} sorts before its predecessor {previous!r}"
                )
        previous = raw
        files.append(
            StorageFileEntry(
                offset=string_offset,
                hash=digest,
                path=read_string(view, string_offset),
            )
        )

    acl_record_offsets = []
    acls = []
    if n_acl:
        checked_span(acl_table_offset, n_acl, 4, view.length)
        seen_dirs: set[str] = set()
        for i in range(n_acl):
            record_offset = view.read_u32(acl_table_offset + 4 * i)
            record = read_acl(view, record_offset)
            if record.directory in seen_dirs:
                raise DuplicateAclDirectory(
                    f"directory {record.directory!r} described by more than one ACL"
                )
            seen_dirs.add(record.directory)
            acl_record_offsets.append(record_offset)
            acls.append(record)
    # with zero rules the table offset is ignored, like the booter offset

    return StoragePartitionRecord(
        partition_type_guid=type_guid,
        unique_partition_guid=unique_guid,
        acl_rule_offset=acl_table_offset,
        acl_record_offsets=tuple(acl_record_offsets),
        files=tuple(files),
        acls=tuple(acls),
    )


def parse_manifest(blob) -> ParsedManifest:
    """Decode and validate an entire manifest, or raise a typed error."""
    view = as_view(blob)
    header = read_header(view)
    booter_path = None
    if header.boot_used:
        booter_path = read_string(view, header.booter_file_offset)
    partitions = tuple(read_partition(view, off) for off in header.partition_offsets)
    return ParsedManifest(header=header, booter_path=booter_path, partitions=partitions)

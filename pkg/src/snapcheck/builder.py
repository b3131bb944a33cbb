"""Compile partition descriptions into manifest blobs, and back.

The emitted layout is deterministic: header, partition offset table, then
for each partition its record, ACL offset table and ACL records, and
finally one string pool holding every referenced string exactly once
(deduplicated by exact bytes, in first-reference order).  Compiling the
same request twice yields byte-identical blobs.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass

from . import manifest
from .guid import pack_guid
from .manifest import (
    ACL_FLAG_REGEX,
    ACL_FLAG_WHITELIST,
    BOOT_PARTITION_UNUSED,
    U32_MAX,
    ParsedManifest,
    StorageAclRecord,
)
from .rules import AclKind, AclMode, AclSpec
from .sha384 import DIGEST_SIZE, sha384


class BuildError(Exception):
    pass


class InvariantViolation(BuildError):
    pass


class MissingBooterPath(BuildError):
    pass


class TooLarge(BuildError):
    pass


@dataclass(frozen=True, slots=True)
class PartitionSpec:
    """Builder-side description of one partition."""

    partition_type_guid: uuid.UUID
    unique_partition_guid: uuid.UUID
    hashed_files: tuple[tuple[str, bytes], ...]   # (path, digest), sorted by path bytes
    acl_specs: tuple[AclSpec, ...]


@dataclass(frozen=True, slots=True)
class BuildRequest:
    partitions: tuple[PartitionSpec, ...]
    boot_partition_index: int | None    # None means no boot target
    booter_path: str | None


def hash_source_file(content: bytes) -> bytes:
    """Digest of one source file's full content."""
    return sha384(content)


def acl_flags(spec: AclSpec) -> int:
    flags = 0
    if spec.mode is AclMode.WHITELIST:
        flags |= ACL_FLAG_WHITELIST
    if spec.kind is AclKind.REGEX:
        flags |= ACL_FLAG_REGEX
    return flags


def acl_spec_from_record(record: StorageAclRecord) -> AclSpec:
    return AclSpec(
        base_directory=record.directory,
        mode=AclMode.WHITELIST if record.whitelist else AclMode.BLACKLIST,
        kind=AclKind.REGEX if record.regex else AclKind.LITERAL,
        patterns=record.patterns,
    )


def _string_bytes(text: str, what: str) -> bytes:
    try:
        raw = text.encode("ascii")
    except UnicodeEncodeError:
        raise InvariantViolation(f"{what} {text!r} is not ASCII") from None
    if b"\x00" in raw or b"\n" in raw:
        raise InvariantViolation(f"{what} {text!r} contains a forbidden byte")
    if not raw:
        raise InvariantViolation(f"{what} must not be empty")
    return raw


def _validate_request(request: BuildRequest) -> None:
    if request.boot_partition_index is None:
        if request.booter_path is not None:
            raise InvariantViolation("booter path given but boot index is unused")
    else:
        if not 0 <= request.boot_partition_index < len(request.partitions):
            raise InvariantViolation(
                f"boot partition index {request.boot_partition_index} with "
                f"{len(request.partitions)} partitions"
            )
        if request.booter_path is None:
            raise MissingBooterPath("boot index set but no booter path")
        _string_bytes(request.booter_path, "booter path")

    for spec in request.partitions:
        previous: bytes | None = None
        for path, digest in spec.hashed_files:
            raw = _string_bytes(path, "file path")
            if previous is not None and raw <= previous:
                raise InvariantViolation(
                    f"file paths not strictly ascending at {path!r}"
                )
            previous = raw
            if len(digest) != DIGEST_SIZE:
                raise InvariantViolation(
                    f"digest for {path!r} is {len(digest)} bytes, expected {DIGEST_SIZE}"
                )
        seen_dirs: set[str] = set()
        for acl in spec.acl_specs:
            _string_bytes(acl.base_directory, "base directory")
            if acl.base_directory in seen_dirs:
                raise InvariantViolation(
                    f"base directory {acl.base_directory!r} described twice"
                )
            seen_dirs.add(acl.base_directory)
            for pattern in acl.patterns:
                _string_bytes(pattern, "rule entry")
                if acl.kind is AclKind.LITERAL and ("?" in pattern or "*" in pattern):
                    raise InvariantViolation(
                        f"wildcard character in plain name {pattern!r}"
                    )


def compile_manifest(request: BuildRequest) -> bytes:
    """Serialize ``request`` into a manifest blob."""
    _validate_request(request)
    partitions = request.partitions

    # fixed-region layout pass
    cursor = manifest.HEADER_PREFIX_SIZE + 4 * len(partitions)
    partition_offsets = []
    acl_table_offsets = []      # 0 when a partition has no ACLs
    acl_record_offsets: list[list[int]] = []
    for spec in partitions:
        partition_offsets.append(cursor)
        cursor += manifest.PARTITION_PREFIX_SIZE
        cursor += manifest.FILE_ENTRY_SIZE * len(spec.hashed_files)
        if spec.acl_specs:
            acl_table_offsets.append(cursor)
            cursor += 4 * len(spec.acl_specs)
            record_offsets = []
            for acl in spec.acl_specs:
                record_offsets.append(cursor)
                cursor += manifest.ACL_PREFIX_SIZE + 4 * len(acl.patterns)
            acl_record_offsets.append(record_offsets)
        else:
            acl_table_offsets.append(0)
            acl_record_offsets.append([])

    pool_base = cursor
    pool = bytearray()
    pool_offsets: dict[bytes, int] = {}

    def intern(text: str) -> int:
        raw = text.encode("ascii")
        offset = pool_offsets.get(raw)
        if offset is None:
            offset = pool_base + len(pool)
            pool_offsets[raw] = offset
            pool += raw
            pool += manifest.STRING_TERMINATOR
        return offset

    def u32(value: int) -> bytes:
        return value.to_bytes(4, "little")

    out = bytearray()
    out += u32(manifest.STORAGE_MAGIC)
    out += u32(manifest.STORAGE_VERSION)
    if request.boot_partition_index is None:
        out += u32(BOOT_PARTITION_UNUSED)
        out += u32(0)
    else:
        out += u32(request.boot_partition_index)
        out += u32(intern(request.booter_path))  # type: ignore[arg-type]
    out += u32(len(partitions))
    for offset in partition_offsets:
        out += u32(offset)

    for index, spec in enumerate(partitions):
        out += pack_guid(spec.partition_type_guid)
        out += pack_guid(spec.unique_partition_guid)
        out += u32(len(spec.acl_specs))
        out += u32(acl_table_offsets[index])
        out += u32(len(spec.hashed_files))
        for path, digest in spec.hashed_files:
            out += u32(intern(path))
            out += digest
        if spec.acl_specs:
            for record_offset in acl_record_offsets[index]:
                out += u32(record_offset)
            for acl in spec.acl_specs:
                out += u32(acl_flags(acl))
                out += u32(intern(acl.base_directory))
                out += u32(len(acl.patterns))
                for pattern in acl.patterns:
                    out += u32(intern(pattern))

    total = len(out) + len(pool)
    if total > U32_MAX:
        raise TooLarge(f"manifest of {total} bytes does not fit 32-bit offsets")
    assert len(out) == pool_base
    out += pool
    return bytes(out)


def request_from_parsed(parsed: ParsedManifest) -> BuildRequest:
    """Map a decoded manifest back to the request that would produce it."""
    specs = []
    for record in parsed.partitions:
        specs.append(
            PartitionSpec(
                partition_type_guid=record.partition_type_guid,
                unique_partition_guid=record.unique_partition_guid,
                hashed_files=tuple((entry.path, entry.hash) for entry in record.files),
                acl_specs=tuple(acl_spec_from_record(acl) for acl in record.acls),
            )
        )
    header = parsed.header
    return BuildRequest(
        partitions=tuple(specs),
        boot_partition_index=header.boot_partition_index if header.boot_used else None,
        booter_path=parsed.booter_path,
    )


def decompile_manifest(blob) -> BuildRequest:
    """Inverse of :func:`compile_manifest` for inspection and round-trips.

    Manifest errors propagate unchanged.  For blobs produced by this
    builder, ``compile_manifest(decompile_manifest(b)) == b``.
    """
    return request_from_parsed(manifest.parse_manifest(blob))

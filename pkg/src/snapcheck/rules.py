"""Rules-file grammar and the two-operator pattern language used by ACLs.

A rules file is a sequence of blocks.  Each block is:

    #<flags>        flag line: '#' then exactly one of W|B and one of R|N
    <directory>     full path of the base directory the block governs
    <entry>         one or more patterns (R) or plain file names (N),
    ...             relative to the base directory

W marks a whitelist, B a blacklist.  R means the entries are patterns in a
minimal wildcard language ('?' matches one valid character, '*' any number
of them), N means plain names compared byte for byte.  Blank lines are
skipped; there is no comment syntax.  Files are ASCII with 0x0A line
separators; a trailing 0x0D is tolerated on host-edited files.

The same module owns the matcher for the wildcard language.  Neither
wildcard matches a path separator, so multi-component patterns such as
"sub\\*.bin" are matched component-wise.  Everything is case-sensitive.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

PATH_SEPARATOR = "\\"

# characters a wildcard may never match: the separator plus the two bytes
# that cannot appear inside stored strings
_WILDCARD_EXCLUDED = frozenset({"\\", "\n", "\x00"})

_METACHARACTERS = frozenset({"?", "*"})


class AclMode(enum.Enum):
    WHITELIST = "whitelist"
    BLACKLIST = "blacklist"


class AclKind(enum.Enum):
    REGEX = "regex"         # wildcard patterns
    LITERAL = "literal"     # plain names, byte equality


@dataclass(frozen=True, slots=True)
class AclSpec:
    """One directory restriction block from a rules file."""

    base_directory: str
    mode: AclMode
    kind: AclKind
    patterns: tuple[str, ...]


class RulesError(Exception):
    """Base for rules-file and files-list parse errors."""

    def __init__(self, message: str, line: int | None = None) -> None:
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class BadFlagLine(RulesError):
    pass


class MissingBaseDirectory(RulesError):
    pass


class DuplicateBaseDirectory(RulesError):
    pass


class EmptyRuleBlock(RulesError):
    pass


class MetacharacterInLiteral(RulesError):
    pass


class DuplicatePath(RulesError):
    pass


class EmptyList(RulesError):
    pass


class BadCharacter(RulesError):
    pass


def _check_text(content: str, line_no: int) -> str:
    if "\x00" in content:
        raise BadCharacter("NUL byte in line", line_no)
    if not content.isascii():
        raise BadCharacter("non-ASCII byte in line", line_no)
    return content


def _lines(text: str) -> list[tuple[int, str]]:
    """Numbered lines with the 0x0A separator split off and 0x0D stripped."""
    out = []
    for i, raw in enumerate(text.split("\n"), start=1):
        if raw.endswith("\r"):
            raw = raw[:-1]
        out.append((i, raw))
    return out


def _parse_flag_line(body: str, line_no: int) -> tuple[AclMode, AclKind]:
    mode: AclMode | None = None
    kind: AclKind | None = None
    for ch in body:
        if ch == "W":
            if mode is not None:
                raise BadFlagLine(f"conflicting or repeated flag {ch!r}", line_no)
            mode = AclMode.WHITELIST
        elif ch == "B":
            if mode is not None:
                raise BadFlagLine(f"conflicting or repeated flag {ch!r}", line_no)
            mode = AclMode.BLACKLIST
        elif ch == "R":
            if kind is not None:
                raise BadFlagLine(f"conflicting or repeated flag {ch!r}", line_no)
            kind = AclKind.REGEX
        elif ch == "N":
            if kind is not None:
                raise BadFlagLine(f"conflicting or repeated flag {ch!r}", line_no)
            kind = AclKind.LITERAL
        else:
            raise BadFlagLine(f"unknown flag letter {ch!r}", line_no)
    if mode is None:
        raise BadFlagLine("missing W or B flag", line_no)
    if kind is None:
        raise BadFlagLine("missing R or N flag", line_no)
    return mode, kind


def parse_rules_file(text: str) -> list[AclSpec]:
    """Parse rules-file text into AclSpecs, in file order."""
    specs: list[AclSpec] = []
    seen_dirs: set[str] = set()

    flag_line_no: int | None = None
    mode: AclMode | None = None
    kind: AclKind | None = None
    base_directory: str | None = None
    patterns: list[str] = []

    def finish_block() -> None:
        nonlocal base_directory, patterns
        if flag_line_no is None:
            return
        if base_directory is None:
            raise MissingBaseDirectory("flag line with no base directory", flag_line_no)
        if not patterns:
            raise EmptyRuleBlock(
                f"no entries for base directory {base_directory!r}", flag_line_no
            )
        specs.append(
            AclSpec(
                base_directory=base_directory,
                mode=mode,        # type: ignore[arg-type]
                kind=kind,        # type: ignore[arg-type]
                patterns=tuple(patterns),
            )
        )
        base_directory = None
        patterns = []

    for line_no, line in _lines(text):
        if not line:
            continue
        _check_text(line, line_no)
        if line.startswith("#"):
            finish_block()
            mode, kind = _parse_flag_line(line[1:], line_no)
            flag_line_no = line_no
        elif flag_line_no is None:
            raise BadFlagLine("expected a flag line starting with '#'", line_no)
        elif base_directory is None:
            if line in seen_dirs:
                raise DuplicateBaseDirectory(
                    f"base directory {line!r} described more than once", line_no
                )
            seen_dirs.add(line)
            base_directory = line
        else:
            if kind is AclKind.LITERAL and (set(line) & _METACHARACTERS):
                raise MetacharacterInLiteral(
                    f"wildcard character in plain name {line!r}", line_no
                )
            patterns.append(line)
    finish_block()
    return specs


def format_rules_file(specs: list[AclSpec] | tuple[AclSpec, ...]) -> str:
    """Render AclSpecs back to rules-file text (inverse of the parser)."""
    lines = []
    for spec in specs:
        flags = "W" if spec.mode is AclMode.WHITELIST else "B"
        flags += "R" if spec.kind is AclKind.REGEX else "N"
        lines.append(f"#{flags}")
        lines.append(spec.base_directory)
        lines.extend(spec.patterns)
    return "\n".join(lines) + "\n" if lines else ""


def parse_files_list(text: str) -> list[str]:
    """Parse a files-list into sorted full paths, rejecting duplicates."""
    paths = []
    seen = set()
    for line_no, line in _lines(text):
        if not line:
            continue
        _check_text(line, line_no)
        if line in seen:
            raise DuplicatePath(f"path {line!r} listed twice", line_no)
        seen.add(line)
        paths.append(line)
    if not paths:
        raise EmptyList("files list contains no paths")
    paths.sort(key=lambda p: p.encode("ascii"))
    return paths


def _match_component(pattern: str, text: str) -> bool:
    # Iterative wildcard match with a single backtrack point per '*':
    # O(len(pattern) * len(text)) worst case, no recursion.
    np_, nt = len(pattern), len(text)
    pi = ti = 0
    star_pi = -1
    star_ti = 0
    while ti < nt:
        if pi < np_:
            pc = pattern[pi]
            if pc == "*":
                star_pi = pi
                star_ti = ti
                pi += 1
                continue
            if pc == text[ti]:
                pi += 1
                ti += 1
                continue
            if pc == "?" and text[ti] not in _WILDCARD_EXCLUDED:
                pi += 1
                ti += 1
                continue
        if star_pi >= 0 and text[star_ti] not in _WILDCARD_EXCLUDED:
            # let the latest '*' swallow one more character
            star_ti += 1
            pi = star_pi + 1
            ti = star_ti
            continue
        return False
    while pi < np_ and pattern[pi] == "*":
        pi += 1
    return pi == np_


def glob_match(pattern: str, candidate: str) -> bool:
    """True iff ``candidate`` is in the language of ``pattern``.

    '?' matches exactly one valid character, '*' zero or more of them;
    every other character matches itself.  Neither wildcard matches the
    path separator, so patterns spanning subdirectories are compared one
    path component at a time.  Total function, never raises.
    """
    if PATH_SEPARATOR in pattern or PATH_SEPARATOR in candidate:
        pattern_parts = pattern.split(PATH_SEPARATOR)
        candidate_parts = candidate.split(PATH_SEPARATOR)
        if len(pattern_parts) != len(candidate_parts):
            return False
        return all(
            _match_component(p, c) for p, c in zip(pattern_parts, candidate_parts)
        )
    return _match_component(pattern, candidate)

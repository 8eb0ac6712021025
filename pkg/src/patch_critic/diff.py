"""Structured unified diffs: parse, render, apply, reverse.

The representation keeps exact line-range bookkeeping: hunk headers are
validated against their bodies, ``\\ No newline at end of file`` markers
survive round trips, and application is strict (context must match
byte-for-byte unless an explicit drift tolerance is given).
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field, replace

from .errors import PatchCriticError

CONTEXT = "context"
ADD = "add"
DEL = "del"

NULL_PATH = "/dev/null"

_PREFIX = {CONTEXT: " ", ADD: "+", DEL: "-"}
_TAG_FOR_PREFIX = {" ": CONTEXT, "+": ADD, "-": DEL}

_NO_EOL_MARKER = "\\ No newline at end of file"

_HUNK_HEADER_RE = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@(?: (.*))?$")

# Lines tolerated (and preserved verbatim) between file sections.
_PREAMBLE_PREFIXES = (
    "diff ",
    "index ",
    "old mode",
    "new mode",
    "new file mode",
    "deleted file mode",
    "similarity index",
    "dissimilarity index",
    "rename from",
    "rename to",
    "copy from",
    "copy to",
)

_BINARY_PREFIXES = ("Binary files ", "GIT binary patch")


class PatchError(PatchCriticError):
    """Base class for diff parsing/application failures."""


class EmptyPatchError(PatchError):
    """Input contained no diff content at all."""


class PatchParseError(PatchError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class UnsupportedPatchError(PatchParseError):
    """Diff feature outside the supported text unified-diff subset."""


class PatchApplyError(PatchError):
    """Patch cannot be applied to the given tree."""


class ContextMismatchError(PatchApplyError):
    def __init__(self, path: str, hunk_index: int, line: int, detail: str):
        super().__init__(
            f"{path}: hunk {hunk_index}: context mismatch at line {line}: {detail}"
        )
        self.path = path
        self.hunk_index = hunk_index
        self.line = line


@dataclass(frozen=True)
class DiffLine:
    """One body line of a hunk.

    ``no_newline`` marks the line as the final line of a file that does not
    end with a newline (the line preceding a ``\\ No newline`` marker).
    """

    tag: str
    text: str
    no_newline: bool = False


@dataclass(frozen=True)
class Hunk:
    """One ``@@`` block.

    Starts follow the unified-diff header convention: 1-based, except that
    an empty side (len 0) stores the line *before* the insertion/deletion
    point, which may be 0.
    """

    old_start: int
    old_len: int
    new_start: int
    new_len: int
    lines: tuple[DiffLine, ...]
    heading: str = ""

    def recount(self) -> tuple[int, int]:
        """Recount body tags as (old_len, new_len)."""
        old = sum(1 for ln in self.lines if ln.tag in (CONTEXT, DEL))
        new = sum(1 for ln in self.lines if ln.tag in (CONTEXT, ADD))
        return old, new

    def validate(self) -> None:
        old, new = self.recount()
        if (old, new) != (self.old_len, self.new_len):
            raise PatchParseError(
                f"hunk header counts ({self.old_len},{self.new_len}) do not match "
                f"body counts ({old},{new})"
            )

    def old_range(self) -> tuple[int, int]:
        """Affected old-file range as a 1-based inclusive (lo, hi).

        Empty-side hunks yield (p+1, p): an empty interval at the insertion
        point, i.e. the new lines go before old line p+1.
        """
        if self.old_len == 0:
            return self.old_start + 1, self.old_start
        return self.old_start, self.old_start + self.old_len - 1


@dataclass(frozen=True)
class FileDiff:
    """All hunks for one file, plus any opaque preamble lines."""

    old_path: str
    new_path: str
    hunks: tuple[Hunk, ...]
    preamble: tuple[str, ...] = ()
    git_prefixes: bool = True

    @property
    def is_creation(self) -> bool:
        return self.old_path == NULL_PATH

    @property
    def is_deletion(self) -> bool:
        return self.new_path == NULL_PATH

    @property
    def path(self) -> str:
        """The effective target path (new side unless this is a deletion)."""
        return self.old_path if self.is_deletion else self.new_path

    def validate(self) -> None:
        prev_hi = 0
        for hunk in self.hunks:
            hunk.validate()
            lo, hi = hunk.old_range()
            if lo <= prev_hi:
                raise PatchParseError(
                    f"{self.path}: hunks out of order or overlapping in old coordinates"
                )
            prev_hi = max(hi, lo - 1)


@dataclass(frozen=True)
class Patch:
    """An ordered collection of per-file diffs."""

    file_diffs: tuple[FileDiff, ...] = ()

    def validate(self) -> None:
        seen = set()
        for fd in self.file_diffs:
            fd.validate()
            key = (fd.old_path, fd.new_path)
            if key in seen:
                raise PatchParseError(f"duplicate file section for {key}")
            seen.add(key)

    def to_text(self) -> str:
        """Re-emit the patch as unified diff text."""
        if not self.file_diffs:
            return ""
        out: list[str] = []
        for fd in self.file_diffs:
            out.extend(fd.preamble)
            out.append(f"--- {_emit_path(fd.old_path, 'a', fd.git_prefixes)}")
            out.append(f"+++ {_emit_path(fd.new_path, 'b', fd.git_prefixes)}")
            for hunk in fd.hunks:
                out.extend(_emit_hunk(hunk))
        return "\n".join(out) + "\n"


@dataclass(frozen=True)
class SourceTree:
    """An immutable path → file-text mapping.

    Paths use forward slashes. Line endings are normalized to ``\\n`` on
    construction via :meth:`from_files`; the original ending of each file is
    recorded so :meth:`original_text` can re-emit it faithfully.
    """

    files: Mapping[str, str]
    line_endings: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for path in self.files:
            if "\\" in path:
                raise ValueError(f"path not normalized to forward slashes: {path!r}")

    @classmethod
    def from_files(cls, files: Mapping[str, str]) -> "SourceTree":
        normalized: dict[str, str] = {}
        endings: dict[str, str] = {}
        for path, text in files.items():
            clean = path.replace("\\", "/")
            if clean in normalized:
                raise ValueError(f"duplicate path after normalization: {clean!r}")
            if "\r\n" in text:
                endings[clean] = "\r\n"
                text = text.replace("\r\n", "\n")
            normalized[clean] = text
        return cls(files=normalized, line_endings=endings)

    def __contains__(self, path: str) -> bool:
        return path in self.files

    def get(self, path: str) -> str | None:
        return self.files.get(path)

    def __getitem__(self, path: str) -> str:
        return self.files[path]

    def paths(self) -> list[str]:
        return sorted(self.files)

    def original_text(self, path: str) -> str:
        """File text with its originally recorded line ending re-applied."""
        text = self.files[path]
        ending = self.line_endings.get(path)
        return text.replace("\n", ending) if ending else text


def split_lines(text: str) -> tuple[list[str], bool]:
    """Split file text into terminator-free lines plus a trailing-newline flag."""
    if text == "":
        return [], True
    parts = text.split("\n")
    if parts[-1] == "":
        return parts[:-1], True
    return parts, False


def join_lines(lines: list[str], trailing_newline: bool) -> str:
    if not lines:
        return ""
    return "\n".join(lines) + ("\n" if trailing_newline else "")


def _parse_path(label: str) -> str:
    # A tab separates the path from an optional timestamp.
    path = label.split("\t", 1)[0]
    return path


def _strip_git_prefix(path: str, prefix: str) -> tuple[str, bool]:
    if path == NULL_PATH:
        return path, False
    if path.startswith(prefix + "/"):
        return path[2:], True
    return path, False


def _emit_path(path: str, prefix: str, git_prefixes: bool) -> str:
    if path == NULL_PATH or not git_prefixes:
        return path
    return f"{prefix}/{path}"


def _format_count(start: int, length: int) -> str:
    return str(start) if length == 1 else f"{start},{length}"


def _emit_hunk(hunk: Hunk) -> list[str]:
    header = (
        f"@@ -{_format_count(hunk.old_start, hunk.old_len)} "
        f"+{_format_count(hunk.new_start, hunk.new_len)} @@"
    )
    if hunk.heading:
        header += f" {hunk.heading}"
    out = [header]
    for ln in hunk.lines:
        out.append(_PREFIX[ln.tag] + ln.text)
        if ln.no_newline:
            out.append(_NO_EOL_MARKER)
    return out


def parse_patch(text: str) -> Patch:
    """Parse unified diff text into a :class:`Patch`.

    Tolerates (and preserves) a ``diff --git`` style preamble before each
    file section. Raises :class:`EmptyPatchError` on empty input,
    :class:`PatchParseError` on count mismatches or garbage between
    sections, and :class:`UnsupportedPatchError` on binary sections.
    """
    if not text.strip():
        raise EmptyPatchError("empty patch text")
    lines, _ = split_lines(text)

    file_diffs: list[FileDiff] = []
    preamble: list[str] = []
    i = 0
    n = len(lines)
    while i < n:
        line = lines[i]
        if line.startswith("--- "):
            fd, i = _parse_file_section(lines, i, tuple(preamble))
            file_diffs.append(fd)
            preamble = []
        elif line.startswith(_BINARY_PREFIXES):
            raise UnsupportedPatchError("binary diffs are not supported", line=i + 1)
        elif line.startswith(_PREAMBLE_PREFIXES):
            preamble.append(line)
            i += 1
        elif line == "":
            # Tolerate blank separator lines between sections.
            preamble.append(line)
            i += 1
        else:
            raise PatchParseError(
                f"unexpected content between file sections: {line!r}", line=i + 1
            )
    if not file_diffs:
        raise EmptyPatchError("no file sections found")
    patch = Patch(tuple(file_diffs))
    patch.validate()
    return patch


def _parse_file_section(
    lines: list[str], i: int, preamble: tuple[str, ...]
) -> tuple[FileDiff, int]:
    old_label = _parse_path(lines[i][4:])
    if i + 1 >= len(lines) or not lines[i + 1].startswith("+++ "):
        raise PatchParseError("'---' line not followed by '+++'", line=i + 1)
    new_label = _parse_path(lines[i + 1][4:])
    old_path, old_pref = _strip_git_prefix(old_label, "a")
    new_path, new_pref = _strip_git_prefix(new_label, "b")
    git_prefixes = old_pref or new_pref
    i += 2

    hunks: list[Hunk] = []
    while i < len(lines) and lines[i].startswith("@@"):
        hunk, i = _parse_hunk(lines, i, len(hunks))
        hunks.append(hunk)
    if not hunks:
        raise PatchParseError(f"no hunks in section for {new_path!r}", line=i)
    return FileDiff(old_path, new_path, tuple(hunks), preamble, git_prefixes), i


def _parse_hunk(lines: list[str], i: int, hunk_index: int) -> tuple[Hunk, int]:
    m = _HUNK_HEADER_RE.match(lines[i])
    if not m:
        raise PatchParseError(f"malformed hunk header: {lines[i]!r}", line=i + 1)
    old_start = int(m.group(1))
    old_len = int(m.group(2)) if m.group(2) is not None else 1
    new_start = int(m.group(3))
    new_len = int(m.group(4)) if m.group(4) is not None else 1
    heading = m.group(5) or ""
    i += 1

    body: list[DiffLine] = []
    old_seen = new_seen = 0
    while old_seen < old_len or new_seen < new_len:
        if i >= len(lines):
            raise PatchParseError(
                f"hunk {hunk_index}: body ends before header counts are satisfied"
            )
        line = lines[i]
        if line == "":
            tag, text = CONTEXT, ""  # tolerated: stripped trailing space
        elif line.startswith("\\"):
            raise PatchParseError(
                f"hunk {hunk_index}: misplaced no-newline marker", line=i + 1
            )
        elif line[0] in _TAG_FOR_PREFIX:
            tag, text = _TAG_FOR_PREFIX[line[0]], line[1:]
        else:
            raise PatchParseError(
                f"hunk {hunk_index}: header/body count mismatch "
                f"(unexpected line {line!r})",
                line=i + 1,
            )
        if tag in (CONTEXT, DEL):
            old_seen += 1
        if tag in (CONTEXT, ADD):
            new_seen += 1
        if old_seen > old_len or new_seen > new_len:
            raise PatchParseError(
                f"hunk {hunk_index}: header/body count mismatch", line=i + 1
            )
        i += 1
        no_newline = i < len(lines) and lines[i].startswith("\\")
        if no_newline:
            i += 1
        body.append(DiffLine(tag, text, no_newline))
    # An extra tag-looking line here means the header undercounted.
    if i < len(lines):
        nxt = lines[i]
        if nxt and nxt[0] in _TAG_FOR_PREFIX and not _is_section_start(lines, i):
            raise PatchParseError(
                f"hunk {hunk_index}: header/body count mismatch "
                f"(body longer than header counts)",
                line=i + 1,
            )
    hunk = Hunk(old_start, old_len, new_start, new_len, tuple(body), heading)
    hunk.validate()
    return hunk, i


def _is_section_start(lines: list[str], i: int) -> bool:
    line = lines[i]
    if line.startswith("--- ") and i + 1 < len(lines) and lines[i + 1].startswith("+++ "):
        return True
    return line.startswith(_PREAMBLE_PREFIXES)


def apply_patch(tree: SourceTree, patch: Patch, *, drift: int = 0) -> SourceTree:
    """Apply ``patch`` to ``tree``, returning a new tree.

    Context and deleted lines must match exactly at their stated positions;
    ``drift`` allows hunks to match up to ±N lines away (default 0, exact).
    Untouched files are carried over byte-identically.
    """
    files = dict(tree.files)
    endings = dict(tree.line_endings)
    for fd in patch.file_diffs:
        if fd.is_creation:
            if fd.new_path in files:
                raise PatchApplyError(f"cannot create {fd.new_path}: already exists")
            src_text = ""
        else:
            if fd.old_path not in files:
                raise PatchApplyError(f"target file missing: {fd.old_path}")
            src_text = files[fd.old_path]
        new_text = _apply_file_diff(fd, src_text, drift)
        if fd.is_deletion:
            if new_text != "":
                raise PatchApplyError(
                    f"deletion of {fd.old_path} leaves residual content"
                )
            files.pop(fd.old_path)
            endings.pop(fd.old_path, None)
        else:
            if not fd.is_creation and fd.old_path != fd.new_path:
                files.pop(fd.old_path)
                endings.pop(fd.old_path, None)
            files[fd.new_path] = new_text
    return SourceTree(files=files, line_endings=endings)


def _apply_file_diff(fd: FileDiff, src_text: str, drift: int) -> str:
    lines, trailing_nl = split_lines(src_text)
    out: list[tuple[str, bool]] = []  # (text, followed-by-newline)
    cursor = 0  # 0-based index of the next unconsumed old line

    def emit_old(upto: int) -> None:
        nonlocal cursor
        for k in range(cursor, upto):
            has_nl = k < len(lines) - 1 or trailing_nl
            out.append((lines[k], has_nl))
        cursor = upto

    for idx, hunk in enumerate(fd.hunks):
        lo, _hi = hunk.old_range()
        want = lo - 1  # 0-based
        pos = _locate_hunk(fd, lines, trailing_nl, hunk, idx, want, drift)
        if pos < cursor:
            raise PatchApplyError(f"{fd.path}: hunk {idx} overlaps previous hunk")
        emit_old(pos)
        for ln in hunk.lines:
            if ln.tag == DEL:
                cursor += 1
            elif ln.tag == CONTEXT:
                out.append((ln.text, not ln.no_newline))
                cursor += 1
            else:
                out.append((ln.text, not ln.no_newline))
    emit_old(len(lines))

    for text, has_nl in out[:-1]:
        if not has_nl:
            raise PatchApplyError(
                f"{fd.path}: no-newline marker on a line that is not at end of file"
            )
    return "".join(t + ("\n" if nl else "") for t, nl in out)


def _match_hunk_at(
    lines: list[str], trailing_nl: bool, hunk: Hunk, pos: int
) -> tuple[int, str] | None:
    """Check context/del lines against ``lines`` starting at 0-based ``pos``.

    Returns None on a full match, else (1-based line, detail).
    """
    i = pos
    for ln in hunk.lines:
        if ln.tag == ADD:
            continue
        if i >= len(lines):
            return i + 1, "file ends before hunk does"
        if lines[i] != ln.text:
            return i + 1, f"expected {ln.text!r}, found {lines[i]!r}"
        at_eof_no_nl = i == len(lines) - 1 and not trailing_nl
        if ln.no_newline and not at_eof_no_nl:
            return i + 1, "no-newline marker does not match end of file"
        if not ln.no_newline and at_eof_no_nl:
            return i + 1, "file lacks trailing newline where hunk expects one"
        i += 1
    return None


def _locate_hunk(
    fd: FileDiff,
    lines: list[str],
    trailing_nl: bool,
    hunk: Hunk,
    idx: int,
    want: int,
    drift: int,
) -> int:
    first_failure = None
    for offset in _drift_offsets(drift):
        pos = want + offset
        if pos < 0 or pos > len(lines):
            continue
        failure = _match_hunk_at(lines, trailing_nl, hunk, pos)
        if failure is None:
            return pos
        if offset == 0:
            first_failure = failure
    if first_failure is None:
        first_failure = (want + 1, "no position within drift tolerance matches")
    raise ContextMismatchError(fd.path, idx, first_failure[0], first_failure[1])


def _drift_offsets(drift: int) -> Iterable[int]:
    yield 0
    for d in range(1, drift + 1):
        yield -d
        yield d


def reverse_patch(patch: Patch) -> Patch:
    """Swap the patch direction: add↔del, old↔new coordinates and paths."""
    return Patch(tuple(_reverse_file_diff(fd) for fd in patch.file_diffs))


def _reverse_file_diff(fd: FileDiff) -> FileDiff:
    swapped_tag = {ADD: DEL, DEL: ADD, CONTEXT: CONTEXT}
    hunks = tuple(
        Hunk(
            old_start=h.new_start,
            old_len=h.new_len,
            new_start=h.old_start,
            new_len=h.old_len,
            lines=tuple(
                DiffLine(swapped_tag[ln.tag], ln.text, ln.no_newline) for ln in h.lines
            ),
            heading=h.heading,
        )
        for h in fd.hunks
    )
    return replace(fd, old_path=fd.new_path, new_path=fd.old_path, hunks=hunks)


@dataclass(frozen=True)
class HunkCore:
    """The change block of a hunk with leading/trailing context stripped.

    ``old_pos`` is the 1-based old line where the core begins; for a pure
    insertion (``old_len`` 0) it is the line the insertion goes before.
    ``full_lo``/``full_hi`` record the hunk's original full old range.
    """

    lines: tuple[DiffLine, ...]
    old_pos: int
    old_len: int
    full_lo: int
    full_hi: int


def hunk_cores(fd: FileDiff) -> list[HunkCore]:
    """Minimal change cores of every hunk, dropping pure-context hunks."""
    cores: list[HunkCore] = []
    for hunk in fd.hunks:
        change_idx = [k for k, ln in enumerate(hunk.lines) if ln.tag != CONTEXT]
        if not change_idx:
            continue
        first, last = change_idx[0], change_idx[-1]
        core = hunk.lines[first : last + 1]
        lo, hi = hunk.old_range()
        old_pos = lo + first
        old_len = sum(1 for ln in core if ln.tag != ADD)
        cores.append(HunkCore(tuple(core), old_pos, old_len, lo, hi))
    return cores


def assemble_file_diff(
    fd: FileDiff, old_text: str, targets: list[tuple[int, int]]
) -> FileDiff:
    """Rebuild hunks so each core is surrounded by context covering its target.

    ``targets`` gives one inclusive 1-based old-line range per core (as
    returned by :func:`hunk_cores`, same order); each must contain its core.
    Cores whose clamped targets touch or overlap are merged into one hunk.
    Headers are recomputed; headings are dropped.
    """
    old_lines, trailing_nl = split_lines(old_text)
    n_old = len(old_lines)
    cores = hunk_cores(fd)
    if len(cores) != len(targets):
        raise ValueError("one target range per hunk core required")
    if not cores:
        return replace(fd, hunks=())

    clamped: list[tuple[int, int]] = []
    for core, (lo, hi) in zip(cores, targets):
        lo = max(1, min(lo, core.old_pos))
        hi = min(n_old, max(hi, core.old_pos + core.old_len - 1))
        clamped.append((lo, hi))

    # Group cores whose ranges touch (gap <= 0 lines) or overlap.
    groups: list[tuple[int, int, list[HunkCore]]] = []
    for core, (lo, hi) in zip(cores, clamped):
        if groups and lo <= groups[-1][1] + 1:
            glo, ghi, members = groups.pop()
            groups.append((glo, max(ghi, hi), members + [core]))
        else:
            groups.append((lo, hi, [core]))

    def context_line(index0: int) -> DiffLine:
        no_nl = index0 == n_old - 1 and not trailing_nl
        return DiffLine(CONTEXT, old_lines[index0], no_nl)

    hunks: list[Hunk] = []
    delta = 0  # cumulative (new - old) line count before the current group
    for lo, hi, members in groups:
        body: list[DiffLine] = []
        pos = lo
        for core in members:
            for k in range(pos, core.old_pos):
                body.append(context_line(k - 1))
            body.extend(core.lines)
            pos = core.old_pos + core.old_len
        for k in range(pos, hi + 1):
            body.append(context_line(k - 1))
        old_len = sum(1 for ln in body if ln.tag != ADD)
        new_len = sum(1 for ln in body if ln.tag != DEL)
        old_start = lo if old_len else lo - 1
        new_lo = lo + delta
        new_start = new_lo if new_len else new_lo - 1
        hunk = Hunk(old_start, old_len, new_start, new_len, tuple(body))
        hunk.validate()
        hunks.append(hunk)
        delta += new_len - old_len
    return replace(fd, hunks=tuple(hunks))


def render_patch(patch: Patch, context_lines: int, tree: SourceTree) -> str:
    """Re-render ``patch`` against ``tree`` with ``context_lines`` of context.

    The change content is preserved byte-for-byte; only the amount of
    surrounding context (and therefore the recomputed headers) changes.
    Raises :class:`PatchApplyError` if the patch does not apply to ``tree``.
    """
    if context_lines < 0:
        raise ValueError("context_lines must be >= 0")
    apply_patch(tree, patch)  # applicability check
    rebuilt: list[FileDiff] = []
    for fd in patch.file_diffs:
        old_text = "" if fd.is_creation else tree[fd.old_path]
        targets = [
            (core.old_pos - context_lines, core.old_pos + core.old_len - 1 + context_lines)
            for core in hunk_cores(fd)
        ]
        new_fd = assemble_file_diff(fd, old_text, targets)
        if new_fd.hunks:
            rebuilt.append(new_fd)
    return Patch(tuple(rebuilt)).to_text()


def skeleton_tree(patch: Patch, filler: str = "# ...") -> SourceTree:
    """Reconstruct a partial pre-commit tree from a patch's own context.

    Known lines (context and deletions) are placed at their stated old
    positions; gaps are padded with ``filler`` lines. The result is exactly
    what the patch needs in order to apply, which makes it a usable
    fallback when real pre-commit file contents are unavailable. Files the
    patch creates are omitted.
    """
    files: dict[str, str] = {}
    for fd in patch.file_diffs:
        if fd.is_creation:
            continue
        lines: list[str] = []
        trailing_nl = True
        for hunk in fd.hunks:
            lo, _hi = hunk.old_range()
            while len(lines) < lo - 1:
                lines.append(filler)
            for ln in hunk.lines:
                if ln.tag == ADD:
                    continue
                lines.append(ln.text)
                if ln.no_newline:
                    trailing_nl = False
        files[fd.old_path] = join_lines(lines, trailing_nl)
    return SourceTree(files=files)

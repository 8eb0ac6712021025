"""Function-level context for patches.

Two patch views feed the critics: hunks widened to cover the entire
enclosing function or method, and the full post-change text of every
touched function ("post-commit functions"). Function boundaries come from
an indentation-and-keyword scanner, so slightly broken code (as agent
patches sometimes produce) still scans.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from . import diff as diffmod
from .diff import ADD, DEL, FileDiff, Patch, SourceTree
from .errors import PatchCriticError

logger = logging.getLogger(__name__)

MODULE_PRELUDE = "<module-prelude>"

_DEF_RE = re.compile(r"^\s*(?:async\s+)?(def|class)\s+(\w+)")

ORIGIN_MODIFIED = "modified"
ORIGIN_ADDED = "added"


class SpanScanError(PatchCriticError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class FunctionSpan:
    """Line extent of one function or method, decorators included."""

    file_path: str
    qualified_name: str
    start_line: int  # 1-based, inclusive
    end_line: int  # 1-based, inclusive

    def contains(self, line: int) -> bool:
        return self.start_line <= line <= self.end_line


@dataclass(frozen=True)
class SourceFragment:
    """Post-change text of one touched function (or top-level region)."""

    file_path: str
    qualified_name: str
    text: str
    origin: str  # ORIGIN_MODIFIED or ORIGIN_ADDED
    start_line: int = 0
    end_line: int = 0


@dataclass
class _LineInfo:
    indent: int
    blank: bool
    comment: bool
    continuation: bool  # inside brackets / string / after backslash


def _scan_lines(lines: list[str]) -> list[_LineInfo]:
    """Classify physical lines, tracking brackets, strings and backslashes."""
    infos: list[_LineInfo] = []
    depth = 0
    string_delim: str | None = None  # "'''" / '"""' / "'" / '"'
    backslash = False
    for lineno, raw in enumerate(lines, start=1):
        continuation = depth > 0 or string_delim is not None or backslash
        stripped = raw.strip()
        expanded = raw.expandtabs(8)
        infos.append(
            _LineInfo(
                indent=len(expanded) - len(expanded.lstrip()),
                blank=not stripped,
                comment=stripped.startswith("#"),
                continuation=continuation,
            )
        )
        backslash = False
        i = 0
        while i < len(raw):
            ch = raw[i]
            if string_delim is not None:
                if ch == "\\" and len(string_delim) == 1:
                    i += 2
                    continue
                if raw.startswith(string_delim, i):
                    i += len(string_delim)
                    string_delim = None
                    continue
                i += 1
                continue
            if ch == "#":
                break
            if ch in "\"'":
                triple = raw[i : i + 3]
                if triple in ('"""', "'''"):
                    string_delim = triple
                    i += 3
                else:
                    string_delim = ch
                    i += 1
                continue
            if ch in "([{":
                depth += 1
            elif ch in ")]}":
                depth = max(0, depth - 1)
            elif ch == "\\" and i == len(raw) - 1:
                backslash = True
            i += 1
        if string_delim is not None and len(string_delim) == 1:
            # Unterminated single-quoted string: ends at the newline.
            string_delim = None
            if depth < 0:
                raise SpanScanError("unbalanced brackets", line=lineno)
    return infos


def find_function_spans(file_text: str, file_path: str = "") -> list[FunctionSpan]:
    """Locate every function and method definition in Python-like source.

    A ``def`` (or ``async def``) opens a span at its first decorator line;
    the span ends at the last substantive line indented deeper than the
    definition. Blank and comment-only lines neither end nor extend a span.
    Nested definitions are reported with dotted names; class names join the
    dotted path but classes themselves yield no span.
    """
    lines = file_text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    infos = _scan_lines(lines)

    spans: list[FunctionSpan] = []
    # Stack frames: (kind, name, indent, start_line, last_body_line)
    stack: list[list] = []
    pending_decorator: int | None = None

    def close_frames(indent: int) -> None:
        while stack and indent <= stack[-1][2]:
            _close_top()

    def _close_top() -> None:
        kind, name, _indent, start, last = stack.pop()
        if kind == "def":
            qual = ".".join(f[1] for f in stack) + ("." if stack else "") + name
            spans.append(FunctionSpan(file_path, qual, start, max(last, start)))

    for lineno, (raw, info) in enumerate(zip(lines, infos), start=1):
        if info.blank or info.comment:
            continue
        if info.continuation:
            for frame in stack:
                frame[4] = lineno
            continue
        close_frames(info.indent)
        stripped = raw.strip()
        if stripped.startswith("@"):
            if pending_decorator is None:
                pending_decorator = lineno
            for frame in stack:
                frame[4] = lineno
            continue
        m = _DEF_RE.match(raw)
        if m:
            start = pending_decorator if pending_decorator is not None else lineno
            stack.append([m.group(1), m.group(2), info.indent, start, lineno])
        else:
            for frame in stack:
                frame[4] = lineno
        pending_decorator = None

    while stack:
        _close_top()
    spans.sort(key=lambda s: (s.start_line, -s.end_line))
    return spans


def _spans_by_file(tree: SourceTree, paths: set[str]) -> dict[str, list[FunctionSpan]]:
    out = {}
    for path in paths:
        text = tree.get(path)
        out[path] = find_function_spans(text, path) if text is not None else []
    return out


def _outermost(spans: list[FunctionSpan], line: int) -> FunctionSpan | None:
    best = None
    for span in spans:
        if span.contains(line) and (best is None or span.start_line < best.start_line):
            best = span
    return best


def enhance_context(patch: Patch, pre_tree: SourceTree) -> Patch:
    """Widen each hunk to cover the enclosing function/method spans.

    Every hunk's old-line range grows to the union of its original range
    and all pre-change function spans that range intersects; hunks whose
    widened ranges touch are merged. Hunks outside every function keep
    their context as-is. Applying the result to ``pre_tree`` yields the
    same post state as the original patch, byte for byte.
    """
    diffmod.apply_patch(pre_tree, patch)  # applicability check
    rebuilt: list[FileDiff] = []
    for fd in patch.file_diffs:
        if fd.is_creation:
            rebuilt.append(fd)
            continue
        old_text = pre_tree[fd.old_path]
        try:
            spans = find_function_spans(old_text, fd.old_path)
        except SpanScanError as exc:
            logger.warning(
                "span scan failed for %s (%s); leaving hunk context unchanged",
                fd.old_path,
                exc,
            )
            spans = []
        targets = []
        for core in diffmod.hunk_cores(fd):
            lo, hi = core.full_lo, core.full_hi
            for span in spans:
                if span.start_line <= hi and span.end_line >= lo:
                    lo = min(lo, span.start_line)
                    hi = max(hi, span.end_line)
            targets.append((lo, hi))
        rebuilt.append(diffmod.assemble_file_diff(fd, old_text, targets))
    return Patch(tuple(rebuilt))


def _changed_positions(fd: FileDiff) -> tuple[list[int], list[tuple[int, int]]]:
    """New-side line numbers of adds, and (old_line, new_seam) of deletes."""
    adds: list[int] = []
    dels: list[tuple[int, int]] = []
    for hunk in fd.hunks:
        old_ln = hunk.old_range()[0]
        new_ln = hunk.new_start if hunk.new_len else hunk.new_start + 1
        for ln in hunk.lines:
            if ln.tag == ADD:
                adds.append(new_ln)
                new_ln += 1
            elif ln.tag == DEL:
                dels.append((old_ln, new_ln))
                old_ln += 1
            else:
                old_ln += 1
                new_ln += 1
    return adds, dels


def extract_post_commit_functions(
    patch: Patch, pre_tree: SourceTree
) -> list[SourceFragment]:
    """Full post-change text of every function a patch touches.

    One fragment per outermost function/method whose post-change span
    contains an added line or whose pre-change counterpart lost lines.
    Changes outside any function yield a synthetic ``<module-prelude>``
    fragment covering the touched top-level region. Functions that a patch
    deletes entirely have no post-change span; they are logged and skipped.
    """
    post_tree = diffmod.apply_patch(pre_tree, patch)
    fragments: list[SourceFragment] = []

    for fd in patch.file_diffs:
        if fd.is_deletion:
            logger.info("whole file deleted, nothing to extract: %s", fd.old_path)
            continue
        post_text = post_tree[fd.path]
        post_lines = post_text.split("\n")
        post_spans = find_function_spans(post_text, fd.path)
        pre_text = "" if fd.is_creation else pre_tree[fd.old_path]
        pre_spans = find_function_spans(pre_text, fd.old_path) if pre_text else []
        pre_names = {s.qualified_name for s in pre_spans}

        adds, dels = _changed_positions(fd)
        touched: dict[tuple[int, int], FunctionSpan] = {}
        prelude_anchors: list[int] = []

        for new_ln in adds:
            span = _outermost(post_spans, new_ln)
            if span is not None:
                touched[(span.start_line, span.end_line)] = span
            else:
                prelude_anchors.append(new_ln)

        post_by_name: dict[str, FunctionSpan] = {}
        for span in post_spans:
            post_by_name.setdefault(span.qualified_name, span)
        for old_ln, new_seam in dels:
            pre_span = _outermost(pre_spans, old_ln)
            if pre_span is not None:
                post_span = post_by_name.get(pre_span.qualified_name)
                if post_span is not None:
                    touched[(post_span.start_line, post_span.end_line)] = post_span
                else:
                    logger.info(
                        "function deleted by patch: %s in %s",
                        pre_span.qualified_name,
                        fd.old_path,
                    )
            else:
                for anchor in (new_seam - 1, new_seam):
                    if 1 <= anchor <= len(post_lines) and _outermost(
                        post_spans, anchor
                    ) is None:
                        prelude_anchors.append(anchor)
                        break

        file_fragments = []
        for span in touched.values():
            text = "\n".join(post_lines[span.start_line - 1 : span.end_line])
            origin = (
                ORIGIN_MODIFIED if span.qualified_name in pre_names else ORIGIN_ADDED
            )
            file_fragments.append(
                SourceFragment(
                    fd.path, span.qualified_name, text, origin,
                    span.start_line, span.end_line,
                )
            )
        file_fragments.extend(
            _prelude_fragments(fd, post_lines, post_spans, prelude_anchors)
        )
        file_fragments.sort(key=lambda f: f.start_line)
        fragments.extend(file_fragments)

    fragments.sort(key=lambda f: (f.file_path, f.start_line))
    return fragments


def _prelude_fragments(
    fd: FileDiff,
    post_lines: list[str],
    post_spans: list[FunctionSpan],
    anchors: list[int],
) -> list[SourceFragment]:
    """Synthetic fragments for touched regions outside every function."""
    if not anchors:
        return []
    n = len(post_lines)
    if post_lines and post_lines[-1] == "":
        n -= 1
    in_span = [False] * (n + 2)
    for span in post_spans:
        for k in range(span.start_line, min(span.end_line, n) + 1):
            in_span[k] = True

    regions: list[tuple[int, int]] = []
    for anchor in sorted(set(anchors)):
        anchor = min(max(anchor, 1), n)
        if n == 0 or in_span[anchor]:
            continue
        lo = anchor
        while lo > 1 and not in_span[lo - 1]:
            lo -= 1
        hi = anchor
        while hi < n and not in_span[hi + 1]:
            hi += 1
        if regions and lo <= regions[-1][1] + 1:
            regions[-1] = (regions[-1][0], max(hi, regions[-1][1]))
        else:
            regions.append((lo, hi))

    origin = ORIGIN_ADDED if fd.is_creation else ORIGIN_MODIFIED
    return [
        SourceFragment(
            fd.path,
            MODULE_PRELUDE,
            "\n".join(post_lines[lo - 1 : hi]),
            origin,
            lo,
            hi,
        )
        for lo, hi in regions
    ]

"""Document splitting: noise removal, token budgeting, recursive and
sliding-window chunkers.

Chunks keep natural language intact: connector words are never removed,
because "living with family" and "living without family" mean opposite
things. Only true noise (headers, timestamps, routing lines, page
footers) is stripped, and strictly line-by-line so surviving text is
byte-identical to the input.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

# Sentinel for the one default rule a regex cannot express: a line whose
# letters are at least 80% uppercase.
ALLCAPS_HEADER_RULE = "<allcaps-header>"

DEFAULT_NOISE_RULES: tuple[str, ...] = (
    ALLCAPS_HEADER_RULE,
    r"^\s*\d{4}-\d{2}-\d{2}([ T]\d{2}:\d{2}(:\d{2})?)?\s*$",
    r"^\s*Routing:",
    r"^\s*Page \d+ of \d+\s*$",
)

DEFAULT_SEPARATORS: tuple[str, ...] = ("\n\n", ". ", "\n", " ")


@dataclass(frozen=True)
class Chunk:
    """A text unit with provenance into the cleaned source document."""

    chunk_id: str
    source_id: str
    text: str
    char_start: int
    char_end: int
    token_count: int
    metadata: dict[str, str] = field(default_factory=dict)


@dataclass
class ChunkPolicy:
    strategy: str = "recursive"  # "recursive" | "sliding"
    max_tokens: int = 256
    overlap_tokens: int = 32  # sliding only
    separators: tuple[str, ...] = DEFAULT_SEPARATORS
    noise_rules: tuple[str, ...] = DEFAULT_NOISE_RULES

    def __post_init__(self) -> None:
        if self.strategy not in ("recursive", "sliding"):
            raise ValueError(f"unknown chunking strategy: {self.strategy!r}")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")
        if self.strategy == "sliding" and not 0 <= self.overlap_tokens < self.max_tokens:
            raise ValueError("overlap_tokens must be in [0, max_tokens)")


def count_tokens(text: str) -> int:
    """Deterministic token estimate: ceil(chars/4) per whitespace word.

    A stand-in for vendor tokenizers, close enough to the usual
    token-to-character ratio for budgeting purposes.
    """
    return sum(math.ceil(len(word) / 4) for word in text.split())


def _is_allcaps_header(line: str) -> bool:
    letters = [c for c in line if c.isalpha()]
    if len(letters) < 3:
        return False
    upper = sum(1 for c in letters if c.isupper())
    return upper / len(letters) >= 0.8


def strip_noise(text: str, rules: tuple[str, ...] | list[str] = DEFAULT_NOISE_RULES) -> str:
    """Drop lines matching any rule; surviving lines are untouched.

    Rules are ordered regex patterns (``re.search`` per line), plus the
    built-in all-caps-header sentinel. Idempotent by construction.
    """
    compiled = [
        (None if rule == ALLCAPS_HEADER_RULE else re.compile(rule)) for rule in rules
    ]
    kept = []
    for line in text.split("\n"):
        noisy = False
        for rule, pattern in zip(rules, compiled):
            if pattern is None:
                noisy = _is_allcaps_header(line)
            else:
                noisy = pattern.search(line) is not None
            if noisy:
                break
        if not noisy:
            kept.append(line)
    return "\n".join(kept)


def _split_span_at_chars(text: str, start: int, end: int, max_tokens: int) -> list[tuple[int, int]]:
    """Character-boundary fallback: longest prefixes within the budget."""
    spans = []
    pos = start
    while pos < end:
        lo, hi = pos + 1, end
        # largest cut with count_tokens(text[pos:cut]) <= max_tokens;
        # token count is monotone in prefix length, so bisect
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if count_tokens(text[pos:mid]) <= max_tokens:
                lo = mid
            else:
                hi = mid - 1
        spans.append((pos, lo))
        pos = lo
    return spans


def _split_span(
    text: str, start: int, end: int, separators: tuple[str, ...], max_tokens: int
) -> list[tuple[int, int]]:
    if count_tokens(text[start:end]) <= max_tokens:
        return [(start, end)] if end > start else []
    if not separators:
        return _split_span_at_chars(text, start, end, max_tokens)
    sep = separators[0]
    # segment boundaries: cut after each separator occurrence
    cuts = [start]
    pos = text.find(sep, start)
    while pos != -1 and pos + len(sep) <= end:
        cuts.append(pos + len(sep))
        pos = text.find(sep, pos + len(sep))
    if end > cuts[-1]:
        cuts.append(end)
    if len(cuts) == 2:  # separator absent: try the next tier
        return _split_span(text, start, end, separators[1:], max_tokens)
    segments = list(zip(cuts[:-1], cuts[1:]))
    spans: list[tuple[int, int]] = []
    cur_start: int | None = None
    cur_end = start
    for seg_start, seg_end in segments:
        if count_tokens(text[seg_start:seg_end]) > max_tokens:
            # the segment alone busts the budget: flush and descend a tier
            if cur_start is not None:
                spans.append((cur_start, cur_end))
                cur_start = None
            spans.extend(_split_span(text, seg_start, seg_end, separators[1:], max_tokens))
            continue
        if cur_start is None:
            cur_start, cur_end = seg_start, seg_end
        elif count_tokens(text[cur_start:seg_end]) <= max_tokens:
            cur_end = seg_end
        else:
            spans.append((cur_start, cur_end))
            cur_start, cur_end = seg_start, seg_end
    if cur_start is not None:
        spans.append((cur_start, cur_end))
    return spans


def _make_chunk(source_id: str, cleaned: str, ordinal: int, start: int, end: int) -> Chunk:
    body = cleaned[start:end]
    return Chunk(
        chunk_id=f"{source_id}#{ordinal}",
        source_id=source_id,
        text=body,
        char_start=start,
        char_end=end,
        token_count=count_tokens(body),
    )


def split_recursive(source_id: str, text: str, policy: ChunkPolicy) -> list[Chunk]:
    """Boundary-aware greedy packing into contiguous chunks.

    Prefers the earliest separator tier that keeps a chunk under budget
    and descends a tier only when a single segment exceeds it; the last
    resort is a character split. Concatenating the chunk texts
    reproduces the cleaned source exactly.
    """
    cleaned = strip_noise(text, policy.noise_rules)
    if not cleaned:
        return []
    spans = _split_span(cleaned, 0, len(cleaned), tuple(policy.separators), policy.max_tokens)
    return [
        _make_chunk(source_id, cleaned, i, start, end)
        for i, (start, end) in enumerate(spans)
    ]


def _word_spans(text: str) -> list[tuple[int, int]]:
    return [(m.start(), m.end()) for m in re.finditer(r"\S+", text)]


def split_sliding(source_id: str, text: str, policy: ChunkPolicy) -> list[Chunk]:
    """Overlapping windows of at most ``max_tokens``, word-aligned.

    Consecutive windows share the trailing words worth ``overlap_tokens``
    (fewer at the tail). A single word over the budget is split at
    character boundaries so no chunk ever exceeds it.
    """
    cleaned = strip_noise(text, policy.noise_rules)
    words = _word_spans(cleaned)
    if not words:
        return []
    tokens = [count_tokens(cleaned[s:e]) for s, e in words]
    chunks: list[Chunk] = []
    ordinal = 0
    s = 0
    n = len(words)
    while s < n:
        if tokens[s] > policy.max_tokens:
            # oversized single word: emit character-split pieces
            for piece_start, piece_end in _split_span_at_chars(
                cleaned, words[s][0], words[s][1], policy.max_tokens
            ):
                chunks.append(_make_chunk(source_id, cleaned, ordinal, piece_start, piece_end))
                ordinal += 1
            s += 1
            continue
        budget = policy.max_tokens
        e = s
        total = tokens[s]
        while e + 1 < n and tokens[e + 1] <= policy.max_tokens and total + tokens[e + 1] <= budget:
            e += 1
            total += tokens[e]
        chunks.append(_make_chunk(source_id, cleaned, ordinal, words[s][0], words[e][1]))
        ordinal += 1
        if e + 1 >= n:
            break
        if policy.overlap_tokens == 0:
            s = e + 1
            continue
        # largest trailing suffix of the window within the overlap budget
        next_s = e + 1
        suffix = 0
        for w in range(e, s, -1):
            if suffix + tokens[w] > policy.overlap_tokens:
                break
            suffix += tokens[w]
            next_s = w
        s = max(next_s, s + 1)
    return chunks


def split_document(source_id: str, text: str, policy: ChunkPolicy) -> list[Chunk]:
    """Dispatch on the policy's strategy."""
    if policy.strategy == "sliding":
        return split_sliding(source_id, text, policy)
    return split_recursive(source_id, text, policy)

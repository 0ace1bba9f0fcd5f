"""Phrase mining: extract consistent phrase pairs from aligned sentence
pairs, score them with translational and lexical probabilities, filter by
a weighted-average threshold, and keep the longest unique pairs.

Extraction uses the tight variant of the standard consistency rule: every
link touching either span stays inside the span pair, at least one link is
inside, and span boundary words are never unaligned (no extension over
unaligned words). That makes the extracted set brute-force checkable.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .align import AlignmentMatrix, LexicalTable, format_pharaoh, parse_pharaoh
from .corpus import SentencePair, tokens
from .errors import InputOutputError, ParseError, StructuralError, ValidationError

Span = tuple[int, int]  # inclusive token range


@dataclass(frozen=True)
class PhraseTableEntry:
    src_phrase: tuple[str, ...]
    tgt_phrase: tuple[str, ...]
    phi_ts: float  # φ(tgt|src)
    phi_st: float  # φ(src|tgt)
    lex_ts: float  # lex(tgt|src)
    lex_st: float  # lex(src|tgt)
    joint_count: int
    alignment: AlignmentMatrix

    def key(self) -> tuple[tuple[str, ...], tuple[str, ...]]:
        return (self.src_phrase, self.tgt_phrase)

    def probabilities(self) -> tuple[float, float, float, float]:
        return (self.phi_ts, self.phi_st, self.lex_ts, self.lex_st)


@dataclass(frozen=True)
class PhraseScoreWeights:
    """Weights for the weighted-average score over the four probabilities,
    in the order (φ(tgt|src), φ(src|tgt), lex(tgt|src), lex(src|tgt))."""

    w_phi_ts: float = 1.0
    w_phi_st: float = 1.0
    w_lex_ts: float = 1.0
    w_lex_st: float = 1.0
    threshold: float = 0.95

    def __post_init__(self):
        ws = (self.w_phi_ts, self.w_phi_st, self.w_lex_ts, self.w_lex_st)
        if any(w < 0 for w in ws):
            raise ValidationError(f"phrase score weights must be non-negative, got {ws}")
        if sum(ws) == 0:
            raise ValidationError("phrase score weights must not all be zero")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValidationError(f"phrase score threshold must be in [0,1], got {self.threshold}")

    def score(self, entry: PhraseTableEntry) -> float:
        ws = (self.w_phi_ts, self.w_phi_st, self.w_lex_ts, self.w_lex_st)
        return sum(w * p for w, p in zip(ws, entry.probabilities())) / sum(ws)


def extract_phrases(
    pair: SentencePair, alignment: AlignmentMatrix, max_len: int = 7
) -> set[tuple[Span, Span]]:
    """All tight consistent span pairs of a sentence pair, as index spans.

    A span pair qualifies when it contains at least one link, no link
    crosses its boundary, both boundary words on both sides are aligned,
    and both spans are at most max_len tokens.
    """
    src, tgt = tokens(pair.src), tokens(pair.tgt)
    if alignment.src_len != len(src) or alignment.tgt_len != len(tgt):
        raise StructuralError(
            f"pair {pair.id}: alignment is {alignment.src_len}x{alignment.tgt_len} "
            f"but tokens are {len(src)}x{len(tgt)}"
        )
    if max_len < 1:
        raise ValidationError(f"max_len must be >= 1, got {max_len}")
    return extract_spans(alignment, max_len)


def extract_spans(alignment: AlignmentMatrix, max_len: int) -> set[tuple[Span, Span]]:
    """extract_phrases on a bare alignment matrix."""
    links = alignment.links
    if not links:
        return set()
    links_of_src: dict[int, list[int]] = defaultdict(list)
    links_of_tgt: dict[int, list[int]] = defaultdict(list)
    for i, j in links:
        links_of_src[i].append(j)
        links_of_tgt[j].append(i)

    result = set()
    for s1 in range(alignment.src_len):
        if s1 not in links_of_src:
            continue  # boundary word must be aligned
        t_min, t_max = alignment.tgt_len, -1
        for s2 in range(s1, min(s1 + max_len, alignment.src_len)):
            if s2 not in links_of_src:
                continue  # tight: the last source word must be aligned
            for j in links_of_src[s2]:
                t_min, t_max = min(t_min, j), max(t_max, j)
            if t_max - t_min + 1 > max_len:
                break  # target span only grows with s2
            # consistency: links into the target span must come from [s1, s2]
            consistent = all(
                s1 <= i <= s2 for j in range(t_min, t_max + 1) for i in links_of_tgt.get(j, ())
            )
            if consistent:
                result.add(((s1, s2), (t_min, t_max)))
    return result


def _phrase_local_alignment(alignment: AlignmentMatrix, src_span: Span, tgt_span: Span) -> AlignmentMatrix:
    (s1, s2), (t1, t2) = src_span, tgt_span
    local = frozenset(
        (i - s1, j - t1) for i, j in alignment.links if s1 <= i <= s2 and t1 <= j <= t2
    )
    return AlignmentMatrix(s2 - s1 + 1, t2 - t1 + 1, local)


def lexical_weight(
    src_phrase: tuple[str, ...],
    tgt_phrase: tuple[str, ...],
    alignment: AlignmentMatrix,
    lex: LexicalTable,
    direction: str = "src2tgt",
) -> float:
    """Alignment-aware product-of-averages word translation score.

    For src2tgt: over target positions j, average t(tgt_j | src_i) over the
    linked i, or t(tgt_j | NULL) when j is unaligned. tgt2src mirrors this
    over source positions with a tgt2src table.
    """
    if alignment.src_len != len(src_phrase) or alignment.tgt_len != len(tgt_phrase):
        raise StructuralError(
            f"alignment {alignment.src_len}x{alignment.tgt_len} does not match phrase "
            f"lengths {len(src_phrase)}x{len(tgt_phrase)}"
        )
    if direction == "src2tgt":
        emitted, conditioning = tgt_phrase, src_phrase
        linked: dict[int, list[int]] = defaultdict(list)
        for i, j in alignment.links:
            linked[j].append(i)
    elif direction == "tgt2src":
        emitted, conditioning = src_phrase, tgt_phrase
        linked = defaultdict(list)
        for i, j in alignment.links:
            linked[i].append(j)
    else:
        raise ValidationError(f"unknown direction {direction!r}")

    null = lex.null_word if lex.null_word is not None else "<NULL>"
    weight = 1.0
    for pos, word in enumerate(emitted):
        partners = linked.get(pos)
        if partners:
            total = sum(lex.prob(conditioning[p], word) for p in partners)
            weight *= total / len(partners)
        else:
            weight *= lex.prob(null, word)
    return weight


def build_phrase_table(
    corpus,
    alignments: Iterable[AlignmentMatrix],
    lex_fwd: LexicalTable,
    lex_rev: LexicalTable,
    max_len: int = 7,
) -> list[PhraseTableEntry]:
    """Mine all pairs of a corpus and aggregate them into a phrase table.

    Expects one alignment per pair, in corpus order.
    """
    alignments = list(alignments)
    if len(alignments) != len(corpus.pairs):
        raise StructuralError(
            f"{len(corpus.pairs)} pairs but {len(alignments)} alignments"
        )
    mined = []
    for pair, alignment in zip(corpus.pairs, alignments):
        mined.extend(mine_pair(pair, alignment, max_len))
    return aggregate_phrase_table(mined, lex_fwd, lex_rev)


def aggregate_phrase_table(
    mined: Iterable[tuple[tuple[str, ...], tuple[str, ...], AlignmentMatrix]],
    lex_fwd: LexicalTable,
    lex_rev: LexicalTable,
) -> list[PhraseTableEntry]:
    """Aggregate mined phrase-pair occurrences into a scored phrase table.

    φ(tgt|src) and φ(src|tgt) are relative joint frequencies; lexical
    weights use the within-phrase alignment of the first occurrence. The
    result is sorted by (src, tgt) phrase for deterministic output.
    """
    joint: dict[tuple[tuple[str, ...], tuple[str, ...]], int] = defaultdict(int)
    first_alignment: dict[tuple[tuple[str, ...], tuple[str, ...]], AlignmentMatrix] = {}
    src_total: dict[tuple[str, ...], int] = defaultdict(int)
    tgt_total: dict[tuple[str, ...], int] = defaultdict(int)

    for src_phrase, tgt_phrase, local in mined:
        key = (src_phrase, tgt_phrase)
        joint[key] += 1
        src_total[src_phrase] += 1
        tgt_total[tgt_phrase] += 1
        first_alignment.setdefault(key, local)

    entries = []
    for (src_phrase, tgt_phrase) in sorted(joint):
        count = joint[(src_phrase, tgt_phrase)]
        local = first_alignment[(src_phrase, tgt_phrase)]
        entries.append(
            PhraseTableEntry(
                src_phrase=src_phrase,
                tgt_phrase=tgt_phrase,
                phi_ts=count / src_total[src_phrase],
                phi_st=count / tgt_total[tgt_phrase],
                lex_ts=lexical_weight(src_phrase, tgt_phrase, local, lex_fwd, "src2tgt"),
                lex_st=lexical_weight(src_phrase, tgt_phrase, local, lex_rev, "tgt2src"),
                joint_count=count,
                alignment=local,
            )
        )
    return entries


def mine_pair(
    pair: SentencePair, alignment: AlignmentMatrix, max_len: int = 7
) -> list[tuple[tuple[str, ...], tuple[str, ...], AlignmentMatrix]]:
    """Extract one pair's phrase-pair occurrences as token tuples."""
    src, tgt = tokens(pair.src), tokens(pair.tgt)
    occurrences = []
    for (s1, s2), (t1, t2) in sorted(extract_phrases(pair, alignment, max_len)):
        occurrences.append(
            (
                tuple(src[s1 : s2 + 1]),
                tuple(tgt[t1 : t2 + 1]),
                _phrase_local_alignment(alignment, (s1, s2), (t1, t2)),
            )
        )
    return occurrences


def score_filter(
    entries: Iterable[PhraseTableEntry], weights: PhraseScoreWeights
) -> list[PhraseTableEntry]:
    """Keep entries whose weighted-average probability reaches the threshold."""
    return [e for e in entries if weights.score(e) >= weights.threshold]


def _contains(haystack: tuple[str, ...], needle: tuple[str, ...]) -> bool:
    n, h = len(needle), len(haystack)
    if n > h:
        return False
    return any(haystack[i : i + n] == needle for i in range(h - n + 1))


def dominates(a: PhraseTableEntry, b: PhraseTableEntry) -> bool:
    """True when b's phrases are contiguous subsequences of a's on both sides."""
    return a.key() != b.key() and _contains(a.src_phrase, b.src_phrase) and _contains(
        a.tgt_phrase, b.tgt_phrase
    )


def longest_unique(entries: Iterable[PhraseTableEntry]) -> list[PhraseTableEntry]:
    """Drop exact duplicates, then drop every entry dominated by another.

    Domination is bilateral contiguous containment; only maximal pairs
    survive. Input order of the survivors is preserved.
    """
    deduped: list[PhraseTableEntry] = []
    seen = set()
    for e in entries:
        if e.key() in seen:
            continue
        seen.add(e.key())
        deduped.append(e)

    kept = []
    for e in deduped:
        if not any(dominates(other, e) for other in deduped):
            kept.append(e)
    return kept


SEPARATOR = " ||| "


def format_entry(entry: PhraseTableEntry, decimals: int = 6) -> str:
    """One table line: src ||| tgt ||| four probabilities ||| alignment ||| count.

    decimals < 0 prints probabilities at full precision (cache use).
    """
    if decimals < 0:
        probs = " ".join(repr(p) for p in entry.probabilities())
    else:
        probs = " ".join(f"{p:.{decimals}f}" for p in entry.probabilities())
    return SEPARATOR.join(
        (
            " ".join(entry.src_phrase),
            " ".join(entry.tgt_phrase),
            probs,
            format_pharaoh(entry.alignment),
            str(entry.joint_count),
        )
    )


def parse_entry(line: str, lineno: int | None = None, path=None) -> PhraseTableEntry:
    parts = line.split(SEPARATOR)
    if len(parts) != 5:
        raise ParseError(
            f"expected 5 '|||'-separated fields, got {len(parts)}", path, lineno
        )
    src_phrase = tuple(parts[0].split())
    tgt_phrase = tuple(parts[1].split())
    if not src_phrase or not tgt_phrase:
        raise ParseError("empty phrase", path, lineno)
    prob_fields = parts[2].split()
    if len(prob_fields) != 4:
        raise ParseError(f"expected 4 probabilities, got {len(prob_fields)}", path, lineno)
    try:
        phi_ts, phi_st, lex_ts, lex_st = (float(p) for p in prob_fields)
        joint_count = int(parts[4])
    except ValueError as e:
        raise ParseError(f"bad numeric field: {e}", path, lineno) from e
    links = parse_pharaoh(parts[3], lineno, path)
    alignment = AlignmentMatrix(len(src_phrase), len(tgt_phrase), links)
    return PhraseTableEntry(
        src_phrase, tgt_phrase, phi_ts, phi_st, lex_ts, lex_st, joint_count, alignment
    )


def write_phrase_table(entries: Iterable[PhraseTableEntry], path, decimals: int = 6) -> None:
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for entry in entries:
                f.write(format_entry(entry, decimals) + "\n")
    except OSError as e:
        raise InputOutputError(f"cannot write {path}: {e.strerror}") from e


def read_phrase_table(path) -> Iterator[PhraseTableEntry]:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.rstrip("\n")
                if line:
                    yield parse_entry(line, lineno, path)
    except OSError as e:
        raise InputOutputError(f"cannot read {path}: {e.strerror}") from e


def entries_as_pairs(entries: Iterable[PhraseTableEntry], start_id: int = 0):
    """View phrase pairs as sentence pairs for downstream filtering/output."""
    return [
        SentencePair(start_id + n, " ".join(e.src_phrase), " ".join(e.tgt_phrase))
        for n, e in enumerate(entries)
    ]

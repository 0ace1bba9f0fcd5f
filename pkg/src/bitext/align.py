"""Word alignment: IBM Model 1 EM training, directional Viterbi alignment,
and symmetrization (intersection / union / grow-diag-final-and).

Model 1 is used deliberately: its EM objective has no bad local optima, so
training is reproducible and the likelihood trace is a testable invariant.
Tables are plain dicts keyed (conditioning word, emitted word); every
conditioning word's outgoing probabilities sum to 1 after each iteration.
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Literal

from .corpus import Corpus, SentencePair, tokens
from .errors import InputOutputError, ParseError, StructuralError, ValidationError

log = logging.getLogger(__name__)

Direction = Literal["src2tgt", "tgt2src"]

NULL_TOKEN = "<NULL>"

# below any mass EM can assign; used for unseen events at alignment time
PROB_FLOOR = 1e-12


@dataclass
class LexicalTable:
    """Word-translation probabilities t(emitted | conditioning)."""

    direction: Direction
    probs: dict[tuple[str, str], float] = field(default_factory=dict)
    null_word: str | None = None

    def prob(self, conditioning: str, emitted: str) -> float:
        return self.probs.get((conditioning, emitted), PROB_FLOOR)

    def validate(self, tol: float = 1e-9) -> None:
        """Check the normalization invariant: per-word sums equal 1."""
        sums: dict[str, float] = defaultdict(float)
        for (cond, _), p in self.probs.items():
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"probability out of [0,1] for {cond!r}: {p}")
            sums[cond] += p
        for cond, total in sums.items():
            if abs(total - 1.0) > tol:
                raise ValidationError(
                    f"outgoing probabilities of {cond!r} sum to {total!r}, not 1"
                )


@dataclass(frozen=True)
class AlignmentMatrix:
    """Set of (source index, target index) links for one sentence pair."""

    src_len: int
    tgt_len: int
    links: frozenset[tuple[int, int]]

    def __post_init__(self):
        if self.src_len < 1 or self.tgt_len < 1:
            raise StructuralError(
                f"alignment dimensions must be positive, got {self.src_len}x{self.tgt_len}"
            )
        for i, j in self.links:
            if not (0 <= i < self.src_len and 0 <= j < self.tgt_len):
                raise StructuralError(
                    f"link ({i},{j}) outside {self.src_len}x{self.tgt_len} alignment"
                )

    def transposed(self) -> "AlignmentMatrix":
        return AlignmentMatrix(self.tgt_len, self.src_len, frozenset((j, i) for i, j in self.links))


def _directional_sides(pair_tokens: tuple[list[str], list[str]], direction: Direction):
    """Return (conditioning tokens, emitted tokens) for a direction."""
    src, tgt = pair_tokens
    return (src, tgt) if direction == "src2tgt" else (tgt, src)


def em_iterations(
    corpus: Corpus,
    direction: Direction = "src2tgt",
    use_null: bool = True,
) -> Iterator[tuple[dict[tuple[str, str], float], float]]:
    """Generate (table, log-likelihood) once per EM iteration, indefinitely.

    The log-likelihood reported for an iteration is that of the table the
    iteration started from, so consecutive values are non-decreasing.
    Pairs with an empty side are skipped (their count is not reported here;
    train_model1 counts them).
    """
    sentences = []
    for pair in corpus.pairs:
        toks = (tokens(pair.src), tokens(pair.tgt))
        cond, emit = _directional_sides(toks, direction)
        if not cond or not emit:
            continue
        if use_null:
            cond = [NULL_TOKEN] + cond
        sentences.append((cond, emit))
    if not sentences:
        raise ValidationError("cannot train on a corpus with no non-empty pairs")

    # uniform init: for each conditioning word, 1 / #cooccurring emitted words
    cooccur: dict[str, set[str]] = defaultdict(set)
    for cond, emit in sentences:
        for c in cond:
            cooccur[c].update(emit)
    t: dict[tuple[str, str], float] = {}
    for c, emits in cooccur.items():
        init = 1.0 / len(emits)
        for e in emits:
            t[(c, e)] = init

    while True:
        counts: dict[tuple[str, str], float] = defaultdict(float)
        totals: dict[str, float] = defaultdict(float)
        log_likelihood = 0.0
        for cond, emit in sentences:
            log_len = math.log(len(cond))
            for e in emit:
                z = 0.0
                for c in cond:
                    z += t.get((c, e), 0.0)
                log_likelihood += math.log(z) - log_len
                for c in cond:
                    p = t.get((c, e), 0.0)
                    if p > 0.0:
                        share = p / z
                        counts[(c, e)] += share
                        totals[c] += share
        t = {ce: n / totals[ce[0]] for ce, n in counts.items()}
        yield t, log_likelihood


def train_model1(
    corpus: Corpus,
    iterations: int = 5,
    use_null: bool = True,
    direction: Direction = "src2tgt",
) -> tuple[LexicalTable, list[float]]:
    """Train a Model 1 lexical table by EM.

    Returns the table and the per-iteration log-likelihood trace
    (non-decreasing within numerical slack). Pairs with an empty side
    are skipped and counted in `train_model1.skipped` on the table.
    """
    if iterations < 1:
        raise ValidationError(f"iterations must be >= 1, got {iterations}")
    if not corpus.pairs:
        raise ValidationError("cannot train on an empty corpus")

    skipped = sum(1 for p in corpus.pairs if not tokens(p.src) or not tokens(p.tgt))
    if skipped:
        log.warning("skipping %d pair(s) with an empty side in %r", skipped, corpus.name)

    trace: list[float] = []
    table: dict[tuple[str, str], float] = {}
    for _, (table, ll) in zip(range(iterations), em_iterations(corpus, direction, use_null)):
        trace.append(ll)
    result = LexicalTable(
        direction=direction, probs=table, null_word=NULL_TOKEN if use_null else None
    )
    return result, trace


def viterbi_align(pair: SentencePair, table: LexicalTable) -> AlignmentMatrix:
    """Link each emitted word to its argmax conditioning word.

    For a src2tgt table each target word gets at most one source link;
    ties go to the lowest source index. With a null word, a target word
    is left unlinked when null strictly beats every source word, or when
    no source word has any trained mass for it (out-of-vocabulary case).
    """
    src, tgt = tokens(pair.src), tokens(pair.tgt)
    if not src or not tgt:
        raise ValidationError(f"pair {pair.id}: cannot align an empty side")
    cond, emit = _directional_sides((src, tgt), table.direction)

    links = set()
    for j, e in enumerate(emit):
        best_i = 0
        best_p = -1.0
        for i, c in enumerate(cond):
            p = table.prob(c, e)
            if p > best_p:
                best_p, best_i = p, i
        if table.null_word is not None:
            null_p = table.prob(table.null_word, e)
            if null_p > best_p or best_p <= PROB_FLOOR:
                continue
        links.add((best_i, j))

    return AlignmentMatrix(len(cond), len(emit), frozenset(links))


Heuristic = Literal["intersection", "union", "grow-diag-final-and"]

_NEIGHBORS = ((-1, 0), (0, -1), (1, 0), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1))


def symmetrize(
    forward: AlignmentMatrix,
    reverse: AlignmentMatrix,
    heuristic: Heuristic = "grow-diag-final-and",
) -> AlignmentMatrix:
    """Combine a src->tgt and a tgt->src alignment into one matrix.

    `reverse` is in its own orientation (its source side is the pair's
    target side) and is transposed here before combining.
    """
    if forward.src_len != reverse.tgt_len or forward.tgt_len != reverse.src_len:
        raise StructuralError(
            f"cannot symmetrize {forward.src_len}x{forward.tgt_len} forward with "
            f"{reverse.src_len}x{reverse.tgt_len} reverse alignment"
        )
    fwd = set(forward.links)
    rev = set(reverse.transposed().links)
    if heuristic == "intersection":
        result = fwd & rev
    elif heuristic == "union":
        result = fwd | rev
    elif heuristic == "grow-diag-final-and":
        result = _grow_diag_final_and(fwd, rev, forward.src_len, forward.tgt_len)
    else:
        raise ValidationError(
            f"unknown symmetrization heuristic {heuristic!r}; "
            "expected intersection, union, or grow-diag-final-and"
        )
    return AlignmentMatrix(forward.src_len, forward.tgt_len, frozenset(result))


def _grow_diag_final_and(fwd, rev, src_len, tgt_len):
    union = fwd | rev
    aligned = set(fwd & rev)
    src_done = {i for i, _ in aligned}
    tgt_done = {j for _, j in aligned}

    # grow-diag: adopt union neighbors of current points while either of
    # their words is still unaligned
    changed = True
    while changed:
        changed = False
        for i, j in sorted(aligned):
            for di, dj in _NEIGHBORS:
                cand = (i + di, j + dj)
                if cand in union and cand not in aligned:
                    if cand[0] not in src_done or cand[1] not in tgt_done:
                        aligned.add(cand)
                        src_done.add(cand[0])
                        tgt_done.add(cand[1])
                        changed = True

    # final-and: adopt remaining directional links whose words are both free
    for directional in (fwd, rev):
        for i, j in sorted(directional - aligned):
            if i not in src_done and j not in tgt_done:
                aligned.add((i, j))
                src_done.add(i)
                tgt_done.add(j)
    return aligned


def format_pharaoh(matrix: AlignmentMatrix) -> str:
    """One alignment as Pharaoh 'i-j' pairs, sorted for stable output."""
    return " ".join(f"{i}-{j}" for i, j in sorted(matrix.links))


def parse_pharaoh(line: str, lineno: int | None = None, path=None) -> frozenset[tuple[int, int]]:
    links = set()
    for token in line.split():
        left, sep, right = token.partition("-")
        if not sep or not left.isdigit() or not right.isdigit():
            raise ParseError(f"malformed alignment token {token!r}", path, lineno)
        links.add((int(left), int(right)))
    return frozenset(links)


def write_alignments(matrices: Iterable[AlignmentMatrix], path) -> None:
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for m in matrices:
                f.write(format_pharaoh(m) + "\n")
    except OSError as e:
        raise InputOutputError(f"cannot write {path}: {e.strerror}") from e


def format_prob(p: float, sig_digits: int = 10) -> str:
    """Probability at a fixed significant-digit count; <0 means full repr."""
    return repr(p) if sig_digits < 0 else f"{p:.{sig_digits}g}"


def write_lexical_table(table: LexicalTable, path, sig_digits: int = 10) -> None:
    """Serialize as 'conditioning emitted probability' lines, sorted."""
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for (cond, emit) in sorted(table.probs):
                f.write(f"{cond} {emit} {format_prob(table.probs[(cond, emit)], sig_digits)}\n")
    except OSError as e:
        raise InputOutputError(f"cannot write {path}: {e.strerror}") from e


def read_lexical_table(
    path, direction: Direction = "src2tgt", null_word: str | None = NULL_TOKEN
) -> LexicalTable:
    probs: dict[tuple[str, str], float] = {}
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split(" ")
                if len(parts) != 3:
                    raise ParseError("expected 'conditioning emitted probability'", path, lineno)
                try:
                    probs[(parts[0], parts[1])] = float(parts[2])
                except ValueError as e:
                    raise ParseError(f"bad probability {parts[2]!r}", path, lineno) from e
    except OSError as e:
        raise InputOutputError(f"cannot read {path}: {e.strerror}") from e
    seen_null = any(cond == null_word for cond, _ in probs)
    return LexicalTable(direction=direction, probs=probs, null_word=null_word if seen_null else None)

"""Byte-pair-encoding subword segmentation.

Greedy merge learning over whitespace-tokenized words, with a reserved
end-of-word symbol; application replays the merges in learned order per
word and marks subword continuations with the '@@ ' convention.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import InputOutputError, ParseError, ValidationError

END_OF_WORD = "</w>"
CONTINUATION = "@@"


@dataclass
class MergeList:
    """Ordered merge rules, highest learning-time frequency first."""

    rules: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self):
        if len(set(self.rules)) != len(self.rules):
            raise ValidationError("merge list contains duplicate rules")

    def __len__(self) -> int:
        return len(self.rules)

    def __iter__(self) -> Iterator[tuple[str, str]]:
        return iter(self.rules)


def _check_reserved(word: str) -> None:
    if CONTINUATION in word or END_OF_WORD in word:
        raise ValidationError(
            f"input token {word!r} contains a reserved BPE symbol "
            f"({CONTINUATION!r} or {END_OF_WORD!r})"
        )


def _word_symbols(word: str) -> tuple[str, ...]:
    return tuple(word) + (END_OF_WORD,)


def _merge_word(symbols: tuple[str, ...], rule: tuple[str, str]) -> tuple[str, ...]:
    left, right = rule
    out = []
    i = 0
    n = len(symbols)
    while i < n:
        if i < n - 1 and symbols[i] == left and symbols[i + 1] == right:
            out.append(left + right)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return tuple(out)


def learn_bpe(lines: Iterable[str], n_merges: int, min_pair_freq: int = 2) -> MergeList:
    """Learn merge rules greedily from a corpus side.

    Repeatedly merges the most frequent adjacent symbol pair within words
    (ties broken by lexicographically smallest pair) until n_merges rules
    are found or no pair occurs at least min_pair_freq times.
    """
    if n_merges < 0:
        raise ValidationError(f"n_merges must be >= 0, got {n_merges}")
    word_freq: dict[str, int] = defaultdict(int)
    for line in lines:
        for word in line.split():
            _check_reserved(word)
            word_freq[word] += 1
    if not word_freq:
        raise ValidationError("cannot learn BPE from an empty corpus")

    words = [(_word_symbols(w), freq) for w, freq in sorted(word_freq.items())]
    pair_counts: dict[tuple[str, str], int] = defaultdict(int)
    holders: dict[tuple[str, str], set[int]] = defaultdict(set)

    def account(idx: int, sign: int) -> None:
        symbols, freq = words[idx]
        for pos in range(len(symbols) - 1):
            pair = (symbols[pos], symbols[pos + 1])
            pair_counts[pair] += sign * freq
            if sign > 0:
                holders[pair].add(idx)
            elif pair_counts[pair] <= 0:
                del pair_counts[pair]
                holders[pair].discard(idx)

    for idx in range(len(words)):
        account(idx, +1)

    rules: list[tuple[str, str]] = []
    while len(rules) < n_merges and pair_counts:
        best = min(pair_counts, key=lambda p: (-pair_counts[p], p))
        if pair_counts[best] < min_pair_freq:
            break
        rules.append(best)
        for idx in sorted(holders[best]):
            account(idx, -1)
            words[idx] = (_merge_word(words[idx][0], best), words[idx][1])
            account(idx, +1)
    return MergeList(rules)


def segment_word(word: str, merges: MergeList) -> list[str]:
    """Split one word into subword strings (continuation markers not added)."""
    _check_reserved(word)
    if not word:
        return []
    symbols = _word_symbols(word)
    present = set(symbols)
    for rule in merges:
        if len(symbols) == 1:
            break
        if rule[0] in present and rule[1] in present:
            symbols = _merge_word(symbols, rule)
            present = set(symbols)
    out = list(symbols)
    if out[-1] == END_OF_WORD:
        out.pop()
    elif out[-1].endswith(END_OF_WORD):
        out[-1] = out[-1][: -len(END_OF_WORD)]
    return out


def apply_bpe(text: str, merges: MergeList, _cache: dict | None = None) -> str:
    """Segment a whitespace-tokenized line, marking continuations with '@@ '."""
    cache = _cache if _cache is not None else {}
    segmented = []
    for word in text.split():
        pieces = cache.get(word)
        if pieces is None:
            pieces = segment_word(word, merges)
            cache[word] = pieces
        segmented.extend(
            piece + CONTINUATION if k < len(pieces) - 1 else piece
            for k, piece in enumerate(pieces)
        )
    return " ".join(segmented)


def decode_bpe(text: str) -> str:
    """Undo apply_bpe: join continuation-marked subwords back into words."""
    return text.replace(CONTINUATION + " ", "")


def write_merge_file(merges: MergeList, path) -> None:
    """Merge file: a '#version'-style header, then one 'left right' rule per line."""
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("#version: 0.2\n")
            for left, right in merges:
                f.write(f"{left} {right}\n")
    except OSError as e:
        raise InputOutputError(f"cannot write {path}: {e.strerror}") from e


def read_merge_file(path) -> MergeList:
    path = Path(path)
    rules = []
    try:
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.rstrip("\n")
                if not line or (lineno == 1 and line.startswith("#")):
                    continue
                parts = line.split(" ")
                if len(parts) != 2:
                    raise ParseError("expected 'left right'", path, lineno)
                rules.append((parts[0], parts[1]))
    except OSError as e:
        raise InputOutputError(f"cannot read {path}: {e.strerror}") from e
    return MergeList(rules)

"""Streaming ingestion, normalization, deduplication, weighted concatenation,
and serialization of parallel corpora.

A corpus is two aligned plain-text files (one sentence per line, UTF-8, LF)
or a TSV with src/tgt in the first two columns. All text handling is strict
UTF-8; undecodable bytes are rejected with the offending line number.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator

from .errors import InputOutputError, ParseError, StructuralError, ValidationError

_LINE_BREAKS = ("\n", "\r", " ", " ", "\x0b", "\x0c", "\x85")


@dataclass(frozen=True)
class SentencePair:
    """One aligned source/target sentence pair with a provenance id."""

    id: int
    src: str
    tgt: str

    def __post_init__(self):
        for side, text in (("src", self.src), ("tgt", self.tgt)):
            if any(ch in text for ch in _LINE_BREAKS):
                raise ValidationError(
                    f"pair {self.id}: {side} text contains a line-break character"
                )

    def key(self) -> tuple[str, str]:
        return (self.src, self.tgt)


@dataclass
class Corpus:
    """An ordered collection of sentence pairs with a repetition weight."""

    name: str
    pairs: list[SentencePair] = field(default_factory=list)
    weight: int = 1

    def __post_init__(self):
        if self.weight < 1:
            raise ValidationError(f"corpus {self.name!r}: weight must be >= 1, got {self.weight}")

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[SentencePair]:
        return iter(self.pairs)


@dataclass(frozen=True)
class NormalizationRules:
    """Text normalization applied before any downstream processing."""

    unicode_nfc: bool = True
    collapse_whitespace: bool = True
    strip: bool = True


def _read_lines(path) -> list[str]:
    """Read UTF-8 lines, rejecting invalid bytes with a line number.

    Line terminators (LF or CRLF) are removed; all other whitespace is kept.
    """
    path = Path(path)
    lines = []
    try:
        with open(path, "rb") as f:
            for lineno, raw in enumerate(f, start=1):
                raw = raw.rstrip(b"\r\n") if raw.endswith(b"\n") else raw
                if raw.endswith(b"\r"):
                    raw = raw[:-1]
                try:
                    lines.append(raw.decode("utf-8"))
                except UnicodeDecodeError as e:
                    raise ParseError(f"invalid UTF-8 byte sequence ({e.reason})", path, lineno) from e
    except OSError as e:
        raise InputOutputError(f"cannot read {path}: {e.strerror}") from e
    return lines


def read_parallel(src_path, tgt_path, name: str | None = None, weight: int = 1) -> Corpus:
    """Read two aligned one-sentence-per-line files into a corpus.

    Pair i holds line i of each file; ids are assigned 0..n-1. A line-count
    mismatch is a structural error naming both counts.
    """
    src_lines = _read_lines(src_path)
    tgt_lines = _read_lines(tgt_path)
    if len(src_lines) != len(tgt_lines):
        raise StructuralError(
            f"line-count mismatch: {src_path} has {len(src_lines)} lines, "
            f"{tgt_path} has {len(tgt_lines)} lines"
        )
    pairs = [SentencePair(i, s, t) for i, (s, t) in enumerate(zip(src_lines, tgt_lines))]
    return Corpus(name=name or Path(src_path).stem, pairs=pairs, weight=weight)


def read_tsv(path, name: str | None = None, weight: int = 1) -> Corpus:
    """Read a TSV corpus: field 0 is src, field 1 is tgt, extras are ignored."""
    pairs = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        fields = line.split("\t")
        if len(fields) < 2:
            raise ParseError("expected at least 2 tab-separated fields", path, lineno)
        pairs.append(SentencePair(lineno - 1, fields[0], fields[1]))
    return Corpus(name=name or Path(path).stem, pairs=pairs, weight=weight)


def normalize_text(text: str, rules: NormalizationRules = NormalizationRules()) -> str:
    if rules.unicode_nfc:
        text = unicodedata.normalize("NFC", text)
    if rules.collapse_whitespace:
        text = " ".join(text.split()) if rules.strip else _collapse_runs(text)
    elif rules.strip:
        text = text.strip()
    return text


def _collapse_runs(text: str) -> str:
    # collapse interior whitespace runs but keep one leading/trailing space
    stripped = " ".join(text.split())
    lead = " " if text[:1].isspace() else ""
    trail = " " if text[-1:].isspace() else ""
    return lead + stripped + trail if stripped else lead


def normalize(pair: SentencePair, rules: NormalizationRules = NormalizationRules()) -> SentencePair:
    """Normalize both sides of a pair. Idempotent; the id is preserved."""
    return replace(pair, src=normalize_text(pair.src, rules), tgt=normalize_text(pair.tgt, rules))


def normalize_corpus(corpus: Corpus, rules: NormalizationRules = NormalizationRules()) -> Corpus:
    return Corpus(corpus.name, [normalize(p, rules) for p in corpus.pairs], corpus.weight)


def dedup(corpus: Corpus) -> Corpus:
    """Remove exact (src, tgt) duplicates, keeping the first occurrence."""
    seen: set[tuple[str, str]] = set()
    kept = []
    for pair in corpus.pairs:
        k = pair.key()
        if k in seen:
            continue
        seen.add(k)
        kept.append(pair)
    return Corpus(corpus.name, kept, corpus.weight)


def concat_weighted(corpora: list[Corpus], name: str = "concat") -> Corpus:
    """Concatenate corpora, repeating each one `weight` times, in order.

    Ids are reassigned 0..n-1; the result has weight 1.
    """
    if not corpora:
        raise ValidationError("concat_weighted requires at least one corpus")
    pairs = []
    next_id = 0
    for corpus in corpora:
        for _ in range(corpus.weight):
            for pair in corpus.pairs:
                pairs.append(SentencePair(next_id, pair.src, pair.tgt))
                next_id += 1
    return Corpus(name, pairs, 1)


def write_parallel(corpus: Corpus | Iterable[SentencePair], src_path, tgt_path) -> None:
    """Write a corpus as two aligned files; read_parallel inverts this exactly."""
    src_path, tgt_path = Path(src_path), Path(tgt_path)
    try:
        with open(src_path, "w", encoding="utf-8", newline="\n") as fs, open(
            tgt_path, "w", encoding="utf-8", newline="\n"
        ) as ft:
            for pair in corpus:
                fs.write(pair.src + "\n")
                ft.write(pair.tgt + "\n")
    except OSError as e:
        raise InputOutputError(f"cannot write {src_path} / {tgt_path}: {e.strerror}") from e


def tokens(text: str) -> list[str]:
    """Whitespace tokenization used for alignment and phrase work."""
    return text.split()

"""Machine-parsable run reports: key=value lines grouped into [sections].

Timing and timestamps live in their own keys (elapsed_s, created) so that
byte-level comparisons of everything else stay meaningful across runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .corpus import Corpus, tokens
from .errors import InputOutputError, ParseError


@dataclass
class Histogram:
    lo: float
    hi: float
    counts: list[int]

    @classmethod
    def empty(cls, lo: float, hi: float, bins: int = 20) -> "Histogram":
        return cls(lo, hi, [0] * bins)

    def add(self, value: float) -> None:
        n = len(self.counts)
        idx = int((value - self.lo) / (self.hi - self.lo) * n)
        self.counts[max(0, min(n - 1, idx))] += 1

    def total(self) -> int:
        return sum(self.counts)

    def bin_edges(self) -> list[tuple[float, float]]:
        width = (self.hi - self.lo) / len(self.counts)
        return [(self.lo + i * width, self.lo + (i + 1) * width) for i in range(len(self.counts))]


def similarity_histogram(similarities, bins: int = 20) -> Histogram:
    """20 bins over [-1, 1] unless told otherwise."""
    hist = Histogram.empty(-1.0, 1.0, bins)
    for s in similarities:
        hist.add(s)
    return hist


@dataclass
class StageReport:
    name: str
    input_count: int
    output_count: int
    elapsed_s: float
    extra: dict[str, str] = field(default_factory=dict)


@dataclass
class RunReport:
    recipe: str
    params: dict[str, str] = field(default_factory=dict)
    stages: list[StageReport] = field(default_factory=list)
    histograms: dict[str, Histogram] = field(default_factory=dict)
    components: dict[str, int] = field(default_factory=dict)
    output: dict[str, str] = field(default_factory=dict)
    created: str = ""

    def __post_init__(self):
        if not self.created:
            self.created = datetime.now(timezone.utc).isoformat(timespec="seconds")

    def output_count(self) -> int:
        return int(self.output.get("pairs", "0"))


def format_report(report: RunReport) -> str:
    lines = ["[run]", f"recipe={report.recipe}", f"created={report.created}", ""]
    if report.params:
        lines.append("[params]")
        lines.extend(f"{k}={v}" for k, v in sorted(report.params.items()))
        lines.append("")
    for stage in report.stages:
        lines.append(f"[stage:{stage.name}]")
        lines.append(f"input_pairs={stage.input_count}")
        lines.append(f"output_pairs={stage.output_count}")
        for k, v in sorted(stage.extra.items()):
            lines.append(f"{k}={v}")
        lines.append(f"elapsed_s={stage.elapsed_s:.3f}")
        lines.append("")
    for name, hist in report.histograms.items():
        lines.append(f"[histogram:{name}]")
        lines.append(f"lo={hist.lo}")
        lines.append(f"hi={hist.hi}")
        lines.append(f"bins={len(hist.counts)}")
        for i, count in enumerate(hist.counts):
            lines.append(f"bin_{i:02d}={count}")
        lines.append("")
    if report.components:
        lines.append("[components]")
        lines.extend(f"{k}={v}" for k, v in report.components.items())
        lines.append("")
    if report.output:
        lines.append("[output]")
        lines.extend(f"{k}={v}" for k, v in sorted(report.output.items()))
        lines.append("")
    return "\n".join(lines)


def write_report(report: RunReport, path) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(format_report(report), encoding="utf-8")
    except OSError as e:
        raise InputOutputError(f"cannot write {path}: {e.strerror}") from e


def parse_report(path) -> dict[str, dict[str, str]]:
    """Read a report back as {section: {key: value}}."""
    path = Path(path)
    sections: dict[str, dict[str, str]] = {}
    current: dict[str, str] | None = None
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise InputOutputError(f"cannot read {path}: {e.strerror}") from e
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("[") and line.endswith("]"):
            current = {}
            sections[line[1:-1]] = current
        elif "=" in line:
            if current is None:
                raise ParseError("key=value line before any [section]", path, lineno)
            key, _, value = line.partition("=")
            current[key] = value
        else:
            raise ParseError(f"unparsable report line {line!r}", path, lineno)
    return sections


def human_count(n: int) -> str:
    """Counts in the K/M style used for corpus sizes (604000 -> '604K')."""
    if n < 1000:
        return str(n)
    thousands = round(n / 1000)
    if thousands < 1000:
        return f"{thousands}K"
    millions = f"{n / 1e6:.2f}".rstrip("0").rstrip(".")
    return f"{millions}M"


@dataclass
class CorpusStats:
    name: str
    pair_count: int
    src_tokens: int
    tgt_tokens: int
    src_length_hist: Histogram
    tgt_length_hist: Histogram
    length_ratio_hist: Histogram


def corpus_stats(corpus: Corpus, length_cap: int = 100) -> CorpusStats:
    """Pair count, per-side token counts, and length/ratio histograms."""
    src_hist = Histogram.empty(0.0, float(length_cap), 20)
    tgt_hist = Histogram.empty(0.0, float(length_cap), 20)
    ratio_hist = Histogram.empty(0.0, 2.0, 20)
    src_total = tgt_total = 0
    for pair in corpus.pairs:
        ns, nt = len(tokens(pair.src)), len(tokens(pair.tgt))
        src_total += ns
        tgt_total += nt
        src_hist.add(ns)
        tgt_hist.add(nt)
        if nt > 0:
            ratio_hist.add(ns / nt)
    return CorpusStats(
        name=corpus.name,
        pair_count=len(corpus.pairs),
        src_tokens=src_total,
        tgt_tokens=tgt_total,
        src_length_hist=src_hist,
        tgt_length_hist=tgt_hist,
        length_ratio_hist=ratio_hist,
    )

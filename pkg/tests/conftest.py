"""Shared fixtures and the acceptance-summary hook."""

from __future__ import annotations

import random

import pytest

from bitext.corpus import Corpus, SentencePair


def make_corpus(rows: list[tuple[str, str]], name: str = "test") -> Corpus:
    return Corpus(name, [SentencePair(i, s, t) for i, (s, t) in enumerate(rows)])


def write_pair_files(tmp_path, rows, stem="corpus"):
    src = tmp_path / f"{stem}.src"
    tgt = tmp_path / f"{stem}.tgt"
    src.write_text("".join(s + "\n" for s, _ in rows), encoding="utf-8")
    tgt.write_text("".join(t + "\n" for _, t in rows), encoding="utf-8")
    return src, tgt


def random_token(rng: random.Random, alphabet="abcdefgh", max_len=5) -> str:
    return "".join(rng.choice(alphabet) for _ in range(rng.randint(1, max_len)))


def random_sentence(rng: random.Random, max_words=8, alphabet="abcdefgh") -> str:
    return " ".join(random_token(rng, alphabet) for _ in range(rng.randint(1, max_words)))


@pytest.fixture
def rng():
    return random.Random(20260809)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = []
    for status, label in (("passed", "PASS"), ("failed", "FAIL"), ("error", "FAIL")):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance" in nodeid and "::" in nodeid:
                lines.append(f"{label}: {nodeid.split('::')[-1]}")
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in sorted(set(lines)):
            terminalreporter.write_line(line)

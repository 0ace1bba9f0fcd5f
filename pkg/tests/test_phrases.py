import random

import pytest

from bitext.align import AlignmentMatrix, LexicalTable
from bitext.corpus import SentencePair
from bitext.errors import ParseError, StructuralError, ValidationError
from bitext.phrases import (
    PhraseScoreWeights,
    PhraseTableEntry,
    build_phrase_table,
    dominates,
    extract_phrases,
    format_entry,
    lexical_weight,
    longest_unique,
    mine_pair,
    parse_entry,
    read_phrase_table,
    score_filter,
    write_phrase_table,
)

from conftest import make_corpus


def brute_force_extract(alignment: AlignmentMatrix, max_len: int):
    """Oracle: enumerate every span pair and test the tight-consistency
    definition clause by clause."""
    links = alignment.links
    found = set()
    for s1 in range(alignment.src_len):
        for s2 in range(s1, min(s1 + max_len, alignment.src_len)):
            for t1 in range(alignment.tgt_len):
                for t2 in range(t1, min(t1 + max_len, alignment.tgt_len)):
                    inside = {
                        (i, j) for (i, j) in links if s1 <= i <= s2 and t1 <= j <= t2
                    }
                    if not inside:
                        continue
                    crossing = any(
                        (s1 <= i <= s2) != (t1 <= j <= t2) for (i, j) in links
                    )
                    if crossing:
                        continue
                    srcs = {i for i, _ in inside}
                    tgts = {j for _, j in inside}
                    if s1 in srcs and s2 in srcs and t1 in tgts and t2 in tgts:
                        found.add(((s1, s2), (t1, t2)))
    return found


def random_alignment(rng: random.Random, max_side=8):
    sl, tl = rng.randint(1, max_side), rng.randint(1, max_side)
    n_links = rng.randint(0, sl * tl)
    links = {(rng.randrange(sl), rng.randrange(tl)) for _ in range(n_links)}
    return AlignmentMatrix(sl, tl, frozenset(links))


def pair_for(alignment: AlignmentMatrix) -> SentencePair:
    src = " ".join(f"s{i}" for i in range(alignment.src_len))
    tgt = " ".join(f"t{j}" for j in range(alignment.tgt_len))
    return SentencePair(0, src, tgt)


def test_extract_monotone_diagonal():
    pair = SentencePair(0, "a b c", "x y z")
    alignment = AlignmentMatrix(3, 3, frozenset({(0, 0), (1, 1), (2, 2)}))
    got = extract_phrases(pair, alignment, 3)
    assert got == {
        ((0, 0), (0, 0)),
        ((1, 1), (1, 1)),
        ((2, 2), (2, 2)),
        ((0, 1), (0, 1)),
        ((1, 2), (1, 2)),
        ((0, 2), (0, 2)),
    }


def test_extract_empty_alignment():
    pair = SentencePair(0, "a b", "x y")
    assert extract_phrases(pair, AlignmentMatrix(2, 2, frozenset()), 7) == set()


def test_extract_crossing_links():
    pair = SentencePair(0, "a b", "x y")
    alignment = AlignmentMatrix(2, 2, frozenset({(0, 1), (1, 0)}))
    got = extract_phrases(pair, alignment, 7)
    assert got == {((0, 0), (1, 1)), ((1, 1), (0, 0)), ((0, 1), (0, 1))}


def test_extract_does_not_span_unaligned_boundaries():
    # b unaligned: (a b, x y) has an unaligned source boundary word
    pair = SentencePair(0, "a b", "x y")
    alignment = AlignmentMatrix(2, 2, frozenset({(0, 0), (0, 1)}))
    got = extract_phrases(pair, alignment, 7)
    assert got == {((0, 0), (0, 1))}


def test_extract_dimension_mismatch():
    pair = SentencePair(0, "a b c", "x")
    with pytest.raises(StructuralError):
        extract_phrases(pair, AlignmentMatrix(2, 1, frozenset({(0, 0)})), 7)


def test_extract_respects_max_len(rng):
    alignment = AlignmentMatrix(5, 5, frozenset((i, i) for i in range(5)))
    got = extract_phrases(pair_for(alignment), alignment, 2)
    assert all(s2 - s1 < 2 and t2 - t1 < 2 for (s1, s2), (t1, t2) in got)


def test_extract_matches_brute_force_oracle(rng):
    for _ in range(300):
        alignment = random_alignment(rng)
        max_len = rng.choice([2, 3, 7])
        got = extract_phrases(pair_for(alignment), alignment, max_len)
        want = brute_force_extract(alignment, max_len)
        assert got == want, (alignment, max_len)


def unit_matrix():
    return AlignmentMatrix(1, 1, frozenset({(0, 0)}))


def test_lexical_weight_single_link():
    lex = LexicalTable("src2tgt", {("a", "x"): 0.8})
    assert lexical_weight(("a",), ("x",), unit_matrix(), lex) == pytest.approx(0.8, abs=1e-12)


def test_lexical_weight_averages_multiple_links():
    lex = LexicalTable("src2tgt", {("a", "y"): 0.6, ("b", "y"): 0.2})
    alignment = AlignmentMatrix(2, 1, frozenset({(0, 0), (1, 0)}))
    got = lexical_weight(("a", "b"), ("y",), alignment, lex)
    assert got == pytest.approx(0.4, abs=1e-12)


def test_lexical_weight_certain_links():
    lex = LexicalTable("src2tgt", {("a", "x"): 1.0, ("b", "y"): 1.0})
    alignment = AlignmentMatrix(2, 2, frozenset({(0, 0), (1, 1)}))
    assert lexical_weight(("a", "b"), ("x", "y"), alignment, lex) == 1.0


def test_lexical_weight_unaligned_uses_null():
    lex = LexicalTable("src2tgt", {("a", "x"): 1.0, ("<NULL>", "y"): 0.25}, null_word="<NULL>")
    alignment = AlignmentMatrix(1, 2, frozenset({(0, 0)}))
    assert lexical_weight(("a",), ("x", "y"), alignment, lex) == pytest.approx(0.25, abs=1e-12)


def certain_tables():
    fwd = LexicalTable("src2tgt", {})
    rev = LexicalTable("tgt2src", {})
    return fwd, rev


def test_build_phrase_table_single_pair():
    corpus = make_corpus([("a", "x")])
    fwd = LexicalTable("src2tgt", {("a", "x"): 1.0})
    rev = LexicalTable("tgt2src", {("x", "a"): 1.0})
    entries = build_phrase_table(corpus, [unit_matrix()], fwd, rev, 7)
    assert len(entries) == 1
    e = entries[0]
    assert e.probabilities() == (1.0, 1.0, 1.0, 1.0)
    assert e.joint_count == 1


def test_build_phrase_table_relative_frequency():
    corpus = make_corpus([("a", "x"), ("a", "x"), ("a", "y"), ("a", "y")])
    fwd = LexicalTable("src2tgt", {("a", "x"): 0.5, ("a", "y"): 0.5})
    rev = LexicalTable("tgt2src", {("x", "a"): 1.0, ("y", "a"): 1.0})
    entries = build_phrase_table(corpus, [unit_matrix()] * 4, fwd, rev, 7)
    by_key = {e.key(): e for e in entries}
    assert by_key[(("a",), ("x",))].phi_ts == pytest.approx(0.5)
    assert by_key[(("a",), ("x",))].phi_st == pytest.approx(1.0)
    assert by_key[(("a",), ("x",))].joint_count == 2


def test_build_phrase_table_length_mismatch():
    corpus = make_corpus([("a", "x"), ("b", "y")])
    with pytest.raises(StructuralError):
        build_phrase_table(corpus, [unit_matrix()], *certain_tables(), 7)


def test_phrase_table_distributions_normalize(rng):
    rows = []
    for _ in range(60):
        n = rng.randint(1, 5)
        src = " ".join(rng.choice("abcd") for _ in range(n))
        tgt = " ".join(rng.choice("wxyz") for _ in range(n))
        rows.append((src, tgt))
    corpus = make_corpus(rows)
    alignments = [
        AlignmentMatrix(len(s.split()), len(t.split()),
                        frozenset((i, i) for i in range(len(s.split()))))
        for s, t in rows
    ]
    entries = build_phrase_table(corpus, alignments, *certain_tables(), 4)
    src_sums = {}
    tgt_sums = {}
    for e in entries:
        src_sums[e.src_phrase] = src_sums.get(e.src_phrase, 0.0) + e.phi_ts
        tgt_sums[e.tgt_phrase] = tgt_sums.get(e.tgt_phrase, 0.0) + e.phi_st
    assert all(abs(s - 1.0) <= 1e-9 for s in src_sums.values())
    assert all(abs(s - 1.0) <= 1e-9 for s in tgt_sums.values())
    assert all(
        0.0 <= p <= 1.0 for e in entries for p in e.probabilities()
    )


def entry(src, tgt, probs=(1.0, 1.0, 1.0, 1.0), count=1):
    src_t, tgt_t = tuple(src.split()), tuple(tgt.split())
    return PhraseTableEntry(
        src_t, tgt_t, *probs, count, AlignmentMatrix(len(src_t), len(tgt_t), frozenset({(0, 0)}))
    )


def test_score_filter_keeps_perfect_scores():
    weights = PhraseScoreWeights(threshold=0.95)
    assert score_filter([entry("a", "x")], weights) == [entry("a", "x")]


def test_score_filter_arithmetic_mean_thresholds():
    e = entry("a", "x", probs=(0.9, 0.9, 0.7, 0.7))
    assert score_filter([e], PhraseScoreWeights(threshold=0.8)) == [e]
    assert score_filter([e], PhraseScoreWeights(threshold=0.95)) == []


def test_score_filter_weighted():
    e = entry("a", "x", probs=(1.0, 0.0, 0.0, 0.0))
    weights = PhraseScoreWeights(3.0, 1.0, 0.0, 0.0, threshold=0.75)
    assert score_filter([e], weights) == [e]


def test_score_weights_reject_all_zero():
    with pytest.raises(ValidationError):
        PhraseScoreWeights(0.0, 0.0, 0.0, 0.0)


def test_score_filter_monotone_and_idempotent(rng):
    entries = [
        entry(f"s{k}", f"t{k}", probs=tuple(round(rng.random(), 6) for _ in range(4)))
        for k in range(300)
    ]
    thresholds = sorted(rng.random() for _ in range(5))
    previous = None
    for tau in thresholds:
        weights = PhraseScoreWeights(threshold=tau)
        kept = score_filter(entries, weights)
        assert score_filter(kept, weights) == kept
        if previous is not None:
            assert set(e.key() for e in kept) <= set(e.key() for e in previous)
        previous = kept


def test_longest_unique_singleton():
    e = entry("a", "x")
    assert longest_unique([e]) == [e]


def test_longest_unique_worked_example():
    table = [entry("a b", "x y"), entry("a", "x"), entry("c", "z")]
    kept = longest_unique(table)
    assert [e.key() for e in kept] == [(("a", "b"), ("x", "y")), (("c",), ("z",))]


def test_longest_unique_removes_exact_duplicates():
    table = [entry("a", "x"), entry("a", "x")]
    assert len(longest_unique(table)) == 1


def test_longest_unique_token_level_containment():
    # 'a' is a substring of 'ab' but not a token-level subsequence
    table = [entry("ab", "xy"), entry("a", "x")]
    assert len(longest_unique(table)) == 2


def test_longest_unique_domination_free_audit(rng):
    for _ in range(100):
        table = []
        for _ in range(rng.randint(1, 25)):
            ns, nt = rng.randint(1, 4), rng.randint(1, 4)
            src = " ".join(rng.choice("ab") for _ in range(ns))
            tgt = " ".join(rng.choice("xy") for _ in range(nt))
            table.append(entry(src, tgt))
        kept = longest_unique(table)
        keys = [e.key() for e in kept]
        assert len(set(keys)) == len(keys)
        assert not any(dominates(a, b) for a in kept for b in kept)
        assert longest_unique(kept) == kept


def test_format_entry_worked_example():
    e = PhraseTableEntry(
        ("a", "b"), ("x", "y"), 1.0, 1.0, 1.0, 1.0, 1,
        AlignmentMatrix(2, 2, frozenset({(0, 0), (1, 1)})),
    )
    assert format_entry(e) == "a b ||| x y ||| 1.000000 1.000000 1.000000 1.000000 ||| 0-0 1-1 ||| 1"


def test_parse_entry_round_trip(rng):
    entries = []
    for k in range(200):
        ns, nt = rng.randint(1, 4), rng.randint(1, 4)
        src = tuple(f"s{rng.randrange(10)}" for _ in range(ns))
        tgt = tuple(f"t{rng.randrange(10)}" for _ in range(nt))
        probs = tuple(round(rng.random(), 6) for _ in range(4))
        links = frozenset(
            (rng.randrange(ns), rng.randrange(nt)) for _ in range(rng.randint(0, ns * nt))
        )
        entries.append(
            PhraseTableEntry(src, tgt, *probs, rng.randint(1, 9), AlignmentMatrix(ns, nt, links))
        )
    for e in entries:
        assert parse_entry(format_entry(e)) == e


def test_parse_entry_missing_separator():
    with pytest.raises(ParseError, match="line 1"):
        parse_entry("a b ||| x y ||| 1 1 1 1", lineno=1)


def test_phrase_table_file_round_trip(tmp_path, rng):
    entries = [
        entry(f"w{k} v{k}", f"u{k}", probs=tuple(round(rng.random(), 6) for _ in range(4)))
        for k in range(50)
    ]
    path = tmp_path / "table.pt"
    write_phrase_table(entries, path)
    assert list(read_phrase_table(path)) == entries


def test_mine_pair_emits_token_tuples():
    pair = SentencePair(0, "a b", "x y")
    alignment = AlignmentMatrix(2, 2, frozenset({(0, 0), (1, 1)}))
    mined = mine_pair(pair, alignment, 7)
    keys = {(m[0], m[1]) for m in mined}
    assert (("a",), ("x",)) in keys
    assert (("a", "b"), ("x", "y")) in keys
    for src_t, tgt_t, local in mined:
        assert local.src_len == len(src_t) and local.tgt_len == len(tgt_t)

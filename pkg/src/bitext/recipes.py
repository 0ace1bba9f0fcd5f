"""Recipe orchestration: compose the corpus-construction recipes from the
mining and filtering stages, with content-addressed stage caching and a
machine-parsable run report.

Recipes combine three primitives over a parallel corpus P and a
pseudo-parallel corpus S: the embedding sentence filter L(S), mined
phrase pairs PPI(S) (score-filtered, longest-unique), and the embedding
filter over those phrases PL(S). Output order is fixed as
(parallel, filtered sentences, phrase pairs) for reproducibility.
"""

from __future__ import annotations

import hashlib
import logging
import multiprocessing
import time
from pathlib import Path

from . import align as al
from . import corpus as cio
from . import embeddings as emb
from . import phrases as ph
from .config import (
    RECIPE_COMPONENTS,
    RunConfig,
    CorpusSpec,
    PhraseConfig,
    build_provider,
    recipe_uses_embedding,
    recipe_uses_phrases,
)
from .errors import ValidationError
from .report import RunReport, StageReport, similarity_histogram

log = logging.getLogger(__name__)


def corpus_digest(corpus: cio.Corpus) -> str:
    h = hashlib.blake2b(digest_size=16)
    for pair in corpus.pairs:
        h.update(pair.src.encode("utf-8"))
        h.update(b"\x00")
        h.update(pair.tgt.encode("utf-8"))
        h.update(b"\x01")
    return h.hexdigest()


class StageCache:
    """Content-addressed artifact store; a None directory disables it."""

    def __init__(self, directory: Path | None):
        self.directory = directory
        if directory is not None:
            directory.mkdir(parents=True, exist_ok=True)

    def path_for(self, key: str, suffix: str) -> Path | None:
        if self.directory is None:
            return None
        digest = hashlib.blake2b(key.encode("utf-8"), digest_size=16).hexdigest()
        return self.directory / f"{digest}{suffix}"

    def fetch(self, key: str, suffix: str, reader):
        path = self.path_for(key, suffix)
        if path is not None and path.is_file():
            log.debug("cache hit for %s", key)
            return reader(path)
        return None

    def store(self, key: str, suffix: str, writer) -> None:
        path = self.path_for(key, suffix)
        if path is not None:
            writer(path)


def load_role(specs: list[CorpusSpec], cfg: RunConfig, name: str) -> tuple[cio.Corpus, int]:
    """Read, preprocess, and concatenate one manifest role.

    Returns the corpus and the raw pair count before preprocessing.
    """
    corpora = []
    raw_count = 0
    for spec in specs:
        corpus = cio.read_parallel(spec.src, spec.tgt, name=spec.name, weight=spec.weight)
        raw_count += len(corpus)
        if cfg.preprocess.normalize:
            corpus = cio.normalize_corpus(corpus)
        if cfg.preprocess.dedup:
            corpus = cio.dedup(corpus)
        corpora.append(corpus)
    return cio.concat_weighted(corpora, name=name), raw_count


def _chunks(items: list, n: int) -> list[list]:
    if n <= 1 or len(items) <= 1:
        return [items]
    size = (len(items) + n - 1) // n
    return [items[k : k + size] for k in range(0, len(items), size)]


def _mine_chunk(args):
    pairs, fwd, rev, heuristic, max_len = args
    out = []
    for pair in pairs:
        forward = al.viterbi_align(pair, fwd)
        reverse = al.viterbi_align(pair, rev)
        matrix = al.symmetrize(forward, reverse, heuristic)
        out.append((matrix, ph.mine_pair(pair, matrix, max_len)))
    return out


def align_corpus(
    corpus: cio.Corpus,
    phrase_cfg: PhraseConfig,
    workers: int = 1,
    cache: StageCache | None = None,
) -> tuple[al.LexicalTable, al.LexicalTable, list, list]:
    """Train both lexical tables, then align and mine every non-empty pair.

    Returns (fwd table, rev table, alignment matrices, mined occurrences),
    with matrices and occurrences in corpus order over non-empty pairs.
    Worker count never changes the result, only the wall clock.
    """
    cache = cache or StageCache(None)
    usable = [p for p in corpus.pairs if cio.tokens(p.src) and cio.tokens(p.tgt)]
    dropped = len(corpus.pairs) - len(usable)
    if dropped:
        log.warning("phrase mining skips %d pair(s) with an empty side", dropped)
    if not usable:
        raise ValidationError("no alignable pairs: every pair has an empty side")
    mineable = cio.Corpus(corpus.name, usable, 1)

    digest = corpus_digest(mineable)
    tables = {}
    for direction in ("src2tgt", "tgt2src"):
        key = (
            f"model1:{direction}:iters={phrase_cfg.em_iterations}"
            f":null={phrase_cfg.use_null}:{digest}"
        )
        table = cache.fetch(
            key, ".lex", lambda p, d=direction: al.read_lexical_table(p, direction=d)
        )
        if table is None:
            table, _ = al.train_model1(
                mineable, phrase_cfg.em_iterations, phrase_cfg.use_null, direction
            )
            cache.store(key, ".lex", lambda p, t=table: al.write_lexical_table(t, p, sig_digits=-1))
        tables[direction] = table

    chunks = _chunks(usable, workers)
    args = [
        (chunk, tables["src2tgt"], tables["tgt2src"], phrase_cfg.symmetrization, phrase_cfg.max_len)
        for chunk in chunks
    ]
    if len(args) > 1:
        with multiprocessing.get_context("fork").Pool(len(args)) as pool:
            per_chunk = pool.map(_mine_chunk, args)
    else:
        per_chunk = [_mine_chunk(a) for a in args]

    matrices = []
    mined = []
    for chunk_result in per_chunk:
        for matrix, occurrences in chunk_result:
            matrices.append(matrix)
            mined.extend(occurrences)
    return tables["src2tgt"], tables["tgt2src"], matrices, mined


def mine_phrase_table(
    corpus: cio.Corpus,
    phrase_cfg: PhraseConfig,
    workers: int = 1,
    cache: StageCache | None = None,
) -> list[ph.PhraseTableEntry]:
    """Full phrase table (unfiltered) for a corpus, via EM + symmetrized
    Viterbi alignment + tight extraction."""
    cache = cache or StageCache(None)
    key = (
        f"phrasetable:iters={phrase_cfg.em_iterations}:null={phrase_cfg.use_null}"
        f":sym={phrase_cfg.symmetrization}:max_len={phrase_cfg.max_len}"
        f":{corpus_digest(corpus)}"
    )
    cached = cache.fetch(key, ".phrases", lambda p: list(ph.read_phrase_table(p)))
    if cached is not None:
        return cached
    fwd, rev, _, mined = align_corpus(corpus, phrase_cfg, workers, cache)
    entries = ph.aggregate_phrase_table(mined, fwd, rev)
    cache.store(key, ".phrases", lambda p: ph.write_phrase_table(entries, p, decimals=-1))
    return entries


def extract_ppi_pairs(
    corpus: cio.Corpus,
    cfg: RunConfig,
    workers: int = 1,
    cache: StageCache | None = None,
) -> tuple[list[ph.PhraseTableEntry], dict[str, int]]:
    """Score-filtered, longest-unique phrase pairs plus stage counters."""
    entries = mine_phrase_table(corpus, cfg.phrases, workers, cache)
    weights = cfg.phrases.score_weights(cfg.thresholds.phrase_score)
    scored = ph.score_filter(entries, weights)
    unique = ph.longest_unique(scored)
    counters = {
        "table_entries": len(entries),
        "after_score_filter": len(scored),
        "after_longest_unique": len(unique),
    }
    return unique, counters


def scored_with_cache(
    corpus: cio.Corpus,
    provider: emb.EmbeddingProvider,
    batch_size: int,
    cache: StageCache,
) -> list[emb.ScoredPair]:
    key = f"scores:{provider.cache_token()}:{corpus_digest(corpus)}"
    cached = cache.fetch(key, ".scores", emb.read_scored_tsv)
    if cached is not None:
        return cached
    scored = emb.score_pairs(corpus, provider, batch_size)
    cache.store(key, ".scores", lambda p: emb.write_scored_tsv(scored, p, decimals=-1))
    return scored


class _Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def run_recipe(cfg: RunConfig, workers: int = 1) -> tuple[cio.Corpus, RunReport]:
    """Build the corpus a recipe describes and report per-stage accounting.

    The report's component counts always sum exactly to the output size.
    """
    if cfg.recipe not in RECIPE_COMPONENTS:
        raise ValidationError(f"unknown recipe {cfg.recipe!r}")
    wanted = RECIPE_COMPONENTS[cfg.recipe]
    cache = StageCache(cfg.cache_dir)
    report = RunReport(recipe=cfg.recipe)
    report.params.update(
        {
            "tau_sentence": repr(cfg.thresholds.sentence),
            "tau_phrase_score": repr(cfg.thresholds.phrase_score),
            "tau_phrase_embed": repr(cfg.thresholds.phrase_embed),
            "max_len": str(cfg.phrases.max_len),
            "em_iterations": str(cfg.phrases.em_iterations),
            "symmetrization": cfg.phrases.symmetrization,
            "workers": str(workers),
        }
    )

    with _Timer() as t:
        parallel, raw = load_role(cfg.parallel, cfg, "parallel")
    report.stages.append(StageReport("parallel", raw, len(parallel), t.elapsed))

    pseudo = None
    if wanted:
        with _Timer() as t:
            pseudo, raw = load_role(cfg.pseudo, cfg, "pseudo")
        report.stages.append(StageReport("pseudo", raw, len(pseudo), t.elapsed))

    provider = None
    if recipe_uses_embedding(cfg.recipe):
        provider = build_provider(cfg.provider)

    components: list[cio.Corpus] = [parallel]
    report.components["parallel"] = len(parallel)

    if "pseudo_raw" in wanted:
        components.append(pseudo)
        report.components["pseudo"] = len(pseudo)

    if "sentences" in wanted:
        with _Timer() as t:
            scored = scored_with_cache(pseudo, provider, cfg.provider.batch_size, cache)
            kept = emb.filter_by_threshold(scored, cfg.thresholds.sentence, name="sentences")
        report.stages.append(
            StageReport(
                "sentence_filter",
                len(pseudo),
                len(kept),
                t.elapsed,
                {"threshold": repr(cfg.thresholds.sentence)},
            )
        )
        report.histograms["sentence_similarity"] = similarity_histogram(
            sp.similarity for sp in scored
        )
        components.append(kept)
        report.components["sentences"] = len(kept)

    if recipe_uses_phrases(cfg.recipe):
        with _Timer() as t:
            unique, counters = extract_ppi_pairs(pseudo, cfg, workers, cache)
        phrase_corpus = cio.Corpus("phrases", ph.entries_as_pairs(unique), 1)
        report.stages.append(
            StageReport(
                "phrase_mining",
                len(pseudo),
                len(phrase_corpus),
                t.elapsed,
                {k: str(v) for k, v in counters.items()},
            )
        )
        if "phrases_filtered" in wanted:
            with _Timer() as t:
                scored = scored_with_cache(
                    phrase_corpus, provider, cfg.provider.batch_size, cache
                )
                phrase_corpus = emb.filter_by_threshold(
                    scored, cfg.thresholds.phrase_embed, name="phrases"
                )
            report.stages.append(
                StageReport(
                    "phrase_filter",
                    counters["after_longest_unique"],
                    len(phrase_corpus),
                    t.elapsed,
                    {"threshold": repr(cfg.thresholds.phrase_embed)},
                )
            )
            report.histograms["phrase_similarity"] = similarity_histogram(
                sp.similarity for sp in scored
            )
        components.append(phrase_corpus)
        report.components["phrases"] = len(phrase_corpus)

    with _Timer() as t:
        output = cio.concat_weighted(components, name=cfg.recipe)
    report.stages.append(StageReport("compose", sum(len(c) for c in components), len(output), t.elapsed))

    if len(output) != sum(report.components.values()):
        raise AssertionError(
            f"count identity violated: {len(output)} != {report.components}"
        )
    report.output["pairs"] = str(len(output))
    return output, report


def write_outputs(output: cio.Corpus, cfg: RunConfig, report: RunReport) -> tuple[Path, Path]:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    src_path = cfg.output_dir / f"{cfg.recipe}.src"
    tgt_path = cfg.output_dir / f"{cfg.recipe}.tgt"
    cio.write_parallel(output, src_path, tgt_path)
    report.output["src_path"] = str(src_path)
    report.output["tgt_path"] = str(tgt_path)
    return src_path, tgt_path

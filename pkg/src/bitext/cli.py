"""Command-line interface.

Subcommands: stats, calibrate, filter-embed, align, phrase-table, ppi,
recipe {validate,run}, bpe {learn,apply}. Exit codes: 0 success,
2 validation error, 3 I/O error, 4 provider error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import align as al
from . import bpe
from . import corpus as cio
from . import embeddings as emb
from . import phrases as ph
from . import recipes
from .config import build_provider, validate_config
from .errors import BitextError, InputOutputError, ProviderError, ValidationError
from .report import (
    RunReport,
    StageReport,
    corpus_stats,
    human_count,
    similarity_histogram,
    write_report,
)

EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_PROVIDER = 4


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="pipeline config file (YAML)")
    common.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")
    common.add_argument("--report", type=Path, help="write a key=value report (+ figures) here")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(
        prog="bitext",
        description="Mine and filter parallel corpora; compose ready-to-train recipes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", parents=[common], help="corpus counts and length histograms")
    p.add_argument("src", nargs="?", type=Path, help="source-side file (omit with --config)")
    p.add_argument("tgt", nargs="?", type=Path, help="target-side file")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser(
        "calibrate", parents=[common], help="derive a similarity threshold from a reference corpus"
    )
    p.add_argument("--src", type=Path, help="reference source file (default: config calibration)")
    p.add_argument("--tgt", type=Path)
    p.add_argument("--margin", type=float, default=0.0, help="subtract this from the mean")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser(
        "filter-embed", parents=[common], help="filter sentence pairs by embedding similarity"
    )
    p.add_argument("--src", type=Path, help="input source file (default: config pseudo corpus)")
    p.add_argument("--tgt", type=Path)
    p.add_argument("--threshold", type=float, help="similarity cutoff (default from config)")
    p.add_argument("--out-src", type=Path, required=True)
    p.add_argument("--out-tgt", type=Path, required=True)
    p.add_argument("--scores", type=Path, help="also dump id/similarity/src/tgt TSV here")
    p.set_defaults(func=cmd_filter_embed)

    p = sub.add_parser(
        "align", parents=[common], help="train EM lexical tables and write symmetrized alignments"
    )
    p.add_argument("--src", type=Path)
    p.add_argument("--tgt", type=Path)
    p.add_argument("--out", type=Path, required=True, help="alignment output (Pharaoh format)")
    p.add_argument("--iterations", type=int, help="EM iterations (default from config or 5)")
    p.add_argument("--heuristic", choices=("intersection", "union", "grow-diag-final-and"))
    p.add_argument("--lex-fwd", type=Path, help="also write the src->tgt lexical table")
    p.add_argument("--lex-rev", type=Path, help="also write the tgt->src lexical table")
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("phrase-table", parents=[common], help="build the full phrase table")
    p.add_argument("--src", type=Path)
    p.add_argument("--tgt", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--max-len", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--heuristic", choices=("intersection", "union", "grow-diag-final-and"))
    p.set_defaults(func=cmd_phrase_table)

    p = sub.add_parser(
        "ppi", parents=[common], help="extract score-filtered longest-unique phrase pairs"
    )
    p.add_argument("--src", type=Path)
    p.add_argument("--tgt", type=Path)
    p.add_argument("--out-src", type=Path, required=True)
    p.add_argument("--out-tgt", type=Path, required=True)
    p.add_argument("--table", type=Path, help="also write the surviving table entries")
    p.add_argument("--threshold", type=float, help="weighted-average score cutoff")
    p.add_argument("--max-len", type=int)
    p.add_argument("--iterations", type=int)
    p.set_defaults(func=cmd_ppi)

    p = sub.add_parser("recipe", parents=[], help="validate or run a corpus recipe")
    rsub = p.add_subparsers(dest="recipe_command", required=True)
    rv = rsub.add_parser("validate", parents=[common], help="check a config, reporting every problem")
    rv.set_defaults(func=cmd_recipe_validate)
    rr = rsub.add_parser("run", parents=[common], help="build the corpus a recipe describes")
    rr.set_defaults(func=cmd_recipe_run)

    p = sub.add_parser("bpe", parents=[], help="learn or apply subword segmentation")
    bsub = p.add_subparsers(dest="bpe_command", required=True)
    bl = bsub.add_parser("learn", parents=[common], help="learn merge operations from text")
    bl.add_argument("inputs", nargs="+", type=Path, help="text file(s); several learn jointly")
    bl.add_argument("--merges", type=int, default=16000, help="merge operations (default 16000)")
    bl.add_argument("--out", type=Path, required=True)
    bl.set_defaults(func=cmd_bpe_learn)
    ba = bsub.add_parser("apply", parents=[common], help="segment text with learned merges")
    ba.add_argument("input", type=Path)
    ba.add_argument("output", type=Path)
    ba.add_argument("--merges", type=Path, required=True, help="merge file from 'bpe learn'")
    ba.set_defaults(func=cmd_bpe_apply)

    return parser


def _load_config(args, required: bool, require_recipe: bool = False):
    if args.config is None:
        if required:
            raise ValidationError("this command needs --config")
        return None
    cfg, errors = validate_config(args.config, require_recipe=require_recipe)
    if errors:
        for e in errors:
            print(f"config error: {e}", file=sys.stderr)
        raise ValidationError(f"{len(errors)} config error(s)")
    return cfg


def _input_corpus(args, cfg, role: str = "pseudo") -> cio.Corpus:
    """Resolve a command's input corpus from --src/--tgt or the config role."""
    if args.src is not None or args.tgt is not None:
        if args.src is None or args.tgt is None:
            raise ValidationError("--src and --tgt must be given together")
        corpus = cio.read_parallel(args.src, args.tgt)
        return cio.normalize_corpus(corpus) if cfg is None or cfg.preprocess.normalize else corpus
    if cfg is None:
        raise ValidationError("give --src/--tgt or --config with corpora")
    specs = getattr(cfg, role)
    if not specs:
        raise ValidationError(f"config has no corpora.{role} entries")
    corpus, _ = recipes.load_role(specs, cfg, role)
    return corpus


def _finish_report(report: RunReport, args) -> None:
    if args.report is None:
        return
    write_report(report, args.report)
    from .plots import render_report_figures

    for fig in render_report_figures(report, args.report):
        print(f"wrote {fig}")
    print(f"wrote {args.report}")


def cmd_stats(args) -> int:
    cfg = _load_config(args, required=args.src is None)
    report = RunReport(recipe="stats")
    targets = []
    if args.src is not None:
        if args.tgt is None:
            raise ValidationError("stats needs both src and tgt files")
        targets.append(cio.read_parallel(args.src, args.tgt))
    else:
        for role in ("parallel", "pseudo", "calibration"):
            specs = getattr(cfg, role)
            if specs:
                corpus, _ = recipes.load_role(specs, cfg, role)
                targets.append(corpus)
    for corpus in targets:
        st = corpus_stats(corpus)
        print(
            f"{st.name}: pairs={st.pair_count} ({human_count(st.pair_count)}) "
            f"src_tokens={st.src_tokens} ({human_count(st.src_tokens)}) "
            f"tgt_tokens={st.tgt_tokens} ({human_count(st.tgt_tokens)})"
        )
        report.stages.append(
            StageReport(
                f"stats_{st.name}",
                st.pair_count,
                st.pair_count,
                0.0,
                {
                    "pairs_human": human_count(st.pair_count),
                    "src_tokens": str(st.src_tokens),
                    "tgt_tokens": str(st.tgt_tokens),
                },
            )
        )
        report.histograms[f"{st.name}_src_length"] = st.src_length_hist
        report.histograms[f"{st.name}_tgt_length"] = st.tgt_length_hist
        report.histograms[f"{st.name}_length_ratio"] = st.length_ratio_hist
    _finish_report(report, args)
    return 0


def cmd_calibrate(args) -> int:
    cfg = _load_config(args, required=True)
    if cfg.provider is None:
        raise ValidationError("calibrate needs a provider section in the config")
    provider = build_provider(cfg.provider)
    if args.src is not None:
        reference = cio.read_parallel(args.src, args.tgt)
        if cfg.preprocess.normalize:
            reference = cio.normalize_corpus(reference)
    else:
        if not cfg.calibration:
            raise ValidationError("give --src/--tgt or corpora.calibration in the config")
        reference, _ = recipes.load_role(cfg.calibration, cfg, "calibration")
    if not reference.pairs:
        raise ValidationError("calibration requires a non-empty reference corpus")
    scored = emb.score_pairs(reference, provider, cfg.provider.batch_size)
    result = emb.calibrate_from_scores(scored, args.margin)
    print(
        f"threshold={result.threshold:.6f} mean={result.mean:.6f} std={result.std:.6f} "
        f"min={result.min:.6f} max={result.max:.6f} pairs={result.count} margin={result.margin}"
    )
    report = RunReport(recipe="calibrate")
    report.params = {
        "threshold": repr(result.threshold),
        "mean": repr(result.mean),
        "std": repr(result.std),
        "min": repr(result.min),
        "max": repr(result.max),
        "count": str(result.count),
        "margin": repr(result.margin),
    }
    report.histograms["reference_similarity"] = similarity_histogram(
        sp.similarity for sp in scored
    )
    _finish_report(report, args)
    return 0


def cmd_filter_embed(args) -> int:
    cfg = _load_config(args, required=True)
    if cfg.provider is None:
        raise ValidationError("filter-embed needs a provider section in the config")
    corpus = _input_corpus(args, cfg)
    threshold = args.threshold if args.threshold is not None else cfg.thresholds.sentence
    if not -1.0 <= threshold <= 1.0:
        raise ValidationError(f"threshold out of range [-1, 1]: {threshold}")
    provider = build_provider(cfg.provider)
    scored = emb.score_pairs(corpus, provider, cfg.provider.batch_size)
    kept = emb.filter_by_threshold(scored, threshold)
    cio.write_parallel(kept, args.out_src, args.out_tgt)
    if args.scores is not None:
        emb.write_scored_tsv(scored, args.scores)
    print(f"kept {len(kept)}/{len(corpus)} pairs at threshold {threshold}")
    report = RunReport(recipe="filter-embed")
    report.stages.append(
        StageReport("sentence_filter", len(corpus), len(kept), 0.0, {"threshold": repr(threshold)})
    )
    report.histograms["sentence_similarity"] = similarity_histogram(sp.similarity for sp in scored)
    report.output = {"pairs": str(len(kept)), "src_path": str(args.out_src), "tgt_path": str(args.out_tgt)}
    _finish_report(report, args)
    return 0


def _phrase_cfg_overrides(args, cfg):
    from .config import PhraseConfig, RunConfig, Thresholds

    if cfg is None:
        cfg = RunConfig(recipe="baseline", output_dir=Path("."), parallel=[])
    phrases = cfg.phrases
    if getattr(args, "max_len", None) is not None:
        phrases = PhraseConfig(
            args.max_len, phrases.em_iterations, phrases.use_null,
            phrases.symmetrization, phrases.weights,
        )
    if getattr(args, "iterations", None) is not None:
        phrases = PhraseConfig(
            phrases.max_len, args.iterations, phrases.use_null,
            phrases.symmetrization, phrases.weights,
        )
    if getattr(args, "heuristic", None) is not None:
        phrases = PhraseConfig(
            phrases.max_len, phrases.em_iterations, phrases.use_null,
            args.heuristic, phrases.weights,
        )
    cfg.phrases = phrases
    if getattr(args, "threshold", None) is not None:
        if not 0.0 <= args.threshold <= 1.0:
            raise ValidationError(f"threshold out of range [0, 1]: {args.threshold}")
        cfg.thresholds = Thresholds(
            cfg.thresholds.sentence, args.threshold, cfg.thresholds.phrase_embed
        )
    return cfg


def cmd_align(args) -> int:
    cfg = _phrase_cfg_overrides(args, _load_config(args, required=args.src is None))
    corpus = _input_corpus(args, cfg if args.config else None)
    cache = recipes.StageCache(cfg.cache_dir)
    fwd, rev, matrices, _ = recipes.align_corpus(corpus, cfg.phrases, args.workers, cache)
    al.write_alignments(matrices, args.out)
    if args.lex_fwd is not None:
        al.write_lexical_table(fwd, args.lex_fwd)
    if args.lex_rev is not None:
        al.write_lexical_table(rev, args.lex_rev)
    print(f"aligned {len(matrices)} pairs -> {args.out}")
    report = RunReport(recipe="align")
    report.stages.append(StageReport("align", len(corpus), len(matrices), 0.0))
    _finish_report(report, args)
    return 0


def cmd_phrase_table(args) -> int:
    cfg = _phrase_cfg_overrides(args, _load_config(args, required=args.src is None))
    corpus = _input_corpus(args, cfg if args.config else None)
    cache = recipes.StageCache(cfg.cache_dir)
    entries = recipes.mine_phrase_table(corpus, cfg.phrases, args.workers, cache)
    ph.write_phrase_table(entries, args.out)
    print(f"wrote {len(entries)} phrase pairs -> {args.out}")
    report = RunReport(recipe="phrase-table")
    report.stages.append(StageReport("phrase_table", len(corpus), len(entries), 0.0))
    _finish_report(report, args)
    return 0


def cmd_ppi(args) -> int:
    cfg = _phrase_cfg_overrides(args, _load_config(args, required=args.src is None))
    corpus = _input_corpus(args, cfg if args.config else None)
    cache = recipes.StageCache(cfg.cache_dir)
    unique, counters = recipes.extract_ppi_pairs(corpus, cfg, args.workers, cache)
    pairs = ph.entries_as_pairs(unique)
    cio.write_parallel(pairs, args.out_src, args.out_tgt)
    if args.table is not None:
        ph.write_phrase_table(unique, args.table)
    print(
        f"{counters['table_entries']} table entries -> {counters['after_score_filter']} "
        f"after score filter -> {counters['after_longest_unique']} longest-unique pairs"
    )
    report = RunReport(recipe="ppi")
    report.stages.append(
        StageReport(
            "phrase_mining", len(corpus), len(pairs), 0.0, {k: str(v) for k, v in counters.items()}
        )
    )
    report.output = {"pairs": str(len(pairs)), "src_path": str(args.out_src), "tgt_path": str(args.out_tgt)}
    _finish_report(report, args)
    return 0


def cmd_recipe_validate(args) -> int:
    if args.config is None:
        raise ValidationError("recipe validate needs --config")
    cfg, errors = validate_config(args.config)
    if errors:
        for e in errors:
            print(f"config error: {e}", file=sys.stderr)
        print(f"{len(errors)} problem(s) found", file=sys.stderr)
        return EXIT_VALIDATION
    print(f"config ok: recipe {cfg.recipe}")
    return 0


def cmd_recipe_run(args) -> int:
    cfg = _load_config(args, required=True, require_recipe=True)
    output, report = recipes.run_recipe(cfg, workers=args.workers)
    src_path, tgt_path = recipes.write_outputs(output, cfg, report)
    report_path = args.report or cfg.output_dir / f"{cfg.recipe}.report.txt"
    write_report(report, report_path)
    from .plots import render_report_figures

    figures = render_report_figures(report, report_path)
    print(f"recipe {cfg.recipe}: {len(output)} pairs -> {src_path}, {tgt_path}")
    for name, count in report.components.items():
        print(f"  {name}: {count}")
    print(f"report: {report_path} (+{len(figures)} figures)")
    return 0


def cmd_bpe_learn(args) -> int:
    def lines():
        for path in args.inputs:
            try:
                with open(path, encoding="utf-8") as f:
                    yield from (line.rstrip("\n") for line in f)
            except OSError as e:
                raise InputOutputError(f"cannot read {path}: {e.strerror}") from e

    merges = bpe.learn_bpe(lines(), args.merges)
    bpe.write_merge_file(merges, args.out)
    print(f"learned {len(merges)} merges -> {args.out}")
    return 0


def cmd_bpe_apply(args) -> int:
    merges = bpe.read_merge_file(args.merges)
    cache: dict = {}
    try:
        with open(args.input, encoding="utf-8") as fin, open(
            args.output, "w", encoding="utf-8", newline="\n"
        ) as fout:
            for line in fin:
                fout.write(bpe.apply_bpe(line.rstrip("\n"), merges, cache) + "\n")
    except OSError as e:
        raise InputOutputError(f"cannot process {args.input}: {e.strerror}") from e
    print(f"segmented {args.input} -> {args.output}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except InputOutputError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except ProviderError as e:
        print(f"provider error: {e}", file=sys.stderr)
        return EXIT_PROVIDER
    except BitextError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())

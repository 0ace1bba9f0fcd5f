"""Pipeline configuration: YAML schema, exhaustive validation, and
provider construction.

Validation reports every violation at once rather than stopping at the
first, so a bad config can be fixed in one pass.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .embeddings import EmbeddingProvider, FileEmbedder, MockEmbedder, ServiceEmbedder
from .errors import InputOutputError, ValidationError
from .phrases import PhraseScoreWeights

ENDPOINT_ENV_VAR = "BITEXT_EMBED_ENDPOINT"

RECIPE_NAMES = (
    "baseline",
    "no_filtering",
    "baseline_ppi",
    "baseline_labse",
    "baseline_labse_ppi",
    "baseline_ppi_labse",
    "baseline_labse_ppi_labse",
)

# which corpus components each recipe concatenates, beyond the parallel corpus
RECIPE_COMPONENTS: dict[str, tuple[str, ...]] = {
    "baseline": (),
    "no_filtering": ("pseudo_raw",),
    "baseline_ppi": ("phrases",),
    "baseline_labse": ("sentences",),
    "baseline_labse_ppi": ("sentences", "phrases"),
    "baseline_ppi_labse": ("phrases_filtered",),
    "baseline_labse_ppi_labse": ("sentences", "phrases_filtered"),
}


def recipe_uses_embedding(name: str) -> bool:
    return any(
        c in ("sentences", "phrases_filtered") for c in RECIPE_COMPONENTS.get(name, ())
    )


def recipe_uses_pseudo(name: str) -> bool:
    return bool(RECIPE_COMPONENTS.get(name, ()))


def recipe_uses_phrases(name: str) -> bool:
    return any(c.startswith("phrases") for c in RECIPE_COMPONENTS.get(name, ()))


@dataclass
class CorpusSpec:
    name: str
    src: Path
    tgt: Path
    weight: int = 1


@dataclass
class ProviderConfig:
    kind: str = "mock"
    dim: int = 8
    seed: int = 0
    path: Path | None = None  # file provider
    endpoint: str | None = None  # service provider
    timeout: float = 30.0
    retries: int = 2
    batch_size: int = 32
    paired_src: Path | None = None  # mock paired mode registration
    paired_tgt: Path | None = None


@dataclass
class Thresholds:
    sentence: float = 0.9
    phrase_score: float = 0.95
    phrase_embed: float = 0.9


@dataclass
class PhraseConfig:
    max_len: int = 7
    em_iterations: int = 5
    use_null: bool = True
    symmetrization: str = "grow-diag-final-and"
    weights: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)

    def score_weights(self, threshold: float) -> PhraseScoreWeights:
        return PhraseScoreWeights(*self.weights, threshold=threshold)


@dataclass
class PreprocessConfig:
    normalize: bool = True
    dedup: bool = False


@dataclass
class RunConfig:
    recipe: str
    output_dir: Path
    parallel: list[CorpusSpec] = field(default_factory=list)
    pseudo: list[CorpusSpec] = field(default_factory=list)
    calibration: list[CorpusSpec] = field(default_factory=list)
    provider: ProviderConfig | None = None
    thresholds: Thresholds = field(default_factory=Thresholds)
    phrases: PhraseConfig = field(default_factory=PhraseConfig)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    cache_dir: Path | None = None


_TOP_LEVEL_KEYS = {"recipe", "corpora", "provider", "thresholds", "phrases", "preprocess", "cache"}
_SYMMETRIZATIONS = ("intersection", "union", "grow-diag-final-and")


def _as_specs(raw, role: str, base: Path, errors: list[str]) -> list[CorpusSpec]:
    specs = []
    if not isinstance(raw, list):
        errors.append(f"corpora.{role} must be a list of corpus entries")
        return specs
    for n, entry in enumerate(raw):
        where = f"corpora.{role}[{n}]"
        if not isinstance(entry, dict):
            errors.append(f"{where} must be a mapping with src and tgt")
            continue
        unknown = set(entry) - {"name", "src", "tgt", "weight"}
        if unknown:
            errors.append(f"{where}: unknown keys {sorted(unknown)}")
        if "src" not in entry or "tgt" not in entry:
            errors.append(f"{where}: src and tgt paths are required")
            continue
        weight = entry.get("weight", 1)
        if not isinstance(weight, int) or weight < 1:
            errors.append(f"{where}: weight must be a positive integer, got {weight!r}")
            weight = 1
        spec = CorpusSpec(
            name=str(entry.get("name", f"{role}{n}")),
            src=base / str(entry["src"]),
            tgt=base / str(entry["tgt"]),
            weight=weight,
        )
        for side in ("src", "tgt"):
            path = getattr(spec, side)
            if not path.is_file():
                errors.append(f"{where}: missing file {path}")
        specs.append(spec)
    return specs


def _check_range(errors: list[str], key: str, value, lo: float, hi: float) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        errors.append(f"{key} must be a number, got {value!r}")
        return lo
    if not lo <= value <= hi:
        errors.append(f"{key} out of range [{lo}, {hi}]: {value}")
    return float(value)


def validate_config(path, require_recipe: bool = True) -> tuple[RunConfig | None, list[str]]:
    """Load and validate a pipeline config, returning all violations.

    With require_recipe=False (utility subcommands that only need the
    provider/thresholds/phrases sections) the recipe name and corpus
    manifests become optional; whatever is present is still checked.
    """
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as f:
            raw = yaml.safe_load(f)
    except OSError as e:
        raise InputOutputError(f"cannot read {path}: {e.strerror}") from e
    except yaml.YAMLError as e:
        return None, [f"{path}: not valid YAML: {e}"]
    if not isinstance(raw, dict):
        return None, [f"{path}: config must be a mapping"]

    errors: list[str] = []
    base = path.parent

    unknown = set(raw) - _TOP_LEVEL_KEYS
    if unknown:
        errors.append(f"unknown top-level sections {sorted(unknown)}")

    recipe_raw = raw.get("recipe") or {}
    if not isinstance(recipe_raw, dict):
        errors.append("recipe must be a mapping with at least a name")
        recipe_raw = {}
    name = str(recipe_raw.get("name", ""))
    if (require_recipe or name) and name not in RECIPE_NAMES:
        errors.append(
            f"unknown recipe {name!r}; valid recipes: {', '.join(RECIPE_NAMES)}"
        )
    unknown = set(recipe_raw) - {"name", "output_dir"}
    if unknown:
        errors.append(f"recipe: unknown keys {sorted(unknown)}")
    output_dir = base / str(recipe_raw.get("output_dir", "out"))

    corpora_raw = raw.get("corpora") or {}
    if not isinstance(corpora_raw, dict):
        errors.append("corpora must be a mapping of parallel/pseudo/calibration lists")
        corpora_raw = {}
    unknown = set(corpora_raw) - {"parallel", "pseudo", "calibration"}
    if unknown:
        errors.append(f"corpora: unknown roles {sorted(unknown)}")
    parallel = _as_specs(corpora_raw.get("parallel", []), "parallel", base, errors)
    pseudo = _as_specs(corpora_raw.get("pseudo", []), "pseudo", base, errors)
    calibration = _as_specs(corpora_raw.get("calibration", []), "calibration", base, errors)

    if require_recipe and not parallel:
        errors.append("corpora.parallel must list at least one corpus")
    if require_recipe and name in RECIPE_NAMES and recipe_uses_pseudo(name) and not pseudo:
        errors.append(f"recipe {name} consumes a pseudo-parallel corpus; corpora.pseudo is empty")

    thresholds = Thresholds()
    thr_raw = raw.get("thresholds") or {}
    if not isinstance(thr_raw, dict):
        errors.append("thresholds must be a mapping")
        thr_raw = {}
    unknown = set(thr_raw) - {"sentence", "phrase_score", "phrase_embed"}
    if unknown:
        errors.append(f"thresholds: unknown keys {sorted(unknown)}")
    if "sentence" in thr_raw:
        thresholds.sentence = _check_range(errors, "thresholds.sentence", thr_raw["sentence"], -1.0, 1.0)
    if "phrase_score" in thr_raw:
        thresholds.phrase_score = _check_range(
            errors, "thresholds.phrase_score", thr_raw["phrase_score"], 0.0, 1.0
        )
    if "phrase_embed" in thr_raw:
        thresholds.phrase_embed = _check_range(
            errors, "thresholds.phrase_embed", thr_raw["phrase_embed"], -1.0, 1.0
        )

    phrases = PhraseConfig()
    ph_raw = raw.get("phrases") or {}
    if not isinstance(ph_raw, dict):
        errors.append("phrases must be a mapping")
        ph_raw = {}
    unknown = set(ph_raw) - {"max_len", "em_iterations", "use_null", "symmetrization", "weights"}
    if unknown:
        errors.append(f"phrases: unknown keys {sorted(unknown)}")
    if "max_len" in ph_raw:
        if not isinstance(ph_raw["max_len"], int) or ph_raw["max_len"] < 1:
            errors.append(f"phrases.max_len must be a positive integer, got {ph_raw['max_len']!r}")
        else:
            phrases.max_len = ph_raw["max_len"]
    if "em_iterations" in ph_raw:
        if not isinstance(ph_raw["em_iterations"], int) or ph_raw["em_iterations"] < 1:
            errors.append(
                f"phrases.em_iterations must be a positive integer, got {ph_raw['em_iterations']!r}"
            )
        else:
            phrases.em_iterations = ph_raw["em_iterations"]
    if "use_null" in ph_raw:
        phrases.use_null = bool(ph_raw["use_null"])
    if "symmetrization" in ph_raw:
        if ph_raw["symmetrization"] not in _SYMMETRIZATIONS:
            errors.append(
                f"phrases.symmetrization must be one of {_SYMMETRIZATIONS}, "
                f"got {ph_raw['symmetrization']!r}"
            )
        else:
            phrases.symmetrization = ph_raw["symmetrization"]
    if "weights" in ph_raw:
        w = ph_raw["weights"]
        if (
            not isinstance(w, list)
            or len(w) != 4
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in w)
        ):
            errors.append(f"phrases.weights must be a list of 4 numbers, got {w!r}")
        elif any(x < 0 for x in w):
            errors.append(f"phrases.weights must be non-negative, got {w!r}")
        elif sum(w) == 0:
            errors.append("phrases.weights must not all be zero")
        else:
            phrases.weights = tuple(float(x) for x in w)

    preprocess = PreprocessConfig()
    pre_raw = raw.get("preprocess") or {}
    if not isinstance(pre_raw, dict):
        errors.append("preprocess must be a mapping")
        pre_raw = {}
    unknown = set(pre_raw) - {"normalize", "dedup"}
    if unknown:
        errors.append(f"preprocess: unknown keys {sorted(unknown)}")
    preprocess.normalize = bool(pre_raw.get("normalize", True))
    preprocess.dedup = bool(pre_raw.get("dedup", False))

    provider = _validate_provider(raw.get("provider"), base, errors)
    if require_recipe and name in RECIPE_NAMES and recipe_uses_embedding(name) and provider is None:
        errors.append(f"recipe {name} filters by embedding similarity; a provider section is required")

    cache_dir = None
    cache_raw = raw.get("cache") or {}
    if not isinstance(cache_raw, dict):
        errors.append("cache must be a mapping")
        cache_raw = {}
    unknown = set(cache_raw) - {"dir"}
    if unknown:
        errors.append(f"cache: unknown keys {sorted(unknown)}")
    if "dir" in cache_raw:
        cache_dir = base / str(cache_raw["dir"])

    if errors:
        return None, errors
    return (
        RunConfig(
            recipe=name,
            output_dir=output_dir,
            parallel=parallel,
            pseudo=pseudo,
            calibration=calibration,
            provider=provider,
            thresholds=thresholds,
            phrases=phrases,
            preprocess=preprocess,
            cache_dir=cache_dir,
        ),
        [],
    )


def _validate_provider(raw, base: Path, errors: list[str]) -> ProviderConfig | None:
    if raw is None:
        return None
    if not isinstance(raw, dict):
        errors.append("provider must be a mapping")
        return None
    known = {
        "kind", "dim", "seed", "path", "endpoint", "timeout", "retries",
        "batch_size", "paired_src", "paired_tgt",
    }
    unknown = set(raw) - known
    if unknown:
        errors.append(f"provider: unknown keys {sorted(unknown)}")
    cfg = ProviderConfig()
    cfg.kind = str(raw.get("kind", "mock"))
    if cfg.kind not in ("mock", "file", "service"):
        errors.append(f"provider.kind must be mock, file, or service, got {cfg.kind!r}")
    if "dim" in raw:
        if not isinstance(raw["dim"], int) or raw["dim"] < 2:
            errors.append(f"provider.dim must be an integer >= 2, got {raw['dim']!r}")
        else:
            cfg.dim = raw["dim"]
    if "seed" in raw:
        if not isinstance(raw["seed"], int):
            errors.append(f"provider.seed must be an integer, got {raw['seed']!r}")
        else:
            cfg.seed = raw["seed"]
    if "batch_size" in raw:
        if not isinstance(raw["batch_size"], int) or raw["batch_size"] < 1:
            errors.append(f"provider.batch_size must be a positive integer, got {raw['batch_size']!r}")
        else:
            cfg.batch_size = raw["batch_size"]
    if "timeout" in raw:
        cfg.timeout = float(raw["timeout"])
    if "retries" in raw:
        cfg.retries = int(raw["retries"])
    for key in ("path", "paired_src", "paired_tgt"):
        if raw.get(key) is not None:
            p = base / str(raw[key])
            if not p.is_file():
                errors.append(f"provider.{key}: missing file {p}")
            setattr(cfg, key, p)
    if raw.get("endpoint") is not None:
        cfg.endpoint = str(raw["endpoint"])
    if cfg.kind == "file" and cfg.path is None:
        errors.append("provider.kind=file requires provider.path")
    if cfg.kind == "service" and cfg.endpoint is None and not os.environ.get(ENDPOINT_ENV_VAR):
        errors.append(
            f"provider.kind=service requires provider.endpoint or ${ENDPOINT_ENV_VAR}"
        )
    if (cfg.paired_src is None) != (cfg.paired_tgt is None):
        errors.append("provider.paired_src and provider.paired_tgt must be given together")
    return cfg


def build_provider(cfg: ProviderConfig) -> EmbeddingProvider:
    """Instantiate the embedding provider described by a validated config."""
    if cfg.kind == "mock":
        provider = MockEmbedder(dim=cfg.dim, seed=cfg.seed)
        if cfg.paired_src is not None and cfg.paired_tgt is not None:
            from .corpus import read_parallel

            provider.register_corpus(read_parallel(cfg.paired_src, cfg.paired_tgt))
        return provider
    if cfg.kind == "file":
        return FileEmbedder(cfg.path)
    if cfg.kind == "service":
        endpoint = os.environ.get(ENDPOINT_ENV_VAR) or cfg.endpoint
        return ServiceEmbedder(endpoint, timeout=cfg.timeout, retries=cfg.retries)
    raise ValidationError(f"unknown provider kind {cfg.kind!r}")

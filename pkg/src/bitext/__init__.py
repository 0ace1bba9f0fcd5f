"""bitext: mine and filter noisy parallel corpora into training-ready data.

Core surface: corpus I/O (`corpus`), IBM Model 1 alignment (`align`),
phrase mining (`phrases`), embedding filtering (`embeddings`), subword
segmentation (`bpe`), and the recipe pipeline (`config`, `recipes`).
"""

from .align import (
    AlignmentMatrix,
    LexicalTable,
    symmetrize,
    train_model1,
    viterbi_align,
)
from .bpe import MergeList, apply_bpe, decode_bpe, learn_bpe
from .corpus import (
    Corpus,
    SentencePair,
    concat_weighted,
    dedup,
    normalize,
    read_parallel,
    read_tsv,
    write_parallel,
)
from .embeddings import (
    FileEmbedder,
    MockEmbedder,
    ScoredPair,
    ServiceEmbedder,
    calibrate_threshold,
    cosine,
    filter_by_threshold,
    score_pairs,
    text_hash,
)
from .errors import (
    BitextError,
    InputOutputError,
    ParseError,
    ProviderError,
    StructuralError,
    ValidationError,
)
from .phrases import (
    PhraseScoreWeights,
    PhraseTableEntry,
    build_phrase_table,
    extract_phrases,
    lexical_weight,
    longest_unique,
    score_filter,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentMatrix",
    "BitextError",
    "Corpus",
    "FileEmbedder",
    "InputOutputError",
    "LexicalTable",
    "MergeList",
    "MockEmbedder",
    "ParseError",
    "PhraseScoreWeights",
    "PhraseTableEntry",
    "ProviderError",
    "ScoredPair",
    "SentencePair",
    "ServiceEmbedder",
    "StructuralError",
    "ValidationError",
    "apply_bpe",
    "build_phrase_table",
    "calibrate_threshold",
    "concat_weighted",
    "cosine",
    "decode_bpe",
    "dedup",
    "extract_phrases",
    "filter_by_threshold",
    "learn_bpe",
    "lexical_weight",
    "longest_unique",
    "normalize",
    "read_parallel",
    "read_tsv",
    "score_filter",
    "score_pairs",
    "symmetrize",
    "text_hash",
    "train_model1",
    "viterbi_align",
    "write_parallel",
]

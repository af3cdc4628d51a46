"""Few-shot named entity recognition with retrieved in-context examples."""

from .corpus import (
    CorpusError,
    Dataset,
    Entity,
    Example,
    LabelSet,
    dump_yaml_examples,
    emit_bio,
    normalize_copy,
    parse_bio,
    parse_yaml_examples,
)
from .evaluation import EvalCounts, EvalResult, aggregate, compare
from .normalize import Normalizer, porter_stem, tokenize
from .recognition import ParsedOutput, parse_output, recognize, render_prompt
from .retrieval import (
    Bm25Params,
    MmrParams,
    RetrievalError,
    RrfParams,
    bm25_retrieve,
    build_bm25_index,
    build_semantic_index,
    cosine_similarity,
    encode,
    fixed_random_select,
    mmr_rerank,
    rrf_fuse,
    semantic_retrieve,
)

__version__ = "0.1.0"

__all__ = [
    "Bm25Params",
    "CorpusError",
    "Dataset",
    "Entity",
    "EvalCounts",
    "EvalResult",
    "Example",
    "LabelSet",
    "MmrParams",
    "Normalizer",
    "ParsedOutput",
    "RetrievalError",
    "RrfParams",
    "aggregate",
    "bm25_retrieve",
    "build_bm25_index",
    "build_semantic_index",
    "compare",
    "cosine_similarity",
    "dump_yaml_examples",
    "emit_bio",
    "encode",
    "fixed_random_select",
    "mmr_rerank",
    "normalize_copy",
    "parse_bio",
    "parse_output",
    "parse_yaml_examples",
    "porter_stem",
    "recognize",
    "render_prompt",
    "rrf_fuse",
    "semantic_retrieve",
    "tokenize",
]

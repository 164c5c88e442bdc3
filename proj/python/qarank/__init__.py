"""BM25 retrieval, dataset building and IR evaluation over human and LLM answer collections."""

from ._core import (
    Bm25Index,
    ConfigError,
    IntegrityError,
    ParseError,
    ProtocolError,
    QarankError,
    average_precision,
    build_dataset,
    compare,
    decode_response,
    encode_request,
    evaluate,
    mrr_at_k,
    ndcg_at_k,
    paired_t_test,
    porter_stem,
    query_coverage,
    recall_at_k,
    tokenize,
)

__all__ = [
    "Bm25Index",
    "ConfigError",
    "IntegrityError",
    "ParseError",
    "ProtocolError",
    "QarankError",
    "average_precision",
    "build_dataset",
    "compare",
    "decode_response",
    "encode_request",
    "evaluate",
    "mrr_at_k",
    "ndcg_at_k",
    "paired_t_test",
    "porter_stem",
    "query_coverage",
    "recall_at_k",
    "tokenize",
]

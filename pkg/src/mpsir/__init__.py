"""Coarse-to-fine multi-perspective retrieval: BM25 candidates, fused
sentence and document reranking, and alternating weight tuning."""

from .bm25 import AnalyzerConfig, Index, bm25_score, bm25_sentence_score, build_index, retrieve_topk, tokenize
from .corpus import Document, GoldJudgments, Query, SentenceSpan, load_corpus, load_gold, load_queries, segment_sentences
from .fusion import BIOASQ_WEIGHTS, Weights, rank_for_query
from .metrics import average_precision, evaluate_run, precision_recall_f1
from .tuner import TunerConfig, alternating_optimize, build_dataset, evaluate_objective, grid_search_oracle

__version__ = "0.1.0"

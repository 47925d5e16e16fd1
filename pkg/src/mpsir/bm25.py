"""Inverted index with Okapi BM25 scoring at document and sentence level."""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

from .corpus import Document, SentenceSpan

K1 = 1.2
B = 0.75

_SPLIT = re.compile(r"[^0-9a-zA-Z]+")

# Small English function-word list; used for optional stopword removal and
# for picking query content terms.
STOPWORDS = frozenset(
    """
    a about above after again against all am an and any are as at be because been before
    being below between both but by can could did do does doing down during each few for
    from further had has have having he her here hers herself him himself his how i if in
    into is it its itself just me more most my myself no nor not now of off on once only or
    other our ours ourselves out over own same she should so some such than that the their
    theirs them themselves then there these they this those through to too under until up
    very was we were what when where which while who whom why will with you your yours
    yourself yourselves
    """.split()
)


@dataclass(frozen=True)
class AnalyzerConfig:
    lowercase: bool = True
    stopword_removal: bool = False
    stopword_list: frozenset = STOPWORDS

    def to_dict(self) -> dict:
        return {
            "lowercase": self.lowercase,
            "stopword_removal": self.stopword_removal,
            "stopword_list": sorted(self.stopword_list),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "AnalyzerConfig":
        return cls(bool(d["lowercase"]), bool(d["stopword_removal"]), frozenset(d["stopword_list"]))


def tokenize(text: str, config: AnalyzerConfig = AnalyzerConfig()) -> list[str]:
    if config.lowercase:
        text = text.lower()
    tokens = [t for t in _SPLIT.split(text) if t]
    if config.stopword_removal:
        tokens = [t for t in tokens if t not in config.stopword_list]
    return tokens


def idf(n_docs: int, df: int) -> float:
    return math.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))


def okapi_term(tf: int, dl: int, avgdl: float, term_idf: float, k1: float = K1, b: float = B) -> float:
    return term_idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))


@dataclass(frozen=True)
class Index:
    """Immutable inverted index.

    ``postings`` maps each term to ``{doc_id: term_frequency}``; doc order is
    corpus order. ``doc_lengths`` preserves corpus order as well.
    """

    postings: Mapping[str, Mapping[str, int]]
    doc_lengths: Mapping[str, int]
    avgdl: float
    analyzer_config: AnalyzerConfig = AnalyzerConfig()
    k1: float = K1
    b: float = B
    _idf: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def N(self) -> int:
        return len(self.doc_lengths)

    @property
    def vocabulary_size(self) -> int:
        return len(self.postings)

    def df(self, term: str) -> int:
        return len(self.postings.get(term, ()))

    def idf(self, term: str) -> float:
        value = self._idf.get(term)
        if value is None:
            value = self._idf[term] = idf(self.N, self.df(term))
        return value

    def tokenize(self, text: str) -> list[str]:
        return tokenize(text, self.analyzer_config)


def build_index(corpus: Sequence[Document], analyzer_config: AnalyzerConfig = AnalyzerConfig(),
                k1: float = K1, b: float = B) -> Index:
    if not corpus:
        raise ValueError("cannot build an index over an empty corpus")
    postings: dict[str, dict[str, int]] = {}
    doc_lengths: dict[str, int] = {}
    for doc in corpus:
        if doc.doc_id in doc_lengths:
            raise ValueError(f"duplicate doc_id {doc.doc_id!r}")
        tokens = tokenize(doc.text, analyzer_config)
        doc_lengths[doc.doc_id] = len(tokens)
        for term, tf in Counter(tokens).items():
            postings.setdefault(term, {})[doc.doc_id] = tf
    return _freeze(postings, doc_lengths, analyzer_config, k1, b)


def _freeze(postings, doc_lengths, analyzer_config, k1, b) -> Index:
    avgdl = math.fsum(doc_lengths.values()) / len(doc_lengths)
    return Index(
        postings=MappingProxyType({t: MappingProxyType(p) for t, p in postings.items()}),
        doc_lengths=MappingProxyType(dict(doc_lengths)),
        avgdl=avgdl,
        analyzer_config=analyzer_config,
        k1=k1,
        b=b,
    )


def _unique(terms: Iterable[str]) -> list[str]:
    return list(dict.fromkeys(terms))


def bm25_score(index: Index, query_terms: Sequence[str], doc_id: str) -> float:
    try:
        dl = index.doc_lengths[doc_id]
    except KeyError:
        raise KeyError(f"unknown doc_id {doc_id!r}") from None
    score = 0.0
    for term in _unique(query_terms):
        tf = index.postings.get(term, {}).get(doc_id)
        if tf:
            score += okapi_term(tf, dl, index.avgdl, index.idf(term), index.k1, index.b)
    return score


def score_all(index: Index, query_terms: Sequence[str]) -> dict[str, float]:
    """Scores of every document matching at least one query term.

    Accumulates per term in the same order as :func:`bm25_score`, so the
    two agree bit for bit.
    """
    scores: dict[str, float] = {}
    for term in _unique(query_terms):
        plist = index.postings.get(term)
        if not plist:
            continue
        term_idf = index.idf(term)
        for doc_id, tf in plist.items():
            s = okapi_term(tf, index.doc_lengths[doc_id], index.avgdl, term_idf, index.k1, index.b)
            scores[doc_id] = scores.get(doc_id, 0.0) + s
    return scores


def rank_scores(scores: Mapping[str, float], k: int | None = None) -> list[tuple[str, float]]:
    """Positive scores sorted by (score desc, doc_id asc), cut at ``k``."""
    ranked = sorted(((d, s) for d, s in scores.items() if s > 0), key=lambda x: (-x[1], x[0]))
    return ranked if k is None else ranked[:k]


def retrieve_topk(index: Index, query: str, k: int) -> list[tuple[str, float]]:
    if k < 1:
        raise ValueError("k must be >= 1")
    return rank_scores(score_all(index, index.tokenize(query)), k)


def bm25_sentence_score(index: Index, query_terms: Sequence[str], sentence: SentenceSpan | str) -> float:
    """Okapi score of a single sentence using the document-level statistics."""
    text = sentence if isinstance(sentence, str) else sentence.text
    tokens = index.tokenize(text)
    if not tokens:
        return 0.0
    counts = Counter(tokens)
    dl = len(tokens)
    score = 0.0
    for term in _unique(query_terms):
        tf = counts.get(term)
        if tf:
            score += okapi_term(tf, dl, index.avgdl, index.idf(term), index.k1, index.b)
    return score


# -- persistence ------------------------------------------------------------
# JSON lines: one header object, then one {"term", "postings"} object per term
# in sorted term order. Floats go through repr, which round-trips exactly.


def save_index(index: Index, path) -> None:
    header = {
        "N": index.N,
        "avgdl": index.avgdl,
        "k1": index.k1,
        "b": index.b,
        "analyzer_config": index.analyzer_config.to_dict(),
        "doc_lengths": [[d, n] for d, n in index.doc_lengths.items()],
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for term in sorted(index.postings):
            fh.write(json.dumps({"term": term, "postings": [[d, tf] for d, tf in index.postings[term].items()]}) + "\n")


def load_index(path) -> Index:
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        postings = {}
        for line in fh:
            rec = json.loads(line)
            postings[rec["term"]] = {d: int(tf) for d, tf in rec["postings"]}
    doc_lengths = {d: int(n) for d, n in header["doc_lengths"]}
    index = _freeze(postings, doc_lengths, AnalyzerConfig.from_dict(header["analyzer_config"]),
                    header["k1"], header["b"])
    if index.N != header["N"] or index.avgdl != header["avgdl"]:
        raise ValueError(f"{path}: header statistics do not match postings")
    return index

"""Weighted-sum fusion of perspective scores into document and sentence rankings.

Document and sentence scores refer to each other: a document scores by its
BM25 value plus its three best sentences, and a sentence scores by its
perspectives plus its document's score. The cycle is cut by letting the
document consume *base* sentence scores (perspectives only) and adding the
document term to sentences afterwards, so ranking is three fixed passes.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .corpus import SentenceSpan
from .perspectives import PerspectiveScores

WEIGHT_KEYS = ("alpha1", "alpha2", "alpha3", "alpha4", "beta1", "beta2", "w1", "w2", "w3")
ALPHA_KEYS = WEIGHT_KEYS[:4]
BETA_KEYS = WEIGHT_KEYS[4:]
ALPHA4_SOURCES = ("doc_score", "doc_bm25")


class WeightsError(ValueError):
    pass


@dataclass(frozen=True)
class Weights:
    alpha1: float = 0.5
    alpha2: float = 0.5
    alpha3: float = 0.5
    alpha4: float = 0.5
    beta1: float = 0.5
    beta2: float = 0.5
    w1: float = 0.5
    w2: float = 0.5
    w3: float = 0.5
    alpha4_source: str = "doc_score"

    def __post_init__(self):
        for key in WEIGHT_KEYS:
            v = getattr(self, key)
            if not 0.0 <= v <= 1.0:
                raise WeightsError(f"{key}={v} outside [0, 1]")
        if self.alpha4_source not in ALPHA4_SOURCES:
            raise WeightsError(f"alpha4_source must be one of {ALPHA4_SOURCES}")

    @classmethod
    def uniform(cls, value: float = 0.5, alpha4_source: str = "doc_score") -> "Weights":
        return cls(**{k: value for k in WEIGHT_KEYS}, alpha4_source=alpha4_source)

    def with_values(self, values: Mapping[str, float]) -> "Weights":
        unknown = set(values) - set(WEIGHT_KEYS)
        if unknown:
            raise WeightsError(f"unknown weight keys {sorted(unknown)}")
        return replace(self, **{k: float(v) for k, v in values.items()})

    def vector(self, keys: Sequence[str] = WEIGHT_KEYS) -> tuple[float, ...]:
        return tuple(getattr(self, k) for k in keys)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "Weights":
        expected = {f.name for f in fields(cls)}
        if set(d) != expected:
            missing, extra = expected - set(d), set(d) - expected
            raise WeightsError(f"weights file keys mismatch (missing={sorted(missing)}, extra={sorted(extra)})")
        values = {k: float(d[k]) for k in WEIGHT_KEYS}
        return cls(**values, alpha4_source=str(d["alpha4_source"]))


# Values learned on BioASQ sentence relevance data with gold documents.
BIOASQ_WEIGHTS = Weights(
    alpha1=0.6123,
    alpha2=0.2664,
    alpha3=0.0785,
    alpha4=0.9879,
    beta1=0.0002,
    beta2=0.8523,
    w1=0.9938,
    w2=0.0338,
    w3=0.0271,
)


def save_weights(weights: Weights, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(weights.to_dict(), fh, indent=2)
        fh.write("\n")


def load_weights(path) -> Weights:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise WeightsError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise WeightsError(f"{path}: expected a flat JSON object")
    return Weights.from_dict(data)


# -- scalar forms --------------------------------------------------------------


def sentence_base_score(ps: PerspectiveScores, w: Weights) -> float:
    return w.alpha1 * ps.s_rel + w.alpha2 * ps.s_sts + w.alpha3 * ps.s_sia


def doc_score(s_bm25_doc: float, base_scores: Sequence[float], w: Weights) -> float:
    top = sorted(base_scores, reverse=True)[:3]
    t1, t2, t3 = top + [0.0] * (3 - len(top))
    return w.beta1 * s_bm25_doc + w.beta2 * (w.w1 * t1 + w.w2 * t2 + w.w3 * t3)


def final_sentence_score(base: float, doc_term: float, w: Weights) -> float:
    return base + w.alpha4 * doc_term


# -- ranking -------------------------------------------------------------------


class RankedSentence(NamedTuple):
    doc_id: str
    sent_index: int
    score: float
    span: SentenceSpan | None = None


@dataclass(frozen=True)
class RankedDocList:
    query_id: str
    entries: tuple[tuple[str, float], ...]

    @property
    def doc_ids(self) -> list[str]:
        return [d for d, _ in self.entries]


@dataclass(frozen=True)
class RankedSentList:
    query_id: str
    entries: tuple[RankedSentence, ...]


@dataclass(frozen=True)
class CandidateSet:
    """Array form of one query's candidate pool, built once and re-ranked
    under many weight settings."""

    query_id: str
    doc_ids: tuple[str, ...]
    doc_bm25: np.ndarray  # (n_docs,)
    doc_order: np.ndarray  # position of each doc_id in ascending doc_id order
    sent_doc: np.ndarray  # (n_sents,) index into doc_ids
    sent_index: np.ndarray  # (n_sents,)
    perspective: np.ndarray  # (n_sents, 3): s_rel, s_sts, s_sia
    spans: tuple[SentenceSpan | None, ...]

    @property
    def n_docs(self) -> int:
        return len(self.doc_ids)

    @property
    def n_sents(self) -> int:
        return len(self.sent_index)


def prepare_candidates(
    query_id: str,
    candidate_docs: Sequence[tuple[str, float]],
    sentences: Mapping[str, Sequence[SentenceSpan]],
    scores: Mapping[tuple[str, int], PerspectiveScores],
) -> CandidateSet:
    doc_ids = tuple(d for d, _ in candidate_docs)
    if len(set(doc_ids)) != len(doc_ids):
        raise ValueError(f"duplicate candidate documents for query {query_id}")
    doc_order = np.empty(len(doc_ids), dtype=np.int64)
    doc_order[np.argsort(np.array(doc_ids, dtype=object), kind="stable")] = np.arange(len(doc_ids))
    sent_doc, sent_index, rows, spans = [], [], [], []
    for di, doc_id in enumerate(doc_ids):
        for span in sentences.get(doc_id, ()):
            ps = scores[(doc_id, span.sent_index)]
            sent_doc.append(di)
            sent_index.append(span.sent_index)
            rows.append((ps.s_rel, ps.s_sts, ps.s_sia))
            spans.append(span)
    return CandidateSet(
        query_id=query_id,
        doc_ids=doc_ids,
        doc_bm25=np.array([s for _, s in candidate_docs], dtype=float),
        doc_order=doc_order,
        sent_doc=np.array(sent_doc, dtype=np.int64),
        sent_index=np.array(sent_index, dtype=np.int64),
        perspective=np.array(rows, dtype=float).reshape(-1, 3),
        spans=tuple(spans),
    )


def base_scores(cands: CandidateSet, w: Weights) -> np.ndarray:
    p = cands.perspective
    return w.alpha1 * p[:, 0] + w.alpha2 * p[:, 1] + w.alpha3 * p[:, 2]


def top3_per_doc(cands: CandidateSet, base: np.ndarray) -> np.ndarray:
    """(n_docs, 3) array of each document's three best base scores, zero padded."""
    top = np.zeros((cands.n_docs, 3))
    if cands.n_sents == 0:
        return top
    order = np.lexsort((cands.sent_index, -base, cands.sent_doc))
    docs = cands.sent_doc[order]
    first = np.r_[True, docs[1:] != docs[:-1]]
    group_start = np.maximum.accumulate(np.where(first, np.arange(len(docs)), 0))
    rank = np.arange(len(docs)) - group_start
    keep = rank < 3
    top[docs[keep], rank[keep]] = base[order][keep]
    return top


def doc_scores(cands: CandidateSet, base: np.ndarray, w: Weights) -> np.ndarray:
    top = top3_per_doc(cands, base)
    return w.beta1 * cands.doc_bm25 + w.beta2 * (w.w1 * top[:, 0] + w.w2 * top[:, 1] + w.w3 * top[:, 2])


def rank_candidates(cands: CandidateSet, w: Weights, k_docs: int = 10,
                    n_sents: int = 10) -> tuple[RankedDocList, RankedSentList]:
    base = base_scores(cands, w)
    sdoc = doc_scores(cands, base, w)

    doc_rank = np.lexsort((cands.doc_order, -sdoc))[:k_docs]
    ranked_docs = RankedDocList(
        cands.query_id, tuple((cands.doc_ids[i], float(sdoc[i])) for i in doc_rank)
    )

    in_top = np.zeros(cands.n_docs, dtype=bool)
    in_top[doc_rank] = True
    sel = np.flatnonzero(in_top[cands.sent_doc])
    doc_term = sdoc if w.alpha4_source == "doc_score" else cands.doc_bm25
    final = base[sel] + w.alpha4 * doc_term[cands.sent_doc[sel]]
    order = np.lexsort((cands.sent_index[sel], cands.doc_order[cands.sent_doc[sel]], -final))[:n_sents]
    ranked_sents = RankedSentList(
        cands.query_id,
        tuple(
            RankedSentence(
                cands.doc_ids[cands.sent_doc[sel[j]]],
                int(cands.sent_index[sel[j]]),
                float(final[j]),
                cands.spans[sel[j]],
            )
            for j in order
        ),
    )
    return ranked_docs, ranked_sents


def rank_for_query(
    query_id: str,
    candidate_docs: Sequence[tuple[str, float]],
    sentences: Mapping[str, Sequence[SentenceSpan]],
    scores: Mapping[tuple[str, int], PerspectiveScores],
    w: Weights,
    k_docs: int = 10,
    n_sents: int = 10,
) -> tuple[RankedDocList, RankedSentList]:
    """Rank a query's BM25 candidate pool and the sentences of its top documents.

    ``candidate_docs`` holds ``(doc_id, bm25_score)`` pairs, ``sentences``
    maps doc_id to its spans and ``scores`` maps ``(doc_id, sent_index)``
    to resolved perspective scores.
    """
    cands = prepare_candidates(query_id, candidate_docs, sentences, scores)
    return rank_candidates(cands, w, k_docs, n_sents)

"""BioASQ-style ranking metrics: precision, recall, F1, AP, MAP and GMAP."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Hashable, Mapping, Sequence

DEFAULT_CUTOFF = 10
DEFAULT_EPSILON = 0.01


class EvaluationError(ValueError):
    pass


def _check_unique(ranked: Sequence[Hashable]) -> None:
    if len(set(ranked)) != len(ranked):
        raise EvaluationError("ranked list contains duplicate ids")


def average_precision(ranked: Sequence[Hashable], gold, cutoff: int = DEFAULT_CUTOFF) -> float:
    """Sum of precision at each relevant rank, over min(|gold|, cutoff)."""
    _check_unique(ranked)
    if not gold:
        return 0.0
    hits = 0
    total = 0.0
    for r, item in enumerate(ranked[:cutoff], start=1):
        if item in gold:
            hits += 1
            total += hits / r
    return total / min(len(gold), cutoff)


def precision_recall_f1(ranked: Sequence[Hashable], gold, cutoff: int = DEFAULT_CUTOFF) -> tuple[float, float, float]:
    _check_unique(ranked)
    top = ranked[:cutoff]
    if not top:
        return 0.0, 0.0, 0.0
    hits = sum(1 for item in top if item in gold)
    p = hits / len(top)
    r = hits / len(gold) if gold else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f1


@dataclass(frozen=True)
class QueryMetrics:
    precision: float
    recall: float
    f1: float
    ap: float


@dataclass(frozen=True)
class Aggregate:
    mprec: float
    mrec: float
    f_measure: float
    map: float
    gmap: float


def aggregate(per_query: Mapping[str, QueryMetrics], epsilon: float = DEFAULT_EPSILON) -> Aggregate:
    if not per_query:
        raise EvaluationError("aggregate needs at least one query")
    rows = list(per_query.values())
    n = len(rows)
    gmap = math.exp(math.fsum(math.log(q.ap + epsilon) for q in rows) / n)
    return Aggregate(
        mprec=math.fsum(q.precision for q in rows) / n,
        mrec=math.fsum(q.recall for q in rows) / n,
        f_measure=math.fsum(q.f1 for q in rows) / n,
        map=math.fsum(q.ap for q in rows) / n,
        gmap=min(1.0, gmap),
    )


@dataclass(frozen=True)
class EvalReport:
    per_query: dict = field(default_factory=dict)  # query_id -> QueryMetrics
    aggregate: Aggregate | None = None
    cutoff: int = DEFAULT_CUTOFF
    epsilon: float = DEFAULT_EPSILON

    def to_dict(self) -> dict:
        return {
            "cutoff": self.cutoff,
            "epsilon": self.epsilon,
            "aggregate": asdict(self.aggregate),
            "per_query": {q: asdict(m) for q, m in self.per_query.items()},
        }

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["query_id", "precision", "recall", "f1", "ap", "gmap"])
            for qid, m in self.per_query.items():
                writer.writerow([qid, m.precision, m.recall, m.f1, m.ap, ""])
            a = self.aggregate
            writer.writerow(["ALL", a.mprec, a.mrec, a.f_measure, a.map, a.gmap])


def evaluate_run(run: Mapping[str, Sequence[Hashable]], gold: Mapping[str, set],
                 cutoff: int = DEFAULT_CUTOFF, epsilon: float = DEFAULT_EPSILON) -> EvalReport:
    """Score a run of ranked keys per query against gold key sets.

    Keys are doc_ids for document runs and ``(doc_id, normalized_text)``
    pairs for snippet runs (see ``mpsir.submission``).
    """
    missing = [q for q in run if q not in gold]
    if missing:
        raise EvaluationError(f"no gold judgments for queries: {', '.join(missing)}")
    per_query = {}
    for qid, ranked in run.items():
        ranked = list(ranked)
        p, r, f1 = precision_recall_f1(ranked, gold[qid], cutoff)
        per_query[qid] = QueryMetrics(p, r, f1, average_precision(ranked, gold[qid], cutoff))
    return EvalReport(per_query, aggregate(per_query, epsilon), cutoff, epsilon)


def dedupe(keys) -> list:
    """Drop repeated keys, keeping the first (best ranked) occurrence."""
    return list(dict.fromkeys(keys))

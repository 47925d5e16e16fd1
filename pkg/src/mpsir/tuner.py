"""Alternating optimisation of the fusion weights against a MAP objective.

The weights split into two blocks: document weights (beta1, beta2, w1..w3)
and sentence weights (alpha1..alpha4). Phases alternate between them,
starting with the document block; inside a phase the free block is
searched with Bayesian optimisation while the other block stays fixed.
"""

from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .bayesopt import ParamSpace, Trial, bayes_opt_phase
from .bm25 import Index, retrieve_topk
from .corpus import Document, GoldJudgments, Query, SentenceSpan, normalize_text, segment_sentences
from .fusion import (
    ALPHA_KEYS,
    BETA_KEYS,
    BIOASQ_WEIGHTS,
    WEIGHT_KEYS,
    CandidateSet,
    Weights,
    prepare_candidates,
    rank_candidates,
)
from .metrics import DEFAULT_CUTOFF, average_precision, dedupe
from .perspectives import ScoreTable, resolve_scores

log = logging.getLogger(__name__)

OBJECTIVE_KINDS = ("sent_map", "doc_map")
CACHE_QUANTUM = 1e-9


@dataclass(frozen=True)
class TunerConfig:
    objective_kind: str = "sent_map"
    phases: int = 8
    trials_per_phase: int = 50
    init_random_trials: int = 10
    rng_seed: int = 0
    initial_value: float = 0.5
    # restrict tuning to these weight keys; the rest stay at ``base_weights``
    free: tuple[str, ...] | None = None
    base_weights: Weights = field(default_factory=Weights)
    convergence_tol: float = 1e-4
    n_candidates: int = 1024

    def __post_init__(self):
        if self.objective_kind not in OBJECTIVE_KINDS:
            raise ValueError(f"objective_kind must be one of {OBJECTIVE_KINDS}")
        if not self.trials_per_phase >= self.init_random_trials >= 1:
            raise ValueError("need trials_per_phase >= init_random_trials >= 1")
        if self.phases < 0:
            raise ValueError("phases must be >= 0")
        if self.free is not None and not set(self.free) <= set(WEIGHT_KEYS):
            raise ValueError(f"unknown free keys {sorted(set(self.free) - set(WEIGHT_KEYS))}")


@dataclass
class RankingDataset:
    """Queries with their candidate pools, resolved scores and gold keys.

    Everything here is fixed once built, so the objective is a pure
    function of the weights and is memoised.
    """

    candidates: list[CandidateSet]
    gold_docs: dict[str, frozenset]
    gold_sentences: dict[str, frozenset]
    k_docs: int = 10
    n_sents: int = 10
    cutoff: int = DEFAULT_CUTOFF
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def query_ids(self) -> list[str]:
        return [c.query_id for c in self.candidates]

    def subset(self, query_ids: Sequence[str]) -> "RankingDataset":
        keep = set(query_ids)
        return RankingDataset([c for c in self.candidates if c.query_id in keep], self.gold_docs,
                              self.gold_sentences, self.k_docs, self.n_sents, self.cutoff)


def sentence_key(span: SentenceSpan) -> tuple[str, str]:
    return span.doc_id, normalize_text(span.text)


def build_dataset(
    queries: Sequence[Query],
    gold: Sequence[GoldJudgments],
    corpus: Sequence[Document] | Mapping[str, Document],
    index: Index,
    table: ScoreTable | None = None,
    pool_size: int = 100,
    k_docs: int = 10,
    n_sents: int = 10,
    fallback_policy: str = "builtin",
    cutoff: int = DEFAULT_CUTOFF,
) -> RankingDataset:
    docs = corpus if isinstance(corpus, Mapping) else {d.doc_id: d for d in corpus}
    gold_by_id = {g.query_id: g for g in gold}
    missing = [q.query_id for q in queries if q.query_id not in gold_by_id]
    if missing:
        raise ValueError(f"no gold judgments for queries: {', '.join(missing)}")
    table = table if table is not None else ScoreTable()
    segmented: dict[str, list[SentenceSpan]] = {}
    candidates = []
    for q in queries:
        pool = retrieve_topk(index, q.body, pool_size)
        sentences = {}
        scores = {}
        for doc_id, _ in pool:
            if doc_id not in segmented:
                segmented[doc_id] = segment_sentences(docs[doc_id])
            sentences[doc_id] = segmented[doc_id]
            for span in segmented[doc_id]:
                scores[(doc_id, span.sent_index)] = resolve_scores(q.query_id, q.body, span, table,
                                                                   index, fallback_policy)
        candidates.append(prepare_candidates(q.query_id, pool, sentences, scores))
    return RankingDataset(
        candidates,
        {q.query_id: frozenset(gold_by_id[q.query_id].gold_docs) for q in queries},
        {q.query_id: frozenset(gold_by_id[q.query_id].gold_sentences) for q in queries},
        k_docs,
        n_sents,
        cutoff,
    )


def _cache_key(weights: Weights, objective_kind: str) -> tuple:
    return (objective_kind, weights.alpha4_source) + tuple(
        int(round(v / CACHE_QUANTUM)) for v in weights.vector()
    )


def per_query_ap(weights: Weights, dataset: RankingDataset, objective_kind: str = "sent_map") -> dict[str, float]:
    out = {}
    for cands in dataset.candidates:
        docs, sents = rank_candidates(cands, weights, dataset.k_docs, dataset.n_sents)
        if objective_kind == "doc_map":
            out[cands.query_id] = average_precision(docs.doc_ids, dataset.gold_docs[cands.query_id],
                                                    dataset.cutoff)
        else:
            keys = dedupe(sentence_key(s.span) for s in sents.entries)
            out[cands.query_id] = average_precision(keys, dataset.gold_sentences[cands.query_id],
                                                    dataset.cutoff)
    return out


def evaluate_objective(weights: Weights, dataset: RankingDataset, objective_kind: str = "sent_map") -> float:
    """Sentence or document MAP of ``weights`` over the dataset."""
    if objective_kind not in OBJECTIVE_KINDS:
        raise ValueError(f"objective_kind must be one of {OBJECTIVE_KINDS}")
    key = _cache_key(weights, objective_kind)
    value = dataset._cache.get(key)
    if value is None:
        aps = per_query_ap(weights, dataset, objective_kind)
        value = float(np.mean(list(aps.values()))) if aps else 0.0
        dataset._cache[key] = value
    return value


def initial_weights(config: TunerConfig) -> Weights:
    free = config.free if config.free is not None else WEIGHT_KEYS
    return config.base_weights.with_values({k: config.initial_value for k in free})


def alternating_optimize(dataset: RankingDataset, config: TunerConfig = TunerConfig()) -> tuple[Weights, list[Trial]]:
    """Tune the fusion weights by alternating block-wise Bayesian optimisation.

    The trace starts with the initial point as phase 0. A phase's best
    point replaces the incumbent block only if it is at least as good as
    the current best, so the best-so-far objective never decreases. The
    loop stops after ``config.phases`` phases, or earlier once a full
    document+sentence loop gains less than ``config.convergence_tol``.
    """
    free = set(config.free if config.free is not None else WEIGHT_KEYS)
    blocks = ([k for k in BETA_KEYS if k in free], [k for k in ALPHA_KEYS if k in free])
    current = initial_weights(config)
    best = evaluate_objective(current, dataset, config.objective_kind)
    trace = [Trial({k: getattr(current, k) for k in WEIGHT_KEYS}, best, 0, 0)]
    loop_start = best

    for phase in range(1, config.phases + 1):
        block = blocks[(phase - 1) % 2]
        if block:
            incumbent = current

            def objective(params, incumbent=incumbent):
                return evaluate_objective(incumbent.with_values(params), dataset, config.objective_kind)

            rng = np.random.default_rng(np.random.SeedSequence([config.rng_seed, phase]))
            params, trials = bayes_opt_phase(
                objective,
                ParamSpace.unit(block),
                config.trials_per_phase,
                config.init_random_trials,
                rng,
                phase_index=phase,
                n_candidates=config.n_candidates,
            )
            trace.extend(trials)
            phase_best = max(t.objective for t in trials)
            log.info("phase %d (%s): best %.6f, incumbent %.6f", phase, ",".join(block), phase_best, best)
            if phase_best >= best:
                current = current.with_values(params)
                best = phase_best
        if phase % 2 == 0:
            if best - loop_start < config.convergence_tol:
                log.info("converged after phase %d", phase)
                break
            loop_start = best
    return current, trace


def best_so_far(trace: Sequence[Trial]) -> list[tuple[int, float]]:
    """(phase_index, best objective up to and including that phase)."""
    out: list[tuple[int, float]] = []
    best = -np.inf
    for phase, group in itertools.groupby(trace, key=lambda t: t.phase_index):
        best = max(best, max(t.objective for t in group))
        out.append((phase, best))
    return out


MAX_GRID_DIMS = 5
MAX_GRID_LEVELS = 11


def grid_levels(resolution: float) -> list[float]:
    steps = round(1.0 / resolution)
    if steps < 1 or abs(steps * resolution - 1.0) > 1e-9:
        raise ValueError(f"resolution {resolution} does not divide [0, 1]")
    if steps + 1 > MAX_GRID_LEVELS:
        raise ValueError(f"resolution {resolution} gives more than {MAX_GRID_LEVELS} levels")
    return [i / steps for i in range(steps + 1)]


def grid_search_oracle(
    dataset: RankingDataset,
    objective_kind: str = "sent_map",
    resolution: float = 0.1,
    free: Sequence[str] = ("alpha1",),
    base_weights: Weights = BIOASQ_WEIGHTS,
) -> tuple[Weights, float]:
    """Exhaustive grid search over ``free``; ties go to the lexicographically
    smallest parameter vector."""
    free = tuple(free)
    if not 1 <= len(free) <= MAX_GRID_DIMS:
        raise ValueError(f"grid search supports 1..{MAX_GRID_DIMS} free dimensions, got {len(free)}")
    levels = grid_levels(resolution)
    best_w, best_val = None, -np.inf
    for point in itertools.product(levels, repeat=len(free)):
        w = base_weights.with_values(dict(zip(free, point)))
        val = evaluate_objective(w, dataset, objective_kind)
        if val > best_val:
            best_w, best_val = w, val
    return best_w, best_val


def write_trace(trace: Sequence[Trial], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in trace:
            fh.write(json.dumps(t.to_dict(), sort_keys=True) + "\n")


def read_trace(path) -> list[Trial]:
    with open(path, encoding="utf-8") as fh:
        return [Trial.from_dict(json.loads(line)) for line in fh if line.strip()]

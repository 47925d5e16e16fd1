"""Per (query, sentence) perspective scores.

Four scorer kinds are fused downstream. Each keeps its native scale; the
fusion weights absorb the normalisation. Learned scorers are plugged in
through precomputed TSV score files, with lexical built-ins as fallback.
"""

from __future__ import annotations

import enum
import math
import threading
from collections import Counter
from dataclasses import dataclass, field

from .bm25 import STOPWORDS, Index, bm25_sentence_score
from .corpus import SentenceSpan


class ScorerKind(str, enum.Enum):
    SENT_RELEVANCE = "sent_relevance"
    STS = "sts"
    SIA = "sia"
    BM25_SENTENCE = "bm25_sentence"

    @property
    def native_range(self) -> tuple[float, float]:
        return NATIVE_RANGES[self]


NATIVE_RANGES = {
    ScorerKind.SENT_RELEVANCE: (0.0, 1.0),
    ScorerKind.STS: (0.0, 5.0),
    ScorerKind.SIA: (0.0, 4.0),
    ScorerKind.BM25_SENTENCE: (0.0, math.inf),
}

# kinds that may appear in a score file
FILE_SCORERS = (ScorerKind.SENT_RELEVANCE, ScorerKind.STS, ScorerKind.SIA)

_FIELD = {
    ScorerKind.SENT_RELEVANCE: "s_rel",
    ScorerKind.STS: "s_sts",
    ScorerKind.SIA: "s_sia",
    ScorerKind.BM25_SENTENCE: "s_bm25_sent",
}


class ScoreError(ValueError):
    pass


class MissingScoreError(ScoreError):
    pass


@dataclass(frozen=True)
class PerspectiveScores:
    query_id: str
    doc_id: str
    sent_index: int
    s_rel: float
    s_sts: float
    s_sia: float
    s_bm25_sent: float

    def __post_init__(self):
        for kind, name in _FIELD.items():
            lo, hi = kind.native_range
            v = getattr(self, name)
            if not lo <= v <= hi:
                raise ScoreError(f"{name}={v} outside [{lo}, {hi}]")

    def get(self, kind: ScorerKind) -> float:
        return getattr(self, _FIELD[ScorerKind(kind)])


def _check_range(kind: ScorerKind, value: float) -> bool:
    lo, hi = kind.native_range
    return lo <= value <= hi


# -- built-in lexical stand-ins ----------------------------------------------


def overlap_f1(query_tokens: list[str], sent_tokens: list[str]) -> float:
    common = sum((Counter(query_tokens) & Counter(sent_tokens)).values())
    if common == 0:
        return 0.0
    precision = common / len(sent_tokens)
    recall = common / len(query_tokens)
    return 2 * precision * recall / (precision + recall)


def tfidf_cosine(query_tokens: list[str], sent_tokens: list[str], index: Index) -> float:
    q, s = Counter(query_tokens), Counter(sent_tokens)
    if not q or not s:
        return 0.0
    qw = {t: c * index.idf(t) for t, c in q.items()}
    sw = {t: c * index.idf(t) for t, c in s.items()}
    dot = math.fsum(qw[t] * sw[t] for t in qw.keys() & sw.keys())
    if dot == 0.0:
        return 0.0
    nq = math.fsum(v * v for v in qw.values())
    ns = math.fsum(v * v for v in sw.values())
    return min(1.0, dot / math.sqrt(nq * ns))


def content_terms(tokens: list[str], stopwords=STOPWORDS) -> set[str]:
    return {t for t in tokens if t not in stopwords}


def information_coverage(query_tokens: list[str], sent_tokens: list[str]) -> float:
    # all-stopword queries fall back to every query token
    needed = content_terms(query_tokens) or set(query_tokens)
    if not needed:
        return 0.0
    return len(needed & set(sent_tokens)) / len(needed)


def score_builtin(kind: ScorerKind | str, query: str, sentence_text: str, index: Index) -> float:
    kind = ScorerKind(kind)
    q_tokens = index.tokenize(query)
    if kind is ScorerKind.BM25_SENTENCE:
        return bm25_sentence_score(index, q_tokens, sentence_text)
    s_tokens = index.tokenize(sentence_text)
    if kind is ScorerKind.SENT_RELEVANCE:
        return overlap_f1(q_tokens, s_tokens)
    if kind is ScorerKind.STS:
        return 5.0 * tfidf_cosine(q_tokens, s_tokens, index)
    return 4.0 * information_coverage(q_tokens, s_tokens)


# -- score files ---------------------------------------------------------------


@dataclass
class ScoreTable:
    """Scores loaded from a TSV file, keyed by (query_id, doc_id, sent_index).

    Entries are read-only after loading; only the miss counters change.
    """

    entries: dict = field(default_factory=dict)
    miss_count: Counter = field(default_factory=Counter)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def lookup(self, query_id: str, doc_id: str, sent_index: int, kind: ScorerKind) -> float | None:
        row = self.entries.get((query_id, doc_id, sent_index))
        return None if row is None else row.get(ScorerKind(kind))

    def record_miss(self, kind: ScorerKind) -> None:
        with self._lock:
            self.miss_count[ScorerKind(kind).value] += 1

    def __len__(self) -> int:
        return len(self.entries)


def load_score_file(path) -> ScoreTable:
    table = ScoreTable()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise ScoreError(f"{path}:{lineno}: expected 5 tab-separated fields, got {len(parts)}")
            qid, doc_id, sent_index, name, raw = parts
            try:
                kind = ScorerKind(name)
            except ValueError:
                raise ScoreError(f"{path}:{lineno}: unknown scorer {name!r}") from None
            if kind not in FILE_SCORERS:
                raise ScoreError(f"{path}:{lineno}: scorer {name!r} is not accepted in score files")
            try:
                idx = int(sent_index)
                value = float(raw)
            except ValueError:
                raise ScoreError(f"{path}:{lineno}: malformed sent_index or score") from None
            if idx < 0 or not math.isfinite(value):
                raise ScoreError(f"{path}:{lineno}: malformed sent_index or score")
            if not _check_range(kind, value):
                lo, hi = kind.native_range
                raise ScoreError(f"{path}:{lineno}: {name} score {value} outside [{lo}, {hi}]")
            row = table.entries.setdefault((qid, doc_id, idx), {})
            if kind in row:
                raise ScoreError(f"{path}:{lineno}: duplicate {name} score for {(qid, doc_id, idx)}")
            row[kind] = value
    return table


def save_score_file(rows, path) -> None:
    """Write ``(query_id, doc_id, sent_index, scorer_name, score)`` rows."""
    with open(path, "w", encoding="utf-8") as fh:
        for qid, doc_id, idx, name, value in rows:
            fh.write(f"{qid}\t{doc_id}\t{idx}\t{ScorerKind(name).value}\t{value!r}\n")


FALLBACK_POLICIES = ("builtin", "zero", "error")


def resolve_scores(query_id: str, query: str, sentence: SentenceSpan, table: ScoreTable | None,
                   index: Index, fallback_policy: str = "builtin") -> PerspectiveScores:
    """Assemble all four perspective scores for one sentence.

    Table values win; a missing value is filled according to
    ``fallback_policy`` and counted in ``table.miss_count``. The sentence
    BM25 perspective is always computed from the index.
    """
    if fallback_policy not in FALLBACK_POLICIES:
        raise ValueError(f"fallback_policy must be one of {FALLBACK_POLICIES}")
    values = {}
    for kind in FILE_SCORERS:
        value = None
        if table is not None:
            value = table.lookup(query_id, sentence.doc_id, sentence.sent_index, kind)
        if value is None:
            if table is not None:
                table.record_miss(kind)
            if fallback_policy == "error":
                raise MissingScoreError(
                    f"no {kind.value} score for query={query_id} doc={sentence.doc_id} "
                    f"sent_index={sentence.sent_index}"
                )
            value = 0.0 if fallback_policy == "zero" else score_builtin(kind, query, sentence.text, index)
        values[kind] = value
    return PerspectiveScores(
        query_id,
        sentence.doc_id,
        sentence.sent_index,
        values[ScorerKind.SENT_RELEVANCE],
        values[ScorerKind.STS],
        values[ScorerKind.SIA],
        bm25_sentence_score(index, index.tokenize(query), sentence),
    )

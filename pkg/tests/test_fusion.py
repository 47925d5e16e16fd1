import dataclasses
import json

import numpy as np
import pytest

from mpsir.corpus import SentenceSpan
from mpsir.fusion import (
    BIOASQ_WEIGHTS,
    WEIGHT_KEYS,
    Weights,
    WeightsError,
    base_scores,
    doc_score,
    doc_scores,
    final_sentence_score,
    load_weights,
    prepare_candidates,
    rank_candidates,
    rank_for_query,
    save_weights,
    sentence_base_score,
)
from mpsir.fixture import default_weights_path
from mpsir.perspectives import PerspectiveScores


def ps(rel=0.0, sts=0.0, sia=0.0, doc="d", idx=0):
    return PerspectiveScores("q", doc, idx, rel, sts, sia, 0.0)


def W(*alpha, beta=(0.5, 0.5), w=(0.5, 0.5, 0.5), source="doc_score"):
    a = tuple(alpha) + (0.0,) * (4 - len(alpha))
    return Weights(*a, *beta, *w, alpha4_source=source)


class TestWeights:
    def test_bounds(self):
        with pytest.raises(WeightsError):
            Weights(alpha1=1.5)
        with pytest.raises(WeightsError):
            Weights(alpha4_source="other")

    def test_file_roundtrip(self, tmp_path):
        save_weights(BIOASQ_WEIGHTS, tmp_path / "w.json")
        assert load_weights(tmp_path / "w.json") == BIOASQ_WEIGHTS

    def test_file_keys_exact(self, tmp_path):
        p = tmp_path / "w.json"
        p.write_text(json.dumps({k: 0.5 for k in WEIGHT_KEYS}))
        with pytest.raises(WeightsError, match="alpha4_source"):
            load_weights(p)

    def test_shipped_defaults(self):
        assert load_weights(default_weights_path()) == BIOASQ_WEIGHTS
        assert BIOASQ_WEIGHTS.vector() == (0.6123, 0.2664, 0.0785, 0.9879, 0.0002, 0.8523, 0.9938, 0.0338, 0.0271)


class TestScalar:
    def test_one_hot(self):
        assert sentence_base_score(ps(rel=0.7, sts=3, sia=2), W(1)) == 0.7

    def test_zero_scores(self):
        assert sentence_base_score(ps(), BIOASQ_WEIGHTS) == 0.0

    def test_learned_alpha1(self):
        assert sentence_base_score(ps(rel=1.0), BIOASQ_WEIGHTS) == 0.6123

    def test_doc_bm25_only(self):
        assert doc_score(7.25, [0.1, 0.9], W(beta=(1, 0))) == 7.25

    def test_doc_max_selection(self):
        assert doc_score(3.0, [0.2, 0.9, 0.5], W(beta=(0, 1), w=(1, 0, 0))) == 0.9

    def test_doc_learned_weights(self):
        # 0.0002*10 + 0.8523*(0.9938*1.0 + 0.0338*0.5 + 0.0271*0.25)
        #   = 0.002 + 0.8523*1.017475 = 0.002 + 0.8671939425
        assert doc_score(10.0, [0.25, 1.0, 0.5], BIOASQ_WEIGHTS) == pytest.approx(0.8691939425, abs=1e-12)

    def test_doc_pads_short_documents(self):
        w = W(beta=(0, 1), w=(0.5, 0.3, 0.2))
        assert doc_score(0.0, [0.4], w) == pytest.approx(0.2)
        assert doc_score(0.0, [], w) == 0.0

    def test_final(self):
        assert final_sentence_score(0.5, 3.0, W(1)) == 0.5
        assert final_sentence_score(0.5, 1.0, BIOASQ_WEIGHTS) == pytest.approx(1.4879, abs=1e-12)

    def test_shared_doc_term(self):
        w = BIOASQ_WEIGHTS
        a, b = final_sentence_score(0.8, 2.0, w), final_sentence_score(0.3, 2.0, w)
        assert a - b == pytest.approx(0.5, abs=1e-12)


def make_fixture(rng, n_docs=3, per_doc=3, ties=False):
    """Random candidates; returns the inputs of rank_for_query."""
    docs = [(f"doc{i}", float(rng.uniform(1, 10))) for i in range(n_docs)]
    rng.shuffle(docs)
    sentences, scores = {}, {}
    for doc_id, _ in docs:
        spans = []
        for j in range(per_doc):
            spans.append(SentenceSpan(doc_id, j, "abstract", j * 10, j * 10 + 5, f"s{j} {doc_id}"))
            vals = rng.integers(0, 3, 3) / 2 if ties else rng.uniform(0, 1, 3)
            scores[(doc_id, j)] = ps(float(vals[0]), float(vals[1]) * 5, float(vals[2]) * 4, doc_id, j)
        sentences[doc_id] = spans
    return docs, sentences, scores


def brute_force_rank(docs, sentences, scores, w, k_docs, n_sents):
    base = {key: w.alpha1 * s.s_rel + w.alpha2 * s.s_sts + w.alpha3 * s.s_sia for key, s in scores.items()}
    sdoc = {}
    for doc_id, bm in docs:
        top = sorted((base[(doc_id, sp.sent_index)] for sp in sentences[doc_id]), reverse=True)[:3]
        top += [0.0] * (3 - len(top))
        sdoc[doc_id] = w.beta1 * bm + w.beta2 * (w.w1 * top[0] + w.w2 * top[1] + w.w3 * top[2])
    ranked_docs = sorted(sdoc, key=lambda d: (-sdoc[d], d))[:k_docs]
    bm25 = dict(docs)
    finals = []
    for d in ranked_docs:
        term = sdoc[d] if w.alpha4_source == "doc_score" else bm25[d]
        for sp in sentences[d]:
            finals.append((base[(d, sp.sent_index)] + w.alpha4 * term, d, sp.sent_index))
    finals.sort(key=lambda x: (-x[0], x[1], x[2]))
    return [(d, sdoc[d]) for d in ranked_docs], [(d, i, s) for s, d, i in finals[:n_sents]]


class TestRankForQuery:
    @pytest.mark.parametrize("seed", range(20))
    @pytest.mark.parametrize("source", ["doc_score", "doc_bm25"])
    def test_matches_brute_force(self, seed, source):
        rng = np.random.default_rng(seed)
        docs, sentences, scores = make_fixture(rng, n_docs=5, per_doc=int(rng.integers(1, 6)), ties=seed % 2 == 0)
        w = Weights(*rng.uniform(0, 1, 9), alpha4_source=source)
        k, n = int(rng.integers(1, 6)), int(rng.integers(1, 12))
        rd, rs = rank_for_query("q", docs, sentences, scores, w, k, n)
        exp_docs, exp_sents = brute_force_rank(docs, sentences, scores, w, k, n)
        assert rd.entries == tuple(exp_docs)
        assert [(e.doc_id, e.sent_index, e.score) for e in rs.entries] == exp_sents

    def test_single_candidate(self):
        rng = np.random.default_rng(1)
        docs, sentences, scores = make_fixture(rng, n_docs=1, per_doc=4)
        w = BIOASQ_WEIGHTS
        rd, rs = rank_for_query("q", docs, sentences, scores, w, 10, 10)
        assert rd.doc_ids == [docs[0][0]]
        by_base = sorted(scores, key=lambda k: (-sentence_base_score(scores[k], w), k[1]))
        assert [(e.doc_id, e.sent_index) for e in rs.entries] == by_base

    def test_large_alpha4_groups_by_document(self):
        # 3 docs x 3 sentences; doc scores far apart relative to base scores
        rng = np.random.default_rng(7)
        docs = [("a", 100.0), ("b", 50.0), ("c", 10.0)]
        sentences, scores = {}, {}
        for d, _ in docs:
            sentences[d] = [SentenceSpan(d, j, "abstract", 0, 1, "x") for j in range(3)]
            for j in range(3):
                scores[(d, j)] = ps(*rng.uniform(0, 1, 1), doc=d, idx=j)
        w = Weights(1, 0, 0, 1, 1, 0, 1, 0, 0)
        rd, rs = rank_for_query("q", docs, sentences, scores, w, 3, 9)
        assert rd.doc_ids == ["a", "b", "c"]
        assert [e.doc_id for e in rs.entries] == ["a"] * 3 + ["b"] * 3 + ["c"] * 3
        _, exp = brute_force_rank(docs, sentences, scores, w, 3, 9)
        assert [(e.doc_id, e.sent_index) for e in rs.entries] == [(d, i) for d, i, _ in exp]

    def test_sentences_only_from_top_docs(self):
        rng = np.random.default_rng(3)
        docs, sentences, scores = make_fixture(rng, n_docs=6, per_doc=3)
        rd, rs = rank_for_query("q", docs, sentences, scores, BIOASQ_WEIGHTS, 2, 10)
        assert {e.doc_id for e in rs.entries} <= set(rd.doc_ids)
        assert len(rs.entries) == 6

    def test_empty_pool(self):
        rd, rs = rank_for_query("q", [], {}, {}, BIOASQ_WEIGHTS)
        assert rd.entries == () and rs.entries == ()


class TestInvariants:
    def test_order_invariance(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            vals = list(rng.uniform(0, 1, int(rng.integers(0, 8))))
            w = Weights(*rng.uniform(0, 1, 9))
            perm = list(rng.permutation(vals))
            assert doc_score(2.0, vals, w) == doc_score(2.0, perm, w)

    def test_argmax_invariance(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            vals = sorted(rng.uniform(0, 1, 7), reverse=True)
            w = Weights(*rng.uniform(0, 1, 9))
            shrunk = vals[:3] + [v * rng.uniform(0, 1) for v in vals[3:]]
            assert doc_score(1.0, vals, w) == doc_score(1.0, shrunk, w)

    def test_vectorised_matches_scalar(self):
        rng = np.random.default_rng(13)
        docs, sentences, scores = make_fixture(rng, n_docs=4, per_doc=5)
        cands = prepare_candidates("q", docs, sentences, scores)
        w = Weights(*rng.uniform(0, 1, 9))
        base = base_scores(cands, w)
        for i, sp in enumerate(cands.spans):
            assert base[i] == sentence_base_score(scores[(sp.doc_id, sp.sent_index)], w)
        sdoc = doc_scores(cands, base, w)
        for di, (d, bm) in enumerate(docs):
            doc_base = [base[i] for i in range(cands.n_sents) if cands.sent_doc[i] == di]
            assert sdoc[di] == doc_score(bm, doc_base, w)

    def test_duplicate_candidates_rejected(self):
        with pytest.raises(ValueError):
            prepare_candidates("q", [("a", 1.0), ("a", 2.0)], {}, {})


def test_candidate_set_is_reusable():
    rng = np.random.default_rng(5)
    docs, sentences, scores = make_fixture(rng, n_docs=4, per_doc=3)
    cands = prepare_candidates("q", docs, sentences, scores)
    first = rank_candidates(cands, BIOASQ_WEIGHTS)
    rank_candidates(cands, Weights.uniform(0.1))
    assert rank_candidates(cands, BIOASQ_WEIGHTS) == first
    assert dataclasses.is_dataclass(first[0])

"""Deterministic synthetic mini-collection for tests and demos.

Builds 20 queries over 200 pseudo-biomedical documents. Each query owns a
handful of topic terms; four gold documents per query carry two answer
sentences each (the gold snippets), four distractor documents reuse the
topic terms without answering, and the rest is background. Perspective
scores are synthesised so that sentence relevance tracks the gold
snippets closely, STS loosely and SIA barely.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .bm25 import build_index, retrieve_topk
from .corpus import Document, normalize_text, segment_sentences
from .perspectives import save_score_file

N_QUERIES = 20
N_DOCS = 200
GOLD_PER_QUERY = 4
DISTRACTORS_PER_QUERY = 4
POOL_SIZE = 100
URL = "http://www.ncbi.nlm.nih.gov/pubmed/{doc_id}"

_ONSETS = ["b", "c", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "ch", "st", "tr", "pl", "gr"]
_VOWELS = ["a", "e", "i", "o", "u", "y", "ae", "io"]
_CODAS = ["", "n", "r", "s", "l", "x", "m", "t"]
_FUNCTION = ["the", "of", "in", "and", "with", "was", "were", "for", "to", "by", "on", "a", "is"]
_FRAMES = [
    "{t0} {v} {t1} in patients with {t2}.",
    "{T0} {v} the {n} of {t1}, which {v2} {t2} ({a} {n2}).",
    "We show that {t0} {v} {t1} and {v2} {t2} in vivo.",
    "These data indicate that {t0} is required for {t1} {n} via {t2}.",
]
_ABBREV = ["e.g.", "i.e.", "vs.", "approx."]


def _word(rng: np.random.Generator, syllables: int) -> str:
    return "".join(
        _ONSETS[rng.integers(len(_ONSETS))] + _VOWELS[rng.integers(len(_VOWELS))] + _CODAS[rng.integers(len(_CODAS))]
        for _ in range(syllables)
    )


def _vocab(rng: np.random.Generator, n: int, syllables: int, exclude: set[str]) -> list[str]:
    out: list[str] = []
    seen = set(exclude)
    while len(out) < n:
        w = _word(rng, syllables)
        if w not in seen and len(w) > 3:
            seen.add(w)
            out.append(w)
    return out


class _Writer:
    def __init__(self, rng: np.random.Generator, filler: list[str], verbs: list[str]):
        self.rng = rng
        self.filler = filler
        self.verbs = verbs

    def pick(self, seq):
        return seq[self.rng.integers(len(seq))]

    def filler_sentence(self, extra: list[str] = ()) -> str:
        n = int(self.rng.integers(8, 15))
        words = [self.pick(self.filler) if self.rng.random() < 0.7 else self.pick(_FUNCTION) for _ in range(n)]
        for term in extra:
            words.insert(int(self.rng.integers(1, len(words))), term)
        if self.rng.random() < 0.15:
            words.insert(int(self.rng.integers(2, len(words))), f"({self.pick(_ABBREV)} {self.pick(self.filler)})")
        if self.rng.random() < 0.15:
            words.insert(int(self.rng.integers(2, len(words))), f"{self.rng.integers(1, 9)}.{self.rng.integers(0, 9)} mg")
        return words[0].capitalize() + " " + " ".join(words[1:]) + "."

    def answer_sentence(self, topic: list[str]) -> str:
        t = [topic[i] for i in self.rng.permutation(len(topic))[:3]]
        frame = self.pick(_FRAMES)
        s = frame.format(
            t0=t[0], T0=t[0].capitalize(), t1=t[1], t2=t[2],
            v=self.pick(self.verbs), v2=self.pick(self.verbs),
            n=self.pick(self.filler), n2=self.pick(self.filler), a=self.pick(_ABBREV),
        )
        return s[0].upper() + s[1:]

    def title(self, terms: list[str]) -> str:
        words = [self.pick(self.filler) for _ in range(int(self.rng.integers(4, 7)))]
        for term in terms:
            words.insert(int(self.rng.integers(0, len(words) + 1)), term)
        return words[0].capitalize() + " " + " ".join(words[1:])


@dataclass
class MiniFixture:
    docs: list[Document]
    queries: list[dict]  # BioASQ question dicts with id and body
    gold: list[dict]  # BioASQ question dicts with documents and snippets
    score_rows: list[tuple]


def generate(seed: int = 20200101) -> MiniFixture:
    rng = np.random.default_rng(seed)
    topics = [_vocab(rng, 4, 3, set()) for _ in range(N_QUERIES)]
    used = {w for t in topics for w in t}
    filler = _vocab(rng, 400, 2, used)
    verbs = ["regulates", "inhibits", "activates", "improves", "reduces", "modulates", "induces", "binds"]
    writer = _Writer(rng, filler, verbs)

    # document ids look like PubMed ids and are shuffled across roles
    ids = [str(i) for i in rng.choice(np.arange(10_000_000, 30_000_000), size=N_DOCS, replace=False)]
    slots = iter(rng.permutation(N_DOCS))

    docs: dict[str, Document] = {}
    answers: dict[str, list[str]] = {}  # doc_id -> answer sentences
    gold_docs: list[list[str]] = []
    for topic in topics:
        golds = []
        for _ in range(GOLD_PER_QUERY):
            doc_id = ids[next(slots)]
            sents = [writer.filler_sentence() for _ in range(int(rng.integers(3, 6)))]
            ans = [writer.answer_sentence(topic) for _ in range(2)]
            for a in ans:
                sents.insert(int(rng.integers(0, len(sents) + 1)), a)
            docs[doc_id] = Document(doc_id, writer.title(topic[:2]), " ".join(sents))
            answers[doc_id] = ans
            golds.append(doc_id)
        gold_docs.append(golds)
        for _ in range(DISTRACTORS_PER_QUERY):
            doc_id = ids[next(slots)]
            sents = [
                writer.filler_sentence([topic[int(rng.integers(4))] for _ in range(int(rng.integers(1, 3)))])
                for _ in range(int(rng.integers(4, 8)))
            ]
            docs[doc_id] = Document(doc_id, writer.title([topic[int(rng.integers(4))]]), " ".join(sents))
    for slot in slots:
        doc_id = ids[slot]
        extra = [[topics[int(rng.integers(N_QUERIES))][int(rng.integers(4))]] if rng.random() < 0.3 else []
                 for _ in range(int(rng.integers(4, 8)))]
        docs[doc_id] = Document(doc_id, writer.title([]), " ".join(writer.filler_sentence(e) for e in extra))
    corpus = [docs[i] for i in sorted(docs, key=int)]

    queries, gold = [], []
    for qi, topic in enumerate(topics):
        qid = f"q{qi + 1:02d}"
        body = f"What is the role of {topic[0]} in {topic[1]} {topic[2]} and {topic[3]}?"
        queries.append({"id": qid, "body": body})
        snippets = []
        for doc_id in gold_docs[qi]:
            for span in segment_sentences(docs[doc_id]):
                if span.section == "abstract" and span.text in answers[doc_id]:
                    snippets.append({
                        "document": URL.format(doc_id=doc_id),
                        "text": span.text,
                        "offsetInBeginSection": span.begin_offset,
                        "offsetInEndSection": span.end_offset,
                        "beginSection": "abstract",
                        "endSection": "abstract",
                    })
        gold.append({
            "id": qid,
            "body": body,
            "documents": [URL.format(doc_id=d) for d in gold_docs[qi]],
            "snippets": snippets[:10],
        })

    index = build_index(corpus)
    score_rows = []
    for q, g in zip(queries, gold):
        gold_keys = {(s["document"].rsplit("/", 1)[-1], normalize_text(s["text"])) for s in g["snippets"]}
        gold_set = {u.rsplit("/", 1)[-1] for u in g["documents"]}
        for doc_id, _ in retrieve_topk(index, q["body"], POOL_SIZE):
            for span in segment_sentences(docs[doc_id]):
                is_gold = float((doc_id, normalize_text(span.text)) in gold_keys)
                in_gold_doc = float(doc_id in gold_set)
                rel = 0.1 + 0.55 * is_gold + 0.1 * in_gold_doc + rng.normal(0, 0.12)
                sts = 1.5 + 1.0 * is_gold + rng.normal(0, 1.0)
                sia = 2.0 + 0.3 * is_gold + rng.normal(0, 1.0)
                for name, value, hi in (("sent_relevance", rel, 1.0), ("sts", sts, 5.0), ("sia", sia, 4.0)):
                    score_rows.append((q["id"], doc_id, span.sent_index, name, round(float(np.clip(value, 0.0, hi)), 6)))
    return MiniFixture(corpus, queries, gold, score_rows)


FILES = ("corpus.jsonl", "queries.json", "gold.json", "scores.tsv")


def write(fixture: MiniFixture, directory) -> dict[str, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "corpus.jsonl", "w", encoding="utf-8") as fh:
        for d in fixture.docs:
            fh.write(json.dumps({"doc_id": d.doc_id, "title": d.title, "abstract": d.abstract}) + "\n")
    with open(directory / "queries.json", "w", encoding="utf-8") as fh:
        json.dump({"questions": fixture.queries}, fh, indent=1)
    with open(directory / "gold.json", "w", encoding="utf-8") as fh:
        json.dump({"questions": fixture.gold}, fh, indent=1)
    save_score_file(fixture.score_rows, directory / "scores.tsv")
    return {name: directory / name for name in FILES}


def mini_fixture_dir() -> Path:
    """Directory of the shipped copy of :func:`generate`'s output."""
    return Path(str(resources.files("mpsir") / "data" / "mini"))


def default_weights_path() -> Path:
    return Path(str(resources.files("mpsir") / "data" / "default_weights.json"))


if __name__ == "__main__":
    import sys

    out = write(generate(), sys.argv[1] if len(sys.argv) > 1 else mini_fixture_dir())
    print("\n".join(str(p) for p in out.values()))

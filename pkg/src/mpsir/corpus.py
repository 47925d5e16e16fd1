"""Documents, queries, gold judgments and sentence segmentation."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable
from urllib.parse import urlparse


class CorpusError(ValueError):
    """Raised for malformed corpus, query or gold input."""


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    abstract: str

    def __post_init__(self):
        if not self.doc_id:
            raise CorpusError("doc_id must be non-empty")
        if not (self.title.strip() or self.abstract.strip()):
            raise CorpusError(f"document {self.doc_id!r} has empty title and abstract")

    @property
    def text(self) -> str:
        """Text that gets indexed: title and abstract joined by a space."""
        return f"{self.title} {self.abstract}"

    def section(self, name: str) -> str:
        if name == "title":
            return self.title
        if name == "abstract":
            return self.abstract
        raise CorpusError(f"unknown section {name!r}")


@dataclass(frozen=True)
class SentenceSpan:
    """One sentence of a document.

    Offsets are character offsets into the section text, half-open.
    """

    doc_id: str
    sent_index: int
    section: str
    begin_offset: int
    end_offset: int
    text: str


@dataclass(frozen=True)
class Query:
    query_id: str
    body: str

    def __post_init__(self):
        if not self.query_id or not self.body:
            raise CorpusError("query id and body must be non-empty")


@dataclass(frozen=True)
class GoldJudgments:
    query_id: str
    gold_docs: frozenset = field(default_factory=frozenset)
    # (doc_id, normalized sentence text)
    gold_sentences: frozenset = field(default_factory=frozenset)


def normalize_text(text: str) -> str:
    """Whitespace-collapsed lowercase form used to match snippets to gold."""
    return " ".join(text.split()).lower()


def load_corpus(path) -> list[Document]:
    docs: list[Document] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                doc = Document(str(obj["doc_id"]), obj["title"], obj["abstract"])
            except (json.JSONDecodeError, KeyError, TypeError, AttributeError, CorpusError) as exc:
                raise CorpusError(f"{path}:{lineno}: malformed corpus record ({exc})") from exc
            if doc.doc_id in seen:
                raise CorpusError(f"{path}:{lineno}: duplicate doc_id {doc.doc_id!r}")
            seen.add(doc.doc_id)
            docs.append(doc)
    return docs


def save_corpus(docs: Iterable[Document], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for d in docs:
            fh.write(json.dumps({"doc_id": d.doc_id, "title": d.title, "abstract": d.abstract}) + "\n")


# Lowercased tokens ending in "." after which a sentence never ends.
ABBREVIATIONS = frozenset(
    """
    e.g. i.e. al. et.al. fig. figs. vs. cf. ca. approx. etc. resp. ref. refs. eq. eqs.
    no. nos. vol. pp. p. ed. eds. dr. mr. mrs. ms. prof. st. jr. sr. inc. ltd. co.
    i.v. i.p. i.m. s.c. p.o. b.i.d. t.i.d. q.d. u.s. u.k. sp. spp. var. subsp. min. max.
    approx. est. dept. univ. jan. feb. mar. apr. jun. jul. aug. sep. sept. oct. nov. dec.
    """.split()
)

# terminator run, optional closing punctuation, then whitespace+uppercase or end of text
_BOUNDARY = re.compile(r"[.!?]+[\"')\]]*(?=\s+[A-Z]|\s*$)")


def _split_section(text: str) -> list[tuple[int, int]]:
    spans: list[tuple[int, int]] = []
    start = 0
    for m in _BOUNDARY.finditer(text):
        end = m.end()
        if text[m.start()] == "." and m.group().rstrip("\"')]") == ".":
            word = text[start : m.start() + 1].split()[-1].lower().lstrip("(\"'[")
            if word in ABBREVIATIONS:
                continue
        spans.append((start, end))
        start = end
    if start < len(text):
        spans.append((start, len(text)))
    out = []
    for b, e in spans:
        chunk = text[b:e]
        if not chunk.strip():
            continue
        lead = len(chunk) - len(chunk.lstrip())
        trail = len(chunk) - len(chunk.rstrip())
        out.append((b + lead, e - trail))
    return out


def segment_sentences(doc: Document) -> list[SentenceSpan]:
    """Split a document into its title span followed by abstract sentences."""
    spans: list[SentenceSpan] = []
    if doc.title.strip():
        lead = len(doc.title) - len(doc.title.lstrip())
        end = len(doc.title.rstrip())
        spans.append(SentenceSpan(doc.doc_id, 0, "title", lead, end, doc.title[lead:end]))
    for b, e in _split_section(doc.abstract):
        spans.append(SentenceSpan(doc.doc_id, len(spans), "abstract", b, e, doc.abstract[b:e]))
    return spans


def _read_questions(path) -> list[dict]:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict) or not isinstance(data.get("questions"), list):
        raise CorpusError(f"{path}: expected an object with a 'questions' list")
    return data["questions"]


def load_queries(path) -> list[Query]:
    queries = []
    for i, q in enumerate(_read_questions(path)):
        if not isinstance(q, dict) or not q.get("id") or not q.get("body"):
            raise CorpusError(f"{path}: question #{i} lacks an id or body")
        queries.append(Query(str(q["id"]), q["body"]))
    return queries


def doc_id_from_url(url: str) -> str:
    """Trailing path segment of a PubMed-style URL."""
    if not isinstance(url, str):
        raise CorpusError(f"unparseable document URL {url!r}")
    segment = urlparse(url).path.rstrip("/").rsplit("/", 1)[-1]
    if not segment:
        raise CorpusError(f"unparseable document URL {url!r}")
    return segment


def load_gold(path) -> list[GoldJudgments]:
    gold = []
    for i, q in enumerate(_read_questions(path)):
        if not isinstance(q, dict) or not q.get("id"):
            raise CorpusError(f"{path}: question #{i} lacks an id")
        docs = frozenset(doc_id_from_url(u) for u in q.get("documents", []))
        sents = set()
        for snip in q.get("snippets", []):
            try:
                sents.add((doc_id_from_url(snip["document"]), normalize_text(snip["text"])))
            except (KeyError, TypeError) as exc:
                raise CorpusError(f"{path}: malformed snippet in question {q['id']!r}") from exc
        gold.append(GoldJudgments(str(q["id"]), docs, frozenset(sents)))
    return gold

"""BioASQ Phase A submission files: building, validation and key extraction."""

from __future__ import annotations

import json
from typing import Mapping, Sequence

import jsonschema

from .corpus import doc_id_from_url, normalize_text
from .fusion import RankedDocList, RankedSentList
from .metrics import dedupe

DEFAULT_URL_TEMPLATE = "http://www.ncbi.nlm.nih.gov/pubmed/{doc_id}"
MAX_ITEMS = 10

SNIPPET_SCHEMA = {
    "type": "object",
    "required": ["document", "text", "beginSection", "endSection", "offsetInBeginSection", "offsetInEndSection"],
    "properties": {
        "document": {"type": "string", "minLength": 1},
        "text": {"type": "string", "minLength": 1},
        "beginSection": {"type": "string", "enum": ["title", "abstract"]},
        "endSection": {"type": "string", "enum": ["title", "abstract"]},
        "offsetInBeginSection": {"type": "integer", "minimum": 0},
        "offsetInEndSection": {"type": "integer", "minimum": 1},
    },
}

SUBMISSION_SCHEMA = {
    "type": "object",
    "required": ["questions"],
    "properties": {
        "questions": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "documents", "snippets"],
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "documents": {"type": "array", "maxItems": MAX_ITEMS, "items": {"type": "string", "minLength": 1}},
                    "snippets": {"type": "array", "maxItems": MAX_ITEMS, "items": SNIPPET_SCHEMA},
                },
            },
        }
    },
}


def question_entry(docs: RankedDocList, sents: RankedSentList,
                   url_template: str = DEFAULT_URL_TEMPLATE) -> dict:
    snippets = []
    for s in sents.entries:
        span = s.span
        snippets.append({
            "document": url_template.format(doc_id=s.doc_id),
            "text": span.text,
            "beginSection": span.section,
            "endSection": span.section,
            "offsetInBeginSection": span.begin_offset,
            "offsetInEndSection": span.end_offset,
        })
    return {
        "id": docs.query_id,
        "documents": [url_template.format(doc_id=d) for d in docs.doc_ids],
        "snippets": snippets,
    }


def validate(submission: Mapping) -> None:
    """Raise ``jsonschema.ValidationError`` if the submission is malformed."""
    jsonschema.validate(submission, SUBMISSION_SCHEMA)


def write_submission(questions: Sequence[dict], path) -> dict:
    submission = {"questions": list(questions)}
    validate(submission)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(submission, fh, indent=2)
        fh.write("\n")
    return submission


def read_submission(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        submission = json.load(fh)
    validate(submission)
    return submission


def document_keys(question: Mapping) -> list[str]:
    return dedupe(doc_id_from_url(u) for u in question.get("documents", []))


def snippet_keys(question: Mapping) -> list[tuple[str, str]]:
    return dedupe((doc_id_from_url(s["document"]), normalize_text(s["text"])) for s in question.get("snippets", []))

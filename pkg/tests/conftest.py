import pytest

from mpsir.bm25 import build_index
from mpsir.corpus import Document, load_corpus, load_gold, load_queries
from mpsir.fixture import mini_fixture_dir
from mpsir.perspectives import load_score_file
from mpsir.tuner import build_dataset

# Five hand-countable documents; tests that need exact BM25 values recount
# tf and lengths by hand rather than reusing the tokenizer.
HAND_DOCS = [
    Document("d1", "TRH improves", "cardiac contractility."),
    Document("d2", "TRH", "TRH analog binds receptor."),
    Document("d3", "Cardiac output", "in heart failure."),
    Document("d4", "", "Receptor binding assay."),
    Document("d5", "TRH cardiac", "cardiac effects."),
]


@pytest.fixture(scope="session")
def hand_docs():
    return HAND_DOCS


@pytest.fixture(scope="session")
def hand_index():
    return build_index(HAND_DOCS)


@pytest.fixture(scope="session")
def mini_paths():
    d = mini_fixture_dir()
    return {
        "corpus": d / "corpus.jsonl",
        "queries": d / "queries.json",
        "gold": d / "gold.json",
        "scores": d / "scores.tsv",
    }


@pytest.fixture(scope="session")
def mini(mini_paths):
    corpus = load_corpus(mini_paths["corpus"])
    index = build_index(corpus)
    queries = load_queries(mini_paths["queries"])
    gold = load_gold(mini_paths["gold"])
    table = load_score_file(mini_paths["scores"])
    dataset = build_dataset(queries, gold, corpus, index, table)
    return {"corpus": corpus, "index": index, "queries": queries, "gold": gold, "table": table,
            "dataset": dataset}


_acceptance = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    criterion = item.get_closest_marker("criterion")
    if criterion is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _acceptance.append((criterion.args[0], criterion.args[1], report.outcome))


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    by_number = {}
    for number, title, outcome in _acceptance:
        prev = by_number.get(number, (title, True))
        by_number[number] = (prev[0], prev[1] and outcome == "passed")
    terminalreporter.section("acceptance criteria")
    for number, (title, ok) in sorted(by_number.items()):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}")

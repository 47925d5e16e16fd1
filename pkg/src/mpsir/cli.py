"""Command line entry point: ``mpsir {index,run,tune,eval,report}``.

Settings come from built-in defaults, then an optional JSON ``--config``
file, then command-line flags (flags win). Exit status is 0 on success, 1
for usage or configuration errors and 2 for data errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import random
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import jsonschema

from . import bm25, corpus as corpus_mod, fusion, metrics, perspectives, submission, tuner
from .bayesopt import Trial
from .fixture import default_weights_path

log = logging.getLogger("mpsir")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    corpus: str | None = None
    index: str | None = None
    queries: str | None = None
    gold: str | None = None
    scores: str | None = None
    weights: str | None = None
    pool_size: int = 100
    k_docs: int = 10
    n_sents: int = 10
    fallback_policy: str = "builtin"
    cutoff: int = metrics.DEFAULT_CUTOFF
    epsilon: float = metrics.DEFAULT_EPSILON
    base_url: str = submission.DEFAULT_URL_TEMPLATE
    bioasq_mode: bool = True
    threads: int = 1

    def validate(self) -> "RunConfig":
        limit = submission.MAX_ITEMS if self.bioasq_mode else float("inf")
        if not 1 <= self.k_docs <= limit:
            raise UsageError(f"k_docs must be in [1, {limit}]")
        if not 1 <= self.n_sents <= limit:
            raise UsageError(f"n_sents must be in [1, {limit}]")
        if self.pool_size < self.k_docs:
            raise UsageError("pool_size must be >= k_docs")
        if self.fallback_policy not in perspectives.FALLBACK_POLICIES:
            raise UsageError(f"fallback_policy must be one of {perspectives.FALLBACK_POLICIES}")
        if "{doc_id}" not in self.base_url:
            raise UsageError("base_url must contain '{doc_id}'")
        if self.threads < 1:
            raise UsageError("threads must be >= 1")
        return self

    def require(self, *names: str) -> None:
        missing = [n for n in names if not getattr(self, n)]
        if missing:
            raise UsageError(f"missing required setting(s): {', '.join('--' + n.replace('_', '-') for n in missing)}")


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                values = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        known = {f.name for f in fields(RunConfig)}
        unknown = set(values) - known - set(TUNE_KEYS)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        values = {k: v for k, v in values.items() if k in known}
    for f in fields(RunConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = flag
    return RunConfig(**values).validate()


# -- shared loaders -------------------------------------------------------------


def _load_index(cfg: RunConfig, docs) -> bm25.Index:
    if cfg.index and Path(cfg.index).exists():
        index = bm25.load_index(cfg.index)
        if set(index.doc_lengths) != {d.doc_id for d in docs}:
            raise corpus_mod.CorpusError(f"index {cfg.index} does not match corpus {cfg.corpus}")
        return index
    return bm25.build_index(docs)


def _load_table(cfg: RunConfig) -> perspectives.ScoreTable:
    return perspectives.load_score_file(cfg.scores) if cfg.scores else perspectives.ScoreTable()


def _load_weights(cfg: RunConfig) -> fusion.Weights:
    return fusion.load_weights(cfg.weights or default_weights_path())


def _log_misses(table: perspectives.ScoreTable, policy: str) -> None:
    counts = {k.value: table.miss_count.get(k.value, 0) for k in perspectives.FILE_SCORERS}
    print(f"score misses (fallback={policy}): " + ", ".join(f"{k}={v}" for k, v in counts.items()))


# -- subcommands ------------------------------------------------------------------


def cmd_index(args) -> int:
    cfg = resolve_config(args)
    cfg.require("corpus", "index")
    docs = corpus_mod.load_corpus(cfg.corpus)
    analyzer = bm25.AnalyzerConfig(stopword_removal=bool(args.stopwords))
    index = bm25.build_index(docs, analyzer)
    bm25.save_index(index, cfg.index)
    print(f"N={index.N} avgdl={index.avgdl:.6f} vocabulary={index.vocabulary_size}")
    return EXIT_OK


def run_queries(cfg: RunConfig, docs, index, queries, table, weights) -> list[dict]:
    by_id = {d.doc_id: d for d in docs}

    def one(q: corpus_mod.Query) -> dict:
        try:
            ds = tuner.build_dataset([q], [corpus_mod.GoldJudgments(q.query_id)], by_id, index, table,
                                     cfg.pool_size, cfg.k_docs, cfg.n_sents, cfg.fallback_policy)
            ranked_docs, ranked_sents = fusion.rank_candidates(ds.candidates[0], weights, cfg.k_docs, cfg.n_sents)
        except Exception as exc:
            raise RuntimeError(f"query {q.query_id}: {exc}") from exc
        return submission.question_entry(ranked_docs, ranked_sents, cfg.base_url)

    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        return list(pool.map(one, queries))


def cmd_run(args) -> int:
    cfg = resolve_config(args)
    cfg.require("corpus", "queries")
    if not args.output:
        raise UsageError("missing --output")
    docs = corpus_mod.load_corpus(cfg.corpus)
    index = _load_index(cfg, docs)
    queries = corpus_mod.load_queries(cfg.queries)
    table = _load_table(cfg)
    weights = _load_weights(cfg)
    questions = run_queries(cfg, docs, index, queries, table, weights)
    submission.write_submission(questions, args.output)
    _log_misses(table, cfg.fallback_policy)
    print(f"wrote {len(questions)} questions to {args.output}")
    return EXIT_OK


TUNE_KEYS = ("seed", "phases", "trials_per_phase", "init_random_trials", "objective", "train_fraction")


def split_queries(queries, train_fraction: float, seed: int):
    if not 0 < train_fraction <= 1:
        raise UsageError("train_fraction must be in (0, 1]")
    if train_fraction == 1:
        return list(queries), []
    order = list(queries)
    random.Random(seed).shuffle(order)
    n_train = max(1, round(train_fraction * len(order)))
    return order[:n_train], order[n_train:]


def cmd_tune(args) -> int:
    cfg = resolve_config(args)
    cfg.require("corpus", "queries", "gold")
    if not args.output_weights:
        raise UsageError("missing --output-weights")
    file_cfg = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            file_cfg = {k: v for k, v in json.load(fh).items() if k in TUNE_KEYS}
    opts = {k: getattr(args, k) if getattr(args, k) is not None else file_cfg.get(k) for k in TUNE_KEYS}
    try:
        tcfg = tuner.TunerConfig(
            objective_kind=opts["objective"] or "sent_map",
            phases=8 if opts["phases"] is None else opts["phases"],
            trials_per_phase=opts["trials_per_phase"] or 50,
            init_random_trials=opts["init_random_trials"] or 10,
            rng_seed=0 if opts["seed"] is None else opts["seed"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    docs = corpus_mod.load_corpus(cfg.corpus)
    index = _load_index(cfg, docs)
    queries = corpus_mod.load_queries(cfg.queries)
    gold = corpus_mod.load_gold(cfg.gold)
    table = _load_table(cfg)
    train, valid = split_queries(queries, opts["train_fraction"] or 0.8, tcfg.rng_seed)
    ds = tuner.build_dataset(queries, gold, docs, index, table, cfg.pool_size, cfg.k_docs, cfg.n_sents,
                             cfg.fallback_policy, cfg.cutoff)
    train_ds = ds.subset([q.query_id for q in train])
    weights, trace = tuner.alternating_optimize(train_ds, tcfg)

    fusion.save_weights(weights, args.output_weights)
    out = Path(args.output_weights)
    trace_path = Path(args.trace) if args.trace else out.with_name(out.stem + ".trace.jsonl")
    tuner.write_trace(trace, trace_path)
    init = tuner.initial_weights(tcfg)
    summary = {
        "objective_kind": tcfg.objective_kind,
        "seed": tcfg.rng_seed,
        "train_queries": [q.query_id for q in train],
        "validation_queries": [q.query_id for q in valid],
        "phase_best": [{"phase": p, "best_objective": v} for p, v in tuner.best_so_far(trace)],
        "train": {
            "initial": tuner.evaluate_objective(init, train_ds, tcfg.objective_kind),
            "tuned": tuner.evaluate_objective(weights, train_ds, tcfg.objective_kind),
        },
    }
    if valid:
        valid_ds = ds.subset([q.query_id for q in valid])
        summary["validation"] = {
            "initial": tuner.evaluate_objective(init, valid_ds, tcfg.objective_kind),
            "tuned": tuner.evaluate_objective(weights, valid_ds, tcfg.objective_kind),
        }
    summary_path = out.with_name(out.stem + ".summary.json")
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    for p in summary["phase_best"]:
        print(f"phase {p['phase']}: best {tcfg.objective_kind} {p['best_objective']:.6f}")
    _log_misses(table, cfg.fallback_policy)
    print(f"wrote {out}, {trace_path}, {summary_path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = resolve_config(args)
    cfg.require("gold")
    if not args.submission or not args.output_dir:
        raise UsageError("eval needs --submission and --output-dir")
    run = submission.read_submission(args.submission)
    gold = {g.query_id: g for g in corpus_mod.load_gold(cfg.gold)}
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc_run = {q["id"]: submission.document_keys(q) for q in run["questions"]}
    snip_run = {q["id"]: submission.snippet_keys(q) for q in run["questions"]}
    reports = {
        "documents": metrics.evaluate_run(doc_run, {q: g.gold_docs for q, g in gold.items()}, cfg.cutoff, cfg.epsilon),
        "snippets": metrics.evaluate_run(snip_run, {q: g.gold_sentences for q, g in gold.items()}, cfg.cutoff,
                                         cfg.epsilon),
    }
    for name, rep in reports.items():
        rep.write_json(out / f"{name}.json")
        rep.write_csv(out / f"{name}.csv")
        a = rep.aggregate
        print(f"{name}: MPrec={a.mprec:.4f} MRec={a.mrec:.4f} F={a.f_measure:.4f} MAP={a.map:.4f} GMAP={a.gmap:.4f}")
    return EXIT_OK


def write_curve(trace, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "phase_index", "trial_index", "objective", "best_so_far"])
        best = float("-inf")
        for step, t in enumerate(trace):
            best = max(best, t.objective)
            writer.writerow([step, t.phase_index, t.trial_index, t.objective, best])


def cmd_report(args) -> int:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    trace: list[Trial] = tuner.read_trace(args.trace) if args.trace else []
    write_curve(trace, out / "objective_curve.csv")
    with open(out / "phase_best.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["phase_index", "best_objective"])
        writer.writerows(tuner.best_so_far(trace))
    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["task", "MPrec", "MRec", "F-Measure", "MAP", "GMAP"])
        for name in ("documents", "snippets"):
            path = Path(args.eval_dir) / f"{name}.json" if args.eval_dir else None
            if path is None or not path.exists():
                continue
            with open(path, encoding="utf-8") as rf:
                a = json.load(rf)["aggregate"]
            writer.writerow([name, a["mprec"], a["mrec"], a["f_measure"], a["map"], a["gmap"]])
    print(f"wrote {out / 'summary.csv'}, {out / 'objective_curve.csv'}, {out / 'phase_best.csv'}")
    return EXIT_OK


# -- argument parsing -----------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file of settings; flags override it")
    p.add_argument("--corpus")
    p.add_argument("--index")
    p.add_argument("--queries")
    p.add_argument("--gold")
    p.add_argument("--scores", help="TSV of precomputed perspective scores")
    p.add_argument("--weights", help="fusion weights JSON (default: shipped BioASQ values)")
    p.add_argument("--pool-size", dest="pool_size", type=int)
    p.add_argument("--k-docs", dest="k_docs", type=int)
    p.add_argument("--n-sents", dest="n_sents", type=int)
    p.add_argument("--fallback-policy", dest="fallback_policy", choices=perspectives.FALLBACK_POLICIES)
    p.add_argument("--cutoff", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--base-url", dest="base_url")
    p.add_argument("--threads", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mpsir", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("index", help="build and save the BM25 index")
    _add_common(p)
    p.add_argument("--stopwords", action="store_true", help="drop English stopwords")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("run", help="retrieve, rerank and write a BioASQ submission")
    _add_common(p)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("tune", help="alternating optimisation of the fusion weights")
    _add_common(p)
    p.add_argument("--output-weights", dest="output_weights")
    p.add_argument("--trace")
    p.add_argument("--seed", type=int)
    p.add_argument("--phases", type=int)
    p.add_argument("--trials-per-phase", dest="trials_per_phase", type=int)
    p.add_argument("--init-random-trials", dest="init_random_trials", type=int)
    p.add_argument("--objective", choices=tuner.OBJECTIVE_KINDS)
    p.add_argument("--train-fraction", dest="train_fraction", type=float)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("eval", help="score a submission against gold")
    _add_common(p)
    p.add_argument("--submission")
    p.add_argument("--output-dir", dest="output_dir")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="summary table and objective curve CSVs")
    p.add_argument("--eval-dir", dest="eval_dir")
    p.add_argument("--trace")
    p.add_argument("--output-dir", dest="output_dir", required=True)
    p.set_defaults(func=cmd_report)
    return parser


DATA_ERRORS = (
    OSError,
    json.JSONDecodeError,
    corpus_mod.CorpusError,
    perspectives.ScoreError,
    fusion.WeightsError,
    metrics.EvaluationError,
    jsonschema.ValidationError,
    KeyError,
    ValueError,
    RuntimeError,
)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"mpsir {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DATA_ERRORS as exc:
        print(f"mpsir {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point: learn, infer, route, replay, validate.

Primary outputs are JSON written to ``--out`` or stdout.  Each command
also writes a run manifest (to ``--manifest``, else next to ``--out``,
else to stderr).  Exit codes: 0 ok, 1 usage, 2 data/validation error,
3 computation error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from pathlib import Path

from . import __version__
from .errors import ComputationError, DataError, SafeRouteError
from .estimator import K2BayesianNetwork
from .inference import collision_probability, evidence_from_labels
from .ingest import (
    ImputationPolicy,
    load_graph,
    parse_dataset,
    parse_snapshots,
    read_table,
    schema_from_json,
    snapshot_evidence,
    train_test_split,
)
from .learn import k2_log_score, count_stats
from .network import BayesianNetwork, case_study_schema
from .routing import assign_safety, safest_route, score_to_json

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_COMPUTE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _read_json(path, what):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"{what} file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None


def _load_network(path) -> BayesianNetwork:
    doc = _read_json(path, "network")
    try:
        return BayesianNetwork.from_dict(doc)
    except DataError as exc:
        raise type(exc)(f"{path}: {exc}") from exc


def _load_graph(path):
    try:
        return load_graph(path)
    except FileNotFoundError:
        raise DataError(f"graph file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    except DataError as exc:
        raise type(exc)(f"{path}: {exc}") from exc


def _load_series(path, graph, schema):
    doc = _read_json(path, "snapshot")
    try:
        return parse_snapshots(doc, graph, schema)
    except DataError as exc:
        raise type(exc)(f"{path}: {exc}") from exc


def _load_schema(path):
    if path is None:
        return case_study_schema()
    try:
        return schema_from_json(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: cannot read schema ({exc})") from None


def _route_entry(bn, graph, snapshot, source, dest) -> dict:
    evidence = snapshot_evidence(snapshot, graph, bn.schema)
    states = assign_safety(graph, bn, evidence)
    route = safest_route(graph, states, source, dest)
    return {"time": snapshot.time, **route.to_dict()}


# ---------------------------------------------------------------- commands

def cmd_learn(args) -> tuple[str, dict]:
    schema = _load_schema(args.schema)
    path = Path(args.dataset)
    try:
        table = read_table(path)
        dataset, report = parse_dataset(table, schema, ImputationPolicy(args.impute, args.seed))
    except FileNotFoundError:
        raise DataError(f"dataset file not found: {path}") from None
    except DataError as exc:
        raise type(exc)(f"{path}: {exc}") from exc
    train, test = train_test_split(dataset, args.split, args.seed)
    ordering = None
    if args.ordering:
        ordering = [name.strip() for name in args.ordering.split(",") if name.strip()]
        for name in ordering:
            schema.index(name)
    if not 0 <= args.max_parents <= len(schema) - 1:
        raise UsageError(f"--max-parents must lie in [0, {len(schema) - 1}]")
    model = K2BayesianNetwork(
        schema=schema, ordering=ordering, max_parents=args.max_parents,
        prior_counts=args.prior_counts,
    ).fit(train)
    bn = model.network_
    resolved = [schema.names[i] for i in (model._resolve_ordering(schema) or range(len(schema)))]
    records_hash = hashlib.sha256(
        ",".join(schema.names).encode() + train.records.astype("<i8").tobytes()
    ).hexdigest()
    manifest = {
        "inputs": {str(path): _sha256(path)},
        "seeds": {"split": args.seed, "impute": args.seed},
        "config": {
            "ordering": resolved,
            "max_parents": args.max_parents,
            "prior_counts": args.prior_counts,
            "impute": args.impute,
            "split": args.split,
        },
        "learning": {
            "dataset_hash": records_hash,
            "train_records": len(train),
            "test_records": len(test),
            "node_log_scores": {
                schema.names[i]: k2_log_score(count_stats(train, i, pa), args.prior_counts)
                for i, pa in enumerate(bn.structure.parents)
            },
            "test_avg_log_likelihood": model.score(test) if len(test) else None,
        },
        "parse_report": report.to_dict(),
    }
    _diag(f"learned {len(schema)}-node network with {len(bn.structure.edges)} edges "
          f"from {len(train)} records; {report.total_imputed} cells imputed")
    return bn.to_json(), manifest


def cmd_infer(args) -> tuple[str, dict]:
    bn = _load_network(args.network)
    labels = _read_json(args.evidence, "evidence")
    if not isinstance(labels, dict):
        raise DataError(f"{args.evidence}: evidence must be a JSON object")
    p_c = collision_probability(bn, evidence_from_labels(bn.schema, labels))
    out = {"p_collision": p_c, "p_safety": 1.0 - p_c}
    manifest = {
        "inputs": {args.network: _sha256(args.network), args.evidence: _sha256(args.evidence)},
        "config": {},
    }
    return _dumps(out), manifest


def cmd_route(args) -> tuple[str, dict]:
    bn = _load_network(args.network)
    graph = _load_graph(args.graph)
    series = _load_series(args.snapshot, graph, bn.schema)
    if len(series) != 1:
        raise DataError(f"{args.snapshot}: route needs exactly one snapshot, found {len(series)}")
    entry = _route_entry(bn, graph, series[0], args.source, args.dest)
    manifest = {
        "inputs": {p: _sha256(p) for p in (args.network, args.graph, args.snapshot)},
        "config": {"from": args.source, "to": args.dest},
    }
    _diag(f"{' -> '.join(entry['nodes'])}: p={entry['p_route']:.6g} score={entry['score']}")
    return _dumps(entry), manifest


def replay_report(bn, graph, series, source, dest) -> dict:
    entries = [_route_entry(bn, graph, snap, source, dest) for snap in series]
    changes = []
    for prev, cur in zip(entries, entries[1:]):
        if prev["edges"] != cur["edges"]:
            changes.append({
                "previous_time": prev["time"], "time": cur["time"],
                "previous_nodes": prev["nodes"], "nodes": cur["nodes"],
            })
    variations = []
    for a in range(len(entries)):
        for b in range(a + 1, len(entries)):
            ea, eb = entries[a], entries[b]
            if ea["edges"] == eb["edges"] and ea["score"] != eb["score"]:
                sa, sb = _score_value(ea["score"]), _score_value(eb["score"])
                variations.append({
                    "times": [ea["time"], eb["time"]],
                    "nodes": ea["nodes"],
                    "scores": [ea["score"], eb["score"]],
                    "difference": score_to_json(abs(sa - sb)),
                })
    best = None
    if entries:
        best = max(entries, key=lambda e: _score_value(e["score"]))["time"]
    return {
        "from": source,
        "to": dest,
        "entries": entries,
        "best_start_time": best,
        "route_changes": changes,
        "score_variations": variations,
    }


def _score_value(score) -> float:
    return float("inf") if score == "inf" else float(score)


def cmd_replay(args) -> tuple[str, dict]:
    bn = _load_network(args.network)
    graph = _load_graph(args.graph)
    series = _load_series(args.snapshots, graph, bn.schema)
    report = replay_report(bn, graph, series, args.source, args.dest)
    if args.plot_csv:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["time", "score"])
        for e in report["entries"]:
            writer.writerow([e["time"], e["score"]])
        Path(args.plot_csv).write_text(buf.getvalue(), encoding="utf-8")
    for c in report["route_changes"]:
        _diag(f"route changes at {c['time']}: {' -> '.join(c['nodes'])}")
    manifest = {
        "inputs": {p: _sha256(p) for p in (args.network, args.graph, args.snapshots)},
        "config": {"from": args.source, "to": args.dest},
    }
    return _dumps(report), manifest


def cmd_validate(args) -> tuple[str, dict]:
    results = {}
    failed = []
    schema = None
    graph = None

    def check(name, fn):
        try:
            value = fn()
            results[name] = "ok"
            return value
        except (SafeRouteError, OSError) as exc:
            results[name] = f"error: {exc}"
            failed.append(name)
            return None

    if args.schema:
        schema = check("schema", lambda: _load_schema(args.schema))
    if args.network:
        bn = check("network", lambda: _load_network(args.network))
        if bn is not None and schema is None:
            schema = bn.schema
    if args.dataset:
        s = schema or case_study_schema()
        check("dataset", lambda: parse_dataset(read_table(Path(args.dataset)), s,
                                               ImputationPolicy(args.impute, args.seed)))
    if args.graph:
        graph = check("graph", lambda: _load_graph(args.graph))
    if args.snapshots:
        if graph is None:
            results["snapshots"] = "error: --graph is required to validate snapshots"
            failed.append("snapshots")
        else:
            s = schema or case_study_schema()
            check("snapshots", lambda: _load_series(args.snapshots, graph, s))
    if not results:
        raise UsageError("validate needs at least one file option")
    out = _dumps(results)
    if failed:
        sys.stdout.write(out)
        raise DataError(f"validation failed for: {', '.join(failed)}")
    return out, {"config": {}, "inputs": {}}


# ---------------------------------------------------------------- plumbing

def _diag(message: str) -> None:
    print(message, file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="saferoute", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--out", help="write the primary JSON output here instead of stdout")
        p.add_argument("--manifest", help="run manifest path (default: <out>.manifest.json)")

    p = sub.add_parser("learn", help="learn a network from an accident CSV")
    p.add_argument("dataset")
    p.add_argument("--schema", help="schema JSON (default: the 13-variable case-study schema)")
    p.add_argument("--ordering", help="comma-separated variable names for K2")
    p.add_argument("--max-parents", type=int, default=3)
    p.add_argument("--prior-counts", type=int, default=1)
    p.add_argument("--impute", choices=("reject", "column-mode", "marginal-sample"),
                   default="column-mode")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split", type=float, default=0.8, help="training fraction")
    common(p)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("infer", help="collision probability for one evidence file")
    p.add_argument("network")
    p.add_argument("evidence")
    common(p)
    p.set_defaults(func=cmd_infer)

    for name, snap_arg, func, helptext in (
        ("route", "snapshot", cmd_route, "safest route for one snapshot"),
        ("replay", "snapshots", cmd_replay, "safest route for every snapshot in a series"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("network")
        p.add_argument("graph")
        p.add_argument(snap_arg)
        p.add_argument("--from", dest="source", required=True)
        p.add_argument("--to", dest="dest", required=True)
        if name == "replay":
            p.add_argument("--plot-csv", help="also write time,score rows here")
        common(p)
        p.set_defaults(func=func)

    p = sub.add_parser("validate", help="lint input files")
    p.add_argument("--network")
    p.add_argument("--graph")
    p.add_argument("--snapshots")
    p.add_argument("--dataset")
    p.add_argument("--schema")
    p.add_argument("--impute", choices=("reject", "column-mode", "marginal-sample"),
                   default="column-mode")
    p.add_argument("--seed", type=int, default=0)
    common(p)
    p.set_defaults(func=cmd_validate)
    return parser


def _write_manifest(args, manifest: dict, started: float) -> None:
    doc = {
        "command": args.command,
        "version": __version__,
        **manifest,
        "duration_s": round(time.perf_counter() - started, 6),
    }
    text = _dumps(doc)
    target = args.manifest or (f"{args.out}.manifest.json" if args.out else None)
    if target:
        Path(target).write_text(text, encoding="utf-8")
    else:
        sys.stderr.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    started = time.perf_counter()
    try:
        output, manifest = args.func(args)
    except UsageError as exc:
        _diag(f"saferoute {args.command}: usage error: {exc}")
        return EXIT_USAGE
    except DataError as exc:
        _diag(f"saferoute {args.command}: {type(exc).__name__}: {exc}")
        return EXIT_DATA
    except ComputationError as exc:
        _diag(f"saferoute {args.command}: {type(exc).__name__}: {exc}")
        return EXIT_COMPUTE
    if args.out:
        Path(args.out).write_text(output, encoding="utf-8")
    else:
        sys.stdout.write(output)
    _write_manifest(args, manifest, started)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

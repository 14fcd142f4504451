"""Accident CSV parsing, imputation, static/dynamic split and snapshot files."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import (
    HeaderMismatch,
    InvalidConfig,
    MalformedTable,
    NonMonotoneTimestamps,
    RejectedMissing,
    SchemaMismatch,
    StaticInSnapshot,
    UnknownEdge,
    UnknownState,
    UntaggedVariable,
)
from .network import DYNAMIC, STATIC, TARGET, Dataset, Schema
from .routing import RoadGraph

IMPUTE_MODES = ("reject", "column-mode", "marginal-sample")

CASE_STUDY_STATIC = frozenset({"TR", "TRL", "RZ"})
CASE_STUDY_DYNAMIC = frozenset({"RF", "WC", "RC", "LC", "W", "PD", "V", "VD", "LCB"})
CASE_STUDY_TARGET = "C"

# Hour -> part-of-day state.  7h and 12h fall outside the listed ranges and
# take the nearest listed bucket below them (night and morning).
_PD_BY_HOUR = {
    **{h: 5 for h in (22, 23, 0, 1, 2, 3, 4, 5, 6, 7)},
    8: 0, 9: 0,
    10: 1, 11: 1, 12: 1,
    13: 2, 14: 2, 15: 2,
    16: 3, 17: 3, 18: 3,
    19: 4, 20: 4, 21: 4,
}


@dataclass(frozen=True)
class RawTable:
    header: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]
    line_numbers: tuple[int, ...] = ()

    def __post_init__(self):
        width = len(self.header)
        for k, row in enumerate(self.rows):
            if len(row) != width:
                line = self.line_numbers[k] if self.line_numbers else k + 2
                raise MalformedTable(
                    f"line {line}: expected {width} cells, found {len(row)}"
                )


def read_table(source) -> RawTable:
    """Read CSV text, a path, or an open file into a :class:`RawTable`."""
    if isinstance(source, Path):
        text = source.read_text(encoding="utf-8")
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
    reader = csv.reader(io.StringIO(text))
    header = None
    rows, lines = [], []
    try:
        for row in reader:
            if header is None:
                header = tuple(c.strip() for c in row)
                continue
            if not row:
                continue
            rows.append(tuple(c.strip() for c in row))
            lines.append(reader.line_num)
    except csv.Error as exc:
        raise MalformedTable(f"line {reader.line_num}: {exc}") from None
    if header is None:
        raise MalformedTable("empty file: no header row")
    return RawTable(header, tuple(rows), tuple(lines))


@dataclass(frozen=True)
class ImputationPolicy:
    mode: str = "column-mode"
    seed: int = 0

    def __post_init__(self):
        if self.mode not in IMPUTE_MODES:
            raise InvalidConfig(f"imputation mode must be one of {IMPUTE_MODES}, got {self.mode!r}")


@dataclass
class ParseReport:
    rows: int = 0
    imputed: dict[str, int] = field(default_factory=dict)
    policy: str = "column-mode"
    seed: int = 0

    @property
    def total_imputed(self) -> int:
        return sum(self.imputed.values())

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "policy": self.policy,
            "seed": self.seed,
            "imputed": dict(self.imputed),
            "total_imputed": self.total_imputed,
        }


def _state_lookup(var) -> dict[str, int]:
    table = {str(k): k for k in range(var.cardinality)}
    table.update({label: k for k, label in enumerate(var.states)})
    return table


def _cell_state(var, cell: str) -> int:
    # exact label first, integer index second
    if cell in var.states:
        return var.states.index(cell)
    try:
        k = int(cell)
    except ValueError:
        raise UnknownState(f"{var.name}: {cell!r} is neither a state label nor an index") from None
    if not 0 <= k < var.cardinality:
        raise UnknownState(f"{var.name}: state index {k} outside [0, {var.cardinality})")
    return k


def parse_dataset(
    table: RawTable, schema: Schema, policy: ImputationPolicy | None = None
) -> tuple[Dataset, ParseReport]:
    """Map cells to state indices and fill missing cells per ``policy``.

    Columns may appear in any order.  Returns the dataset together with a
    report counting imputed cells per column.
    """
    policy = policy or ImputationPolicy()
    if sorted(table.header) != sorted(schema.names) or len(set(table.header)) != len(table.header):
        raise HeaderMismatch(
            f"header {list(table.header)} does not match variables {list(schema.names)}"
        )
    col_of = [table.header.index(name) for name in schema.names]
    lookups = [_state_lookup(var) for var in schema]
    n = len(table.rows)
    records = np.full((n, len(schema)), -1, dtype=np.int64)
    for r, row in enumerate(table.rows):
        for i, var in enumerate(schema):
            cell = row[col_of[i]]
            state = lookups[i].get(cell)
            if state is not None:
                records[r, i] = state
                continue
            line = table.line_numbers[r] if table.line_numbers else r + 2
            if cell == "":
                if policy.mode == "reject":
                    raise RejectedMissing(f"line {line}: missing value for {var.name}")
                continue
            try:
                records[r, i] = _cell_state(var, cell)
            except UnknownState as exc:
                raise UnknownState(f"line {line}: {exc}") from None

    report = ParseReport(rows=n, policy=policy.mode, seed=policy.seed)
    rng = np.random.default_rng(policy.seed)
    for i, var in enumerate(schema):
        col = records[:, i]
        missing = col < 0
        report.imputed[var.name] = int(missing.sum())
        if not missing.any():
            continue
        counts = np.bincount(col[~missing], minlength=var.cardinality)
        if policy.mode == "column-mode":
            col[missing] = int(np.argmax(counts))  # ties -> lowest index
        else:
            weights = counts / counts.sum() if counts.sum() else np.full(var.cardinality, 1.0 / var.cardinality)
            col[missing] = rng.choice(var.cardinality, size=int(missing.sum()), p=weights)
    return Dataset(schema, records), report


def dataset_to_csv(dataset: Dataset) -> str:
    """Serialize with integer state indices under a header of variable names."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(dataset.schema.names)
    writer.writerows(dataset.records.tolist())
    return buf.getvalue()


def split_attributes(schema: Schema) -> tuple[frozenset[str], frozenset[str]]:
    """Partition evidence variables into (static, dynamic) name sets.

    A variable's ``kind`` tag decides; untagged case-study variables use
    the fixed partition, and any other untagged variable is an error.  The
    collision target is in neither set.
    """
    static, dynamic = set(), set()
    for var in schema:
        kind = var.kind
        if kind is None:
            if var.name == CASE_STUDY_TARGET:
                kind = TARGET
            elif var.name in CASE_STUDY_STATIC:
                kind = STATIC
            elif var.name in CASE_STUDY_DYNAMIC:
                kind = DYNAMIC
            else:
                raise UntaggedVariable(f"variable {var.name!r} has no static/dynamic tag")
        if kind == STATIC:
            static.add(var.name)
        elif kind == DYNAMIC:
            dynamic.add(var.name)
    return frozenset(static), frozenset(dynamic)


def train_test_split(dataset: Dataset, fraction: float = 0.8, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Seeded shuffled split with |train| = floor(fraction * N + 0.5).

    Rounding is half-up, so N=1 at fraction 0.5 gives (1, 0).  Each part
    keeps the original record order.
    """
    if not 0.0 < fraction < 1.0:
        raise InvalidConfig(f"split fraction must lie in (0, 1), got {fraction}")
    n = len(dataset)
    n_train = int(math.floor(fraction * n + 0.5))
    perm = np.random.default_rng(seed).permutation(n)
    return dataset.subset(np.sort(perm[:n_train])), dataset.subset(np.sort(perm[n_train:]))


def load_graph(path) -> RoadGraph:
    return RoadGraph.from_json(Path(path).read_text(encoding="utf-8"))


def part_of_day(hour: int) -> int:
    return _PD_BY_HOUR[hour]


def week_state(moment: datetime) -> int:
    """0 on Monday-Friday, 1 on Saturday/Sunday."""
    return 1 if moment.weekday() >= 5 else 0


def parse_time(text: str) -> datetime:
    s = str(text).strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    try:
        return datetime.fromisoformat(s)
    except ValueError:
        raise SchemaMismatch(f"invalid RFC 3339 timestamp {text!r}") from None


@dataclass(frozen=True)
class Snapshot:
    time: str
    moment: datetime
    edges: Mapping[str, Mapping[str, str]]


@dataclass(frozen=True)
class SnapshotSeries:
    snapshots: tuple[Snapshot, ...] = ()

    def __len__(self):
        return len(self.snapshots)

    def __iter__(self):
        return iter(self.snapshots)

    def __getitem__(self, k) -> Snapshot:
        return self.snapshots[k]


def parse_snapshots(doc, graph: RoadGraph, schema: Schema) -> SnapshotSeries:
    """Validate a snapshot document (one object or an array of them)."""
    items = doc if isinstance(doc, list) else [doc]
    static, dynamic = split_attributes(schema)
    out = []
    for k, item in enumerate(items):
        try:
            time_text, edges = item["time"], item["edges"]
        except (KeyError, TypeError):
            raise SchemaMismatch(f"snapshot {k}: expected fields 'time' and 'edges'") from None
        moment = parse_time(time_text)
        clean = {}
        for eid, ev in edges.items():
            if eid not in graph:
                raise UnknownEdge(f"snapshot {time_text}: unknown edge {eid!r}")
            labels = {}
            for name, label in ev.items():
                if name in static:
                    raise StaticInSnapshot(
                        f"snapshot {time_text}: static variable {name} on edge {eid!r}"
                    )
                if name not in dynamic:
                    raise SchemaMismatch(
                        f"snapshot {time_text}: {name!r} is not a dynamic variable"
                    )
                label = str(label)
                schema[schema.index(name)].state_index(label)
                labels[name] = label
            clean[str(eid)] = labels
        if out and (moment.tzinfo is None) != (out[-1].moment.tzinfo is None):
            raise SchemaMismatch(f"snapshot {time_text}: mixes zoned and unzoned timestamps")
        if out and not moment > out[-1].moment:
            raise NonMonotoneTimestamps(
                f"snapshot {time_text} does not come after {out[-1].time}"
            )
        out.append(Snapshot(str(time_text), moment, clean))
    return SnapshotSeries(tuple(out))


def load_snapshots(path, graph: RoadGraph, schema: Schema) -> SnapshotSeries:
    return parse_snapshots(json.loads(Path(path).read_text(encoding="utf-8")), graph, schema)


def snapshot_evidence(snapshot: Snapshot, graph: RoadGraph, schema: Schema) -> dict[str, dict[str, str]]:
    """Per-edge dynamic evidence for one snapshot.

    Edges absent from the snapshot get empty evidence.  W and PD, when the
    schema has them and the snapshot leaves them out, come from the
    snapshot timestamp.
    """
    derived = {}
    if "W" in schema and schema[schema.index("W")].cardinality == 2:
        derived["W"] = schema[schema.index("W")].states[week_state(snapshot.moment)]
    if "PD" in schema:
        pd = schema[schema.index("PD")]
        if pd.cardinality == 6:
            derived["PD"] = pd.states[part_of_day(snapshot.moment.hour)]
    out = {}
    for e in graph.edges:
        ev = dict(snapshot.edges.get(e.id, {}))
        for name, label in derived.items():
            if name not in ev and name not in e.static:
                ev[name] = label
        out[e.id] = ev
    return out


def schema_from_json(text: str) -> Schema:
    doc = json.loads(text)
    if isinstance(doc, dict):
        doc = doc.get("schema", doc.get("variables"))
    return Schema.from_list(doc)


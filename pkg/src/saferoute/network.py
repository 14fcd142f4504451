"""Discrete Bayesian network types, DAG checks and joint evaluation.

CPT rows are indexed by the mixed-radix rank of the parent states, with
parents taken in ascending variable-index order and the lowest-index
parent as the most significant digit (``np.ravel_multi_index`` in C
order).  Every file format and test relies on this convention.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import CyclicStructure, InvalidCpt, SchemaMismatch

ROW_SUM_TOL = 1e-12

STATIC = "static"
DYNAMIC = "dynamic"
TARGET = "target"
KINDS = (STATIC, DYNAMIC, TARGET)


@dataclass(frozen=True)
class VariableSpec:
    name: str
    states: tuple[str, ...]
    kind: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(str(s) for s in self.states))
        if not self.name:
            raise SchemaMismatch("variable name must be non-empty")
        if len(self.states) < 2:
            raise SchemaMismatch(f"{self.name}: cardinality must be at least 2")
        if len(set(self.states)) != len(self.states):
            raise SchemaMismatch(f"{self.name}: duplicate state labels")
        if self.kind is not None and self.kind not in KINDS:
            raise SchemaMismatch(f"{self.name}: unknown kind {self.kind!r}")

    @property
    def cardinality(self) -> int:
        return len(self.states)

    def state_index(self, label: str) -> int:
        try:
            return self.states.index(label)
        except ValueError:
            raise SchemaMismatch(
                f"{self.name}: unknown state {label!r} (expected one of {list(self.states)})"
            ) from None


@dataclass(frozen=True)
class Schema:
    variables: tuple[VariableSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise SchemaMismatch("variable names must be unique")

    def __len__(self):
        return len(self.variables)

    def __iter__(self):
        return iter(self.variables)

    def __getitem__(self, i) -> VariableSpec:
        return self.variables[i]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return tuple(v.cardinality for v in self.variables)

    def __contains__(self, name) -> bool:
        return name in self.names

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaMismatch(f"unknown variable {name!r}") from None

    def to_list(self) -> list[dict]:
        out = []
        for v in self.variables:
            d = {"name": v.name, "states": list(v.states)}
            if v.kind is not None:
                d["kind"] = v.kind
            out.append(d)
        return out

    @classmethod
    def from_list(cls, items: Iterable[dict]) -> "Schema":
        try:
            return cls(
                tuple(
                    VariableSpec(d["name"], tuple(d["states"]), d.get("kind"))
                    for d in items
                )
            )
        except (KeyError, TypeError) as exc:
            raise SchemaMismatch(f"malformed schema entry: {exc}") from None

    @classmethod
    def binary(cls, names: Sequence[str]) -> "Schema":
        return cls(tuple(VariableSpec(n, ("0", "1")) for n in names))


def case_study_schema() -> Schema:
    """The 13 road-safety variables used in the case study, in table order."""
    spec = [
        ("TR", ("highway", "district_road"), STATIC),
        ("TRL", ("single_lane", "separated_lanes"), STATIC),
        ("RF", ("bad_surface", "faulty_signals", "faulty_lighting", "road_works",
                "queue", "downhill", "curve", "bad_visibility"), DYNAMIC),
        ("WC", ("normal", "rain", "fog", "wind", "snow", "hail", "other"), DYNAMIC),
        ("RC", ("dry", "wet", "snow", "clean", "dirty"), DYNAMIC),
        ("LC", ("daylight", "twilight", "public_lighting", "night"), DYNAMIC),
        ("W", ("weekday", "weekend"), DYNAMIC),
        ("PD", ("morning_rush", "morning", "noon", "evening_rush", "evening",
                "night"), DYNAMIC),
        ("C", ("none", "collision"), TARGET),
        ("V", ("low", "normal", "high"), DYNAMIC),
        ("VD", ("low", "high"), DYNAMIC),
        ("LCB", ("not_frequent", "frequent"), DYNAMIC),
        ("RZ", ("none", "commercial", "residential"), STATIC),
    ]
    return Schema(tuple(VariableSpec(n, s, k) for n, s, k in spec))


@dataclass(frozen=True)
class DagStructure:
    """Parent sets, one per variable index; stored sorted and duplicate-free."""

    parents: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        n = len(self.parents)
        normalized = []
        for i, pa in enumerate(self.parents):
            pa = tuple(int(p) for p in pa)
            if len(set(pa)) != len(pa):
                raise SchemaMismatch(f"node {i}: duplicate parents {pa}")
            if i in pa:
                raise SchemaMismatch(f"node {i} lists itself as a parent")
            if any(p < 0 or p >= n for p in pa):
                raise SchemaMismatch(f"node {i}: parent index out of range in {pa}")
            normalized.append(tuple(sorted(pa)))
        object.__setattr__(self, "parents", tuple(normalized))

    @classmethod
    def empty(cls, n: int) -> "DagStructure":
        return cls(tuple(() for _ in range(n)))

    def __len__(self):
        return len(self.parents)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(p, i) for i, pa in enumerate(self.parents) for p in pa]

    def with_parent(self, node: int, parent: int) -> "DagStructure":
        parents = list(self.parents)
        parents[node] = parents[node] + (parent,)
        return DagStructure(tuple(parents))


def validate_dag(structure: DagStructure) -> list[int]:
    """Topological order of the nodes, ties broken by ascending index.

    Raises :class:`CyclicStructure` naming one directed cycle.
    """
    n = len(structure)
    children = [[] for _ in range(n)]
    indegree = [len(pa) for pa in structure.parents]
    for i, pa in enumerate(structure.parents):
        for p in pa:
            children[p].append(i)
    ready = [i for i in range(n) if indegree[i] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        u = heapq.heappop(ready)
        order.append(u)
        for c in children[u]:
            indegree[c] -= 1
            if indegree[c] == 0:
                heapq.heappush(ready, c)
    if len(order) < n:
        raise CyclicStructure(_find_cycle(structure, set(range(n)) - set(order)))
    return order


def _find_cycle(structure: DagStructure, remaining: set[int]) -> list[int]:
    # every remaining node has a remaining parent, so walking parents must loop
    node = min(remaining)
    seen: dict[int, int] = {}
    walk = []
    while node not in seen:
        seen[node] = len(walk)
        walk.append(node)
        node = min(p for p in structure.parents[node] if p in remaining)
    cycle = walk[seen[node]:]
    return cycle[::-1]


@dataclass(frozen=True)
class Cpt:
    variable: int
    parents: tuple[int, ...]
    parent_cards: tuple[int, ...]
    table: np.ndarray = field(repr=False)

    def __post_init__(self):
        table = np.array(self.table, dtype=float)
        q = int(np.prod(self.parent_cards, dtype=np.int64)) if self.parent_cards else 1
        if table.ndim != 2 or table.shape[0] != q:
            raise InvalidCpt(
                f"node {self.variable}: table shape {table.shape} does not have {q} rows"
            )
        if table.shape[1] < 2:
            raise InvalidCpt(f"node {self.variable}: fewer than two columns")
        if not np.all((table >= 0.0) & (table <= 1.0)):
            raise InvalidCpt(f"node {self.variable}: entries outside [0, 1]")
        sums = table.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)
        if bad.size:
            raise InvalidCpt(
                f"node {self.variable}: row {int(bad[0])} sums to {sums[bad[0]]!r}"
            )
        table.setflags(write=False)
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "parents", tuple(self.parents))
        object.__setattr__(self, "parent_cards", tuple(self.parent_cards))

    @property
    def parent_configs(self) -> int:
        return self.table.shape[0]

    @property
    def cardinality(self) -> int:
        return self.table.shape[1]

    def row_index(self, parent_states) -> int | np.ndarray:
        """Mixed-radix rank of parent states (last axis is the parent axis)."""
        if not self.parents:
            states = np.asarray(parent_states)
            return 0 if states.ndim <= 1 else np.zeros(states.shape[0], dtype=np.int64)
        states = np.asarray(parent_states, dtype=np.int64)
        return np.ravel_multi_index(tuple(np.moveaxis(states, -1, 0)), self.parent_cards)

    def row(self, parent_states) -> np.ndarray:
        return self.table[self.row_index(parent_states)]


def config_rank(states, cards) -> np.ndarray:
    """Vectorised mixed-radix rank; ``states`` is (n_records, n_parents)."""
    states = np.asarray(states, dtype=np.int64)
    if states.shape[1] == 0:
        return np.zeros(states.shape[0], dtype=np.int64)
    return np.ravel_multi_index(tuple(states.T), tuple(cards))


@dataclass(frozen=True)
class BayesianNetwork:
    schema: Schema
    structure: DagStructure
    cpts: tuple[Cpt, ...]

    def __post_init__(self):
        object.__setattr__(self, "cpts", tuple(self.cpts))
        n = len(self.schema)
        if len(self.structure) != n or len(self.cpts) != n:
            raise SchemaMismatch(
                f"schema has {n} variables, structure {len(self.structure)}, "
                f"cpts {len(self.cpts)}"
            )
        cards = self.schema.cardinalities
        for i, cpt in enumerate(self.cpts):
            pa = self.structure.parents[i]
            if cpt.variable != i or cpt.parents != pa:
                raise InvalidCpt(f"node {i}: CPT parents {cpt.parents} != structure {pa}")
            if cpt.parent_cards != tuple(cards[p] for p in pa):
                raise InvalidCpt(f"node {i}: parent cardinalities disagree with schema")
            if cpt.cardinality != cards[i]:
                raise InvalidCpt(
                    f"node {i}: CPT has {cpt.cardinality} columns, "
                    f"variable has {cards[i]} states"
                )
        object.__setattr__(self, "_order", tuple(validate_dag(self.structure)))

    @property
    def topological_order(self) -> tuple[int, ...]:
        return self._order

    @classmethod
    def from_tables(cls, schema: Schema, parents, tables) -> "BayesianNetwork":
        structure = parents if isinstance(parents, DagStructure) else DagStructure(
            tuple(tuple(p) for p in parents)
        )
        cards = schema.cardinalities
        cpts = []
        for i, table in enumerate(tables):
            pa = structure.parents[i]
            cpts.append(Cpt(i, pa, tuple(cards[p] for p in pa), np.asarray(table, float)))
        return cls(schema, structure, tuple(cpts))

    def to_dict(self) -> dict:
        return {
            "schema": self.schema.to_list(),
            "parents": [list(pa) for pa in self.structure.parents],
            "cpts": [cpt.table.tolist() for cpt in self.cpts],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "BayesianNetwork":
        try:
            schema = Schema.from_list(doc["schema"])
            return cls.from_tables(schema, doc["parents"], doc["cpts"])
        except KeyError as exc:
            raise SchemaMismatch(f"network document lacks field {exc}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "BayesianNetwork":
        return cls.from_dict(json.loads(text))


def check_records(schema: Schema, records) -> np.ndarray:
    """Coerce to an (n, len(schema)) int array, rejecting out-of-range states."""
    arr = np.asarray(records)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1) if arr.size else arr.reshape(0, len(schema))
    if arr.ndim != 2 or arr.shape[1] != len(schema):
        raise SchemaMismatch(
            f"records must have {len(schema)} columns, got shape {arr.shape}"
        )
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.equal(np.mod(arr, 1), 0)):
            raise SchemaMismatch("record values must be integer state indices")
    arr = arr.astype(np.int64)
    cards = np.asarray(schema.cardinalities)
    bad = (arr < 0) | (arr >= cards)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise SchemaMismatch(
            f"record {int(r)}: {schema[int(c)].name}={int(arr[r, c])} outside "
            f"[0, {int(cards[c])})"
        )
    return arr


@dataclass(frozen=True)
class Dataset:
    schema: Schema
    records: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = check_records(self.schema, self.records)
        arr.setflags(write=False)
        object.__setattr__(self, "records", arr)

    def __len__(self):
        return self.records.shape[0]

    def subset(self, rows) -> "Dataset":
        return Dataset(self.schema, self.records[np.asarray(rows, dtype=np.int64)])


def log_likelihoods(bn: BayesianNetwork, records) -> np.ndarray:
    """Per-record log joint probability; -inf where some factor is zero."""
    arr = check_records(bn.schema, records)
    total = np.zeros(arr.shape[0])
    with np.errstate(divide="ignore"):
        for cpt in bn.cpts:
            rows = config_rank(arr[:, list(cpt.parents)], cpt.parent_cards)
            total += np.log(cpt.table[rows, arr[:, cpt.variable]])
    return total


def joint_probability(bn: BayesianNetwork, assignment) -> float:
    """P(X_1 = x_1, ..., X_n = x_n) as the product of CPT entries.

    Accumulated in log space; a zero factor gives exactly 0.
    """
    values = check_records(bn.schema, np.asarray(assignment).reshape(1, -1))[0]
    logp = 0.0
    for cpt in bn.cpts:
        p = cpt.table[cpt.row_index(values[list(cpt.parents)]), values[cpt.variable]]
        if p == 0.0:
            return 0.0
        logp += math.log(p)
    return math.exp(logp)

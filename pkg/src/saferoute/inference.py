"""Exact marginal inference.

``eliminate_marginal`` is the production path (variable elimination over
factor tables).  ``enumerate_marginal`` sums the joint over every
completion and exists as an oracle for small networks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    MissingCollisionVariable,
    SchemaMismatch,
    StateSpaceTooLarge,
    ZeroEvidenceLikelihood,
)
from .network import BayesianNetwork, Schema, log_likelihoods

COLLISION = "C"
ENUMERATION_CAP = 2**20

# variable index -> state index; labels are converted at the file boundary
Evidence = Mapping[int, int]


@dataclass(frozen=True)
class MarginalDistribution:
    variable: int
    probabilities: np.ndarray = field(repr=False)

    def __getitem__(self, state):
        return float(self.probabilities[state])


def check_evidence(schema: Schema, evidence: Evidence, query: int | None = None) -> dict[int, int]:
    cards = schema.cardinalities
    out = {}
    for var, state in dict(evidence).items():
        var, state = int(var), int(state)
        if not 0 <= var < len(cards):
            raise SchemaMismatch(f"evidence on unknown variable index {var}")
        if not 0 <= state < cards[var]:
            raise SchemaMismatch(
                f"evidence {schema[var].name}={state} outside [0, {cards[var]})"
            )
        out[var] = state
    if query is not None:
        if not 0 <= query < len(cards):
            raise SchemaMismatch(f"query index {query} out of range")
        if query in out:
            raise SchemaMismatch(f"query variable {schema[query].name} is also evidence")
    return out


def evidence_from_labels(schema: Schema, labels: Mapping[str, str]) -> dict[int, int]:
    """Convert a name -> state-label map to index form."""
    out = {}
    for name, label in labels.items():
        i = schema.index(name)
        out[i] = schema[i].state_index(str(label))
    return out


def _normalize(values: np.ndarray, query: int) -> MarginalDistribution:
    z = values.sum()
    if not z > 0.0:
        raise ZeroEvidenceLikelihood("evidence has zero probability under the network")
    return MarginalDistribution(query, values / z)


def enumerate_marginal(
    bn: BayesianNetwork, query: int, evidence: Evidence, cap: int = ENUMERATION_CAP
) -> MarginalDistribution:
    """P(query | evidence) by brute-force summation of the joint."""
    ev = check_evidence(bn.schema, evidence, query)
    cards = bn.schema.cardinalities
    free = [i for i in range(len(cards)) if i not in ev]
    size = int(np.prod([cards[i] for i in free], dtype=np.int64))
    if size > cap:
        raise StateSpaceTooLarge(f"{size} completions exceed the enumeration cap {cap}")
    grid = np.indices([cards[i] for i in free]).reshape(len(free), -1).T
    records = np.empty((grid.shape[0], len(cards)), dtype=np.int64)
    records[:, free] = grid
    for var, state in ev.items():
        records[:, var] = state
    joint = np.exp(log_likelihoods(bn, records))
    totals = np.bincount(records[:, query], weights=joint, minlength=cards[query])
    return _normalize(totals, query)


class _Factor:
    __slots__ = ("vars", "values")

    def __init__(self, variables: tuple[int, ...], values: np.ndarray):
        self.vars = variables
        self.values = values

    def restrict(self, evidence: dict[int, int]) -> "_Factor":
        hit = [v for v in self.vars if v in evidence]
        if not hit:
            return self
        index = tuple(evidence[v] if v in evidence else slice(None) for v in self.vars)
        return _Factor(tuple(v for v in self.vars if v not in evidence), self.values[index])


def _product(factors: Sequence[_Factor]) -> _Factor:
    scope = tuple(sorted(set().union(*(f.vars for f in factors))))
    out = np.ones([1] * len(scope))
    for f in factors:
        # align axes to the sorted scope, inserting singleton axes for broadcasting
        order = sorted(range(len(f.vars)), key=lambda a: f.vars[a])
        vals = np.transpose(f.values, order)
        shape = [1] * len(scope)
        for v, n in zip(sorted(f.vars), vals.shape):
            shape[scope.index(v)] = n
        out = out * vals.reshape(shape)
    return _Factor(scope, out)


def _min_degree_var(factors: list[_Factor], candidates: set[int]) -> int:
    neighbours = {v: set() for v in candidates}
    for f in factors:
        for v in f.vars:
            if v in neighbours:
                neighbours[v].update(f.vars)
    return min(candidates, key=lambda v: (len(neighbours[v] - {v}), v))


def eliminate_marginal(
    bn: BayesianNetwork,
    query: int,
    evidence: Evidence,
    order: Sequence[int] | None = None,
) -> MarginalDistribution:
    """P(query | evidence) by variable elimination.

    Factors are restricted by the evidence, then the remaining non-query
    variables are summed out, by default in greedy min-degree order with
    ties to the lowest index.  ``order`` overrides the heuristic.
    """
    ev = check_evidence(bn.schema, evidence, query)
    factors = []
    for cpt in bn.cpts:
        scope = cpt.parents + (cpt.variable,)
        vals = cpt.table.reshape(tuple(cpt.parent_cards) + (cpt.cardinality,))
        # scope is not sorted in general; _product handles alignment
        factors.append(_Factor(scope, vals).restrict(ev))

    hidden = set(range(len(bn.schema))) - set(ev) - {query}
    if order is not None:
        order = [int(v) for v in order]
        if set(order) != hidden or len(order) != len(hidden):
            raise SchemaMismatch("elimination order must list each hidden variable once")
    remaining = set(hidden)
    step = 0
    while remaining:
        if order is None:
            var = _min_degree_var(factors, remaining)
        else:
            var = order[step]
            step += 1
        remaining.discard(var)
        touching = [f for f in factors if var in f.vars]
        if not touching:
            continue
        factors = [f for f in factors if var not in f.vars]
        prod = _product(touching)
        factors.append(_Factor(
            tuple(v for v in prod.vars if v != var),
            prod.values.sum(axis=prod.vars.index(var)),
        ))

    result = _product(factors)
    values = result.values.reshape(-1)
    if result.vars != (query,):
        # query disconnected from every factor cannot happen with a full CPT set
        raise AssertionError(f"unexpected residual scope {result.vars}")
    return _normalize(values, query)


def _collision_index(bn: BayesianNetwork) -> int:
    if COLLISION not in bn.schema:
        raise MissingCollisionVariable(f"schema has no {COLLISION!r} variable")
    return bn.schema.index(COLLISION)


def collision_probability(bn: BayesianNetwork, evidence: Evidence) -> float:
    """P(C = collision | evidence); state 1 of C is the collision state."""
    c = _collision_index(bn)
    return float(eliminate_marginal(bn, c, evidence).probabilities[1])


def safety_probability(bn: BayesianNetwork, evidence: Evidence) -> float:
    return 1.0 - collision_probability(bn, evidence)

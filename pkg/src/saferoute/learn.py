"""Sufficient statistics, the Bayesian-Dirichlet (K2) score, K2 search and
Dirichlet parameter estimation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import gammaln

from .errors import InvalidConfig, SchemaMismatch
from .network import (
    BayesianNetwork,
    Cpt,
    DagStructure,
    Dataset,
    Schema,
    config_rank,
    validate_dag,
)


@dataclass(frozen=True)
class SufficientStats:
    variable: int
    parent_set: tuple[int, ...]
    counts: np.ndarray = field(repr=False)  # N_ijk, shape (q_i, r_i)

    @property
    def row_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def cardinality(self) -> int:
        return self.counts.shape[1]


@dataclass(frozen=True)
class K2Config:
    ordering: tuple[int, ...] | None = None
    max_parents: int = 3
    prior_counts: int = 1

    def resolve(self, n_vars: int) -> "K2Config":
        """Validated copy with the default (schema) ordering filled in."""
        ordering = tuple(range(n_vars)) if self.ordering is None else tuple(
            int(i) for i in self.ordering
        )
        if sorted(ordering) != list(range(n_vars)):
            raise InvalidConfig(f"ordering {list(ordering)} is not a permutation of 0..{n_vars - 1}")
        if not 0 <= self.max_parents <= max(n_vars - 1, 0):
            raise InvalidConfig(f"max_parents must lie in [0, {n_vars - 1}], got {self.max_parents}")
        if int(self.prior_counts) != self.prior_counts or self.prior_counts < 1:
            raise InvalidConfig(f"prior_counts must be a positive integer, got {self.prior_counts}")
        return K2Config(ordering, int(self.max_parents), int(self.prior_counts))


@dataclass(frozen=True)
class DirichletPrior:
    """Pseudo-counts for parameter estimation.

    ``alpha`` is either one positive scalar for every cell or a mapping from
    node index to a (q_i, r_i) array; nodes absent from the mapping get 1.
    """

    alpha: float | Mapping[int, np.ndarray] = 1.0

    def for_node(self, node: int, shape: tuple[int, int]) -> np.ndarray:
        if isinstance(self.alpha, Mapping):
            a = np.asarray(self.alpha.get(node, 1.0), dtype=float)
        else:
            a = np.asarray(self.alpha, dtype=float)
        a = np.broadcast_to(a, shape)
        if not np.all(a > 0):
            raise InvalidConfig(f"node {node}: Dirichlet hyperparameters must be positive")
        return a


def _check_family(schema: Schema, variable: int, parent_set) -> tuple[int, ...]:
    n = len(schema)
    parent_set = tuple(int(p) for p in parent_set)
    if not 0 <= variable < n:
        raise SchemaMismatch(f"variable index {variable} out of range")
    if variable in parent_set:
        raise SchemaMismatch(f"variable {variable} cannot be its own parent")
    if any(not 0 <= p < n for p in parent_set) or len(set(parent_set)) != len(parent_set):
        raise SchemaMismatch(f"invalid parent set {parent_set}")
    return tuple(sorted(parent_set))


def count_stats(dataset: Dataset, variable: int, parent_set: Sequence[int] = ()) -> SufficientStats:
    """Tally N_ijk in one pass; rows follow the mixed-radix parent rank."""
    parents = _check_family(dataset.schema, variable, parent_set)
    cards = dataset.schema.cardinalities
    pcards = tuple(cards[p] for p in parents)
    q = int(np.prod(pcards, dtype=np.int64)) if parents else 1
    r = cards[variable]
    recs = dataset.records
    rows = config_rank(recs[:, list(parents)], pcards)
    flat = np.bincount(rows * r + recs[:, variable], minlength=q * r)
    return SufficientStats(variable, parents, flat.reshape(q, r).astype(np.int64))


def k2_log_score(stats: SufficientStats, prior_counts: int = 1) -> float:
    """Log of one node's factor in the Bayesian-Dirichlet metric.

    With ``prior_counts == 1`` this is the K2 metric:
    sum_j [lnG(r) - lnG(r + N_ij) + sum_k lnG(1 + N_ijk)].
    """
    counts = np.asarray(stats.counts, dtype=float)
    r = counts.shape[1]
    a = float(prior_counts)
    row = counts.sum(axis=1)
    per_row = gammaln(r * a) - gammaln(r * a + row)
    cells = gammaln(a + counts) - gammaln(a)
    return float(per_row.sum() + cells.sum())


def node_score(dataset: Dataset, variable: int, parent_set, prior_counts: int = 1) -> float:
    return k2_log_score(count_stats(dataset, variable, parent_set), prior_counts)


def network_log_score(dataset: Dataset, structure: DagStructure, prior_counts: int = 1) -> float:
    """Sum of node scores; the uniform structure prior is a dropped constant."""
    return sum(
        node_score(dataset, i, pa, prior_counts) for i, pa in enumerate(structure.parents)
    )


def k2_search(dataset: Dataset, config: K2Config | None = None) -> DagStructure:
    """Greedy K2 structure search over a fixed variable ordering.

    Each node repeatedly takes the single predecessor that most improves
    its score, stopping when nothing improves or ``max_parents`` is hit.
    Score ties go to the lowest variable index.
    """
    structure, _ = k2_search_with_scores(dataset, config)
    return structure


def k2_search_with_scores(dataset: Dataset, config: K2Config | None = None):
    n = len(dataset.schema)
    cfg = (config or K2Config()).resolve(n)
    parents: list[tuple[int, ...]] = [() for _ in range(n)]
    scores = [0.0] * n
    for pos, node in enumerate(cfg.ordering):
        current: tuple[int, ...] = ()
        best = node_score(dataset, node, current, cfg.prior_counts)
        predecessors = sorted(cfg.ordering[:pos])
        while len(current) < cfg.max_parents:
            candidates = [c for c in predecessors if c not in current]
            if not candidates:
                break
            # score every candidate first, then pick, so evaluation order is irrelevant
            cand_scores = [
                node_score(dataset, node, current + (c,), cfg.prior_counts) for c in candidates
            ]
            top = max(cand_scores)
            if not top > best:
                break
            current = current + (candidates[cand_scores.index(top)],)
            best = top
        parents[node] = tuple(sorted(current))
        scores[node] = best
    return DagStructure(tuple(parents)), scores


def learn_parameters(
    dataset: Dataset, structure: DagStructure, prior: DirichletPrior | None = None
) -> BayesianNetwork:
    """Posterior-mean CPTs: (alpha_ijk + N_ijk) / (alpha_ij + N_ij)."""
    if len(structure) != len(dataset.schema):
        raise SchemaMismatch(
            f"structure has {len(structure)} nodes, schema has {len(dataset.schema)}"
        )
    validate_dag(structure)
    prior = prior or DirichletPrior()
    cards = dataset.schema.cardinalities
    cpts = []
    for i, pa in enumerate(structure.parents):
        counts = count_stats(dataset, i, pa).counts
        post = counts + prior.for_node(i, counts.shape)
        table = post / post.sum(axis=1, keepdims=True)
        cpts.append(Cpt(i, pa, tuple(cards[p] for p in pa), table))
    return BayesianNetwork(dataset.schema, structure, tuple(cpts))

"""Forward sampling and a seeded generator network over the case-study schema.

The generator stands in for the real accident data, which is not
redistributed: it gives datasets with known ground truth for the learning
pipeline and a plausible collision model for routing experiments.
"""

from __future__ import annotations

import numpy as np

from .network import BayesianNetwork, Dataset, case_study_schema, config_rank

# causal order used to build the generator; parents always come earlier
CASE_STUDY_ORDERING = ("TR", "TRL", "RZ", "W", "PD", "WC", "LC", "RF", "RC",
                       "VD", "V", "LCB", "C")

_GENERATOR_PARENTS = {
    "TRL": ("TR",),
    "RZ": ("TR",),
    "LC": ("PD", "WC"),
    "RF": ("TR",),
    "RC": ("WC",),
    "VD": ("W", "PD", "RZ"),
    "V": ("TR", "VD"),
    "LCB": ("TRL", "VD"),
    "C": ("WC", "V", "LCB"),
}

# additive logit contributions to the collision probability
_C_BASE = -3.6
_C_WEATHER = (0.0, 0.9, 1.1, 0.5, 2.0, 1.7, 0.6)   # normal rain fog wind snow hail other
_C_VELOCITY = (0.2, 0.0, 0.9)                     # low normal high
_C_LANE_CHANGE = (0.0, 0.8)


def sample(bn: BayesianNetwork, n: int, seed=None) -> Dataset:
    """Draw ``n`` complete records by ancestral sampling."""
    rng = np.random.default_rng(seed)
    records = np.zeros((n, len(bn.schema)), dtype=np.int64)
    for node in bn.topological_order:
        cpt = bn.cpts[node]
        rows = config_rank(records[:, list(cpt.parents)], cpt.parent_cards)
        cdf = np.cumsum(cpt.table, axis=1)[rows]
        u = rng.random(n)[:, None]
        records[:, node] = np.minimum((u >= cdf).sum(axis=1), cpt.cardinality - 1)
    return Dataset(bn.schema, records)


def case_study_generator(seed: int = 2016) -> BayesianNetwork:
    """Generator network over the 13 case-study variables.

    Every CPT except the collision node is a seeded Dirichlet draw; the
    collision CPT is logistic in weather, velocity and lane changing, so
    snow and hail are clearly more dangerous than normal weather.
    """
    rng = np.random.default_rng(seed)
    schema = case_study_schema()
    cards = schema.cardinalities
    parents = [tuple(sorted(schema.index(p) for p in _GENERATOR_PARENTS.get(v.name, ())))
               for v in schema]
    tables = []
    for i, var in enumerate(schema):
        q = int(np.prod([cards[p] for p in parents[i]], dtype=np.int64))
        if var.name == "C":
            table = np.empty((q, 2))
            for j in range(q):
                states = np.unravel_index(j, [cards[p] for p in parents[i]])
                named = dict(zip((schema[p].name for p in parents[i]), states))
                logit = (_C_BASE + _C_WEATHER[named["WC"]] + _C_VELOCITY[named["V"]]
                         + _C_LANE_CHANGE[named["LCB"]])
                p = 1.0 / (1.0 + np.exp(-logit))
                table[j] = (1.0 - p, p)
        else:
            table = rng.dirichlet(np.full(cards[i], 0.8), size=q)
            table = np.clip(table, 1e-3, None)
        table = table / table.sum(axis=1, keepdims=True)
        tables.append(table)
    return BayesianNetwork.from_tables(schema, parents, tables)

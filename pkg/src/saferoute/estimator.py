"""scikit-learn style front end for K2 learning and collision inference."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .inference import COLLISION, eliminate_marginal
from .learn import DirichletPrior, K2Config, k2_search_with_scores, learn_parameters
from .network import Dataset, Schema, VariableSpec, check_records, log_likelihoods


def _as_schema(schema, X) -> Schema:
    if schema is not None:
        return schema
    # no schema: every column gets states 0..max (at least binary)
    cards = np.maximum(X.max(axis=0) + 1, 2) if X.size else np.full(X.shape[1], 2)
    return Schema(tuple(
        VariableSpec(f"x{i}", tuple(str(k) for k in range(int(c)))) for i, c in enumerate(cards)
    ))


class K2BayesianNetwork(BaseEstimator):
    """Discrete Bayesian network learned with K2 search and Dirichlet smoothing.

    Parameters
    ----------
    schema : Schema, optional
        Variable definitions; inferred from the data when omitted.
    ordering : sequence of int or str, optional
        Variable ordering for K2.  Defaults to schema order.
    max_parents : int
        Parent cap per node, clipped to n_features - 1.
    prior_counts : int
        N'_ijk pseudo-count used in the structure score (1 gives K2).
    alpha : float
        Dirichlet pseudo-count for the CPT estimates.
    target : str
        Variable returned by ``predict_proba``.

    Attributes
    ----------
    schema_, structure_, network_, node_scores_, n_features_in_
    """

    def __init__(self, schema=None, ordering=None, max_parents=3, prior_counts=1,
                 alpha=1.0, target=COLLISION):
        self.schema = schema
        self.ordering = ordering
        self.max_parents = max_parents
        self.prior_counts = prior_counts
        self.alpha = alpha
        self.target = target

    def _resolve_ordering(self, schema):
        if self.ordering is None:
            return None
        return tuple(schema.index(v) if isinstance(v, str) else int(v) for v in self.ordering)

    def fit(self, X, y=None):
        if isinstance(X, Dataset):
            dataset = X
        else:
            X = check_array(X, dtype=np.int64, ensure_min_samples=0)
            dataset = Dataset(_as_schema(self.schema, X), X)
        schema = dataset.schema
        max_parents = min(self.max_parents, len(schema) - 1)
        config = K2Config(self._resolve_ordering(schema), max_parents, self.prior_counts)
        self.structure_, self.node_scores_ = k2_search_with_scores(dataset, config)
        self.network_ = learn_parameters(dataset, self.structure_, DirichletPrior(self.alpha))
        self.schema_ = schema
        self.n_features_in_ = len(schema)
        return self

    def _records(self, X):
        check_is_fitted(self, "network_")
        if isinstance(X, Dataset):
            return X.records
        return check_records(self.schema_, check_array(X, dtype=np.int64, ensure_min_samples=0))

    def score_samples(self, X):
        """Log joint probability of each complete record."""
        records = self._records(X)
        return log_likelihoods(self.network_, records)

    def score(self, X, y=None):
        """Mean log-likelihood per record."""
        return float(np.mean(self.score_samples(X)))

    def predict_proba(self, X):
        """P(target | observed columns) per row.

        Negative entries mark unobserved variables; the target column is
        always ignored.
        """
        check_is_fitted(self, "network_")
        X = check_array(X, dtype=np.int64, ensure_min_samples=0)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        t = self.schema_.index(self.target)
        out = np.empty((X.shape[0], self.schema_[t].cardinality))
        cache = {}
        for r, row in enumerate(X):
            ev = tuple((i, int(v)) for i, v in enumerate(row) if v >= 0 and i != t)
            if ev not in cache:
                cache[ev] = eliminate_marginal(self.network_, t, dict(ev)).probabilities
            out[r] = cache[ev]
        return out

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

import itertools
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import joint_by_hand, random_network
from saferoute.errors import (
    MissingCollisionVariable,
    SchemaMismatch,
    StateSpaceTooLarge,
    ZeroEvidenceLikelihood,
)
from saferoute.inference import (
    collision_probability,
    eliminate_marginal,
    enumerate_marginal,
    evidence_from_labels,
    safety_probability,
)
from saferoute.network import BayesianNetwork, Schema, VariableSpec
from saferoute.simulate import case_study_generator


def test_chain_marginal_examples(chain_ab):
    # 0.3 * 0.9 + 0.7 * 0.2
    for fn in (enumerate_marginal, eliminate_marginal):
        m = fn(chain_ab, 1, {})
        assert m[1] == pytest.approx(0.41, abs=1e-12)
        # full ancestor instantiation returns the CPT row itself
        np.testing.assert_allclose(fn(chain_ab, 1, {0: 1}).probabilities, [0.1, 0.9], atol=1e-15)


def test_uniform_network_gives_uniform_marginals():
    schema = Schema((VariableSpec("A", ("a", "b", "c")), VariableSpec("B", ("x", "y"))))
    bn = BayesianNetwork.from_tables(schema, [(), (0,)], [[[1 / 3] * 3], [[0.5, 0.5]] * 3])
    for fn in (enumerate_marginal, eliminate_marginal):
        np.testing.assert_allclose(fn(bn, 0, {1: 1}).probabilities, [1 / 3] * 3, atol=1e-15)
        np.testing.assert_allclose(fn(bn, 1, {0: 2}).probabilities, [0.5, 0.5], atol=1e-15)


def test_all_but_query_observed_is_normalized_product():
    rng = np.random.default_rng(5)
    bn = random_network(rng, 5, max_card=3)
    cards = bn.schema.cardinalities
    ev = {i: int(rng.integers(0, cards[i])) for i in range(1, 5)}
    weights = []
    for k in range(cards[0]):
        full = [k] + [ev[i] for i in range(1, 5)]
        weights.append(joint_by_hand(bn, full))
    expected = np.array(weights) / sum(weights)
    np.testing.assert_allclose(eliminate_marginal(bn, 0, ev).probabilities, expected, atol=1e-12)


def test_zero_likelihood_evidence_raises():
    schema = Schema.binary(["A", "C"])
    bn = BayesianNetwork.from_tables(schema, [(), (0,)], [[[1.0, 0.0]], [[0.5, 0.5], [0.5, 0.5]]])
    for fn in (enumerate_marginal, eliminate_marginal):
        with pytest.raises(ZeroEvidenceLikelihood):
            fn(bn, 1, {0: 1})
    with pytest.raises(ZeroEvidenceLikelihood):
        collision_probability(bn, {0: 1})


def test_evidence_validation(chain_ab):
    with pytest.raises(SchemaMismatch):
        eliminate_marginal(chain_ab, 1, {1: 0})
    with pytest.raises(SchemaMismatch):
        eliminate_marginal(chain_ab, 1, {0: 2})
    with pytest.raises(SchemaMismatch):
        eliminate_marginal(chain_ab, 1, {5: 0})


def test_enumeration_cap():
    rng = np.random.default_rng(0)
    bn = random_network(rng, 6, max_card=2)
    with pytest.raises(StateSpaceTooLarge):
        enumerate_marginal(bn, 0, {}, cap=8)


def test_independent_collision_variable():
    schema = Schema((VariableSpec("WC", ("normal", "snow")), VariableSpec("C", ("none", "collision"))))
    bn = BayesianNetwork.from_tables(schema, [(), ()], [[[0.6, 0.4]], [[0.95, 0.05]]])
    for ev in ({}, {0: 0}, {0: 1}):
        assert collision_probability(bn, ev) == pytest.approx(0.05, abs=1e-15)
        assert safety_probability(bn, ev) == pytest.approx(0.95, abs=1e-15)


def test_missing_collision_variable(chain_ab):
    with pytest.raises(MissingCollisionVariable):
        collision_probability(chain_ab, {})


@pytest.mark.parametrize("p_c, p_s", [(0.05, 0.95), (0.0, 1.0), (1.0, 0.0)])
def test_safety_is_complement(p_c, p_s):
    schema = Schema((VariableSpec("C", ("none", "collision")),))
    bn = BayesianNetwork.from_tables(schema, [()], [[[1 - p_c, p_c]]])
    assert collision_probability(bn, {}) == pytest.approx(p_c, abs=1e-15)
    assert safety_probability(bn, {}) == pytest.approx(p_s, abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 1.0))
def test_safety_plus_collision_is_exactly_one(p):
    schema = Schema((VariableSpec("C", ("none", "collision")),))
    bn = BayesianNetwork.from_tables(schema, [()], [[[1.0 - p, p]]])
    assert safety_probability(bn, {}) + collision_probability(bn, {}) == 1.0


@pytest.mark.parametrize("seed", range(60))
def test_elimination_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    bn = random_network(rng, int(rng.integers(1, 9)))
    n = len(bn.schema)
    query = int(rng.integers(0, n))
    ev = {}
    for i in range(n):
        if i != query and rng.random() < 0.35:
            ev[i] = int(rng.integers(0, bn.schema.cardinalities[i]))
    a = eliminate_marginal(bn, query, ev).probabilities
    b = enumerate_marginal(bn, query, ev).probabilities
    assert np.max(np.abs(a - b)) < 1e-9
    assert a.sum() == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("seed", range(20))
def test_elimination_order_does_not_matter(seed):
    rng = np.random.default_rng(100 + seed)
    bn = random_network(rng, 7)
    query = 0
    ev = {6: 0}
    hidden = [1, 2, 3, 4, 5]
    base = eliminate_marginal(bn, query, ev).probabilities
    for _ in range(4):
        order = list(rng.permutation(hidden))
        np.testing.assert_allclose(
            eliminate_marginal(bn, query, ev, order=order).probabilities, base, rtol=0, atol=1e-9
        )


def test_disconnected_evidence_leaves_marginal_unchanged():
    # two components: {0, 1} and {2, 3}; evidence on one cannot move the other
    rng = np.random.default_rng(9)
    schema = Schema.binary(["A", "B", "X", "Y"])
    tables = [rng.dirichlet([1, 1], size=q) for q in (1, 2, 1, 2)]
    bn = BayesianNetwork.from_tables(schema, [(), (0,), (), (2,)], tables)
    prior = eliminate_marginal(bn, 1, {}).probabilities
    for ev in ({2: 0}, {3: 1}, {2: 1, 3: 0}):
        np.testing.assert_allclose(eliminate_marginal(bn, 1, ev).probabilities, prior, atol=1e-9)


def test_case_study_query_is_fast_and_exact():
    bn = case_study_generator()
    ev = evidence_from_labels(bn.schema, {"WC": "rain", "LC": "night"})
    c = bn.schema.index("C")
    eliminate_marginal(bn, c, ev)  # warm-up
    start = time.perf_counter()
    fast = eliminate_marginal(bn, c, ev)
    elapsed = time.perf_counter() - start
    assert elapsed < 0.1
    slow = enumerate_marginal(bn, c, ev, cap=2**22)
    np.testing.assert_allclose(fast.probabilities, slow.probabilities, atol=1e-9)


def test_case_study_prior_collision_matches_enumeration():
    bn = case_study_generator()
    c = bn.schema.index("C")
    p = collision_probability(bn, {})
    # query over C alone: enumerate over the ancestors of C only
    assert p == pytest.approx(enumerate_marginal(bn, c, {}, cap=2**23).probabilities[1], abs=1e-9)


def test_evidence_labels_conversion():
    bn = case_study_generator()
    ev = evidence_from_labels(bn.schema, {"WC": "snow", "TR": "highway"})
    assert ev == {bn.schema.index("WC"): 4, bn.schema.index("TR"): 0}
    with pytest.raises(SchemaMismatch):
        evidence_from_labels(bn.schema, {"WC": "tornado"})
    with pytest.raises(SchemaMismatch):
        evidence_from_labels(bn.schema, {"XX": "a"})


def test_chain_brute_force_by_hand(chain_ab):
    # explicit joint table sum as a second independent check
    totals = [0.0, 0.0]
    for a, b in itertools.product([0, 1], repeat=2):
        totals[b] += joint_by_hand(chain_ab, (a, b))
    assert eliminate_marginal(chain_ab, 1, {})[1] == pytest.approx(totals[1], abs=1e-15)

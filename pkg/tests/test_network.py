import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import joint_by_hand, random_network
from saferoute.errors import CyclicStructure, InvalidCpt, SchemaMismatch
from saferoute.network import (
    BayesianNetwork,
    Cpt,
    DagStructure,
    Schema,
    VariableSpec,
    case_study_schema,
    joint_probability,
    log_likelihoods,
    validate_dag,
)


def test_case_study_schema_matches_variable_table():
    schema = case_study_schema()
    assert schema.names == ("TR", "TRL", "RF", "WC", "RC", "LC", "W", "PD", "C",
                            "V", "VD", "LCB", "RZ")
    assert dict(zip(schema.names, schema.cardinalities)) == {
        "TR": 2, "TRL": 2, "RF": 8, "WC": 7, "RC": 5, "LC": 4, "W": 2,
        "PD": 6, "C": 2, "V": 3, "VD": 2, "LCB": 2, "RZ": 3,
    }
    assert schema[schema.index("C")].states == ("none", "collision")


@pytest.mark.parametrize("states", [("a",), ("a", "a")])
def test_variable_spec_rejects_bad_states(states):
    with pytest.raises(SchemaMismatch):
        VariableSpec("X", states)


def test_schema_rejects_duplicate_names():
    with pytest.raises(SchemaMismatch):
        Schema.binary(["A", "A"])


def test_validate_dag_examples():
    assert validate_dag(DagStructure.empty(3)) == [0, 1, 2]
    assert validate_dag(DagStructure(((), (0,), (1,)))) == [0, 1, 2]
    assert validate_dag(DagStructure(((2,), (), ()))) == [1, 2, 0]
    with pytest.raises(CyclicStructure) as info:
        validate_dag(DagStructure(((1,), (0,))))
    assert sorted(info.value.cycle) == [0, 1]


def test_cycle_report_is_a_real_cycle():
    parents = ((3,), (0,), (1,), (2,), (0,))
    with pytest.raises(CyclicStructure) as info:
        validate_dag(DagStructure(parents))
    cycle = info.value.cycle
    assert sorted(cycle) == [0, 1, 2, 3]
    for a, b in zip(cycle, cycle[1:] + cycle[:1]):
        assert a in parents[b]


def test_structure_rejects_self_and_duplicate_parents():
    with pytest.raises(SchemaMismatch):
        DagStructure(((0,),))
    with pytest.raises(SchemaMismatch):
        DagStructure(((), (0, 0)))


@st.composite
def dags(draw):
    n = draw(st.integers(1, 8))
    perm = draw(st.permutations(range(n)))
    parents = [set() for _ in range(n)]
    for a in range(n):
        for b in range(a + 1, n):
            if draw(st.booleans()):
                parents[perm[b]].add(perm[a])
    return n, perm, parents


@settings(max_examples=200, deadline=None)
@given(dags(), st.data())
def test_random_dags_sort_and_back_edges_fail(dag, data):
    n, perm, parents = dag
    order = validate_dag(DagStructure(tuple(tuple(p) for p in parents)))
    pos = {v: k for k, v in enumerate(order)}
    assert all(pos[p] < pos[i] for i in range(n) for p in parents[i])
    edges = [(p, i) for i in range(n) for p in parents[i]]
    if edges:
        p, c = data.draw(st.sampled_from(edges))
        cyclic = [set(s) for s in parents]
        cyclic[p].add(c)  # back edge closes a cycle through p -> c
        with pytest.raises(CyclicStructure):
            validate_dag(DagStructure(tuple(tuple(s) for s in cyclic)))


def test_cpt_row_sum_tolerance_is_enforced():
    Cpt(0, (), (), np.array([[0.5, 0.5 + 5e-13]]))
    with pytest.raises(InvalidCpt):
        Cpt(0, (), (), np.array([[0.5, 0.5 + 1e-11]]))
    with pytest.raises(InvalidCpt):
        Cpt(0, (), (), np.array([[1.5, -0.5]]))


def test_cpt_row_index_is_mixed_radix_lowest_parent_first():
    cpt = Cpt(3, (0, 2), (2, 3), np.full((6, 2), 0.5))
    assert cpt.row_index([0, 0]) == 0
    assert cpt.row_index([0, 2]) == 2
    assert cpt.row_index([1, 0]) == 3
    assert cpt.row_index([1, 2]) == 5


def test_cpt_is_read_only():
    cpt = Cpt(0, (), (), [[0.25, 0.75]])
    with pytest.raises(ValueError):
        cpt.table[0, 0] = 1.0


def test_network_checks_dimensions():
    schema = Schema.binary(["A", "B"])
    with pytest.raises(InvalidCpt):
        BayesianNetwork.from_tables(schema, [(), (0,)], [[[0.5, 0.5]], [[0.5, 0.5]]])
    with pytest.raises(CyclicStructure):
        BayesianNetwork.from_tables(
            schema, [(1,), (0,)], [[[0.5, 0.5]] * 2, [[0.5, 0.5]] * 2]
        )


def test_joint_uniform_and_chain(chain_ab):
    uniform = BayesianNetwork.from_tables(
        Schema.binary(["A", "B"]), [(), ()], [[[0.5, 0.5]], [[0.5, 0.5]]]
    )
    for a in itertools.product([0, 1], repeat=2):
        assert joint_probability(uniform, a) == pytest.approx(0.25, abs=1e-15)
    # 0.3 * 0.9
    assert joint_probability(chain_ab, [1, 1]) == pytest.approx(0.27, abs=1e-15)


def test_joint_zero_factor_gives_exact_zero():
    bn = BayesianNetwork.from_tables(Schema.binary(["A"]), [()], [[[1.0, 0.0]]])
    assert joint_probability(bn, [1]) == 0.0


def test_joint_rejects_bad_assignments(chain_ab):
    with pytest.raises(SchemaMismatch):
        joint_probability(chain_ab, [0])
    with pytest.raises(SchemaMismatch):
        joint_probability(chain_ab, [0, 2])


@pytest.mark.parametrize("seed", range(20))
def test_joint_normalizes_and_matches_hand_product(seed):
    rng = np.random.default_rng(seed)
    bn = random_network(rng, int(rng.integers(1, 7)), max_card=2)
    cards = bn.schema.cardinalities
    total = 0.0
    for a in itertools.product(*(range(c) for c in cards)):
        p = joint_probability(bn, a)
        assert p == pytest.approx(joint_by_hand(bn, a), rel=1e-12)
        total += p
    assert total == pytest.approx(1.0, abs=1e-9)


def test_joint_independent_of_factor_order():
    rng = np.random.default_rng(7)
    bn = random_network(rng, 6, max_card=3)
    records = rng.integers(0, 2, size=(50, 6))
    base = log_likelihoods(bn, records)
    for _ in range(5):
        perm = rng.permutation(6)
        manual = np.zeros(50)
        for i in perm:
            cpt = bn.cpts[i]
            rows = [cpt.row_index(r[list(cpt.parents)]) for r in records]
            manual += np.log(cpt.table[rows, records[:, i]])
        np.testing.assert_allclose(manual, base, rtol=0, atol=1e-12)


def test_json_round_trip_is_exact():
    rng = np.random.default_rng(3)
    bn = random_network(rng, 5)
    again = BayesianNetwork.from_json(bn.to_json())
    assert again.schema == bn.schema
    assert again.structure == bn.structure
    for a, b in zip(bn.cpts, again.cpts):
        assert np.array_equal(a.table, b.table)
    assert again.to_json() == bn.to_json()
    doc = bn.to_dict()
    assert set(doc) == {"schema", "parents", "cpts"}


def test_log_likelihood_matches_joint():
    rng = np.random.default_rng(11)
    bn = random_network(rng, 5, max_card=3)
    records = np.array([[int(rng.integers(0, c)) for c in bn.schema.cardinalities]
                        for _ in range(30)])
    ll = log_likelihoods(bn, records)
    for r, l in zip(records, ll):
        assert math.exp(l) == pytest.approx(joint_probability(bn, r), rel=1e-12)

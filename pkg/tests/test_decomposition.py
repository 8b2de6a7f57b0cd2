import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scamr.adaptivity import CriterionOutcome
from scamr.decomposition import (
    Decomposition,
    InteractionGraph,
    assemble_decomposition,
    build_interaction_graph,
    combined_eval,
    cut_evaluators,
    derive_groups,
)
from scamr.errors import ConfigError, MissingSubproblemError


def outcomes(n, edges, flat=()):
    active = [d for d in range(n) if d not in flat]
    return {
        p: CriterionOutcome.inclusive(1.0 if p in edges else 0.0, 0.5)
        for p in itertools.combinations(active, 2)
    }


def test_graph_validation():
    with pytest.raises(ValueError):
        InteractionGraph(3, frozenset({(0, 0)}))
    with pytest.raises(ValueError):
        InteractionGraph(3, frozenset({(0, 3)}))
    with pytest.raises(ValueError):
        InteractionGraph(3, frozenset({(0, 1)}), frozenset({1}))
    g = InteractionGraph(3, frozenset({(2, 1)}))
    assert g.edges == {(1, 2)}


def test_build_graph_examples():
    assert build_interaction_graph(outcomes(4, set()), (), 4).edges == frozenset()
    worked = {(0, 1), (1, 2), (0, 2), (0, 3)}
    g = build_interaction_graph(outcomes(5, worked), (), 5)
    assert g.edges == worked
    full = build_interaction_graph(outcomes(3, {(0, 1), (0, 2), (1, 2)}), (), 3)
    assert len(full.edges) == 3
    partial = outcomes(3, set())
    del partial[(0, 2)]
    with pytest.raises(KeyError):
        build_interaction_graph(partial, (), 3)


def test_derive_groups_examples():
    worked = InteractionGraph(5, frozenset({(0, 1), (1, 2), (0, 2), (0, 3)}))
    assert derive_groups(worked) == [(0, 1, 2), (0, 3), (4,)]
    assert derive_groups(InteractionGraph(4)) == [(0,), (1,), (2,), (3,)]
    tri = InteractionGraph(3, frozenset({(0, 1), (0, 2), (1, 2)}))
    assert derive_groups(tri) == [(0, 1, 2)]
    flat = InteractionGraph(4, frozenset({(0, 1)}), frozenset({3}))
    assert derive_groups(flat) == [(3,), (0, 1), (2,)]


def test_four_cycle_gives_edge_cliques():
    cyc = InteractionGraph(4, frozenset({(0, 1), (1, 2), (2, 3), (0, 3)}))
    assert derive_groups(cyc) == [(0, 1), (0, 3), (1, 2), (2, 3)]


def test_clique_budget_falls_back_to_components():
    cyc = InteractionGraph(4, frozenset({(0, 1), (1, 2), (2, 3), (0, 3)}))
    assert derive_groups(cyc, max_cliques=3) == [(0, 1, 2, 3)]
    assert derive_groups(cyc, max_vertices=3) == [(0, 1, 2, 3)]


def test_assemble_worked_example():
    # 0-based form of S = {{6},{7},{8},{1,2,3},{1,4},{5}}
    S = [(5,), (6,), (7,), (0, 1, 2), (0, 3), (4,)]
    d = assemble_decomposition(S, 1.0, np.full(8, 0.5))
    assert d.T == [(0,)] and d.U == [1] and d.V == 4


def test_assemble_disjoint_and_triangle():
    d = assemble_decomposition([(0, 1), (2,), (3, 4)], 0.0, np.zeros(5))
    assert d.T == [] and d.U == [] and d.V == 2
    d = assemble_decomposition([(0, 1), (1, 2), (0, 2)], 0.0, np.zeros(3))
    assert d.T == [(0,), (1,), (2,)] and d.U == [1, 1, 1] and d.V == -1


def test_assemble_errors():
    with pytest.raises(ConfigError):
        assemble_decomposition([(0,), (2,)], 0.0, np.zeros(3))
    with pytest.raises(ConfigError):
        assemble_decomposition([(0,), ()], 0.0, np.zeros(1))
    with pytest.raises(ValueError):
        Decomposition([(0,), (1,)], [], [], 5, 0.0, np.zeros(2))


def test_serialization_roundtrip():
    d = assemble_decomposition([(0, 1), (1, 2), (0, 2)], 0.25, [0.5, 0.5, 0.5])
    e = Decomposition.from_dict(d.to_dict())
    assert (e.S, e.T, e.U, e.V, e.f0) == (d.S, d.T, d.U, d.V, d.f0)
    np.testing.assert_array_equal(e.cut_center, d.cut_center)


def synthetic8(x):
    x = np.atleast_2d(x)
    return (x[:, 0] * x[:, 1] * x[:, 2] + x[:, 0] * x[:, 3] + np.sin(x[:, 4]) + x[:, 5]
            + x[:, 6] ** 2 + np.exp(x[:, 7]))


def test_combined_eval_examples(rng):
    S = [(5,), (6,), (7,), (0, 1, 2), (0, 3), (4,)]
    d = assemble_decomposition(S, 0.0, np.full(8, 0.5))
    d.f0 = float(synthetic8(d.cut_center)[0])
    ev = cut_evaluators(lambda x: float(synthetic8(x)[0]), d)
    X = rng.random((100, 8))
    np.testing.assert_allclose(combined_eval(d, ev, X), synthetic8(X), atol=1e-12)
    # additive model at the cut center gives f0
    add = assemble_decomposition([(k,) for k in range(3)], 0.0, np.zeros(3))
    f = lambda x: float(np.sum(np.cos(x)))
    add.f0 = f(np.zeros(3))
    assert combined_eval(add, cut_evaluators(f, add), np.zeros(3)) == pytest.approx(add.f0)
    with pytest.raises(MissingSubproblemError):
        combined_eval(d, {}, X[0])


def test_combined_eval_triangle(rng):
    f = lambda x: x[0] * x[1] + x[1] * x[2] + x[0] * x[2]
    d = assemble_decomposition([(0, 1), (1, 2), (0, 2)], 0.0, np.array([0.3, -0.2, 0.7]))
    d.f0 = f(d.cut_center)
    ev = cut_evaluators(f, d)
    X = rng.uniform(-1, 1, (100, 3))
    np.testing.assert_allclose(combined_eval(d, ev, X), [f(x) for x in X], atol=1e-12)


@st.composite
def structures(draw):
    n = draw(st.integers(1, 8))
    k = draw(st.integers(1, 5))
    groups = [
        tuple(sorted(draw(st.sets(st.integers(0, n - 1), min_size=1, max_size=min(n, 4)))))
        for _ in range(k)
    ]
    covered = {d for g in groups for d in g}
    groups += [(d,) for d in range(n) if d not in covered]
    seed = draw(st.integers(0, 2**31))
    return n, groups, seed


@given(structures())
def test_recombination_exactness(structure):
    n, groups, seed = structure
    rng = np.random.default_rng(seed)
    terms = [(g, rng.uniform(-2, 2), rng.integers(1, 3, len(g))) for g in groups]

    def f(x):
        x = np.atleast_2d(x)
        out = np.zeros(x.shape[0])
        for g, a, powers in terms:
            out += a * np.prod(np.sin(x[:, list(g)] * powers + 0.3), axis=1)
        return out

    d = assemble_decomposition(groups, 0.0, rng.uniform(-1, 1, n))
    d.f0 = float(f(d.cut_center)[0])
    assert {dim for s in d.S for dim in s} == set(range(n))
    assert d.V == len(d.S) - sum(d.U) - 1
    for t in d.T:
        assert sum(1 for s in d.S if set(t) <= set(s)) >= 2
    ev = cut_evaluators(lambda x: float(f(x)[0]), d)
    X = rng.uniform(-1, 1, (1000, n))
    np.testing.assert_allclose(combined_eval(d, ev, X), f(X), atol=1e-12)


@given(structures())
def test_idempotence(structure):
    n, groups, _ = structure
    a = assemble_decomposition(groups, 1.0, np.zeros(n))
    b = assemble_decomposition(groups, 1.0, np.zeros(n))
    assert (a.S, a.T, a.U, a.V) == (b.S, b.T, b.U, b.V)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from groupcart.errors import UsageError
from groupcart.moo import (
    MAXIMIZE,
    MINIMIZE,
    Candidate,
    ObjectiveSpec,
    binary_dominates,
    cdom_loss,
    continuous_dominates,
    d2h,
    domination_matrix,
    nd_sort,
    to_minimization,
)

ACC = ObjectiveSpec("accuracy", MAXIMIZE, 1.0)
F1 = ObjectiveSpec("f1", MAXIMIZE, 1.0)
AOD = ObjectiveSpec("aod", MINIMIZE, 0.0)
DI = ObjectiveSpec("di", MINIMIZE, 0.0)


def test_to_minimization():
    assert to_minimization([1.0], [F1]).tolist() == [0.0]
    assert to_minimization([0.13], [AOD]).tolist() == [0.13]
    assert to_minimization([0.84], [ACC])[0] == pytest.approx(0.16)
    with pytest.raises(UsageError):
        to_minimization([0.1, 0.2], [ACC])


def test_binary_examples():
    assert binary_dominates((0.1, 0.1), (0.2, 0.2))
    assert not binary_dominates((0.1, 0.3), (0.3, 0.1))
    assert not binary_dominates((0.3, 0.1), (0.1, 0.3))
    assert not binary_dominates((0.2, 0.2), (0.2, 0.2))
    with pytest.raises(UsageError):
        binary_dominates((0.1,), (0.1, 0.2))


def test_cdom_examples():
    assert cdom_loss((0.3, 0.7), (0.3, 0.7)) == -1.0
    assert cdom_loss((0.0,), (1.0,)) == pytest.approx(-math.e, abs=1e-9)
    assert cdom_loss((1.0,), (0.0,)) == pytest.approx(-1 / math.e, abs=1e-9)
    assert continuous_dominates((0.0,), (1.0,))
    ab, ba = cdom_loss((0, 1), (1, 0)), cdom_loss((1, 0), (0, 1))
    assert ab == ba
    assert ab == pytest.approx(-(math.e + 1 / math.e) / 2, abs=1e-12)
    assert not continuous_dominates((0, 1), (1, 0)) and not continuous_dominates((1, 0), (0, 1))


def test_nd_sort_examples():
    only = [Candidate("x", (0.5, 0.5))]
    assert nd_sort(only) == only
    pool = [Candidate(0, (0.1, 0.1)), Candidate(1, (0.2, 0.2)), Candidate(2, (0.1, 0.3))]
    assert [c.id for c in nd_sort(pool)] == [0]
    with pytest.raises(UsageError):
        nd_sort([])


def random_pool(rng, size, k):
    # coarse grid so that ties and duplicates occur
    levels = rng.integers(2, 12)
    return rng.integers(0, levels, size=(size, k)) / levels


@pytest.mark.parametrize("seed", range(20))
def test_nd_sort_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    m = random_pool(rng, 20, 4)
    pool = [Candidate(i, tuple(v)) for i, v in enumerate(m)]
    assert [c.id for c in nd_sort(pool)] == oracles.brute_force_frontier(m.tolist())


vec = st.lists(st.floats(0, 1), min_size=3, max_size=3)


@settings(max_examples=200, deadline=None)
@given(vec, vec, vec)
def test_binary_order_properties(a, b, c):
    assert not (binary_dominates(a, b) and binary_dominates(b, a))
    if binary_dominates(a, b) and binary_dominates(b, c):
        assert binary_dominates(a, c)


@settings(max_examples=200, deadline=None)
@given(vec, vec)
def test_cdom_trichotomy(a, b):
    ab, ba = cdom_loss(a, b), cdom_loss(b, a)
    outcomes = [continuous_dominates(a, b), continuous_dominates(b, a), ab == ba]
    assert sum(outcomes) == 1


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 40), st.integers(2, 4), st.floats(0.01, 100))
def test_binary_frontier_scale_invariance(seed, size, k, factor):
    rng = np.random.default_rng(seed)
    m = random_pool(rng, size, k)
    j = int(rng.integers(0, k))
    scaled = m.copy()
    scaled[:, j] *= factor
    ids = lambda mat: [c.id for c in nd_sort([Candidate(i, tuple(v)) for i, v in enumerate(mat)])]
    assert ids(m) == ids(scaled)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 30), st.sampled_from(["binary", "continuous"]))
def test_frontier_non_empty_and_input_order(seed, size, mode):
    rng = np.random.default_rng(seed)
    m = rng.random((size, 3))
    pool = [Candidate(i, tuple(v)) for i, v in enumerate(m)]
    before = list(pool)
    ids = [c.id for c in nd_sort(pool, mode)]
    assert ids and ids == sorted(ids)
    assert pool == before


def test_continuous_matrix_matches_pairwise():
    rng = np.random.default_rng(3)
    m = rng.random((15, 4))
    z = (m - m.min(0)) / (m.max(0) - m.min(0))
    D = domination_matrix(m, "continuous")
    for i in range(15):
        for j in range(15):
            assert D[i, j] == continuous_dominates(z[i], z[j])


def test_continuous_all_mutually_tied_survive():
    pool = [Candidate(0, (0.0, 1.0)), Candidate(1, (1.0, 0.0))]
    assert [c.id for c in nd_sort(pool, "continuous")] == [0, 1]


def test_d2h_examples():
    assert d2h([1.0, 1.0, 0.0, 0.0], [ACC, F1, AOD, DI]) == 0.0
    assert d2h([0.0, 1.0], [ACC, AOD]) == pytest.approx(math.sqrt(2))
    assert d2h([0.8, 0.6, 0.1, 0.3], [ACC, F1, AOD, DI]) == pytest.approx(math.sqrt(0.30), abs=1e-12)

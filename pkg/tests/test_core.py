import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from noisylab.core import (
    argmax_class,
    entropy,
    grid_size,
    make_rng,
    one_hot,
    prob_vector,
    random_simplex,
    simplex_grid,
    simplex_grid_array,
    split_rng,
)
from strategies import simplex_points


def test_prob_vector_validates_and_freezes():
    p = prob_vector([0.25, 0.75])
    assert not p.flags.writeable
    assert p.sum() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        prob_vector([1.0])
    with pytest.raises(ValueError):
        prob_vector([0.6, 0.6])
    with pytest.raises(ValueError):
        prob_vector([1.2, -0.2])
    with pytest.raises(ValueError):
        prob_vector([np.nan, 1.0])


def test_prob_vector_renormalizes_within_tolerance():
    p = prob_vector([0.5 + 4e-10, 0.5])
    assert p.sum() == 1.0


def test_entropy_examples(oracles):
    assert entropy([0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-12)
    assert entropy([1.0, 0.0]) == 0.0
    assert entropy([0.68, 0.32]) == pytest.approx(oracles["entropy_068_032"], abs=1e-5)


def test_argmax_class_tie_break():
    assert argmax_class([0.2, 0.8]) == 2
    assert argmax_class([0.5, 0.5]) == 1
    assert argmax_class([0.3, 0.4, 0.3]) == 2
    assert argmax_class([0.2, 0.4, 0.4]) == 2


def test_simplex_grid_small_cases(oracles):
    pts = [tuple(p) for p in simplex_grid(2, 0.5)]
    assert sorted(pts) == [(0.0, 1.0), (0.5, 0.5), (1.0, 0.0)]
    assert sum(1 for _ in simplex_grid(2, 0.001)) == oracles["grid_count_k2_step0001"]
    assert len(list(simplex_grid(3, 0.5))) == oracles["grid_count_k3_step05"]
    assert grid_size(3, 0.5) == 6


@pytest.mark.parametrize("k,step", [(2, 0.1), (3, 0.25), (4, 0.2), (3, 0.05)])
def test_grid_generator_and_array_agree(k, step):
    a = np.array(list(simplex_grid(k, step)))
    b = simplex_grid_array(k, step)
    assert a.shape == b.shape == (grid_size(k, step), k)
    assert np.allclose(a, b)
    assert np.allclose(b.sum(axis=1), 1.0)
    # every vertex is present
    for y in range(1, k + 1):
        assert np.any(np.all(np.isclose(b, one_hot(y, k)), axis=1))


@pytest.mark.parametrize("step", [0.3, 0.0, 0.7, -0.1])
def test_grid_rejects_bad_steps(step):
    with pytest.raises(ValueError):
        list(simplex_grid(2, step))


def test_random_simplex_deterministic_and_unbiased():
    a = random_simplex(2, make_rng(3))
    b = random_simplex(2, make_rng(3))
    assert np.array_equal(a, b)
    rng = make_rng(11)
    first = np.array([random_simplex(2, rng)[0] for _ in range(10_000)])
    assert abs(first.mean() - 0.5) <= 0.02


def test_split_rng_streams_are_independent_and_reproducible():
    a1, a2 = split_rng(make_rng(5), 2)
    b1, _ = split_rng(make_rng(5), 2)
    assert a1.random() == b1.random()
    assert make_rng(5).random() != a2.random()


@given(simplex_points(), st.integers(min_value=0, max_value=2**31))
def test_entropy_bounded_and_maximal_at_uniform(p, seed):
    k = p.size
    h = entropy(p)
    assert -1e-12 <= h <= math.log(k) + 1e-12
    dist = np.abs(p - 1 / k).max()
    if dist > 1e-3:
        assert h < math.log(k) - 1e-9


@given(simplex_points(k=3), simplex_points(k=3), st.floats(min_value=0.01, max_value=0.99))
def test_entropy_concave(p, q, lam):
    mix = lam * p + (1 - lam) * q
    assert entropy(mix / mix.sum()) >= lam * entropy(p) + (1 - lam) * entropy(q) - 1e-12


@given(simplex_points())
def test_argmax_invariant_under_monotone_maps(p):
    transformed = np.exp(3 * p) + p ** 3
    assert argmax_class(p) == int(np.argmax(transformed)) + 1

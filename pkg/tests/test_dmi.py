import numpy as np
import pytest

from noisylab.core import make_rng
from noisylab.dmi import (
    dmi_joint,
    dmi_population_loss,
    dmi_population_minimizer,
    noise_offsets,
    symmetric_noise_offset,
    vertex_search,
)
from noisylab.noise import NoiseModel
from noisylab.problem import DiscreteProblem, random_problem


def test_population_loss_examples(oracles):
    assert dmi_population_loss([[0.4, 0.1], [0.1, 0.4]]) == pytest.approx(oracles["dmi_loss_04_01"], abs=1e-12)
    assert dmi_population_loss([[0.25, 0.25], [0.25, 0.25]]) == float("inf")
    assert dmi_population_loss([[0.5, 0], [0, 0.5]]) == pytest.approx(oracles["dmi_loss_diag"], abs=1e-12)
    with pytest.raises(ValueError):
        dmi_population_loss([[0.5, 0.5]])
    with pytest.raises(ValueError):
        dmi_population_loss([[0.6, 0.1], [0.1, 0.4]])


def test_minimizer_examples(oracles):
    balanced = DiscreteProblem.build([0.5, 0.5], [[0.8, 0.2], [0.3, 0.7]])
    assert np.array_equal(dmi_population_minimizer(balanced).f[:, 0], [1, 0])
    skewed = DiscreteProblem.build([0.5, 0.5], [[0.75, 0.25], [0.65, 0.35]])
    m = dmi_population_minimizer(skewed)
    assert m.prior == pytest.approx(oracles["dmi_prior"])
    assert m.f[:, 0].tolist() in oracles["dmi_prior_argmax_tables"]
    assert np.array_equal(m.f[:, 0], [1, 0]) and not m.degenerate
    flat = DiscreteProblem.build([0.5, 0.5], [[0.6, 0.4], [0.6, 0.4]])
    assert dmi_population_minimizer(flat).degenerate


def test_minimizer_matches_vertex_search():
    rng = make_rng(21)
    for _ in range(30):
        problem = random_problem(rng, 2, int(rng.integers(2, 6)))
        closed = dmi_population_minimizer(problem)
        if closed.degenerate:
            continue
        _, tables = vertex_search(problem)
        assert any(np.array_equal(closed.f, t) for t in tables)


def test_noisy_joint_is_clean_joint_times_transition():
    rng = make_rng(5)
    problem = random_problem(rng, 2, 4)
    noise = NoiseModel.symmetric(0.3, 2)
    f = np.column_stack([u := rng.uniform(size=4), 1 - u])
    T = np.array([[0.7, 0.3], [0.3, 0.7]])
    assert np.allclose(dmi_joint(problem, f, noise), dmi_joint(problem, f) @ T, atol=1e-14)


@pytest.mark.parametrize("omega", [0.1, 0.3])
def test_noise_offset_is_constant(omega):
    rng = make_rng(6)
    problem = random_problem(rng, 2, 4)
    noise = NoiseModel.symmetric(omega, 2)
    tables = [np.column_stack([u, 1 - u]) for u in rng.uniform(size=(12, 4))]
    offs = noise_offsets(problem, noise, tables)
    assert np.allclose(offs, symmetric_noise_offset(noise), atol=1e-9)
    assert symmetric_noise_offset(noise) == pytest.approx(-np.log(1 - 2 * omega))


def test_tabular_noise_has_no_constant_offset():
    with pytest.raises(ValueError):
        symmetric_noise_offset(NoiseModel.tabular({"x1": 0.1}, 2))

"""Hypothesis strategies for simplex points, noise levels and discrete problems."""
import numpy as np
from hypothesis import strategies as st

from noisylab.noise import omega_bound
from noisylab.problem import DiscreteProblem

ks = st.integers(min_value=2, max_value=5)


@st.composite
def simplex_points(draw, k=None, min_mass=0.0):
    k = draw(ks) if k is None else k
    raw = draw(st.lists(st.floats(min_value=1e-3, max_value=1.0), min_size=k, max_size=k))
    p = np.array(raw) / np.sum(raw)
    if min_mass:
        p = (p + min_mass) / (1 + k * min_mass)
    return p


@st.composite
def omegas(draw, k, positive=False):
    lo = 1e-3 if positive else 0.0
    return draw(st.floats(min_value=lo, max_value=omega_bound(k) * 0.999))


@st.composite
def problems(draw, k=None, n_min=1, n_max=5):
    k = draw(ks) if k is None else k
    n = draw(st.integers(min_value=n_min, max_value=n_max))
    mu = draw(simplex_points(k=n)) if n > 1 else np.ones(1)
    g = np.vstack([draw(simplex_points(k=k)) for _ in range(n)])
    return DiscreteProblem.build(mu, g)

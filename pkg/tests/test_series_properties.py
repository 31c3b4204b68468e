"""Property tests for the series algebra invariants."""

import numpy as np
from hypothesis import given, settings, strategies as st

from kamtori.series import FTSeries, poisson

N = 2
KMAX = 3


@st.composite
def ft_series(draw, dmax=2, real_valued=True):
    terms = draw(st.lists(
        st.tuples(
            st.tuples(st.integers(-KMAX, KMAX), st.integers(-KMAX, KMAX)),
            st.tuples(st.integers(0, dmax), st.integers(0, dmax)),
            st.complex_numbers(max_magnitude=2.0, allow_nan=False,
                               allow_infinity=False)),
        min_size=1, max_size=6))
    d = {}
    for k, a, c in terms:
        if sum(a) > dmax:
            continue
        d[(k, a)] = d.get((k, a), 0) + c
        if real_valued:
            mk = tuple(-v for v in k)
            d[(mk, a)] = d.get((mk, a), 0) + np.conj(c)
    return FTSeries(N, d, real_valued=real_valued)


def coeff_close(f, g, rtol, scale=None):
    keys = set(dict(f.items())) | set(dict(g.items()))
    if scale is None:
        scale = max(f.max_abs_coeff(), g.max_abs_coeff(), 1e-30)
    return all(abs(f.coefficient(*k) - g.coefficient(*k)) <= rtol * scale
               for k in keys)


@settings(max_examples=60, deadline=None)
@given(ft_series(), ft_series())
def test_leibniz_rule(f, g):
    for j in range(N):
        lhs = f.mul(g, k_max=16, d_max=8).dx(j)
        rhs = f.dx(j).mul(g, k_max=16, d_max=8) \
            + f.mul(g.dx(j), k_max=16, d_max=8)
        assert coeff_close(lhs, rhs, 1e-12,
                           scale=max(lhs.max_abs_coeff(), 1e-30))


@settings(max_examples=60, deadline=None)
@given(ft_series(), ft_series())
def test_poisson_antisymmetry(f, g):
    a = poisson(f, g, k_max=16, d_max=8)
    b = poisson(g, f, k_max=16, d_max=8)
    scale = max(a.max_abs_coeff(), 1e-30)
    assert coeff_close(a, b.scale(-1.0), 1e-12, scale=scale)


@settings(max_examples=60, deadline=None)
@given(ft_series(), ft_series())
def test_majorant_submultiplicative(f, g):
    p = f.mul(g, k_max=16, d_max=8)
    rho, sig = 0.3, 0.4
    assert p.majorant(rho, sig) <= f.majorant(rho, sig) \
        * g.majorant(rho, sig) + p.trunc_loss * np.exp(rho * 4 * KMAX) \
        + 1e-9


@settings(max_examples=60, deadline=None)
@given(ft_series())
def test_majorant_monotone(f):
    assert f.majorant(0.1, 0.2) <= f.majorant(0.5, 0.2) + 1e-15
    assert f.majorant(0.1, 0.2) <= f.majorant(0.1, 0.9) + 1e-15
    assert f.majorant_tight(0.4, 0.3) <= f.majorant(0.4, 0.3) + 1e-15


@settings(max_examples=40, deadline=None)
@given(ft_series(), ft_series())
def test_hermitian_flag_survives_pipeline(f, g):
    out = poisson(f.mul(g, k_max=16, d_max=8), f, k_max=16, d_max=8)
    assert out.real_valued
    x = np.array([0.7, -1.3])
    y = np.array([0.2, 0.1])
    v = out.eval(x, y)
    assert abs(v.imag) <= 1e-12 * max(1.0, out.majorant(0.0, 0.3))


@settings(max_examples=40, deadline=None)
@given(ft_series(real_valued=False))
def test_eval_matches_brute_force(f):
    x = np.array([0.31, 2.7])
    y = np.array([0.4, -0.2])
    direct = 0.0 + 0.0j
    for (k, a), c in f.items():
        term = c * np.exp(1j * (k[0] * x[0] + k[1] * x[1]))
        term *= y[0] ** a[0] * y[1] ** a[1]
        direct += term
    assert abs(f.eval(x, y) - direct) <= 1e-13 * max(1.0, abs(direct))

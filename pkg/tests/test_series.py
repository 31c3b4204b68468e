import json
import math

import numpy as np
import pytest

from kamtori.series import (
    FTSeries,
    DimensionMismatch,
    cauchy_bound,
    cubic_tail_bound,
    poisson,
    torus_sup_sample,
)

PHI = (math.sqrt(5.0) - 1.0) / 2.0


def brute_force_eval(f, x, y):
    """Independent oracle: plain double sum over stored coefficients."""
    tot = 0.0 + 0.0j
    for (k, a), c in f.items():
        term = c * np.exp(1j * sum(kk * xx for kk, xx in zip(k, x)))
        for aj, yj in zip(a, y):
            term *= yj ** aj
        tot += term
    return tot


def rand_series(rng, n=2, kmax=3, dmax=2, terms=8, real_valued=True):
    d = {}
    z = (0,) * n
    for _ in range(terms):
        k = tuple(int(v) for v in rng.integers(-kmax, kmax + 1, size=n))
        alpha = [0] * n
        for _ in range(int(rng.integers(0, dmax + 1))):
            alpha[int(rng.integers(0, n))] += 1
        c = complex(rng.normal(), rng.normal())
        d[(k, tuple(alpha))] = d.get((k, tuple(alpha)), 0) + c
    if real_valued:
        sym = {}
        for (k, a), c in d.items():
            mk = tuple(-v for v in k)
            sym[(k, a)] = sym.get((k, a), 0) + 0.5 * c
            sym[(mk, a)] = sym.get((mk, a), 0) + 0.5 * np.conj(c)
        d = sym
    return FTSeries(n, d, real_valued=real_valued)


class TestEval:
    def test_constant(self):
        f = FTSeries.constant(2, 5.0)
        assert f.eval(np.array([0.3, -1.2]), np.array([0.1, 0.2])) == 5.0

    def test_cos_at_zero(self):
        f = FTSeries.cosine(2, (1, 0))
        assert f.eval(np.zeros(2), np.zeros(2)) == pytest.approx(1.0)

    def test_linear_form(self):
        omega = np.array([1.0, PHI])
        f = FTSeries.y_linear(2, omega)
        v = f.eval(np.array([0.7, 0.1]), np.array([1.0, 1.0]))
        assert v == pytest.approx(1.0 + PHI, abs=1e-15)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            f = rand_series(rng, real_valued=False)
            x = rng.normal(size=2) + 1j * 0.1 * rng.normal(size=2)
            y = rng.normal(size=2) * 0.5
            a = f.eval(x, y)
            b = brute_force_eval(f, x, y)
            assert abs(a - b) <= 1e-13 * max(1.0, abs(b))

    def test_real_points_stay_real(self):
        rng = np.random.default_rng(8)
        f = rand_series(rng, real_valued=True)
        x = rng.normal(size=2)
        y = rng.normal(size=2)
        v = f.eval(x, y)
        assert abs(v.imag) <= 1e-12 * max(f.majorant(0.0, 2.0), 1.0)


class TestMul:
    def test_cos_squared(self):
        c = FTSeries.cosine(2, (1, 0))
        p = c.mul(c)
        # cos^2 = 1/2 + 1/2 cos(2 x1)
        assert p.coefficient((0, 0), (0, 0)) == pytest.approx(0.5)
        assert p.coefficient((2, 0), (0, 0)) == pytest.approx(0.25)
        assert p.coefficient((-2, 0), (0, 0)) == pytest.approx(0.25)

    def test_identity_element(self):
        rng = np.random.default_rng(3)
        f = rand_series(rng)
        one = FTSeries.constant(2, 1.0)
        g = f.mul(one)
        for key, c in f.items():
            assert g.coefficient(*key) == pytest.approx(c)
        assert len(g) == len(f)

    def test_y_monomial_degree(self):
        y1 = FTSeries.y_monomial(2, (1, 0))
        sq = y1.mul(y1)
        assert sq.D == 2
        assert sq.coefficient((0, 0), (2, 0)) == pytest.approx(1.0)

    def test_dimension_mismatch(self):
        f = FTSeries.constant(2, 1.0)
        g = FTSeries.constant(3, 1.0)
        with pytest.raises(DimensionMismatch):
            f.mul(g)

    def test_truncation_loss_reported(self):
        f = FTSeries.cosine(2, (1, 0))
        g = FTSeries.cosine(2, (1, 0))
        p = f.mul(g, k_max=1)
        # the (+-2, 0) output modes are dropped: two coefficients of 1/4
        assert p.trunc_loss == pytest.approx(0.5)
        assert p.coefficient((2, 0), (0, 0)) == 0.0

    def test_fft_path_matches_dict_path(self):
        rng = np.random.default_rng(11)
        f = rand_series(rng, kmax=4, terms=30)
        g = rand_series(rng, kmax=4, terms=30)
        import kamtori.series as S
        exact = f.mul(g, k_max=16, d_max=8)
        fft = S._mul_fft(f, g, 16, 8, True)
        keys = set(dict(exact.items())) | set(dict(fft.items()))
        scale = max(exact.max_abs_coeff(), 1e-30)
        for key in keys:
            assert abs(exact.coefficient(*key) - fft.coefficient(*key)) \
                <= 1e-13 * scale


class TestCalculus:
    def test_dx_sin_gives_cos(self):
        s = FTSeries.sine(2, (1, 0))
        c = s.dx(0)
        ref = FTSeries.cosine(2, (1, 0))
        for key, v in ref.items():
            assert c.coefficient(*key) == pytest.approx(v)

    def test_dy_quadratic(self):
        # 1/2 <y E y> = 1/2 (y1^2 + y2^2); d/dy1 -> y1
        f = FTSeries.from_terms(
            2, [((0, 0), (2, 0), 0.5), ((0, 0), (0, 2), 0.5)],
            real_valued=True)
        g = f.dy(0)
        assert g.coefficient((0, 0), (1, 0)) == pytest.approx(1.0)
        assert len(g) == 1

    def test_dx_constant_is_zero(self):
        f = FTSeries.constant(2, 4.2)
        assert f.dx(1).is_zero

    def test_mean_of_cos_vanishes(self):
        assert FTSeries.cosine(2, (1, 0)).mean_x().is_zero

    def test_mean_keeps_constant(self):
        f = FTSeries.constant(2, 3.0) + FTSeries.sine(2, (0, 1))
        m = f.mean_x()
        assert m.coefficient((0, 0), (0, 0)) == pytest.approx(3.0)
        assert len(m) == 1

    def test_mean_of_derivative_vanishes(self):
        rng = np.random.default_rng(5)
        u = rand_series(rng, dmax=0)
        assert u.dx(0).mean_x().is_zero

    def test_spectral_vs_finite_difference(self):
        rng = np.random.default_rng(13)
        f = rand_series(rng, kmax=2, dmax=2, terms=6)
        x = rng.normal(size=2)
        y = 0.3 * rng.normal(size=2)
        h = 1e-5
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            fd = (f.eval(x + e, y) - f.eval(x - e, y)) / (2 * h)
            assert abs(f.dx(j).eval(x, y) - fd) <= 1e-8
            fd = (f.eval(x, y + e) - f.eval(x, y - e)) / (2 * h)
            assert abs(f.dy(j).eval(x, y) - fd) <= 1e-8


class TestPoisson:
    def test_sin_x1_with_y1(self):
        f = FTSeries.sine(2, (1, 0))
        g = FTSeries.y_monomial(2, (1, 0))
        b = poisson(f, g)
        ref = FTSeries.cosine(2, (1, 0))
        for key, v in ref.items():
            assert b.coefficient(*key) == pytest.approx(v)

    def test_self_bracket_vanishes(self):
        rng = np.random.default_rng(17)
        f = rand_series(rng, dmax=2)
        b = poisson(f, f)
        assert b.majorant(0.0, 1.0) <= 1e-12 * max(
            1.0, f.majorant(0.0, 1.0) ** 2)

    def test_omega_y_with_x_series(self):
        omega = np.array([1.0, PHI])
        h = FTSeries.y_linear(2, omega)
        u = FTSeries.cosine(2, (1, 1))
        b = poisson(h, u)
        # {<omega,y>, U(x)} = -<U_x, omega>
        ref = FTSeries.zero(2)
        for j in range(2):
            ref = ref - u.dx(j) * omega[j]
        for key, v in ref.items():
            assert b.coefficient(*key) == pytest.approx(v)


class TestMajorant:
    def test_constant(self):
        assert FTSeries.constant(2, 5.0).majorant(2.0, 3.0) == 5.0

    def test_cos_at_zero_width(self):
        assert FTSeries.cosine(2, (1, 0)).majorant(0.0, 0.0) == \
            pytest.approx(1.0)

    def test_cos_l1_formula(self):
        # sum |c| e^{|k|_1 rho}: 1/2 e + 1/2 e
        got = FTSeries.cosine(2, (1, 0)).majorant(1.0, 0.0)
        assert got == pytest.approx(math.e, rel=1e-12)

    def test_cos_tight_equals_cosh(self):
        # strip sup of cos on |Im x1| <= 1, attained at Im x1 = +-1
        f = FTSeries.cosine(2, (1, 0))
        got = f.majorant_tight(1.0, 0.0)
        assert got == pytest.approx(math.cosh(1.0), rel=1e-12)
        assert got == pytest.approx(1.5430806348, rel=1e-9)
        assert got <= f.majorant(1.0, 0.0)

    def test_monotone_and_submultiplicative(self):
        rng = np.random.default_rng(19)
        f = rand_series(rng)
        g = rand_series(rng)
        assert f.majorant(0.1, 0.2) <= f.majorant(0.4, 0.2)
        assert f.majorant(0.1, 0.2) <= f.majorant(0.1, 0.5)
        p = f.mul(g, k_max=64, d_max=16)
        assert p.majorant(0.3, 0.4) <= \
            f.majorant(0.3, 0.4) * g.majorant(0.3, 0.4) + p.trunc_loss + 1e-12

    def test_dominates_grid_sup(self):
        rng = np.random.default_rng(23)
        f = rand_series(rng)
        assert torus_sup_sample(f, sigma=0.5, grid_size=32) <= \
            f.majorant(0.0, 0.5) + 1e-12


class TestCauchyAndTail:
    def test_cauchy_formula(self):
        assert cauchy_bound(1.0, 0.5) == 2.0
        assert cauchy_bound(2.0, 0.1) == pytest.approx(20.0)

    def test_cauchy_rejects_bad_eps(self):
        with pytest.raises(ValueError):
            cauchy_bound(1.0, 0.0)

    def test_cauchy_consistency_with_majorant(self):
        f = FTSeries.cosine(2, (1, 0))
        rho, eps = 1.0, 0.3
        lhs = f.dx(0).majorant(rho - eps, 0.0)
        rhs = f.majorant(rho, 0.0) / eps
        assert lhs <= rhs

    def test_cubic_tail_paper_instance(self):
        # sigma normalized to 1, eps = 4/5, |y| = sigma/2 -> 5/8 = 0.625
        assert cubic_tail_bound(1.0, 0.8, 0.5, 1.0) == pytest.approx(0.625)

    def test_cubic_tail_zero_y(self):
        assert cubic_tail_bound(3.7, 0.5, 0.0, 1.0) == 0.0

    def test_cubic_tail_half(self):
        assert cubic_tail_bound(1.0, 0.5, 0.25, 1.0) == pytest.approx(0.03125)

    def test_cubic_tail_guard(self):
        with pytest.raises(ValueError):
            cubic_tail_bound(1.0, 0.5, 0.6, 1.0)


class TestSerialization:
    def test_round_trip(self):
        rng = np.random.default_rng(29)
        f = rand_series(rng, dmax=2)
        obj = f.to_json_obj()
        text = json.dumps(obj)
        g = FTSeries.from_json_obj(json.loads(text))
        assert dict(g.items()) == dict(f.items())
        assert (g.n, g.K, g.D, g.real_valued) == (f.n, f.K, f.D,
                                                  f.real_valued)

    def test_sorted_deterministic(self):
        f = FTSeries.cosine(2, (2, -1)) + FTSeries.cosine(2, (1, 0))
        obj = f.to_json_obj()
        keys = [(tuple(k), tuple(a)) for k, a, _, _ in obj["coeffs"]]
        assert keys == sorted(keys)


class TestHermitian:
    def test_constructor_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            FTSeries(2, {((1, 0), (0, 0)): 1.0}, real_valued=True)

    def test_ops_preserve_flag(self):
        rng = np.random.default_rng(31)
        f = rand_series(rng)
        g = rand_series(rng)
        assert f.mul(g).real_valued
        assert f.dx(0).real_valued
        assert f.dy(1).real_valued
        assert f.mean_x().real_valued
        assert poisson(f, g).real_valued

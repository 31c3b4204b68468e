import math

import numpy as np
import pytest

from kamtori.diophantine import catalog
from kamtori.linearized import (
    GeneratingFunction,
    PerturbationBoundError,
    build_delta_N,
    build_generating_function,
    equation_residual,
    matrix_perturb_inverse,
    mean_matrix,
    rowsum_norm,
    solve_U,
    solve_V,
    solve_lambda,
    yy_matrix_at_zero,
)
from kamtori.series import FTSeries

PHI = (math.sqrt(5.0) - 1.0) / 2.0
EPS = 1e-3


@pytest.fixture(scope="module")
def golden():
    return catalog("golden").certified(64)


def plain_normal_form(n=2, omega=None):
    """N = <omega, y> + 1/2 |y|^2 (so N_yy = E)."""
    if omega is None:
        omega = np.array([1.0, PHI])
    N = FTSeries.y_linear(n, omega)
    for j in range(n):
        alpha = tuple(2 if i == j else 0 for i in range(n))
        N = N + FTSeries.y_monomial(n, alpha, 0.5)
    return N


def wobbly_normal_form(golden, amp=0.1):
    """N = <omega, y> + 1/2 <y Q(x) y> with Q = E + amp diag(cos x1, 0)."""
    N = plain_normal_form(omega=golden.omega)
    N = N + FTSeries.cosine(2, (1, 0), amp * 0.5).mul(
        FTSeries.y_monomial(2, (2, 0)))
    return N


class TestMatrixPerturbInverse:
    def test_identity(self):
        out = matrix_perturb_inverse(np.eye(2), np.eye(2), 0.5)
        assert np.allclose(out, np.eye(2))

    def test_offdiag_bounds(self):
        S = np.eye(2)
        P = np.eye(2) + 0.1 * np.array([[0.0, 1.0], [1.0, 0.0]])
        out = matrix_perturb_inverse(S, P, 0.2)
        assert np.allclose(out @ P, np.eye(2), atol=1e-12)
        assert rowsum_norm(out) <= 1.25
        assert rowsum_norm(out) == pytest.approx(1.1 / 0.99, rel=1e-12)

    def test_guard(self):
        S = np.diag([1.0, 2.0])
        P = S + np.array([[0.0, 0.9], [0.0, 0.0]])
        with pytest.raises(PerturbationBoundError):
            matrix_perturb_inverse(S, P, 0.2)


class TestSolveU:
    def test_single_mode(self, golden):
        f = FTSeries.cosine(2, (1, 0), EPS)
        U = solve_U(f, golden)
        ref = FTSeries.sine(2, (1, 0), EPS)
        for key, v in ref.items():
            assert U.coefficient(*key) == pytest.approx(v)

    def test_constant_gives_zero(self, golden):
        assert solve_U(FTSeries.constant(2, 3.1), golden).is_zero

    def test_two_modes(self, golden):
        f = FTSeries.cosine(2, (1, 0), EPS) + FTSeries.cosine(2, (1, 1), EPS)
        U = solve_U(f, golden)
        want = FTSeries.sine(2, (1, 0), EPS) + \
            FTSeries.sine(2, (1, 1), EPS / (1.0 + PHI))
        for key, v in want.items():
            assert U.coefficient(*key) == pytest.approx(v, rel=1e-12)


class TestSolveLambda:
    def test_x_only_gives_zero(self, golden):
        f = FTSeries.cosine(2, (1, 0), EPS)
        N = plain_normal_form(omega=golden.omega)
        U = solve_U(f, golden)
        lam = solve_lambda(f, U, yy_matrix_at_zero(N), np.eye(2))
        assert np.allclose(lam, 0.0, atol=1e-15)

    def test_linear_in_y(self, golden):
        b = np.array([0.25, -0.5])
        f = FTSeries.y_linear(2, b) + FTSeries.cosine(2, (1, 0), EPS)
        N = plain_normal_form(omega=golden.omega)
        U = solve_U(f, golden)
        lam = solve_lambda(f, U, yy_matrix_at_zero(N), np.eye(2))
        assert np.allclose(lam, b, atol=1e-14)

    def test_rhs_mean_vanishes_with_wobbly_hessian(self, golden):
        f = FTSeries.cosine(2, (1, 0), EPS) + \
            FTSeries.cosine(2, (1, 1), EPS).mul(FTSeries.y_monomial(2, (1, 0)))
        N = wobbly_normal_form(golden)
        Nyy0 = yy_matrix_at_zero(N)
        U = solve_U(f, golden)
        lam = solve_lambda(f, U, Nyy0, np.eye(2))
        V = solve_V(f, lam, U, Nyy0, golden)  # raises if the mean survives
        assert len(V) == 2


class TestSolveV:
    def test_x_only_rhs(self, golden):
        f = FTSeries.cosine(2, (1, 0), EPS)
        N = plain_normal_form(omega=golden.omega)
        Nyy0 = yy_matrix_at_zero(N)
        U = solve_U(f, golden)
        lam = solve_lambda(f, U, Nyy0, np.eye(2))
        V = solve_V(f, lam, U, Nyy0, golden)
        ref = FTSeries.sine(2, (1, 0), -EPS)
        for key, v in ref.items():
            assert V[0].coefficient(*key) == pytest.approx(v, rel=1e-12)
        assert V[1].is_zero

    def test_constant_fy_with_matching_lambda(self, golden):
        b = np.array([0.3, 0.7])
        f = FTSeries.y_linear(2, b)
        N = plain_normal_form(omega=golden.omega)
        Nyy0 = yy_matrix_at_zero(N)
        U = solve_U(f, golden)
        V = solve_V(f, b, U, Nyy0, golden)
        assert all(v.is_zero for v in V)


class TestBuildDeltaN:
    def test_single_cosine(self, golden):
        f = FTSeries.cosine(2, (1, 0), EPS)
        N = plain_normal_form(omega=golden.omega)
        dS = build_generating_function(f, N, golden, np.eye(2))
        dN = build_delta_N(f, N, dS, golden)
        assert dN.deltaN0 == pytest.approx(0.0, abs=1e-16)
        assert dN.deltaN.at_y0().majorant() <= 1e-12 * EPS
        for j in range(2):
            assert dN.deltaN.dy(j).at_y0().majorant() <= 1e-12 * EPS
        # residual of the defining equation
        res = equation_residual(f, N, dS, dN)
        assert res.majorant(0.0, 0.5) <= 1e-11 * f.majorant(0.0, 0.5)

    def test_constant_f(self, golden):
        f = FTSeries.constant(2, 0.125)
        N = plain_normal_form(omega=golden.omega)
        dS = build_generating_function(f, N, golden, np.eye(2))
        assert dS.is_zero
        dN = build_delta_N(f, N, dS, golden)
        assert dN.deltaN0 == pytest.approx(0.125)
        assert (dN.deltaN - f).majorant(0.0, 1.0) <= 1e-15

    def test_zero_perturbation_fixed_point(self, golden):
        f = FTSeries.zero(2)
        N = plain_normal_form(omega=golden.omega)
        dS = build_generating_function(f, N, golden, np.eye(2))
        assert dS.is_zero
        dN = build_delta_N(f, N, dS, golden)
        assert dN.deltaN.is_zero and dN.deltaN0 == 0.0

    def test_desk_example_resubstitution(self, golden):
        f = FTSeries.cosine(2, (1, 0), EPS) + \
            FTSeries.cosine(2, (1, 1), EPS).mul(
                FTSeries.y_monomial(2, (1, 0)) + FTSeries.constant(2, 1.0))
        N = wobbly_normal_form(golden)
        dS = build_generating_function(f, N, golden, np.eye(2))
        dN = build_delta_N(f, N, dS, golden)
        res = equation_residual(f, N, dS, dN)
        assert res.majorant(0.0, 0.25) <= 1e-11 * f.majorant(0.0, 0.25)
        assert dN.deltaN0 == pytest.approx(
            -float(dS.lam @ golden.omega), abs=1e-12 * EPS)

    def test_generating_function_invariants(self, golden):
        with pytest.raises(ValueError):
            GeneratingFunction(np.zeros(2),
                               FTSeries.constant(2, 1.0),
                               [FTSeries.zero(2), FTSeries.zero(2)])
        with pytest.raises(ValueError):
            GeneratingFunction(np.zeros(2), FTSeries.zero(2),
                               [FTSeries.y_monomial(2, (1, 0)),
                                FTSeries.zero(2)])

    def test_mean_matrix(self, golden):
        N = wobbly_normal_form(golden)
        A = mean_matrix(yy_matrix_at_zero(N))
        assert np.allclose(A, np.eye(2))

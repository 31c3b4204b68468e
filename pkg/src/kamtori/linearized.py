"""Construction of the generating function and normal-form increment.

Solves f + {N, dS} - dN = 0 for the pair (dS, dN) with the ansatz

    dS(x, y) = <lambda, x> + U(x) + <V(x), y>,

in five steps: U from the small-divisor equation for the zero-mean part of
f(., 0); lambda from the mean condition that makes the V-equation solvable
(a perturbed-matrix linear solve); V componentwise from the small-divisor
equation; dN := f + {N, dS} with the non-periodic <lambda, x> part entering
only through its gradient.  By construction dN(x, 0) is the constant
dN(0) = [f(., 0)] - <lambda, omega> and dN_y(x, 0) = 0; both are asserted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import cohomology
from .diophantine import FrequencyVector
from .series import FTSeries, poisson

__all__ = [
    "GeneratingFunction",
    "NormalFormDelta",
    "PerturbationBoundError",
    "matrix_perturb_inverse",
    "rowsum_norm",
    "solve_U",
    "solve_lambda",
    "solve_V",
    "build_delta_N",
    "build_generating_function",
    "yy_matrix_at_zero",
    "mean_matrix",
]

NORMALIZATION_RTOL = 1e-10
MEAN_RTOL = 1e-11
DELTA_N0_RTOL = 1e-11


class PerturbationBoundError(ArithmeticError):
    """|P - S| exceeds h / |S^-1|: the Neumann-series bound does not apply."""


def rowsum_norm(M):
    M = np.asarray(M)
    return float(np.max(np.sum(np.abs(M), axis=1)))


def matrix_perturb_inverse(S, P, h):
    """Invert P near an invertible reference S, certifying the bounds.

    Requires |P - S| <= h / |S^-1| (row-sum norm) with 0 < h < 1; returns
    P^-1 and asserts |P^-1| <= |S^-1| / (1 - h) and
    |P^-1 - S^-1| <= h |S^-1| / (1 - h).
    """
    if not 0 < h < 1:
        raise ValueError("h must lie in (0, 1)")
    S = np.asarray(S, dtype=np.float64)
    P = np.asarray(P, dtype=np.float64)
    S_inv = np.linalg.inv(S)
    s_inv_norm = rowsum_norm(S_inv)
    gap = rowsum_norm(P - S)
    if gap > h / s_inv_norm * (1 + 1e-12):
        raise PerturbationBoundError(
            f"|P-S| |S^-1| = {gap * s_inv_norm:.6g} exceeds h = {h}")
    P_inv = np.linalg.inv(P)
    bound = s_inv_norm / (1.0 - h)
    assert rowsum_norm(P_inv) <= bound * (1 + 1e-10)
    assert rowsum_norm(P_inv - S_inv) <= h * bound * (1 + 1e-10)
    return P_inv


@dataclass(frozen=True)
class GeneratingFunction:
    """dS = <lambda, x> + U(x) + <V(x), y>.

    The linear term is kept as the plain vector ``lam``; it cannot live in a
    periodic series and only ever enters through the gradient
    dS_x = lam + U_x + y . V_x.
    """

    lam: np.ndarray
    U: FTSeries
    V: list
    # The Theorem-3.4 construction yields zero-mean U and V; generic affine
    # generators (rigid shifts, say) may carry constant V components.
    check_means: bool = True

    def __post_init__(self):
        object.__setattr__(self, "lam",
                           np.asarray(self.lam, dtype=np.float64))
        n = self.U.n
        z = (0,) * n
        for name, f in [("U", self.U)] + [(f"V[{i}]", v)
                                          for i, v in enumerate(self.V)]:
            if not f.x_only:
                raise ValueError(f"{name} must be x-only")
            if self.check_means and \
                    abs(f.coefficient(z, z)) > 1e-12 * max(f.majorant(),
                                                           1e-300):
                raise ValueError(f"{name} must have zero mean")
            if not f.real_valued:
                raise ValueError(f"{name} must be real_valued")

    @property
    def n(self):
        return self.U.n

    @property
    def is_zero(self):
        return (not self.lam.any()) and self.U.is_zero \
            and all(v.is_zero for v in self.V)

    def periodic_part(self):
        """U + <V, y> as a series (everything except <lambda, x>)."""
        n = self.n
        acc = self.U
        for i, v in enumerate(self.V):
            e_i = tuple(1 if j == i else 0 for j in range(n))
            lift = FTSeries(n, {(k, e_i): c for (k, _), c in v.items()},
                            real_valued=v.real_valued, K=v.K, D=1)
            acc = acc + lift
        return acc

    def grad_x(self):
        """Components of dS_x = lam + U_x + y . V_x (series with constants)."""
        n = self.n
        out = []
        for j in range(n):
            g = self.U.dx(j) + FTSeries.constant(n, self.lam[j])
            for i, v in enumerate(self.V):
                e_i = tuple(1 if m == i else 0 for m in range(n))
                dv = v.dx(j)
                g = g + FTSeries(n, {(k, e_i): c for (k, _), c in dv.items()},
                                 real_valued=dv.real_valued, K=dv.K, D=1)
            out.append(g)
        return out

    def grad_y(self):
        """dS_y = V."""
        return list(self.V)

    def to_json_obj(self):
        return {"lambda": [float(v) for v in self.lam],
                "U": self.U.to_json_obj(),
                "V": [v.to_json_obj() for v in self.V]}


@dataclass(frozen=True)
class NormalFormDelta:
    deltaN: FTSeries
    deltaN0: float


def yy_matrix_at_zero(N):
    """N_yy(., 0) as an n x n matrix of x-only series."""
    n = N.n
    return [[N.dy(i).dy(j).at_y0() for j in range(n)] for i in range(n)]


def mean_matrix(mat):
    """Torus means of a matrix of series, as a real matrix."""
    n = len(mat)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            f = mat[i][j]
            z = (0,) * f.n
            out[i, j] = f.coefficient(z, z).real
    return out


def solve_U(f, omega: FrequencyVector):
    """<U_x, omega> = f(., 0) - [f(., 0)], zero-mean solution."""
    g = f.at_y0().without_mean()
    return cohomology.solve(g, omega)


def solve_lambda(f, U, Nyy0, C, k_max=None, d_max=None):
    """lambda [N_yy(., 0)] = [f_y(., 0)] - [U_x . N_yy(., 0)].

    Hypothesis: |[N_yy(., 0)] - C| <= 1/(2 |C^-1|); the inverse is taken
    through the perturbed-matrix lemma with S = C, h = 1/2.
    """
    n = f.n
    A = mean_matrix(Nyy0)
    A_inv = matrix_perturb_inverse(C, A, 0.5)
    b = np.zeros(n)
    z = (0,) * n
    Ux = U.grad_x()
    for i in range(n):
        fy_mean = f.dy(i).at_y0().coefficient(z, z).real
        corr = 0.0
        for j in range(n):
            prod = Ux[j].mul(Nyy0[j][i], k_max=k_max, d_max=d_max)
            corr += prod.coefficient(z, z).real
        b[i] = fy_mean - corr
    # row-vector equation lambda A = b
    return b @ A_inv


def solve_V(f, lam, U, Nyy0, omega: FrequencyVector, k_max=None, d_max=None):
    """omega . V_x^T = f_y(., 0) - (lambda + U_x) . N_yy(., 0), componentwise.

    The choice of lambda makes every component mean-free; the means are
    asserted to vanish relatively and then zeroed exactly (they are pure
    roundoff) before the small-divisor solves.
    """
    n = f.n
    z = (0,) * n
    Ux = U.grad_x()
    V = []
    for i in range(n):
        rhs = f.dy(i).at_y0()
        for j in range(n):
            term = Ux[j].mul(Nyy0[j][i], k_max=k_max, d_max=d_max)
            rhs = rhs - term - Nyy0[j][i].scale(lam[j])
        mean = abs(rhs.coefficient(z, z))
        if mean > MEAN_RTOL * max(rhs.majorant(), 1e-300):
            raise ArithmeticError(
                f"V right-hand side component {i} has mean {mean:.3e}; "
                "lambda is inconsistent")
        V.append(cohomology.solve(rhs.without_mean(), omega))
    return V


def build_generating_function(f, N, omega: FrequencyVector, C,
                              k_max=None, d_max=None):
    """Run the U, lambda, V solves for f against the normal form N."""
    Nyy0 = yy_matrix_at_zero(N)
    U = solve_U(f, omega)
    lam = solve_lambda(f, U, Nyy0, C, k_max=k_max, d_max=d_max)
    V = solve_V(f, lam, U, Nyy0, omega, k_max=k_max, d_max=d_max)
    return GeneratingFunction(lam=lam, U=U, V=V)


def build_delta_N(f, N, dS: GeneratingFunction, omega: FrequencyVector,
                  k_max=None, d_max=None):
    """dN := f + {N, dS}, with <lambda, x> contributing -<N_y, lambda>.

    Asserts the normalization dN(x, 0) = dN(0), dN_y(x, 0) = 0 and the
    identity dN(0) = [f(., 0)] - <lambda, omega>.
    """
    n = f.n
    dS_series = dS.periodic_part()
    dN = f + poisson(N, dS_series, k_max=k_max, d_max=d_max)
    for j in range(n):
        if dS.lam[j] != 0.0:
            dN = dN - N.dy(j).scale(dS.lam[j])
    z = (0,) * n
    dN0 = dN.coefficient(z, z).real
    scale = max(f.majorant(0.0, 1.0), 1e-300)
    wobble = (dN.at_y0() - FTSeries.constant(n, dN0)).majorant()
    if wobble > NORMALIZATION_RTOL * scale:
        raise ArithmeticError(
            f"dN(., 0) deviates from its mean by {wobble:.3e} "
            f"(scale {scale:.3e}); upstream solves are inconsistent")
    slope = max(dN.dy(j).at_y0().majorant() for j in range(n))
    if slope > NORMALIZATION_RTOL * scale:
        raise ArithmeticError(
            f"dN_y(., 0) = {slope:.3e} does not vanish "
            f"(scale {scale:.3e}); upstream solves are inconsistent")
    want = f.at_y0().coefficient(z, z).real - float(dS.lam @ omega.omega)
    if abs(dN0 - want) > DELTA_N0_RTOL * max(abs(want), scale * 1e-3, 1e-300):
        raise ArithmeticError(
            f"dN(0) = {dN0:.6e} mismatches [f(.,0)] - <lambda, omega> "
            f"= {want:.6e}")
    return NormalFormDelta(deltaN=dN, deltaN0=dN0)


def equation_residual(f, N, dS: GeneratingFunction, dN: NormalFormDelta,
                      k_max=None, d_max=None):
    """Series of f + {N, dS} - dN; zero up to roundoff by construction."""
    n = f.n
    acc = f + poisson(N, dS.periodic_part(), k_max=k_max, d_max=d_max)
    for j in range(n):
        if dS.lam[j] != 0.0:
            acc = acc - N.dy(j).scale(dS.lam[j])
    return acc - dN.deltaN

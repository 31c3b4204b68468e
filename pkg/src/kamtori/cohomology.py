"""Mode-by-mode solver for the small-divisor equation <u_xi, omega> = g.

For a zero-mean x-only series g the unique zero-mean solution has
coefficients u_k = g_k / (i <k, omega>).  On the retained modes this is
exact up to roundoff; divisor amplification diagnostics quantify the norm
inflation the truncated solver can actually produce, which backs the c6
configuration default of the constants chain.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from .diophantine import FrequencyVector, _canonical_half_lattice, \
    _compensated_dot
from .series import FTSeries

__all__ = ["solve", "solve_vector", "amplification_estimate",
           "ResonanceError", "MeanValueError"]

logger = logging.getLogger(__name__)

MEAN_RTOL = 1e-13
NEAR_RESONANCE_RTOL = 1e-10


class ResonanceError(ArithmeticError):
    """A retained mode has an exactly vanishing divisor <omega, k>."""

    def __init__(self, k):
        super().__init__(f"exact resonance <omega, k> = 0 at k = {k}")
        self.k = tuple(k)


class MeanValueError(ValueError):
    pass


def _divisor(omega, k):
    # compensated two-term accumulation, matching the certification scan
    s, comp = 0.0, 0.0
    for w, kk in zip(omega, k):
        term = w * kk
        t = s + term
        if abs(s) >= abs(term):
            comp += (s - t) + term
        else:
            comp += (term - t) + s
        s = t
    return s + comp


def solve(g, omega: FrequencyVector):
    """Solve <u_xi, omega> = g for the zero-mean x-only series u.

    Requires g with D = 0 and mean zero (relative to its size).  The
    constant mode of u is never written, so the zero-mean property of the
    output is exact.  Real-valued input gives real-valued output.
    """
    if g.D != 0:
        raise ValueError("cohomological right-hand side must be x-only")
    if g.n != omega.n:
        raise ValueError("dimension mismatch between series and omega")
    scale = g.majorant(0.0, 0.0)
    z = (0,) * g.n
    mean = abs(g.coefficient(z, z))
    if mean > MEAN_RTOL * max(scale, 1e-300):
        raise MeanValueError(
            f"right-hand side has nonzero mean {mean:.3e} "
            f"(scale {scale:.3e})")
    om = omega.omega
    mindiv = math.inf
    coeffs = {}
    for (k, a), c in g.items():
        if k == z:
            continue  # roundoff-level mean residue, dropped
        div = _divisor(om, k)
        if div == 0.0:
            raise ResonanceError(k)
        mindiv = min(mindiv, abs(div))
        coeffs[(k, a)] = c / (1j * div)
    if coeffs and mindiv < NEAR_RESONANCE_RTOL * omega.omega_norm:
        logger.warning(
            "ill-conditioned small divisors: min |<omega,k>| = %.3e "
            "(|omega| = %.3e)", mindiv, omega.omega_norm)
    return FTSeries(g.n, coeffs, real_valued=g.real_valued, K=g.K, D=0)


def solve_vector(G, omega: FrequencyVector):
    """Componentwise solve for a vector right-hand side."""
    return [solve(g, omega) for g in G]


def residual(u, g, omega: FrequencyVector):
    """Resubstitution defect <u_xi, omega> - g as a series."""
    acc = FTSeries.zero(g.n, g.real_valued and u.real_valued)
    for j in range(g.n):
        acc = acc + u.dx(j).scale(omega.omega[j])
    return acc - g


def amplification_estimate(omega: FrequencyVector, K, delta, gamma=None):
    """Empirical lower bound for the c6 the truncated solver needs.

    Scans 0 < |k|_inf <= K and returns
    max gamma * delta^tau / (|<omega, k>| e^{|k|_1 delta}), the smallest
    constant for which |u|_{rho - delta} <= c6 M / (gamma delta^tau) holds
    mode by mode in the l1-exponential majorant.  gamma defaults to the
    vector's effective gamma.
    """
    if delta <= 0:
        raise ValueError("delta must be > 0")
    if gamma is None:
        gamma = omega.effective_gamma()
        if gamma is None:
            raise ValueError("no gamma available; certify omega first")
    lattice = _canonical_half_lattice(omega.n, int(K))
    dots = np.abs(_compensated_dot(omega.omega, lattice))
    if np.any(dots == 0.0):
        i = int(np.argmin(dots))
        raise ResonanceError(tuple(int(v) for v in lattice[i]))
    l1 = np.sum(np.abs(lattice), axis=1).astype(np.float64)
    vals = gamma * delta ** omega.tau / (dots * np.exp(l1 * delta))
    return float(np.max(vals))

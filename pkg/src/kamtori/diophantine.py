"""Diophantine frequency vectors and brute-force certification.

A frequency omega belongs to the set Omega(gamma, tau) when
|<omega, k>| >= gamma / |k|^tau for every nonzero integer vector k, with
|k| the ell-infinity norm (a flag switches to ell-1 for cross-checks against
other conventions).  A finite scan up to |k|_inf <= K_max cannot prove
membership; it produces gamma_min = min |<omega,k>| |k|^tau over the box,
which is an upper bound for the best possible gamma and a disproof when it
hits zero.  Certification records are therefore labeled empirical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["FrequencyVector", "Certification", "certify", "catalog",
           "CertifyBudgetError"]

DEFAULT_SCAN_BUDGET = 10 ** 9


class CertifyBudgetError(ValueError):
    pass


@dataclass(frozen=True)
class Certification:
    K_max: int
    gamma_min: float
    argmin_k: tuple
    norm: str = "linf"

    def to_json_obj(self):
        return {"K_max": self.K_max, "gamma_min": self.gamma_min,
                "argmin_k": list(self.argmin_k), "norm": self.norm}


@dataclass(frozen=True)
class FrequencyVector:
    """Frequency vector with Diophantine exponent and certification record."""

    omega: np.ndarray
    tau: float
    gamma_claimed: float | None = None
    certification: Certification | None = None

    def __post_init__(self):
        om = np.asarray(self.omega, dtype=np.float64)
        object.__setattr__(self, "omega", om)
        n = om.shape[0]
        if n < 2:
            raise ValueError("frequency vector needs n >= 2")
        if self.tau < n - 1:
            raise ValueError(f"tau={self.tau} violates tau >= n-1 = {n - 1}")
        if self.gamma_claimed is not None and self.gamma_claimed <= 0:
            raise ValueError("gamma_claimed must be > 0")

    @property
    def n(self):
        return int(self.omega.shape[0])

    @property
    def omega_norm(self):
        return float(np.max(np.abs(self.omega)))

    def effective_gamma(self):
        """min(gamma_claimed, empirical gamma_min); None when neither known."""
        cands = []
        if self.gamma_claimed is not None:
            cands.append(self.gamma_claimed)
        if self.certification is not None:
            cands.append(self.certification.gamma_min)
        return min(cands) if cands else None

    def certified(self, K_max, budget=DEFAULT_SCAN_BUDGET):
        cert = certify(self.omega, self.tau, K_max, budget=budget)
        return FrequencyVector(self.omega, self.tau, self.gamma_claimed, cert)

    def to_json_obj(self):
        return {
            "omega": [float(v) for v in self.omega],
            "tau": self.tau,
            "gamma_claimed": self.gamma_claimed,
            "certification": None if self.certification is None
            else self.certification.to_json_obj(),
        }


def _compensated_dot(omega, lattice):
    """<omega, k> columnwise with Neumaier-compensated accumulation.

    Keeps the small sums near resonances accurate although the individual
    terms omega_j * k_j are large.
    """
    s = omega[0] * lattice[:, 0]
    comp = np.zeros_like(s)
    for j in range(1, lattice.shape[1]):
        term = omega[j] * lattice[:, j]
        t = s + term
        big = np.abs(s) >= np.abs(term)
        comp += np.where(big, (s - t) + term, (term - t) + s)
        s = t
    return s + comp


def _canonical_half_lattice(n, K):
    """All k with 0 < |k|_inf <= K and first nonzero component > 0.

    Lexicographic enumeration; +-k symmetry halves the scan.
    """
    rng = np.arange(-K, K + 1)
    mesh = np.meshgrid(*([rng] * n), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    keep = np.zeros(len(pts), dtype=bool)
    undecided = np.ones(len(pts), dtype=bool)
    for j in range(n):
        col = pts[:, j]
        keep |= undecided & (col > 0)
        undecided &= col == 0
    return pts[keep]


def certify(omega, tau, K_max, budget=DEFAULT_SCAN_BUDGET, norm="linf"):
    """Exhaustive small-divisor scan over 0 < |k|_inf <= K_max.

    Returns a :class:`Certification` with
    gamma_min = min |<omega, k>| * |k|^tau and the attaining k (ties broken
    by the lexicographically smallest canonical representative).  A positive
    gamma_min does not prove membership in Omega(gamma, tau); zero disproves
    it.
    """
    omega = np.asarray(omega, dtype=np.float64)
    n = omega.shape[0]
    if K_max < 1:
        raise ValueError("K_max must be >= 1")
    if not np.any(omega != 0.0):
        raise ValueError("omega must be nonzero")
    candidates = (2 * K_max + 1) ** n
    if candidates > budget:
        raise CertifyBudgetError(
            f"scan size {candidates} exceeds budget {budget}")
    lattice = _canonical_half_lattice(n, K_max)
    dots = np.abs(_compensated_dot(omega, lattice))
    if norm == "linf":
        knorm = np.max(np.abs(lattice), axis=1).astype(np.float64)
    elif norm == "l1":
        knorm = np.sum(np.abs(lattice), axis=1).astype(np.float64)
    else:
        raise ValueError(f"unknown lattice norm {norm!r}")
    values = dots * knorm ** tau
    i = int(np.argmin(values))  # first occurrence = lexicographic smallest
    return Certification(K_max=int(K_max), gamma_min=float(values[i]),
                         argmin_k=tuple(int(v) for v in lattice[i]),
                         norm=norm)


def catalog(name):
    """Named standard frequency vectors with tau = n - 1 defaults."""
    if name == "golden":
        return FrequencyVector(
            np.array([1.0, (math.sqrt(5.0) - 1.0) / 2.0]), tau=1.0)
    if name == "sqrt2":
        return FrequencyVector(np.array([1.0, math.sqrt(2.0) - 1.0]), tau=1.0)
    if name == "cubic-tribonacci":
        # real root of rho^3 + rho - 1 = 0
        rho = _real_root_cubic()
        return FrequencyVector(np.array([1.0, rho, rho * rho]), tau=2.0)
    raise KeyError(f"unknown frequency catalog entry {name!r}")


def _real_root_cubic():
    # Newton on rho^3 + rho - 1, monotone increasing, single real root
    x = 0.7
    for _ in range(60):
        x = x - (x ** 3 + x - 1.0) / (3.0 * x * x + 1.0)
    return x

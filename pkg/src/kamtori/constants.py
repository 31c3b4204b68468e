"""The explicit constant chain and the iteration schedules.

Everything downstream of the small-divisor constant c6 is a closed-form
expression in (n, tau, gamma, C, |omega|); the chain is evaluated eagerly
and all its internal identities are asserted at construction.  c6 itself is
configuration: the default used by the engine is the empirical
amplification estimate of the truncated solver, so the chain is
self-consistent for the operator actually implemented.  The index c16 is
unused (the source chain skips it).

Schedules: q = 1/4, mu = 3/2, delta_k = q^k delta_0, s_k = delta_k^(tau+1),
r_k = 3r/4 + 8 delta_k, t_k = t0^(mu^k), M_k = s_k^2 t_k / c15, with
delta_0 = s^(1/(tau+1))/32 and t0 = theta.  Mesh and budget laws are
asserted: the domain parameters mesh (r_k > 3r/4, delta_k < r_k/6,
s_k <= delta_k^(tau+1) <= 1, r_{k+1} <= r_k - 6 delta_k, s_{k+1} <= s_k/8),
the budgets satisfy c15 M_k^2/s_k^2 <= M_{k+1}, M_k <= c18 s_k^2 and
sum M_k/s_k^2 <= 2 t0 / c15, and the start dominates: r_0 <= r, s_0 <= s,
M_0 >= c2 s^2 theta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linearized import rowsum_norm

__all__ = ["ConstantsChain", "Schedule", "ScheduleError", "constants_chain",
           "build_schedule", "series_tail_check"]

Q_RATIO = 0.25
MU_EXPONENT = 1.5


class ScheduleError(ValueError):
    """A schedule hypothesis failed; the message names the inequality."""


@dataclass(frozen=True)
class ConstantsChain:
    n: int
    tau: float
    gamma: float
    C_norm: float
    C_inv_norm: float
    omega_norm: float
    c6_source: str
    c6: float
    c7: float
    c8: float
    c9t: float
    c10: float
    c11: float
    c12: float
    c13: float
    c14: float
    c15: float
    c17: float
    c18: float
    c19: float
    c20: float
    c1: float
    c2: float
    c3: float
    c4: float
    c5: float

    @property
    def c78(self):
        return self.c7 + self.c8

    def to_json_obj(self):
        out = {k: getattr(self, k) for k in (
            "n", "tau", "gamma", "C_norm", "C_inv_norm", "omega_norm",
            "c6_source", "c6", "c7", "c8", "c9t", "c10", "c11", "c12",
            "c13", "c14", "c15", "c17", "c18", "c19", "c20",
            "c1", "c2", "c3", "c4", "c5")}
        out["c16"] = None  # unused index, kept for completeness
        return out


def constants_chain(n, tau, gamma, C, omega_norm, c6, c6_source="config"):
    """Evaluate the full chain c6..c20, c1..c5 and assert its identities."""
    n = int(n)
    if n < 2:
        raise ValueError("n must be >= 2")
    if tau < n - 1:
        raise ValueError(f"tau = {tau} violates tau >= n-1 = {n - 1}")
    if not (gamma > 0 and c6 > 0):
        raise ValueError("gamma and c6 must be > 0")
    C = np.asarray(C, dtype=np.float64)
    C_inv = np.linalg.inv(C)
    nc = rowsum_norm(C)
    nci = rowsum_norm(C_inv)

    c12 = 1.0 + 4.0 * c6 * nc / gamma
    c13 = 1.0 + n * c12 * (1.0 + 4.0 * nc * nci)
    c8 = (c6 / gamma) * c12 * (1.0 + 4.0 * nc * nci)
    c7 = 2.0 * nci * c12 + 2.0 * c6 / gamma + n * c8
    c9t = 1.0 + 2.0 * n * omega_norm * nci * c12
    c10 = 1.0 + n * n * nc * (2.0 * c7 + c8) + c13
    c11 = 64.0 * c10
    c14 = 8.0 * n * (c7 + c8)
    c15 = n * (1.0 + c10) * (4.0 * c7 + c8)
    c17 = 1.0 / (4.0 * c11 * nci)
    c18 = 1.0 / (16.0 * (c7 + c8))
    c19 = min(Q_RATIO ** ((2.0 * tau + 2.0) / (2.0 - MU_EXPONENT)),
              c15 * c17 / 2.0)
    c20 = n * (c7 + c8) * math.exp(c14 * c17)
    c1 = min(c19, c15 / (32.0 * n * n * (c7 + c8) * math.exp(c14 * c17)))
    c2 = 1.0 / (32.0 ** (2.0 * (tau + 1.0)) * c15)
    c3 = 16.0 * n * c20 / c15
    c4 = 2.0 * c11 / c15
    c5 = 512.0 / 25.0

    assert c15 * c18 >= 26.0 / 16.0, "c15*c18 >= 26/16 must hold"
    assert c15 * c18 >= 1.0
    return ConstantsChain(
        n=n, tau=float(tau), gamma=float(gamma), C_norm=nc, C_inv_norm=nci,
        omega_norm=float(omega_norm), c6_source=c6_source, c6=float(c6),
        c7=c7, c8=c8, c9t=c9t, c10=c10, c11=c11, c12=c12, c13=c13,
        c14=c14, c15=c15, c17=c17, c18=c18, c19=c19, c20=c20,
        c1=c1, c2=c2, c3=c3, c4=c4, c5=c5)


def _power(t0, exponent):
    """t0^exponent for t0 in (0,1), underflow-safe."""
    if t0 <= 0.0:
        return 0.0
    loga = exponent * math.log(t0)
    return math.exp(loga) if loga > -745.0 else 0.0


@dataclass(frozen=True)
class Schedule:
    q: float
    mu: float
    delta0: float
    t0: float
    r: float
    s: float
    tau: float
    r_k: np.ndarray = field(repr=False)
    delta_k: np.ndarray = field(repr=False)
    s_k: np.ndarray = field(repr=False)
    M_k: np.ndarray = field(repr=False)
    t_k: np.ndarray = field(repr=False)

    @property
    def k_max(self):
        return len(self.delta_k) - 1

    def to_json_obj(self):
        return {"q": self.q, "mu": self.mu, "delta0": self.delta0,
                "t0": self.t0, "r": self.r, "s": self.s, "tau": self.tau,
                "r_k": list(map(float, self.r_k)),
                "delta_k": list(map(float, self.delta_k)),
                "s_k": list(map(float, self.s_k)),
                "M_k": list(map(float, self.M_k)),
                "t_k": list(map(float, self.t_k))}


def build_schedule(r, s, theta, tau, chain: ConstantsChain, k_max,
                   enforce_theta=True):
    """Domain and budget sequences for k = 0..k_max, with all guards.

    ``enforce_theta=False`` clamps t0 to c1 instead of raising; the
    measured-mode engine uses that, since there theta only scales the
    verification bounds while the arrays still need to mesh.
    """
    if not (0 < s <= r ** (tau + 1.0) <= 1.0):
        raise ScheduleError(
            f"hypothesis 0 < s <= r^(tau+1) <= 1 fails: s={s}, "
            f"r^(tau+1)={r ** (tau + 1.0)}")
    if theta <= 0:
        raise ScheduleError("hypothesis theta > 0 fails")
    if theta > chain.c1:
        if enforce_theta:
            raise ScheduleError(
                f"hypothesis theta <= c1 fails: theta={theta}, "
                f"c1={chain.c1}")
        theta = chain.c1
    q, mu = Q_RATIO, MU_EXPONENT
    delta0 = s ** (1.0 / (tau + 1.0)) / 32.0
    t0 = theta
    ks = np.arange(k_max + 1)
    delta_k = delta0 * q ** ks
    s_k = delta_k ** (tau + 1.0)
    r_k = 0.75 * r + 8.0 * delta_k
    t_k = np.array([_power(t0, mu ** k) for k in ks])
    M_k = s_k ** 2 * t_k / chain.c15

    # sequence mesh; r_k = 3r/4 + 8 delta_k collapses onto 3r/4 in floats
    # once 8 delta_k drops below an ulp, so the strict bound is checked
    # with equality allowed
    for k in range(k_max + 1):
        if not r_k[k] >= 0.75 * r:
            raise ScheduleError(f"r_k > 3r/4 fails at k={k}")
        if not 0 < delta_k[k] < r_k[k] / 6.0:
            raise ScheduleError(f"0 < delta_k < r_k/6 fails at k={k}")
        if not 0 < s_k[k] <= delta_k[k] ** (tau + 1.0) <= 1.0:
            raise ScheduleError(
                f"0 < s_k <= delta_k^(tau+1) <= 1 fails at k={k}")
    for k in range(k_max):
        # q = 1/4 makes this an exact equality (8 delta_{k+1} = 2 delta_k)
        if not r_k[k + 1] <= r_k[k] - 6.0 * delta_k[k] + 1e-14 * r:
            raise ScheduleError(f"r_(k+1) <= r_k - 6 delta_k fails at k={k}")
        if not s_k[k + 1] <= s_k[k] / 8.0:
            raise ScheduleError(f"s_(k+1) <= s_k/8 fails at k={k}")
    # budget laws
    for k in range(k_max):
        if not chain.c15 * M_k[k] ** 2 / s_k[k] ** 2 <= M_k[k + 1] * (
                1 + 1e-12):
            raise ScheduleError(
                f"c15 M_k^2/s_k^2 <= M_(k+1) fails at k={k}")
    for k in range(k_max + 1):
        if not M_k[k] <= chain.c18 * s_k[k] ** 2 * (1 + 1e-12):
            raise ScheduleError(f"M_k <= c18 s_k^2 fails at k={k}")
    tail = float(np.sum(M_k / s_k ** 2))
    if not tail <= 2.0 * t0 / chain.c15 * (1 + 1e-12):
        raise ScheduleError("sum M_k/s_k^2 <= 2 t0/c15 fails")
    # start domination
    if not r_k[0] <= r * (1 + 1e-12):
        raise ScheduleError("r_0 <= r fails")
    if not s_k[0] <= s * (1 + 1e-12):
        raise ScheduleError("s_0 <= s fails")
    if not M_k[0] >= chain.c2 * s * s * theta * (1 - 1e-12):
        raise ScheduleError("M_0 >= c2 s^2 theta fails")
    return Schedule(q=q, mu=mu, delta0=delta0, t0=t0, r=float(r), s=float(s),
                    tau=float(tau), r_k=r_k, delta_k=delta_k, s_k=s_k,
                    M_k=M_k, t_k=t_k)


def series_tail_check(t, m, terms):
    """Partial sums of sum_k t^(m^k) against the closed bound t/(1-t^(m-1)).

    Returns (lhs, rhs) and asserts lhs <= rhs.
    """
    if not 0 < t < 1:
        raise ValueError("t must lie in (0, 1)")
    if not m > 1:
        raise ValueError("m must be > 1")
    lhs = 0.0
    for k in range(int(terms)):
        lhs += _power(t, m ** k)
    rhs = t / (1.0 - t ** (m - 1.0))
    assert lhs <= rhs * (1 + 1e-15), f"tail bound violated: {lhs} > {rhs}"
    return lhs, rhs

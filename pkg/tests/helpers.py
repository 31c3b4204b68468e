"""Shared builders for the golden-ratio desk problem."""

import numpy as np

from kamtori.cohomology import amplification_estimate
from kamtori.constants import build_schedule, constants_chain
from kamtori.diophantine import catalog
from kamtori.engine import EngineOptions, HamiltonianDecomposition
from kamtori.series import FTSeries


def identity_Q(n=2):
    one = FTSeries.constant(n, 1.0)
    zero = FTSeries.zero(n)
    return [[one if i == j else zero for j in range(n)] for i in range(n)]


def desk_remainder(eps, n=2):
    """eps (cos x1 + cos(x1+x2)) (1 + y1)."""
    base = FTSeries.cosine(n, (1, 0), eps) + FTSeries.cosine(n, (1, 1), eps)
    return base.mul(FTSeries.constant(n, 1.0)
                    + FTSeries.y_monomial(n, (1, 0)))


def golden_setup(eps=1e-5, r=1.0, s=0.05, mode="measured", k_max_steps=5,
                 theta=0.05):
    omega = catalog("golden").certified(64)
    gamma = omega.effective_gamma()
    tau = omega.tau
    delta0 = s ** (1.0 / (tau + 1.0)) / 32.0
    c6 = amplification_estimate(omega, 16, delta0)
    chain = constants_chain(2, tau, gamma, np.eye(2), omega.omega_norm, c6,
                            c6_source="amplification_estimate")
    sched = build_schedule(r, s, theta, tau, chain, k_max=k_max_steps + 1,
                           enforce_theta=(mode == "schedule"))
    decomp = HamiltonianDecomposition.from_parts(
        0.0, omega, identity_Q(), desk_remainder(eps), r, s)
    opts = EngineOptions(mode=mode, k_max_steps=k_max_steps, grid_size=64,
                         ode_steps=64, series_k_max=16, series_d_max=4,
                         floor_rel=1e-22)
    return decomp, chain, sched, opts

"""The explicit constant chain and the geometric/superexponential schedules.

Every constant from the small-divisor c6 upward is a closed-form
expression; the schedules delta_k = delta_0/4^k, s_k = delta_k^(tau+1),
M_k = s_k^2 t_0^(1.5^k) / c15 mesh so that one contraction step maps the
hypotheses of the next into themselves.
"""

import numpy as np

from kamtori import build_schedule, catalog, constants_chain, \
    series_tail_check
from kamtori.cohomology import amplification_estimate

omega = catalog("golden").certified(64)
gamma = omega.effective_gamma()
c6 = amplification_estimate(omega, 16, 0.05 ** 0.5 / 32.0)
chain = constants_chain(2, 1.0, gamma, np.eye(2), omega.omega_norm, c6,
                        c6_source="amplification_estimate")

print("inputs: n=2, tau=1, gamma =", f"{gamma:.6f}", ", c6 =", f"{c6:.4f}")
for name in ("c7", "c8", "c9t", "c10", "c11", "c12", "c13", "c14", "c15",
             "c17", "c18", "c19", "c20", "c1", "c2", "c3", "c4", "c5"):
    print(f"  {name:>4} = {getattr(chain, name):.6e}")
print("c15 * c18 =", f"{chain.c15 * chain.c18:.4f}", ">= 26/16 =",
      26 / 16)

theta = min(1e-6, chain.c1)
sched = build_schedule(1.0, 1.0, theta, 1.0, chain, 8)
print("\nschedule on r = s = 1 (delta0 = 1/32, s0 = 1/1024, r0 = 1):")
print(f"{'k':>2} {'r_k':>10} {'delta_k':>12} {'s_k':>12} {'M_k':>12}")
for k in range(6):
    print(f"{k:>2} {sched.r_k[k]:>10.6f} {sched.delta_k[k]:>12.3e} "
          f"{sched.s_k[k]:>12.3e} {sched.M_k[k]:>12.3e}")
print("sum M_k / s_k^2 =", f"{float(np.sum(sched.M_k / sched.s_k**2)):.3e}",
      "<= 2 t0 / c15 =", f"{2 * theta / chain.c15:.3e}")

print("\nsuperexponential tail bound sum t^(m^k) <= t/(1 - t^(m-1)):")
for t, m in ((0.1, 1.5), (0.5, 2.0), (0.9, 1.1)):
    lhs, rhs = series_tail_check(t, m, 60)
    print(f"  t={t}, m={m}: partial sum {lhs:.6f} <= bound {rhs:.6f}")

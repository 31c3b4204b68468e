"""Solving the small-divisor equation <u_xi, omega> = g on the torus.

The golden-ratio frequency keeps every divisor i<k, omega> away from zero;
the solver divides coefficient by coefficient and resubstitution confirms
exactness on the retained modes.  The amplification scan shows how much
norm inflation the truncated solve can actually produce, which is where
the engine's default small-divisor constant comes from.
"""

import numpy as np

from kamtori import FTSeries, amplification_estimate, catalog, solve
from kamtori.cohomology import residual

omega = catalog("golden").certified(200)
print("frequency:", omega.omega, " tau:", omega.tau)
print("empirical gamma over |k| <= 200:",
      f"{omega.certification.gamma_min:.10f} at k ="
      f" {omega.certification.argmin_k}")

# single mode: cos(x1 + x2) picks up the divisor <(1,1), omega>
g = FTSeries.cosine(2, (1, 1))
u = solve(g, omega)
div = float(omega.omega @ [1, 1])
print("\nsolve for g = cos(x1+x2): u = sin(x1+x2) /", f"{div:.10f}")
print("   u coefficient at k=(1,1):", u.coefficient((1, 1), (0, 0)))
print("   resubstitution residual:", residual(u, g, omega).majorant())

# a rougher right-hand side: several modes with near-resonant divisors
rng = np.random.default_rng(1)
terms = {}
for _ in range(10):
    k = tuple(int(v) for v in rng.integers(-8, 9, size=2))
    if k == (0, 0):
        continue
    c = complex(rng.normal(), rng.normal())
    terms[(k, (0, 0))] = terms.get((k, (0, 0)), 0) + 0.5 * c
    mk = (-k[0], -k[1])
    terms[(mk, (0, 0))] = terms.get((mk, (0, 0)), 0) + 0.5 * np.conj(c)
g = FTSeries(2, terms, real_valued=True)
u = solve(g, omega)
print("\nrandom zero-mean g with K = 8:")
print("   |g| =", f"{g.majorant():.3e}", "  |u| =", f"{u.majorant():.3e}")
print("   residual / |g| =",
      f"{residual(u, g, omega).majorant() / g.majorant():.3e}")

# divisor amplification: the empirical counterpart of the c6 M/(gamma
# delta^tau) bound for the truncated operator
for delta in (0.5, 0.25, 0.1):
    c6 = amplification_estimate(omega, 32, delta)
    print(f"amplification estimate at K=32, delta={delta}: c6 >= {c6:.4f}")

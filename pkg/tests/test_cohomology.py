import math

import numpy as np
import pytest

from kamtori.cohomology import (
    MeanValueError,
    ResonanceError,
    amplification_estimate,
    residual,
    solve,
    solve_vector,
)
from kamtori.diophantine import FrequencyVector, catalog
from kamtori.series import FTSeries

PHI = (math.sqrt(5.0) - 1.0) / 2.0


@pytest.fixture(scope="module")
def golden():
    return catalog("golden").certified(64)


def random_zero_mean(rng, n=2, K=8, terms=12):
    d = {}
    z = (0,) * n
    for _ in range(terms):
        k = tuple(int(v) for v in rng.integers(-K, K + 1, size=n))
        if k == z:
            continue
        c = complex(rng.normal(), rng.normal())
        mk = tuple(-v for v in k)
        d[(k, z)] = d.get((k, z), 0) + 0.5 * c
        d[(mk, z)] = d.get((mk, z), 0) + 0.5 * np.conj(c)
    return FTSeries(n, d, real_valued=True)


class TestSolve:
    def test_cos_gives_sin(self, golden):
        g = FTSeries.cosine(2, (1, 0))
        u = solve(g, golden)
        ref = FTSeries.sine(2, (1, 0))
        for key, v in ref.items():
            assert u.coefficient(*key) == pytest.approx(v)
        assert residual(u, g, golden).majorant() <= 1e-14

    def test_mixed_mode(self, golden):
        g = FTSeries.cosine(2, (1, 1))
        u = solve(g, golden)
        want = FTSeries.sine(2, (1, 1)).scale(1.0 / (1.0 + PHI))
        for key, v in want.items():
            assert u.coefficient(*key) == pytest.approx(v, rel=1e-12)

    def test_random_resubstitution(self, golden):
        rng = np.random.default_rng(101)
        for _ in range(10):
            g = random_zero_mean(rng)
            u = solve(g, golden)
            res = residual(u, g, golden)
            assert res.majorant() <= 1e-12 * g.majorant()
            assert u.coefficient((0, 0), (0, 0)) == 0.0
            assert u.real_valued

    def test_linearity(self, golden):
        rng = np.random.default_rng(55)
        g1 = random_zero_mean(rng)
        g2 = random_zero_mean(rng)
        a, b = 1.7, -0.3
        lhs = solve(g1.scale(a) + g2.scale(b), golden)
        rhs = solve(g1, golden).scale(a) + solve(g2, golden).scale(b)
        diff = lhs - rhs
        assert diff.majorant() <= 1e-13 * (lhs.majorant() + 1e-300)

    def test_rejects_nonzero_mean(self, golden):
        g = FTSeries.constant(2, 1.0) + FTSeries.cosine(2, (1, 0))
        with pytest.raises(MeanValueError):
            solve(g, golden)

    def test_rejects_y_dependence(self, golden):
        g = FTSeries.y_monomial(2, (1, 0))
        with pytest.raises(ValueError):
            solve(g, golden)

    def test_exact_resonance(self):
        fv = FrequencyVector(np.array([1.0, 1.0]), tau=1.0)
        g = FTSeries.cosine(2, (1, -1))
        with pytest.raises(ResonanceError) as ei:
            solve(g, fv)
        assert ei.value.k in ((1, -1), (-1, 1))


class TestSolveVector:
    def test_componentwise(self, golden):
        G = [FTSeries.cosine(2, (1, 0), amplitude=1.0), FTSeries.zero(2)]
        V = solve_vector(G, golden)
        ref = FTSeries.sine(2, (1, 0))
        for key, v in ref.items():
            assert V[0].coefficient(*key) == pytest.approx(v)
        assert V[1].is_zero

    def test_zero_in_zero_out(self, golden):
        V = solve_vector([FTSeries.zero(2), FTSeries.zero(2)], golden)
        assert all(v.is_zero for v in V)


class TestAmplification:
    def test_positive_and_covers_solver(self, golden):
        rng = np.random.default_rng(77)
        K, delta = 8, 0.25
        c6 = amplification_estimate(golden, K, delta)
        assert c6 > 0
        gamma = golden.effective_gamma()
        tau = golden.tau
        for _ in range(5):
            g = random_zero_mean(rng, K=K)
            u = solve(g, golden)
            rho = 0.5
            lhs = u.majorant(rho - delta, 0.0)
            rhs = c6 * g.majorant(rho, 0.0) / (gamma * delta ** tau)
            assert lhs <= rhs * (1 + 1e-12)

    def test_k1_by_hand(self, golden):
        # only the 8 modes |k|_inf = 1 (canonical half: 4)
        delta = 0.3
        gamma = golden.effective_gamma()
        vals = []
        for k in [(0, 1), (1, -1), (1, 0), (1, 1)]:
            div = abs(golden.omega @ np.array(k))
            l1 = sum(abs(v) for v in k)
            vals.append(gamma * delta / (div * math.exp(l1 * delta)))
        want = max(vals)
        got = amplification_estimate(golden, 1, delta)
        assert got == pytest.approx(want, rel=1e-12)

    def test_resonant_guard(self):
        fv = FrequencyVector(np.array([1.0, 1.0]), tau=1.0, gamma_claimed=0.1)
        with pytest.raises(ResonanceError):
            amplification_estimate(fv, 4, 0.2)

import math

import numpy as np
import pytest

from kamtori.constants import (
    Schedule,
    ScheduleError,
    build_schedule,
    constants_chain,
    series_tail_check,
)


def reference_chain(n, tau, gamma, C, omega_norm, c6):
    """Independent spreadsheet-style re-evaluation of every formula."""
    C = np.asarray(C, float)
    nc = max(abs(C).sum(axis=1))
    nci = max(abs(np.linalg.inv(C)).sum(axis=1))
    out = {}
    out["c12"] = 1 + 4 * c6 * nc / gamma
    out["c13"] = 1 + n * out["c12"] * (1 + 4 * nc * nci)
    out["c8"] = c6 / gamma * out["c12"] * (1 + 4 * nc * nci)
    out["c7"] = 2 * nci * out["c12"] + 2 * c6 / gamma + n * out["c8"]
    out["c9t"] = 1 + 2 * n * omega_norm * nci * out["c12"]
    out["c10"] = 1 + n * n * nc * (2 * out["c7"] + out["c8"]) + out["c13"]
    out["c11"] = 64 * out["c10"]
    out["c14"] = 8 * n * (out["c7"] + out["c8"])
    out["c15"] = n * (1 + out["c10"]) * (4 * out["c7"] + out["c8"])
    out["c17"] = 1 / (4 * out["c11"] * nci)
    out["c18"] = 1 / (16 * (out["c7"] + out["c8"]))
    q, mu = 0.25, 1.5
    out["c19"] = min(q ** ((2 * tau + 2) / (2 - mu)),
                     out["c15"] * out["c17"] / 2)
    out["c20"] = n * (out["c7"] + out["c8"]) * math.exp(
        out["c14"] * out["c17"])
    out["c1"] = min(out["c19"], out["c15"] / (32 * n * n
                                              * (out["c7"] + out["c8"])
                                              * math.exp(out["c14"]
                                                         * out["c17"])))
    out["c2"] = 1 / (32 ** (2 * (tau + 1)) * out["c15"])
    out["c3"] = 16 * n * out["c20"] / out["c15"]
    out["c4"] = 2 * out["c11"] / out["c15"]
    out["c5"] = 512 / 25
    return out


class TestConstantsChain:
    def test_c5_exact(self):
        ch = constants_chain(2, 1.0, 0.38, np.eye(2), 1.0, 1.0)
        assert ch.c5 == 512.0 / 25.0 == 20.48

    def test_c15_c18_lower_bound(self):
        for c6 in (0.05, 1.0, 7.0):
            ch = constants_chain(2, 1.0, 0.38, np.eye(2), 1.6, c6)
            assert ch.c15 * ch.c18 >= 26.0 / 16.0

    def test_matches_reference_evaluation(self):
        cases = [
            (2, 1.0, 0.38, np.eye(2), 1.0, 1.0),
            (2, 1.5, 0.2, np.array([[1.0, 0.1], [0.1, 2.0]]), 1.62, 0.3),
            (3, 2.0, 0.05, np.diag([1.0, 0.5, 2.0]), 1.0, 4.0),
        ]
        for n, tau, gamma, C, om, c6 in cases:
            ch = constants_chain(n, tau, gamma, C, om, c6)
            ref = reference_chain(n, tau, gamma, C, om, c6)
            for name, want in ref.items():
                got = getattr(ch, name)
                assert got == pytest.approx(want, rel=1e-14), name

    def test_rejects_bad_tau(self):
        with pytest.raises(ValueError):
            constants_chain(3, 1.0, 0.38, np.eye(3), 1.0, 1.0)

    def test_rejects_singular_C(self):
        with pytest.raises(np.linalg.LinAlgError):
            constants_chain(2, 1.0, 0.38, np.zeros((2, 2)), 1.0, 1.0)


@pytest.fixture(scope="module")
def chain():
    return constants_chain(2, 1.0, 0.38, np.eye(2), 1.6180339887, 1.0)


class TestSchedule:
    def test_unit_domain_values(self, chain):
        sched = build_schedule(1.0, 1.0, min(1e-6, chain.c1), 1.0, chain, 8)
        assert sched.delta0 == pytest.approx(1.0 / 32.0)
        assert sched.s_k[0] == pytest.approx(1.0 / 1024.0)
        assert sched.r_k[0] == pytest.approx(1.0)

    def test_s_ratio(self, chain):
        sched = build_schedule(1.0, 1.0, min(1e-6, chain.c1), 1.0, chain, 8)
        ratios = sched.s_k[1:] / sched.s_k[:-1]
        assert np.allclose(ratios, 1.0 / 16.0, rtol=1e-14)

    def test_budget_tail(self, chain):
        t0 = min(1e-6, chain.c1)
        sched = build_schedule(1.0, 1.0, t0, 1.0, chain, 40)
        assert float(np.sum(sched.M_k / sched.s_k ** 2)) \
            <= 2.0 * t0 / chain.c15

    def test_theta_guard(self, chain):
        with pytest.raises(ScheduleError):
            build_schedule(1.0, 1.0, chain.c1 * 1.01, 1.0, chain, 4)

    def test_theta_clamp_mode(self, chain):
        sched = build_schedule(1.0, 1.0, chain.c1 * 10, 1.0, chain, 4,
                               enforce_theta=False)
        assert sched.t0 == chain.c1

    def test_domain_guard(self, chain):
        with pytest.raises(ScheduleError):
            build_schedule(0.5, 0.3, 1e-6, 1.0, chain, 4)  # s > r^2

    def test_mesh_lemma(self, chain):
        sched = build_schedule(0.8, 0.05, min(1e-6, chain.c1), 1.0, chain,
                               12)
        r, d, s = sched.r_k, sched.delta_k, sched.s_k
        assert np.all(r >= 0.75 * 0.8)
        assert np.all(d < r / 6)
        assert np.all(s <= d ** 2)
        # exact equality case in reals; allow an ulp in floats
        assert np.all(r[1:] <= r[:-1] - 6 * d[:-1] + 1e-14)
        assert np.all(s[1:] <= s[:-1] / 8)


class TestSeriesTail:
    @pytest.mark.parametrize("t,m", [(0.1, 1.5), (0.5, 2.0), (0.9, 1.1)])
    def test_bound_holds(self, t, m):
        lhs, rhs = series_tail_check(t, m, 60)
        assert lhs <= rhs

    def test_known_value(self):
        lhs, rhs = series_tail_check(0.1, 1.5, 60)
        assert rhs == pytest.approx(0.1 / (1 - 0.1 ** 0.5))
        assert lhs <= 0.1463

    def test_geometric_case(self):
        lhs, rhs = series_tail_check(0.5, 2.0, 30)
        assert rhs == pytest.approx(1.0)
        assert lhs == pytest.approx(0.5 + 0.25 + 0.0625 + 0.5 ** 8
                                    + 0.5 ** 16, abs=1e-9)

    def test_small_t_ratio_near_one(self):
        t = 1e-8
        lhs, rhs = series_tail_check(t, 1.5, 40)
        assert lhs / rhs == pytest.approx(1.0, abs=1e-3)

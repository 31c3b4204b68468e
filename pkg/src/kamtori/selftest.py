"""Built-in check battery: the worked micro-examples of every module.

Each check is tiny and has a hand-verifiable expected value; together with
the constants-chain identities and the superexponential tail bound they
form the CLI ``selftest`` subcommand.
"""

from __future__ import annotations

import math

import numpy as np

from . import cohomology, diophantine, flows, linearized, series
from .constants import build_schedule, constants_chain, series_tail_check
from .diophantine import catalog
from .series import FTSeries

__all__ = ["run_selftest"]

PHI = (math.sqrt(5.0) - 1.0) / 2.0


def _close(a, b, tol=1e-12):
    return abs(a - b) <= tol * max(1.0, abs(b))


def _checks():
    n = 2
    golden = catalog("golden").certified(64)
    ident = np.eye(2)

    def series_eval_constant():
        f = FTSeries.constant(n, 5.0)
        return f.eval(np.array([0.1, 0.2]), np.zeros(2)) == 5.0

    def series_eval_cos0():
        return _close(FTSeries.cosine(n, (1, 0)).eval(np.zeros(2)), 1.0)

    def series_eval_linear_form():
        f = FTSeries.y_linear(n, golden.omega)
        return _close(f.eval(np.zeros(2), np.ones(2)), 1.0 + PHI)

    def series_mul_cos_squared():
        p = FTSeries.cosine(n, (1, 0)).mul(FTSeries.cosine(n, (1, 0)))
        return _close(p.coefficient((0, 0), (0, 0)), 0.5) and \
            _close(p.coefficient((2, 0), (0, 0)), 0.25)

    def series_mul_identity():
        f = FTSeries.cosine(n, (1, 1), 0.3)
        g = f.mul(FTSeries.constant(n, 1.0))
        return all(_close(g.coefficient(*k), c) for k, c in f.items())

    def series_mul_monomial():
        y1 = FTSeries.y_monomial(n, (1, 0))
        return y1.mul(y1).D == 2

    def series_dx_sin():
        got = FTSeries.sine(n, (1, 0)).dx(0)
        return _close(got.coefficient((1, 0), (0, 0)), 0.5)

    def series_dy_quadratic():
        f = FTSeries.y_monomial(n, (2, 0), 0.5) \
            + FTSeries.y_monomial(n, (0, 2), 0.5)
        return _close(f.dy(0).coefficient((0, 0), (1, 0)), 1.0)

    def series_dx_constant():
        return FTSeries.constant(n, 3.0).dx(1).is_zero

    def series_mean_cos():
        return FTSeries.cosine(n, (1, 0)).mean_x().is_zero

    def series_mean_shift():
        f = FTSeries.constant(n, 3.0) + FTSeries.sine(n, (0, 1))
        return _close(f.mean_x().coefficient((0, 0), (0, 0)), 3.0)

    def series_mean_of_derivative():
        u = FTSeries.cosine(n, (2, 1), 0.7)
        return u.dx(0).mean_x().is_zero

    def poisson_sin_y():
        b = series.poisson(FTSeries.sine(n, (1, 0)),
                           FTSeries.y_monomial(n, (1, 0)))
        return _close(b.coefficient((1, 0), (0, 0)), 0.5)

    def poisson_antisym():
        f = FTSeries.cosine(n, (1, 0)) + FTSeries.y_monomial(n, (1, 0))
        return series.poisson(f, f).majorant(0.0, 1.0) <= 1e-14

    def poisson_omega_rule():
        h = FTSeries.y_linear(n, golden.omega)
        u = FTSeries.cosine(n, (1, 0))
        got = series.poisson(h, u)
        want = u.dx(0).scale(-golden.omega[0])
        return _close(got.coefficient((1, 0), (0, 0)),
                      want.coefficient((1, 0), (0, 0)))

    def majorant_constant():
        return FTSeries.constant(n, 5.0).majorant(1.0, 2.0) == 5.0

    def majorant_cos_zero_width():
        return _close(FTSeries.cosine(n, (1, 0)).majorant(0.0, 0.0), 1.0)

    def cauchy_formula():
        return series.cauchy_bound(1.0, 0.5) == 2.0 and \
            series.cauchy_bound(2.0, 0.1) == 20.0

    def cubic_tail_values():
        a = series.cubic_tail_bound(1.0, 0.8, 0.5, 1.0)
        b = series.cubic_tail_bound(1.0, 0.5, 0.25, 1.0)
        c = series.cubic_tail_bound(2.0, 0.5, 0.0, 1.0)
        return _close(a, 0.625) and _close(b, 0.03125) and c == 0.0

    def dio_resonant():
        cert = diophantine.certify(np.array([1.0, 1.0]), 1.0, 2)
        return cert.gamma_min == 0.0 and cert.argmin_k == (1, -1)

    def dio_rational():
        cert = diophantine.certify(np.array([1.0, 0.5]), 1.0, 3)
        return cert.gamma_min == 0.0 and cert.argmin_k == (1, -2)

    def dio_catalog():
        a = _close(catalog("golden").omega[1], 0.6180339887, 1e-9)
        b = _close(catalog("sqrt2").omega[1], 0.4142135624, 1e-9)
        try:
            catalog("unknown")
            return False
        except KeyError:
            return a and b

    def coh_cos_to_sin():
        u = cohomology.solve(FTSeries.cosine(n, (1, 0)), golden)
        return _close(u.coefficient((1, 0), (0, 0)), complex(0, -0.5))

    def coh_single_mode():
        u = cohomology.solve(FTSeries.cosine(n, (1, 1)), golden)
        return _close(u.coefficient((1, 1), (0, 0)),
                      0.5 / (1j * (1 + PHI)))

    def coh_vector():
        V = cohomology.solve_vector(
            [FTSeries.cosine(n, (1, 0)), FTSeries.zero(n)], golden)
        return _close(V[0].coefficient((1, 0), (0, 0)), -0.5j) \
            and V[1].is_zero

    def coh_resonance_guard():
        fv = diophantine.FrequencyVector(np.array([1.0, 1.0]), 1.0)
        try:
            cohomology.solve(FTSeries.cosine(n, (1, -1)), fv)
            return False
        except cohomology.ResonanceError:
            return True

    def lin_matrix_lemma():
        P = ident + 0.1 * np.array([[0.0, 1.0], [1.0, 0.0]])
        inv = linearized.matrix_perturb_inverse(ident, P, 0.2)
        ok = linearized.rowsum_norm(inv) <= 1.25
        try:
            linearized.matrix_perturb_inverse(
                np.diag([1.0, 2.0]), np.diag([1.0, 2.0])
                + np.array([[0.0, 0.9], [0.0, 0.0]]), 0.2)
            return False
        except linearized.PerturbationBoundError:
            return ok

    def lin_solve_u():
        f = FTSeries.cosine(n, (1, 0), 1e-3)
        U = linearized.solve_U(f, golden)
        ok1 = _close(U.coefficient((1, 0), (0, 0)), -0.5e-3j)
        ok2 = linearized.solve_U(FTSeries.constant(n, 2.0), golden).is_zero
        return ok1 and ok2

    def lin_lambda_linear():
        b = np.array([0.25, -0.5])
        f = FTSeries.y_linear(n, b)
        N = FTSeries.y_linear(n, golden.omega) \
            + FTSeries.y_monomial(n, (2, 0), 0.5) \
            + FTSeries.y_monomial(n, (0, 2), 0.5)
        U = linearized.solve_U(f, golden)
        lam = linearized.solve_lambda(f, U, linearized.yy_matrix_at_zero(N),
                                      ident)
        return np.allclose(lam, b, atol=1e-14)

    def lin_delta_n_constant():
        f = FTSeries.constant(n, 0.125)
        N = FTSeries.y_linear(n, golden.omega) \
            + FTSeries.y_monomial(n, (2, 0), 0.5) \
            + FTSeries.y_monomial(n, (0, 2), 0.5)
        dS = linearized.build_generating_function(f, N, golden, ident)
        dN = linearized.build_delta_N(f, N, dS, golden)
        return dS.is_zero and _close(dN.deltaN0, 0.125)

    def flow_rigid_shift():
        c = np.array([0.3, -0.2])
        gen = linearized.GeneratingFunction(
            np.zeros(2), FTSeries.zero(n),
            [FTSeries.constant(n, c[0]), FTSeries.constant(n, c[1])],
            check_means=False)
        Z = flows.integrate_flow(gen, grid_size=8, steps=4)
        xi = np.array([[0.5, 1.0]])
        x, y = Z(xi, np.zeros((1, 2)))
        return np.allclose(x, xi + c, atol=1e-12) and \
            np.allclose(y, 0.0, atol=1e-12)

    def flow_window_guard():
        c78, s = 30.0, 0.1
        win = flows.flow_window(None, s * s / (16 * c78), s, 0.05, c78=c78)
        ok = _close(win.horizon, 2.0)
        try:
            flows.flow_window(None, s * s / (2 * c78), s, 0.05, c78=c78)
            return False
        except flows.FlowWindowError:
            return ok

    def flow_identity_chain():
        chain = flows.compose([])
        xi = np.array([[0.3, 0.4]])
        eta = np.array([[0.1, -0.2]])
        x, y = flows.evaluate_chain(chain, xi, eta)
        return np.allclose(x, xi) and np.allclose(y, eta)

    def flow_shift_composition():
        a, b = np.array([0.2, 0.1]), np.array([-0.05, 0.4])

        def shift(c):
            return flows.integrate_flow(linearized.GeneratingFunction(
                np.zeros(2), FTSeries.zero(n),
                [FTSeries.constant(n, c[0]), FTSeries.constant(n, c[1])],
                check_means=False), grid_size=8, steps=4)
        chain = flows.compose([shift(a), shift(b)])
        xi = np.array([[1.0, 2.0]])
        x, _ = chain.evaluate(xi, np.zeros((1, 2)))
        return np.allclose(x, xi + a + b, atol=1e-12)

    def chain_c5_exact():
        ch = constants_chain(2, 1.0, 0.38, ident, 1.0, 1.0)
        return ch.c5 == 512.0 / 25.0

    def chain_c15_c18():
        ch = constants_chain(2, 1.0, 0.38, ident, 1.0, 1.0)
        return ch.c15 * ch.c18 >= 26.0 / 16.0

    def schedule_unit_domain():
        ch = constants_chain(2, 1.0, 0.38, ident, 1.0, 1.0)
        sched = build_schedule(1.0, 1.0, min(1e-6, ch.c1), 1.0, ch, 6)
        return _close(sched.delta0, 1 / 32) and \
            _close(sched.s_k[0], 1 / 1024) and _close(sched.r_k[0], 1.0)

    def schedule_theta_guard():
        ch = constants_chain(2, 1.0, 0.38, ident, 1.0, 1.0)
        try:
            build_schedule(1.0, 1.0, ch.c1 * 2, 1.0, ch, 4)
            return False
        except Exception:
            return True

    def tail_bounds():
        ok = True
        for t, m in ((0.1, 1.5), (0.5, 2.0), (0.9, 1.1)):
            lhs, rhs = series_tail_check(t, m, 60)
            ok = ok and lhs <= rhs
        return ok

    return [(f.__name__, f) for f in (
        series_eval_constant, series_eval_cos0, series_eval_linear_form,
        series_mul_cos_squared, series_mul_identity, series_mul_monomial,
        series_dx_sin, series_dy_quadratic, series_dx_constant,
        series_mean_cos, series_mean_shift, series_mean_of_derivative,
        poisson_sin_y, poisson_antisym, poisson_omega_rule,
        majorant_constant, majorant_cos_zero_width, cauchy_formula,
        cubic_tail_values, dio_resonant, dio_rational, dio_catalog,
        coh_cos_to_sin, coh_single_mode, coh_vector, coh_resonance_guard,
        lin_matrix_lemma, lin_solve_u, lin_lambda_linear,
        lin_delta_n_constant, flow_rigid_shift, flow_window_guard,
        flow_identity_chain, flow_shift_composition, chain_c5_exact,
        chain_c15_c18, schedule_unit_domain, schedule_theta_guard,
        tail_bounds)]


def run_selftest(out=print):
    """Run every check; returns the number of failures."""
    failures = 0
    for name, check in _checks():
        try:
            ok = bool(check())
        except Exception as exc:  # a crashed check is a failed check
            ok = False
            out(f"FAIL {name}: {exc!r}")
            failures += 1
            continue
        out(f"{'PASS' if ok else 'FAIL'} {name}")
        failures += 0 if ok else 1
    out(f"selftest: {len(_checks()) - failures}/{len(_checks())} passed")
    return failures

"""Time-1 Hamiltonian flows as simple canonical transformations.

The generator dS = <lambda, x> + U(x) + <V(x), y> is affine in y, so the
canonical system

    dx/dt = dS_y = V(x),
    dy/dt = -dS_x = -(lambda + U_x(x) + y . V_x(x))

has an x-path independent of y; its time-1 map Z(xi, eta) = (X(xi), Y(xi,
eta)) is a simple canonical transformation with the affine structure
Y(xi, eta) = Y(xi, 0) + eta X_xi(xi)^{-1}.  The integrator is a classical
fixed-step 4th-order one-step method applied jointly to (x, y) from every
node of a uniform torus grid; the x-path is integrated as a displacement
d = x - xi so its accuracy is relative to the displacement itself.  Nodal
results become Fourier series (Xp, Y0, and the inverse Jacobian), and the
Jacobian comes from spectral differentiation of the interpolated Xp.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linearized import GeneratingFunction
from .sampling import SplitMix64
from .series import FTSeries, PhaseTable, from_grid, vector_majorant

__all__ = [
    "FlowWindow",
    "FlowWindowError",
    "DomainEscapeError",
    "SimpleCanonicalMap",
    "TransformationChain",
    "flow_window",
    "integrate_flow",
    "integrate_points",
    "check_symplectic",
    "affine_identity_defect",
    "compose",
    "evaluate_chain",
    "jacobian_growth_audit",
]

DEFAULT_ODE_STEPS = 64
ASSEMBLY_DROP_REL = 1e-13


class FlowWindowError(ArithmeticError):
    """The guaranteed existence horizon of the flow does not reach t = 1."""


class DomainEscapeError(ArithmeticError):
    """A trajectory left the certified box before t = 1."""


@dataclass(frozen=True)
class FlowWindow:
    """Existence window of the generated flow: [0, sigma*delta/(2K))."""

    K_bound: float
    delta: float
    sigma: float

    @property
    def horizon(self):
        return self.sigma * self.delta / (2.0 * self.K_bound) \
            if self.K_bound > 0 else np.inf

    def to_json_obj(self):
        return {"K_bound": self.K_bound, "delta": self.delta,
                "sigma": self.sigma, "horizon": self.horizon}


def flow_window(dS: GeneratingFunction, M, s, delta, c78=None, rho=None):
    """Lipschitz budget K and existence horizon for the time-1 map.

    With the chain constant ``c78`` = c7 + c8 supplied, K = (c7+c8) M
    delta / s (the certified budget; the horizon then is
    s^2 / (8 (c7+c8) M), at least 2 whenever M <= s^2/(16 (c7+c8))).
    Without it, K is measured from the generator itself as the smallest
    budget satisfying |dS_x| <= K/delta and |dS_y| <= K/sigma in the
    majorant norm at x-width ``rho`` (default 0).  Raises when the horizon
    does not exceed 1.
    """
    if not (M >= 0 and s > 0 and delta > 0):
        raise ValueError("need M >= 0, s > 0, delta > 0")
    sigma = s / 4.0
    if c78 is not None:
        K = (c78) * M * delta / s
    else:
        rho = 0.0 if rho is None else rho
        gx = vector_majorant(dS.grad_x(), rho, sigma)
        gy = vector_majorant(dS.grad_y(), rho, sigma)
        K = max(gx * delta, gy * sigma)
    win = FlowWindow(K_bound=float(K), delta=float(delta), sigma=float(sigma))
    if not win.horizon > 1.0:
        raise FlowWindowError(
            f"flow horizon sigma*delta/(2K) = {win.horizon:.4g} <= 1; "
            "perturbation too large for a time-1 flow under this budget")
    return win


class _GeneratorTables:
    """Packed coefficients of V, U_x and V_x for batched RHS evaluation.

    The base-point phase matrix exp(i <k, xi>) is gathered once; per stage
    only the displacement factor exp(i <k, d>) is applied, and it is
    skipped entirely while |<k, d>| stays below an ulp (the generic case
    late in the iteration, where the generator is minuscule).
    """

    def __init__(self, dS: GeneratingFunction, points):
        n = dS.n
        self.n = n
        series = [dS.V[i] for i in range(n)]
        series += [dS.U.dx(j) for j in range(n)]
        for j in range(n):           # V_x columns: d V_i / d x_j
            for i in range(n):
                series.append(dS.V[i].dx(j))
        modes = {}
        for f in series:
            for (k, _), _c in f.items():
                modes.setdefault(k, len(modes))
        self.modes = np.array(sorted(modes), dtype=np.int64).reshape(
            -1, n) if modes else np.zeros((0, n), dtype=np.int64)
        index = {tuple(k): i for i, k in enumerate(self.modes)}
        C = np.zeros((len(index), len(series)), dtype=np.complex128)
        for col, f in enumerate(series):
            for (k, _), c in f.items():
                C[index[k], col] = c
        self.lam = dS.lam
        self.k_l1_max = int(np.max(np.sum(np.abs(self.modes), axis=1))) \
            if len(self.modes) else 0
        if len(self.modes):
            base = PhaseTable(points, int(np.max(np.abs(self.modes))))
            self._base_phases = base.gather(self.modes)        # (P, m)
            self._modes_f = self.modes.T.astype(np.float64)     # (n, m)
            self._weighted = self._base_phases @ C              # (P, S)
            self._coeffs = C
        else:
            self._base_phases = None
            self._weighted = np.zeros((len(points), len(series)))

    def _values(self, d):
        if self._base_phases is None:
            return self._weighted
        if self.k_l1_max * float(np.max(np.abs(d))) < 1e-8:
            # exp(i <k, d>) == 1 to well under machine precision
            return self._weighted
        theta = d @ self._modes_f
        phases = self._base_phases * np.exp(1j * theta)
        return phases @ self._coeffs

    def rhs(self, d, y):
        """Time derivatives (d_dot, y_dot) at x = nodes + d."""
        n = self.n
        vals = self._values(d).real
        V = vals[:, :n]
        Ux = vals[:, n:2 * n]
        d_dot = V
        y_dot = -(self.lam[None, :] + Ux)
        for j in range(n):
            block = vals[:, 2 * n + j * n:2 * n + (j + 1) * n]  # dV_i/dx_j
            y_dot[:, j] = y_dot[:, j] - np.einsum("pi,pi->p", y, block)
        return d_dot, y_dot


def integrate_points(dS: GeneratingFunction, xi, eta, steps,
                     window: FlowWindow | None = None):
    """RK4 time-1 flow from the points (xi, eta); returns (dx, y, stats).

    The x-path is returned as the displacement dx = x(1) - xi: adding the
    base point would floor the displacement at an ulp of 2 pi and bury its
    small Fourier modes in white noise.  The full 2n-dimensional system is
    integrated, so this also serves as the independent check of the
    affine-in-eta reconstruction.
    """
    xi = np.asarray(xi, dtype=np.float64)
    eta = np.asarray(eta, dtype=np.float64)
    tables = _GeneratorTables(dS, xi)
    d = np.zeros_like(xi)
    y = eta.copy()
    h = 1.0 / steps
    max_d = 0.0
    max_y = float(np.max(np.abs(y))) if y.size else 0.0
    for _ in range(steps):
        k1d, k1y = tables.rhs(d, y)
        k2d, k2y = tables.rhs(d + 0.5 * h * k1d, y + 0.5 * h * k1y)
        k3d, k3y = tables.rhs(d + 0.5 * h * k2d, y + 0.5 * h * k2y)
        k4d, k4y = tables.rhs(d + h * k3d, y + h * k3y)
        d = d + (h / 6.0) * (k1d + 2 * k2d + 2 * k3d + k4d)
        y = y + (h / 6.0) * (k1y + 2 * k2y + 2 * k3y + k4y)
        max_d = max(max_d, float(np.max(np.abs(d))) if d.size else 0.0)
        max_y = max(max_y, float(np.max(np.abs(y))) if y.size else 0.0)
        if window is not None:
            if max_d > window.delta / 2.0:
                raise DomainEscapeError(
                    f"x-displacement {max_d:.3e} exceeded delta/2 = "
                    f"{window.delta / 2:.3e}")
            if max_y > window.sigma / 2.0:
                raise DomainEscapeError(
                    f"|y| = {max_y:.3e} exceeded sigma/2 = "
                    f"{window.sigma / 2:.3e}")
    return d, y, {"max_dx": max_d, "max_y": max_y}


@dataclass
class SimpleCanonicalMap:
    """Z(xi, eta) = (xi + Xp(xi), Y0(xi) + eta X_xi(xi)^{-1}).

    ``jinv_m1`` stores X_xi^{-1} - E entrywise, which keeps the small part
    of the inverse Jacobian at full relative precision; the identity is
    added back wherever the inverse itself is needed.
    """

    n: int
    Xp: list
    Y0: list
    jinv_m1: list
    grid_meta: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def identity(cls, n):
        zero = FTSeries.zero(n)
        return cls(n=n, Xp=[zero] * n, Y0=[zero] * n,
                   jinv_m1=[[zero] * n for _ in range(n)],
                   grid_meta={"identity": True})

    # -- evaluation ----------------------------------------------------

    def _eval_table(self, xi):
        series = list(self.Xp) + list(self.Y0) + \
            [self.jinv_m1[m][i] for m in range(self.n)
             for i in range(self.n)]
        kmax = max((f.K for f in series if not f.is_zero), default=0)
        table = PhaseTable(np.asarray(xi, dtype=np.float64), kmax)
        return table

    def _batch_series(self, table, series_list):
        out = []
        for f in series_list:
            if f.is_zero:
                out.append(np.zeros(table.P))
                continue
            ks, _als, cs = f._pack()
            out.append((table.gather(ks) @ cs).real)
        return np.stack(out, axis=-1) if out else np.zeros((table.P, 0))

    def __call__(self, xi, eta):
        """Batched evaluation; xi, eta arrays of shape (P, n)."""
        xi = np.atleast_2d(np.asarray(xi, dtype=np.float64))
        eta = np.atleast_2d(np.asarray(eta, dtype=np.float64))
        table = self._eval_table(xi)
        xp = self._batch_series(table, self.Xp)
        y0 = self._batch_series(table, self.Y0)
        x = xi + xp
        y = y0 + eta
        for m in range(self.n):
            col = self._batch_series(table, self.jinv_m1[m])  # (P, n): i
            y += eta[:, m:m + 1] * col
        return x, y

    def _partials(self):
        if "dXp" not in self._cache:
            n = self.n
            self._cache["dXp"] = [[self.Xp[i].dx(j) for j in range(n)]
                                  for i in range(n)]
            self._cache["dY0"] = [[self.Y0[i].dx(j) for j in range(n)]
                                  for i in range(n)]
            self._cache["dJm1"] = [[[self.jinv_m1[m][i].dx(j)
                                     for j in range(n)] for i in range(n)]
                                   for m in range(n)]
        return self._cache["dXp"], self._cache["dY0"], self._cache["dJm1"]

    def jacobian(self, xi, eta):
        """Z_zeta as a (P, 2n, 2n) array at the given real points."""
        xi = np.atleast_2d(np.asarray(xi, dtype=np.float64))
        eta = np.atleast_2d(np.asarray(eta, dtype=np.float64))
        P, n = xi.shape
        dXp, dY0, dJm1 = self._partials()
        series = [dXp[i][j] for i in range(n) for j in range(n)]
        series += [dY0[i][j] for i in range(n) for j in range(n)]
        series += [self.jinv_m1[m][i] for m in range(n) for i in range(n)]
        series += [dJm1[m][i][j] for m in range(n) for i in range(n)
                   for j in range(n)]
        kmax = max((f.K for f in series if not f.is_zero), default=0)
        table = PhaseTable(xi, kmax)
        vals = self._batch_series(table, series)
        o = 0
        xp_x = vals[:, o:o + n * n].reshape(P, n, n); o += n * n
        y0_x = vals[:, o:o + n * n].reshape(P, n, n); o += n * n
        jm1 = vals[:, o:o + n * n].reshape(P, n, n); o += n * n  # [m, i]
        jm1_x = vals[:, o:].reshape(P, n, n, n)                  # [m, i, j]
        Z = np.zeros((P, 2 * n, 2 * n))
        eye = np.eye(n)
        Z[:, :n, :n] = eye + xp_x
        # Y_xi: dY0_i/dxi_j + sum_m eta_m d jinv_m1[m][i] / dxi_j
        Z[:, n:, :n] = y0_x + np.einsum("pm,pmij->pij", eta, jm1_x)
        # Y_eta = (X_xi^{-1})^T = (E + jm1)^T  with jm1 indexed [m, i]
        Z[:, n:, n:] = eye + np.transpose(jm1, (0, 2, 1))
        return Z

    def to_json_obj(self):
        return {
            "n": self.n,
            "Xp": [f.to_json_obj() for f in self.Xp],
            "Y0": [f.to_json_obj() for f in self.Y0],
            "jinv_m1": [[f.to_json_obj() for f in row]
                        for row in self.jinv_m1],
            "grid_meta": self.grid_meta,
        }

    @classmethod
    def from_json_obj(cls, obj):
        return cls(
            n=obj["n"],
            Xp=[FTSeries.from_json_obj(o) for o in obj["Xp"]],
            Y0=[FTSeries.from_json_obj(o) for o in obj["Y0"]],
            jinv_m1=[[FTSeries.from_json_obj(o) for o in row]
                     for row in obj["jinv_m1"]],
            grid_meta=obj.get("grid_meta", {}),
        )


def _grid_points(n, L):
    axis = 2.0 * np.pi * np.arange(L) / L
    mesh = np.meshgrid(*([axis] * n), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _series_on_grid(f, L):
    """Nodal values of an x-only series on the uniform grid (exact)."""
    bins = np.zeros((L,) * f.n, dtype=np.complex128)
    for (k, _a), c in f.items():
        bins[tuple(v % L for v in k)] += c
    return np.fft.ifftn(bins) * float(L) ** f.n


def integrate_flow(dS: GeneratingFunction, grid_size, steps=None,
                   window: FlowWindow | None = None, k_keep=None,
                   drop_rel=ASSEMBLY_DROP_REL):
    """Time-1 flow of the generator as a :class:`SimpleCanonicalMap`.

    Every node of the uniform ``grid_size``-per-dimension torus grid is
    integrated with y(0) = 0 on the shared fixed time grid; nodal values
    of the displacement and of y(1) become the Xp and Y0 series, and the
    inverse Jacobian follows from spectral differentiation of xi + Xp with
    nodewise inversion.  Coefficients below ``drop_rel`` of the call's
    nodal scale are dropped and their mass recorded in ``grid_meta``.
    """
    n = dS.n
    L = int(grid_size)
    steps = DEFAULT_ODE_STEPS if steps is None else int(steps)
    if k_keep is None:
        k_keep = L // 2 - 1
    nodes = _grid_points(n, L)
    d1, y1, escape = integrate_points(
        dS, nodes, np.zeros_like(nodes), steps, window=window)
    shape = (L,) * n
    dropped = 0.0
    scale_x = max(float(np.max(np.abs(d1))), 1e-300)
    Xp = []
    for i in range(n):
        f, lost = from_grid(d1[:, i].reshape(shape), n, L, k_keep,
                            drop_rel=drop_rel, drop_scale=scale_x)
        Xp.append(f)
        dropped += lost
    scale_y = max(float(np.max(np.abs(y1))), 1e-300)
    Y0 = []
    for i in range(n):
        f, lost = from_grid(y1[:, i].reshape(shape), n, L, k_keep,
                            drop_rel=drop_rel, drop_scale=scale_y)
        Y0.append(f)
        dropped += lost
    # X_xi - E on the nodes by spectral differentiation of the stored Xp
    xp_x = np.zeros((L ** n, n, n))
    for i in range(n):
        for j in range(n):
            xp_x[:, i, j] = _series_on_grid(Xp[i].dx(j), L).real.ravel()
    A = np.eye(n)[None, :, :] + xp_x
    dets = np.linalg.det(A)
    if np.any(dets == 0.0):
        raise ArithmeticError("det X_xi vanished at a grid node")
    jm1_nodes = -np.linalg.solve(A, xp_x)  # (E+B)^{-1} - E = -(E+B)^{-1} B
    scale_j = max(float(np.max(np.abs(jm1_nodes))), 1e-300)
    jinv_m1 = [[None] * n for _ in range(n)]
    for m in range(n):
        for i in range(n):
            f, lost = from_grid(jm1_nodes[:, m, i].reshape(shape), n, L,
                                k_keep, drop_rel=drop_rel,
                                drop_scale=scale_j)
            jinv_m1[m][i] = f
            dropped += lost
    meta = {"grid_size": L, "ode_steps": steps, "integrator": "rk4-fixed",
            "assembly_dropped": dropped, "escape": escape,
            "min_abs_det_Xxi": float(np.min(np.abs(dets)))}
    return SimpleCanonicalMap(n=n, Xp=Xp, Y0=Y0, jinv_m1=jinv_m1,
                              grid_meta=meta)


_J_CACHE = {}


def _sympl_J(n):
    if n not in _J_CACHE:
        J = np.zeros((2 * n, 2 * n))
        J[:n, n:] = np.eye(n)
        J[n:, :n] = -np.eye(n)
        _J_CACHE[n] = J
    return _J_CACHE[n]


def check_symplectic(Z: SimpleCanonicalMap, samples=100, sigma=0.5,
                     seed=2027):
    """Max row-sum defect |Z_zeta^T J Z_zeta - J| at seeded real points."""
    n = Z.n
    rng = SplitMix64(seed)
    xi = rng.torus_points(samples, n)
    eta = rng.ball_points(samples, n, sigma)
    Zz = Z.jacobian(xi, eta)
    J = _sympl_J(n)
    defect = np.einsum("pij,jk,pkl->pil", np.transpose(Zz, (0, 2, 1)), J,
                       Zz) - J[None, :, :]
    return float(np.max(np.sum(np.abs(defect), axis=2)))


def affine_identity_defect(dS: GeneratingFunction, Z: SimpleCanonicalMap,
                           steps, samples=100, sigma=0.5, seed=2029,
                           window=None):
    """Max |Z(xi,eta) - full 2n integration| over seeded nonzero-eta points."""
    n = Z.n
    rng = SplitMix64(seed)
    xi = rng.torus_points(samples, n)
    eta = rng.ball_points(samples, n, sigma)
    x_aff, y_aff = Z(xi, eta)
    dx_full, y_full, _ = integrate_points(dS, xi, eta, steps, window=window)
    return float(max(np.max(np.abs(x_aff - (xi + dx_full))),
                     np.max(np.abs(y_aff - y_full))))


class TransformationChain:
    """Lazy composition Z_1 o Z_2 o ... o Z_k, applied right to left."""

    def __init__(self, maps):
        self.maps = list(maps)
        ns = {m.n for m in self.maps}
        if len(ns) > 1:
            raise ValueError("maps of mixed dimension in one chain")
        self.n = ns.pop() if ns else None

    def __len__(self):
        return len(self.maps)

    def prefix(self, k):
        """Chain of the first k maps: Z_1 o ... o Z_k."""
        return TransformationChain(self.maps[:k])

    def evaluate(self, xi, eta):
        xi = np.atleast_2d(np.asarray(xi, dtype=np.float64))
        eta = np.atleast_2d(np.asarray(eta, dtype=np.float64))
        for m in reversed(self.maps):
            xi, eta = m(xi, eta)
        return xi, eta

    def jacobian(self, xi, eta):
        """Chain rule product Z_1z(...) Z_2z(...) ... Z_kz(zeta)."""
        xi = np.atleast_2d(np.asarray(xi, dtype=np.float64))
        eta = np.atleast_2d(np.asarray(eta, dtype=np.float64))
        if not self.maps:
            n = xi.shape[1]
            return np.broadcast_to(np.eye(2 * n),
                                   (xi.shape[0], 2 * n, 2 * n)).copy()
        stops = [(xi, eta)]
        for m in reversed(self.maps[1:]):
            stops.append(m(*stops[-1]))
        out = None
        for m, (px, pe) in zip(self.maps, reversed(stops)):
            Jm = m.jacobian(px, pe)
            out = Jm if out is None else out @ Jm
        return out

    def to_json_obj(self):
        return [m.to_json_obj() for m in self.maps]

    @classmethod
    def from_json_obj(cls, obj):
        return cls([SimpleCanonicalMap.from_json_obj(o) for o in obj])


def compose(maps):
    """Chain handle for an ordered list of maps (empty list = identity)."""
    return TransformationChain(maps)


def evaluate_chain(chain: TransformationChain, xi, eta):
    return chain.evaluate(xi, eta)


def jacobian_growth_audit(Z: SimpleCanonicalMap, window: FlowWindow,
                          grid_size=16, seed=2031):
    """Measured |Z_zeta| and |Z_zeta - E| against the Gronwall flow bounds.

    The bounds are exp(2nK/(delta sigma) t) and
    (2nK/(delta sigma)) exp(2nK/(delta sigma) t) with t = 1; measurements
    are row-sum maxima over a torus grid with eta on the sigma/2-ball.
    """
    n = Z.n
    pts = _grid_points(n, grid_size)
    rng = SplitMix64(seed)
    eta = rng.ball_points(len(pts), n, window.sigma / 2.0)
    Zz = Z.jacobian(pts, eta)
    norm = float(np.max(np.sum(np.abs(Zz), axis=2)))
    eye = np.eye(2 * n)
    norm_m1 = float(np.max(np.sum(np.abs(Zz - eye), axis=2)))
    rate = 2.0 * n * window.K_bound / (window.delta * window.sigma)
    bound = float(np.exp(rate))
    bound_m1 = float(rate * np.exp(rate))
    return {
        "measured_Zz": norm, "bound_Zz": bound,
        "measured_Zz_minus_E": norm_m1, "bound_Zz_minus_E": bound_m1,
        "rate_2nK_over_delta_sigma": rate,
        "pass_Zz": bool(norm <= bound),
        "pass_Zz_minus_E": bool(norm_m1 <= bound_m1),
    }

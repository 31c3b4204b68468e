"""Truncated Fourier-Taylor series algebra.

An :class:`FTSeries` represents a function

    f(x, y) = sum_{k, alpha} c[k, alpha] * exp(i <k, x>) * y^alpha

on the complex strip-times-ball domains :class:`DomainSpec` describes, with
``x`` an angle n-vector (period 2*pi per component), ``y`` an action
n-vector, ``k`` an integer lattice vector with ``|k|_inf <= K`` and ``alpha``
a y-multi-index with ``|alpha|_1 <= D``.  Coefficients are stored sparsely;
absent keys mean zero.  All instances are immutable after construction and
every operation is pure, so values may be shared freely across threads.

Real-valued series (functions mapping real vectors to real values) carry
Hermitian coefficient symmetry ``c[-k, alpha] == conj(c[k, alpha])``.  The
constructor verifies the symmetry and then enforces it exactly, which keeps
the flag stable under long chains of floating-point operations.

Norms: :meth:`FTSeries.majorant` returns the weighted l1 coefficient sum

    sum |c[k, alpha]| * exp(|k|_1 * rho) * sigma^|alpha|_1,

a computable upper bound for the sup of ``|f|`` over ``|Im x| <= rho``,
``|y| <= sigma`` (ell-infinity norms on the variables), since
``|exp(i<k,x>)| <= exp(|k|_1 |Im x|_inf)``.  A grid-sampled sup on the real
torus is available as a lower estimate via :func:`torus_sup_sample`.
"""

from __future__ import annotations

import math
from collections import defaultdict

import numpy as np

__all__ = [
    "FTSeries",
    "DomainSpec",
    "DimensionMismatch",
    "DEFAULT_K_MAX",
    "DEFAULT_D_MAX",
    "poisson",
    "cauchy_bound",
    "cubic_tail_bound",
    "torus_sup_sample",
    "series_to_json_obj",
    "series_from_json_obj",
    "vector_majorant",
    "matrix_majorant",
    "PhaseTable",
    "BatchEvaluator",
    "from_grid",
]

# Per-run cutoff caps for products; operations accept overrides.
DEFAULT_K_MAX = 32
DEFAULT_D_MAX = 4

# Storage drop tolerance: true underflow only, so no silent accuracy loss.
STORE_DROP_TOL = 1e-300

# Pair count beyond which mul switches from exact dict convolution to the
# zero-padded FFT grid.  Both paths are alias-free; they agree to roundoff.
_FFT_PAIR_THRESHOLD = 150_000

_HERMITIAN_RTOL = 1e-9


class DimensionMismatch(ValueError):
    pass


class DomainSpec:
    """Domain parameters: x-strip half-width r and y-ball radius s.

    The main-theorem constraint 0 < s <= r^(tau+1) <= 1 is enforced by the
    engine, which owns tau; here both just have to be positive.
    """

    __slots__ = ("r", "s")

    def __init__(self, r, s):
        if not (r > 0 and s > 0):
            raise ValueError("domain requires r > 0 and s > 0")
        self.r = float(r)
        self.s = float(s)

    def shrunk(self, dr=0.0, s_factor=1.0):
        return DomainSpec(self.r - dr, self.s * s_factor)

    def __repr__(self):
        return f"DomainSpec(r={self.r!r}, s={self.s!r})"


def _as_key(k, alpha):
    return (tuple(int(v) for v in k), tuple(int(v) for v in alpha))


class FTSeries:
    """Sparse truncated Fourier-Taylor series.

    Parameters
    ----------
    n : int
        Number of angle/action pairs, n >= 2.
    coeffs : mapping
        ``{(k_tuple, alpha_tuple): complex}``; keys violating the declared
        cutoffs raise.  Magnitudes below 1e-300 are dropped (underflow only).
    real_valued : bool
        Declare the function real on real arguments.  Hermitian symmetry of
        the coefficients is checked and then enforced exactly.
    K, D : int, optional
        Declared cutoffs.  Default: tight bounds of the stored keys.
    trunc_loss : float
        Sum of |coefficients| dropped by whichever operation produced this
        series (cutoff truncation), carried for reporting.
    """

    __slots__ = ("n", "K", "D", "real_valued", "trunc_loss", "_coeffs",
                 "_packed")

    def __init__(self, n, coeffs=None, real_valued=False, K=None, D=None,
                 trunc_loss=0.0):
        n = int(n)
        if n < 2:
            raise ValueError("dimension n must be >= 2")
        clean = {}
        k_seen = 0
        d_seen = 0
        if coeffs:
            for key, c in coeffs.items():
                c = complex(c)
                if abs(c) < STORE_DROP_TOL:
                    continue
                k, alpha = _as_key(*key)
                if len(k) != n or len(alpha) != n:
                    raise DimensionMismatch(
                        f"key {key} incompatible with n={n}")
                if any(a < 0 for a in alpha):
                    raise ValueError(f"negative y-exponent in {alpha}")
                clean[(k, alpha)] = clean.get((k, alpha), 0.0) + c
                k_seen = max(k_seen, max(abs(v) for v in k) if k else 0)
                d_seen = max(d_seen, sum(alpha))
        self.n = n
        self.K = k_seen if K is None else int(K)
        self.D = d_seen if D is None else int(D)
        if k_seen > self.K or d_seen > self.D:
            raise ValueError("stored keys exceed declared cutoffs")
        self.real_valued = bool(real_valued)
        self.trunc_loss = float(trunc_loss)
        if self.real_valued and clean:
            clean = _hermitianize(clean)
        self._coeffs = clean
        self._packed = None

    # -- constructors -------------------------------------------------

    @classmethod
    def zero(cls, n, real_valued=True):
        return cls(n, {}, real_valued=real_valued)

    @classmethod
    def constant(cls, n, value, real_valued=None):
        if real_valued is None:
            real_valued = abs(complex(value).imag) == 0.0
        z = (0,) * n
        return cls(n, {(z, z): complex(value)}, real_valued=real_valued)

    @classmethod
    def from_terms(cls, n, terms, real_valued=False):
        """Build from an iterable of (k, alpha, coefficient) triples."""
        d = defaultdict(complex)
        for k, alpha, c in terms:
            d[_as_key(k, alpha)] += complex(c)
        return cls(n, d, real_valued=real_valued)

    @classmethod
    def cosine(cls, n, k, amplitude=1.0):
        """amplitude * cos(<k, x>)."""
        k = tuple(int(v) for v in k)
        mk = tuple(-v for v in k)
        z = (0,) * n
        a = 0.5 * amplitude
        return cls(n, {(k, z): a, (mk, z): a}, real_valued=True)

    @classmethod
    def sine(cls, n, k, amplitude=1.0):
        """amplitude * sin(<k, x>)."""
        k = tuple(int(v) for v in k)
        mk = tuple(-v for v in k)
        z = (0,) * n
        return cls(n, {(k, z): amplitude / 2j, (mk, z): -amplitude / 2j},
                   real_valued=True)

    @classmethod
    def y_linear(cls, n, vector):
        """<vector, y> as a series."""
        z = (0,) * n
        d = {}
        for j, v in enumerate(vector):
            if v == 0:
                continue
            alpha = tuple(1 if i == j else 0 for i in range(n))
            d[(z, alpha)] = complex(v)
        return cls(n, d, real_valued=bool(np.isrealobj(np.asarray(vector))))

    @classmethod
    def y_monomial(cls, n, alpha, coeff=1.0):
        z = (0,) * n
        return cls(n, {(z, tuple(int(a) for a in alpha)): complex(coeff)},
                   real_valued=abs(complex(coeff).imag) == 0.0)

    # -- basic access --------------------------------------------------

    def items(self):
        return self._coeffs.items()

    def coefficient(self, k, alpha):
        return self._coeffs.get(_as_key(k, alpha), 0.0 + 0.0j)

    def __len__(self):
        return len(self._coeffs)

    @property
    def is_zero(self):
        return not self._coeffs

    @property
    def x_only(self):
        return all(sum(a) == 0 for (_, a) in self._coeffs)

    def y_slices(self):
        """Group coefficients by y-multi-index: {alpha: {k: c}}."""
        out = defaultdict(dict)
        for (k, a), c in self._coeffs.items():
            out[a][k] = c
        return dict(out)

    def max_abs_coeff(self):
        return max((abs(c) for c in self._coeffs.values()), default=0.0)

    def _pack(self):
        # Cached (modes, alphas, coeffs) arrays; idempotent, safe to race.
        if self._packed is None:
            m = len(self._coeffs)
            ks = np.zeros((m, self.n), dtype=np.int64)
            als = np.zeros((m, self.n), dtype=np.int64)
            cs = np.zeros(m, dtype=np.complex128)
            for i, ((k, a), c) in enumerate(sorted(self._coeffs.items())):
                ks[i] = k
                als[i] = a
                cs[i] = c
            self._packed = (ks, als, cs)
        return self._packed

    # -- evaluation ----------------------------------------------------

    def eval(self, x, y=None):
        """Pointwise value at complex x (angles) and y (actions).

        Direct summation over the stored coefficients; this is the
        reference evaluation the brute-force oracle tests agree with.
        """
        x = np.asarray(x, dtype=np.complex128)
        y = np.zeros(self.n) if y is None else np.asarray(
            y, dtype=np.complex128)
        if x.shape != (self.n,) or y.shape != (self.n,):
            raise DimensionMismatch("eval expects n-vectors")
        if not self._coeffs:
            return 0.0 + 0.0j
        ks, als, cs = self._pack()
        phases = np.exp(1j * (ks @ x))
        # 0^0 = 1 for absent y factors.
        ypow = np.ones(len(cs), dtype=np.complex128)
        for j in range(self.n):
            col = als[:, j]
            if col.any():
                ypow = ypow * np.where(col > 0, y[j] ** col, 1.0)
        return complex(np.sum(cs * phases * ypow))

    __call__ = eval

    # -- arithmetic ----------------------------------------------------

    def _binary_add(self, other, sign):
        if isinstance(other, (int, float, complex)):
            other = FTSeries.constant(self.n, other)
        if other.n != self.n:
            raise DimensionMismatch("dimension mismatch in add")
        d = dict(self._coeffs)
        for key, c in other._coeffs.items():
            d[key] = d.get(key, 0.0) + sign * c
        return FTSeries(self.n, d,
                        real_valued=self.real_valued and other.real_valued,
                        trunc_loss=self.trunc_loss + other.trunc_loss)

    def __add__(self, other):
        return self._binary_add(other, 1.0)

    def __radd__(self, other):
        return self._binary_add(other, 1.0)

    def __sub__(self, other):
        return self._binary_add(other, -1.0)

    def __neg__(self):
        return self.scale(-1.0)

    def scale(self, factor):
        factor = complex(factor)
        rv = self.real_valued and factor.imag == 0.0
        return FTSeries(self.n,
                        {k: c * factor for k, c in self._coeffs.items()},
                        real_valued=rv, trunc_loss=self.trunc_loss)

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            return self.scale(other)
        return self.mul(other)

    def __rmul__(self, other):
        if isinstance(other, (int, float, complex)):
            return self.scale(other)
        return NotImplemented

    def mul(self, other, k_max=None, d_max=None):
        """Product series, alias-free up to the retained cutoffs.

        The result keeps modes with |k|_inf <= min(K_f + K_g, k_max) and
        y-degrees |alpha|_1 <= min(D_f + D_g, d_max); the l1 mass of dropped
        coefficients is reported in ``result.trunc_loss``.  Small products
        use exact sparse convolution, large ones a zero-padded transform
        grid (smallest power of two >= 2(K_f + K_g) + 1 per dimension); the
        two paths agree to roundoff.
        """
        if other.n != self.n:
            raise DimensionMismatch("dimension mismatch in mul")
        k_max = DEFAULT_K_MAX if k_max is None else int(k_max)
        d_max = DEFAULT_D_MAX if d_max is None else int(d_max)
        if self.is_zero or other.is_zero:
            return FTSeries.zero(self.n,
                                 self.real_valued and other.real_valued)
        k_out = min(self.K + other.K, k_max)
        d_out = min(self.D + other.D, d_max)
        rv = self.real_valued and other.real_valued
        npairs = len(self._coeffs) * len(other._coeffs)
        if npairs <= _FFT_PAIR_THRESHOLD:
            acc = defaultdict(complex)
            for (k1, a1), c1 in self._coeffs.items():
                for (k2, a2), c2 in other._coeffs.items():
                    k = tuple(u + v for u, v in zip(k1, k2))
                    a = tuple(u + v for u, v in zip(a1, a2))
                    acc[(k, a)] += c1 * c2
            kept, loss = {}, 0.0
            for (k, a), c in acc.items():
                if max(abs(v) for v in k) <= k_out and sum(a) <= d_out:
                    kept[(k, a)] = c
                else:
                    loss += abs(c)
            return FTSeries(self.n, kept, real_valued=rv, K=k_out, D=d_out,
                            trunc_loss=loss)
        return _mul_fft(self, other, k_out, d_out, rv)

    # -- calculus ------------------------------------------------------

    def dx(self, j):
        """Partial derivative in the angle x_j (0-based axis)."""
        if not 0 <= j < self.n:
            raise ValueError("axis out of range")
        d = {}
        for (k, a), c in self._coeffs.items():
            if k[j] != 0:
                d[(k, a)] = 1j * k[j] * c
        return FTSeries(self.n, d, real_valued=self.real_valued, K=self.K,
                        D=self.D)

    def dy(self, j):
        """Partial derivative in the action y_j (0-based axis)."""
        if not 0 <= j < self.n:
            raise ValueError("axis out of range")
        d = {}
        for (k, a), c in self._coeffs.items():
            if a[j] > 0:
                a2 = tuple(v - 1 if i == j else v for i, v in enumerate(a))
                d[(k, a2)] = d.get((k, a2), 0.0) + a[j] * c
        return FTSeries(self.n, d, real_valued=self.real_valued, K=self.K,
                        D=max(self.D - 1, 0))

    def grad_x(self):
        return [self.dx(j) for j in range(self.n)]

    def grad_y(self):
        return [self.dy(j) for j in range(self.n)]

    def mean_x(self):
        """Average over the torus: the k = 0 slice (a y-polynomial)."""
        z = (0,) * self.n
        d = {key: c for key, c in self._coeffs.items() if key[0] == z}
        return FTSeries(self.n, d, real_valued=self.real_valued, K=0,
                        D=self.D)

    def y_slice_series(self, alpha):
        """The x-only series multiplying y^alpha."""
        alpha = tuple(int(a) for a in alpha)
        z = (0,) * self.n
        d = {(k, z): c for (k, a), c in self._coeffs.items() if a == alpha}
        return FTSeries(self.n, d, real_valued=self.real_valued, K=self.K,
                        D=0)

    def at_y0(self):
        """Restriction f(., 0) as an x-only series."""
        return self.y_slice_series((0,) * self.n)

    def without_mean(self):
        z = (0,) * self.n
        d = {key: c for key, c in self._coeffs.items()
             if not (key[0] == z and key[1] == z)}
        return FTSeries(self.n, d, real_valued=self.real_valued, K=self.K,
                        D=self.D)

    def truncated(self, k_max=None, d_max=None):
        """Drop keys beyond the caps; dropped l1 mass goes to trunc_loss."""
        k_max = self.K if k_max is None else int(k_max)
        d_max = self.D if d_max is None else int(d_max)
        kept, loss = {}, 0.0
        for (k, a), c in self._coeffs.items():
            if max((abs(v) for v in k), default=0) <= k_max \
                    and sum(a) <= d_max:
                kept[(k, a)] = c
            else:
                loss += abs(c)
        return FTSeries(self.n, kept, real_valued=self.real_valued,
                        K=min(self.K, k_max), D=min(self.D, d_max),
                        trunc_loss=self.trunc_loss + loss)

    # -- norms -----------------------------------------------------------

    def majorant(self, rho=0.0, sigma=0.0):
        """Weighted l1 norm sum |c| e^(|k|_1 rho) sigma^|alpha|; >= sup norm."""
        if rho < 0 or sigma < 0:
            raise ValueError("rho and sigma must be >= 0")
        tot = 0.0
        for (k, a), c in self._coeffs.items():
            w = math.exp(rho * sum(abs(v) for v in k))
            da = sum(a)
            if da:
                if sigma == 0.0:
                    continue
                w *= sigma ** da
            tot += abs(c) * w
        return tot

    def majorant_tight(self, rho=0.0, sigma=0.0):
        """Sharper strip bound max over Im-x cube vertices of the weighted sum.

        Computes max_{s in {-rho, +rho}^n} sum |c| e^{<k, s>} sigma^|alpha|,
        which still dominates the sup norm (the per-point bound
        sum |c| e^{-<k, Im x>} is convex in Im x, so its max over the cube
        sits at a vertex) while being <= the plain l1-exponential majorant.
        Exact for a single conjugate mode pair: cos(x_1) on |Im x| <= 1
        gives cosh(1).
        """
        if rho < 0 or sigma < 0:
            raise ValueError("rho and sigma must be >= 0")
        if not self._coeffs:
            return 0.0
        import itertools
        best = 0.0
        for signs in itertools.product((-1.0, 1.0), repeat=self.n):
            tot = 0.0
            for (k, a), c in self._coeffs.items():
                w = math.exp(rho * sum(s * v for s, v in zip(signs, k)))
                da = sum(a)
                if da:
                    if sigma == 0.0:
                        continue
                    w *= sigma ** da
                tot += abs(c) * w
            best = max(best, tot)
        return best

    # -- serialization -----------------------------------------------

    def to_json_obj(self):
        """Documented JSON shape, coefficients sorted lexicographically."""
        coeffs = []
        for (k, a), c in sorted(self._coeffs.items()):
            coeffs.append([list(k), list(a), c.real, c.imag])
        return {"n": self.n, "K": self.K, "D": self.D,
                "real_valued": self.real_valued, "coeffs": coeffs}

    @classmethod
    def from_json_obj(cls, obj):
        d = {}
        for k, a, re, im in obj["coeffs"]:
            d[(tuple(k), tuple(a))] = complex(re, im)
        return cls(obj["n"], d, real_valued=obj["real_valued"],
                   K=obj["K"], D=obj["D"])

    def __repr__(self):
        return (f"FTSeries(n={self.n}, K={self.K}, D={self.D}, "
                f"terms={len(self._coeffs)}, real={self.real_valued})")


def _hermitianize(coeffs):
    """Verify Hermitian symmetry within tolerance, then enforce it exactly."""
    scale = max(abs(c) for c in coeffs.values())
    out = {}
    for (k, a), c in coeffs.items():
        mk = tuple(-v for v in k)
        cc = coeffs.get((mk, a))
        if cc is None:
            if abs(c) > _HERMITIAN_RTOL * scale:
                raise ValueError(
                    f"real_valued series misses conjugate mode of {k}, {a}")
            cc = 0.0
        if abs(c - np.conj(cc)) > _HERMITIAN_RTOL * scale + 1e-300:
            raise ValueError(
                f"real_valued series breaks Hermitian symmetry at {k}, {a}")
        out[(k, a)] = 0.5 * (c + np.conj(cc))
    # the k = 0 coefficients of a real function are real
    for (k, a), c in out.items():
        if all(v == 0 for v in k):
            out[(k, a)] = complex(c.real, 0.0)
    return {key: c for key, c in out.items() if abs(c) >= STORE_DROP_TOL}


def _next_pow2(m):
    return 1 << (max(int(m), 1) - 1).bit_length()


def _mul_fft(f, g, k_out, d_out, rv):
    """Convolution on a zero-padded transform grid; alias-free by size."""
    n = f.n
    k_full = f.K + g.K
    L = _next_pow2(2 * k_full + 1)
    shape = (L,) * n
    scale = float(L) ** n

    def slices_to_values(series):
        vals = {}
        for a, mono in series.y_slices().items():
            bins = np.zeros(shape, dtype=np.complex128)
            for k, c in mono.items():
                bins[tuple(v % L for v in k)] += c
            vals[a] = np.fft.ifftn(bins) * scale
        return vals

    vf = slices_to_values(f)
    vg = slices_to_values(g)
    out_vals = {}
    loss = 0.0
    for a1, arr1 in vf.items():
        for a2, arr2 in vg.items():
            a = tuple(u + v for u, v in zip(a1, a2))
            prod = arr1 * arr2
            if sum(a) > d_out:
                # dropped y-degree: account its l1 coefficient mass
                bins = np.fft.fftn(prod) / scale
                loss += _support_l1(bins, k_full, L)
                continue
            if a in out_vals:
                out_vals[a] = out_vals[a] + prod
            else:
                out_vals[a] = prod
    d = {}
    for a, arr in out_vals.items():
        bins = np.fft.fftn(arr) / scale
        for k in _support_iter(k_full, n):
            c = bins[tuple(v % L for v in k)]
            if abs(c) < STORE_DROP_TOL:
                continue
            if max(abs(v) for v in k) <= k_out:
                d[(k, a)] = c
            else:
                loss += abs(c)
    return FTSeries(n, d, real_valued=rv, K=k_out, D=d_out, trunc_loss=loss)


def _support_iter(k_full, n):
    rng = range(-k_full, k_full + 1)
    if n == 2:
        for k1 in rng:
            for k2 in rng:
                yield (k1, k2)
    else:
        import itertools
        yield from itertools.product(rng, repeat=n)


def _support_l1(bins, k_full, L):
    tot = 0.0
    n = bins.ndim
    for k in _support_iter(k_full, n):
        tot += abs(bins[tuple(v % L for v in k)])
    return tot


# -- derived operations -------------------------------------------------

def poisson(f, g, k_max=None, d_max=None):
    """Poisson bracket {f, g} = <f_x, g_y> - <f_y, g_x>."""
    if f.n != g.n:
        raise DimensionMismatch("dimension mismatch in poisson")
    acc = FTSeries.zero(f.n, f.real_valued and g.real_valued)
    for j in range(f.n):
        acc = acc + f.dx(j).mul(g.dy(j), k_max=k_max, d_max=d_max)
        acc = acc - f.dy(j).mul(g.dx(j), k_max=k_max, d_max=d_max)
    return acc


def cauchy_bound(M, eps):
    """Derivative bound M/eps on the eps-shrunk domain (Cauchy estimate)."""
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if M <= 0:
        raise ValueError("M must be > 0")
    return M / eps


def cubic_tail_bound(M, eps, y_norm, sigma):
    """Taylor tail of order three: M/(1-eps) * y_norm^3 / sigma^3.

    Valid for |y| <= eps*sigma when |f| <= M on the sigma-ball.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if y_norm < 0 or sigma <= 0:
        raise ValueError("need y_norm >= 0 and sigma > 0")
    if y_norm > eps * sigma:
        raise ValueError("y_norm exceeds eps*sigma: tail bound not valid")
    return M / (1.0 - eps) * y_norm ** 3 / sigma ** 3


def torus_sup_sample(f, sigma=0.0, grid_size=64, directions=None):
    """Max |f| over a real x-grid with y on real rays |y|_inf = sigma.

    Lower estimate companion to the majorant norm, for reporting.
    """
    n = f.n
    axes = [np.linspace(0.0, 2 * np.pi, grid_size, endpoint=False)] * n
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    if sigma == 0.0 or f.D == 0:
        ys = [np.zeros(n)]
    else:
        ys = [sigma * e for e in np.eye(n)] + [-sigma * e for e in np.eye(n)]
        if directions is not None:
            ys += [sigma * d / np.max(np.abs(d)) for d in directions]
    ev = BatchEvaluator(pts)
    best = 0.0
    for y in ys:
        vals = ev.eval_series(f, y=np.broadcast_to(y, pts.shape))
        best = max(best, float(np.max(np.abs(vals))))
    return best


def vector_majorant(vec, rho=0.0, sigma=0.0):
    """Sup-style norm of a function vector: max over components."""
    return max((f.majorant(rho, sigma) for f in vec), default=0.0)


def matrix_majorant(mat, rho=0.0, sigma=0.0):
    """Row-sum norm of a matrix of series, majorant per entry."""
    best = 0.0
    for row in mat:
        best = max(best, sum(f.majorant(rho, sigma) for f in row))
    return best


def series_to_json_obj(f):
    return f.to_json_obj()


def series_from_json_obj(obj):
    return FTSeries.from_json_obj(obj)


# -- batched evaluation on real point sets ------------------------------

class PhaseTable:
    """Per-dimension power tables of exp(i x_j) for a batch of real points.

    gather(modes) returns the (P, m) matrix of exp(i <k, x>) by multiplying
    table columns, which is the direct Fourier summation kernel factored per
    dimension (O(modes) work per point, no transforms).
    """

    def __init__(self, points, k_abs_max):
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 2:
            raise ValueError("points must be (P, n)")
        self.P, self.n = pts.shape
        self.k_abs_max = int(k_abs_max)
        z = np.exp(1j * pts)  # (P, n)
        tables = []
        for j in range(self.n):
            t = np.empty((self.P, 2 * self.k_abs_max + 1),
                         dtype=np.complex128)
            t[:, self.k_abs_max] = 1.0
            for m in range(1, self.k_abs_max + 1):
                t[:, self.k_abs_max + m] = t[:, self.k_abs_max + m - 1] \
                    * z[:, j]
                t[:, self.k_abs_max - m] = np.conj(t[:, self.k_abs_max + m])
            tables.append(t)
        self._tables = tables

    def gather(self, modes):
        modes = np.asarray(modes, dtype=np.int64)
        out = self._tables[0][:, self.k_abs_max + modes[:, 0]].copy()
        for j in range(1, self.n):
            out *= self._tables[j][:, self.k_abs_max + modes[:, j]]
        return out


class BatchEvaluator:
    """Evaluate series at a fixed batch of real x-points (y optional)."""

    def __init__(self, points):
        self.points = np.asarray(points, dtype=np.float64)
        self._table = None
        self._table_k = -1

    def _phases(self, modes):
        kmax = int(np.max(np.abs(modes))) if len(modes) else 0
        if self._table is None or kmax > self._table_k:
            self._table = PhaseTable(self.points, kmax)
            self._table_k = kmax
        return self._table.gather(modes)

    def eval_series(self, f, y=None):
        """Values of f at the points; y as (P, n) real array or None (y=0)."""
        if f.is_zero:
            return np.zeros(len(self.points), dtype=np.complex128)
        ks, als, cs = f._pack()
        if y is None:
            keep = als.sum(axis=1) == 0
            if not keep.any():
                return np.zeros(len(self.points), dtype=np.complex128)
            return self._phases(ks[keep]) @ cs[keep]
        phases = self._phases(ks)
        y = np.asarray(y, dtype=np.float64)
        ypow = np.ones((len(self.points), len(cs)))
        for j in range(f.n):
            col = als[:, j]
            mask = col > 0
            if mask.any():
                ypow[:, mask] *= y[:, j:j + 1] ** col[mask]
        return np.einsum("pm,pm->p", phases * cs, ypow.astype(np.complex128))


def from_grid(values, n, grid_size, k_keep, real_valued=True,
              drop_rel=1e-13, drop_scale=None):
    """Assemble an x-only series from nodal values on the uniform torus grid.

    Keeps modes |k|_inf <= k_keep whose magnitude is at least
    ``drop_rel * drop_scale`` (default scale: max nodal |value|); anything
    smaller is transform noise at the 1e-15 relative level that would
    otherwise dominate exponentially weighted majorants.  The +-k pair is
    kept or dropped together (its members only match to transform roundoff,
    so thresholding them independently could orphan one and break the
    Hermitian structure).  Returns ``(series, dropped_mass)``.
    """
    values = np.asarray(values, dtype=np.complex128)
    L = grid_size
    scale_n = float(L) ** n
    bins = np.fft.fftn(values) / scale_n
    if drop_scale is None:
        drop_scale = float(np.max(np.abs(values))) if values.size else 0.0
    tol = drop_rel * drop_scale
    k_keep = min(int(k_keep), L // 2 - 1)
    d = {}
    dropped = 0.0
    z = (0,) * n

    def bin_at(k):
        return complex(bins[tuple(v % L for v in k)])

    c0 = bin_at(z)
    if real_valued:
        c0 = complex(c0.real, 0.0)
    if abs(c0) >= max(tol, STORE_DROP_TOL):
        d[(z, z)] = c0
    else:
        dropped += abs(c0)
    import itertools
    for k in itertools.product(range(-k_keep, k_keep + 1), repeat=n):
        first = next((v for v in k if v != 0), 0)
        if first <= 0:
            continue  # canonical half: first nonzero component positive
        mk = tuple(-v for v in k)
        cp, cm = bin_at(k), bin_at(mk)
        if real_valued:
            # real nodal values: enforce the Hermitian pair exactly instead
            # of trusting the transform's roundoff to stay symmetric
            cp = 0.5 * (cp + np.conj(cm))
            cm = np.conj(cp)
        if max(abs(cp), abs(cm)) >= max(tol, STORE_DROP_TOL):
            d[(k, z)] = cp
            d[(mk, z)] = cm
        else:
            dropped += abs(cp) + abs(cm)
    f = FTSeries(n, d, real_valued=real_valued, K=k_keep, D=0)
    return f, dropped

"""Field operators as affine combinations of discrete ladder operators.

Every operator used here is linear in independent bosonic modes ``b_m`` with
``[b_m, b_n^dagger] = delta_mn``, so equal-time commutators are exact
c-numbers.  The index space stacks the photon modes ``(a, j)`` first and the
bath cells ``(line i, grid point g, component d)`` after them.

Discrete normalisation: a bath cell of frequency weight ``w_i`` and volume
``dV`` is an oscillator of mass ``w_i dV``, so continuum delta functions
become ``1 / (w_i dV)`` on the diagonal and ``b = f sqrt(w_i dV)``.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import modes
from .io import write_csv
from .parallel import chunk_ranges, ordered_map

KINDS = ("F", "D", "B", "E", "Pi_F", "P", "Psi", "X", "Pi_X", "f")


# --------------------------------------------------------------------------
# index space and expressions


@dataclass(frozen=True, eq=False)
class BathSpec:
    """Discrete bath: frequency lines, their weights and a conductivity profile."""

    omega: np.ndarray
    weights: np.ndarray
    profile: object

    def __post_init__(self):
        om = np.atleast_1d(np.asarray(self.omega, dtype=float))
        wt = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if om.shape != wt.shape or np.any(om <= 0) or np.any(wt <= 0):
            raise ValueError("bath lines need positive frequencies and weights of equal length")
        object.__setattr__(self, "omega", om)
        object.__setattr__(self, "weights", wt)


@dataclass(frozen=True, eq=False)
class IndexSpace:
    basis: modes.ModeBasis
    bath: BathSpec = None

    @property
    def n_field(self):
        return 2 * self.basis.n_modes

    @property
    def n_bath(self):
        if self.bath is None:
            return 0
        return self.bath.omega.size * self.basis.n_grid * 3

    @property
    def size(self):
        return self.n_field + self.n_bath

    def bath_index(self, line, grid_index, component):
        g = int(np.ravel_multi_index(tuple(grid_index), self.basis.grid_shape))
        return self.n_field + (line * self.basis.n_grid + g) * 3 + component

    def same_as(self, other):
        return self is other or (self.basis is other.basis and self.bath is other.bath)


@dataclass(frozen=True, eq=False)
class LadderExpr:
    """``constant + sum_m coeff_a[m] b_m + coeff_c[m] b_m^dagger``."""

    space: IndexSpace
    coeff_a: np.ndarray
    coeff_c: np.ndarray
    constant: complex = 0.0

    def __post_init__(self):
        a = np.asarray(self.coeff_a, dtype=complex)
        c = np.asarray(self.coeff_c, dtype=complex)
        if a.shape != (self.space.size,) or c.shape != a.shape:
            raise ValueError("coefficient vectors must match the index space")
        object.__setattr__(self, "coeff_a", a)
        object.__setattr__(self, "coeff_c", c)
        object.__setattr__(self, "constant", complex(self.constant))

    @classmethod
    def zero(cls, space):
        return cls(space, np.zeros(space.size), np.zeros(space.size))

    @classmethod
    def annihilator(cls, space, m):
        a = np.zeros(space.size, complex)
        a[m] = 1.0
        return cls(space, a, np.zeros(space.size))

    @classmethod
    def creator(cls, space, m):
        return cls.annihilator(space, m).adjoint()

    def adjoint(self):
        return LadderExpr(self.space, np.conj(self.coeff_c), np.conj(self.coeff_a),
                          np.conj(self.constant))

    def _check(self, other):
        if not self.space.same_as(other.space):
            raise ValueError("expressions live in different index spaces")

    def __add__(self, other):
        if isinstance(other, LadderExpr):
            self._check(other)
            return LadderExpr(self.space, self.coeff_a + other.coeff_a,
                              self.coeff_c + other.coeff_c, self.constant + other.constant)
        return LadderExpr(self.space, self.coeff_a, self.coeff_c, self.constant + other)

    __radd__ = __add__

    def __neg__(self):
        return LadderExpr(self.space, -self.coeff_a, -self.coeff_c, -self.constant)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar):
        if isinstance(scalar, LadderExpr):
            raise TypeError("products of operators are quadratic; use square()")
        return LadderExpr(self.space, scalar * self.coeff_a, scalar * self.coeff_c,
                          scalar * self.constant)

    __rmul__ = __mul__

    def is_self_adjoint(self, tol=0.0):
        adj = self.adjoint()
        return (np.max(np.abs(self.coeff_a - adj.coeff_a), initial=0.0) <= tol
                and abs(self.constant - adj.constant) <= tol)


def commutator(X, Y):
    """``[X, Y] = sum_m (a_X[m] c_Y[m] - c_X[m] a_Y[m])``; constants drop out."""
    X._check(Y)
    return complex(np.dot(X.coeff_a, Y.coeff_c) - np.dot(X.coeff_c, Y.coeff_a))


# --------------------------------------------------------------------------
# quadratic forms


@dataclass(frozen=True, eq=False)
class QuadraticForm:
    """``const + sum N[m,n] b_m^dag b_n + A[m,n] b_m b_n + C[m,n] b_m^dag b_n^dag``."""

    constant: complex
    N: np.ndarray
    A: np.ndarray
    C: np.ndarray

    def __add__(self, other):
        return QuadraticForm(self.constant + other.constant, self.N + other.N,
                             self.A + other.A, self.C + other.C)

    def scaled(self, s):
        return QuadraticForm(s * self.constant, s * self.N, s * self.A, s * self.C)


def square(X, *, normal_ordered=True):
    """``X^2`` for a constant-free expression.

    Writing ``X = sum a_m b_m + c_m b_m^dag``, the cross terms give
    ``2 c_m a_n b_m^dag b_n`` plus the vacuum constant ``sum a_m c_m``; the
    normal-ordered product drops that constant.
    """
    if X.constant != 0:
        raise ValueError("square() expects an expression without a constant term")
    a, c = X.coeff_a, X.coeff_c
    const = 0.0 if normal_ordered else complex(np.dot(a, c))
    return QuadraticForm(const, 2 * np.outer(c, a), np.outer(a, a), np.outer(c, c))


def field_energy_form(basis, *, normal_ordered=True):
    """``int (B^2 + D^2)/2 d^3x`` as a quadratic form in the photon ladder operators."""
    space = IndexSpace(basis)
    n = space.size
    total = QuadraticForm(0.0, np.zeros((n, n), complex), np.zeros((n, n), complex),
                          np.zeros((n, n), complex))
    for idx in np.ndindex(*basis.grid_shape):
        for kind in ("B", "D"):
            for comp in field_expr(space, idx, kind):
                total = total + square(comp, normal_ordered=normal_ordered).scaled(0.5 * basis.dV)
    return total


# --------------------------------------------------------------------------
# operators at a grid point


def _field_vectors(basis, kind):
    """Per-mode vector coefficient of ``b_{a,j}`` (shape ``(M, 2, 3)``) before ``Phi_a(x)``."""
    u = basis.units
    w = basis.omega[:, None, None]
    e = basis.pol
    # k_hat x e1 = e2 and k_hat x e2 = -e1
    kxe = np.stack([e[:, 1], -e[:, 0]], axis=1)
    if kind == "F":
        return 1j * u.c * np.sqrt(u.hbar / (2 * w)) * e
    if kind == "D":
        return -np.sqrt(u.hbar * w / 2) * kxe
    if kind == "B":
        return np.sqrt(u.hbar * w / 2) * e
    if kind == "Pi_F":
        return np.sqrt(u.hbar * w / 2) * e / u.c
    if kind == "Psi":
        return e.astype(complex)
    raise ValueError(kind)


def _bath_scale(space, grid_index, kind):
    """Per-line coefficient of ``b`` (and ``b^dag`` up to sign) for bath operators."""
    basis, bath = space.basis, space.bath
    hbar = basis.units.hbar
    dV = basis.dV
    om, wt = bath.omega, bath.weights
    mass = wt * dV
    g = int(np.ravel_multi_index(tuple(grid_index), basis.grid_shape))
    point = 0 if bath.profile.n_points == 1 else g
    if kind == "X":
        s = np.sqrt(hbar / (2 * mass * om))
        return s, s
    if kind == "Pi_X":
        s = 1j * np.sqrt(hbar * om / (2 * mass))
        return -s, s
    if kind == "P":
        sigma = bath.profile.sigma(om, point)
        s = wt * np.sqrt(2 * sigma / np.pi) * np.sqrt(hbar / (2 * mass * om))
        return s, s
    if kind == "f":
        return 1 / np.sqrt(mass), np.zeros_like(om)
    raise ValueError(kind)


def field_expr(space, grid_index, kind, *, line=None):
    """List of three :class:`LadderExpr`, one per Cartesian component.

    Photon kinds ``F, D, B, Pi_F = B/c, Psi`` follow the modal expansions;
    ``P`` sums all bath lines at the point and ``E = D - P``.  The single-line
    bath kinds ``X, Pi_X = dX/dt, f`` need ``line``.  ``Psi`` has no
    creation part, so its adjoint supplies ``Psi^dagger``.
    """
    if kind not in KINDS:
        raise ValueError(f"unsupported operator kind {kind!r}; expected one of {KINDS}")
    basis = space.basis
    x = basis.point(grid_index)
    out = []
    if kind == "E":
        D = field_expr(space, grid_index, "D")
        P = field_expr(space, grid_index, "P")
        return [d - p for d, p in zip(D, P)]
    if kind in ("F", "D", "B", "Pi_F", "Psi"):
        vec = _field_vectors(basis, kind) * basis.phi(x)[:, None, None]
        for d in range(3):
            a = np.zeros(space.size, complex)
            c = np.zeros(space.size, complex)
            a[: space.n_field] = vec[..., d].ravel()
            if kind != "Psi":
                c[: space.n_field] = np.conj(vec[..., d]).ravel()
            out.append(LadderExpr(space, a, c))
        return out
    if space.bath is None:
        raise ValueError(f"operator {kind!r} needs a bath in the index space")
    sa, sc = _bath_scale(space, grid_index, kind)
    lines = range(space.bath.omega.size) if line is None else [line]
    if kind != "P" and line is None:
        raise ValueError(f"operator {kind!r} refers to a single bath line; pass line=")
    for d in range(3):
        a = np.zeros(space.size, complex)
        c = np.zeros(space.size, complex)
        for i in lines:
            m = space.bath_index(i, grid_index, d)
            a[m] = sa[i]
            c[m] = sc[i]
        out.append(LadderExpr(space, a, c))
    return out


def commutator_matrix(X, Y):
    """3x3 matrix ``[X_j, Y_k]`` for component lists."""
    return np.array([[commutator(xj, yk) for yk in Y] for xj in X])


def curl_delta_kernel(basis, x, xp):
    """Truncated ``i c hbar eps_jkl d/dx_l delta(x - x')`` by direct mode summation."""
    u = basis.units
    out = np.zeros((3, 3), complex)
    eps = np.zeros((3, 3, 3))
    eps[0, 1, 2] = eps[1, 2, 0] = eps[2, 0, 1] = 1
    eps[0, 2, 1] = eps[2, 1, 0] = eps[1, 0, 2] = -1
    r = np.asarray(x, float) - np.asarray(xp, float)
    for a in range(basis.n_modes):
        k = basis.k[a]
        phase = np.exp(1j * k @ r) / basis.volume
        # two polarisations complete the transverse projector; curl of delta is already transverse
        out += 1j * u.c * u.hbar * np.einsum("jkl,l->jk", eps, 1j * k) * phase
    return out


# --------------------------------------------------------------------------
# catalogue


@dataclass(frozen=True)
class CatalogEntry:
    identity: str
    max_deviation: float
    passed: bool


def _scale(X, Y):
    """Sum of the magnitudes of every term entering ``[X_j, Y_k]``."""
    return max(float(np.sum(np.abs(x.coeff_a * y.coeff_c) + np.abs(x.coeff_c * y.coeff_a)))
               for x in X for y in Y)


def _deviation(X, Y, expected=0.0):
    scale = _scale(X, Y)
    err = float(np.max(np.abs(commutator_matrix(X, Y) - expected)))
    return err / scale if scale > 0 else err


def verify_catalog(basis, bath, pairs, *, tol=1e-12):
    """Check the equal-time commutator catalogue at the given point pairs.

    ``pairs`` is a sequence of ``(grid_index, grid_index)`` tuples.  Each
    deviation is relative to the summed magnitude of the terms entering the
    commutator, so it measures cancellation quality independently of units.
    Identities between disjoint sectors must hold exactly.
    """
    space = IndexSpace(basis, bath)
    u = basis.units
    dev = {}

    def record(name, value):
        dev[name] = max(dev.get(name, 0.0), float(value))

    kinds = ("F", "D", "B", "E", "Pi_F", "P", "Psi")
    n_lines = bath.omega.size
    for gx, gy in pairs:
        x, y = basis.point(gx), basis.point(gy)
        ox = {k: field_expr(space, gx, k) for k in kinds}
        oy = {k: field_expr(space, gy, k) for k in kinds}
        dperp = modes.transverse_delta(basis, x, y)
        curl = curl_delta_kernel(basis, x, y)
        psi_dag = [p.adjoint() for p in oy["Psi"]]

        record("[F,Pi_F]=i hbar delta_perp", _deviation(ox["F"], oy["Pi_F"], 1j * u.hbar * dperp))
        record("[B,D]=i c hbar curl delta", _deviation(ox["B"], oy["D"], curl))
        record("[B,E]=i c hbar curl delta", _deviation(ox["B"], oy["E"], curl))
        record("[B,E]=[B,D]", float(np.max(np.abs(commutator_matrix(ox["B"], oy["E"])
                                                   - commutator_matrix(ox["B"], oy["D"]))))
               / max(_scale(ox["B"], oy["D"]), np.finfo(float).tiny))
        record("[Psi,Psi^dag]=delta_perp", _deviation(ox["Psi"], psi_dag, dperp))
        record("[Psi,Psi]=0", _deviation(ox["Psi"], oy["Psi"]))
        for k in ("F", "Pi_F", "B", "D", "E", "P"):
            record(f"[{k},{k}]=0", _deviation(ox[k], oy[k]))
        # photon and bath sectors have disjoint support: exactly zero
        record("[field,bath]=0 (exact)",
               max(float(np.max(np.abs(commutator_matrix(ox[f], oy["P"]))))
                   for f in ("F", "D", "B", "Pi_F", "Psi")))
        same = tuple(gx) == tuple(gy)
        for i in range(n_lines):
            X = field_expr(space, gx, "X", line=i)
            fx = field_expr(space, gx, "f", line=i)
            mass = bath.weights[i] * basis.dV
            for j in range(n_lines):
                expect = np.eye(3) * float(same and i == j)
                Pi = field_expr(space, gy, "Pi_X", line=j)
                fy = field_expr(space, gy, "f", line=j)
                record("[X,Pi_X]=i hbar delta/(w dV)",
                       _deviation(X, Pi, 1j * u.hbar * expect / mass))
                record("[f,f^dag]=delta/(w dV)",
                       _deviation(fx, [e.adjoint() for e in fy], expect / mass))
                record("[f,f]=0", _deviation(fx, fy))
                record("[field,bath]=0 (exact)",
                       max(float(np.max(np.abs(commutator_matrix(ox[k], Pi))))
                           for k in ("F", "D", "B", "Pi_F", "Psi")))

    entries = []
    for name, v in dev.items():
        limit = 0.0 if name.endswith("(exact)") else tol
        entries.append(CatalogEntry(name, v, bool(v <= limit)))
    return entries


def catalog_to_csv(entries, path):
    rows = ([e.identity, e.max_deviation, e.passed] for e in entries)
    return write_csv(path, ["identity", "max_deviation", "pass"], rows)


# --------------------------------------------------------------------------
# noise


@dataclass(frozen=True, eq=False)
class NoiseStats:
    """Per-line statistics of the noise current at selected points.

    ``estimate`` is ``<|J~|^2> w dV`` and ``analytic`` is ``w hbar sigma / pi``;
    arrays have shape ``(n_lines, n_points)`` (``cross_*``: ``n_lines - 1``).
    """

    omega: np.ndarray
    analytic: np.ndarray
    estimate: np.ndarray
    stderr: np.ndarray
    cross: np.ndarray
    cross_stderr: np.ndarray
    n_realizations: int
    seed: int

    @property
    def deviation(self):
        """``|estimate / analytic - 1|`` (zero where both vanish)."""
        safe = np.where(self.analytic > 0, self.analytic, 1.0)
        return np.where(self.analytic > 0, np.abs(self.estimate / safe - 1), np.abs(self.estimate))

    @property
    def relative_stderr(self):
        safe = np.where(self.analytic > 0, self.analytic, 1.0)
        return self.stderr / safe

    def to_csv(self, path):
        rows = ((w, p, self.analytic[i, p], self.estimate[i, p], self.stderr[i, p])
                for i, w in enumerate(self.omega) for p in range(self.analytic.shape[1]))
        return write_csv(path, ["omega", "point", "analytic", "estimate", "stderr"], rows)


def sample_noise(profile, omega, weights, n_realizations, seed, *, points=(0,), dV=1.0,
                 hbar=1.0, components=3, chunk=10_000, threads=1, min_realizations=1000):
    """Monte Carlo estimate of the noise-current spectrum.

    Draws ``f`` with ``<|f|^2> = 1 / (w_i dV)`` per (line, point, component),
    forms ``J~ = -i w sqrt(hbar sigma / (pi w)) f`` and returns
    :class:`NoiseStats` with the mean of ``|J~|^2 w dV`` over realizations
    and components, and the normalised correlation of neighbouring lines.
    Chunk ``k`` is seeded with ``SeedSequence([seed, k])``, so the result does
    not depend on ``threads``.
    """
    if n_realizations < min_realizations:
        raise ValueError(f"need at least {min_realizations} realizations, got {n_realizations}")
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    weights = np.atleast_1d(np.asarray(weights, dtype=float))
    points = list(points)
    sig = np.array([[profile.sigma(w, p) for p in points] for w in omega])
    amp = -1j * omega[:, None] * np.sqrt(hbar * sig / (np.pi * omega[:, None]))
    norm = 1.0 / np.sqrt(weights[:, None] * dV)
    analytic = omega[:, None] * hbar * sig / np.pi
    shape = (omega.size, len(points), components)

    def run(k_rng):
        k, (s, e) = k_rng
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), k]))
        n = e - s
        f = (rng.standard_normal((n,) + shape) + 1j * rng.standard_normal((n,) + shape))
        f *= norm[None, :, :, None] / math.sqrt(2)
        J = amp[None, :, :, None] * f
        p = np.abs(J) ** 2 * (weights[:, None] * dV)[None, :, :, None]
        if omega.size > 1:
            x = J[:, 1:] * np.conj(J[:, :-1]) * (np.sqrt(weights[1:] * weights[:-1])[:, None] * dV)[None, :, :, None]
        else:
            x = np.zeros((n, 0, len(points), components), complex)
        return (p.sum(axis=(0, 3)), (p**2).sum(axis=(0, 3)), x.sum(axis=(0, 3)),
                (np.abs(x) ** 2).sum(axis=(0, 3)))

    ranges = list(enumerate(chunk_ranges(int(n_realizations), int(chunk))))
    parts = ordered_map(run, ranges, threads)
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    x1 = sum(p[2] for p in parts)
    x2 = sum(p[3] for p in parts)
    count = n_realizations * components
    mean = s1 / count
    var = np.maximum(s2 / count - mean**2, 0.0)
    stderr = np.sqrt(var / count)
    xmean = x1 / count
    xvar = np.maximum(x2 / count - np.abs(xmean) ** 2, 0.0)
    pair = np.sqrt(analytic[1:] * analytic[:-1])
    safe = np.where(pair > 0, pair, 1.0)
    return NoiseStats(omega=omega, analytic=analytic, estimate=mean, stderr=stderr,
                      cross=np.where(pair > 0, np.abs(xmean) / safe, np.abs(xmean)),
                      cross_stderr=np.where(pair > 0, np.sqrt(xvar / count) / safe,
                                            np.sqrt(xvar / count)),
                      n_realizations=int(n_realizations), seed=int(seed))

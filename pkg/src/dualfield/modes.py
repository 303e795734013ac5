"""Periodic-box plane-wave basis with two transverse polarisations per k.

Mode functions are ``Phi_a(x) = exp(i k_a . x) / sqrt(V)`` sampled on the
uniform grid ``x = (j_x Lx/Nx, j_y Ly/Ny, j_z Lz/Nz)``.  Modal coefficient
arrays have shape ``(n_modes, 2)``: row ``a`` is the wavevector, column ``j``
the polarisation.  Modes are ordered lexicographically in ``(nx, ny, nz)``.

Polarisations follow ``e1 = k x z / |k x z|`` and ``e2 = k_hat x e1``.  For
``k`` along ``+z`` the pair ``(x, y)`` is used and for ``-z`` the pair
``(-x, y)``, which keeps ``e1(-k) = -e1(k)`` and ``e2(-k) = e2(k)``.
"""

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .io import write_csv
from .units import NATURAL

PARITY = np.array([-1.0, 1.0])
KINDS = ("P", "E", "D", "B", "F", "J")


class AliasingWarning(UserWarning):
    """A projected field carries content outside the mode cutoff."""


@dataclass(frozen=True)
class GridField:
    """A 3-vector field on the basis grid, tagged with its physical kind."""

    values: np.ndarray
    kind: str = "P"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown field kind {self.kind!r}")


def _arr(field):
    return np.asarray(getattr(field, "values", field))


def polarizations(k):
    """Transverse unit pair ``(e1, e2)`` for a nonzero wavevector."""
    k = np.asarray(k, dtype=float)
    khat = k / np.linalg.norm(k)
    cross = np.cross(k, [0.0, 0.0, 1.0])
    if np.linalg.norm(cross) <= 1e-12 * np.linalg.norm(k):
        e1 = np.array([1.0, 0.0, 0.0]) if k[2] > 0 else np.array([-1.0, 0.0, 0.0])
    else:
        e1 = cross / np.linalg.norm(cross)
    e2 = np.cross(khat, e1)
    return e1, e2


@dataclass(frozen=True, eq=False)
class ModeBasis:
    box: tuple
    k_max: float
    grid_shape: tuple
    n: np.ndarray       # (M, 3) integer lattice indices
    k: np.ndarray       # (M, 3)
    omega: np.ndarray   # (M,)
    pol: np.ndarray     # (M, 2, 3)
    pair: np.ndarray    # (M,) index of -k
    units: object = NATURAL

    @property
    def n_modes(self):
        return self.k.shape[0]

    @property
    def volume(self):
        return float(np.prod(self.box))

    @property
    def n_grid(self):
        return int(np.prod(self.grid_shape))

    @property
    def dV(self):
        return self.volume / self.n_grid

    @property
    def khat(self):
        return self.k / np.linalg.norm(self.k, axis=1)[:, None]

    @property
    def fft_index(self):
        """Tuple of index arrays locating each mode in an ``fftn`` array."""
        return tuple((self.n[:, d] % self.grid_shape[d]) for d in range(3))

    def axes(self):
        return [np.arange(N) * L / N for L, N in zip(self.box, self.grid_shape)]

    def points(self):
        """Grid coordinates, shape ``(*grid_shape, 3)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def point(self, index):
        return np.array([i * L / N for i, L, N in zip(index, self.box, self.grid_shape)])

    def phi(self, x):
        """``Phi_a(x)`` for all modes at a single position."""
        return np.exp(1j * (self.k @ np.asarray(x, dtype=float))) / math.sqrt(self.volume)

    def wavevectors(self):
        """Full FFT-grid wavevectors, each of shape ``grid_shape`` (broadcast)."""
        ks = [2 * np.pi * np.fft.fftfreq(N, d=L / N) for L, N in zip(self.box, self.grid_shape)]
        return np.meshgrid(*ks, indexing="ij")

    def to_csv(self, path):
        header = ["mode", "nx", "ny", "nz", "kx", "ky", "kz", "omega",
                  "e1x", "e1y", "e1z", "e2x", "e2y", "e2z", "pair"]
        rows = ([a, *self.n[a], *self.k[a], self.omega[a], *self.pol[a, 0], *self.pol[a, 1],
                 self.pair[a]] for a in range(self.n_modes))
        return write_csv(path, header, rows)


def build_basis(box, k_max, grid_shape, units=NATURAL):
    """Enumerate every nonzero ``k = 2 pi n / L`` with ``|k| <= k_max``."""
    box = tuple(float(L) for L in box)
    grid_shape = tuple(int(N) for N in grid_shape)
    if len(box) != 3 or len(grid_shape) != 3:
        raise ValueError("box and grid_shape need three entries")
    if any(not L > 0 for L in box):
        raise ValueError(f"box lengths must be positive, got {box}")
    if not k_max > 0:
        raise ValueError("k_max must be positive")
    if any(N < 1 for N in grid_shape):
        raise ValueError("grid sizes must be positive")
    tol = 1e-12 * k_max
    nmax = [int(math.floor((k_max + tol) * L / (2 * np.pi))) for L in box]
    for d, (m, N) in enumerate(zip(nmax, grid_shape)):
        if m > 0 and not 2 * m < N:
            raise ValueError(f"grid under-resolves k_max along axis {d}: "
                             f"need N > {2 * m}, got {N}")
    ns, ks = [], []
    for n in itertools.product(*(range(-m, m + 1) for m in nmax)):
        if n == (0, 0, 0):
            continue
        k = np.array([2 * np.pi * ni / L for ni, L in zip(n, box)])
        if np.linalg.norm(k) <= k_max + tol:
            ns.append(n)
            ks.append(k)
    if not ns:
        raise ValueError("no wavevector below k_max; enlarge the box or the cutoff")
    n = np.array(ns, dtype=int)
    k = np.array(ks)
    pol = np.array([polarizations(kv) for kv in k])
    lookup = {tuple(v): i for i, v in enumerate(ns)}
    pair = np.array([lookup[tuple(-v)] for v in n])
    omega = units.c * np.linalg.norm(k, axis=1)
    for arr in (n, k, pol, pair, omega):
        arr.setflags(write=False)
    return ModeBasis(box=box, k_max=float(k_max), grid_shape=grid_shape, n=n, k=k,
                     omega=omega, pol=pol, pair=pair, units=units)


# --------------------------------------------------------------------------
# spectral transforms


def modal_vectors(coef, basis):
    """Cartesian vector per wavevector: ``sum_j coef[a, j] e_{a, j}``."""
    return np.einsum("mj,mjd->md", coef, basis.pol)


def synthesize(vectors, basis):
    """Complex grid field ``sum_a vectors[a] Phi_a(x)`` (no conjugate added)."""
    vectors = np.asarray(vectors)
    if vectors.shape != (basis.n_modes, 3):
        raise ValueError(f"expected vectors of shape {(basis.n_modes, 3)}, got {vectors.shape}")
    spec = np.zeros(basis.grid_shape + (3,), dtype=complex)
    spec[basis.fft_index] = vectors * (basis.n_grid / math.sqrt(basis.volume))
    return np.fft.ifftn(spec, axes=(0, 1, 2))


def synthesize_real(vectors, basis):
    """``sum_a vectors[a] Phi_a + c.c.`` evaluated as twice the real part."""
    return 2.0 * synthesize(vectors, basis).real


def fourier_components(field, basis):
    """``int field(x) Phi_a*(x) d^3x`` for every mode: shape ``(n_modes, 3)``."""
    values = _arr(field)
    spec = np.fft.fftn(values, axes=(0, 1, 2))
    return spec[basis.fft_index] * (math.sqrt(basis.volume) / basis.n_grid)


def project(field, basis, *, alias_tol=1e-10):
    """Transverse modal coefficients ``f[a, j] = int field . e_{a,j} Phi_a* d^3x``.

    Warns with :class:`AliasingWarning` when the fraction of spectral power
    above ``k_max`` exceeds ``alias_tol``; pass ``math.inf`` to silence it.
    """
    values = _arr(field)
    if values.shape != basis.grid_shape + (3,):
        raise ValueError(f"field shape {values.shape} does not match grid {basis.grid_shape}")
    spec = np.fft.fftn(values, axes=(0, 1, 2))
    power = np.sum(np.abs(spec) ** 2, axis=-1)
    total = float(np.sum(power))
    if total > 0:
        kx, ky, kz = basis.wavevectors()
        out = np.sqrt(kx**2 + ky**2 + kz**2) > basis.k_max * (1 + 1e-12)
        frac = float(np.sum(power[out])) / total
        if frac > alias_tol:
            warnings.warn(f"{frac:.3g} of the field power lies above k_max", AliasingWarning,
                          stacklevel=2)
    comps = spec[basis.fft_index] * (math.sqrt(basis.volume) / basis.n_grid)
    return np.einsum("md,mjd->mj", comps, basis.pol)


def transverse_part(field, basis):
    """In-band transverse part of a real field, via projection and synthesis."""
    f = project(field, basis, alias_tol=math.inf)
    return synthesize(modal_vectors(f, basis), basis).real


def curl(field, basis):
    """Spectral curl on the full FFT grid."""
    values = _arr(field)
    spec = np.fft.fftn(values, axes=(0, 1, 2))
    kx, ky, kz = basis.wavevectors()
    k = np.stack([kx, ky, kz], axis=-1)
    out = np.fft.ifftn(1j * np.cross(k, spec), axes=(0, 1, 2))
    return out.real if np.isrealobj(values) else out


def divergence(field, basis):
    """Spectral divergence on the full FFT grid."""
    values = _arr(field)
    spec = np.fft.fftn(values, axes=(0, 1, 2))
    kx, ky, kz = basis.wavevectors()
    d = 1j * (kx * spec[..., 0] + ky * spec[..., 1] + kz * spec[..., 2])
    out = np.fft.ifftn(d)
    return out.real if np.isrealobj(values) else out


# --------------------------------------------------------------------------
# fields from modal amplitudes


def _check_state(c, basis):
    c = np.asarray(getattr(c, "c", c))
    if c.shape != (basis.n_modes, 2):
        raise ValueError(f"state shape {c.shape} does not match basis ({basis.n_modes}, 2)")
    return c


def field_coefficients(c, basis):
    """Per-mode vectors multiplying ``Phi_a`` (before adding c.c.) for F, D and B."""
    c = _check_state(c, basis)
    u = basis.units
    w = basis.omega[:, None]
    f_vec = modal_vectors(1j * u.c * np.sqrt(u.hbar / (2 * w)) * c, basis)
    b_vec = modal_vectors(np.sqrt(u.hbar * w / 2) * c, basis)
    # k_hat x e1 = e2 and k_hat x e2 = -e1
    amp = -np.sqrt(u.hbar * w / 2) * c
    d_vec = amp[:, :1] * basis.pol[:, 1] - amp[:, 1:] * basis.pol[:, 0]
    return f_vec, d_vec, b_vec


def reconstruct_fields(c, basis):
    """Real grid fields ``(F, D, B)`` from modal amplitudes ``c[a, j]``."""
    f_vec, d_vec, b_vec = field_coefficients(c, basis)
    return (GridField(synthesize_real(f_vec, basis), "F"),
            GridField(synthesize_real(d_vec, basis), "D"),
            GridField(synthesize_real(b_vec, basis), "B"))


def generalized_coordinates(c, basis):
    """``(q, q_dot)`` with ``F = sum q e Phi`` and ``q_{-a} = eta q_a*``."""
    c = _check_state(c, basis)
    u = basis.units
    w = basis.omega[:, None]
    partner = PARITY * np.conj(c[basis.pair])
    scale = u.c * np.sqrt(2 * u.hbar * w)
    q = scale * (partner - c) / (2j * w)
    qdot = scale * (partner + c) / 2
    return q, qdot


def amplitudes_from_coordinates(q, qdot, basis):
    """Inverse of :func:`generalized_coordinates`: ``c = (qdot - i w q) / (c sqrt(2 hbar w))``."""
    u = basis.units
    w = basis.omega[:, None]
    return (qdot - 1j * w * q) / (u.c * np.sqrt(2 * u.hbar * w))


def source_term(P, basis):
    """``S[a, j] = c^2 (i k_a x P~_a) . e_{a, j}`` from a real polarisation field."""
    comps = fourier_components(P, basis)
    kxp = 1j * np.cross(basis.k, comps)
    return basis.units.c**2 * np.einsum("md,mjd->mj", kxp, basis.pol)


def transverse_delta(basis, x, xp, *, imag_tol=1e-12):
    """Truncated ``delta_perp(x - x')`` as a real 3x3 matrix."""
    khat = basis.khat
    proj = np.eye(3)[None] - khat[:, :, None] * khat[:, None, :]
    phase = np.exp(1j * (basis.k @ (np.asarray(x, float) - np.asarray(xp, float)))) / basis.volume
    total = np.einsum("m,mij->ij", phase, proj)
    if np.max(np.abs(total.imag)) > imag_tol:
        raise AssertionError("transverse delta has a non-vanishing imaginary part; "
                             "basis pairing is broken")
    return total.real


def pairing_residual(c, basis):
    """``max |q_{-a} - eta q_a*|``: zero for any amplitude set by construction."""
    q, _ = generalized_coordinates(c, basis)
    return float(np.max(np.abs(q[basis.pair] - PARITY * np.conj(q)), initial=0.0))


def quarter_laplacian(coef, basis):
    """``(-lap)^(1/4)`` acting on modal coefficients: multiply by ``sqrt|k_a|``.

    Defined only through the mode expansion; no real-space kernel is implied.
    """
    return np.sqrt(np.linalg.norm(basis.k, axis=1))[:, None] * np.asarray(coef)


def photon_field(c, basis):
    """Complex grid field ``Psi = sum c_{a,j} e_{a,j} Phi_a``."""
    c = _check_state(c, basis)
    return synthesize(modal_vectors(c, basis), basis)


def negative_frequency_field(c, basis):
    """``Z^- = dF/dt - i c sqrt(-lap) F`` on the grid, built from ``(q, q_dot)``."""
    q, qdot = generalized_coordinates(c, basis)
    z = qdot - 1j * basis.omega[:, None] * q
    return synthesize(modal_vectors(z, basis), basis)

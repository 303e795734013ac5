"""Causal linear response of the oscillator-bath medium.

A conductivity profile fixes everything: the memory kernel

    chi(tau) = int_0^inf (2 sigma(w) / pi) sin(w tau) / w  dw,

its Fourier transform ``eps(w) = 1 + int_0^inf chi(tau) exp(i w tau) dtau``,
and the principal-value representation

    eps(w) = 1 + (2/pi) PV int_0^inf sigma(u) / (u^2 - w^2) du + i sigma(w) / w.

Two independent routes to ``eps`` are provided (through the kernel and through
the PV integral) so they can be checked against each other.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import simpson

from .io import write_csv
from .parallel import chunk_ranges, ordered_map, single_threaded_blas

FORMS = ("flat", "lorentzian", "tabulated")


class KernelNotDecayedWarning(UserWarning):
    """The susceptibility kernel is still ringing at the last sample."""


# --------------------------------------------------------------------------
# quadrature helpers


def gauss_legendre(edges, nodes=16):
    """Composite Gauss-Legendre nodes and weights on consecutive panels."""
    x0, w0 = leggauss(nodes)
    edges = np.asarray(edges, dtype=float)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    x = 0.5 * (a + b) + half * x0
    return x.ravel(), (half * w0).ravel()


def panel_edges(lo, hi, panels, extra=()):
    """Uniform panel edges on ``[lo, hi]`` refined with interior breakpoints."""
    edges = np.linspace(lo, hi, int(panels) + 1)
    extra = np.asarray([p for p in extra if lo < p < hi], dtype=float)
    return np.unique(np.concatenate([edges, extra]))


def _check_uniform(grid, name):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError(f"{name} must be a 1-D grid with at least two samples")
    steps = np.diff(grid)
    h = (grid[-1] - grid[0]) / (grid.size - 1)
    if h <= 0 or np.max(np.abs(steps - h)) > 1e-9 * max(abs(h), abs(grid[-1])):
        raise ValueError(f"{name} must be uniform and increasing")
    return grid, h


# --------------------------------------------------------------------------
# conductivity


@dataclass(frozen=True, eq=False)
class ConductivityProfile:
    """Nonnegative conductivity ``sigma(w, x) = g(x) s(|w|)``.

    ``s`` is one of three spectral shapes:

    * ``flat``: ``sigma0`` on ``[0, cutoff]``, zero above.
    * ``lorentzian``: ``sigma0 gamma^2 w^2 / ((w^2 - omega0^2)^2 + gamma^2 w^2)``,
      peaking at ``sigma0`` for ``w = omega0``.  Its permittivity is the
      damped-oscillator form ``1 + sigma0 gamma / (omega0^2 - w^2 - i gamma w)``.
    * ``tabulated``: linear interpolation of ``(table_omega, table_sigma)``,
      zero outside the table.

    ``modulation`` holds ``g(x) >= 0`` on the spatial grid; ``None`` means a
    homogeneous medium (a single point with ``g = 1``).  Only ``w >= 0`` is
    represented; negative arguments are folded by evenness on evaluation.
    """

    form: str = "flat"
    sigma0: float = 0.0
    cutoff: float = 1.0
    omega0: float = 1.0
    gamma: float = 0.1
    table_omega: tuple = ()
    table_sigma: tuple = ()
    modulation: np.ndarray = None

    def __post_init__(self):
        if self.form not in FORMS:
            raise ValueError(f"unknown profile form {self.form!r}; expected one of {FORMS}")
        if self.form == "flat":
            if self.sigma0 < 0 or not self.cutoff > 0:
                raise ValueError("flat profile needs sigma0 >= 0 and cutoff > 0")
        elif self.form == "lorentzian":
            if self.sigma0 < 0 or not self.omega0 > 0 or not self.gamma > 0:
                raise ValueError("lorentzian profile needs sigma0 >= 0, omega0 > 0, gamma > 0")
        else:
            w = np.asarray(self.table_omega, dtype=float)
            s = np.asarray(self.table_sigma, dtype=float)
            if w.ndim != 1 or w.size < 2 or w.shape != s.shape:
                raise ValueError("tabulated profile needs matching 1-D tables of length >= 2")
            if w[0] < 0 or np.any(np.diff(w) <= 0):
                raise ValueError("tabulated frequencies must be >= 0 and strictly increasing")
            if np.any(s < 0) or not np.all(np.isfinite(s)):
                raise ValueError("tabulated conductivity must be finite and nonnegative")
            object.__setattr__(self, "table_omega", tuple(float(v) for v in w))
            object.__setattr__(self, "table_sigma", tuple(float(v) for v in s))
        if self.modulation is not None:
            g = np.array(self.modulation, dtype=float)
            if g.size == 0 or np.any(g < 0) or not np.all(np.isfinite(g)):
                raise ValueError("spatial modulation must be finite and nonnegative")
            g.setflags(write=False)
            object.__setattr__(self, "modulation", g)

    # constructors
    @classmethod
    def flat(cls, sigma0, cutoff, modulation=None):
        return cls("flat", sigma0=float(sigma0), cutoff=float(cutoff), modulation=modulation)

    @classmethod
    def lorentzian(cls, sigma0, omega0, gamma, modulation=None):
        return cls("lorentzian", sigma0=float(sigma0), omega0=float(omega0), gamma=float(gamma),
                   modulation=modulation)

    @classmethod
    def tabulated(cls, omega, sigma, modulation=None):
        return cls("tabulated", table_omega=tuple(omega), table_sigma=tuple(sigma),
                   modulation=modulation)

    @classmethod
    def vacuum(cls):
        return cls.flat(0.0, 1.0)

    # spatial structure
    @property
    def g(self):
        """Flattened modulation values, one per grid point."""
        if self.modulation is None:
            return np.ones(1)
        return self.modulation.ravel()

    @property
    def n_points(self):
        return self.g.size

    def with_modulation(self, modulation):
        kw = {f: getattr(self, f) for f in self.__dataclass_fields__}
        kw["modulation"] = modulation
        return ConductivityProfile(**kw)

    # spectral evaluation
    def spectral(self, omega):
        """Spectral shape ``s(|w|)``."""
        u = np.abs(np.asarray(omega, dtype=float))
        if self.form == "flat":
            return np.where(u <= self.cutoff, self.sigma0, 0.0) + 0.0 * u
        if self.form == "lorentzian":
            w0, gm = self.omega0, self.gamma
            return self.sigma0 * gm**2 * u**2 / ((u**2 - w0**2) ** 2 + gm**2 * u**2)
        return np.interp(u, self.table_omega, self.table_sigma, left=0.0, right=0.0)

    def sigma(self, omega, point=0):
        return self.g[point] * self.spectral(omega)

    def on_grid(self, omega):
        """``sigma`` at every grid point: array of shape ``(len(omega), n_points)``."""
        return np.outer(self.spectral(omega), self.g)

    @property
    def is_zero(self):
        if not np.any(self.g > 0):
            return True
        if self.form == "tabulated":
            return not any(s > 0 for s in self.table_sigma)
        return self.sigma0 == 0.0

    def support(self):
        """Upper end of the spectral support (``inf`` for the lorentzian)."""
        if self.form == "flat":
            return self.cutoff
        if self.form == "tabulated":
            return self.table_omega[-1]
        return math.inf

    def default_omega_max(self):
        if self.form == "lorentzian":
            return max(30.0 * self.omega0, self.omega0 + 400.0 * self.gamma)
        return self.support()

    def jumps(self):
        """Frequencies ``w > 0`` where ``s`` is discontinuous."""
        if self.form == "flat":
            return [self.cutoff] if self.sigma0 > 0 else []
        if self.form == "tabulated":
            out = []
            if self.table_omega[0] > 0 and self.table_sigma[0] > 0:
                out.append(self.table_omega[0])
            if self.table_sigma[-1] > 0:
                out.append(self.table_omega[-1])
            return out
        return []

    def breakpoints(self):
        """Kinks and narrow features that quadrature panels should resolve."""
        if self.form == "flat":
            return [self.cutoff]
        if self.form == "tabulated":
            return list(self.table_omega)
        offsets = [0.0] + [s * f for f in (0.25, 0.5, 1, 2, 4, 8, 16, 32, 64) for s in (-1, 1)]
        return sorted(p for p in (self.omega0 + self.gamma * o for o in offsets) if p > 0)

    def low_frequency_order(self):
        """Exponent ``p`` with ``s(u) ~ u^p`` as ``u -> 0`` (``inf`` if zero near 0)."""
        if self.is_zero:
            return math.inf
        if self.form == "flat":
            return 0
        if self.form == "lorentzian":
            return 2
        if self.table_omega[0] > 0:
            return math.inf
        return 0 if self.table_sigma[0] > 0 else 1


# --------------------------------------------------------------------------
# time domain


@dataclass(frozen=True, eq=False)
class SusceptibilityKernel:
    """Samples of ``chi(x, tau)`` for ``tau >= 0`` on a uniform grid.

    Stored factorised as ``modulation[x] * shape_values[tau]``; ``values``
    expands to the full ``(n_points, n_tau)`` array.
    """

    tau: np.ndarray
    shape_values: np.ndarray
    modulation: np.ndarray
    omega_max: float
    tail_bound: float
    quadrature_error: float

    @property
    def dtau(self):
        return (self.tau[-1] - self.tau[0]) / (self.tau.size - 1)

    @property
    def values(self):
        return np.outer(self.modulation, self.shape_values)

    def at(self, point=0):
        return self.modulation[point] * self.shape_values

    def to_csv(self, path):
        rows = ((i, t, v) for i, g in enumerate(self.modulation)
                for t, v in zip(self.tau, g * self.shape_values))
        return write_csv(path, ["x_index", "tau", "value"], rows)


def _sine_transform(amp, nodes, tau, threads=1, block=64):
    """``sum_n amp_n sin(nodes_n tau_k)`` for uniform ``tau``.

    Phases inside a block come from one precomputed matrix, so the cost is a
    matrix product per block instead of a fresh ``sin`` per (node, tau) pair.
    """
    n = tau.size
    dtau = (tau[-1] - tau[0]) / (n - 1) if n > 1 else 0.0
    steps = np.exp(1j * np.outer(nodes, dtau * np.arange(block)))

    def one(rng):
        s, e = rng
        head = amp * np.exp(1j * nodes * tau[s])
        return (head @ steps[:, : e - s]).imag

    parts = ordered_map(one, chunk_ranges(n, block), threads)
    out = np.concatenate(parts)
    out[tau == 0.0] = 0.0
    return out


def _tail_bound(profile, omega_max):
    """Bound on the kernel contribution from frequencies above ``omega_max``."""
    if profile.support() <= omega_max:
        return 0.0
    edges = np.geomspace(omega_max, omega_max * 1e6, 241)
    x, w = gauss_legendre(edges, 8)
    return float((2 / np.pi) * np.sum(w * profile.spectral(x) / x) * np.max(profile.g))


def chi_kernel(profile, tau, *, omega_max=None, panels=None, nodes=16, threads=1):
    """Susceptibility kernel by composite Gauss-Legendre quadrature in frequency.

    ``panels`` defaults to enough panels to resolve ``sin(w tau_max)``
    (at least 64).  Gauss nodes are interior, so the removable point
    ``w = 0`` of ``sin(w tau)/w`` is never sampled.
    """
    tau, _ = _check_uniform(tau, "tau grid")
    if tau[0] < 0:
        raise ValueError("tau grid must be nonnegative")
    if omega_max is None:
        omega_max = profile.default_omega_max()
    omega_max = float(omega_max)
    if not omega_max > 0:
        raise ValueError("omega_max must be positive")
    if profile.form == "tabulated" and profile.support() > omega_max * (1 + 1e-12):
        raise ValueError(f"omega_max={omega_max} does not cover the tabulated support "
                         f"up to {profile.support()}")
    if panels is None:
        panels = max(64, math.ceil(omega_max * tau[-1] / 12.0))

    def shape(n_panels):
        edges = panel_edges(0.0, omega_max, n_panels, profile.breakpoints())
        x, w = gauss_legendre(edges, nodes)
        amp = w * (2 / np.pi) * profile.spectral(x) / x
        return x, amp

    x, amp = shape(panels)
    values = _sine_transform(amp, x, tau, threads)
    # error estimate: half the panels on the most oscillatory samples
    tail = tau[-min(8, tau.size):]
    xc, ampc = shape(max(1, panels // 2))
    coarse = _sine_transform(ampc, xc, tail)
    fine = values[-tail.size:]
    qerr = float(np.max(np.abs(coarse - fine)) * np.max(profile.g)) if tail.size else 0.0
    return SusceptibilityKernel(
        tau=tau,
        shape_values=values,
        modulation=profile.g.copy(),
        omega_max=omega_max,
        tail_bound=_tail_bound(profile, omega_max),
        quadrature_error=qerr,
    )


# --------------------------------------------------------------------------
# frequency domain


@dataclass(frozen=True, eq=False)
class Permittivity:
    """Complex ``eps(x, w)``; ``values`` has shape ``(n_points, n_omega)``."""

    omega: np.ndarray
    values: np.ndarray

    def at(self, point=0):
        return self.values[point]

    def to_csv(self, path):
        rows = ((i, w, v.real, v.imag) for i in range(self.values.shape[0])
                for w, v in zip(self.omega, self.values[i]))
        return write_csv(path, ["x_index", "omega", "re", "im"], rows)


def _laplace(chi, tau, dtau, omega, eta, chunk=64):
    out = np.empty(omega.size, dtype=complex)
    for s, e in chunk_ranges(omega.size, chunk):
        integrand = chi[None, :] * np.exp((1j * omega[s:e, None] - eta) * tau[None, :])
        out[s:e] = simpson(integrand, dx=dtau, axis=1)
    return out


def permittivity_from_kernel(kernel, omega, *, etas=(1e-3, 5e-4), decay_tol=1e-6):
    """``1 + int chi(tau) exp((i w - eta) tau) dtau`` extrapolated to ``eta -> 0``.

    The integral uses Simpson's rule on the kernel grid; two damping rates are
    combined by linear Richardson extrapolation.  Negative frequencies are
    filled by conjugation, so Hermitian symmetry holds exactly.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if omega.size == 0 or kernel.tau.size < 3:
        raise ValueError("empty frequency or time grid")
    if kernel.tau[0] != 0.0:
        raise ValueError("kernel grid must start at tau = 0")
    dtau = kernel.dtau
    top = max(float(np.max(np.abs(omega))), kernel.omega_max)
    if top * dtau >= np.pi:
        raise ValueError(f"tau step {dtau} under-samples frequency {top} (need dtau * omega < pi)")
    chi = kernel.shape_values
    peak = float(np.max(np.abs(chi)))
    if peak > 0 and abs(chi[-1]) > decay_tol * peak:
        warnings.warn(f"kernel has not decayed: |chi(tau_max)|/max|chi| = {abs(chi[-1]) / peak:.3g}",
                      KernelNotDecayedWarning, stacklevel=2)
    eta1, eta2 = (float(e) for e in etas)
    if not (eta1 > 0 and eta2 > 0 and eta1 != eta2):
        raise ValueError("need two distinct positive damping rates")
    uniq, inverse = np.unique(np.abs(omega), return_inverse=True)
    f1 = _laplace(chi, kernel.tau, dtau, uniq, eta1)
    f2 = _laplace(chi, kernel.tau, dtau, uniq, eta2)
    f0 = ((eta1 * f2 - eta2 * f1) / (eta1 - eta2))[inverse]
    f0 = np.where(omega < 0, np.conj(f0), f0)
    values = 1.0 + np.outer(kernel.modulation, f0)
    return Permittivity(omega=omega, values=values)


def _pv_core(profile, w, omega_max, panels, nodes, window, n_geo=48):
    """Return (real part of eps - 1 for unit modulation, convergence estimate)."""
    s = profile.spectral
    if w == 0.0:
        if profile.low_frequency_order() < 2:
            raise ValueError("eps(0) is undefined: the real part diverges unless sigma ~ w^2 near 0")
        x, wt = gauss_legendre(panel_edges(0.0, omega_max, panels, profile.breakpoints()), nodes)
        return float((2 / np.pi) * np.sum(wt * s(x) / x**2)), 0.0
    for j in profile.jumps():
        if abs(w - j) <= 1e-12 * max(1.0, j):
            raise ValueError(f"principal value diverges: sigma jumps at w = {j}")
    top = min(profile.support(), omega_max)
    if w >= top:
        if profile.form == "lorentzian":
            raise ValueError(f"w = {w} lies beyond the quadrature cutoff {omega_max}")
        x, wt = gauss_legendre(panel_edges(0.0, top, panels, profile.breakpoints()), nodes)
        return float((2 / np.pi) * np.sum(wt * s(x) / (x**2 - w**2))), 0.0

    def g(u):
        return (2 / np.pi) * s(u) / (u + w)

    half = 0.5 * min(w, top - w)
    bps = profile.breakpoints()
    outer = 0.0
    for lo, hi in ((0.0, w - half), (w + half, top)):
        if hi > lo:
            x, wt = gauss_legendre(panel_edges(lo, hi, panels, bps), nodes)
            outer += np.sum(wt * g(x) / (x - w))
    mirrored = [abs(b - w) for b in bps]

    def inner(delta):
        edges = np.unique(np.concatenate([np.geomspace(delta, half, n_geo + 1),
                                          [m for m in mirrored if delta < m < half]]))
        x, wt = gauss_legendre(edges, nodes)
        return np.sum(wt * (g(w + x) - g(w - x)) / x)

    d0 = window * half
    i0, i1, i2 = (outer + inner(d0 / 2**k) for k in range(3))
    # the omitted window contributes an odd series in delta
    a0, a1 = 2 * i1 - i0, 2 * i2 - i1
    best = (8 * a1 - a0) / 7
    return float(best), float(abs(best - a1))


def permittivity_pv(profile, omega, point=0, *, omega_max=None, panels=64, nodes=16,
                    window=1e-3, full_output=False):
    """Permittivity at one point from the principal-value integral.

    The imaginary part ``sigma(w)/w`` is inserted analytically.  The PV
    integral pairs nodes symmetrically about ``u = w``, excludes a window of
    half-width ``delta`` and extrapolates ``delta -> 0``.  With
    ``full_output`` the convergence estimate is returned as well.
    """
    if omega_max is None:
        omega_max = profile.default_omega_max()
    w = float(omega)
    gpt = float(profile.g[point])
    if profile.is_zero or gpt == 0.0:
        val, est = complex(1.0, 0.0), 0.0
    else:
        re, est = _pv_core(profile, abs(w), float(omega_max), panels, nodes, window)
        im = 0.0 if w == 0.0 else float(profile.spectral(w)) / abs(w)
        val = complex(1.0 + gpt * re, gpt * im)
        if w < 0:
            val = val.conjugate()
        est *= gpt
    return (val, est) if full_output else val


def permittivity_pv_grid(profile, omega, point=0, **kw):
    """Vectorised convenience wrapper returning a :class:`Permittivity`."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    vals = np.array([permittivity_pv(profile, w, point, **kw) for w in omega])
    return Permittivity(omega=omega, values=vals[None, :])


# --------------------------------------------------------------------------
# Kramers-Kronig


@dataclass(frozen=True)
class KKReport:
    residual: float
    hermitian_residual: float
    worst_omega: float
    edge_fraction: float
    truncation_dominated: bool


def discrete_hilbert(f, h, chunk=256):
    """``(1/pi) PV int f(u)/(u - w) du`` on a uniform grid (Maclaurin's rule).

    Only nodes an odd number of steps away contribute, with weight ``2h``,
    which keeps the singular point out of the sum.
    """
    n = f.size
    idx = np.arange(n)
    out = np.empty(n)
    with single_threaded_blas():
        for s, e in chunk_ranges(n, chunk):
            diff = idx[None, :] - idx[s:e, None]
            odd = (diff % 2) == 1
            kern = np.zeros(diff.shape)
            kern[odd] = 1.0 / (h * diff[odd])
            out[s:e] = (kern * f[None, :]).sum(axis=1)
    return 2 * h * out / np.pi


def kk_report(perm, point=0, *, edge_tol=1e-3):
    """Kramers-Kronig closure of a permittivity on a symmetric uniform band.

    ``residual`` is ``max |eps' - 1 - H[eps'']|`` and ``hermitian_residual``
    is ``max |eps(-w) - conj eps(w)|``, both relative to ``max |eps - 1|``
    (or absolute for vacuum).  ``truncation_dominated`` is set when the
    absorption has not died out at the band edges.
    """
    w, h = _check_uniform(perm.omega, "omega grid")
    if w.size < 4:
        raise ValueError("need at least four frequencies")
    if np.max(np.abs(w + w[::-1])) > 1e-9 * np.max(np.abs(w)):
        raise ValueError("omega grid must be symmetric about zero")
    eps = np.asarray(perm.values)[point]
    scale = float(np.max(np.abs(eps - 1)))
    scale = scale if scale > 0 else 1.0
    resid = eps.real - 1.0 - discrete_hilbert(eps.imag, h)
    herm = float(np.max(np.abs(eps[::-1] - np.conj(eps))))
    peak = float(np.max(np.abs(eps.imag)))
    edge = max(abs(eps.imag[0]), abs(eps.imag[-1])) / peak if peak > 0 else 0.0
    k = int(np.argmax(np.abs(resid)))
    return KKReport(
        residual=float(np.abs(resid[k])) / scale,
        hermitian_residual=herm / scale,
        worst_omega=float(w[k]),
        edge_fraction=float(edge),
        truncation_dominated=bool(edge > edge_tol),
    )


def symmetric_grid(half_width, step):
    """Grid ``(k + 1/2) step`` covering ``[-half_width, half_width]``; excludes 0."""
    n = int(round(half_width / step))
    k = np.arange(-n, n)
    return (k + 0.5) * step

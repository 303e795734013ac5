"""Energies, local conservation, driven response and the minimal-coupling map."""

import math
from dataclasses import dataclass

import numpy as np

from . import dynamics as dyn
from . import modes


# --------------------------------------------------------------------------
# energies


@dataclass(frozen=True)
class EnergyReport:
    H_F: float
    H_M: float
    H_total: float
    t: float
    H_alternative: float
    H_modal: float


def field_energy(field, basis):
    """``sum hbar w_a |c_{a,j}|^2``."""
    c = np.asarray(getattr(field, "c", field))
    return float(basis.units.hbar * np.sum(basis.omega[:, None] * np.abs(c) ** 2))


def matter_energy(bath, dV=1.0):
    """``sum_i w_i int |Z_i|^2 / 2 d^3x``."""
    per_line = np.sum(np.abs(bath.Z) ** 2, axis=(1, 2, 3, 4))
    return float(0.5 * dV * np.sum(bath.weights * per_line))


class EnergyMismatch(AssertionError):
    """Two algebraically equal energy forms disagree: a projection bug."""


def total_energy(state, *, rtol=1e-10):
    """Grid energy ``int (B^2 + E^2)/2 + H_M`` cross-checked against two other forms.

    The alternatives are ``int (B^2 + D^2)/2 - D.P + P^2/2 + H_M`` on the grid
    and the same with the field part replaced by :func:`field_energy`.
    """
    basis = state.basis
    dV = basis.dV
    _, D, B, P, E = dyn.fields(state)
    H_M = matter_energy(state.bath, dV)
    b2, d2, e2 = (float(np.sum(v * v)) * dV for v in (B, D, E))
    dp = float(np.sum(D * P)) * dV
    p2 = float(np.sum(P * P)) * dV
    H = 0.5 * (b2 + e2) + H_M
    H_alt = 0.5 * (b2 + d2) - dp + 0.5 * p2 + H_M
    H_F = field_energy(state.field, basis)
    H_modal = H_F - dp + 0.5 * p2 + H_M
    scale = 0.5 * (b2 + d2) + abs(dp) + 0.5 * p2 + H_M
    worst = max(abs(H - H_alt), abs(H - H_modal))
    if worst > rtol * max(scale, np.finfo(float).tiny):
        raise EnergyMismatch(f"energy forms disagree by {worst:.3e} (scale {scale:.3e})")
    return EnergyReport(H_F=H_F, H_M=H_M, H_total=H, t=state.time, H_alternative=H_alt,
                        H_modal=H_modal)


def energy_density(state):
    """``u = (B^2 + E^2)/2 + sum_i w_i |Z_i|^2 / 2`` on the grid."""
    _, _, B, _, E = dyn.fields(state)
    bath = state.bath
    matter = 0.5 * np.einsum("i,ixyzc->xyz", bath.weights, np.abs(bath.Z) ** 2)
    return 0.5 * np.sum(B * B + E * E, axis=-1) + matter


def poynting_residual(snapshots, dt=None):
    """``max |du/dt + div(c E x B)|`` at the middle snapshots.

    ``snapshots`` are at least three states equally spaced in time; ``du/dt``
    uses centred differences and the divergence is spectral.
    """
    snaps = list(snapshots)
    if len(snaps) < 3:
        raise ValueError("need at least three consecutive snapshots")
    times = np.array([s.time for s in snaps])
    steps = np.diff(times)
    if dt is None:
        dt = float(steps[0])
    if np.max(np.abs(steps - dt)) > 1e-9 * abs(dt):
        raise ValueError("snapshots must be equally spaced")
    basis = snaps[0].basis
    # u and E x B carry wavevectors up to 2 k_max; they must not alias
    nmax = np.max(np.abs(basis.n), axis=0)
    for d, (m, N) in enumerate(zip(nmax, basis.grid_shape)):
        if m > 0 and not 4 * m < N:
            raise ValueError(f"grid axis {d} aliases quadratic products: need N > {4 * m}, got {N}")
    dens = [energy_density(s) for s in snaps]
    worst = 0.0
    for i in range(1, len(snaps) - 1):
        dudt = (dens[i + 1] - dens[i - 1]) / (2 * dt)
        _, _, B, _, E = dyn.fields(snaps[i])
        flux = basis.units.c * np.cross(E, B)
        worst = max(worst, float(np.max(np.abs(dudt + modes.divergence(flux, basis)))))
    return worst


# --------------------------------------------------------------------------
# driven steady state


@dataclass(frozen=True)
class ResponseConfig:
    """Protocol for measuring the susceptibility with a prescribed drive.

    The drive is a uniform polarisation ``amplitude cos(w_d t)`` along x.
    Being uniform it is purely longitudinal, so it never excites the photon
    modes and the medium sees ``E = -(P_bath + P_drive)``.  The bath spans
    ``(0, bath_omega_max)`` with enough Gauss-Legendre lines to reproduce the
    continuum kernel up to ``settle + window``.
    """

    omega_d: float
    amplitude: float = 1e-3
    bath_omega_max: float = 12.0
    n_lines: int = None
    settle: float = 185.0
    window: float = 75.0
    min_periods: int = 20
    samples_per_period: float = 20.0
    drift_tol: float = 1e-3

    def __post_init__(self):
        if not self.omega_d > 0:
            raise ValueError("drive frequency must be positive")
        if not (self.amplitude > 0 and self.settle >= 0 and self.window > 0):
            raise ValueError("amplitude and window must be positive, settle nonnegative")


@dataclass(frozen=True)
class ResponseResult:
    omega_d: float
    chi: complex
    chi_first_half: complex
    chi_second_half: complex
    drift: float
    flagged: bool
    n_lines: int
    dt: float


def response_bath_lines(cfg):
    """Line count so that Gauss panels resolve ``sin(w t)`` up to the end of the run."""
    if cfg.n_lines is not None:
        return int(cfg.n_lines)
    span = cfg.settle + cfg.window
    panels = max(4, math.ceil(cfg.bath_omega_max * span / 12.0))
    return 16 * panels


def _hann_quotient(t, num, den, omega, start, periods):
    period = 2 * np.pi / omega
    stop = start + periods * period
    sel = (t >= start - 1e-12) & (t <= stop + 1e-12)
    ts = t[sel]
    win = np.sin(np.pi * (ts - start) / (stop - start)) ** 2
    phase = np.exp(1j * omega * ts)
    return np.sum(win * phase * num[sel]) / np.sum(win * phase * den[sel])


def driven_response(profile, cfg):
    """Measure ``chi(w_d) = P~ / E~`` from a time-domain run.

    After discarding ``settle`` time units the quotient of Hann-windowed
    Fourier sums is taken over the largest whole number of drive periods
    fitting in ``window``.  The same quotient on each half of the window
    estimates the residual transient (``drift``).
    """
    if profile.n_points != 1:
        raise ValueError("driven response needs a homogeneous medium")
    basis = modes.build_basis((2 * np.pi, 1.0, 1.0), 1.0, (3, 1, 1))
    n_lines = response_bath_lines(cfg)
    bath = dyn.gauss_bath(0.0, cfg.bath_omega_max, n_lines, basis.grid_shape)
    drive = dyn.Drive(amplitude=(cfg.amplitude, 0.0, 0.0), omega=cfg.omega_d)
    state = dyn.SimState(dyn.FieldState.zeros(basis), bath, profile, basis, drive)
    top = max(cfg.bath_omega_max, cfg.omega_d, float(np.max(basis.omega)))
    dt = 2 * np.pi / (top * cfg.samples_per_period)
    period = 2 * np.pi / cfg.omega_d
    periods = int(math.floor(cfg.window / period + 1e-9))
    if periods < cfg.min_periods:
        raise ValueError(f"window holds {periods} drive periods; need {cfg.min_periods}")
    periods -= periods % 2
    n_steps = int(math.ceil((cfg.settle + periods * period) / dt)) + 1

    def probe(s):
        P = dyn.assemble_polarization(s.bath, s.profile).values[0, 0, 0, 0]
        return P, P + s.drive.polarization(s.basis, s.time)[0, 0, 0, 0]

    traj = dyn.evolve(state, dt, n_steps, observers={"p": probe},
                      guard=dyn.IntegratorGuard(samples_per_period=cfg.samples_per_period))
    t = np.array(traj.times)
    p = np.array(traj.records["p"])
    P_bath, E = p[:, 0], -p[:, 1]
    # the field is never excited, so D = 0 and E = -(P_bath + P_drive)
    chi = _hann_quotient(t, P_bath, E, cfg.omega_d, cfg.settle, periods)
    half = periods // 2
    chi1 = _hann_quotient(t, P_bath, E, cfg.omega_d, cfg.settle, half)
    chi2 = _hann_quotient(t, P_bath, E, cfg.omega_d, cfg.settle + half * period, half)
    scale = abs(chi) if chi != 0 else 1.0
    drift = abs(chi1 - chi2) / scale
    return ResponseResult(omega_d=cfg.omega_d, chi=complex(chi), chi_first_half=complex(chi1),
                          chi_second_half=complex(chi2), drift=float(drift),
                          flagged=bool(drift > cfg.drift_tol), n_lines=n_lines, dt=dt)


# --------------------------------------------------------------------------
# minimal-coupling representation


@dataclass(frozen=True, eq=False)
class MinimalState:
    """Modal amplitudes ``a[a, j]`` of the transverse vector potential picture."""

    a: np.ndarray


def _pz_scale(basis):
    return 1.0 / np.sqrt(2 * basis.units.hbar * basis.omega)[:, None]


def polarization_coefficients(P, basis):
    """``P_{a,j} = int P . e_{a,j} Phi_a* d^3x`` (out-of-band content ignored)."""
    return modes.project(P, basis, alias_tol=math.inf)


def _shuffle(x):
    return np.stack([-x[:, 1], x[:, 0]], axis=1)


def _unshuffle(c):
    return np.stack([c[:, 1], -c[:, 0]], axis=1)


def power_zienau(a, Pc, basis):
    """Coefficient shift ``a -> a + P / sqrt(2 hbar w)``."""
    return np.asarray(a) + np.asarray(Pc) * _pz_scale(basis)


def from_minimal(minimal, Pc, basis):
    """``c_1 = -a_2 - P_2 / sqrt(2 hbar w)``, ``c_2 = a_1 + P_1 / sqrt(2 hbar w)``."""
    a = np.asarray(getattr(minimal, "a", minimal))
    if a.shape != (basis.n_modes, 2) or np.shape(Pc) != a.shape:
        raise ValueError("amplitude and polarisation shapes must match the basis")
    c = np.empty_like(a, dtype=complex)
    s = _pz_scale(basis)[:, 0]
    c[:, 0] = -a[:, 1] - Pc[:, 1] * s
    c[:, 1] = a[:, 0] + Pc[:, 0] * s
    return dyn.FieldState(c)


def to_minimal(field, Pc, basis):
    """Inverse of :func:`from_minimal`."""
    c = np.asarray(getattr(field, "c", field))
    if c.shape != (basis.n_modes, 2) or np.shape(Pc) != c.shape:
        raise ValueError("amplitude and polarisation shapes must match the basis")
    a = np.empty_like(c, dtype=complex)
    s = _pz_scale(basis)[:, 0]
    a[:, 0] = c[:, 1] - Pc[:, 0] * s
    a[:, 1] = -c[:, 0] - Pc[:, 1] * s
    return MinimalState(a)


def minimal_fields(minimal, basis):
    """Real ``(A, E_perp, B)`` grid fields from the minimal-coupling amplitudes."""
    a = np.asarray(getattr(minimal, "a", minimal))
    u = basis.units
    w = basis.omega[:, None]
    A = modes.modal_vectors(-1j * u.c * np.sqrt(u.hbar / (2 * w)) * a, basis)
    Et = modes.modal_vectors(np.sqrt(u.hbar * w / 2) * a, basis)
    amp = np.sqrt(u.hbar * w / 2) * a
    # k_hat x e1 = e2 and k_hat x e2 = -e1
    Bv = amp[:, :1] * basis.pol[:, 1] - amp[:, 1:] * basis.pol[:, 0]
    return tuple(modes.synthesize_real(v, basis) for v in (A, Et, Bv))


def polarization_current(state):
    """``J = dP/dt = sum_i w_i a_i Re Z_i`` (the drive's current included)."""
    bath = state.bath
    a = dyn.coupling(bath, state.profile)
    J = np.sum(bath.weights[:, None, None, None, None] * a * bath.Z.real, axis=0)
    if state.drive is not None:
        d = state.drive
        x = state.basis.points()
        arg = x @ np.asarray(d.wavevector, dtype=float) - d.omega * state.time + d.phase
        J = J + d.omega * np.sin(arg)[..., None] * np.asarray(d.amplitude, dtype=float)
    return J


def minimal_hamiltonian(state):
    """``int (E_perp^2 + B^2)/2 - A.J_perp/c + E_inst^2/2 + H_cM`` with ``H_cM = H_M + int A.J_perp/c``.

    ``E_inst = -(P - P_perp)`` where ``P_perp`` is the in-band transverse
    part; it covers the longitudinal field plus any transverse polarisation
    the truncated basis cannot carry.
    """
    basis = state.basis
    dV = basis.dV
    P = dyn.total_polarization(state)
    Pc = polarization_coefficients(P, basis)
    minimal = to_minimal(state.field, Pc, basis)
    A, Et, B = minimal_fields(minimal, basis)
    J_perp = modes.transverse_part(polarization_current(state), basis)
    E_inst = -(P - modes.transverse_part(P, basis))
    AJ = float(np.sum(A * J_perp)) * dV / basis.units.c
    H_cM = matter_energy(state.bath, dV) + AJ
    return (0.5 * float(np.sum(Et * Et + B * B)) * dV - AJ
            + 0.5 * float(np.sum(E_inst * E_inst)) * dV + H_cM)


def hamiltonian_equivalence(state):
    """``|H_dual - H_minimal|`` for one state."""
    H_dual = total_energy(state).H_total
    return abs(H_dual - minimal_hamiltonian(state))

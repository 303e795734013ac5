"""Time stepping of the coupled field and oscillator bath.

State variables:

* field amplitudes ``c[a, j]`` with ``dc/dt = -i w_a c + S / (c sqrt(2 hbar w_a))``,
  where ``S`` is the modal curl source of the polarisation;
* bath amplitudes ``Z_i(x) = dX/dt + i w_i X`` with ``dZ/dt = i w_i Z + a_i E``,
  ``a_i(x) = sqrt(2 sigma(w_i, x) / pi)`` and ``E = D - P``;
* ``P(x) = sum_i w_i a_i(x) X_i(x)`` with quadrature weights ``w_i``.

Both sub-systems have exact constant-forcing propagators built from
``phi(w, dt) = (exp(i w dt) - 1) / (i w)``.  :func:`evolve` composes them
into a symmetric splitting (see its docstring).
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import modes
from .io import write_csv
from .medium import ConductivityProfile, gauss_legendre

# --------------------------------------------------------------------------
# exponential-integrator kernels


def phi1(z):
    """``(exp(z) - 1) / z`` with the removable point handled."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-8
    safe = np.where(small, 1.0, z)
    return np.where(small, 1.0 + z / 2, np.expm1(safe) / safe)


def phi2(z):
    """``(exp(z) - 1 - z) / z^2``; Taylor series near zero avoids cancellation."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 0.1
    series = np.zeros_like(z)
    term = np.full_like(z, 0.5)
    for n in range(3, 13):
        series = series + term
        term = term * z / n
    safe = np.where(small, 1.0, z)
    return np.where(small, series, (np.expm1(safe) - safe) / safe**2)


def propagator(omega, dt):
    """``phi(w, dt) = int_0^dt exp(i w (dt - s)) ds``."""
    return dt * phi1(1j * np.asarray(omega) * dt)


# --------------------------------------------------------------------------
# state containers


@dataclass(frozen=True, eq=False)
class BathState:
    """Discretised oscillator continuum.

    ``Z`` has shape ``(n_lines, *grid_shape, 3)``.  ``X = Im Z / w`` and
    ``dX/dt = Re Z`` are real by construction.
    """

    omega: np.ndarray
    weights: np.ndarray
    Z: np.ndarray

    def __post_init__(self):
        om = np.asarray(self.omega, dtype=float)
        wt = np.asarray(self.weights, dtype=float)
        if om.ndim != 1 or om.shape != wt.shape:
            raise ValueError("bath frequencies and weights must be matching 1-D arrays")
        if np.any(om <= 0) or np.any(wt <= 0):
            raise ValueError("bath frequencies and weights must be strictly positive")
        Z = np.asarray(self.Z, dtype=complex)
        if Z.shape[0] != om.size or Z.ndim != 5 or Z.shape[-1] != 3:
            raise ValueError(f"bath amplitudes need shape (n_lines, Nx, Ny, Nz, 3), got {Z.shape}")
        object.__setattr__(self, "omega", om)
        object.__setattr__(self, "weights", wt)
        object.__setattr__(self, "Z", Z)

    @property
    def grid_shape(self):
        return self.Z.shape[1:4]

    @property
    def n_lines(self):
        return self.omega.size

    @property
    def X(self):
        return self.Z.imag / self.omega[:, None, None, None, None]

    @property
    def Xdot(self):
        return self.Z.real

    def recurrence_time(self):
        """``2 pi / largest spacing`` of the frequency grid (``inf`` for one line).

        The largest gap is the conservative choice: the discrete kernel starts
        to deviate from the continuum once any gap is resolved.
        """
        if self.n_lines < 2:
            return math.inf
        return 2 * np.pi / float(np.max(np.diff(np.sort(self.omega))))

    @classmethod
    def at_rest(cls, omega, weights, grid_shape):
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        return cls(omega, np.atleast_1d(weights), np.zeros((omega.size, *grid_shape, 3), complex))

    @classmethod
    def free(cls, omega, weights, amplitude, phase=0.0, t=0.0):
        """Free oscillation ``X = A cos(w t + phase)``; ``amplitude`` is ``(n_lines, *grid, 3)``."""
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        w = omega[:, None, None, None, None]
        A = np.asarray(amplitude, dtype=float)
        Z = 1j * w * A * np.exp(1j * (w * t + np.asarray(phase)))
        return cls(omega, np.atleast_1d(weights), Z)


def gauss_bath(omega_min, omega_max, n_lines, grid_shape, nodes=16):
    """Bath at rest on a composite Gauss-Legendre frequency grid."""
    if not 0 <= omega_min < omega_max:
        raise ValueError("need 0 <= omega_min < omega_max")
    panels = max(1, math.ceil(n_lines / nodes))
    x, w = gauss_legendre(np.linspace(omega_min, omega_max, panels + 1), nodes)
    return BathState.at_rest(x, w, grid_shape)


@dataclass(frozen=True, eq=False)
class FieldState:
    c: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.c, dtype=complex)
        if c.ndim != 2 or c.shape[1] != 2:
            raise ValueError(f"field amplitudes need shape (n_modes, 2), got {c.shape}")
        object.__setattr__(self, "c", c)

    @classmethod
    def zeros(cls, basis):
        return cls(np.zeros((basis.n_modes, 2), complex))


@dataclass(frozen=True)
class Drive:
    """Prescribed polarisation ``amplitude * cos(k . x - w t + phase)``.

    A non-dynamical probe added to the bath polarisation; ``wavevector = 0``
    gives a uniform, purely longitudinal drive.
    """

    amplitude: tuple = (1.0, 0.0, 0.0)
    omega: float = 1.0
    wavevector: tuple = (0.0, 0.0, 0.0)
    phase: float = 0.0

    def polarization(self, basis, t):
        x = basis.points()
        arg = x @ np.asarray(self.wavevector, dtype=float) - self.omega * t + self.phase
        return np.cos(arg)[..., None] * np.asarray(self.amplitude, dtype=float)


@dataclass(frozen=True, eq=False)
class SimState:
    field: FieldState
    bath: BathState
    profile: ConductivityProfile
    basis: modes.ModeBasis
    drive: Drive = None

    def __post_init__(self):
        if self.field.c.shape != (self.basis.n_modes, 2):
            raise ValueError("field amplitudes do not match the basis")
        if self.bath.grid_shape != self.basis.grid_shape:
            raise ValueError("bath grid does not match the basis grid")
        n = self.profile.n_points
        if n != 1 and n != self.basis.n_grid:
            raise ValueError(f"profile modulation has {n} points, grid has {self.basis.n_grid}")

    @property
    def time(self):
        return self.field.time


# --------------------------------------------------------------------------
# elementary operations


def coupling(bath, profile):
    """``a_i(x) = sqrt(2 sigma(w_i, x) / pi)`` shaped to broadcast against ``Z``."""
    sig = profile.on_grid(bath.omega)
    a = np.sqrt(2 * sig / np.pi)
    if profile.n_points == 1:
        return a.reshape(bath.n_lines, 1, 1, 1, 1)
    return a.reshape(bath.n_lines, *bath.grid_shape, 1)


def assemble_polarization(bath, profile):
    """``P(x) = sum_i w_i a_i(x) Im Z_i(x) / w_i``."""
    a = coupling(bath, profile)
    wts = (bath.weights / bath.omega)[:, None, None, None, None]
    return modes.GridField(np.sum(wts * a * bath.Z.imag, axis=0), "P")


def electric_field(D, P):
    """``E = D - P``."""
    d, p = modes._arr(D), modes._arr(P)
    if d.shape != p.shape:
        raise ValueError(f"shape mismatch: D {d.shape} vs P {p.shape}")
    return modes.GridField(d - p, "E")


def step_bath(bath, E, dt, profile):
    """Advance the bath by ``dt`` under a field held at its midpoint value ``E``."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    w = bath.omega[:, None, None, None, None]
    e = modes._arr(E)[None]
    Z = np.exp(1j * w * dt) * bath.Z + coupling(bath, profile) * propagator(w, dt) * e
    return replace(bath, Z=Z)


def field_rhs_scale(basis):
    """``1 / (c sqrt(2 hbar w))`` converting the source ``S`` into ``dc/dt``."""
    u = basis.units
    return 1.0 / (u.c * np.sqrt(2 * u.hbar * basis.omega))[:, None]


def step_field(field, S, dt, basis):
    """Advance modal amplitudes by ``dt`` under a source held at its midpoint value."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    S = np.asarray(S)
    if S.shape != field.c.shape:
        raise ValueError(f"source shape {S.shape} does not match state {field.c.shape}")
    w = basis.omega[:, None]
    c = np.exp(-1j * w * dt) * field.c + propagator(-w, dt) * S * field_rhs_scale(basis)
    return FieldState(c, field.time + dt)


def total_polarization(state, t=None):
    """Bath polarisation plus the prescribed drive at time ``t``."""
    P = assemble_polarization(state.bath, state.profile).values
    if state.drive is not None:
        P = P + state.drive.polarization(state.basis, state.time if t is None else t)
    return P


def fields(state, t=None):
    """``(F, D, B, P, E)`` grid arrays for a state."""
    F, D, B = modes.reconstruct_fields(state.field.c, state.basis)
    P = total_polarization(state, t)
    return F.values, D.values, B.values, P, D.values - P


# --------------------------------------------------------------------------
# coupled evolution


@dataclass(frozen=True)
class IntegratorGuard:
    samples_per_period: float = 20.0
    check_recurrence: bool = True


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    records: dict = field(default_factory=dict)
    final: SimState = None

    def series(self, name):
        return np.asarray(self.records[name])

    def to_csv(self, name, path):
        values = self.records[name]
        rows = []
        for t, v in zip(self.times, values):
            flat = np.ravel(np.asarray(v))
            if np.iscomplexobj(flat):
                flat = np.column_stack([flat.real, flat.imag]).ravel()
            rows.append([t, *flat])
        width = len(rows[0]) - 1 if rows else 1
        header = ["time"] + ([name] if width == 1 else [f"{name}_{i}" for i in range(width)])
        return write_csv(path, header, rows)


def check_guard(state, dt, n_steps, guard):
    top = max(float(np.max(state.basis.omega)), float(np.max(state.bath.omega)))
    if state.drive is not None:
        top = max(top, abs(state.drive.omega))
    if abs(dt) * top * guard.samples_per_period > 2 * np.pi * (1 + 1e-12):
        raise ValueError(f"|dt| = {abs(dt)} gives fewer than {guard.samples_per_period} "
                         f"samples per period of the fastest frequency {top}")
    span = abs(dt) * n_steps
    if guard.check_recurrence and not state.profile.is_zero and span > state.bath.recurrence_time():
        raise ValueError(f"run length {span} exceeds the bath recurrence time "
                         f"{state.bath.recurrence_time():.4g}; refine the frequency grid")


def _freeze(state):
    for arr in (state.field.c, state.bath.Z):
        arr.setflags(write=False)
    return state


def evolve(state, dt, n_steps, *, observers=None, every=1, guard=IntegratorGuard()):
    """Integrate ``n_steps`` steps of size ``dt``; negative ``dt`` runs backwards.

    One step is ``R(dt/2) A(dt) R(dt/2)`` where ``R`` rotates the bath freely
    and ``A`` is the exact flow of the remaining terms with the bath
    positions (hence ``P``) frozen: the field obeys a linear equation with
    constant source, solved in closed form, and the bath velocities receive
    the impulse ``a int (D - P) dt`` accumulated along that exact field path.
    Every sub-flow is exact, so the composition is symmetric, symplectic and
    time-reversible, second order, and exact when the coupling vanishes.

    ``observers`` maps names to callables receiving a read-only snapshot;
    they run on the initial state and after every ``every`` steps.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    if dt == 0:
        raise ValueError("dt must be nonzero")
    check_guard(state, dt, n_steps, guard)
    observers = dict(observers or {})
    basis, profile = state.basis, state.profile
    bath = state.bath
    c = np.array(state.field.c, dtype=complex)
    Z = np.array(bath.Z, dtype=complex)
    t = float(state.time)

    wb = bath.omega[:, None, None, None, None]
    half_rot = np.exp(0.5j * wb * dt)
    a = coupling(bath, profile)
    pw = (bath.weights / bath.omega)[:, None, None, None, None] * a
    wf = basis.omega[:, None]
    rot_f = np.exp(-1j * wf * dt)
    z = -1j * wf * dt
    int_c0 = dt * phi1(z)           # int_0^dt exp(-i w s) ds
    int_src = dt * dt * phi2(z)     # int_0^dt phi(-w, s) ds
    scale = field_rhs_scale(basis)
    coupled = not profile.is_zero or state.drive is not None

    traj = Trajectory()

    def snapshot():
        snap = SimState(FieldState(c.copy(), t), replace(bath, Z=Z.copy()), profile, basis,
                        state.drive)
        return _freeze(snap)

    def observe():
        if not observers:
            return
        snap = snapshot()
        traj.times.append(t)
        for name, fn in observers.items():
            traj.records.setdefault(name, []).append(fn(snap))

    observe()
    for step in range(n_steps):
        Z *= half_rot
        if coupled:
            P = np.sum(pw * Z.imag, axis=0)
            if state.drive is not None:
                P = P + state.drive.polarization(basis, t + 0.5 * dt)
            src = modes.source_term(P, basis) * scale
            c_int = int_c0 * c + int_src * src
            c = rot_f * c + int_c0 * src
            _, d_vec, _ = modes.field_coefficients(c_int, basis)
            D_int = modes.synthesize_real(d_vec, basis)
            Z += a * (D_int - P * dt)[None]
        else:
            c = rot_f * c
        Z *= half_rot
        t += dt
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(Z))):
            raise FloatingPointError(f"non-finite state at step {step}")
        if (step + 1) % every == 0:
            observe()

    traj.final = SimState(FieldState(c, t), replace(bath, Z=Z), profile, basis, state.drive)
    return traj

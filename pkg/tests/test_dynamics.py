import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import simpson

from dualfield import diagnostics as dg
from dualfield import dynamics as dyn
from dualfield import medium, modes, oracles
from dualfield.medium import ConductivityProfile
from dualfield.scenarios import polariton_error

TWO_PI = 2 * np.pi
CUBE = modes.build_basis((TWO_PI,) * 3, 1.0, (4, 4, 4))
FLAT = ConductivityProfile.flat(0.3, 10.0)


def random_c(basis, seed):
    rng = np.random.default_rng(seed)
    return (rng.standard_normal((basis.n_modes, 2))
            + 1j * rng.standard_normal((basis.n_modes, 2))) / math.sqrt(2)


def random_bath(lines, weights, grid_shape, seed):
    rng = np.random.default_rng(seed)
    shape = (len(lines), *grid_shape, 3)
    return dyn.BathState(lines, weights, rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def one_point_bath(omega, Z0=0.0):
    return dyn.BathState([omega], [1.0], np.full((1, 1, 1, 1, 3), Z0, complex))


@settings(max_examples=50, deadline=None)
@given(x=st.floats(-3.0, 3.0), y=st.floats(-3.0, 3.0))
def test_phi_functions_match_definitions(x, y):
    z = complex(x, y)
    if abs(z) > 1e-3:
        assert dyn.phi1(z) == pytest.approx((np.exp(z) - 1) / z, rel=1e-12, abs=1e-14)
        assert dyn.phi2(z) == pytest.approx((np.exp(z) - 1 - z) / z**2, rel=1e-9, abs=1e-12)
    assert dyn.phi1(0.0) == 1.0 and dyn.phi2(0.0) == 0.5


def test_phi2_is_continuous_across_series_switch():
    for z in (0.0999999, 0.1000001, 0.0999999j, 0.1000001j):
        assert abs(dyn.phi2(z) - (np.exp(z) - 1 - z) / z**2) < 1e-12


def test_free_bath_rotates():
    bath = one_point_bath(1.7, 0.3 + 0.4j)
    out = dyn.step_bath(bath, np.zeros((1, 1, 1, 3)), 0.25, FLAT)
    assert np.allclose(np.abs(out.Z), 0.5, rtol=0, atol=1e-16)
    assert np.allclose(out.Z, bath.Z * np.exp(1j * 1.7 * 0.25), rtol=0, atol=1e-16)


def test_constant_field_drives_bath_in_closed_form():
    w, dt, E = 1.3, 0.4, 0.7
    out = dyn.step_bath(one_point_bath(w), np.full((1, 1, 1, 3), E), dt, FLAT)
    a = math.sqrt(2 * FLAT.sigma(w) / np.pi)
    expect = a * E * (np.exp(1j * w * dt) - 1) / (1j * w)
    assert np.allclose(out.Z, expect, rtol=1e-15, atol=0)


def test_resonant_drive_grows_linearly():
    w, E0, dt = 1.0, 0.2, 2 * np.pi / 400
    bath = one_point_bath(w)
    a = math.sqrt(2 * FLAT.sigma(w) / np.pi)
    n = 400 * 40
    for k in range(n):
        E = E0 * math.cos(w * (k + 0.5) * dt)
        bath = dyn.step_bath(bath, np.full((1, 1, 1, 3), E), dt, FLAT)
    assert abs(bath.Z[0, 0, 0, 0, 0]) / (n * dt) == pytest.approx(a * E0 / 2, rel=2e-3)


def test_polarization_from_bath():
    assert np.all(dyn.assemble_polarization(
        dyn.BathState.at_rest([1.0, 2.0], [0.5, 0.5], (2, 2, 2)), FLAT).values == 0)
    X0, w, wt = 0.8, 1.9, 0.35
    bath = dyn.BathState([w], [wt], np.full((1, 1, 1, 1, 3), 1j * w * X0))
    P = dyn.assemble_polarization(bath, FLAT).values
    assert np.allclose(P, wt * math.sqrt(2 * 0.3 / np.pi) * X0, rtol=1e-15)


def test_bath_response_to_constant_field_matches_kernel():
    prof = ConductivityProfile.flat(1.0, 10.0)
    bath = dyn.gauss_bath(0.0, 10.0, 320, (1, 1, 1))
    E = np.full((1, 1, 1, 3), 0.5)
    dt, n = 0.01, 500
    for _ in range(n):
        bath = dyn.step_bath(bath, E, dt, prof)
    P = dyn.assemble_polarization(bath, prof).values[0, 0, 0, 0]
    tau = np.linspace(0, n * dt, 2001)
    chi = medium.chi_kernel(prof, tau).at()
    assert P == pytest.approx(0.5 * simpson(chi, x=tau), rel=1e-7)


def test_free_field_rotates_and_constant_source_closed_form():
    f = dyn.FieldState(random_c(CUBE, 0))
    out = dyn.step_field(f, np.zeros((6, 2)), 0.3, CUBE)
    assert np.allclose(np.abs(out.c), np.abs(f.c), rtol=1e-15)
    assert np.allclose(out.c, f.c * np.exp(-1j * 0.3), atol=1e-15)
    S = np.zeros((6, 2), complex)
    S[2, 1] = 0.4 - 0.1j
    out = dyn.step_field(dyn.FieldState.zeros(CUBE), S, 0.3, CUBE)
    w = CUBE.omega[2]
    expect = S[2, 1] * dyn.field_rhs_scale(CUBE)[2, 0] * (1 - np.exp(-1j * w * 0.3)) / (1j * w)
    assert out.c[2, 1] == pytest.approx(expect, rel=1e-14)
    assert out.time == pytest.approx(0.3)


def test_off_resonant_source_beats():
    nu, s, dt = 1.6, 0.3, 1e-3
    w = CUBE.omega[0]
    scale = dyn.field_rhs_scale(CUBE)[0, 0]
    f = dyn.FieldState.zeros(CUBE)
    n = 6000
    for k in range(n):
        S = np.zeros((6, 2), complex)
        S[0, 0] = s * np.exp(-1j * nu * (k + 0.5) * dt) / scale
        f = dyn.step_field(f, S, dt, CUBE)
    t = n * dt
    exact = s * (np.exp(-1j * nu * t) - np.exp(-1j * w * t)) / (1j * (w - nu))
    assert f.c[0, 0] == pytest.approx(exact, abs=1e-6)
    assert abs(f.c[0, 0]) <= 2 * s / abs(w - nu) + 1e-12


def test_step_functions_reject_nonpositive_dt():
    with pytest.raises(ValueError):
        dyn.step_field(dyn.FieldState.zeros(CUBE), np.zeros((6, 2)), 0.0, CUBE)
    with pytest.raises(ValueError):
        dyn.step_bath(one_point_bath(1.0), np.zeros((1, 1, 1, 3)), -0.1, FLAT)


def test_electric_field_identities():
    rng = np.random.default_rng(1)
    D, P = rng.standard_normal((2, 2, 2, 2, 3))
    assert np.all(dyn.electric_field(D, np.zeros_like(P)).values == D)
    assert np.all(dyn.electric_field(np.zeros_like(D), P).values == -P)
    assert np.allclose(D - dyn.electric_field(D, P).values, P, rtol=0, atol=1e-15)
    with pytest.raises(ValueError):
        dyn.electric_field(D, P[:1])


def vacuum_state(c):
    return dyn.SimState(dyn.FieldState(c), dyn.BathState.at_rest([1.3], [1.0], CUBE.grid_shape),
                        ConductivityProfile.vacuum(), CUBE)


def test_vacuum_evolution_preserves_every_mode():
    c = random_c(CUBE, 2)
    traj = dyn.evolve(vacuum_state(c), 0.05, 2000, observers={"c": lambda s: s.field.c.copy()},
                      every=100)
    mod = np.abs(np.array(traj.records["c"]))
    # each step multiplies by a unit phase, so only round-off accumulates
    assert np.max(np.abs(mod / np.abs(c) - 1)) < 2000 * np.finfo(float).eps
    assert len(traj.times) == 21


def test_vacuum_single_photon_energy_is_hbar_omega():
    c = np.zeros((6, 2), complex)
    c[4, 1] = 1.0
    traj = dyn.evolve(vacuum_state(c), 0.1, 300, observers={"H": lambda s: dg.total_energy(s).H_total},
                      every=50)
    assert np.allclose(traj.series("H"), CUBE.omega[4], rtol=1e-13)


def coupled_state(seed, sigma0=0.05):
    prof = ConductivityProfile.flat(sigma0, 10.0)
    bath = random_bath([1.1, 1.6], [0.5, 0.5], CUBE.grid_shape, seed)
    return dyn.SimState(dyn.FieldState(random_c(CUBE, seed)), bath, prof, CUBE)


def test_time_reversal_returns_initial_state():
    state = coupled_state(3)
    dt = 2 * np.pi / 1.6 / 50
    fwd = dyn.evolve(state, dt, 100).final
    back = dyn.evolve(fwd, -dt, 100).final
    scale = max(np.max(np.abs(state.field.c)), np.max(np.abs(state.bath.Z)))
    assert np.max(np.abs(back.field.c - state.field.c)) < 1e-10 * scale
    assert np.max(np.abs(back.bath.Z - state.bath.Z)) < 1e-10 * scale
    assert back.time == pytest.approx(0.0, abs=1e-12)


def single_line_state(sigma0=1e-3):
    c = np.zeros((6, 2), complex)
    c[0, 0] = 1.0
    c[3, 1] = 0.5j
    bath = dyn.BathState.at_rest([1.3], [1.0], CUBE.grid_shape)
    return dyn.SimState(dyn.FieldState(c), bath, ConductivityProfile.flat(sigma0, 10.0), CUBE)


def test_polariton_trajectory_converges_at_second_order():
    state = single_line_state(sigma0=0.05)
    _, e50 = polariton_error(state, 50, 10, 20)
    _, e100 = polariton_error(state, 100, 10, 20)
    assert e100 < 1e-3
    assert e50 / e100 == pytest.approx(4.0, rel=0.2)


def test_polariton_oracle_is_not_the_free_solution():
    state = single_line_state(sigma0=1e-3)
    t = 100 * 2 * np.pi / 1.3
    c_ex, _ = oracles.polariton_solution(state, t)
    free = state.field.c * np.exp(-1j * CUBE.omega[:, None] * t)
    assert np.max(np.abs(c_ex - free)) > 0.1


def test_polariton_frequencies_split_around_the_crossing():
    lo, hi = oracles.polariton_frequencies(1.3, 1.3, 1.0, 0.2)
    assert lo < 1.3 < hi
    assert lo**2 + hi**2 == pytest.approx(2 * 1.3**2 + 0.04, rel=1e-14)


def test_evolve_guards():
    state = coupled_state(4)
    with pytest.raises(ValueError, match="samples per period"):
        dyn.evolve(state, 1.0, 1)
    with pytest.raises(ValueError, match="recurrence"):
        dyn.evolve(state, 0.05, 1000)
    with pytest.raises(ValueError):
        dyn.evolve(state, 0.0, 1)
    with pytest.raises(ValueError):
        dyn.evolve(state, 0.05, -1)
    long = dyn.evolve(state, 0.05, 1000, guard=dyn.IntegratorGuard(check_recurrence=False))
    assert long.final.time == pytest.approx(50.0)


def test_observer_snapshots_are_read_only():
    seen = []

    def grab(s):
        seen.append(s)
        with pytest.raises(ValueError):
            s.field.c[0, 0] = 1.0
        return 0.0

    dyn.evolve(coupled_state(5), 0.05, 3, observers={"x": grab})
    assert len(seen) == 4


def test_uniform_drive_is_longitudinal():
    basis = modes.build_basis((TWO_PI, 1.0, 1.0), 1.0, (3, 1, 1))
    bath = dyn.BathState.at_rest([1.0], [1.0], basis.grid_shape)
    drive = dyn.Drive(amplitude=(1.0, 0.0, 0.0), omega=1.5)
    state = dyn.SimState(dyn.FieldState.zeros(basis), bath, ConductivityProfile.vacuum(), basis,
                         drive)
    fin = dyn.evolve(state, 0.05, 200).final
    assert np.all(fin.field.c == 0)
    P = dyn.total_polarization(fin)
    assert np.allclose(P[..., 0], math.cos(1.5 * fin.time))


def test_bath_state_helpers():
    bath = dyn.BathState.free([1.0, 2.0], [0.5, 0.5], np.ones((2, 1, 1, 1, 3)), t=0.0)
    assert np.allclose(bath.X, 1.0) and np.allclose(bath.Xdot, 0.0, atol=1e-15)
    assert bath.recurrence_time() == pytest.approx(2 * np.pi)
    assert one_point_bath(1.0).recurrence_time() == math.inf
    with pytest.raises(ValueError):
        dyn.BathState([1.0], [0.0], np.zeros((1, 1, 1, 1, 3)))
    g = dyn.gauss_bath(0.0, 4.0, 32, (1, 1, 1))
    assert g.n_lines == 32 and g.weights.sum() == pytest.approx(4.0)


def test_trajectory_csv(tmp_path):
    from dualfield.io import read_csv
    traj = dyn.evolve(coupled_state(6), 0.05, 4, observers={"c0": lambda s: s.field.c[0, 0]},
                      every=2)
    header, rows = read_csv(traj.to_csv("c0", tmp_path / "c0.csv"))
    assert header == ["time", "c0_0", "c0_1"] and len(rows) == 3

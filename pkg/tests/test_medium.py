import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import sici

from dualfield import medium, oracles
from dualfield.medium import ConductivityProfile

# (2/pi) Si(1), frozen from the series oracle and scipy before the build
FLAT_CHI_AT_ONE = 0.602295188897979

LORENTZ = ConductivityProfile.lorentzian(1.0, 2.0, 0.1)


def test_sine_integral_series_matches_scipy():
    for x in (0.0, 0.3, 1.0, 2.5, 7.9):
        assert oracles.sine_integral(x) == pytest.approx(sici(x)[0], abs=1e-14)


def test_flat_band_kernel_at_unit_time():
    kernel = medium.chi_kernel(ConductivityProfile.flat(1.0, 1.0), np.array([0.0, 0.5, 1.0]))
    assert kernel.at()[2] == pytest.approx(FLAT_CHI_AT_ONE, abs=1e-12)
    assert 2 / np.pi * sici(1.0)[0] == pytest.approx(FLAT_CHI_AT_ONE, abs=1e-15)


def test_kernel_vanishes_for_zero_conductivity_and_at_zero_delay():
    tau = np.linspace(0, 20, 101)
    assert np.all(medium.chi_kernel(ConductivityProfile.vacuum(), tau).values == 0)
    assert medium.chi_kernel(LORENTZ, tau).values[0, 0] == 0.0


def test_lorentzian_kernel_matches_damped_oscillator():
    tau = np.arange(0, 300, 0.04)
    k = medium.chi_kernel(LORENTZ, tau)
    ref = oracles.lorentzian_chi(tau, 1.0, 2.0, 0.1)
    assert np.max(np.abs(k.at() - ref)) < 1e-6


def test_flat_band_kernel_matches_sine_integral_series():
    tau = np.linspace(0, 7.5, 31)
    k = medium.chi_kernel(ConductivityProfile.flat(0.7, 1.0), tau)
    assert np.max(np.abs(k.at() - oracles.flat_band_chi(tau, 0.7, 1.0))) < 1e-12


def test_kernel_carries_spatial_modulation():
    g = np.array([0.0, 0.5, 2.0])
    k = medium.chi_kernel(LORENTZ.with_modulation(g), np.linspace(0, 10, 11))
    assert np.allclose(k.values, np.outer(g, k.shape_values), rtol=0, atol=0)


@settings(max_examples=20, deadline=None)
@given(s1=st.floats(0.0, 3.0), s2=st.floats(0.0, 3.0), cutoff=st.floats(0.3, 4.0))
def test_kernel_is_linear_in_conductivity(s1, s2, cutoff):
    tau = np.linspace(0, 6, 25)
    k = lambda s: medium.chi_kernel(ConductivityProfile.flat(s, cutoff), tau).at()
    assert np.allclose(k(s1 + s2), k(s1) + k(s2), rtol=0, atol=1e-13)


def test_kernel_rejects_bad_grids():
    with pytest.raises(ValueError):
        medium.chi_kernel(LORENTZ, np.array([0.0, 0.1, 0.3]))
    with pytest.raises(ValueError):
        medium.chi_kernel(LORENTZ, np.array([-0.1, 0.0, 0.1]))


def test_vacuum_permittivity_is_one():
    omega = np.linspace(0.1, 5, 7)
    k = medium.chi_kernel(ConductivityProfile.vacuum(), np.arange(0, 10, 0.05), omega_max=5.0)
    assert np.all(medium.permittivity_from_kernel(k, omega).values == 1.0)
    assert medium.permittivity_pv(ConductivityProfile.vacuum(), 1.3) == 1.0


def test_imaginary_part_is_sigma_over_omega_exactly():
    for w in (0.1, 1.0, 1.95, 2.0, 3.3, 6.0):
        assert medium.permittivity_pv(LORENTZ, w).imag == LORENTZ.sigma(w) / w


def test_pv_matches_lorentzian_closed_form():
    omega = np.linspace(0.1, 6, 40)
    pv = medium.permittivity_pv_grid(LORENTZ, omega).at()
    ref = oracles.lorentzian_permittivity(omega, 1.0, 2.0, 0.1)
    assert np.max(np.abs(pv - ref) / np.abs(ref)) < 1e-6


def test_pv_real_part_at_unit_frequency_matches_kernel_route():
    k = medium.chi_kernel(LORENTZ, np.arange(0, 300, 0.04))
    via_kernel = medium.permittivity_from_kernel(k, [1.0]).at()[0]
    assert medium.permittivity_pv(LORENTZ, 1.0).real == pytest.approx(via_kernel.real, rel=1e-3)


def test_flat_band_pv_matches_logarithmic_closed_form():
    prof = ConductivityProfile.flat(1.0, 1.0)
    omega = np.array([0.05, 0.3, 0.7, 0.97, 1.4, 3.0])
    pv = medium.permittivity_pv_grid(prof, omega).at()
    assert np.max(np.abs(pv - oracles.flat_band_permittivity(omega, 1.0, 1.0))) < 1e-8


def test_static_permittivity_of_flat_band_is_undefined():
    with pytest.raises(ValueError, match="undefined"):
        medium.permittivity_pv(ConductivityProfile.flat(1.0, 1.0), 0.0)


def test_static_permittivity_of_lorentzian_is_finite():
    eps0 = medium.permittivity_pv(LORENTZ, 0.0)
    assert eps0.real == pytest.approx(1 + 0.1 / 4.0, rel=1e-7)
    assert eps0.imag == 0.0


def test_pv_at_band_edge_jump_raises():
    with pytest.raises(ValueError, match="diverges"):
        medium.permittivity_pv(ConductivityProfile.flat(1.0, 1.0), 1.0)


def test_negative_frequency_is_conjugate():
    assert medium.permittivity_pv(LORENTZ, -1.7) == medium.permittivity_pv(LORENTZ, 1.7).conjugate()


def test_kernel_route_rejects_undersampled_grid():
    k = medium.chi_kernel(LORENTZ, np.arange(0, 50, 0.2))
    with pytest.raises(ValueError, match="under-samples"):
        medium.permittivity_from_kernel(k, [1.0])


def test_undecayed_kernel_warns():
    k = medium.chi_kernel(LORENTZ, np.arange(0, 20, 0.04))
    with pytest.warns(medium.KernelNotDecayedWarning):
        medium.permittivity_from_kernel(k, [1.0])


def test_kk_report_vacuum_is_exact():
    band = medium.symmetric_grid(5.0, 0.05)
    perm = medium.Permittivity(band, np.ones((1, band.size), complex))
    rep = medium.kk_report(perm)
    assert rep.residual == 0.0 and rep.hermitian_residual == 0.0
    assert not rep.truncation_dominated


def test_kk_report_closed_form_on_adequate_band():
    band = medium.symmetric_grid(30.0, 0.01)
    vals = oracles.lorentzian_permittivity(band, 1.0, 2.0, 0.1)
    rep = medium.kk_report(medium.Permittivity(band, vals[None]))
    assert rep.residual < 1e-3
    assert rep.hermitian_residual < 1e-15
    assert not rep.truncation_dominated


def test_kk_report_flags_band_cut_inside_the_line():
    band = medium.symmetric_grid(1.95, 0.01)
    vals = oracles.lorentzian_permittivity(band, 1.0, 2.0, 0.1)
    rep = medium.kk_report(medium.Permittivity(band, vals[None]))
    assert rep.residual > 1e-1
    assert rep.truncation_dominated


def test_discrete_hilbert_of_lorentzian_line():
    # H[1/(1+u^2)] = -u/(1+u^2) with the sign convention (1/pi) PV int f(u)/(u - w)
    h = 0.02
    w = medium.symmetric_grid(100.0, h)
    out = medium.discrete_hilbert(1 / (1 + w**2), h)
    mid = np.abs(w) < 5
    assert np.max(np.abs(out[mid] + w[mid] / (1 + w[mid] ** 2))) < 1e-3


def test_profile_validation():
    with pytest.raises(ValueError):
        ConductivityProfile.flat(-1.0, 1.0)
    with pytest.raises(ValueError):
        ConductivityProfile.lorentzian(1.0, 2.0, 0.0)
    with pytest.raises(ValueError):
        ConductivityProfile.tabulated([0.0, 1.0, 0.5], [1.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        LORENTZ.with_modulation([1.0, -0.5])
    with pytest.raises(ValueError, match="unknown profile form"):
        ConductivityProfile(form="drude")


def test_tabulated_profile_interpolates_and_vanishes_outside():
    prof = ConductivityProfile.tabulated([0.0, 1.0, 2.0], [0.0, 1.0, 0.0])
    assert prof.sigma(0.5) == pytest.approx(0.5)
    assert prof.sigma(-1.5) == pytest.approx(0.5)
    assert prof.sigma(2.5) == 0.0
    assert prof.low_frequency_order() == 1


def test_tabulated_kernel_needs_cutoff_covering_support():
    prof = ConductivityProfile.tabulated([0.0, 1.0, 2.0], [0.0, 1.0, 0.0])
    with pytest.raises(ValueError, match="support"):
        medium.chi_kernel(prof, np.linspace(0, 1, 5), omega_max=1.5)


def test_kernel_and_permittivity_csv(tmp_path):
    from dualfield.io import read_csv
    k = medium.chi_kernel(LORENTZ, np.linspace(0, 1, 5))
    header, rows = read_csv(k.to_csv(tmp_path / "k.csv"))
    assert header == ["x_index", "tau", "value"] and len(rows) == 5
    perm = medium.permittivity_pv_grid(LORENTZ, [1.0, 2.0])
    header, rows = read_csv(perm.to_csv(tmp_path / "e.csv"))
    assert header == ["x_index", "omega", "re", "im"] and len(rows) == 2
    assert math.isclose(float(rows[1][3]), 0.5, rel_tol=1e-15)


def test_symmetric_grid_excludes_zero():
    g = medium.symmetric_grid(1.0, 0.25)
    assert np.allclose(g, [-0.875, -0.625, -0.375, -0.125, 0.125, 0.375, 0.625, 0.875])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert 0.0 not in g

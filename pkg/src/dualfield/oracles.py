"""Closed-form reference solutions, independent of the numerical code paths.

Used by the test suite and by the scenario runner as ground truth.
"""

import math

import numpy as np

from . import modes


def sine_integral(x, tol=1e-16):
    """``Si(x)`` from its power series (intended for ``|x| <= 8``)."""
    x = float(x)
    if abs(x) > 8:
        raise ValueError("power series is only used for |x| <= 8")
    total, n = 0.0, 0
    term = x  # x^(2n+1) / (2n+1)!
    while True:
        contrib = term / (2 * n + 1)
        total += contrib
        if abs(contrib) < tol * max(1.0, abs(total)):
            return total
        n += 1
        term *= -x * x / ((2 * n) * (2 * n + 1))


def flat_band_chi(tau, sigma0, cutoff):
    """Kernel of a flat band: ``(2 sigma0 / pi) Si(cutoff tau)``."""
    return np.array([2 * sigma0 / np.pi * sine_integral(cutoff * t) for t in np.atleast_1d(tau)])


def flat_band_permittivity(omega, sigma0, cutoff):
    """``1 + (sigma0 / (pi w)) ln|(cutoff - w) / (cutoff + w)| + i sigma(w)/w`` for ``w > 0``."""
    w = np.asarray(omega, dtype=float)
    re = 1 + sigma0 / (np.pi * w) * np.log(np.abs((cutoff - w) / (cutoff + w)))
    im = np.where(w < cutoff, sigma0 / w, 0.0)
    return re + 1j * im


def lorentzian_permittivity(omega, sigma0, omega0, gamma):
    """``1 + sigma0 gamma / (omega0^2 - w^2 - i gamma w)``."""
    w = np.asarray(omega, dtype=float)
    return 1 + sigma0 * gamma / (omega0**2 - w**2 - 1j * gamma * w)


def lorentzian_chi(tau, sigma0, omega0, gamma):
    """Damped-oscillator kernel ``sigma0 gamma exp(-gamma tau / 2) sin(nu tau) / nu``."""
    tau = np.asarray(tau, dtype=float)
    nu = math.sqrt(omega0**2 - gamma**2 / 4)
    return sigma0 * gamma * np.exp(-gamma * tau / 2) * np.sin(nu * tau) / nu


def _oscillator_flow(K, x0, v0, t):
    """Solve ``x'' = -K x`` for a stack of symmetric positive 2x2 matrices."""
    lam, V = np.linalg.eigh(K)
    om = np.sqrt(lam)
    a0 = np.einsum("mji,mj->mi", V, x0)
    b0 = np.einsum("mji,mj->mi", V, v0)
    cs, sn = np.cos(om * t), np.sin(om * t)
    x = cs * a0 + sn / om * b0
    v = -om * sn * a0 + cs * b0
    return np.einsum("mij,mj->mi", V, x), np.einsum("mij,mj->mi", V, v)


def polariton_solution(state, t):
    """Exact field and bath amplitudes after time ``t`` for one homogeneous bath line.

    Each in-band wavevector couples the field coordinate ``q_1`` to the bath
    coordinate ``xi_2`` (and ``q_2`` to ``xi_1``) through the symmetric matrix
    ``[[w_k^2, g], [g, w_0^2 + w a^2]]`` with ``g = sqrt(w) a w_k``; the
    remaining bath motion oscillates at ``sqrt(w_0^2 + w a^2)``.
    Returns ``(c, Z)``.
    """
    basis, bath, profile = state.basis, state.bath, state.profile
    if bath.n_lines != 1 or profile.n_points != 1:
        raise ValueError("oracle needs a single bath line and a homogeneous medium")
    if state.drive is not None:
        raise ValueError("oracle does not include external drives")
    cl = basis.units.c
    w = float(bath.weights[0])
    om0 = float(bath.omega[0])
    a = math.sqrt(2 * float(profile.sigma(om0)) / np.pi)
    big = om0**2 + w * a**2
    wk = basis.omega

    q, qd = modes.generalized_coordinates(state.field.c, basis)
    X, Xd = bath.X[0], bath.Xdot[0]
    xi = modes.project(X, basis, alias_tol=math.inf)
    xid = modes.project(Xd, basis, alias_tol=math.inf)
    X_rest = X - modes.synthesize(modes.modal_vectors(xi, basis), basis).real
    Xd_rest = Xd - modes.synthesize(modes.modal_vectors(xid, basis), basis).real

    K = np.zeros((basis.n_modes, 2, 2))
    K[:, 0, 0] = wk**2
    K[:, 0, 1] = K[:, 1, 0] = math.sqrt(w) * a * wk
    K[:, 1, 1] = big
    sw = math.sqrt(w)
    q_new, qd_new = np.zeros_like(q), np.zeros_like(qd)
    xi_new, xid_new = np.zeros_like(xi), np.zeros_like(xid)
    # (q_1, xi_2) with q_1 = i c Q and (q_2, xi_1) with q_2 = -i c Q
    for jq, jx, fac in ((0, 1, 1j * cl), (1, 0, -1j * cl)):
        for part in (np.real, np.imag):
            # the flow has real coefficients, so real and imaginary parts separate
            Q, Qd = q[:, jq] / fac, qd[:, jq] / fac
            x0 = np.stack([part(Q), sw * part(xi[:, jx])], axis=1)
            v0 = np.stack([part(Qd), sw * part(xid[:, jx])], axis=1)
            x, v = _oscillator_flow(K, x0, v0, t)
            unit = 1.0 if part is np.real else 1j
            q_new[:, jq] += fac * unit * x[:, 0]
            qd_new[:, jq] += fac * unit * v[:, 0]
            xi_new[:, jx] += unit * x[:, 1] / sw
            xid_new[:, jx] += unit * v[:, 1] / sw

    c = modes.amplitudes_from_coordinates(q_new, qd_new, basis)
    Om = math.sqrt(big)
    Xr = X_rest * math.cos(Om * t) + Xd_rest * math.sin(Om * t) / Om
    Xdr = -X_rest * Om * math.sin(Om * t) + Xd_rest * math.cos(Om * t)
    Xt = Xr + modes.synthesize(modes.modal_vectors(xi_new, basis), basis).real
    Xdt = Xdr + modes.synthesize(modes.modal_vectors(xid_new, basis), basis).real
    Z = (Xdt + 1j * om0 * Xt)[None]
    return c, Z


def polariton_frequencies(omega_k, omega0, weight, a):
    """Normal-mode frequencies of the two coupled oscillators."""
    K = np.array([[omega_k**2, math.sqrt(weight) * a * omega_k],
                  [math.sqrt(weight) * a * omega_k, omega0**2 + weight * a**2]])
    return np.sqrt(np.linalg.eigvalsh(K))

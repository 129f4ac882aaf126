"""Mean-field cavity + lambda-spin dynamics: kernels, closed forms, regimes."""

import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nvgyro import _core
from nvgyro.constants import TWO_PI, power_to_drive
from nvgyro.lambda_dynamics import (
    LambdaParams,
    Regime,
    SystemState,
    default_params,
    equations_of_motion,
    integrate,
    lindblad_ops,
    perfect_eit_curve,
    polarized_state,
    solve_steady_state,
)

BASE = default_params()


def _random_state(rng):
    a = rng.normal() + 1j * rng.normal()
    m = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    rho = m @ m.conj().T
    rho /= np.trace(rho).real
    rho = 0.5 * (rho + rho.conj().T)
    return SystemState(alpha=a, rho=rho)


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_compiled_kernel_matches_matrix_form(seed):
    """The compiled right-hand side agrees with the Hamiltonian/Lindblad
    matrix reference on random physical states."""
    rng = np.random.default_rng(seed)
    state = _random_state(rng)
    dalpha, drho = equations_of_motion(BASE, state)
    x = _core.pack_state(state.alpha, [state.rho])
    out = np.empty_like(x)
    _core.rhs(x, BASE.delta, BASE.kappa, BASE.drive_j,
              BASE.member_row()[None, :], out)
    dalpha_k = out[0] + 1j * out[1]
    scale = max(np.max(np.abs(drho)), abs(dalpha), 1.0)
    assert abs(dalpha_k - dalpha) <= 1e-12 * scale
    # compare the independent packed components (upper-triangle u_ij =
    # <i|rho|j>; rho_ee is reconstructed from the trace, so its derivative
    # carries no extra information)
    dx = out
    assert abs(dx[2] - drho[0, 0].real) <= 1e-12 * scale
    assert abs(dx[3] - drho[1, 1].real) <= 1e-12 * scale
    assert abs((dx[4] + 1j * dx[5]) - drho[0, 1]) <= 1e-12 * scale
    assert abs((dx[6] + 1j * dx[7]) - drho[0, 2]) <= 1e-12 * scale
    assert abs((dx[8] + 1j * dx[9]) - drho[1, 2]) <= 1e-12 * scale


def test_lindblad_preserves_trace_and_hermiticity():
    rng = np.random.default_rng(7)
    state = _random_state(rng)
    _, drho = equations_of_motion(BASE, state)
    assert abs(np.trace(drho)) < 1e-10 * np.max(np.abs(drho))
    assert np.allclose(drho, drho.conj().T, atol=1e-12 * np.max(np.abs(drho)))


def test_empty_cavity_closed_form():
    """No spins: alpha = J / (i Delta + kappa/2) exactly."""
    for delta_hz in (0.0, 0.3e6, -1.2e6):
        p = replace(BASE, n_spins=0.0, g_s=0.0, omega_2=0.0,
                    delta=TWO_PI * delta_hz)
        sol = solve_steady_state(p, classify=False)
        expect = p.drive_j / (1j * p.delta + 0.5 * p.kappa)
        assert abs(sol.state.alpha - expect) < 1e-9 * abs(expect)


def test_critical_coupling_reflection_zero():
    # kappa_c1 = kappa/2 means the resonant empty-cavity reflection vanishes
    p = replace(BASE, n_spins=0.0, g_s=0.0, omega_2=0.0, delta=0.0)
    sol = solve_steady_state(p, classify=False)
    assert abs(sol.r) < 1e-10


def test_two_level_suppression_closed_form():
    """Omega_2 = 0, resonant: the polarized ensemble suppresses the field
    by 1/(1 + C) (weak probe)."""
    p = replace(BASE, omega_2=0.0, drive_j=power_to_drive(-80, BASE.kappa_c1))
    sol = solve_steady_state(p, classify=False)
    empty = p.drive_j / (0.5 * p.kappa)
    ratio = abs(sol.state.alpha) / empty
    assert ratio == pytest.approx(1.0 / (1.0 + p.cooperativity), rel=0.02)


def test_weak_probe_coherence_relation():
    """At a weak resonant probe the 1e coherence obeys
    sigma_1e = -i g alpha rho_11 / (gamma/2) to first order."""
    p = replace(BASE, omega_2=0.0, drive_j=power_to_drive(-90, BASE.kappa_c1))
    sol = solve_steady_state(p, classify=False)
    st_ = sol.state
    lhs = st_.sigma_1e
    rhs_ = -1j * p.g_s * st_.alpha * st_.rho[0, 0] / (0.5 * p.gamma)
    assert abs(lhs - rhs_) < 5e-3 * abs(lhs)


def test_eit_drive_restores_transmission():
    """The drive opens a transparency window: intracavity intensity on
    two-photon resonance far exceeds the undriven suppressed value."""
    driven = solve_steady_state(BASE)
    undriven = solve_steady_state(replace(BASE, omega_2=0.0), classify=False)
    assert abs(driven.state.alpha) > 3.0 * abs(undriven.state.alpha)
    assert driven.regime in (Regime.EIT, Regime.PERFECT_EIT)


def test_regime_progression_with_drive():
    """EIT at weak drive, MWI past the coherence crossing, oscillation
    at strong drive."""
    regs = []
    for w2_hz in (6e3, 30e3, 120e3):
        sol = solve_steady_state(replace(BASE, omega_2=TWO_PI * w2_hz))
        regs.append(sol.regime)
    assert regs[0] in (Regime.EIT, Regime.PERFECT_EIT)
    assert regs[1] is Regime.MWI
    assert regs[2] is Regime.OSCILLATION


def test_perfect_eit_crossing_matches_sign_change():
    """Im sigma_1e crosses zero exactly once on an upward drive sweep and
    the crossing agrees with the bisection curve to 1e-3 relative."""
    p_dbm = -55.0
    curve = perfect_eit_curve(BASE, [p_dbm])
    assert len(curve) == 1
    w_star = curve[0][1]
    w_grid = TWO_PI * np.geomspace(2e3, 40e3, 41)
    signs = []
    for w in w_grid:
        sol = solve_steady_state(replace(BASE, omega_2=w), classify=False)
        signs.append(np.sign(sol.state.sigma_1e.imag))
    signs = np.asarray(signs)
    flips = np.nonzero(np.diff(signs))[0]
    assert len(flips) == 1
    lo, hi = w_grid[flips[0]], w_grid[flips[0] + 1]
    assert lo <= w_star * (1 + 1e-3) and hi >= w_star * (1 - 1e-3)


def test_crossing_power_independent():
    c1 = perfect_eit_curve(BASE, [-70.0])[0][1]
    c2 = perfect_eit_curve(BASE, [-30.0])[0][1]
    assert c1 == pytest.approx(c2, rel=0.02)


def test_integrate_relaxes_to_fixed_point():
    trace = integrate(BASE, polarized_state(), t_final=0.1, n_samples=400)
    sol = solve_steady_state(BASE, classify=False)
    assert abs(trace.alpha[-1] - sol.state.alpha) < 1e-4 * abs(sol.state.alpha)
    assert np.max(np.abs(trace.rho[-1] - sol.state.rho)) < 1e-6


def test_integrate_conserves_trace_and_positivity():
    trace = integrate(BASE, polarized_state(), t_final=0.02, n_samples=200)
    traces = np.einsum("nii->n", trace.rho).real
    assert np.allclose(traces, 1.0, atol=1e-7)
    for rho in trace.rho[::40]:
        assert np.linalg.eigvalsh(rho).min() > -1e-7


def test_oscillation_regime_has_beat_under_frame_offset():
    p = default_params(p_dbm=-80.0, omega2_hz=52e3)
    p = replace(p, delta_2=p.delta_2 + TWO_PI * 80.0)
    trace = integrate(p, polarized_state(alpha=1e-3), t_final=0.25,
                      n_samples=12000, extract_beat=True)
    assert trace.beat_frequency is not None
    assert trace.beat_frequency > 0


def test_gamma_rep_vanishes_without_drive():
    p = replace(BASE, omega_2=0.0)
    assert p.gamma_rep == 0.0
    assert p.gamma_rep < BASE.gamma_rep


def test_lindblad_rates_are_nonnegative():
    for op in lindblad_ops(BASE):
        assert np.all(np.isfinite(op))


def test_params_reject_negative_rates():
    with pytest.raises(ValueError):
        LambdaParams(gamma=-1.0)
    with pytest.raises(ValueError):
        LambdaParams(n_spins=-1.0)


def test_dephasing_clipped_when_overcommitted():
    p = replace(BASE, gamma=0.5 * (BASE.gamma_p + BASE.gamma_th))
    with pytest.warns(UserWarning):
        assert p.gamma_phi == 0.0


def test_solver_agrees_with_long_integration_in_mwi():
    p = replace(BASE, omega_2=TWO_PI * 30e3)
    sol = solve_steady_state(p)
    assert sol.regime is Regime.MWI
    trace = integrate(p, polarized_state(), t_final=0.2, n_samples=400)
    assert abs(trace.alpha[-1] - sol.state.alpha) < 1e-3 * abs(sol.state.alpha)

"""Exact Lindblad steady states against closed forms and the mean field."""

from dataclasses import replace

import numpy as np
import pytest

from nvgyro.constants import TWO_PI
from nvgyro.lambda_dynamics import default_params
from nvgyro.quantum_oracle import (
    OracleConfig,
    build_hamiltonian,
    build_liouvillian,
    collapse_ops,
    compare_with_mean_field,
    cutoff_stability,
    rescale_to_collective,
    steady_state_exact,
    trace_residual,
)

BASE = default_params()


def _weak_config(n_spins=1, fock_cutoff=12, drive_frac=0.05,
                 coupling_frac=0.05, omega2=0.0):
    p = rescale_to_collective(BASE, n_spins,
                              target_collective=coupling_frac * BASE.kappa)
    p = replace(p, omega_2=omega2, drive_j=drive_frac * 0.5 * BASE.kappa)
    return OracleConfig(params=p, n_spins=n_spins, fock_cutoff=fock_cutoff)


def test_config_validation():
    with pytest.raises(ValueError):
        OracleConfig(params=BASE, n_spins=4)
    with pytest.raises(ValueError):
        OracleConfig(params=BASE, n_spins=1, fock_cutoff=40)
    # dim cap sits exactly at the largest legal configuration
    assert OracleConfig(params=BASE, n_spins=3, fock_cutoff=30).dim == 810


def test_hamiltonian_hermitian():
    cfg = _weak_config()
    h = build_hamiltonian(cfg).toarray()
    assert np.allclose(h, h.conj().T, atol=1e-9 * max(1.0, abs(h).max()))


def test_liouvillian_annihilates_trace():
    cfg = _weak_config(fock_cutoff=6)
    liou = build_liouvillian(cfg)
    assert trace_residual(liou, cfg.dim) < 1e-12


def test_decay_only_spectrum():
    """With H = 0 and only cavity decay, the Liouvillian eigenvalues on
    Fock coherences are -kappa (n + m) / 2."""
    p = replace(BASE, n_spins=1.0, g_s=0.0, omega_2=0.0, drive_j=0.0,
                gamma_p=0.0, gamma_th=0.0, gamma_n=0.0, gamma=0.0,
                zeta_rep=0.0, delta=0.0, delta_s=0.0, delta_2=0.0)
    nf = 4
    cfg = OracleConfig(params=p, n_spins=1, fock_cutoff=nf)
    liou = build_liouvillian(cfg).toarray()
    evals = np.sort_complex(np.linalg.eigvals(liou))
    kappa = p.kappa
    expect = sorted(
        -0.5 * kappa * (n + m) for n in range(nf) for m in range(nf)
        for _ in range(9)  # 3x3 spin space is inert here
    )
    got = np.sort(evals.real)
    assert np.allclose(got, expect, atol=1e-6 * kappa)


def test_empty_cavity_coherent_state():
    """Decoupled spins: the cavity settles into the coherent state
    alpha = J / (i Delta + kappa / 2)."""
    p = replace(BASE, g_s=0.0, n_spins=1.0, omega_2=0.0,
                drive_j=0.08 * BASE.kappa)
    cfg = OracleConfig(params=p, n_spins=1, fock_cutoff=14)
    sol = steady_state_exact(cfg)
    expect = p.drive_j / (0.5 * p.kappa)
    assert abs(sol.a_expect - expect) < 1e-8 * abs(expect)
    assert sol.photon_number == pytest.approx(abs(expect) ** 2, rel=1e-6)


def test_weak_drive_matches_mean_field():
    rec = compare_with_mean_field(_weak_config())
    assert rec["rel_err"] < 0.01
    assert rec["top_fock_population"] < 1e-8


def test_cutoff_stability_when_converged():
    shift, s0, s1 = cutoff_stability(_weak_config(fock_cutoff=10))
    assert shift < 1e-6
    assert s0.top_fock_population < 1e-6


def test_steady_state_is_physical():
    sol = steady_state_exact(_weak_config(omega2=0.02 * BASE.kappa))
    rho = sol.rho
    assert abs(np.trace(rho) - 1.0) < 1e-10
    assert np.allclose(rho, rho.conj().T, atol=1e-12)
    assert np.linalg.eigvalsh(rho).min() > -1e-8


def test_spin_reduced_density_matrix():
    sol = steady_state_exact(_weak_config(n_spins=2, fock_cutoff=6))
    for k in (0, 1):
        rs = sol.spin_reduced(k)
        assert rs.shape == (3, 3)
        assert abs(np.trace(rs) - 1.0) < 1e-10
        assert sol.excited_population(k) >= -1e-12
    # identical spins: identical reduced states
    assert np.allclose(sol.spin_reduced(0), sol.spin_reduced(1), atol=1e-9)


def test_transparency_dip_at_two_photon_resonance():
    """With the drive on, the exact excited population dips at the
    two-photon resonance within half a nuclear linewidth."""
    dets = TWO_PI * np.linspace(-200.0, 200.0, 21)
    pops = []
    for d2 in dets:
        cfg = _weak_config(omega2=0.05 * BASE.kappa)
        cfg = replace(cfg, params=replace(cfg.params, delta_2=d2))
        pops.append(steady_state_exact(cfg).excited_population())
    k = int(np.argmin(pops))
    assert abs(dets[k]) <= 0.5 * BASE.gamma_n + (dets[1] - dets[0])


def test_collapse_ops_count():
    cfg = _weak_config(n_spins=2, fock_cutoff=4)
    # 1 cavity + 6 channels per spin
    assert len(collapse_ops(cfg)) == 1 + 6 * 2

"""Ground-state level structure: oracles and invariants."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nvgyro.nv_structure import (
    BASIS_LABELS,
    MagneticField,
    NVParams,
    StateMixingError,
    build_hamiltonian,
    eigensystem,
    extract_lambda,
    hyperfine_tensor,
    rotation_shift,
    tetrahedral_axes,
)

PARAMS = NVParams()
FIELD = MagneticField()


def test_hamiltonian_is_hermitian():
    h = build_hamiltonian(PARAMS, FIELD)
    assert np.allclose(h, h.conj().T, atol=1e-6)


def test_zero_field_energies_closed_form():
    # at B = 0 the m_s = 0 manifold splits by the quadrupole up to the
    # second-order transverse-hyperfine shift ~ A_perp^2 / D
    h = build_hamiltonian(PARAMS, MagneticField(b_gauss=(0.0, 0.0, 0.0)))
    levels = eigensystem(h)
    e0m = levels.energies_hz[levels.index_of(0, -1)]
    e00 = levels.energies_hz[levels.index_of(0, 0)]
    second_order = 2.0 * PARAMS.a_perp_hz**2 / PARAMS.d_hz
    assert e0m - e00 == pytest.approx(PARAMS.q_hz, abs=abs(second_order))


def test_axial_field_perturbation_oracle():
    """Second-order perturbation theory reproduces the exact eigenvalues.

    With B purely axial the only off-diagonal pieces are the transverse
    hyperfine terms; summing their second-order corrections matches the
    numerical diagonalization to the expected third-order residual.
    """
    field = MagneticField(b_gauss=(0.0, 0.0, 50.0))
    h = build_hamiltonian(PARAMS, field)
    diag = np.real(np.diag(h))
    exact = eigensystem(h).energies_hz
    n = 9
    pert = diag.copy()
    for k in range(n):
        for m in range(n):
            if m == k:
                continue
            v = h[k, m]
            if abs(v) > 0:
                pert[k] += abs(v) ** 2 / (diag[k] - diag[m])
    # match perturbed estimates to exact levels by nearest value
    for e in pert:
        assert np.min(np.abs(exact - e)) < 50.0  # Hz, third-order residual


def test_hellmann_feynman_axial_slope():
    """dE/dBz equals <gamma_e Sz - gamma_n Iz> on the eigenstate."""
    from nvgyro.constants import TWO_PI

    b0 = 50.0
    h = build_hamiltonian(PARAMS, MagneticField(b_gauss=(0.0, 0.0, b0)))
    levels = eigensystem(h)
    db = 1e-3
    hp = build_hamiltonian(PARAMS, MagneticField(b_gauss=(0.0, 0.0, b0 + db)))
    hm = build_hamiltonian(PARAMS, MagneticField(b_gauss=(0.0, 0.0, b0 - db)))
    e_p = eigensystem(hp).energies_hz
    e_m = eigensystem(hm).energies_hz
    slopes_fd = (e_p - e_m) / (2 * db)
    ge = PARAMS.gamma_e / TWO_PI
    gn = PARAMS.gamma_n / TWO_PI
    sz_tot = np.kron(np.diag([1.0, 0.0, -1.0]), np.eye(3))
    iz_tot = np.kron(np.eye(3), np.diag([1.0, 0.0, -1.0]))
    op = ge * sz_tot - gn * iz_tot
    for k in range(9):
        v = levels.states[:, k]
        hf = np.real(v.conj() @ op @ v)
        assert slopes_fd[k] == pytest.approx(hf, abs=2.0)


def test_forbidden_element_grows_with_transverse_field():
    """The nominally forbidden |2> -> |e> element is enabled by B_perp."""
    prev = 0.0
    for bx in (10.0, 25.0, 50.0, 80.0):
        levels = eigensystem(build_hamiltonian(
            PARAMS, MagneticField(b_gauss=(bx, 0.0, 50.0))))
        lam = extract_lambda(levels)
        assert lam.c_forbidden > prev
        prev = lam.c_forbidden
    # stays perturbative: forbidden stays well below allowed
    assert prev < 0.5


def test_forbidden_element_vanishes_axially():
    levels = eigensystem(build_hamiltonian(
        PARAMS, MagneticField(b_gauss=(0.0, 0.0, 50.0))))
    lam = extract_lambda(levels)
    assert lam.c_forbidden < 0.02
    assert lam.c_allowed == pytest.approx(1.0, abs=0.05)


def test_default_field_lambda_extraction():
    levels = eigensystem(build_hamiltonian(PARAMS, FIELD))
    lam = extract_lambda(levels)
    # transition frequencies sit near D and split by roughly |Q| + A_par
    assert 2.5e9 < lam.omega_s_hz < 3.3e9
    assert 2.5e9 < lam.omega_2e_hz < 3.3e9
    assert 2e6 < lam.q_eff_hz < 10e6
    assert 0.0 < lam.c_forbidden < lam.c_allowed


def test_state_mixing_guard_trips_at_degeneracy():
    # a huge transverse field destroys the |m_s, m_I> character
    with pytest.raises((StateMixingError, KeyError)):
        levels = eigensystem(build_hamiltonian(
            PARAMS, MagneticField(b_gauss=(5000.0, 0.0, 0.0))))
        extract_lambda(levels)


@given(
    rz=st.floats(-10.0, 10.0, allow_nan=False),
    rx=st.floats(-10.0, 10.0, allow_nan=False),
)
@settings(max_examples=50, deadline=None)
def test_rotation_shift_projects_on_axis(rz, rx):
    shift = rotation_shift((rx, 0.0, rz), (0.0, 0.0, 1.0))
    assert shift.delta_c == pytest.approx(rz, abs=1e-12)
    assert shift.delta_d == pytest.approx(-rz, abs=1e-12)


def test_rotation_shift_rejects_non_unit_axis():
    with pytest.raises(ValueError):
        rotation_shift((0.0, 0.0, 1.0), (0.0, 0.0, 2.0))


def test_tetrahedral_axes_geometry():
    axes = tetrahedral_axes()
    gram = axes @ axes.T
    assert np.allclose(np.diag(gram), 1.0, atol=1e-12)
    off = gram[~np.eye(4, dtype=bool)]
    assert np.allclose(off, -1.0 / 3.0, atol=1e-12)
    assert np.linalg.matrix_rank(axes) == 3


def test_hyperfine_tensor_values():
    a = hyperfine_tensor(PARAMS)
    assert a[2, 2] == PARAMS.a_par_hz
    assert a[0, 0] == a[1, 1] == PARAMS.a_perp_hz


def test_basis_labels_cover_product_space():
    assert len(BASIS_LABELS) == 9
    assert len(set(BASIS_LABELS)) == 9


def test_params_validation():
    with pytest.raises(ValueError):
        NVParams(d_hz=-1.0)
    with pytest.raises(ValueError):
        NVParams(q_hz=1.0)
    with pytest.raises(ValueError):
        MagneticField(b_gauss=(1.0, 2.0))

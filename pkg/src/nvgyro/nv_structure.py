"""NV ground-state level structure and the lambda-system extraction.

The 9-level Hamiltonian lives on the S=1 (x) I=1 product basis ordered as
|m_s, m_I> with m_s, m_I in (+1, 0, -1).  Energies are in Hz throughout this
module; gyromagnetic ratios are stored in rad/s per gauss and divided by 2*pi
where they enter the Hamiltonian.
"""

from dataclasses import dataclass, field

import numpy as np

from .constants import TWO_PI

# spin-1 operators, basis (+1, 0, -1)
_SQ2 = 1.0 / np.sqrt(2.0)
SZ = np.diag([1.0, 0.0, -1.0]).astype(complex)
SX = _SQ2 * np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex)
SY = _SQ2 * np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex)
_EYE3 = np.eye(3, dtype=complex)

# (m_s, m_I) for each product-basis index
BASIS_LABELS = [(ms, mi) for ms in (1, 0, -1) for mi in (1, 0, -1)]

# lambda-system character: |1> = |0,-1>, |2> = |0,0>, |e> = |1,-1>
LAMBDA_CHARACTER = {"1": (0, -1), "2": (0, 0), "e": (1, -1)}


class StateMixingError(RuntimeError):
    """Eigenstate labeling is ambiguous (dominant overlap <= 0.5)."""


@dataclass(frozen=True)
class NVParams:
    """Ground-state constants. D, Q, A in Hz; gammas in rad/s per gauss."""

    d_hz: float = 2.87e9
    q_hz: float = -4.945e6
    gamma_e: float = TWO_PI * 2.8e6
    gamma_n: float = TWO_PI * 0.308e3
    a_par_hz: float = -2.16e6
    a_perp_hz: float = -2.7e6

    def __post_init__(self):
        if not self.d_hz > 0:
            raise ValueError("d_hz must be positive")
        if not self.q_hz < 0:
            raise ValueError("q_hz must be negative")


@dataclass(frozen=True)
class MagneticField:
    """Static field in gauss, z along the chosen <111> NV axis."""

    b_gauss: tuple = (50.0, 0.0, 50.0)

    def __post_init__(self):
        b = np.asarray(self.b_gauss, dtype=float)
        if b.shape != (3,) or not np.all(np.isfinite(b)):
            raise ValueError("b_gauss must be a finite 3-vector")

    @property
    def vec(self):
        return np.asarray(self.b_gauss, dtype=float)

    @property
    def b_perp(self):
        return float(np.hypot(self.b_gauss[0], self.b_gauss[1]))


@dataclass(frozen=True)
class LevelSet:
    """Eigensystem of the 9-level Hamiltonian."""

    energies_hz: np.ndarray          # ascending, shape (9,)
    states: np.ndarray               # columns are eigenvectors, shape (9, 9)
    labels: tuple                    # per state: ((m_s, m_I), overlap fraction)

    def index_of(self, ms, mi):
        """Index of the eigenstate dominated by |m_s, m_I>."""
        for k, ((lms, lmi), _frac) in enumerate(self.labels):
            if (lms, lmi) == (ms, mi):
                return k
        raise KeyError(f"no eigenstate labeled |{ms},{mi}>")


@dataclass(frozen=True)
class LambdaExtraction:
    """The lambda subsystem {|1>,|2>,|e>} = {|0,-1>,|0,0>,|1,-1>}."""

    omega_s_hz: float     # |1> <-> |e|
    omega_2e_hz: float    # |2> <-> |e|
    q_eff_hz: float       # |1> <-> |2| splitting
    c_allowed: float      # Sx element |1>->|e>, relative to the bare 1/sqrt(2)
    c_forbidden: float    # Sx element |2>->|e>, same normalization


@dataclass(frozen=True)
class RotationSignalShift:
    """Common- and difference-mode shifts produced by a rotation (rad/s)."""

    delta_c: float
    delta_d: float


def hyperfine_tensor(params: NVParams) -> np.ndarray:
    return np.diag([params.a_perp_hz, params.a_perp_hz, params.a_par_hz])


def build_hamiltonian(params: NVParams, field: MagneticField) -> np.ndarray:
    """9x9 Hermitian ground-state Hamiltonian in Hz."""
    b = field.vec
    ge = params.gamma_e / TWO_PI
    gn = params.gamma_n / TWO_PI
    s_ops = (SX, SY, SZ)
    h = np.kron(params.d_hz * SZ @ SZ, _EYE3)
    h += np.kron(ge * (SX * b[0] + SY * b[1] + SZ * b[2]), _EYE3)
    h += np.kron(_EYE3, params.q_hz * SZ @ SZ)
    h -= np.kron(_EYE3, gn * (SX * b[0] + SY * b[1] + SZ * b[2]))
    a = hyperfine_tensor(params)
    for i in range(3):
        for j in range(3):
            if a[i, j] != 0.0:
                h += a[i, j] * np.kron(s_ops[i], s_ops[j])
    return h


def eigensystem(h: np.ndarray, herm_tol: float = 1e-9) -> LevelSet:
    """Diagonalize, sort ascending, and label states by dominant character."""
    h = np.asarray(h, dtype=complex)
    scale = np.linalg.norm(h)
    if np.linalg.norm(h - h.conj().T) > herm_tol * max(scale, 1.0):
        raise ValueError("Hamiltonian is not Hermitian within tolerance")
    vals, vecs = np.linalg.eigh(h)
    labels = []
    for k in range(vals.size):
        w = np.abs(vecs[:, k]) ** 2
        idx = int(np.argmax(w))
        labels.append((BASIS_LABELS[idx], float(w[idx])))
    return LevelSet(energies_hz=vals, states=vecs, labels=tuple(labels))


def _sx_total(n_levels=9):
    return np.kron(SX, _EYE3)


def extract_lambda(levels: LevelSet) -> LambdaExtraction:
    """Transition frequencies and relative Sx matrix elements for the lambda set."""
    idx = {}
    for name, (ms, mi) in LAMBDA_CHARACTER.items():
        k = levels.index_of(ms, mi)
        _lab, frac = levels.labels[k]
        if frac <= 0.5:
            raise StateMixingError(
                f"excessive state mixing for |{name}>: dominant overlap {frac:.3f}"
            )
        idx[name] = k
    e1 = levels.energies_hz[idx["1"]]
    e2 = levels.energies_hz[idx["2"]]
    ee = levels.energies_hz[idx["e"]]
    sx = _sx_total()
    v1 = levels.states[:, idx["1"]]
    v2 = levels.states[:, idx["2"]]
    ve = levels.states[:, idx["e"]]
    # normalize to the zero-field allowed delta-m_s = +-1 element <0|Sx|1> = 1/sqrt(2)
    c_allowed = abs(ve.conj() @ sx @ v1) / _SQ2
    c_forbidden = abs(ve.conj() @ sx @ v2) / _SQ2
    return LambdaExtraction(
        omega_s_hz=float(ee - e1),
        omega_2e_hz=float(ee - e2),
        q_eff_hz=float(abs(e2 - e1)),
        c_allowed=float(c_allowed),
        c_forbidden=float(c_forbidden),
    )


def rotation_shift(rotation_rad_s, nv_axis) -> RotationSignalShift:
    """Common/difference-mode shifts for rotation rate R (rad/s) about nv_axis.

    The difference-mode sign follows the nuclear quantum numbers of the lambda
    labels: m_I(|1>) - m_I(|2>) = -1.
    """
    r = np.asarray(rotation_rad_s, dtype=float)
    axis = np.asarray(nv_axis, dtype=float)
    if abs(np.linalg.norm(axis) - 1.0) > 1e-9:
        raise ValueError("nv_axis must be a unit vector")
    rz = float(r @ axis)
    return RotationSignalShift(delta_c=rz, delta_d=-rz)


def tetrahedral_axes() -> np.ndarray:
    """The four <111> NV axes as unit rows; pairwise dot products are -1/3."""
    axes = np.array(
        [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float
    )
    return axes / np.sqrt(3.0)

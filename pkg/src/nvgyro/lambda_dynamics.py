"""Mean-field dynamics of one driven lambda subensemble in a cavity.

Phase convention: the probe drive J is real positive and enters dalpha/dt
additively, so an empty resonant cavity settles to real positive alpha and
alpha = (J - i g N <sigma_1e>) / (i Delta + kappa/2) at the fixed point.
"""

import enum
import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import _core
from .constants import TWO_PI, power_to_drive


class Regime(enum.Enum):
    EIT = "EIT"
    PERFECT_EIT = "PERFECT_EIT"
    MWI = "MWI"
    OSCILLATION = "OSCILLATION"


TOL_EIT = 1e-2  # classification band for PERFECT_EIT, not physics


@dataclass(frozen=True)
class LambdaParams:
    """All rates in rad/s; n_spins dimensionless."""

    delta: float = 0.0
    delta_s: float = 0.0
    delta_2: float = 0.0
    g_s: float = 0.0
    n_spins: float = 1.0
    omega_2: float = 0.0
    drive_j: float = 0.0
    kappa_c: float = TWO_PI * 0.5e6
    kappa_c1: float = TWO_PI * 0.5e6
    gamma: float = TWO_PI * 0.33e6     # electron coherence FWHM
    gamma_n: float = TWO_PI * 80.0     # nuclear coherence FWHM
    gamma_p: float = TWO_PI * 10e3     # optical polarization |e> -> |1>
    gamma_th: float = 200.0            # thermal |1> <-> |e>
    zeta_rep: float = 5e-7             # s; drive-induced repump gamma_rep = zeta_rep * omega_2**2

    def __post_init__(self):
        for name in ("g_s", "n_spins", "omega_2", "drive_j", "kappa_c",
                     "kappa_c1", "gamma", "gamma_n", "gamma_p", "gamma_th",
                     "zeta_rep"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def kappa(self):
        return self.kappa_c + self.kappa_c1

    @property
    def cooperativity(self):
        if self.kappa == 0 or self.gamma == 0:
            return 0.0
        return 4.0 * self.g_s**2 * self.n_spins / (self.kappa * self.gamma)

    @property
    def gamma_phi(self):
        """Pure dephasing left after the population channels (clipped at 0)."""
        gp = 0.5 * (self.gamma - self.gamma_p - self.gamma_th)
        if gp < 0:
            warnings.warn(
                "gamma < gamma_p + gamma_th: pure dephasing clipped to 0, "
                "total 1e linewidth exceeds gamma", stacklevel=2
            )
            return 0.0
        return gp

    @property
    def gamma_rep(self):
        """Incoherent |1> -> |2> repump rate induced by the drive field.

        The drive also excites, far off resonance, the neighbouring
        hyperfine transitions outside the lambda subspace; continuous
        optical repolarization returns that population with the nuclear
        spin flipped.  The net effect in the three-level model is a weak
        population transfer |1> -> |2> scaling as the drive intensity,
        gamma_rep = zeta_rep * omega_2**2.  It vanishes with the drive
        off, leaving the polarized two-level behaviour untouched, and at
        strong drive it is what feeds the gain (MWI) and self-oscillation.
        """
        return self.zeta_rep * self.omega_2**2

    def member_row(self):
        row = np.empty(_core.PM_NCOLS)
        row[_core.PM_DELTA_S] = self.delta_s
        row[_core.PM_DELTA_2] = self.delta_2
        row[_core.PM_G] = self.g_s
        row[_core.PM_GN] = self.g_s * self.n_spins
        row[_core.PM_OMEGA2] = self.omega_2
        row[_core.PM_GAMMA_PT] = self.gamma_p + self.gamma_th
        row[_core.PM_GAMMA_UP] = self.gamma_th
        row[_core.PM_GAMMA_PHI] = self.gamma_phi
        row[_core.PM_GAMMA_N] = self.gamma_n
        row[_core.PM_GAMMA_REP] = self.gamma_rep
        return row


def default_params(cooperativity=20.0, p_dbm=-55.0, omega2_hz=6e3,
                   delta=0.0, delta_s=0.0, delta_2=0.0,
                   n_spins=2.4e15, kappa_hz=1e6, kappa_c1_frac=0.5,
                   gamma_hz=0.33e6, gamma_n_hz=80.0, gamma_p_hz=10e3,
                   gamma_th=200.0, zeta_rep=5e-7,
                   omega_d=TWO_PI * 2.87e9) -> LambdaParams:
    """Baseline parameter set; g_s is fixed by the requested cooperativity."""
    kappa = TWO_PI * kappa_hz
    kappa_c1 = kappa_c1_frac * kappa
    gamma = TWO_PI * gamma_hz
    g_s = np.sqrt(cooperativity * kappa * gamma / (4.0 * n_spins))
    return LambdaParams(
        delta=delta, delta_s=delta_s, delta_2=delta_2,
        g_s=g_s, n_spins=n_spins, omega_2=TWO_PI * omega2_hz,
        drive_j=power_to_drive(p_dbm, kappa_c1, omega_d),
        kappa_c=kappa - kappa_c1, kappa_c1=kappa_c1,
        gamma=gamma, gamma_n=TWO_PI * gamma_n_hz,
        gamma_p=TWO_PI * gamma_p_hz, gamma_th=gamma_th,
        zeta_rep=zeta_rep,
    )


@dataclass(frozen=True)
class SystemState:
    """Cavity amplitude plus one 3x3 density matrix on (|1>, |2>, |e>)."""

    alpha: complex
    rho: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        if rho.shape != (3, 3):
            raise ValueError("rho must be 3x3")
        if abs(np.trace(rho).real - 1.0) > 1e-9 or abs(np.trace(rho).imag) > 1e-12:
            raise ValueError("rho must have unit trace")
        object.__setattr__(self, "rho", rho)

    @property
    def sigma_1e(self):
        """Expectation of |1><e|, the coherence driving the cavity."""
        return self.rho[2, 0]

    @property
    def sigma_12(self):
        return self.rho[1, 0]


def polarized_state(alpha=0.0 + 0.0j, p2=0.0) -> SystemState:
    """Ground-state density with population p2 in |2> and 1-p2 in |1>."""
    rho = np.diag([1.0 - p2, p2, 0.0]).astype(complex)
    return SystemState(alpha=complex(alpha), rho=rho)


@dataclass(frozen=True)
class SteadyStateSolution:
    state: SystemState
    residual: float
    jacobian_eigs: np.ndarray
    regime: Regime
    alpha0: complex     # kappa_c1 * alpha / J
    r: complex          # -1 + alpha0
    params: LambdaParams


@dataclass(frozen=True)
class TimeTrace:
    times: np.ndarray
    alpha: np.ndarray
    rho: np.ndarray                 # shape (n, 3, 3)
    beat_frequency: float | None    # rad/s, only when oscillating


def mean_field_hamiltonian(params: LambdaParams, alpha) -> np.ndarray:
    """3x3 rotating-frame Hamiltonian with the cavity field as a c-number."""
    g_a = params.g_s * alpha
    return np.array([
        [0.0, 0.0, np.conj(g_a)],
        [0.0, params.delta_2, params.omega_2],
        [g_a, params.omega_2, params.delta_s],
    ], dtype=complex)


def lindblad_ops(params: LambdaParams):
    """Collapse operators on (|1>, |2>, |e>).

    Optical polarization |e> -> |1> at gamma_p, residual pure dephasing of
    |e> so the 1e coherence decays at gamma/2 total, thermal |1> <-> |e>
    exchange at gamma_th, nuclear dephasing of |2> so rho_12 decays at
    gamma_n/2, and the drive-induced repump |1> -> |2> at gamma_rep
    (see LambdaParams.gamma_rep).
    """
    e_1e = np.zeros((3, 3), dtype=complex)
    e_1e[0, 2] = 1.0
    e_e1 = e_1e.conj().T
    e_ee = np.diag([0.0, 0.0, 1.0]).astype(complex)
    e_22 = np.diag([0.0, 1.0, 0.0]).astype(complex)
    e_21 = np.zeros((3, 3), dtype=complex)
    e_21[1, 0] = 1.0
    ops = [
        np.sqrt(params.gamma_p) * e_1e,
        np.sqrt(2.0 * params.gamma_phi) * e_ee,
        np.sqrt(params.gamma_th) * e_e1,
        np.sqrt(params.gamma_th) * e_1e,
        np.sqrt(params.gamma_n) * e_22,
        np.sqrt(params.gamma_rep) * e_21,
    ]
    return ops


def equations_of_motion(params: LambdaParams, state: SystemState):
    """(dalpha/dt, drho/dt) of the mean-field model.

    Reference implementation in matrix form; the compiled kernel used by the
    solvers is cross-checked against this in the tests.
    """
    alpha = state.alpha
    rho = state.rho
    h = mean_field_hamiltonian(params, alpha)
    drho = -1j * (h @ rho - rho @ h)
    for op in lindblad_ops(params):
        opd = op.conj().T
        anti = opd @ op
        drho += op @ rho @ opd - 0.5 * (anti @ rho + rho @ anti)
    dalpha = (-(1j * params.delta + 0.5 * params.kappa) * alpha
              + params.drive_j
              - 1j * params.g_s * params.n_spins * state.sigma_1e)
    return dalpha, drho


def _pack(params: LambdaParams, state: SystemState):
    pm = params.member_row()[None, :]
    x = _core.pack_state(state.alpha, [state.rho])
    return x, params.delta, params.kappa, params.drive_j, pm


def _unpack(x) -> SystemState:
    return SystemState(alpha=_core.pack_alpha(x), rho=_core.member_rho(x, 0))


def _empty_cavity_alpha(params: LambdaParams):
    return params.drive_j / (1j * params.delta + 0.5 * params.kappa)


def _linear_response_guess(params: LambdaParams) -> SystemState:
    """Fully polarized spin with the two-level linear-response cavity field.

    Good enough to keep Newton in the physical basin; the EIT correction is
    left to the iteration itself.
    """
    chi = 1.0 / (1j * params.delta_s + 0.5 * params.gamma)
    denom = (1j * params.delta + 0.5 * params.kappa
             + params.g_s**2 * params.n_spins * chi)
    alpha = params.drive_j / denom
    rho = np.zeros((3, 3), dtype=complex)
    rho[0, 0] = 1.0
    rho[2, 0] = -1j * params.g_s * alpha * chi
    rho[0, 2] = np.conj(rho[2, 0])
    return SystemState(alpha=alpha, rho=rho)


def integrate(params: LambdaParams, initial: SystemState, t_final,
              n_samples=2000, rtol=1e-9, atol=1e-12,
              extract_beat=False) -> TimeTrace:
    """Adaptive explicit integration, sampled on a uniform grid."""
    if t_final <= 0:
        raise ValueError("t_final must be positive")
    x0, delta, kappa, drive_j, pm = _pack(params, initial)
    times = np.linspace(t_final / n_samples, t_final, n_samples)
    samples, status = _core.integrate_sampled(
        x0, times, delta, kappa, drive_j, pm, rtol, atol
    )
    if status == _core.STATUS_STIFF:
        raise _core.StiffTrajectoryError(
            f"stiff trajectory: step underflow (t_final={t_final:g} s, "
            f"kappa={kappa:g} rad/s)"
        )
    alpha = samples[:, 0] + 1j * samples[:, 1]
    rho = np.array([_core.member_rho(s, 0) for s in samples])
    beat = beat_frequency(times, alpha) if extract_beat else None
    return TimeTrace(times=times, alpha=alpha, rho=rho, beat_frequency=beat)


def beat_frequency(times, alpha):
    """Dominant nonzero spectral line of Im(alpha), final half of the trace.

    Uses a Hann window and parabolic peak interpolation; returns rad/s or
    None when no line stands above the mean floor.
    """
    n = times.size // 2
    y = np.imag(alpha[n:])
    y = y - np.mean(y)
    dt = times[1] - times[0]
    win = np.hanning(y.size)
    spec = np.abs(np.fft.rfft(y * win))
    freqs = np.fft.rfftfreq(y.size, d=dt)
    spec[:2] = 0.0  # exclude zero frequency
    k = int(np.argmax(spec))
    if spec[k] < 10.0 * np.mean(spec[2:]) or k == 0:
        return None
    if 0 < k < spec.size - 1:
        a, b, c = spec[k - 1], spec[k], spec[k + 1]
        denom = a - 2 * b + c
        shift = 0.5 * (a - c) / denom if denom != 0 else 0.0
    else:
        shift = 0.0
    return TWO_PI * float(freqs[k] + shift * (freqs[1] - freqs[0]))


def _classification_threshold(params: LambdaParams):
    return 1e-8 * max(params.kappa, params.gamma)


def reference_sigma_1e(params: LambdaParams):
    """|sigma_1e| of the undriven (omega_2 = 0) system, for the EIT band."""
    ref = replace(params, omega_2=0.0)
    x0, delta, kappa, drive_j, pm = _pack(ref, _linear_response_guess(ref))
    x, _res, ok = _core.newton_fixed_point(x0, delta, kappa, drive_j, pm)
    if not ok or not _core.is_physical(x):
        x, _res, _ok = _core.relax_then_newton(
            x0, delta, kappa, drive_j, pm, horizon=50.0 / max(params.gamma_n, 1.0))
    return abs(_core.member_rho(x, 0)[2, 0])


def classify_regime(solution: SteadyStateSolution,
                    sigma_1e_ref=None) -> Regime:
    """Regime tag from the Jacobian spectrum and the sign of Im(sigma_1e)."""
    params = solution.params
    if np.max(solution.jacobian_eigs.real) > _classification_threshold(params):
        return Regime.OSCILLATION
    im = solution.state.sigma_1e.imag
    if params.omega_2 > 0:
        ref = sigma_1e_ref if sigma_1e_ref is not None else reference_sigma_1e(params)
        if abs(im) <= TOL_EIT * ref:
            return Regime.PERFECT_EIT
    return Regime.EIT if im < 0 else Regime.MWI


def solve_steady_state(params: LambdaParams, initial_guess=None,
                       sigma_1e_ref=None, classify=True) -> SteadyStateSolution:
    """Newton solve of the fixed point with an integration fallback."""
    if initial_guess is None:
        initial_guess = _linear_response_guess(params)
    x0, delta, kappa, drive_j, pm = _pack(params, initial_guess)
    x, res, ok = _core.newton_fixed_point(x0, delta, kappa, drive_j, pm)
    if not ok or not _core.is_physical(x):
        horizon = 50.0 / max(params.gamma_n, params.gamma_th, 1e-3)
        x, res, ok = _core.relax_then_newton(
            x0, delta, kappa, drive_j, pm, horizon=horizon)
    jac = _core.jacobian_fd(x, delta, kappa, drive_j, pm)
    eigs = np.linalg.eigvals(jac)
    unstable = np.max(eigs.real) > _classification_threshold(params)
    # residuals within a few decades of the Newton target are fixed points
    # to working precision; only genuine non-convergence is an error
    if not ok and res > 1e-8 and not unstable:
        raise _core.NoAttractorError(
            f"no attractor: Newton residual {res:.2e} and relaxation both failed"
        )
    state = _unpack(x)
    if drive_j > 0:
        alpha0 = params.kappa_c1 * state.alpha / drive_j
    else:
        alpha0 = 0.0j
    sol = SteadyStateSolution(
        state=state, residual=res, jacobian_eigs=eigs,
        regime=Regime.OSCILLATION, alpha0=alpha0, r=-1.0 + alpha0,
        params=params,
    )
    if classify:
        regime = classify_regime(sol, sigma_1e_ref=sigma_1e_ref)
        sol = replace(sol, regime=regime)
    return sol


def perfect_eit_curve(params: LambdaParams, p_dbm_grid,
                      omega2_bounds_hz=(1.0, 1e6), rel_tol=1e-3,
                      omega_d=TWO_PI * 2.87e9):
    """Root of Im(sigma_1e)(omega_2) at each probe power, by bisection.

    Returns a list of (p_dbm, omega_2_star) pairs; powers where the bracket
    holds no sign change are skipped with a warning.
    """

    def im_sigma(p_dbm, omega2):
        p = replace(params, omega_2=omega2,
                    drive_j=power_to_drive(p_dbm, params.kappa_c1, omega_d))
        sol = solve_steady_state(p, classify=False)
        return sol.state.sigma_1e.imag

    out = []
    lo0 = TWO_PI * omega2_bounds_hz[0]
    hi0 = TWO_PI * omega2_bounds_hz[1]
    for p_dbm in p_dbm_grid:
        lo, hi = lo0, hi0
        flo = im_sigma(p_dbm, lo)
        fhi = im_sigma(p_dbm, hi)
        if flo * fhi > 0:
            warnings.warn(
                f"perfect_eit_curve: no sign change at P={p_dbm} dBm, skipped",
                stacklevel=2,
            )
            continue
        while (hi - lo) / hi > rel_tol:
            mid = np.sqrt(lo * hi)
            fm = im_sigma(p_dbm, mid)
            if flo * fm <= 0:
                hi, fhi = mid, fm
            else:
                lo, flo = mid, fm
        out.append((float(p_dbm), float(0.5 * (lo + hi))))
    return out

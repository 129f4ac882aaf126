"""Several spin subensembles sharing one cavity mode.

Covers the hyperfine subpopulations used for electron-spin comagnetometry
and the four crystallographic NV axes used for vector rotation sensing.
Each member is a full lambda (or driveless two-level) subensemble; the
cavity sees the weighted sum of their 1e coherences.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import _core
from .constants import TWO_PI, power_to_drive
from .lambda_dynamics import (
    LambdaParams,
    Regime,
    SystemState,
    _classification_threshold,
    solve_steady_state,
)

MODE_LAMBDA = "LAMBDA"
MODE_TWO_LEVEL = "TWO_LEVEL"


@dataclass(frozen=True)
class Member:
    """One subensemble: spin parameters plus its share of the total ensemble.

    weight scales the effective spin number (params.n_spins * weight);
    nv_axis is the crystallographic axis unit vector used for vector
    reconstruction.
    """

    params: LambdaParams
    weight: float = 1.0
    nv_axis: tuple = (0.0, 0.0, 1.0)
    mode: str = MODE_LAMBDA
    label: str = ""

    def __post_init__(self):
        if self.weight <= 0:
            raise ValueError("member weight must be positive")
        if self.mode not in (MODE_LAMBDA, MODE_TWO_LEVEL):
            raise ValueError(f"unknown member mode {self.mode!r}")
        if self.mode == MODE_TWO_LEVEL and self.params.omega_2 != 0.0:
            raise ValueError("two-level member cannot carry a drive")

    @property
    def n_eff(self):
        return self.params.n_spins * self.weight


@dataclass(frozen=True)
class EnsembleSet:
    """Shared cavity plus a tuple of members."""

    members: tuple
    delta: float = 0.0
    kappa_c: float = TWO_PI * 0.5e6
    kappa_c1: float = TWO_PI * 0.5e6
    drive_j: float = 0.0

    def __post_init__(self):
        if len(self.members) == 0:
            raise ValueError("ensemble set needs at least one member")
        object.__setattr__(self, "members", tuple(self.members))

    @property
    def kappa(self):
        return self.kappa_c + self.kappa_c1

    @property
    def total_cooperativity(self):
        g2n = sum(m.params.g_s**2 * m.n_eff for m in self.members)
        return 4.0 * g2n / (self.kappa * max(m.params.gamma for m in self.members))

    def member_matrix(self):
        pm = np.empty((len(self.members), _core.PM_NCOLS))
        for i, m in enumerate(self.members):
            pm[i] = m.params.member_row()
            pm[i, _core.PM_GN] = m.params.g_s * m.n_eff
        return pm


def single_member_set(params: LambdaParams) -> EnsembleSet:
    """Wrap one LambdaParams as a set; the M=1 solve reduces exactly."""
    return EnsembleSet(
        members=(Member(params=params),),
        delta=params.delta, kappa_c=params.kappa_c,
        kappa_c1=params.kappa_c1, drive_j=params.drive_j,
    )


@dataclass(frozen=True)
class MultiSolution:
    alpha: complex
    states: tuple          # per-member SystemState
    residual: float
    jacobian_eigs: np.ndarray
    alpha0: complex
    r: complex
    oscillating: bool
    ensemble: EnsembleSet


def _collective_chi(es: EnsembleSet):
    acc = 0.0j
    for m in es.members:
        acc += m.params.g_s**2 * m.n_eff / (
            1j * m.params.delta_s + 0.5 * m.params.gamma)
    return acc


def _initial_guess(es: EnsembleSet):
    alpha = es.drive_j / (1j * es.delta + 0.5 * es.kappa + _collective_chi(es))
    rhos = []
    for m in es.members:
        rho = np.zeros((3, 3), dtype=complex)
        rho[0, 0] = 1.0
        chi = 1.0 / (1j * m.params.delta_s + 0.5 * m.params.gamma)
        rho[2, 0] = -1j * m.params.g_s * alpha * chi
        rho[0, 2] = np.conj(rho[2, 0])
        rhos.append(rho)
    return _core.pack_state(alpha, rhos)


def solve_multi_steady_state(es: EnsembleSet, initial=None) -> MultiSolution:
    """Fixed point of the coupled cavity + M-member system."""
    pm = es.member_matrix()
    x0 = _initial_guess(es) if initial is None else initial
    x, res, ok = _core.newton_fixed_point(x0, es.delta, es.kappa, es.drive_j, pm)
    if not ok or not _core.is_physical(x):
        gmin = min(max(m.params.gamma_n, m.params.gamma_th, 1e-3)
                   for m in es.members)
        x, res, ok = _core.relax_then_newton(
            x0, es.delta, es.kappa, es.drive_j, pm, horizon=50.0 / gmin)
    jac = _core.jacobian_fd(x, es.delta, es.kappa, es.drive_j, pm)
    eigs = np.linalg.eigvals(jac)
    thr = max(_classification_threshold(m.params) for m in es.members)
    oscillating = bool(np.max(eigs.real) > thr)
    if not ok and res > 1e-8 and not oscillating:
        raise _core.NoAttractorError(
            f"no attractor for {len(es.members)}-member set, residual {res:.2e}")
    alpha = _core.pack_alpha(x)
    states = tuple(
        SystemState(alpha=alpha, rho=_core.member_rho(x, i))
        for i in range(len(es.members))
    )
    alpha0 = es.kappa_c1 * alpha / es.drive_j if es.drive_j > 0 else 0.0j
    return MultiSolution(
        alpha=alpha, states=states, residual=res, jacobian_eigs=eigs,
        alpha0=alpha0, r=-1.0 + alpha0, oscillating=oscillating, ensemble=es,
    )


def collective_coupling(member: Member) -> float:
    """Vacuum Rabi gap contribution 2 g sqrt(N_eff) of one member (rad/s)."""
    return 2.0 * member.params.g_s * np.sqrt(member.n_eff)


# --- weak second tone ------------------------------------------------------

@dataclass(frozen=True)
class SecondToneResponse:
    detunings: np.ndarray    # rad/s offsets from the main probe
    r2: np.ndarray           # complex reflection of the auxiliary tone
    omega_r: float
    delta_t: float
    p2_dbm: float


def _linear_response_alpha(es: EnsembleSet, sol: MultiSolution, deltas, j2):
    """Complex auxiliary-tone cavity amplitude per offset, from the
    linearization of the real-vectorized generator at the fixed point."""
    pm = es.member_matrix()
    x = _core.pack_state(sol.alpha, [s.rho for s in sol.states])
    a = _core.jacobian_fd(x, es.delta, es.kappa, es.drive_j, pm)
    n = a.shape[0]
    b = np.zeros(n, dtype=complex)
    # forcing f(t) = Re(B e^{-i delta t}) with complex drive j2 e^{-i delta t}
    # entering d(alpha)/dt: B_Re = j2, B_Im = -i j2
    b[0] = j2
    b[1] = -1j * j2
    out = np.empty(len(deltas), dtype=complex)
    eye = np.eye(n)
    for i, d in enumerate(deltas):
        mat = -1j * d * eye - a
        try:
            xx = np.linalg.solve(mat, b)
        except np.linalg.LinAlgError:
            # undriven members carry a marginal population mode (their |2>
            # occupation is conserved); it is not excited by cavity forcing,
            # so the minimum-norm solution is the physical one
            xx = np.linalg.lstsq(mat, b, rcond=None)[0]
        out[i] = 0.5 * (xx[0] + 1j * xx[1])
    return out


def second_tone_response(es: EnsembleSet, sol: MultiSolution, deltas,
                         p2_dbm=-40.0, omega_r=0.0, delta_t=0.0,
                         omega_d=TWO_PI * 2.87e9) -> SecondToneResponse:
    """Reflection of a weak auxiliary tone at offsets `deltas` (rad/s).

    Linear response around the operating point; each complex variable and
    its conjugate are handled through the real-vectorized generator, so the
    result includes the spin-mediated mixing of both sidebands.
    """
    if sol.oscillating:
        raise ValueError("linear response undefined on limit cycle")
    j2 = power_to_drive(p2_dbm, es.kappa_c1, omega_d)
    deltas = np.asarray(deltas, dtype=float)
    u = _linear_response_alpha(es, sol, deltas, j2)
    r2 = -1.0 + es.kappa_c1 * u / j2
    return SecondToneResponse(detunings=deltas, r2=r2, omega_r=omega_r,
                              delta_t=delta_t, p2_dbm=p2_dbm)


def second_tone_slope(es: EnsembleSet, delta, p2_dbm=-40.0,
                      h=None, member_index=None, omega_d=TWO_PI * 2.87e9):
    """d Im(r2)/d Delta_s at auxiliary offset `delta` by central difference.

    Shifts the electron detuning of all members (or one, if member_index is
    given); this is the comagnetometer transfer function.
    """
    if h is None:
        h = 0.01 * min(m.params.gamma for m in es.members)

    def imr2(shift):
        members = []
        for i, m in enumerate(es.members):
            if member_index is None or i == member_index:
                members.append(replace(
                    m, params=replace(m.params,
                                      delta_s=m.params.delta_s + shift)))
            else:
                members.append(m)
        es2 = replace(es, members=tuple(members))
        sol2 = solve_multi_steady_state(es2)
        resp = second_tone_response(es2, sol2, [delta], p2_dbm=p2_dbm,
                                    omega_d=omega_d)
        return resp.r2[0].imag

    return (imr2(h) - imr2(-h)) / (2.0 * h)


# --- auxiliary-tone degradation -------------------------------------------

def stark_shifted_params(params: LambdaParams, omega_r, delta_t) -> LambdaParams:
    """Time-averaged effect of an off-resonant auxiliary tone on one member.

    The tone at detuning delta_t from the cavity-coupled transition shifts
    |e> by omega_r^2/(4 delta_t) and scatters at ~ gamma * omega_r^2 /
    (4 delta_t^2), which feeds extra dephasing into the narrow two-photon
    line.
    """
    if omega_r == 0.0:
        return params
    if delta_t == 0.0:
        raise ValueError("degenerate tones: delta_t = 0 with omega_r > 0")
    shift = omega_r**2 / (4.0 * delta_t)
    sat = omega_r**2 / (4.0 * delta_t**2)
    return replace(
        params,
        delta_s=params.delta_s + shift,
        gamma_n=params.gamma_n + 2.0 * params.gamma * sat,
    )


def eit_degradation(params: LambdaParams, omega_r, delta_t,
                    eta_of_params) -> float:
    """Relative sensitivity change (eta_with - eta_without)/eta_without.

    eta_of_params: callable LambdaParams -> eta, supplied by the sensing
    layer so this module stays free of noise-model knowledge.
    """
    eta0 = eta_of_params(params)
    eta1 = eta_of_params(stark_shifted_params(params, omega_r, delta_t))
    return (eta1 - eta0) / eta0


# --- comagnetometer set ----------------------------------------------------

def build_comag_set(base: LambdaParams, c_each=10.0,
                    offsets_hz=(0.0, -2.16e6, -4.32e6),
                    drive_on=False, delta=0.0, drive_j=None) -> EnsembleSet:
    """Three hyperfine subensembles sharing the cavity.

    Member 0 is the driven lambda subensemble; members 1 and 2 are the
    neighbouring electron transitions (two-level, offset by the hyperfine
    splitting).  The three are one physical ensemble, so with the drive on
    the nuclear populations of the lambda member set the weights of the
    transitions that share its nuclear states: the transition fed by |1>
    keeps ~all of its weight while the one fed by |2> is depleted.
    """
    n_each = c_each * base.kappa * base.gamma / (4.0 * base.g_s**2)
    w1, w2 = 1.0, 1.0
    lam = replace(base, n_spins=n_each,
                  omega_2=base.omega_2 if drive_on else 0.0)
    if drive_on:
        lam_sol = solve_steady_state(lam, classify=False)
        rho = lam_sol.state.rho
        p11 = rho[0, 0].real + rho[2, 2].real
        p22 = rho[1, 1].real
        tot = p11 + p22
        # transitions fed by |1> and |2> respectively; small floor keeps the
        # depleted crossing visible
        w1 = max(2.0 * p11 / tot, 1e-3)
        w2 = max(2.0 * p22 / tot, 1e-3)
    members = [
        Member(params=lam, weight=1.0, mode=MODE_LAMBDA, label="eit"),
        Member(params=replace(base, n_spins=n_each, omega_2=0.0,
                              delta_s=base.delta_s + TWO_PI * offsets_hz[1]),
               weight=w1, mode=MODE_TWO_LEVEL, label="1+"),
        Member(params=replace(base, n_spins=n_each, omega_2=0.0,
                              delta_s=base.delta_s + TWO_PI * offsets_hz[2]),
               weight=w2, mode=MODE_TWO_LEVEL, label="2+"),
    ]
    return EnsembleSet(members=tuple(members), delta=delta,
                       kappa_c=base.kappa_c, kappa_c1=base.kappa_c1,
                       drive_j=base.drive_j if drive_j is None else drive_j)


def reflection_map(es: EnsembleSet, probe_offsets, spin_offsets):
    """|r|^2 over (probe detuning, electron frequency offset).

    The probe axis moves all detunings together; the spin axis moves only
    the electron frequencies.
    """
    out = np.empty((len(spin_offsets), len(probe_offsets)))
    row_seed = None
    for i, ds in enumerate(spin_offsets):
        seed = row_seed
        for j, dp in enumerate(probe_offsets):
            members = tuple(
                replace(m, params=replace(
                    m.params,
                    delta_s=m.params.delta_s + ds - dp,
                    delta_2=m.params.delta_2 - dp))
                for m in es.members
            )
            es2 = replace(es, members=members, delta=es.delta - dp)
            # continuation along the row keeps Newton on the physical branch
            try:
                sol = solve_multi_steady_state(es2, initial=seed)
            except _core.NoAttractorError:
                sol = solve_multi_steady_state(es2)
            out[i, j] = abs(sol.r) ** 2
            seed = _core.pack_state(sol.alpha, [s.rho for s in sol.states])
            if j == 0:
                row_seed = seed
    return out


# --- vector operation ------------------------------------------------------

def build_vector_set(base: LambdaParams, offsets_hz=(-1.2e6, -0.4e6, 0.4e6, 1.2e6),
                     axes=None) -> EnsembleSet:
    """Four driven lambda members at staggered common-mode offsets, one per
    NV crystallographic axis."""
    from .nv_structure import tetrahedral_axes
    if axes is None:
        axes = tetrahedral_axes()
    if len(offsets_hz) != len(axes):
        raise ValueError("need one common-mode offset per axis")
    n_each = base.n_spins / len(axes)
    members = []
    for off, ax in zip(offsets_hz, axes):
        # each member's drive is tuned so its two-photon resonance sits at
        # its own probe offset
        p = replace(base, n_spins=n_each,
                    delta_s=base.delta_s + TWO_PI * off,
                    delta_2=base.delta_2 + TWO_PI * off)
        members.append(Member(params=p, nv_axis=tuple(ax), mode=MODE_LAMBDA))
    return EnsembleSet(members=tuple(members), delta=base.delta,
                       kappa_c=base.kappa_c, kappa_c1=base.kappa_c1,
                       drive_j=base.drive_j)


@dataclass(frozen=True)
class CrosstalkMatrix:
    m: np.ndarray            # volts per Hz of member difference-mode shift
    probe_offsets: np.ndarray
    condition_number: float

    def max_relative_crosstalk(self):
        r = 0.0
        for i in range(self.m.shape[0]):
            for j in range(self.m.shape[1]):
                if i != j and self.m[i, i] != 0:
                    r = max(r, abs(self.m[i, j] / self.m[i, i]))
        return r


def _probe_shifted(es: EnsembleSet, dp):
    members = tuple(
        replace(m, params=replace(m.params,
                                  delta_s=m.params.delta_s - dp,
                                  delta_2=m.params.delta_2 - dp))
        for m in es.members
    )
    return replace(es, members=members, delta=es.delta - dp)


def _im_r_at_probe(es: EnsembleSet, dp, dd_shifts):
    """Im(r) with the probe moved to offset dp and per-member difference-mode
    shifts dd_shifts applied to the drive two-photon detunings."""
    es2 = _probe_shifted(es, dp)
    members = tuple(
        replace(m, params=replace(m.params,
                                  delta_2=m.params.delta_2 + dd))
        for m, dd in zip(es2.members, dd_shifts)
    )
    sol = solve_multi_steady_state(replace(es2, members=members))
    return sol.r.imag


def crosstalk_matrix(es: EnsembleSet, probe_offsets=None, fd_step=None,
                     volts=1.0) -> CrosstalkMatrix:
    """M_ij = volts * d Im r(probe i) / d Delta_D(member j), per Hz.

    probe i sits at member i's common-mode offset; the derivative is a
    central difference in the member's two-photon detuning.
    """
    mcount = len(es.members)
    if probe_offsets is None:
        probe_offsets = [m.params.delta_s for m in es.members]
    probe_offsets = np.asarray(probe_offsets, dtype=float)
    if fd_step is None:
        fd_step = 0.1 * min(m.params.gamma_n for m in es.members)
    m_out = np.empty((mcount, mcount))
    for j in range(mcount):
        for i in range(mcount):
            dd = np.zeros(mcount)
            dd[j] = fd_step
            up = _im_r_at_probe(es, probe_offsets[i], dd)
            dn = _im_r_at_probe(es, probe_offsets[i], -dd)
            # per Hz of member shift: derivative in rad/s times 2 pi
            m_out[i, j] = volts * TWO_PI * (up - dn) / (2.0 * fd_step)
    cond = float(np.linalg.cond(m_out))
    return CrosstalkMatrix(m=m_out, probe_offsets=probe_offsets,
                           condition_number=cond)


def project_rotation(rotation, axes):
    """Per-axis difference-mode shifts of a rotation vector (rad/s each)."""
    axes = np.asarray(axes, dtype=float)
    return -axes @ np.asarray(rotation, dtype=float)


def reconstruct_rotation(shifts, axes, crosstalk: CrosstalkMatrix | None = None):
    """Least-squares rotation vector from per-axis difference-mode readings.

    With a crosstalk matrix, `shifts` are raw probe readings (volts) that
    are first mapped back to member shifts via the inverse matrix.
    """
    axes = np.asarray(axes, dtype=float)
    if axes.shape[0] < 3 or np.linalg.matrix_rank(axes) < 3:
        raise ValueError("rotation reconstruction needs >= 3 non-coplanar axes")
    d = np.asarray(shifts, dtype=float)
    if crosstalk is not None:
        if not np.isfinite(crosstalk.condition_number) or \
                crosstalk.condition_number > 1e12:
            raise ValueError(
                f"crosstalk matrix singular (cond={crosstalk.condition_number:.3g})")
        # solve gives Hz of member shift; convert to rad/s
        d = TWO_PI * np.linalg.solve(crosstalk.m, d)
    sol, _res, rank, _sv = np.linalg.lstsq(-axes, d, rcond=None)
    if rank < 3:
        raise ValueError("rotation reconstruction needs >= 3 non-coplanar axes")
    return sol


def comagnetometer_correct(delta_d_raw, delta_e_measured, gamma_n, gamma_e):
    """Remove the magnetically-induced part of the difference-mode shift.

    The electron transition measures gamma_e * B; the nuclear line picks up
    gamma_n * B from the same field, so the correction is a fixed ratio.
    """
    return delta_d_raw - (gamma_n / gamma_e) * delta_e_measured

"""Gyroscope figures of merit.

Turns reflection steady states into signal slope, noise-limited
sensitivity, the standard quantum limit, and the power/drive and
cooperativity sweeps used to pick operating points.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .constants import KB, TWO_PI, power_to_drive, rad_s_to_mdeg_s
from .lambda_dynamics import (
    LambdaParams,
    Regime,
    default_params,
    solve_steady_state,
)

__all__ = [
    "NoiseModel", "SensitivityReport", "SweepResult", "SlopeError",
    "signal_slope", "dynamic_range", "sensitivity", "eta_for_params",
    "sweep_power_drive", "sweep_cooperativity", "power_to_drive",
]


class SlopeError(RuntimeError):
    """Finite-difference slope did not converge; carries both estimates."""

    def __init__(self, msg, coarse, fine):
        super().__init__(msg)
        self.coarse = coarse
        self.fine = fine


@dataclass(frozen=True)
class NoiseModel:
    """Johnson-Nyquist-limited voltage noise of the readout chain."""

    temperature: float = 300.0   # K
    impedance: float = 50.0      # ohm
    xi: float = 0.45             # spin-refrigeration prefactor

    def __post_init__(self):
        if not (0.0 < self.xi <= 1.0):
            raise ValueError("xi must be in (0, 1]")
        if self.temperature <= 0 or self.impedance <= 0:
            raise ValueError("temperature and impedance must be positive")

    @property
    def l_jn(self):
        """Johnson-Nyquist voltage density sqrt(4 kB T Z), V/sqrt(Hz)."""
        return math.sqrt(4.0 * KB * self.temperature * self.impedance)

    @property
    def l_total(self):
        return self.xi * self.l_jn


def probe_voltage(p_dbm, impedance=50.0):
    """rms voltage of a P dBm probe into the given impedance."""
    p_watt = 1e-3 * 10.0 ** (p_dbm / 10.0)
    return math.sqrt(p_watt * impedance)


def sql_limit(n_spins, t2_star):
    """Standard quantum limit 1/sqrt(N T2*), rad/s/sqrt(Hz)."""
    return 1.0 / math.sqrt(n_spins * t2_star)


@dataclass(frozen=True)
class SensitivityReport:
    s_v_per_hz: float         # V per Hz of difference-mode shift
    voltage: float            # probe rms voltage, V
    eta_rad: float            # rad/s/sqrt(Hz)
    eta_sql_rad: float
    dynamic_range_hz: float | None = None

    @property
    def eta_mdeg(self):
        return rad_s_to_mdeg_s(self.eta_rad)

    @property
    def eta_deg(self):
        return rad_s_to_mdeg_s(self.eta_rad) / 1e3

    @property
    def eta_sql_mdeg(self):
        return rad_s_to_mdeg_s(self.eta_sql_rad)

    @property
    def sigma_n(self):
        """Inverse readout fidelity eta / eta_SQL."""
        return self.eta_rad / self.eta_sql_rad


def _im_r(params: LambdaParams, dd_shift, path="delta2"):
    """Im(r) with a difference-mode shift applied (rad/s).

    path 'delta2' adds the shift to the drive two-photon detuning directly;
    path 'splitting' shifts the bare nuclear splitting the drive is
    referenced to, which moves the detuning the opposite way with the sign
    of a rotation-induced shift.  Both describe the same physical offset.
    """
    if path == "delta2":
        p = replace(params, delta_2=params.delta_2 + dd_shift)
    elif path == "splitting":
        p = replace(params, delta_2=params.delta_2 - (-dd_shift))
    else:
        raise ValueError(f"unknown difference-mode path {path!r}")
    sol = solve_steady_state(p, classify=False)
    return sol.r.imag


def signal_slope(params: LambdaParams, p_dbm, fd_step=None, path="delta2",
                 im_r=None):
    """Signal slope S = V dIm(r)/dDelta_D in volts per Hz.

    Central finite difference in the difference-mode detuning, checked by
    Richardson halving: the half-step estimate must agree within 1%.
    `im_r(params, shift, path)` can override the reflection evaluation
    (used by multi-member callers).
    """
    if fd_step is None:
        fd_step = params.gamma_n / 40.0
    if not (params.gamma_n / 100.0 <= fd_step <= params.gamma_n / 4.0):
        raise ValueError("fd_step outside [gamma_n/100, gamma_n/4]")
    f = _im_r if im_r is None else im_r

    def slope(h):
        return (f(params, h, path) - f(params, -h, path)) / (2.0 * h)

    coarse = slope(fd_step)
    fine = slope(fd_step / 2.0)
    if abs(fine) > 0 and abs(fine - coarse) > 0.01 * abs(fine):
        raise SlopeError(
            f"difference quotient not converged: {coarse:.6e} vs {fine:.6e}",
            coarse, fine)
    v = probe_voltage(p_dbm)
    # internal detunings are rad/s; report per Hz of shift
    return v * TWO_PI * fine


def dynamic_range(params: LambdaParams, p_dbm, fd_step=None, n_points=81,
                  span_factor=1.0):
    """Width of the Delta_D interval where S stays within 10% of its
    center value (Hz)."""
    if fd_step is None:
        fd_step = params.gamma_n / 40.0
    s0 = signal_slope(params, p_dbm, fd_step)
    half = span_factor * params.gamma_n / TWO_PI  # Hz, one-sided scan
    offsets = np.linspace(-half, half, n_points)
    ok = np.zeros(n_points, dtype=bool)
    for i, off in enumerate(offsets):
        p = replace(params, delta_2=params.delta_2 + TWO_PI * off)
        try:
            s = signal_slope(p, p_dbm, fd_step)
        except (SlopeError, RuntimeError):
            continue
        ok[i] = abs(s - s0) <= 0.1 * abs(s0)
    ic = n_points // 2
    lo = ic
    while lo > 0 and ok[lo - 1]:
        lo -= 1
    hi = ic
    while hi < n_points - 1 and ok[hi + 1]:
        hi += 1
    return offsets[hi] - offsets[lo]


def sensitivity(s_v_per_hz, p_dbm, noise: NoiseModel,
                n_spins, gamma_n, dynamic_range_hz=None) -> SensitivityReport:
    """Noise-limited rotation sensitivity from a per-Hz signal slope."""
    if s_v_per_hz == 0.0:
        raise ZeroDivisionError("zero signal slope: infinite sensitivity")
    # L/S gives Hz/sqrt(Hz) of frequency resolution; 2 pi converts to rad/s
    eta_rad = TWO_PI * noise.l_total / abs(s_v_per_hz)
    t2_star = 2.0 / gamma_n
    return SensitivityReport(
        s_v_per_hz=s_v_per_hz,
        voltage=probe_voltage(p_dbm, noise.impedance),
        eta_rad=eta_rad,
        eta_sql_rad=sql_limit(n_spins, t2_star),
        dynamic_range_hz=dynamic_range_hz,
    )


def eta_for_params(params: LambdaParams, p_dbm, noise: NoiseModel | None = None,
                   fd_step=None, im_r=None):
    """Convenience: eta in rad/s/sqrt(Hz) at one operating point."""
    noise = noise or NoiseModel()
    s = signal_slope(params, p_dbm, fd_step=fd_step, im_r=im_r)
    rep = sensitivity(s, p_dbm, noise, params.n_spins, params.gamma_n)
    return rep.eta_rad


# --- sweeps ---------------------------------------------------------------

@dataclass(frozen=True)
class SweepCell:
    p_dbm: float
    omega_2: float
    regime: str
    eta_rad: float | None
    s_v_per_hz: float | None
    alpha0: complex
    error: str | None = None


@dataclass(frozen=True)
class SweepResult:
    p_grid: np.ndarray
    omega2_grid: np.ndarray
    cells: tuple              # row-major over (p, omega2)
    boundary: tuple           # (p_dbm, omega2) polyline of oscillation onset
    argmin: SweepCell | None
    c_grid: np.ndarray | None = None

    def cell(self, ip, iw):
        return self.cells[ip * len(self.omega2_grid) + iw]

    def eta_grid(self):
        out = np.full((len(self.p_grid), len(self.omega2_grid)), np.nan)
        for i in range(len(self.p_grid)):
            for j in range(len(self.omega2_grid)):
                c = self.cell(i, j)
                if c.eta_rad is not None:
                    out[i, j] = c.eta_rad
        return out


def _sweep_cell(args):
    base, p_dbm, omega2, noise = args
    params = replace(base, omega_2=omega2,
                     drive_j=power_to_drive(p_dbm, base.kappa_c1))
    try:
        sol = solve_steady_state(params)
    except Exception as exc:  # per-cell failures recorded, sweep continues
        return SweepCell(p_dbm=p_dbm, omega_2=omega2, regime="FAILED",
                         eta_rad=None, s_v_per_hz=None, alpha0=0j,
                         error=str(exc))
    if sol.regime is Regime.OSCILLATION:
        return SweepCell(p_dbm=p_dbm, omega_2=omega2,
                         regime=sol.regime.name, eta_rad=None,
                         s_v_per_hz=None, alpha0=sol.alpha0)
    try:
        s = signal_slope(params, p_dbm)
        rep = sensitivity(s, p_dbm, noise, params.n_spins, params.gamma_n)
        eta, sv = rep.eta_rad, s
    except (SlopeError, ZeroDivisionError, RuntimeError) as exc:
        return SweepCell(p_dbm=p_dbm, omega_2=omega2,
                         regime=sol.regime.name, eta_rad=None,
                         s_v_per_hz=None, alpha0=sol.alpha0, error=str(exc))
    return SweepCell(p_dbm=p_dbm, omega_2=omega2, regime=sol.regime.name,
                     eta_rad=eta, s_v_per_hz=sv, alpha0=sol.alpha0)


def _run_cells(tasks, workers):
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_cell, tasks, chunksize=4))
    return [_sweep_cell(t) for t in tasks]


def _oscillation_boundary(cells, p_grid, omega2_grid):
    """Lowest oscillating omega_2 per power column, as a polyline."""
    nw = len(omega2_grid)
    poly = []
    for i, p in enumerate(p_grid):
        for j in range(nw):
            if cells[i * nw + j].regime == Regime.OSCILLATION.name:
                poly.append((float(p), float(omega2_grid[j])))
                break
    return tuple(poly)


def sweep_power_drive(base: LambdaParams, p_dbm_grid, omega2_grid,
                      noise: NoiseModel | None = None,
                      workers=1) -> SweepResult:
    """Regime and sensitivity over the (probe power, drive Rabi rate) plane.

    Cells are independent; results are merged in grid order so the output
    is identical for any worker count.
    """
    noise = noise or NoiseModel()
    p_dbm_grid = np.asarray(p_dbm_grid, dtype=float)
    omega2_grid = np.asarray(omega2_grid, dtype=float)
    if np.any(np.diff(p_dbm_grid) < 0) or np.any(np.diff(omega2_grid) < 0):
        raise ValueError("sweep grids must be sorted ascending")
    tasks = [(base, float(p), float(w), noise)
             for p in p_dbm_grid for w in omega2_grid]
    cells = _run_cells(tasks, workers)
    best = None
    for c in cells:
        if c.eta_rad is not None and (best is None or c.eta_rad < best.eta_rad):
            best = c
    return SweepResult(
        p_grid=p_dbm_grid, omega2_grid=omega2_grid, cells=tuple(cells),
        boundary=_oscillation_boundary(cells, p_dbm_grid, omega2_grid),
        argmin=best,
    )


@dataclass(frozen=True)
class CooperativityPoint:
    cooperativity: float
    best: SweepCell | None
    on_oscillation_boundary: bool


def params_at_cooperativity(base: LambdaParams, c):
    """Rescale the spin number so 4 g^2 N / (kappa Gamma) = c, leaving g_s
    and kappa in place."""
    n = c * base.kappa * base.gamma / (4.0 * base.g_s**2)
    return replace(base, n_spins=n)


def sweep_cooperativity(base: LambdaParams, c_grid, p_dbm_grid, omega2_grid,
                        noise: NoiseModel | None = None, workers=1):
    """Best eta per cooperativity over a (P, Omega_2) subgrid.

    Flags each C whose optimum sits adjacent to an oscillating cell.
    """
    noise = noise or NoiseModel()
    points = []
    for c in c_grid:
        sub = sweep_power_drive(params_at_cooperativity(base, c),
                                p_dbm_grid, omega2_grid, noise=noise,
                                workers=workers)
        on_edge = False
        if sub.argmin is not None:
            iw = int(np.argmin(np.abs(sub.omega2_grid - sub.argmin.omega_2)))
            ip = int(np.argmin(np.abs(sub.p_grid - sub.argmin.p_dbm)))
            for dj in (-1, 1):
                jj = iw + dj
                if 0 <= jj < len(sub.omega2_grid) and \
                        sub.cell(ip, jj).regime == Regime.OSCILLATION.name:
                    on_edge = True
        points.append(CooperativityPoint(
            cooperativity=float(c), best=sub.argmin,
            on_oscillation_boundary=on_edge))
    return tuple(points)


def loglog_slope(c_values, eta_values):
    """Least-squares slope of log(eta) against log(C)."""
    x = np.log(np.asarray(c_values, dtype=float))
    y = np.log(np.asarray(eta_values, dtype=float))
    return float(np.polyfit(x, y, 1)[0])

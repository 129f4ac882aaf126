"""Compiled kernels and shared numerics for the mean-field cavity-spin model.

State layout (real vector, length 2 + 8*M for M subensembles):

    x[0], x[1]            Re alpha, Im alpha
    per member m:         [r11, r22, Re u12, Im u12, Re u1e, Im u1e,
                           Re u2e, Im u2e]

where u_ij = <i|rho|j> on the basis (|1>, |2>, |e>) and ree = 1 - r11 - r22.
The coherence entering the cavity feedback is <sigma_1e> = tr(rho |1><e|)
= conj(u1e).

Member parameter rows (PM_* indices below) are all in rad/s except the
dimensionless g*N product.
"""

import numpy as np
from numba import njit

# member parameter column indices
PM_DELTA_S = 0
PM_DELTA_2 = 1
PM_G = 2
PM_GN = 3       # g_s * N (collective feedback prefactor)
PM_OMEGA2 = 4
PM_GAMMA_PT = 5  # gamma_p + gamma_th (|e> -> |1> total)
PM_GAMMA_UP = 6  # gamma_th (|1> -> |e>)
PM_GAMMA_PHI = 7
PM_GAMMA_N = 8
PM_GAMMA_REP = 9  # drive-induced |1> -> |2> repump rate
PM_NCOLS = 10

MEMBER_NREAL = 8

STATUS_OK = 0
STATUS_STIFF = 1


def state_size(n_members):
    return 2 + MEMBER_NREAL * n_members


@njit(cache=True)
def rhs(x, delta, kappa, drive_j, pm, out):
    """Time derivative of the packed real state; returns out."""
    a = complex(x[0], x[1])
    feed = 0.0j
    for m in range(pm.shape[0]):
        o = 2 + MEMBER_NREAL * m
        r11 = x[o + 0]
        r22 = x[o + 1]
        u12 = complex(x[o + 2], x[o + 3])
        u1e = complex(x[o + 4], x[o + 5])
        u2e = complex(x[o + 6], x[o + 7])
        ree = 1.0 - r11 - r22

        ds = pm[m, PM_DELTA_S]
        d2 = pm[m, PM_DELTA_2]
        g = pm[m, PM_G]
        om2 = pm[m, PM_OMEGA2]
        gpt = pm[m, PM_GAMMA_PT]
        gup = pm[m, PM_GAMMA_UP]
        gphi = pm[m, PM_GAMMA_PHI]
        gn = pm[m, PM_GAMMA_N]
        rep = pm[m, PM_GAMMA_REP]

        ga = g * a
        gac = g * np.conj(a)

        # M = H @ rho entries; [H, rho] = M - M^dagger for Hermitian H, rho
        m00 = gac * np.conj(u1e)
        m01 = gac * np.conj(u2e)
        m02 = gac * ree
        m10 = d2 * np.conj(u12) + om2 * np.conj(u1e)
        m11 = d2 * r22 + om2 * np.conj(u2e)
        m12 = d2 * u2e + om2 * ree
        m20 = ga * r11 + om2 * np.conj(u12) + ds * np.conj(u1e)
        m21 = ga * u12 + om2 * r22 + ds * np.conj(u2e)

        dr11 = 2.0 * m00.imag + gpt * ree - gup * r11 - rep * r11
        dr22 = 2.0 * m11.imag + rep * r11
        du12 = -1j * (m01 - np.conj(m10)) - 0.5 * (gup + gn + rep) * u12
        du1e = -1j * (m02 - np.conj(m20)) \
            - (0.5 * (gup + gpt + rep) + gphi) * u1e
        du2e = -1j * (m12 - np.conj(m21)) \
            - (0.5 * (gpt + gn) + gphi) * u2e

        out[o + 0] = dr11
        out[o + 1] = dr22
        out[o + 2] = du12.real
        out[o + 3] = du12.imag
        out[o + 4] = du1e.real
        out[o + 5] = du1e.imag
        out[o + 6] = du2e.real
        out[o + 7] = du2e.imag

        feed += pm[m, PM_GN] * np.conj(u1e)

    da = -(1j * delta + 0.5 * kappa) * a + drive_j - 1j * feed
    out[0] = da.real
    out[1] = da.imag
    return out


@njit(cache=True)
def jacobian_fd(x, delta, kappa, drive_j, pm):
    """Central finite-difference Jacobian of rhs at x."""
    n = x.size
    jac = np.empty((n, n))
    fp = np.empty(n)
    fm = np.empty(n)
    xp = x.copy()
    for i in range(n):
        scale = max(abs(x[i]), 1.0)
        h = 1e-7 * scale
        xi = x[i]
        xp[i] = xi + h
        rhs(xp, delta, kappa, drive_j, pm, fp)
        xp[i] = xi - h
        rhs(xp, delta, kappa, drive_j, pm, fm)
        xp[i] = xi
        for j in range(n):
            jac[j, i] = (fp[j] - fm[j]) / (2.0 * h)
    return jac


# Dormand-Prince RK45 tableau
_DP_C = np.array([0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0])
_DP_A = np.array([
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40, 9.0 / 40, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45, -56.0 / 15, 32.0 / 9, 0.0, 0.0, 0.0],
    [19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0.0, 0.0],
    [9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656, 0.0],
])
_DP_B5 = np.array([35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192,
                   -2187.0 / 6784, 11.0 / 84, 0.0])
_DP_B4 = np.array([5179.0 / 57600, 0.0, 7571.0 / 16695, 393.0 / 640,
                   -92097.0 / 339200, 187.0 / 2100, 1.0 / 40])


@njit(cache=True)
def integrate_sampled(x0, sample_times, delta, kappa, drive_j, pm,
                      rtol, atol):
    """Adaptive RK45 from t=0, recording the state at each sample time.

    Returns (samples, status): samples has shape (len(sample_times), n).
    """
    n = x0.size
    nk = 7
    k = np.empty((nk, n))
    xtmp = np.empty(n)
    x = x0.copy()
    t = 0.0
    out = np.empty((sample_times.size, n))

    t_end = sample_times[-1]
    h = min(1e-3 * t_end, 0.1 / max(kappa, 1.0))
    hmin = max(t_end * 1e-14, 1e-18)

    rhs(x, delta, kappa, drive_j, pm, k[0])
    isamp = 0
    while isamp < sample_times.size:
        t_next = sample_times[isamp]
        while t < t_next:
            if h < hmin:
                return out, STATUS_STIFF
            clipped = False
            if t + h >= t_next:
                h = t_next - t
                clipped = True
            # stages (FSAL: k[0] holds f(t, x))
            for s in range(1, 6):
                for j in range(n):
                    acc = 0.0
                    for q in range(s):
                        acc += _DP_A[s, q] * k[q][j]
                    xtmp[j] = x[j] + h * acc
                rhs(xtmp, delta, kappa, drive_j, pm, k[s])
            # 5th-order solution (b5[6] = 0 so stage 6 not needed for it)
            for j in range(n):
                acc = 0.0
                for q in range(6):
                    acc += _DP_B5[q] * k[q][j]
                xtmp[j] = x[j] + h * acc
            rhs(xtmp, delta, kappa, drive_j, pm, k[6])
            # error estimate
            err = 0.0
            for j in range(n):
                e4 = 0.0
                for q in range(7):
                    e4 += (_DP_B5[q] - _DP_B4[q]) * k[q][j]
                sc = atol + rtol * max(abs(x[j]), abs(xtmp[j]))
                r = h * e4 / sc
                err += r * r
            err = np.sqrt(err / n)
            if err <= 1.0:
                t = t + h
                for j in range(n):
                    x[j] = xtmp[j]
                for j in range(n):
                    k[0][j] = k[6][j]
                fac = 0.9 * err ** -0.2 if err > 1e-10 else 5.0
                if fac > 5.0:
                    fac = 5.0
                h = h * fac
                if clipped and t >= t_next:
                    break
            else:
                fac = 0.9 * err ** -0.2
                if fac < 0.1:
                    fac = 0.1
                h = h * fac
        for j in range(n):
            out[isamp, j] = x[j]
        isamp += 1
    return out, STATUS_OK


def pack_alpha(x):
    return complex(x[0], x[1])


def member_rho(x, m=0):
    """3x3 Hermitian density matrix of member m from the packed state."""
    o = 2 + MEMBER_NREAL * m
    r11 = x[o + 0]
    r22 = x[o + 1]
    u12 = complex(x[o + 2], x[o + 3])
    u1e = complex(x[o + 4], x[o + 5])
    u2e = complex(x[o + 6], x[o + 7])
    ree = 1.0 - r11 - r22
    return np.array([
        [r11, u12, u1e],
        [np.conj(u12), r22, u2e],
        [np.conj(u1e), np.conj(u2e), ree],
    ], dtype=complex)


def pack_state(alpha, rhos):
    """Inverse of (pack_alpha, member_rho) for a list of densities."""
    x = np.empty(state_size(len(rhos)))
    x[0] = alpha.real
    x[1] = alpha.imag
    for m, rho in enumerate(rhos):
        o = 2 + MEMBER_NREAL * m
        x[o + 0] = rho[0, 0].real
        x[o + 1] = rho[1, 1].real
        x[o + 2] = rho[0, 1].real
        x[o + 3] = rho[0, 1].imag
        x[o + 4] = rho[0, 2].real
        x[o + 5] = rho[0, 2].imag
        x[o + 6] = rho[1, 2].real
        x[o + 7] = rho[1, 2].imag
    return x


def is_physical(x, tol=1e-6):
    """Every member density matrix is positive within tol."""
    n_members = (x.size - 2) // MEMBER_NREAL
    for m in range(n_members):
        rho = member_rho(x, m)
        if np.min(np.linalg.eigvalsh(rho)) < -tol:
            return False
    return True


class NoAttractorError(RuntimeError):
    """Neither Newton nor relaxation found a fixed point."""


class StiffTrajectoryError(RuntimeError):
    """Integrator step size underflowed."""


def rhs_py(x, delta, kappa, drive_j, pm):
    out = np.empty_like(x)
    rhs(x, delta, kappa, drive_j, pm, out)
    return out


def residual_scale(x, delta, kappa, drive_j, pm):
    """Per-component scales turning rhs into a relative residual."""
    w = np.empty_like(x)
    alpha = abs(pack_alpha(x))
    w[0] = w[1] = max(abs(drive_j), 0.5 * kappa * max(alpha, 1.0), abs(delta))
    for m in range(pm.shape[0]):
        o = 2 + MEMBER_NREAL * m
        sm = max(
            pm[m, PM_GAMMA_PT] + 2.0 * pm[m, PM_GAMMA_PHI],
            pm[m, PM_OMEGA2],
            abs(pm[m, PM_G]) * alpha,
            abs(pm[m, PM_DELTA_S]),
            abs(pm[m, PM_DELTA_2]),
            1.0,
        )
        w[o:o + MEMBER_NREAL] = sm
    return w


def scaled_residual(x, delta, kappa, drive_j, pm):
    f = rhs_py(x, delta, kappa, drive_j, pm)
    w = residual_scale(x, delta, kappa, drive_j, pm)
    return float(np.max(np.abs(f) / w))


def newton_fixed_point(x0, delta, kappa, drive_j, pm,
                       tol=1e-11, max_iter=200, damping=0.5):
    """Damped Newton iteration on the packed real system.

    Returns (x, scaled_residual, converged).
    """
    x = np.asarray(x0, dtype=float).copy()
    res = scaled_residual(x, delta, kappa, drive_j, pm)
    for _ in range(max_iter):
        if res <= tol:
            return x, res, True
        f = rhs_py(x, delta, kappa, drive_j, pm)
        jac = jacobian_fd(x, delta, kappa, drive_j, pm)
        try:
            step = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(jac, -f, rcond=None)[0]
        lam = 1.0
        improved = False
        for _bt in range(30):
            xt = x + lam * step
            rt = scaled_residual(xt, delta, kappa, drive_j, pm)
            if rt < res:
                x, res = xt, rt
                improved = True
                break
            lam *= damping
        if not improved:
            return x, res, res <= tol
    return x, res, res <= tol


def relax_then_newton(x0, delta, kappa, drive_j, pm, horizon,
                      tol=1e-11, rtol=1e-6):
    """Long-time integration fallback followed by a Newton polish.

    Uses an implicit stiff integrator: the transient spans the cavity
    (~1/kappa) through the nuclear (~1/gamma_n) timescale, so explicit
    stepping over the whole horizon is prohibitively expensive.  The
    relaxation only needs to land in the right basin; Newton supplies the
    final accuracy, so tolerances here are loose and the absolute floor is
    scaled to the cavity amplitude.
    """
    from scipy.integrate import solve_ivp

    x0 = np.asarray(x0, dtype=float)
    atol = np.full_like(x0, 1e-9)
    alpha_scale = max(1.0, 2.0 * abs(drive_j) / max(kappa, 1.0))
    atol[0] = atol[1] = 1e-6 * alpha_scale
    sol = solve_ivp(
        lambda _t, x: rhs_py(x, delta, kappa, drive_j, pm),
        (0.0, horizon), x0, method="LSODA",
        jac=lambda _t, x: jacobian_fd(x, delta, kappa, drive_j, pm),
        rtol=rtol, atol=atol, t_eval=[horizon],
    )
    if not sol.success:
        raise StiffTrajectoryError(
            f"relaxation integration failed before t={horizon:g} s: "
            f"{sol.message}")
    return newton_fixed_point(sol.y[:, -1], delta, kappa, drive_j, pm, tol=tol)

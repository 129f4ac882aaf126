"""Physical constants and unit helpers (SI)."""

import math

HBAR = 1.054571817e-34  # J s
KB = 1.380649e-23       # J/K

TWO_PI = 2.0 * math.pi


def hz_to_rad(f_hz):
    return TWO_PI * f_hz


def rad_to_hz(w_rad):
    return w_rad / TWO_PI


def dbm_to_watt(p_dbm):
    return 1e-3 * 10.0 ** (p_dbm / 10.0)


def rad_s_to_mdeg_s(w):
    """rad/s -> mdeg/s."""
    return w * (180.0 / math.pi) * 1e3


def rad_s_to_deg_s(w):
    return w * (180.0 / math.pi)


def power_to_drive(p_dbm, kappa_c1, omega_d=TWO_PI * 2.87e9):
    """Probe drive rate J (rad/s) from power in dBm.

    Input-output conversion J = sqrt(kappa_c1 * P / (hbar * omega_d)) with
    kappa_c1 and omega_d in rad/s.
    """
    p_watt = dbm_to_watt(p_dbm)
    return math.sqrt(kappa_c1 * p_watt / (HBAR * omega_d))

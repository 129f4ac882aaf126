"""Run configuration: YAML schema, validation, and parameter assembly.

Every physical quantity carries its unit in the key name (kappa_hz,
b_gauss, power_dbm, ...).  Unknown keys are rejected with the full key
path so typos fail loudly instead of silently using a default.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np
import yaml

from .constants import TWO_PI
from .lambda_dynamics import LambdaParams, default_params
from .sensing import NoiseModel


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


_SYSTEM_KEYS = {
    "cooperativity": float,
    "kappa_hz": float,
    "kappa_c1_hz": float,
    "gamma_hz": float,
    "gamma_n_hz": float,
    "gamma_p_hz": float,
    "gamma_th_rate": float,
    "zeta_rep_s": float,
    "g_s_rad_s": float,
    "n_spins": float,
    "power_dbm": float,
    "omega2_hz": float,
    "delta_hz": float,
    "delta_2_hz": float,
    "probe_freq_hz": float,
}

_NOISE_KEYS = {
    "temperature_k": float,
    "impedance_ohm": float,
    "xi": float,
}

_FIELD_KEYS = {
    "b_gauss": list,
}

_SWEEP_KEYS = {
    "power_dbm_min": float,
    "power_dbm_max": float,
    "power_points": int,
    "omega2_hz_min": float,
    "omega2_hz_max": float,
    "omega2_points": int,
    "omega2_log": bool,
    "cooperativity_grid": list,
    "delta_hz_min": float,
    "delta_hz_max": float,
    "delta_points": int,
    "spin_offset_hz_min": float,
    "spin_offset_hz_max": float,
    "spin_offset_points": int,
}

_DYNAMICS_KEYS = {
    "t_final_s": float,
    "n_samples": int,
    "frame_offset_hz": float,
}

_ORACLE_KEYS = {
    "n_spins": int,
    "fock_cutoff": int,
    "collective_coupling_frac": float,
    "drive_frac": float,
}

_COMAG_KEYS = {
    "c_each": float,
    "hyperfine_offset_hz": float,
    "drive_on": bool,
    "p2_dbm": float,
    "omega_r_hz": float,
    "delta_t_hz": float,
}

_VECTOR_KEYS = {
    "offsets_hz": list,
    "rotation_deg_s": list,
}

_SECTIONS = {
    "system": _SYSTEM_KEYS,
    "noise": _NOISE_KEYS,
    "field": _FIELD_KEYS,
    "sweep": _SWEEP_KEYS,
    "dynamics": _DYNAMICS_KEYS,
    "oracle": _ORACLE_KEYS,
    "comag": _COMAG_KEYS,
    "vector": _VECTOR_KEYS,
}

_REQUIRED = {"system": ("kappa_hz",)}


def _check_section(name, data, schema):
    """Validate one section in place; numeric strings like '1.0e6' (which
    YAML 1.1 does not resolve as floats) are coerced."""
    if not isinstance(data, dict):
        raise ConfigError(f"section '{name}' must be a mapping")
    for key, val in data.items():
        if key not in schema:
            raise ConfigError(f"unknown key '{name}.{key}'")
        want = schema[key]
        if want is float:
            if isinstance(val, str):
                try:
                    val = float(val)
                except ValueError:
                    raise ConfigError(
                        f"'{name}.{key}' must be float, got {val!r}") from None
                data[key] = val
            if isinstance(val, (int, float)) and not isinstance(val, bool):
                continue
        if want is int and isinstance(val, bool):
            raise ConfigError(f"'{name}.{key}' must be {want.__name__}")
        if not isinstance(val, want):
            raise ConfigError(
                f"'{name}.{key}' must be {want.__name__}, "
                f"got {type(val).__name__}")


@dataclass(frozen=True)
class RunConfig:
    raw: dict
    seed: int = 0

    def section(self, name):
        return dict(self.raw.get(name, {}))

    def get(self, section, key, default=None):
        return self.raw.get(section, {}).get(key, default)

    def sha256(self):
        return hashlib.sha256(
            yaml.safe_dump(self.raw, sort_keys=True).encode()).hexdigest()

    def lambda_params(self) -> LambdaParams:
        sys = self.section("system")
        kwargs = {}
        mapping = {
            "cooperativity": ("cooperativity", 1.0),
            "power_dbm": ("p_dbm", 1.0),
            "omega2_hz": ("omega2_hz", 1.0),
            "kappa_hz": ("kappa_hz", 1.0),
            "gamma_hz": ("gamma_hz", 1.0),
            "gamma_n_hz": ("gamma_n_hz", 1.0),
            "gamma_p_hz": ("gamma_p_hz", 1.0),
            "gamma_th_rate": ("gamma_th", 1.0),
            "zeta_rep_s": ("zeta_rep", 1.0),
            "n_spins": ("n_spins", 1.0),
        }
        for key, (arg, scale) in mapping.items():
            if key in sys:
                kwargs[arg] = sys[key] * scale
        params = default_params(**kwargs)
        extra = {}
        if "delta_hz" in sys:
            extra["delta"] = TWO_PI * sys["delta_hz"]
            extra["delta_s"] = TWO_PI * sys["delta_hz"]
        if "delta_2_hz" in sys:
            extra["delta_2"] = TWO_PI * sys["delta_2_hz"]
        if "g_s_rad_s" in sys:
            extra["g_s"] = sys["g_s_rad_s"]
        if extra:
            from dataclasses import replace
            params = replace(params, **extra)
        return params

    def noise_model(self) -> NoiseModel:
        n = self.section("noise")
        return NoiseModel(
            temperature=n.get("temperature_k", 300.0),
            impedance=n.get("impedance_ohm", 50.0),
            xi=n.get("xi", 0.45),
        )

    def power_dbm(self):
        return self.get("system", "power_dbm", -55.0)

    def power_grid(self):
        s = self.section("sweep")
        return np.linspace(s.get("power_dbm_min", -90.0),
                           s.get("power_dbm_max", -40.0),
                           s.get("power_points", 26))

    def omega2_grid(self):
        s = self.section("sweep")
        lo = s.get("omega2_hz_min", 1e3)
        hi = s.get("omega2_hz_max", 3e5)
        n = s.get("omega2_points", 26)
        if s.get("omega2_log", True):
            grid = np.geomspace(max(lo, 1e-3), hi, n)
        else:
            grid = np.linspace(lo, hi, n)
        return TWO_PI * grid

    def delta_grid(self):
        s = self.section("sweep")
        return TWO_PI * np.linspace(s.get("delta_hz_min", -3e6),
                                    s.get("delta_hz_max", 3e6),
                                    s.get("delta_points", 601))


def validate(data) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping of sections")
    for name, body in data.items():
        if name not in _SECTIONS:
            raise ConfigError(f"unknown section '{name}'")
        _check_section(name, body, _SECTIONS[name])
    for section, keys in _REQUIRED.items():
        for key in keys:
            if key not in data.get(section, {}):
                raise ConfigError(f"missing required key '{section}.{key}'")
    return RunConfig(raw=data)


def load(path) -> RunConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    return validate(data if data is not None else {})

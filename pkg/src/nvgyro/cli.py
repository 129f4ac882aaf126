"""Command-line entry point.

Eight subcommands, each reproducing one figure-style data product as CSV
plus a JSON summary.  Every run writes a manifest with the config hash so
outputs are attributable; reruns on the same config are bitwise identical.
"""

import argparse
import csv
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import config as config_mod
from .config import ConfigError, RunConfig
from .constants import TWO_PI, rad_s_to_mdeg_s
from .lambda_dynamics import integrate, polarized_state, solve_steady_state

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2

ENV_PREFIX = "NVGYRO_"

_FLOAT_FMT = "%.12g"


def _fmt(x):
    if isinstance(x, float):
        return _FLOAT_FMT % x
    return str(x)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _manifest(out_dir, name, cfg: RunConfig, extra=None):
    params = cfg.lambda_params()
    man = {
        "subcommand": name,
        "config_sha256": cfg.sha256(),
        "seed": cfg.seed,
        "parameters": {
            "kappa_rad_s": params.kappa,
            "kappa_c1_rad_s": params.kappa_c1,
            "gamma_rad_s": params.gamma,
            "gamma_n_rad_s": params.gamma_n,
            "gamma_p_rad_s": params.gamma_p,
            "gamma_th_rate": params.gamma_th,
            "zeta_rep_s": params.zeta_rep,
            "g_s_rad_s": params.g_s,
            "n_spins": params.n_spins,
            "omega_2_rad_s": params.omega_2,
            "drive_j_rad_s": params.drive_j,
        },
        "units_note": "detunings are rad/s internally; *_hz columns are Hz; "
                      "eta columns already include the 2*pi Hz-to-rad/s "
                      "conversion",
    }
    if extra:
        man.update(extra)
    _write_json(os.path.join(out_dir, f"{name}_manifest.json"), man)


# --- subcommands -----------------------------------------------------------

def cmd_spectrum(cfg: RunConfig, out, workers):
    params = cfg.lambda_params()
    deltas = cfg.delta_grid()
    rows = []
    warnings = 0
    for d in deltas:
        p = replace(params, delta=params.delta + d,
                    delta_s=params.delta_s + d, delta_2=params.delta_2 + d)
        try:
            sol = solve_steady_state(p)
            rows.append((d / TWO_PI, sol.r.real, sol.r.imag, abs(sol.r) ** 2,
                         sol.regime.name))
        except Exception as exc:
            warnings += 1
            rows.append((d / TWO_PI, "", "", "", f"FAILED:{type(exc).__name__}"))
    _write_csv(os.path.join(out, "spectrum.csv"),
               ["delta_hz", "re_r", "im_r", "abs_r_sq", "regime"], rows)
    _manifest(out, "spectrum", cfg, {"warning_count": warnings})
    return warnings


def cmd_regime_map(cfg: RunConfig, out, workers):
    from .sensing import sweep_power_drive
    params = cfg.lambda_params()
    res = sweep_power_drive(params, cfg.power_grid(), cfg.omega2_grid(),
                            workers=workers)
    rows = [(c.p_dbm, c.omega_2, c.regime) for c in res.cells]
    _write_csv(os.path.join(out, "regime_map.csv"),
               ["p_dbm", "omega2_rad_s", "regime"], rows)
    _write_json(os.path.join(out, "regime_map_summary.json"), {
        "oscillation_boundary": [list(p) for p in res.boundary],
    })
    _manifest(out, "regime_map", cfg)
    return sum(1 for c in res.cells if c.regime == "FAILED")


def cmd_sensitivity_map(cfg: RunConfig, out, workers):
    from .sensing import sweep_power_drive
    params = cfg.lambda_params()
    res = sweep_power_drive(params, cfg.power_grid(), cfg.omega2_grid(),
                            noise=cfg.noise_model(), workers=workers)
    rows = []
    for c in res.cells:
        eta = rad_s_to_mdeg_s(c.eta_rad) if c.eta_rad is not None else ""
        rows.append((c.p_dbm, c.omega_2, c.regime, eta,
                     c.s_v_per_hz if c.s_v_per_hz is not None else "",
                     c.alpha0.real, c.alpha0.imag))
    _write_csv(os.path.join(out, "sensitivity_map.csv"),
               ["p_dbm", "omega2_rad_s", "regime", "eta_mdeg_s_sqrthz",
                "s_v_per_hz", "re_alpha0", "im_alpha0"], rows)
    summary = {"oscillation_boundary": [list(p) for p in res.boundary]}
    if res.argmin is not None:
        summary["argmin"] = {
            "p_dbm": res.argmin.p_dbm,
            "omega2_rad_s": res.argmin.omega_2,
            "regime": res.argmin.regime,
            "eta_mdeg_s_sqrthz": rad_s_to_mdeg_s(res.argmin.eta_rad),
        }
    _write_json(os.path.join(out, "sensitivity_map_summary.json"), summary)
    _manifest(out, "sensitivity_map", cfg)
    return sum(1 for c in res.cells if c.regime == "FAILED")


def cmd_coop_sweep(cfg: RunConfig, out, workers):
    from .sensing import sweep_cooperativity
    params = cfg.lambda_params()
    c_grid = cfg.get("sweep", "cooperativity_grid",
                     [2.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 40.0])
    points = sweep_cooperativity(params, c_grid, cfg.power_grid(),
                                 cfg.omega2_grid(), noise=cfg.noise_model(),
                                 workers=workers)
    rows = []
    for pt in points:
        if pt.best is None:
            rows.append((pt.cooperativity, "", "", "", ""))
        else:
            rows.append((pt.cooperativity,
                         rad_s_to_mdeg_s(pt.best.eta_rad),
                         pt.best.p_dbm, pt.best.omega_2,
                         int(pt.on_oscillation_boundary)))
    _write_csv(os.path.join(out, "coop_sweep.csv"),
               ["cooperativity", "eta_mdeg_s_sqrthz", "best_p_dbm",
                "best_omega2_rad_s", "on_oscillation_boundary"], rows)
    _manifest(out, "coop_sweep", cfg)
    return 0


def cmd_dynamics(cfg: RunConfig, out, workers):
    from .lambda_dynamics import beat_frequency
    params = cfg.lambda_params()
    dyn = cfg.section("dynamics")
    frame_hz = dyn.get("frame_offset_hz", 80.0)
    t_final = dyn.get("t_final_s", 0.1)
    n_samples = dyn.get("n_samples", 20000)
    p = replace(params, delta_2=params.delta_2 + TWO_PI * frame_hz)
    trace = integrate(p, polarized_state(), t_final, n_samples=n_samples)
    rows = [(t, a.real, a.imag, r[2, 0].imag)
            for t, a, r in zip(trace.times, trace.alpha, trace.rho)]
    _write_csv(os.path.join(out, "dynamics.csv"),
               ["t_s", "re_alpha", "im_alpha", "im_sigma_1e"], rows)
    beat = beat_frequency(trace.times, trace.alpha)
    _write_json(os.path.join(out, "dynamics_summary.json"), {
        "frame_offset_hz": frame_hz,
        "beat_rad_s": beat,
        "beat_hz": beat / TWO_PI if beat is not None else None,
    })
    _manifest(out, "dynamics", cfg)
    return 0


def cmd_comag(cfg: RunConfig, out, workers):
    from .multi_ensemble import (
        build_comag_set,
        reflection_map,
        second_tone_response,
        solve_multi_steady_state,
    )
    params = cfg.lambda_params()
    cm = cfg.section("comag")
    es = build_comag_set(params, c_each=cm.get("c_each", 10.0),
                         drive_on=cm.get("drive_on", False))
    s = cfg.section("sweep")
    probe = TWO_PI * np.linspace(s.get("delta_hz_min", -8e6),
                                 s.get("delta_hz_max", 3e6),
                                 s.get("delta_points", 111))
    spin = TWO_PI * np.linspace(s.get("spin_offset_hz_min", -3e6),
                                s.get("spin_offset_hz_max", 6e6),
                                s.get("spin_offset_points", 37))
    amap = reflection_map(es, probe, spin)
    rows = []
    for i, ds in enumerate(spin):
        for j, dp in enumerate(probe):
            rows.append((dp / TWO_PI, ds / TWO_PI, amap[i, j]))
    _write_csv(os.path.join(out, "comag_map.csv"),
               ["delta_hz", "delta_s_hz", "abs_r_sq"], rows)

    sol = solve_multi_steady_state(es)
    resp = second_tone_response(
        es, sol, TWO_PI * np.linspace(-8e6, 8e6, 401),
        p2_dbm=cm.get("p2_dbm", -40.0))
    rows2 = [(d / TWO_PI, r.real, r.imag, abs(r) ** 2)
             for d, r in zip(resp.detunings, resp.r2)]
    _write_csv(os.path.join(out, "comag_second_tone.csv"),
               ["delta_hz", "re_r2", "im_r2", "abs_r2_sq"], rows2)
    _manifest(out, "comag", cfg)
    return 0


def cmd_vector(cfg: RunConfig, out, workers):
    from .multi_ensemble import (
        build_vector_set,
        crosstalk_matrix,
        project_rotation,
        reconstruct_rotation,
    )
    from .nv_structure import tetrahedral_axes
    params = cfg.lambda_params()
    vec = cfg.section("vector")
    offsets = vec.get("offsets_hz", [-1.2e6, -0.4e6, 0.4e6, 1.2e6])
    es = build_vector_set(params, offsets_hz=tuple(offsets))
    xt = crosstalk_matrix(es)
    axes = tetrahedral_axes()
    rot_deg = vec.get("rotation_deg_s", [1.0, -0.5, 2.0])
    rot = np.asarray(rot_deg) * np.pi / 180.0
    shifts = project_rotation(rot, axes)
    rec = reconstruct_rotation(shifts, axes)
    _write_csv(os.path.join(out, "vector_crosstalk.csv"),
               ["probe_index", "member_index", "m_v_per_hz"],
               [(i, j, xt.m[i, j]) for i in range(xt.m.shape[0])
                for j in range(xt.m.shape[1])])
    _write_json(os.path.join(out, "vector_summary.json"), {
        "axes": [list(a) for a in axes],
        "probe_offsets_hz": [float(o) for o in offsets],
        "condition_number": xt.condition_number,
        "max_relative_crosstalk": xt.max_relative_crosstalk(),
        "rotation_true_deg_s": list(map(float, rot_deg)),
        "rotation_reconstructed_deg_s":
            [float(v) for v in rec * 180.0 / np.pi],
    })
    _manifest(out, "vector", cfg)
    return 0


def cmd_oracle_validate(cfg: RunConfig, out, workers):
    from .quantum_oracle import (
        OracleConfig,
        compare_with_mean_field,
        cutoff_stability,
        rescale_to_collective,
    )
    params = cfg.lambda_params()
    orc = cfg.section("oracle")
    n_spins = orc.get("n_spins", 1)
    cutoff = orc.get("fock_cutoff", 12)
    frac = orc.get("collective_coupling_frac", 0.05)
    p1 = rescale_to_collective(params, n_spins,
                               target_collective=frac * params.kappa)
    p1 = replace(p1, omega_2=0.0,
                 drive_j=orc.get("drive_frac", 0.05) * 0.5 * params.kappa)
    oc = OracleConfig(params=p1, n_spins=n_spins, fock_cutoff=cutoff)
    rec = compare_with_mean_field(oc)
    shift, _s0, _s1 = cutoff_stability(oc)
    rec["cutoff_shift"] = shift
    _write_json(os.path.join(out, "oracle_validate.json"), rec)
    _manifest(out, "oracle_validate", cfg)
    return 0


_COMMANDS = {
    "spectrum": cmd_spectrum,
    "regime-map": cmd_regime_map,
    "sensitivity-map": cmd_sensitivity_map,
    "coop-sweep": cmd_coop_sweep,
    "dynamics": cmd_dynamics,
    "comag": cmd_comag,
    "vector": cmd_vector,
    "oracle-validate": cmd_oracle_validate,
}


def build_parser():
    ap = argparse.ArgumentParser(
        prog="nvgyro",
        description="Cavity-coupled nuclear-spin gyroscope simulator")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None,
                        help="YAML run configuration")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--workers", type=int,
                        default=None, help="worker processes for sweeps")
        sp.add_argument("--seed", type=int, default=0,
                        help="seed for stochastic initial guesses")
    return ap


def _env_override(key, current):
    val = os.environ.get(ENV_PREFIX + key.upper())
    return val if val is not None else current


def main(argv=None):
    args = build_parser().parse_args(argv)
    config_path = _env_override("config", args.config)
    out_dir = _env_override("out", args.out)
    workers = args.workers
    if workers is None:
        env_w = os.environ.get(ENV_PREFIX + "WORKERS")
        workers = int(env_w) if env_w else (os.cpu_count() or 1)
    try:
        if config_path:
            cfg = config_mod.load(config_path)
        else:
            cfg = config_mod.validate({"system": {"kappa_hz": 1e6}})
        cfg = RunConfig(raw=cfg.raw, seed=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        print(f"config error: cannot create output dir: {exc}",
              file=sys.stderr)
        return EXIT_CONFIG
    try:
        warnings = _COMMANDS[args.command](cfg, out_dir, workers)
    except Exception as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if warnings:
        print(f"completed with {warnings} per-cell warnings", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

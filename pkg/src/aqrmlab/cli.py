"""Experiment orchestration: config ingestion, presets, deterministic outputs.

Subcommands: run, list-presets, validate.  Configs are INI files (key = value
under [sections]); every bundled preset is such a config.  Command-line
--set section.key=value entries take precedence over the file.  Exit codes:
0 success, 2 invalid config, 3 numeric failure (partial artifacts retained).

All frequency keys are plain frequencies (GHz/MHz); they are converted to
angular frequencies internally.  Criticality runs are dimensionless with the
resonator frequency set to 1.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import datetime
import io
import json
import math
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__, criticality, dynamics, models, plots, spectra
from .hilbert import DensityMatrix, product_state
from .presets import PRESETS, catalog_lines

TWO_PI = 2.0 * math.pi
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config schema
# ---------------------------------------------------------------------------

def _float(s):
    return float(s)


def _int(s):
    return int(s)


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s):
    vals = [float(tok) for tok in s.replace(",", " ").split()]
    if not vals:
        raise ValueError("empty list")
    return vals


def _pairs(s):
    out = []
    for tok in s.split():
        eta, lam = tok.split(":")
        out.append((float(eta), float(lam)))
    if not out:
        raise ValueError("empty pair list")
    return out


def _choice(*options):
    def parse(s):
        if s not in options:
            raise ValueError(f"must be one of {options}, got {s!r}")
        return s
    return parse


REQUIRED = object()

_CIRCUIT_KEYS = {
    "omega_ghz": (_float, REQUIRED),
    "omega_q_ghz": (_float, REQUIRED),
    "g_mhz": (_float, REQUIRED),
    "omega_r_ghz": (_float, None),
    "omega_b_ghz": (_float, None),
    "Omega_r_mhz": (_float, None),
    "Lambda_r_mhz": (_float, None),
    "Omega_b_mhz": (_float, None),
    "Lambda_b_mhz": (_float, None),
    "phi_r": (_float, 0.0),
    "phi_b": (_float, 0.0),
}

SCHEMAS = {
    "sweep-fs": {
        "sweep-fs": {
            "eta": (_float, REQUIRED),
            "anisotropy": (_float, REQUIRED),
            "u_min": (_float, 0.5),
            "u_max": (_float, 1.3),
            "u_count": (_int, 41),
            "method": (_choice("overlap", "spectral"), "overlap"),
        },
    },
    "scaling": {
        "scaling": {
            "anisotropies": (_floats, REQUIRED),
            "etas": (_floats, REQUIRED),
            "dg_rel": (_float, criticality.DEFAULT_DG_REL),
        },
    },
    "cumulant": {
        "cumulant": {
            "pairs": (_pairs, REQUIRED),
            "u_min": (_float, 0.85),
            "u_max": (_float, 1.15),
            "u_count": (_int, 61),
            "adiabatic_dimension": (_float, 1.0 / 3.0),
            "nu": (_float, 1.5),
            "contrast_nu": (_float, None),
            "min_scale_separation": (_float, 0.25),
        },
    },
    "collapse": {
        "collapse": {
            "pairs": (_pairs, REQUIRED),
            "u_min": (_float, 0.85),
            "u_max": (_float, 1.15),
            "u_count": (_int, 61),
            "adiabatic_dimension": (_float, 1.0 / 3.0),
            "nu": (_float, 1.5),
            "contrast_nu": (_float, None),
        },
    },
    "dynamics": {
        "dynamics": {
            **_CIRCUIT_KEYS,
            "eta": (_float, None),
            "anisotropy": (_float, None),
            "g_over_gc": (_float, None),
            "omega_eff_mhz": (_float, None),
            "t_final_ns": (_float, REQUIRED),
            "samples": (_int, 151),
            "cutoff": (_int, REQUIRED),
        },
    },
    "wigner": {
        "wigner": {
            **_CIRCUIT_KEYS,
            "coupling_cycles": (_floats, REQUIRED),
            "cutoff": (_int, REQUIRED),
            "x_min": (_float, -4.0), "x_max": (_float, 4.0), "x_count": (_int, 61),
            "p_min": (_float, -4.0), "p_max": (_float, 4.0), "p_count": (_int, 61),
        },
    },
    "cat": {
        "cat": {
            "gbar_mhz": (_float, REQUIRED),
            "delta_mhz": (_float, 0.0),
            "phi": (_float, 0.0),
            "t_ns": (_float, None),
            "alpha_target": (_float, None),
            "cutoff": (_int, 32),
            "steps": (_int, 4000),
            "outcome": (_choice("g", "e", "sample", "both"), "both"),
            "x_min": (_float, -3.0), "x_max": (_float, 3.0), "x_count": (_int, 61),
            "p_min": (_float, -3.0), "p_max": (_float, 3.0), "p_count": (_int, 61),
            "ab_initio": (_bool, False),
            "omega_ghz": (_float, None),
            "omega_q_ghz": (_float, None),
            "g_mhz": (_float, None),
            "omega_r_ghz": (_float, None),
            "omega_b_ghz": (_float, None),
            "Omega_mhz": (_float, None),
            "Lambda_mhz": (_float, None),
        },
    },
    "gate": {
        "gate": {
            "delta_mhz": (_float, REQUIRED),
            "gbar_over_delta": (_float, REQUIRED),
            "steps": (_int, 4000),
            "cutoff": (_int, 0),   # 0 = automatic from the displacement bound
        },
    },
}

_COMMON = {
    "experiment": {
        "kind": (_choice(*SCHEMAS), REQUIRED),
        "seed": (_int, 1234),
        "jobs": (_int, 1),
    },
    "numerics": {
        "cutoff_tol": (_float, 1e-8),
        "cutoff_start": (_int, 16),
        "cutoff_cap": (_int, 1024),
    },
}


def _raw_from_ini(path: str) -> dict:
    parser = configparser.ConfigParser()
    try:
        with open(path) as f:
            parser.read_file(f, source=path)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}")
    except configparser.Error as e:
        raise ConfigError(f"config parse error: {e}")
    return {s: dict(parser.items(s)) for s in parser.sections()}


def _apply_overrides(raw: dict, overrides) -> dict:
    out = {s: dict(kv) for s, kv in raw.items()}
    for item in overrides or ():
        try:
            key, value = item.split("=", 1)
            section, name = key.split(".", 1)
        except ValueError:
            raise ConfigError(f"--set needs section.key=value, got {item!r}")
        out.setdefault(section, {})[name] = value
    return out


def validate_config(raw: dict) -> dict:
    """Type-check a raw string config against the schema for its kind.

    Unknown sections or keys are rejected; every value is parsed before any
    computation starts.
    """
    exp = raw.get("experiment", {})
    if "kind" not in exp:
        raise ConfigError("missing experiment.kind")
    kind = exp["kind"]
    if kind not in SCHEMAS:
        raise ConfigError(
            f"experiment.kind must be one of {sorted(SCHEMAS)}, got {kind!r}")
    schema = {**_COMMON, **SCHEMAS[kind]}
    cfg = {}
    for section, keys in raw.items():
        if section not in schema:
            raise ConfigError(f"unknown section [{section}] for kind {kind}")
        for key in keys:
            if key not in schema[section]:
                raise ConfigError(f"unknown key {section}.{key}")
    for section, fields in schema.items():
        src = raw.get(section, {})
        out = {}
        for key, (parse, default) in fields.items():
            if key in src:
                try:
                    out[key] = parse(src[key])
                except ValueError as e:
                    raise ConfigError(f"invalid value for {section}.{key}: {e}")
            elif default is REQUIRED:
                raise ConfigError(f"missing required key {section}.{key}")
            else:
                out[key] = default
        cfg[section] = out
    _validate_semantics(kind, cfg)
    return cfg


def _validate_semantics(kind: str, cfg: dict):
    num = cfg["numerics"]
    if num["cutoff_tol"] <= 0:
        raise ConfigError("numerics.cutoff_tol must be > 0")
    if num["cutoff_start"] < 2 or num["cutoff_cap"] < num["cutoff_start"]:
        raise ConfigError("numerics cutoff bounds must satisfy 2 <= start <= cap")
    if kind in ("sweep-fs",):
        s = cfg[kind]
        if s["u_count"] < 2 or s["u_max"] <= s["u_min"]:
            raise ConfigError(f"{kind}: empty or inverted u grid")
    if kind in ("cumulant", "collapse"):
        s = cfg[kind]
        if s["u_count"] < 2 or s["u_max"] <= s["u_min"]:
            raise ConfigError(f"{kind}: empty or inverted u grid")
        if s["nu"] <= 0:
            raise ConfigError(f"{kind}.nu must be > 0")
    if kind == "scaling":
        s = cfg["scaling"]
        if len(s["etas"]) < 3:
            raise ConfigError("scaling.etas needs at least 3 points")
        if any(e <= 0 for e in s["etas"]) or any(l <= 0 for l in s["anisotropies"]):
            raise ConfigError("scaling etas and anisotropies must be > 0")
    if kind == "dynamics":
        d = cfg["dynamics"]
        effective_mode = d["eta"] is not None
        if effective_mode:
            for k in ("anisotropy", "g_over_gc", "omega_eff_mhz"):
                if d[k] is None:
                    raise ConfigError(f"dynamics.{k} required when eta is given")
        else:
            for k in ("omega_r_ghz", "omega_b_ghz", "Omega_r_mhz",
                      "Lambda_r_mhz", "Omega_b_mhz", "Lambda_b_mhz"):
                if d[k] is None:
                    raise ConfigError(f"dynamics.{k} required (or give eta/...)")
        if d["t_final_ns"] <= 0 or d["samples"] < 2 or d["cutoff"] < 2:
            raise ConfigError("dynamics window, samples, or cutoff invalid")
    if kind == "wigner":
        w = cfg["wigner"]
        for k in ("omega_r_ghz", "omega_b_ghz", "Omega_r_mhz", "Lambda_r_mhz",
                  "Omega_b_mhz", "Lambda_b_mhz"):
            if w[k] is None:
                raise ConfigError(f"wigner.{k} is required")
        if not w["coupling_cycles"]:
            raise ConfigError("wigner.coupling_cycles must be nonempty")
    if kind == "cat":
        c = cfg["cat"]
        if (c["t_ns"] is None) == (c["alpha_target"] is None):
            raise ConfigError("cat: give exactly one of t_ns or alpha_target")
        if c["ab_initio"]:
            for k in ("omega_ghz", "omega_q_ghz", "g_mhz", "omega_r_ghz",
                      "omega_b_ghz", "Omega_mhz", "Lambda_mhz"):
                if c[k] is None:
                    raise ConfigError(f"cat.{k} required for ab_initio runs")
    if kind == "gate":
        g = cfg["gate"]
        if g["delta_mhz"] <= 0 or g["gbar_over_delta"] < 0:
            raise ConfigError("gate.delta_mhz must be > 0 and gbar_over_delta >= 0")


def _policy(cfg) -> spectra.CutoffPolicy:
    n = cfg["numerics"]
    return spectra.CutoffPolicy(tol=n["cutoff_tol"], start=n["cutoff_start"],
                                cap=n["cutoff_cap"])


def _circuit_from_keys(d: dict, prefix_omega="Omega_", prefix_lambda="Lambda_"):
    return models.CircuitParams(
        omega=TWO_PI * d["omega_ghz"] * 1e9,
        omega_q=TWO_PI * d["omega_q_ghz"] * 1e9,
        g=TWO_PI * d["g_mhz"] * 1e6,
        Omega_r=TWO_PI * d[f"{prefix_omega}r_mhz"] * 1e6,
        Lambda_r=TWO_PI * d[f"{prefix_lambda}r_mhz"] * 1e6,
        omega_r=TWO_PI * d["omega_r_ghz"] * 1e9,
        Omega_b=TWO_PI * d[f"{prefix_omega}b_mhz"] * 1e6,
        Lambda_b=TWO_PI * d[f"{prefix_lambda}b_mhz"] * 1e6,
        omega_b=TWO_PI * d["omega_b_ghz"] * 1e9,
        phi_r=d["phi_r"], phi_b=d["phi_b"])


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v) + 0.0:.17g}"   # +0.0 folds -0.0 into 0
    return str(v)


def write_csv(path, units: str, columns: dict):
    """CSV with a units comment line and full round-trip float precision."""
    with open(path, "w", newline="") as f:
        f.write(f"# units: {units}\n")
        w = csv.writer(f)
        w.writerow(list(columns))
        for row in zip(*columns.values()):
            w.writerow([_fmt(v) for v in row])
    return str(path)


def trajectory_csv(path, traj, time_scale=1.0, time_unit="s"):
    cols = {"t": [t * time_scale for t in traj.times]}
    for name in ("P_g", "S_G", "n_mean", "norm"):
        cols[name] = traj.observables[name].tolist()
    return write_csv(path, f"t in {time_unit}; P_g, norm dimensionless; "
                           "S_G in bits; n_mean in photons", cols)


def wigner_json(path, grid, meta=None):
    doc = {"x": grid.x.tolist(), "p": grid.p.tolist(),
           "values": grid.values.tolist(),
           "units": "X, P dimensionless quadratures; W normalized to unit mass"}
    if meta:
        doc["meta"] = meta
    with open(path, "w") as f:
        json.dump(doc, f, sort_keys=True)
    return str(path)


def _fit_dict(fit: criticality.ScalingFit) -> dict:
    return {"exponent": fit.exponent, "intercept": fit.intercept,
            "r_squared": fit.r_squared, "points_used": fit.points_used,
            "std_err": fit.std_err}


# ---------------------------------------------------------------------------
# runners
# ---------------------------------------------------------------------------

def run_sweep_fs(cfg, outdir, jobs):
    s = cfg["sweep-fs"]
    policy = _policy(cfg)
    template = models.aqrm_from_dimensionless(s["eta"], s["anisotropy"], 1.0)
    u = np.linspace(s["u_min"], s["u_max"], s["u_count"])
    curve = criticality.fs_curve(template, u, policy, method=s["method"])
    name = f"fs_eta{s['eta']:g}_lambda{s['anisotropy']:g}.csv"
    files = [write_csv(outdir / name,
                       "g in units of the resonator frequency; chi_F in 1/g^2",
                       {"g": curve.g_grid.tolist(),
                        "g_over_gc": (curve.g_grid / template.critical_coupling).tolist(),
                        "chi_F": curve.chi.tolist()})]
    report = {"eta": s["eta"], "anisotropy": s["anisotropy"],
              "cutoff_used": curve.cutoff_used, "method": s["method"],
              "chi_max_on_grid": float(curve.chi.max()),
              "u_at_max": float(curve.g_grid[np.argmax(curve.chi)]
                                / template.critical_coupling)}
    figures = [plots.fs_curve_figure([curve], outdir / "fs_curves.png")]
    return report, files, figures


def run_scaling(cfg, outdir, jobs):
    s = cfg["scaling"]
    policy = _policy(cfg)
    files, sweeps, report = [], {}, {"per_anisotropy": {}}
    for lam in s["anisotropies"]:
        records = criticality.peak_sweep(lam, s["etas"], policy,
                                         dg_rel=s["dg_rel"], jobs=jobs)
        fits = criticality.peak_exponents(records)
        sweeps[lam] = (records, fits)
        files.append(write_csv(
            outdir / f"scaling_lambda{lam:g}.csv",
            "eta dimensionless; g_max in resonator-frequency units; "
            "chi_max in 1/g^2",
            {"eta": [r.eta for r in records],
             "g_max": [r.g_max for r in records],
             "g_max_over_gc": [r.g_max_over_gc for r in records],
             "chi_max": [r.chi_max for r in records],
             "cutoff": [r.cutoff_used for r in records]}))
        report["per_anisotropy"][f"{lam:g}"] = {
            "adiabatic_dimension": _fit_dict(fits["adiabatic_dimension"]),
            "peak_shift": _fit_dict(fits["peak_shift"]),
        }
    figures = [plots.scaling_figure(sweeps, outdir / "scaling.png")]
    return report, files, figures


def _crossings(curves, u, min_sep):
    out = []
    for i in range(len(curves)):
        for j in range(i + 1, len(curves)):
            a, b = curves[i], curves[j]
            ratio = max(a.eta_prime, b.eta_prime) / min(a.eta_prime, b.eta_prime)
            if ratio < 1.0 + min_sep:
                continue
            try:
                x, y = criticality.find_crossing(u, a.values, b.values)
            except criticality.AmbiguousCrossingError as e:
                out.append({"pair_a": [a.eta, a.anisotropy],
                            "pair_b": [b.eta, b.anisotropy],
                            "error": str(e), "candidates": e.candidates})
                continue
            out.append({"pair_a": [a.eta, a.anisotropy],
                        "pair_b": [b.eta, b.anisotropy],
                        "u_star": x, "U_star": y})
    return out


def _cumulant_common(cfg, section, outdir, jobs, with_crossings):
    s = cfg[section]
    policy = _policy(cfg)
    u = np.linspace(s["u_min"], s["u_max"], s["u_count"])
    curves = criticality.cumulant_family(s["pairs"], u, policy, jobs=jobs)
    files = []
    for c in curves:
        files.append(write_csv(
            outdir / f"cumulant_eta{c.eta:g}_lambda{c.anisotropy:g}.csv",
            "g_over_gc and U_X dimensionless",
            {"g_over_gc": c.u_grid.tolist(), "U_X": c.values.tolist()}))
    report = {"pairs": [[c.eta, c.anisotropy] for c in curves],
              "cutoffs": [c.cutoff_used for c in curves]}
    zero_checks = []
    for eta, lam in s["pairs"]:
        template = models.aqrm_from_dimensionless(eta, lam, 1.0)
        zero_checks.append(criticality.cumulant_ratio(
            template.with_coupling(0.0), cutoff=16))
    report["U_at_zero_coupling"] = zero_checks
    crossings = []
    if with_crossings:
        crossings = _crossings(curves, u, s["min_scale_separation"])
        report["crossings"] = crossings
    cc = [criticality.CollapseCurve(scale=c.eta_prime, u=c.u_grid, y=c.values,
                                    label=f"eta={c.eta:g}, lam={c.anisotropy:g}")
          for c in curves]
    res = criticality.collapse(cc, s["adiabatic_dimension"], s["nu"])
    report["collapse"] = {"nu": s["nu"], "residual": res.residual,
                          "adiabatic_dimension": s["adiabatic_dimension"]}
    contrast = None
    if s["contrast_nu"] is not None:
        contrast = criticality.collapse(cc, s["adiabatic_dimension"], s["contrast_nu"])
        report["collapse_contrast"] = {"nu": s["contrast_nu"],
                                       "residual": contrast.residual}
    figures = [plots.cumulant_figure(curves, crossings, outdir / "cumulant.png"),
               plots.collapse_figure(res, contrast, outdir / "collapse.png")]
    return report, files, figures


def run_cumulant(cfg, outdir, jobs):
    return _cumulant_common(cfg, "cumulant", outdir, jobs, with_crossings=True)


def run_collapse(cfg, outdir, jobs):
    return _cumulant_common(cfg, "collapse", outdir, jobs, with_crossings=False)


def run_dynamics(cfg, outdir, jobs):
    d = cfg["dynamics"]
    if d["eta"] is not None:
        omega_eff = TWO_PI * d["omega_eff_mhz"] * 1e6
        p_eff = models.aqrm_from_dimensionless(
            d["eta"], d["anisotropy"], d["g_over_gc"], omega=omega_eff)
        circuit = models.drives_from_aqrm(
            p_eff, omega=TWO_PI * d["omega_ghz"] * 1e9,
            omega_q=TWO_PI * d["omega_q_ghz"] * 1e9,
            g=TWO_PI * d["g_mhz"] * 1e6)
    else:
        circuit = _circuit_from_keys(d)
        p_eff = models.map_drives_to_aqrm(circuit)
    mapping = models.mapping_report(circuit)
    ts = np.linspace(0.0, d["t_final_ns"] * 1e-9, d["samples"])
    psi0 = product_state(dynamics.lab_factory(circuit, d["cutoff"]).shape, "g", 0)
    traj_full = dynamics.propagate(dynamics.lab_factory(circuit, d["cutoff"]),
                                   psi0, ts)
    h_eff = models.build_aqrm(p_eff, d["cutoff"])
    traj_eff = dynamics.evolve_static(h_eff, psi0, ts, store_states=False)
    files = [trajectory_csv(outdir / "dynamics_full.csv", traj_full),
             trajectory_csv(outdir / "dynamics_effective.csv", traj_eff)]
    report = {
        "mapping": mapping.summary(),
        "cutoff": d["cutoff"],
        "dt_s": traj_full.dt,
        "max_abs_dP_g": float(np.abs(traj_full.series("P_g")
                                     - traj_eff.series("P_g")).max()),
        "max_abs_dS_G": float(np.abs(traj_full.series("S_G")
                                     - traj_eff.series("S_G")).max()),
        "max_norm_drift": float(np.abs(traj_full.series("norm") - 1.0).max()),
    }
    figures = [plots.dynamics_figure(ts * 1e9, traj_full.observables,
                                     traj_eff.observables,
                                     outdir / "dynamics.png")]
    return report, files, figures


def _frame_corrected_field(state, omega, t):
    rho = dynamics.reduce_to_field(state).entries
    n = np.arange(rho.shape[0])
    phase = np.exp(1j * omega * t * n)
    rotated = (phase[:, None] * rho) * phase.conj()[None, :]
    return DensityMatrix(rho.shape[0], rotated)


def run_wigner(cfg, outdir, jobs):
    w = cfg["wigner"]
    circuit = _circuit_from_keys(w)
    p_eff = models.map_drives_to_aqrm(circuit)
    g_scale = max(p_eff.g_r, p_eff.g_cr)
    times = np.array(sorted(c * TWO_PI / g_scale for c in w["coupling_cycles"]))
    cutoff = w["cutoff"]
    fac = dynamics.lab_factory(circuit, cutoff)
    psi0 = product_state(fac.shape, "g", 0)
    traj = dynamics.propagate(fac, psi0, np.concatenate([[0.0], times]),
                              store_states=True)
    h_eff = models.build_aqrm(p_eff, cutoff)
    traj_eff = dynamics.evolve_static(h_eff, psi0, np.concatenate([[0.0], times]))
    xs = np.linspace(w["x_min"], w["x_max"], w["x_count"])
    ps = np.linspace(w["p_min"], w["p_max"], w["p_count"])
    files, grids, labels, distances = [], [], [], []
    for k, t in enumerate(times):
        rho_full = _frame_corrected_field(traj.states[k + 1], circuit.omega, t)
        rho_eff = dynamics.reduce_to_field(traj_eff.states[k + 1])
        g_full = dynamics.wigner(rho_full, xs, ps)
        g_eff = dynamics.wigner(rho_eff, xs, ps)
        cyc = w["coupling_cycles"][k]
        files.append(wigner_json(outdir / f"wigner_full_{k}.json", g_full,
                                 {"t_s": float(t), "coupling_cycles": cyc}))
        files.append(wigner_json(outdir / f"wigner_effective_{k}.json", g_eff,
                                 {"t_s": float(t), "coupling_cycles": cyc}))
        dx = xs[1] - xs[0]
        dp = ps[1] - ps[0]
        l2 = float(np.sqrt(np.sum((g_full.values - g_eff.values) ** 2) * dx * dp))
        distances.append(l2)
        grids.append(g_full)
        labels.append(f"g t/2pi = {cyc:g}")
    report = {"times_s": times.tolist(),
              "coupling_cycles": list(w["coupling_cycles"]),
              "full_vs_effective_L2": distances,
              "mass_full": [g.riemann_sum() for g in grids],
              "mapping": models.mapping_report(circuit).summary()}
    figures = [plots.wigner_figure(grids, labels, outdir / "wigner.png")]
    return report, files, figures


def run_cat(cfg, outdir, jobs):
    c = cfg["cat"]
    gbar = TWO_PI * c["gbar_mhz"] * 1e6
    delta = TWO_PI * c["delta_mhz"] * 1e6
    d = models.DegenerateParams(1, gbar, delta, c["phi"])
    if c["t_ns"] is not None:
        t = c["t_ns"] * 1e-9
    else:
        # displacement target: |alpha| = alpha_target; at delta=0,
        # |alpha| = gbar t, otherwise pick the first-turning-point branch
        if delta == 0:
            t = c["alpha_target"] / gbar
        else:
            ratio = c["alpha_target"] * delta / (2.0 * gbar)
            if not 0 < ratio <= 1:
                raise ConfigError("cat.alpha_target unreachable at this delta")
            t = 2.0 * math.asin(ratio) / delta
    outcome = None if c["outcome"] == "both" else c["outcome"]
    rep_a = dynamics.cat_protocol(d, t, cutoff=c["cutoff"], method="analytic",
                                  outcome=outcome, seed=cfg["experiment"]["seed"])
    rep_n = dynamics.cat_protocol(d, t, cutoff=c["cutoff"], method="numeric",
                                  steps=c["steps"])
    xs = np.linspace(c["x_min"], c["x_max"], c["x_count"])
    ps = np.linspace(c["p_min"], c["p_max"], c["p_count"])
    even = rep_a.branches["g"].field_state
    rho_even = DensityMatrix(c["cutoff"],
                             np.outer(even.amplitudes, even.amplitudes.conj()))
    grid = dynamics.wigner(rho_even, xs, ps)
    files = [wigner_json(outdir / "wigner_cat_even.json", grid,
                         {"alpha": [rep_a.alpha.real, rep_a.alpha.imag]})]
    alpha_abs = abs(rep_a.alpha)
    report = {
        "time_s": t,
        "alpha": [rep_a.alpha.real, rep_a.alpha.imag],
        "branches_analytic": {k: {"probability": b.probability,
                                  "fidelity": b.fidelity_vs_ideal}
                              for k, b in rep_a.branches.items()},
        "branches_numeric": {k: {"probability": b.probability,
                                 "fidelity": b.fidelity_vs_ideal}
                             for k, b in rep_n.branches.items()},
        "closed_form_probabilities": {
            "g": (1.0 + math.exp(-2.0 * alpha_abs ** 2)) / 2.0,
            "e": (1.0 - math.exp(-2.0 * alpha_abs ** 2)) / 2.0},
        "sampled_outcome": rep_a.sampled_outcome,
    }
    grids = [grid]
    labels = ["effective even cat"]
    if c["ab_initio"]:
        circuit = models.CircuitParams(
            omega=TWO_PI * c["omega_ghz"] * 1e9,
            omega_q=TWO_PI * c["omega_q_ghz"] * 1e9,
            g=TWO_PI * c["g_mhz"] * 1e6,
            Omega_r=TWO_PI * c["Omega_mhz"] * 1e6,
            Lambda_r=TWO_PI * c["Lambda_mhz"] * 1e6,
            omega_r=TWO_PI * c["omega_r_ghz"] * 1e9,
            Omega_b=TWO_PI * c["Omega_mhz"] * 1e6,
            Lambda_b=TWO_PI * c["Lambda_mhz"] * 1e6,
            omega_b=TWO_PI * c["omega_b_ghz"] * 1e9)
        fac = dynamics.lab_factory(circuit, c["cutoff"])
        psi0 = product_state(fac.shape, "g", 0)
        traj = dynamics.propagate(fac, psi0, np.array([0.0, t]), store_states=True)
        blocks = traj.states[-1].amplitudes.reshape(2, c["cutoff"])
        prob_g = float(np.linalg.norm(blocks[1]) ** 2)
        field = blocks[1] / np.linalg.norm(blocks[1])
        n_idx = np.arange(c["cutoff"])
        field = np.exp(1j * circuit.omega * t * n_idx) * field
        ideal = dynamics.ideal_cat(c["cutoff"], rep_a.alpha, +1)
        # parity gauge: the driven circuit realizes the coupling with the
        # opposite sign, displacing along -alpha; the even cat is invariant
        fid = float(abs(np.vdot(ideal.amplitudes, field)) ** 2)
        rho_ab = DensityMatrix(c["cutoff"], np.outer(field, field.conj()))
        grid_ab = dynamics.wigner(rho_ab, xs, ps)
        files.append(wigner_json(outdir / "wigner_cat_ab_initio.json", grid_ab,
                                 {"t_s": t, "prob_g": prob_g}))
        dx, dp = xs[1] - xs[0], ps[1] - ps[0]
        report["ab_initio"] = {
            "prob_g": prob_g,
            "fidelity_vs_ideal_even_cat": fid,
            "wigner_L2_vs_effective": float(np.sqrt(
                np.sum((grid_ab.values - grid.values) ** 2) * dx * dp)),
        }
        grids.append(grid_ab)
        labels.append("ab initio even cat")
    figures = [plots.wigner_figure(grids, labels, outdir / "cat_wigner.png")]
    return report, files, figures


def run_gate(cfg, outdir, jobs):
    g = cfg["gate"]
    delta = TWO_PI * g["delta_mhz"] * 1e6
    d = models.DegenerateParams(2, g["gbar_over_delta"] * delta, delta, 0.0)
    cutoff = g["cutoff"] if g["cutoff"] else None
    res_a = dynamics.gate_unitary(d, cutoff=cutoff, method="analytic")
    res_n = dynamics.gate_unitary(d, cutoff=cutoff, method="numeric",
                                  steps=g["steps"])
    target = dynamics.gate_target(res_a.theta_bar)
    files = [write_csv(outdir / "gate_matrix.csv",
                       "dimensionless amplitudes, basis ee, eg, ge, gg",
                       {"entry": [f"{i}{j}" for i in range(4) for j in range(4)],
                        "re_numeric": res_n.matrix.real.ravel().tolist(),
                        "im_numeric": res_n.matrix.imag.ravel().tolist(),
                        "re_analytic": res_a.matrix.real.ravel().tolist(),
                        "im_analytic": res_a.matrix.imag.ravel().tolist(),
                        "re_target": target.real.ravel().tolist(),
                        "im_target": target.imag.ravel().tolist()})]
    report = {"theta_bar": res_a.theta_bar,
              "max_error_analytic": res_a.error_vs_target(),
              "max_error_numeric": res_n.error_vs_target(),
              "field_purity_numeric": res_n.field_purity}
    figures = [plots.gate_figure(res_n.matrix, target, outdir / "gate.png")]
    return report, files, figures


RUNNERS = {
    "sweep-fs": run_sweep_fs,
    "scaling": run_scaling,
    "cumulant": run_cumulant,
    "collapse": run_collapse,
    "dynamics": run_dynamics,
    "wigner": run_wigner,
    "cat": run_cat,
    "gate": run_gate,
}


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------

def _resolve_jobs(args, cfg) -> int:
    if args.jobs is not None:
        return args.jobs
    env = os.environ.get("AQRM_JOBS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"AQRM_JOBS must be an integer, got {env!r}")
    return cfg["experiment"]["jobs"]


def _load_config(args) -> tuple:
    if args.preset:
        if args.preset not in PRESETS:
            raise ConfigError(
                f"unknown preset {args.preset!r}; see list-presets")
        raw = {s: dict(kv) for s, kv in PRESETS[args.preset]["config"].items()}
        source = f"preset:{args.preset}"
    elif args.config:
        raw = _raw_from_ini(args.config)
        source = args.config
    else:
        raise ConfigError("give a config file or --preset NAME")
    raw = _apply_overrides(raw, args.set)
    return validate_config(raw), source


def cmd_run(args) -> int:
    try:
        cfg, source = _load_config(args)
        jobs = _resolve_jobs(args, cfg)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    kind = cfg["experiment"]["kind"]
    t0 = time.time()
    status = "ok"
    captured = []
    report, files, figures = {}, [], []
    try:
        with warnings.catch_warnings(record=True) as wlist:
            warnings.simplefilter("always")
            report, files, figures = RUNNERS[kind](cfg, outdir, jobs)
            captured = sorted({str(w.message) for w in wlist})
    except (spectra.IterationError, dynamics.StepSizeError,
            dynamics.ProtocolError, criticality.BracketingError,
            criticality.AmbiguousCrossingError) as e:
        status = f"numeric-failure: {e}"
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if not args.figures:
        for f in figures:
            Path(f).unlink(missing_ok=True)
        figures = []
    manifest = {
        "source": source,
        "kind": kind,
        "config": cfg,
        "version": __version__,
        "jobs": jobs,
        "status": status,
        "warnings": captured,
        "outputs": {"report": "report.json",
                    "data": [Path(f).name for f in files],
                    "figures": [Path(f).name for f in figures]},
        "timestamp": {"utc": datetime.datetime.now(datetime.timezone.utc)
                      .isoformat(), "wall_time_s": time.time() - t0},
    }
    with open(outdir / "report.json", "w") as f:
        json.dump(report, f, sort_keys=True, indent=2)
    with open(outdir / "run_manifest.json", "w") as f:
        json.dump(manifest, f, sort_keys=True, indent=2)
    if status != "ok":
        print(f"numeric failure: {status}", file=sys.stderr)
        print(f"partial artifacts retained in {outdir}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"wrote {outdir}/report.json and {len(files)} data file(s)")
    return EXIT_OK


def cmd_list_presets(args) -> int:
    for line in catalog_lines():
        print(line)
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        cfg, source = _load_config(args)
    except ConfigError as e:
        print(f"invalid config: {e}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{source}: valid ({cfg['experiment']['kind']})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="aqrmlab",
        description="anisotropic-Rabi-model laboratory: criticality sweeps, "
                    "scheme validation, and state-engineering experiments")
    sub = ap.add_subparsers(dest="command", required=True)

    def add_config_args(p):
        p.add_argument("config", nargs="?", help="INI config file")
        p.add_argument("--preset", help="bundled preset name")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override a config value (repeatable)")

    runp = sub.add_parser("run", help="run an experiment")
    add_config_args(runp)
    runp.add_argument("--out", default="runs/out", help="output directory")
    runp.add_argument("--jobs", type=int, default=None,
                      help="worker count (overrides AQRM_JOBS and the config)")
    runp.add_argument("--no-figures", dest="figures", action="store_false",
                      help="skip figure rendering")
    runp.set_defaults(func=cmd_run)

    lp = sub.add_parser("list-presets", help="print the preset catalog")
    lp.set_defaults(func=cmd_list_presets)

    vp = sub.add_parser("validate", help="check a config without running")
    add_config_args(vp)
    vp.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

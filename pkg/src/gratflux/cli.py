"""Batch driver: validate a JSON job config, run it, emit CSV and a manifest.

Modes
-----
plane        plane-plane coefficient h0 (geometry ignored if present)
grating      exact coefficient h of the grating pair at the configured shift
pa           proximity-approximation coefficient at the configured shift
modulation   h at shift 0 and d/2 plus their ratio
sweep        full comparison row per point: exact and proximity coefficients
             at shift 0 and d/2, plus the modulation factor

Any mode accepts an optional sweep block (axis L, d, p or delta; lengths in
nm, fill dimensionless); the "sweep" mode requires one.  Presets shipped
with the package reproduce the parameter studies of the reference figures.

Outputs: ``results.csv`` (inputs echoed per row, 9-significant-digit
scientific notation, units in headers) and ``manifest.json`` (tool version,
config hash, constants version, wall time).  Re-running the same config
yields a byte-identical CSV.  Exit codes: 0 ok, 1 flagged rows under
--strict, 2 config error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from importlib import resources

import jsonschema

from . import __version__
from .constants import CONSTANTS_VERSION
from .materials import (
    ThermalState,
    load_nk_table_file,
    sio2_nk_table,
    sio2_oscillator_model,
)
from .planar import PlanarNumerics, planar_heat_transfer
from .proximity import proximity_heat_transfer
from .rcwa import GratingGeometry
from .transfer import NumericsConfig, heat_transfer_coefficient

WORKERS_ENV = "GRATFLUX_WORKERS"
_NM = 1e-9


class ConfigError(Exception):
    """Invalid job configuration; message lists every violation found."""


def _schema():
    text = resources.files("gratflux").joinpath("config_schema.json").read_text()
    return json.loads(text)


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        config = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config is not valid JSON (line {exc.lineno}, column {exc.colno}): "
            f"{exc.msg}") from exc
    validate_config(config)
    return config


def validate_config(config: dict) -> None:
    """Schema check plus semantic checks; raises with all violations."""
    validator = jsonschema.Draft202012Validator(_schema())
    problems = [f"{'/'.join(str(p) for p in err.absolute_path) or '(root)'}: "
                f"{err.message}"
                for err in validator.iter_errors(config)]
    if not problems:
        problems.extend(_semantic_problems(config))
    if problems:
        raise ConfigError("invalid config:\n  " + "\n  ".join(problems))


def _semantic_problems(config: dict) -> list[str]:
    problems = []
    mode = config["mode"]
    geometry = config.get("geometry")
    if mode != "plane" and geometry is None:
        problems.append(f"geometry: required for mode '{mode}'")
    temps = config["temperatures"]
    if temps["t1_K"] == temps["t2_K"]:
        problems.append("temperatures: t1_K and t2_K must differ")
    if mode in ("pa", "sweep") and geometry is not None:
        if geometry["fill"] >= 0.5:
            problems.append(
                "geometry/fill: proximity approximation requires fill < 0.5")
    sweep = config.get("sweep")
    if mode == "sweep" and sweep is None:
        problems.append("sweep: required for mode 'sweep'")
    if mode == "plane" and sweep is not None and sweep.get("axis") != "L":
        problems.append("sweep/axis: plane mode can only sweep L")
    if sweep is not None:
        has_values = "values" in sweep
        has_range = "range" in sweep
        if has_values == has_range:
            problems.append("sweep: give exactly one of 'values' or 'range'")
        if has_range:
            rng = sweep["range"]
            if rng["spacing"] == "log" and (rng["start"] <= 0
                                            or rng["stop"] <= 0):
                problems.append("sweep/range: log spacing needs positive ends")
                return problems
        values = _sweep_values(sweep) if (has_values != has_range) else []
        if has_values and not values:
            problems.append("sweep/values: empty sweep")
        if any(v <= 0 for v in values) and sweep.get("axis") != "delta":
            problems.append("sweep/values: values must be positive")
        if sweep.get("axis") == "p":
            if any(not 0.0 < v < 1.0 for v in values):
                problems.append("sweep/values: fill factors must be in (0, 1)")
            if mode in ("pa", "sweep") and any(v >= 0.5 for v in values):
                problems.append(
                    "sweep/values: proximity approximation requires fill < 0.5")
    return problems


def _sweep_values(sweep: dict) -> list[float]:
    if "values" in sweep:
        return [float(v) for v in sweep["values"]]
    rng = sweep["range"]
    n = rng["count"]
    if rng["spacing"] == "log":
        lo, hi = math.log(rng["start"]), math.log(rng["stop"])
        return [math.exp(lo + (hi - lo) * i / (n - 1)) for i in range(n)]
    return [rng["start"] + (rng["stop"] - rng["start"]) * i / (n - 1)
            for i in range(n)]


def _material(ref: str):
    if ref == "builtin:SiO2-oscillator":
        return sio2_oscillator_model()
    if ref == "builtin:SiO2-table":
        return sio2_nk_table()
    if ref.startswith("builtin:"):
        raise ConfigError(f"unknown builtin material '{ref}'")
    try:
        return load_nk_table_file(ref)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"material table '{ref}': {exc}") from exc


def _numerics(config: dict) -> NumericsConfig:
    block = dict(config.get("numerics", {}))
    if "omega_window_rad_s" in block:
        block["omega_window"] = tuple(block.pop("omega_window_rad_s"))
    env = os.environ.get(WORKERS_ENV)
    if env:
        block["workers"] = int(env)
    try:
        return NumericsConfig(**block)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"numerics: {exc}") from exc


def _planar_numerics(numerics: NumericsConfig) -> PlanarNumerics:
    return PlanarNumerics(omega_rel_tol=min(numerics.omega_rel_tol, 1e-4),
                          omega_window=numerics.omega_window)


def _geometry(config: dict) -> GratingGeometry | None:
    block = config.get("geometry")
    if block is None:
        return None
    return GratingGeometry(period=block["period_nm"] * _NM,
                           depth=block["depth_nm"] * _NM,
                           fill=block["fill"],
                           delta=block.get("delta_nm", 0.0) * _NM)


def _apply_axis(point, geometry, gap):
    axis, value = point
    if axis == "L":
        return geometry, value * _NM
    if axis == "d":
        return replace(geometry, period=value * _NM), gap
    if axis == "p":
        return replace(geometry, fill=value), gap
    return replace(geometry, delta=value * _NM), gap


def _fmt(x) -> str:
    if x is None:
        return ""
    return f"{x:.8e}"


def _row_common(config, geometry, gap, axis, value):
    temps = config["temperatures"]
    row = {
        "mode": config["mode"],
        "material": config["material"],
        "sweep_axis": axis or "",
        "sweep_value": _fmt(value) if value is not None else "",
        "L_nm": _fmt(gap / _NM),
        "T1_K": _fmt(temps["t1_K"]),
        "T2_K": _fmt(temps["t2_K"]),
    }
    if geometry is not None:
        row.update({
            "d_nm": _fmt(geometry.period / _NM),
            "a_nm": _fmt(geometry.depth / _NM),
            "p": _fmt(geometry.fill),
            "delta_nm": _fmt(geometry.delta / _NM),
        })
    else:
        row.update({"d_nm": "", "a_nm": "", "p": "", "delta_nm": ""})
    return row


_COLUMNS = {
    "plane": ["h0_W_per_m2K", "h0_err_W_per_m2K", "h0_prop_s_W_per_m2K",
              "h0_prop_p_W_per_m2K", "h0_evan_s_W_per_m2K",
              "h0_evan_p_W_per_m2K", "flagged"],
    "grating": ["h_W_per_m2K", "h_err_W_per_m2K", "n_orders", "flagged"],
    "pa": ["h_pa_W_per_m2K", "h_pa_err_W_per_m2K", "flagged"],
    "modulation": ["h_delta0_W_per_m2K", "h_delta0_err_W_per_m2K",
                   "h_deltahalf_W_per_m2K", "h_deltahalf_err_W_per_m2K",
                   "modulation_factor", "n_orders", "flagged"],
    "sweep": ["h_delta0_W_per_m2K", "h_delta0_err_W_per_m2K",
              "h_deltahalf_W_per_m2K", "h_deltahalf_err_W_per_m2K",
              "h_pa_delta0_W_per_m2K", "h_pa_deltahalf_W_per_m2K",
              "modulation_factor", "n_orders", "flagged"],
}


def _run_point(config, material, thermal, numerics, geometry, gap,
               axis=None, value=None):
    mode = config["mode"]
    row = _row_common(config, geometry, gap, axis, value)
    flagged = False
    if mode == "plane":
        res = planar_heat_transfer(material, gap, thermal,
                                   _planar_numerics(numerics))
        row.update({"h0_W_per_m2K": _fmt(res.value),
                    "h0_err_W_per_m2K": _fmt(res.error),
                    "h0_prop_s_W_per_m2K": _fmt(res.prop_s),
                    "h0_prop_p_W_per_m2K": _fmt(res.prop_p),
                    "h0_evan_s_W_per_m2K": _fmt(res.evan_s),
                    "h0_evan_p_W_per_m2K": _fmt(res.evan_p)})
        flagged = res.flagged
    elif mode == "grating":
        res = heat_transfer_coefficient(geometry, material, gap, thermal,
                                        numerics)
        row.update({"h_W_per_m2K": _fmt(res.value),
                    "h_err_W_per_m2K": _fmt(res.error),
                    "n_orders": str(res.n_orders)})
        flagged = res.flagged
    elif mode == "pa":
        res = proximity_heat_transfer(geometry, material, gap, thermal,
                                      _planar_numerics(numerics))
        row.update({"h_pa_W_per_m2K": _fmt(res.value),
                    "h_pa_err_W_per_m2K": _fmt(res.error)})
        flagged = res.flagged
    elif mode == "modulation":
        a = heat_transfer_coefficient(replace(geometry, delta=0.0), material,
                                      gap, thermal, numerics)
        b = heat_transfer_coefficient(
            replace(geometry, delta=0.5 * geometry.period), material, gap,
            thermal, numerics)
        row.update({"h_delta0_W_per_m2K": _fmt(a.value),
                    "h_delta0_err_W_per_m2K": _fmt(a.error),
                    "h_deltahalf_W_per_m2K": _fmt(b.value),
                    "h_deltahalf_err_W_per_m2K": _fmt(b.error),
                    "modulation_factor": _fmt(a.value / b.value),
                    "n_orders": str(a.n_orders)})
        flagged = a.flagged or b.flagged
    else:  # sweep: full comparison row
        a = heat_transfer_coefficient(replace(geometry, delta=0.0), material,
                                      gap, thermal, numerics)
        b = heat_transfer_coefficient(
            replace(geometry, delta=0.5 * geometry.period), material, gap,
            thermal, numerics)
        planar_cfg = _planar_numerics(numerics)
        pa0 = proximity_heat_transfer(replace(geometry, delta=0.0), material,
                                      gap, thermal, planar_cfg)
        pah = proximity_heat_transfer(
            replace(geometry, delta=0.5 * geometry.period), material, gap,
            thermal, planar_cfg)
        row.update({"h_delta0_W_per_m2K": _fmt(a.value),
                    "h_delta0_err_W_per_m2K": _fmt(a.error),
                    "h_deltahalf_W_per_m2K": _fmt(b.value),
                    "h_deltahalf_err_W_per_m2K": _fmt(b.error),
                    "h_pa_delta0_W_per_m2K": _fmt(pa0.value),
                    "h_pa_deltahalf_W_per_m2K": _fmt(pah.value),
                    "modulation_factor": _fmt(a.value / b.value),
                    "n_orders": str(a.n_orders)})
        flagged = a.flagged or b.flagged or pa0.flagged or pah.flagged
    row["flagged"] = "1" if flagged else "0"
    return row, flagged


def run_job(config: dict, out_dir: str, config_bytes: bytes,
            points_parallel: bool = False):
    """Execute a validated config; returns (rows, any_flagged, manifest)."""
    mode = config["mode"]
    material = _material(config["material"])
    temps = config["temperatures"]
    thermal = ThermalState(temps["t1_K"], temps["t2_K"])
    numerics = _numerics(config)
    geometry = _geometry(config)
    gap = config["gap_nm"] * _NM

    sweep = config.get("sweep")
    t0 = time.perf_counter()
    if sweep is None:
        tasks = [(None, None)]
    else:
        axis = sweep["axis"]
        tasks = [(axis, v) for v in _sweep_values(sweep)]

    def point(task):
        axis, value = task
        g, l = (geometry, gap) if axis is None else _apply_axis(
            (axis, value), geometry, gap)
        return _run_point(config, material, thermal, numerics, g, l,
                          axis, value)

    if points_parallel and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=min(4, len(tasks))) as pool:
            results = list(pool.map(point, tasks))
    else:
        results = [point(t) for t in tasks]
    wall = time.perf_counter() - t0

    rows = [r for r, _ in results]
    any_flagged = any(f for _, f in results)
    manifest = {
        "tool_version": __version__,
        "config_sha256": hashlib.sha256(config_bytes).hexdigest(),
        "constants_version": CONSTANTS_VERSION,
        "wall_time_s": wall,
        "rows": len(rows),
        "flagged_rows": sum(1 for _, f in results if f),
    }

    os.makedirs(out_dir, exist_ok=True)
    header = ["mode", "material", "sweep_axis", "sweep_value", "d_nm", "a_nm",
              "p", "delta_nm", "L_nm", "T1_K", "T2_K"] + _COLUMNS[mode]
    with open(os.path.join(out_dir, "results.csv"), "w", encoding="utf-8",
              newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=header)
        writer.writeheader()
        writer.writerows(rows)
    with open(os.path.join(out_dir, "manifest.json"), "w",
              encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return rows, any_flagged, manifest


def preset_names() -> list[str]:
    root = resources.files("gratflux.presets")
    return sorted(p.name[:-5] for p in root.iterdir()
                  if p.name.endswith(".json"))


def preset_bytes(name: str) -> bytes:
    candidate = resources.files("gratflux.presets").joinpath(f"{name}.json")
    try:
        return candidate.read_bytes()
    except (FileNotFoundError, OSError):
        raise ConfigError(
            f"unknown preset '{name}'; available: {', '.join(preset_names())}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gratflux",
        description="near-field heat transfer between lamellar gratings")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a job config or preset")
    p_run.add_argument("config", nargs="?", help="path to a JSON job config")
    p_run.add_argument("--preset", help="name of a shipped preset")
    p_run.add_argument("--out", default=".", help="output directory")
    p_run.add_argument("--strict", action="store_true",
                       help="exit 1 if any row is flagged")
    p_run.add_argument("--points-parallel", action="store_true",
                       help="run sweep points concurrently")

    p_val = sub.add_parser("validate", help="validate a job config")
    p_val.add_argument("config", help="path to a JSON job config")

    sub.add_parser("presets", help="list shipped presets")

    args = parser.parse_args(argv)

    if args.command == "presets":
        for name in preset_names():
            print(name)
        return 0

    if args.command == "validate":
        try:
            load_config(args.config)
        except ConfigError as exc:
            print(exc, file=sys.stderr)
            return 2
        print("ok")
        return 0

    # run
    try:
        if (args.config is None) == (args.preset is None):
            raise ConfigError("give either a config path or --preset")
        if args.preset:
            raw = preset_bytes(args.preset)
            config = json.loads(raw)
            validate_config(config)
        else:
            with open(args.config, "rb") as fh:
                raw = fh.read()
            config = load_config(args.config)
        _, any_flagged, manifest = run_job(config, args.out, raw,
                                           args.points_parallel)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    print(f"wrote {manifest['rows']} rows to {args.out}/results.csv "
          f"({manifest['flagged_rows']} flagged, "
          f"{manifest['wall_time_s']:.1f} s)")
    if args.strict and any_flagged:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

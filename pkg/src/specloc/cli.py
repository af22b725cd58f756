"""Command-line front end: scenario configs, figure-data sweeps and CSV/JSON
emission.

Every command is deterministic given its config (seeds included), writes its
files atomically and drops a manifest JSON recording the config hash and
library versions.  Physical quantities in config keys carry explicit units
(`kappa_t_per_al`, `rho_al`, `lambda_t`, ...), with t = a_l = 1 internally.

Exit codes: 0 success, 2 config error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np
import scipy
import jsonschema

from . import __version__
from .anderson import EnsembleSpec, run_ensemble
from .bounds import BoundParams, defect_bound, kappa_window_global, kappa_window_relative
from .flow import make_path, spectral_flow, support_sites
from .lattice import (
    DisorderSpec,
    Disk,
    HaldaneParams,
    apply_disorder,
    build_haldane,
    build_heterostructure,
    build_ssh,
)
from .linalg import SolverError
from .localgap import dos_window_curve, local_gap, local_gap_profile, squared_operator
from .localizer import Probe, assemble, half_signature, probe_report
from .tapering import build_profile, cf_fourier, cf_sweep

CONFIG_SCHEMA_VERSION = 1

_num = {"type": "number"}
_haldane_block = {
    "type": "object",
    "additionalProperties": False,
    "properties": {"t": _num, "t_c": _num, "phi": _num, "M": _num},
}
_point = {
    "oneOf": [
        {"type": "string",
         "enum": ["center", "west", "east", "center-left", "center-right"]},
        {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
    ]
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "lattice"],
    "properties": {
        "schema_version": {"const": CONFIG_SCHEMA_VERSION},
        "lattice": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["haldane", "heterostructure", "ssh"]},
                "nx": {"type": "integer", "minimum": 1},
                "ny": {"type": "integer", "minimum": 1},
                "boundary": {"enum": ["open", "periodic"]},
                "t": _num, "t_c": _num, "phi": _num, "M": _num,
                "left": _haldane_block, "right": _haldane_block,
                "n_cells": {"type": "integer", "minimum": 1},
                "t1": _num, "t2": _num,
            },
        },
        "probe": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "x": _point,
                "rho_al": {"type": "number", "exclusiveMinimum": 0},
                "shape": {"enum": ["ball", "box"]},
            },
        },
        "localizer": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kappa_t_per_al": {"type": "number", "exclusiveMinimum": 0},
                "E_t": _num,
                "C_F": {"type": "number", "exclusiveMinimum": 0},
                "a": {"type": "number", "minimum": 0},
                "b": {"type": "number", "minimum": 0},
                "c": {"type": "number", "minimum": 0},
            },
        },
        "disorder": {
            "type": "object",
            "additionalProperties": False,
            "required": ["lambda_t", "seed"],
            "properties": {
                "lambda_t": _num,
                "seed": {"type": "integer"},
                "disk_center": _point,
                "disk_radius_al": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "rho_grid_al": {"type": "array", "items": _num},
                "kappa_grid_t_per_al": {"type": "array", "items": _num},
                "energy_grid_t": {"type": "array", "items": _num},
                "sigma_t": {"type": "number", "exclusiveMinimum": 0},
                "x_profile": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["from", "to", "n"],
                    "properties": {
                        "from": _point, "to": _point,
                        "n": {"type": "integer", "minimum": 1},
                    },
                },
                "path": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["from", "to"],
                    "properties": {
                        "from": _point, "to": _point,
                        "n_t": {"type": "integer", "minimum": 2},
                    },
                },
                "lambda_list_t": {"type": "array", "items": _num},
                "seeds": {"type": "array", "items": {"type": "integer"}},
                "n_realizations": {"type": "integer", "minimum": 1},
                "k_list": {"type": "array", "items": _num},
                "family": {"enum": ["beta", "exp"]},
                "delta_al": {"type": "number", "exclusiveMinimum": 0},
                "defect_strength_t": _num,
                "defect_n": {"type": "integer", "minimum": 1},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"prefix": {"type": "string"}},
        },
    },
}


class ConfigError(ValueError):
    pass


def _key_line(text: str, key: str) -> int | None:
    for lineno, line in enumerate(text.splitlines(), start=1):
        if f'"{key}"' in line:
            return lineno
    return None


def load_config(path: Path) -> dict:
    """Parse and schema-validate a config file; raises ConfigError with a
    best-effort line reference on failure."""
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"{path}: {err}") from err
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}:{err.lineno}: invalid JSON: {err.msg}") from err
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as err:
        key = None
        for part in reversed(list(err.absolute_path)):
            if isinstance(part, str):
                key = part
                break
        line = _key_line(text, key) if key else None
        where = f"{path}:{line}" if line else str(path)
        raise ConfigError(f"{where}: {err.message}") from err
    return cfg


# ---------------------------------------------------------------------------
# config resolution


def _build_lattice(cfg: dict):
    blk = cfg["lattice"]
    kind = blk["kind"]
    if kind == "ssh":
        for k in ("n_cells", "t1", "t2"):
            if k not in blk:
                raise ConfigError(f"lattice.{k} required for ssh")
        return build_ssh(blk["n_cells"], blk["t1"], blk["t2"])
    if "nx" not in blk or "ny" not in blk:
        raise ConfigError("lattice.nx and lattice.ny required")
    if kind == "haldane":
        p = HaldaneParams(blk.get("t", 1.0), blk.get("t_c", 0.0),
                          blk.get("phi", 0.0), blk.get("M", 0.0))
        return build_haldane(blk["nx"], blk["ny"], p, blk.get("boundary", "open"))
    if kind == "heterostructure":
        if "left" not in blk or "right" not in blk:
            raise ConfigError("lattice.left and lattice.right required")
        left = HaldaneParams(**{k: blk["left"].get(k, 0.0) for k in ("t", "t_c", "phi", "M")})
        right = HaldaneParams(**{k: blk["right"].get(k, 0.0) for k in ("t", "t_c", "phi", "M")})
        return build_heterostructure(blk["nx"], blk["ny"], left, right)
    raise ConfigError(f"unknown lattice kind {kind!r}")


def _resolve_point(lat, spec):
    if isinstance(spec, (list, tuple)):
        return np.asarray(spec, dtype=float)[: lat.dimension]
    lo = lat.positions.min(axis=0)
    hi = lat.positions.max(axis=0)
    c = 0.5 * (lo + hi)
    mid = c[1:]  # remaining coordinates stay on the centerline
    points = {
        "center": c,
        "west": np.concatenate([[lo[0]], mid]),
        "east": np.concatenate([[hi[0]], mid]),
        "center-left": np.concatenate([[0.5 * (lo[0] + c[0])], mid]),
        "center-right": np.concatenate([[0.5 * (c[0] + hi[0])], mid]),
    }
    return points[spec]


def _probe(cfg, lat) -> Probe:
    pblk = cfg.get("probe", {})
    lblk = cfg.get("localizer", {})
    x = _resolve_point(lat, pblk.get("x", "center"))
    return Probe(tuple(x), pblk.get("rho_al", 10.0),
                 lblk.get("kappa_t_per_al", 0.2), lblk.get("E_t", 0.0),
                 pblk.get("shape", "ball"))


def _bound_params(cfg) -> BoundParams:
    lblk = cfg.get("localizer", {})
    return BoundParams(a=lblk.get("a", 3 / 20), b=lblk.get("b", 0.5),
                       c=lblk.get("c"), C_F=lblk.get("C_F", 2.0))


def _apply_config_disorder(cfg, lat, H):
    blk = cfg.get("disorder")
    if blk is None:
        return H
    region = None
    if "disk_radius_al" in blk:
        center = _resolve_point(lat, blk.get("disk_center", "center"))
        region = Disk(tuple(center), blk["disk_radius_al"])
    return apply_disorder(H, lat, DisorderSpec(blk["lambda_t"], blk["seed"], region))


# ---------------------------------------------------------------------------
# output helpers


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path: Path, header: list[str], rows, comments: list[str] = ()):
    """Atomic CSV write; float cells use repr for byte-stable round trips."""
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as fh:
        for comment in comments:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    os.replace(tmp, path)


def _write_json(path: Path, payload: dict):
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def _manifest(out: Path, command: str, cfg_path: Path, outputs: list[str],
              t_start: float):
    digest = hashlib.sha256(cfg_path.read_bytes()).hexdigest()
    _write_json(out / "manifest.json", {
        "command": command,
        "config": str(cfg_path),
        "config_sha256": digest,
        "schema_version": CONFIG_SCHEMA_VERSION,
        "specloc_version": __version__,
        "numpy_version": np.__version__,
        "scipy_version": scipy.__version__,
        "runtime_seconds": time.time() - t_start,
        "outputs": sorted(outputs),
    })


_PLOT_SCRIPT = """\
#!/usr/bin/env python3
\"\"\"Generic plotter for the CSV files emitted alongside this script.\"\"\"
import csv
import sys
from pathlib import Path

import matplotlib.pyplot as plt

for path in sorted(Path(__file__).parent.glob("*.csv")):
    with open(path) as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    header, data = rows[0], rows[1:]
    if len(header) < 2 or not data:
        continue
    xs = [float(r[0]) for r in data]
    plt.figure()
    for j in range(1, len(header)):
        ys = [float(r[j]) if r[j] else float("nan") for r in data]
        plt.plot(xs, ys, label=header[j])
    plt.xlabel(header[0])
    plt.legend()
    plt.title(path.name)
    plt.savefig(path.with_suffix(".png"))
    print("wrote", path.with_suffix(".png"))
"""


# ---------------------------------------------------------------------------
# commands


def cmd_local_gap(cfg, out: Path, args) -> list[str]:
    lat, H0 = _build_lattice(cfg)
    H = _apply_config_disorder(cfg, lat, H0)
    probe = _probe(cfg, lat)
    sweep = cfg.get("sweep", {})
    outputs = []
    did_any = False
    square = squared_operator(H, probe.E)
    if "rho_grid_al" in sweep:
        rows = []
        for rho in sweep["rho_grid_al"]:
            g = local_gap(H, probe.x, rho, probe.E, probe.shape, square=square)
            rows.append((rho, g.g_rho))
        write_csv(out / "rho_sweep.csv", ["rho", "g_rho"], rows)
        outputs.append("rho_sweep.csv")
        did_any = True
    if "x_profile" in sweep:
        blk = sweep["x_profile"]
        a = _resolve_point(lat, blk["from"])
        b = _resolve_point(lat, blk["to"])
        ts = np.linspace(0.0, 1.0, blk["n"])
        centers = [a + t * (b - a) for t in ts]
        res = local_gap_profile(H, lat, centers, probe.rho, probe.E, probe.shape)
        rows = [(c[0], r.g_rho) for c, r in zip(centers, res)]
        write_csv(out / "x_profile.csv", ["x", "g_rho"], rows)
        outputs.append("x_profile.csv")
        did_any = True
    if "energy_grid_t" in sweep:
        sigma = sweep.get("sigma_t", 0.05)
        energies = sweep["energy_grid_t"]
        dos = dos_window_curve(H, energies, sigma)
        write_csv(out / "dos.csv", ["E", "dos"], list(zip(energies, dos)))
        outputs.append("dos.csv")
        did_any = True
    if not did_any:
        raise ConfigError("local-gap needs at least one sweep block "
                          "(rho_grid_al, x_profile or energy_grid_t)")
    return outputs


def cmd_kappa_bounds(cfg, out: Path, args) -> list[str]:
    lat, H = _build_lattice(cfg)
    probe = _probe(cfg, lat)
    params = _bound_params(cfg)
    sweep = cfg.get("sweep", {})
    strength = sweep.get("defect_strength_t", 7.0)
    n_def = sweep.get("defect_n", 8)
    x = np.asarray(probe.x)
    east = _resolve_point(lat, "east")
    rows = []
    import scipy.sparse as sp

    from .lattice import HermitianOperator

    for frac in np.linspace(0.0, 1.0, n_def):
        y_target = x + frac * (east - x)
        site = int(np.argmin(lat.distances_from(y_target)))
        y = lat.positions[site]
        wmat = sp.csr_matrix(
            ([complex(strength)], ([site], [site])),
            shape=H.matrix.shape, dtype=complex,
        )
        W = HermitianOperator(wmat, lat)
        Hw = H + W
        g = local_gap(Hw, probe.x, probe.rho, probe.E).g_rho
        w10 = kappa_window_relative(Hw, lat, probe.x, g, probe.rho, params,
                                    kappa_probe=probe.kappa, variant="cond10")
        w11 = kappa_window_global(Hw, lat, probe.x, g, probe.rho, params.b,
                                  params.C_F)
        w12 = kappa_window_relative(Hw, lat, probe.x, g, probe.rho, params,
                                    variant="cond12")
        wdef = defect_bound(H, W, lat, probe.x, y, probe.rho, params.C_F)
        rows.append((y[0], w10.upper, w11.upper, w12.upper, w10.lower,
                     wdef.upper, int(w10.admissible)))
    write_csv(out / "kappa_bounds.csv",
              ["x_def", "upper_cond10", "upper_cond11", "upper_cond12",
               "lower", "upper_defect", "admissible"], rows)
    return ["kappa_bounds.csv"]


def cmd_localizer(cfg, out: Path, args) -> list[str]:
    lat, H0 = _build_lattice(cfg)
    H = _apply_config_disorder(cfg, lat, H0)
    probe = _probe(cfg, lat)
    sweep = cfg.get("sweep", {})
    kappas = sweep.get("kappa_grid_t_per_al", [probe.kappa])
    rhos = sweep.get("rho_grid_al", [probe.rho])
    square = squared_operator(H, probe.E)
    rows = []
    for kappa in kappas:
        for rho in rhos:
            g = local_gap(H, probe.x, rho, probe.E, probe.shape, square=square).g_rho
            p = Probe(probe.x, rho, kappa, probe.E, probe.shape)
            res = half_signature(assemble(H, lat, p))
            ratio = g / res.mu if res.mu > 0 else np.inf
            rows.append((kappa, rho, res.mu, res.half_signature, g, ratio))
    write_csv(out / "localizer_sweep.csv",
              ["kappa", "rho", "mu", "index", "g_rho", "ratio"], rows)
    report = probe_report(H, lat, probe)
    _write_json(out / "localizer_report.json", report.to_json_dict())
    return ["localizer_sweep.csv", "localizer_report.json"]


def cmd_flow(cfg, out: Path, args) -> list[str]:
    lat, H = _build_lattice(cfg)
    probe = _probe(cfg, lat)
    sweep = cfg.get("sweep", {})
    if "path" not in sweep:
        raise ConfigError("flow needs sweep.path")
    blk = sweep["path"]
    x0 = _resolve_point(lat, blk["from"])
    x1 = _resolve_point(lat, blk["to"])
    path = make_path(lat, x0, x1, probe.rho, n_t=blk.get("n_t", 21))

    systems = [("clean", H)]
    if "disorder" in cfg:
        systems.append(("disordered", _apply_config_disorder(cfg, lat, H)))

    outputs = []
    flow_payload = {}
    for label, ham in systems:
        res = spectral_flow(ham, lat, probe, path)
        n_eig = min(8, 2 * path.lambda_indices.size - 2)
        from .flow import _LocalizerFamily

        family = _LocalizerFamily(ham, lat, probe, path)
        spec_rows = []
        for t in path.t_grid:
            w, _ = family.eigs(t, k=n_eig)
            spec_rows.append((t, *np.sort(w)))
        name = f"spectrum_{label}.csv"
        write_csv(out / name,
                  ["t"] + [f"eig_{j + 1}" for j in range(n_eig)], spec_rows)
        outputs.append(name)

        prof_rows = []
        for t in path.t_grid:
            p = Probe(tuple(path.point(t)), probe.rho, probe.kappa, probe.E)
            r = half_signature(assemble(ham, lat, p, lambda_set=path.lambda_indices))
            prof_rows.append((t, r.mu, r.half_signature))
        name = f"profile_{label}.csv"
        write_csv(out / name, ["t", "mu", "index"], prof_rows)
        outputs.append(name)

        flow_payload[label] = {
            "flow": res.flow,
            "endpoint_indices": list(res.endpoint_indices),
            "crossings": [[t, s] for t, s in res.crossings],
            "method_agreement": res.method_agreement,
        }
    _write_json(out / "flow.json", flow_payload)
    outputs.append("flow.json")
    return outputs


def cmd_anderson(cfg, out: Path, args) -> list[str]:
    blk = cfg["lattice"]
    if blk["kind"] != "haldane":
        raise ConfigError("anderson runs on haldane lattices")
    sweep = cfg.get("sweep", {})
    if "lambda_list_t" not in sweep:
        raise ConfigError("anderson needs sweep.lambda_list_t")
    seeds = sweep.get("seeds")
    if args.seed_override is not None:
        n = len(seeds) if seeds else sweep.get("n_realizations", 1)
        seeds = [args.seed_override + i for i in range(n)]
    if not seeds:
        raise ConfigError("anderson needs sweep.seeds or --seed-override")
    n_real = sweep.get("n_realizations", len(seeds))
    if n_real != len(seeds):
        raise ConfigError("sweep.n_realizations must equal len(sweep.seeds)")
    lat_probe, _ = _build_lattice(cfg)
    probe = _probe(cfg, lat_probe)
    spec = EnsembleSpec(
        nx=blk["nx"], ny=blk["ny"],
        params=HaldaneParams(blk.get("t", 1.0), blk.get("t_c", 0.0),
                             blk.get("phi", 0.0), blk.get("M", 0.0)),
        lambda_list=tuple(sweep["lambda_list_t"]),
        seeds=tuple(int(s) for s in seeds),
        probe=probe,
        rho_grid=tuple(sweep.get("rho_grid_al", [probe.rho])),
        boundary=blk.get("boundary", "periodic"),
        sigma=sweep.get("sigma_t", 0.05),
    )
    stats = run_ensemble(spec, threads=args.threads)
    seed_comment = "seeds: " + ",".join(str(s) for s in spec.seeds)
    rows = [(r.lam, r.seed, r.rho, r.g_rho, r.mu, r.index, r.ratio, r.dos0)
            for r in stats.rows]
    write_csv(out / "realizations.csv",
              ["lambda", "seed", "rho", "g_rho", "mu", "index", "ratio", "dos0"],
              rows, comments=[seed_comment])
    agg_rows = [
        (a["lambda"], a["rho"], a["mean_g_rho"], a["std_g_rho"], a["mean_mu"],
         a["std_mu"], a["mean_index"], a["std_index"], a["mean_ratio"],
         a["std_ratio"], a["mean_dos0"], a["std_dos0"], a["n_undefined"])
        for a in stats.aggregate
    ]
    write_csv(out / "aggregate.csv",
              ["lambda", "rho", "mean_g_rho", "std_g_rho", "mean_mu", "std_mu",
               "mean_index", "std_index", "mean_ratio", "std_ratio",
               "mean_dos0", "std_dos0", "n_undefined"],
              agg_rows, comments=[seed_comment])
    _write_json(out / "ensemble_spec.json", spec.to_json_dict())
    return ["realizations.csv", "aggregate.csv", "ensemble_spec.json"]


def cmd_tapering(cfg, out: Path, args) -> list[str]:
    sweep = cfg.get("sweep", {})
    family = sweep.get("family", "beta")
    k_list = sweep.get("k_list", [0, 1, 2, 3])
    outputs = []
    fourier_rows = [(k, cf_fourier(build_profile(family, k))) for k in k_list]
    write_csv(out / "cf_fourier.csv", ["k", "cf_fourier"], fourier_rows)
    outputs.append("cf_fourier.csv")
    if "rho_grid_al" in sweep:
        lat, H = _build_lattice(cfg)
        x = _resolve_point(lat, cfg.get("probe", {}).get("x", "center"))
        rows = cf_sweep(H, lat, x, sweep["rho_grid_al"], family, k_list,
                        delta=sweep.get("delta_al"))
        kind = cfg["lattice"]["kind"]
        write_csv(out / "cf_direct.csv",
                  ["k", "rho", "cf_estimate", "lattice"],
                  [(r["k"], r["rho"], r["cf_estimate"], kind) for r in rows])
        outputs.append("cf_direct.csv")
    return outputs


def cmd_validate(cfg, out: Path, args) -> list[str]:
    sys.stdout.write("config ok\n")
    return []


COMMANDS = {
    "local-gap": cmd_local_gap,
    "kappa-bounds": cmd_kappa_bounds,
    "localizer": cmd_localizer,
    "flow": cmd_flow,
    "anderson": cmd_anderson,
    "tapering": cmd_tapering,
    "validate-config": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specloc",
        description="Local topological invariants via the spectral localizer",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path, default=Path("."))
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--seed-override", type=int, default=None)
        p.add_argument("--emit-plot-script", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t_start = time.time()
    try:
        cfg = load_config(args.config)
    except ConfigError as err:
        sys.stderr.write(f"config error: {err}\n")
        return 2
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    try:
        outputs = COMMANDS[args.command](cfg, out, args)
    except ConfigError as err:
        sys.stderr.write(f"config error: {err}\n")
        return 2
    except (SolverError, np.linalg.LinAlgError) as err:
        sys.stderr.write(f"solver failure: {err}\n")
        return 3
    if args.emit_plot_script and outputs:
        script = out / f"plot_{args.command}.py"
        script.write_text(_PLOT_SCRIPT)
        outputs.append(script.name)
    if args.command != "validate-config":
        _manifest(out, args.command, args.config, outputs, t_start)
    return 0


if __name__ == "__main__":
    sys.exit(main())

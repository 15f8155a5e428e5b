"""Command-line entry points: ``coneatoms gate|demo|compare|lattice|norms``.

Exit codes: 0 ok, 2 parameter gate refused, 3 frame iteration did not
converge, 64 usage error. Every CSV starts with ``# config_hash=<hash>`` and
every JSON file carries the same hash.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import atoms, cones, crcompare, lattice, spectral, tube
from .besov import ParamSet, besov_norm, index_gate
from .pipeline import auto_grid, build_setup, bracket, roundtrip, sample_function, synthesis_ratios

EXIT_OK = 0
EXIT_GATE = 2
EXIT_NONCONVERGENCE = 3
EXIT_USAGE = 64

DEMOS = {
    "uhp": {
        "cone": "halfline",
        "grid": {"N": 4096, "L": [8.0], "center": [8.0]},
        "lattice": {"delta": 0.25, "lambda": 2.0,
                    "region": {"det_min": math.exp(-1.5), "det_max": math.exp(1.5),
                               "radius_max": 1.5}},
        "params": {"p": 2.0, "q": 2.0, "nu": 1.0},
        "atom": {"spatial_step": 1.0, "tol": 1e-4, "max_iter": 200, "mother_radius": 1.0},
        "tube": {"log_range": [-14.0, 4.0], "step": 0.1},
        "demo": {"functions": 5, "sequences": 10},
    },
    "lightcone": {
        "cone": "lorentz:3",
        "grid": {"N": 64},
        "lattice": {"delta": 0.25, "lambda": 2.0, "region": {"radius": 0.75}},
        "params": {"p": 2.0, "q": 2.0, "nu": 2.0},
        "atom": {"spatial_step": 1.0, "tol": 1e-4, "max_iter": 200, "mother_radius": 1.0},
        "tube": {"log_range": [-4.0, 2.0], "step": 0.5, "angular_radius": 1.5,
                 "angular_points": 5},
        "demo": {"functions": 5, "sequences": 10},
    },
    "spd": {
        "cone": "spd:2",
        "grid": {"N": 64},
        "lattice": {"delta": 0.25, "lambda": 2.0, "region": {"radius": 0.75}},
        "params": {"p": 2.0, "q": 2.0, "nu": 2.0},
        "atom": {"spatial_step": 1.0, "tol": 1e-4, "max_iter": 200, "mother_radius": 1.0},
        "tube": {"log_range": [-4.0, 2.0], "step": 0.5, "angular_radius": 1.5,
                 "angular_points": 5},
        "demo": {"functions": 5, "sequences": 10},
    },
}
KIND_DEFAULT = {"halfline": "uhp", "lorentz": "lightcone", "spd": "spd"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class RunConfig:
    """Effective configuration of one run (defaults merged with the user file)."""

    raw: dict
    out: str | None

    @property
    def seed(self):
        return int(self.raw.get("seed", 42))

    @property
    def cone(self):
        return cones.parse_cone(self.raw["cone"])

    @property
    def params(self):
        p = self.raw.get("params", {})
        return ParamSet(float(p.get("p", 2)), float(p.get("q", 2)), float(p.get("nu", 1)))

    @property
    def hash(self):
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @property
    def header(self):
        return f"# config_hash={self.hash}"

    def region(self):
        r = self.raw["lattice"].get("region", {})
        if "radius" in r:
            return lattice.Region.ball(float(r["radius"]), r.get("log_det_span"))
        return lattice.Region(float(r["det_min"]), float(r["det_max"]), float(r["radius_max"]))

    def grid(self):
        g = self.raw["grid"]
        N = int(g["N"])
        cone = self.cone
        if "L" in g:
            center = g.get("center", [0.0] * cone.n)
            return spectral.FrequencyGrid(cone.n, N, g["L"], center)
        radius = self.region().radius_max + float(self.raw["atom"].get("mother_radius", 1.0))
        return auto_grid(cone, radius, N)


def load_config(path, seed=None, demo=None, out=None):
    user = {}
    if path:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(user, dict):
            raise UsageError("config must be a JSON object")
    if demo is not None:
        base = DEMOS[demo]
    else:
        try:
            kind = cones.parse_cone(user.get("cone", "halfline")).kind
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        base = DEMOS[KIND_DEFAULT[kind]]
    raw = _merge(base, user)
    raw.pop("out", None)
    if seed is not None:
        raw["seed"] = seed
    raw.setdefault("seed", 42)
    cfg = RunConfig(raw, out if out is not None else user.get("out"))
    try:
        cfg.cone
        cfg.params
        g = raw["grid"]
        N = int(g["N"])
        if N < 2 or N & (N - 1):
            raise ValueError(f"grid N must be a power of two, got {N}")
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid config: {exc}") from exc
    return cfg


# -- output helpers ----------------------------------------------------------


def _outdir(cfg):
    d = cfg.out or "out"
    os.makedirs(d, exist_ok=True)
    return d


def _write_json(cfg, name, payload):
    payload = dict(payload)
    payload["config_hash"] = cfg.hash
    path = os.path.join(_outdir(cfg), name)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")
    return path


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not serializable: {type(v)}")


def _write_csv(cfg, name, header, rows):
    path = os.path.join(_outdir(cfg), name)
    with open(path, "w", newline="") as fh:
        fh.write(cfg.header + "\n")
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([_fmt(v) for v in row])
    return path


def _fmt(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


# -- commands ----------------------------------------------------------------


def cmd_gate(cfg):
    report = index_gate(cfg.cone, cfg.params)
    print(report.to_json())
    if cfg.out:
        _write_json(cfg, "gate.json", report.to_dict())
    return EXIT_OK if report.atomic_ok else EXIT_GATE


def cmd_compare(cfg):
    cone = cfg.cone
    p_values = cfg.raw.get("compare", {}).get("p_values")
    reports = crcompare.compare(cone, p_values)
    rows = [(r.p, r.r_ours, r.r_cr, r.nu_ours, r.nu_cr, r.dominates) for r in reports]
    path = _write_csv(cfg, "compare.csv", ["p", "r_ours", "r_cr", "nu_ours", "nu_cr", "dominates"],
                      rows)
    print(path)
    return EXIT_OK


def cmd_lattice(cfg):
    cone = cfg.cone
    lc = cfg.raw["lattice"]
    lat = lattice.build_lattice(cone, float(lc.get("delta", 0.5)), float(lc.get("lambda", 2.0)),
                                cfg.region(), seed=cfg.seed)
    rep = lattice.verify_covering(lat, int(lc.get("probes", 10_000)), cfg.seed)
    path = os.path.join(_outdir(cfg), "lattice.csv")
    lattice.write_lattice_csv(lat, path, cfg.header)
    _write_json(cfg, "lattice.json", {
        "cone": str(cone), "points": len(lat), "delta": lat.delta, "lambda": lat.lam,
        "packing": lat.verified_packing, "covering_fraction": rep.fraction,
        "covering_max_nearest": rep.max_nearest, "probes": rep.n_probes,
    })
    print(path)
    return EXIT_OK


def _setup(cfg):
    a = cfg.raw["atom"]
    lc = cfg.raw["lattice"]
    return build_setup(
        cfg.cone, cfg.grid(), cfg.region(), cfg.params,
        delta=float(lc.get("delta", 0.25)), lam=float(lc.get("lambda", 2.0)),
        spatial_step=float(a.get("spatial_step", 1.0)),
        mother_radius=float(a.get("mother_radius", 1.0)),
        tube_cfg={k: (tuple(v) if isinstance(v, list) else v) for k, v in cfg.raw["tube"].items()},
        seed=cfg.seed,
    )


def cmd_norms(cfg):
    report = index_gate(cfg.cone, cfg.params)
    if not report.embedding_ok:
        print(report.to_json())
        return EXIT_GATE
    s = _setup(cfg)
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for k in range(int(cfg.raw["demo"].get("functions", 5))):
        f = sample_function(s.cone, s.grid, rng)
        b = besov_norm(f, s.partition, s.params)
        F = tube.extend_full(f, s.tube_grid, s.partition, s.params)
        g = tube.bergman_norm(F, s.params)
        rows.append((k, b, g, g / b))
    path = _write_csv(cfg, "norms.csv", ["k", "besov", "bergman", "ratio"], rows)
    print(path)
    return EXIT_OK


def cmd_demo(cfg, name):
    report = index_gate(cfg.cone, cfg.params)
    if not report.atomic_ok:
        print(report.to_json())
        return EXIT_GATE
    a = cfg.raw["atom"]
    tol, max_iter = float(a.get("tol", 1e-4)), int(a.get("max_iter", 200))
    s = _setup(cfg)
    rng = np.random.default_rng(cfg.seed)
    rec_rows, ratio_rows = [], []
    last = None
    converged = True
    for k in range(int(cfg.raw["demo"].get("functions", 5))):
        f = sample_function(s.cone, s.grid, rng)
        res = roundtrip(s, f, tol, max_iter)
        converged &= res["converged"]
        rec_rows.append((k, res["residual"], res["tube_error"], res["iterations"], res["converged"]))
        ratio_rows.append((k, "coefficient", res["coefficient_ratio"]))
        last = res
    syn = synthesis_ratios(s, int(cfg.raw["demo"].get("sequences", 10)), cfg.seed + 1)
    ratio_rows.extend((k, "synthesis", r) for k, r in enumerate(syn))
    _write_csv(cfg, "reconstruction.csv",
               ["k", "boundary_residual", "tube_error", "iterations", "converged"], rec_rows)
    _write_csv(cfg, "norm_ratios.csv", ["k", "kind", "ratio"], ratio_rows)
    floor = float(cfg.raw["demo"].get("coefficient_floor", 1e-2))
    dumped = atoms.write_coefficients_csv(last["coeffs"], s.system,
                                          os.path.join(_outdir(cfg), "coefficients.csv"),
                                          cfg.header, floor)
    coef = [r[2] for r in ratio_rows if r[1] == "coefficient"]
    meta = {
        "demo": name,
        "cone": str(s.cone),
        "grid": s.grid.to_dict(),
        "lattice_points": len(s.lattice),
        "atoms": s.system.size,
        "coefficients_dumped": dumped,
        "coefficient_floor": floor,
        "frame_A": last["A"],
        "frame_B": last["B"],
        "max_tube_error": max(r[2] for r in rec_rows),
        "max_iterations": max(r[3] for r in rec_rows),
        "coefficient_bracket": bracket(coef),
        "synthesis_bracket": bracket(syn),
        "transform_constant": tube.transform_constant(s.cone.n),
        "kernel_constant": tube.calibrate_kernel_constant(s.cone),
        "gate": report.to_dict(),
        "converged": bool(converged),
        "config": cfg.raw,
    }
    _write_json(cfg, "metadata.json", meta)
    print(json.dumps({k: meta[k] for k in ("demo", "max_tube_error", "converged")}))
    return EXIT_OK if converged else EXIT_NONCONVERGENCE


def build_parser():
    parser = _Parser(prog="coneatoms", description=__doc__.splitlines()[0])
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--out", metavar="DIR")
    common.add_argument("--seed", type=int)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("gate", parents=[common], help="print the index report")
    d = sub.add_parser("demo", parents=[common], help="end-to-end tube round trip")
    d.add_argument("name", choices=sorted(DEMOS))
    sub.add_parser("compare", parents=[common], help="threshold comparison table")
    sub.add_parser("lattice", parents=[common], help="build and verify a cone lattice")
    sub.add_parser("norms", parents=[common], help="Besov and Bergman norms of test data")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.seed, getattr(args, "name", None), args.out)
    except UsageError as exc:
        print(f"coneatoms: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.command == "gate":
        return cmd_gate(cfg)
    if args.command == "compare":
        return cmd_compare(cfg)
    if args.command == "lattice":
        return cmd_lattice(cfg)
    if args.command == "norms":
        return cmd_norms(cfg)
    return cmd_demo(cfg, args.name)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: ``pointnls <command> [options]``.

Commands: profile, spectrum, slope, classify, evolve, sweep.  Every output
embeds the resolved configuration (a ``config`` key in JSON, a leading
``# config: {...}`` line in CSV) and can be fed back through ``--config``;
explicit flags override values from the file.

Exit status: 0 success, 2 invalid parameters, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .domain import DiscreteDomain, auto_truncation, h1_norm_sq
from .dynamics import EvolutionConfig, evolve, write_snapshots
from .errors import NumericalError, PointNLSError, ValidationError
from .gss import analyze, threshold
from .operators import assemble, count_zeros, spectral_report
from .profiles import (GRAPH_DELTA, GRAPH_DELTA_PRIME, LINE_DELTA, LINE_DELTA_PRIME,
                       LINE_DELTA_REPULSIVE, InteractionModel, ProfileFamily, eval_profile,
                       make_profile, sample, stationary_residual, vertex_residuals)
from .slope import J1, find_omega_star, slope_J

MODELS = {
    "line-delta": LINE_DELTA,
    "line-delta-repulsive": LINE_DELTA_REPULSIVE,
    "line-delta-prime": LINE_DELTA_PRIME,
    "graph-delta": GRAPH_DELTA,
    "graph-delta-prime": GRAPH_DELTA_PRIME,
}
COMMANDS = ("profile", "spectrum", "slope", "classify", "evolve", "sweep")

DEFAULTS = {
    "model": "line-delta",
    "strength": 1.0,
    "edges": None,
    "omega": None,
    "p": 3.0,
    "variant": None,
    "bump": 0,
    "h": 0.01,
    "X": None,
    "operator": "L1",
    "subspace": "full",
    "k": 2,
    "dt": None,
    "t_final": 10.0,
    "eps": 0.0,
    "perturbation": "none",
    "record_every": None,
    "snapshot_every": 0,
    "find_omega_star": False,
    "omegas": None,
    "powers": None,
    "format": None,
}
# keys that steer where results go rather than what is computed
_NOT_CONFIG = ("output", "jobs", "config", "snapshots")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON config, or an earlier output file (JSON or CSV)")
    common.add_argument("--model", choices=sorted(MODELS))
    common.add_argument("--strength", type=float,
                        help="gamma (line-delta), beta (line-delta-prime), alpha (graph-delta), lambda (graph-delta-prime)")
    common.add_argument("--edges", type=int, help="number of half-lines of a star graph")
    common.add_argument("--omega", type=float)
    common.add_argument("--p", type=float, help="nonlinearity power p > 1")
    common.add_argument("--variant", choices=("even", "odd", "asymmetric", "tail", "bump"))
    common.add_argument("--bump", type=int, help="number of bump edges for --variant bump")
    common.add_argument("--h", type=float, help="mesh width")
    common.add_argument("--X", type=float, help="truncation length per edge (default: automatic)")
    common.add_argument("--output", "-o", help="output file (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"))

    parser = argparse.ArgumentParser(prog="pointnls", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("profile", parents=[common], help="sample a profile and its residuals")
    sp_ = sub.add_parser("spectrum", parents=[common], help="inertia, kernel and low eigenvalues")
    sp_.add_argument("--operator", choices=("L1", "L2"), default=argparse.SUPPRESS)
    sp_.add_argument("--subspace", choices=("full", "even_sector", "odd_sector", "edgewise_even"),
                     default=argparse.SUPPRESS)
    sp_.add_argument("--k", type=int, default=argparse.SUPPRESS, help="number of eigenpairs (<= 8)")
    sl = sub.add_parser("slope", parents=[common], help="norm, slope J and omega*")
    sl.add_argument("--find-omega-star", action="store_true", default=argparse.SUPPRESS)
    sl.add_argument("--omegas", default=argparse.SUPPRESS, help="grid 'a,b,c' or 'lo:hi:n'")
    sub.add_parser("classify", parents=[common], help="stability verdict")
    ev = sub.add_parser("evolve", parents=[common], help="time evolution of a perturbed wave")
    ev.add_argument("--dt", type=float, default=argparse.SUPPRESS)
    ev.add_argument("--t-final", type=float, dest="t_final", default=argparse.SUPPRESS)
    ev.add_argument("--eps", type=float, default=argparse.SUPPRESS)
    ev.add_argument("--perturbation", choices=("none", "relative_amplitude", "edge_asymmetric"),
                    default=argparse.SUPPRESS)
    ev.add_argument("--record-every", type=int, dest="record_every", default=argparse.SUPPRESS)
    ev.add_argument("--snapshot-every", type=int, dest="snapshot_every", default=argparse.SUPPRESS)
    ev.add_argument("--snapshots", default=argparse.SUPPRESS, help="binary snapshot file")
    sw = sub.add_parser("sweep", parents=[common], help="verdict grid over (omega, p)")
    sw.add_argument("--omegas", default=argparse.SUPPRESS, help="grid 'a,b,c' or 'lo:hi:n'")
    sw.add_argument("--powers", default=argparse.SUPPRESS, help="grid 'a,b,c' or 'lo:hi:n'")
    sw.add_argument("--jobs", type=int, default=argparse.SUPPRESS,
                    help="worker processes (default $PNLS_DEFAULT_JOBS or 1)")
    return parser


def load_config_file(path: str) -> dict:
    with open(path) as fh:
        text = fh.read()
    first = text.lstrip().splitlines()[0] if text.strip() else ""
    if first.startswith("# config:"):
        return json.loads(first[len("# config:"):])
    data = json.loads(text)
    return data.get("config", data)


def resolve_config(argv=None) -> dict:
    args = vars(build_parser().parse_args(argv))
    cfg = dict(DEFAULTS)
    if "config" in args:
        cfg.update({k: v for k, v in load_config_file(args["config"]).items() if k != "command"})
    cfg.update(args)
    cfg["command"] = args["command"]
    if cfg["format"] is None:
        cfg["format"] = "csv" if cfg["command"] in ("evolve", "sweep") else "json"
    if cfg["model"] not in MODELS:
        raise ValidationError(f"unknown model {cfg['model']!r}")
    kind = MODELS[cfg["model"]]
    if kind.startswith("line"):
        if cfg["edges"] not in (None, 2):
            raise ValidationError("line models have exactly two half-lines")
        cfg["edges"] = 2
    elif cfg["edges"] is None:
        raise ValidationError("graph models need --edges")
    return cfg


def _grid(text) -> list[float]:
    if text is None:
        return []
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    text = str(text)
    if ":" in text:
        lo, hi, n = text.split(":")
        return [float(v) for v in np.linspace(float(lo), float(hi), int(n))]
    return [float(v) for v in text.split(",") if v.strip()]


def _model(cfg) -> InteractionModel:
    return InteractionModel(MODELS[cfg["model"]], float(cfg["strength"]), int(cfg["edges"]))


def _need_omega(cfg) -> float:
    if cfg["omega"] is None:
        raise ValidationError("--omega is required for this command")
    return float(cfg["omega"])


def _spec(cfg, omega=None, p=None):
    return make_profile(_model(cfg), _need_omega(cfg) if omega is None else omega,
                        float(cfg["p"] if p is None else p), cfg["variant"], int(cfg["bump"]))


def _domain(cfg, spec) -> DiscreteDomain:
    X = cfg["X"]
    if X is None:
        X = auto_truncation(spec.omega, spec.p)
    return DiscreteDomain.build(spec.model.domain_kind, spec.model.n_edges, float(X), float(cfg["h"]))


def _public_config(cfg) -> dict:
    return {k: v for k, v in cfg.items() if k not in _NOT_CONFIG}


# ---- commands -------------------------------------------------------------

def cmd_profile(cfg):
    spec = _spec(cfg)
    if spec.branch == "algebraic":
        X = cfg["X"] or 50.0
        dom = DiscreteDomain.build(spec.model.domain_kind, spec.model.n_edges, float(X), float(cfg["h"]))
    else:
        dom = _domain(cfg, spec)
    cfg["X"] = dom.X
    rows = []
    for j in range(spec.model.n_edges):
        v = eval_profile(spec, j, dom.s, 0)
        dv = eval_profile(spec, j, dom.s, 1)
        rows += [(j, float(x), float(a), float(b)) for x, a, b in zip(dom.s, v, dv)]
    meta = {
        "variant": spec.variant,
        "matching": spec.constants,
        "vertex_residuals": {k: float(v) for k, v in vertex_residuals(spec).items()},
        "stationary_residual": stationary_residual(spec, dom),
    }
    return meta, ("edge", "x", "value", "dvalue"), rows


def cmd_spectrum(cfg):
    spec = _spec(cfg)
    dom = _domain(cfg, spec)
    cfg["X"] = dom.X
    op = assemble(cfg["operator"], spec, dom, cfg["subspace"])
    rep = spectral_report(op, int(cfg["k"]))
    out = rep.to_dict()
    orient = spec.model.orientation
    out["zero_counts"] = [count_zeros(f, orient).total for _, f in rep.lowest_eigs]
    row = (out["which"], out["model"], out["omega"], out["p"], out["n_negative"], out["kernel_dim"],
           " ".join(repr(e) for e in out["lowest_eigs"]), out["tol_zero"], out["h"], out["X"])
    cols = ("which", "model", "omega", "p", "n_negative", "kernel_dim", "lowest_eigs", "tol_zero", "h", "X")
    return out, cols, [row]


def cmd_slope(cfg):
    family = ProfileFamily(_model(cfg), float(cfg["p"]), cfg["variant"], int(cfg["bump"]))
    out: dict = {}
    omegas = _grid(cfg["omegas"]) or ([float(cfg["omega"])] if cfg["omega"] is not None else [])
    rows = []
    reports = []
    for w in omegas:
        r = slope_J(family, w)
        reports.append(r.to_dict())
        rows.append((w, r.norm_sq, r.J_closed, r.J_fd, r.p_of_omega))
    if len(reports) == 1:
        out.update(reports[0])
    elif reports:
        out["reports"] = reports
    if cfg["find_omega_star"]:
        star = find_omega_star(family)
        w = star.omega_star
        out["omega_star"] = w
        out["certificate"] = {
            "omega_below": w * (1 - 1e-3), "J_below": star.J_below,
            "omega_above": w * (1 + 1e-3), "J_above": star.J_above,
            "sign_change": bool(star.J_below > 0 > star.J_above),
        }
        out["bracket"] = list(star.bracket)
        out["J1_strictly_decreasing"] = star.monotone
        out["J1_at_omega_star"] = J1(family, w)
        thr = threshold(family.at(w))
        if thr is not None:
            out["spectral_threshold"] = thr
            out["omega_star_above_threshold"] = bool(w > thr)
    if not omegas and not cfg["find_omega_star"]:
        raise ValidationError("slope needs --omega, --omegas or --find-omega-star")
    return out, ("omega", "norm_sq", "J_closed", "J_fd", "p_of_omega"), rows


def cmd_classify(cfg):
    spec = _spec(cfg)
    dom = _domain(cfg, spec)
    cfg["X"] = dom.X
    verdict, reports, slope = analyze(spec, dom=dom)
    out = verdict.to_dict()
    out["J"] = slope.J
    out["spectral"] = [r.to_dict() for r in reports]
    row = (spec.omega, spec.p, verdict.verdict, verdict.n_negative, slope.J, verdict.rule)
    return out, ("omega", "p", "verdict", "n_negative", "J", "rule"), [row]


def cmd_evolve(cfg):
    spec = _spec(cfg)
    dom = _domain(cfg, spec)
    cfg["X"] = dom.X
    if cfg["dt"] is None:
        cfg["dt"] = 0.1 * dom.h
    dt = float(cfg["dt"])
    if cfg["record_every"] is None:
        cfg["record_every"] = max(1, int(round(0.1 / dt)))
    ecfg = EvolutionConfig(dt, float(cfg["t_final"]), perturbation=cfg["perturbation"],
                           eps=float(cfg["eps"]), record_every=int(cfg["record_every"]),
                           snapshot_every=int(cfg["snapshot_every"]))
    trace = evolve(spec, dom, ecfg)
    if cfg.get("snapshots"):
        with open(cfg["snapshots"], "wb") as fh:
            write_snapshots(fh, dom, trace.snapshots)
    phi_h1 = math.sqrt(h1_norm_sq(sample(spec, dom)))
    out = {
        "mass_drift": trace.mass_drift,
        "energy_drift": trace.energy_drift,
        "sup_orbital_distance": float(np.max(trace.orbital_distance)),
        "profile_h1_norm": phi_h1,
        "blowup": trace.blowup,
        "boundary_reflection": trace.boundary_reflection,
        "trace": [dict(zip(("t", "orbital_distance", "mass", "energy", "max_amplitude"), r))
                  for r in trace.rows()],
    }
    return out, ("t", "orbital_distance", "mass", "energy", "max_amplitude"), list(trace.rows())


SWEEP_COLUMNS = ("omega", "p", "verdict", "n_negative", "J")


def sweep_point(cfg, omega, p):
    """One sweep row; parameters outside the existence window are marked, not fatal."""
    try:
        spec = _spec(cfg, omega, p)
        dom = _domain(cfg, spec)
        verdict, _, slope = analyze(spec, dom=dom)
        return (omega, p, verdict.verdict, verdict.n_negative, slope.J)
    except ValidationError as exc:
        return (omega, p, f"invalid:{type(exc).__name__}", "", "")
    except NumericalError as exc:
        return (omega, p, f"failed:{type(exc).__name__}", "", "")


def _read_existing(path):
    done = {}
    if not path or not os.path.exists(path):
        return done
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("omega,") or not line.strip():
                continue
            rec = next(csv.reader([line]))
            if len(rec) != len(SWEEP_COLUMNS):
                continue
            key = (float(rec[0]), float(rec[1]))
            done[key] = (key[0], key[1], rec[2], int(rec[3]) if rec[3] else "",
                         float(rec[4]) if rec[4] else "")
    return done


def cmd_sweep(cfg):
    omegas = _grid(cfg["omegas"]) or ([float(cfg["omega"])] if cfg["omega"] is not None else [])
    powers = _grid(cfg["powers"]) or [float(cfg["p"])]
    if not omegas:
        raise ValidationError("sweep needs --omegas (or --omega)")
    cfg["omegas"], cfg["powers"] = omegas, powers
    path = cfg.get("output") if cfg["format"] == "csv" else None
    done = _read_existing(path)
    todo = [(w, p) for p in powers for w in omegas if (w, p) not in done]
    jobs = int(cfg.get("jobs") or os.environ.get("PNLS_DEFAULT_JOBS", 1) or 1)
    rows = dict(done)
    sink = None
    if path:
        fresh = not os.path.exists(path)
        sink = open(path, "a", newline="")
        if fresh:
            sink.write("# config: " + json.dumps(_public_config(cfg), sort_keys=True) + "\n")
            sink.write(",".join(SWEEP_COLUMNS) + "\n")
    try:
        if jobs > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = pool.map(sweep_point, [cfg] * len(todo), *zip(*todo))
                for row in results:
                    rows[(row[0], row[1])] = row
                    _append(sink, row)
        else:
            for w, p in todo:
                row = sweep_point(cfg, w, p)
                rows[(w, p)] = row
                _append(sink, row)
    finally:
        if sink:
            sink.close()
    ordered = [rows[k] for k in sorted(rows)]
    notes = {}
    if MODELS[cfg["model"]] in (GRAPH_DELTA_PRIME, LINE_DELTA_PRIME):
        for p in powers:
            if p > 5:
                try:
                    family = ProfileFamily(_model(cfg), p, cfg["variant"], int(cfg["bump"]))
                    star = find_omega_star(family).omega_star
                    thr = threshold(family.at(star))
                    notes[f"p={p:g}"] = {"omega_star": star, "spectral_threshold": thr,
                                         "omega_star_above_threshold": bool(star > thr)}
                except PointNLSError:
                    continue
    return {"rows": ordered, "omega_star_comparison": notes}, SWEEP_COLUMNS, ordered


def _append(sink, row):
    if sink is not None:
        csv.writer(sink).writerow(row)
        sink.flush()


HANDLERS = {
    "profile": cmd_profile,
    "spectrum": cmd_spectrum,
    "slope": cmd_slope,
    "classify": cmd_classify,
    "evolve": cmd_evolve,
    "sweep": cmd_sweep,
}


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def render(cfg, out, columns, rows) -> str:
    conf = _public_config(cfg)
    if cfg["format"] == "json":
        payload = dict(out)
        payload["config"] = conf
        return json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n"
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(conf, sort_keys=True, default=_json_default) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def run(cfg: dict) -> int:
    out, columns, rows = HANDLERS[cfg["command"]](cfg)
    text = render(cfg, out, columns, rows)
    path = cfg.get("output")
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None) -> int:
    try:
        cfg = resolve_config(argv)
        return run(cfg)
    except ValidationError as exc:
        print(f"pointnls: invalid parameters: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"pointnls: numerical failure: {exc}", file=sys.stderr)
        return 3
    except (OSError, json.JSONDecodeError) as exc:
        print(f"pointnls: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

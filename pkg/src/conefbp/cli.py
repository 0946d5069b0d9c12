"""Command-line interface: single runs, parameter sweeps, artifacts.

Every subcommand writes deterministic artifacts (JSON for structured
reports, CSV for sweeps and plot data) into the output directory and
appends one line to run_records.jsonl with the full parameter map, the
tool version and the wall time.  Identical parameters and version
reproduce byte-identical primary artifacts; the run record is the only
file carrying timing.  Exit codes: 0 success, 2 invalid arguments,
3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .barriers import BarrierConfig, admissible_parameter_search, supersolution_lift_check
from .errors import ConvergenceFailureError, InvalidParameterError
from .geometry import is_minimizing, morgan_threshold
from .grid import field_from_solution, save_field_text
from .minimize import MinimizeConfig, compare_to_symmetric, energy, minimize
from .ode import DEFAULT_STEP, integrate_profile, symmetric_solution
from .stability import find_critical_c0, stability_margin, steklov_min_quotient
from .weiss import weiss_trace

_SWEEP_COLUMNS = {
    "stability": ("c", "phi0", "H1", "margin", "stable"),
    "phi0": ("c", "phi0"),
    "morgan": ("k", "c_threshold"),
    "minimize": ("c", "energy", "energy_gap", "fb_mean", "vertex_touch"),
}


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, indent=2) + "\n").encode()


def _write_artifact(out_dir, name, payload: bytes) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "wb") as fh:
        fh.write(payload)
    return path


def _append_record(out_dir, command, params, outputs, wall) -> None:
    os.makedirs(out_dir, exist_ok=True)
    record = {
        "command": command,
        "params": params,
        "version": __version__,
        "outputs": outputs,
        "wall_seconds": wall,
    }
    with open(os.path.join(out_dir, "run_records.jsonl"), "a") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return "%.17g" % x
    return str(x)


def _csv_bytes(header, rows) -> bytes:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return ("\n".join(lines) + "\n").encode()


def _cmd_profile(args, out):
    prof = integrate_profile(args.beta, args.c, args.phi_max, step=args.step)
    name = f"profile_beta{args.beta:g}_c{args.c:g}.txt"
    path = _write_artifact(out, name, prof.to_text().encode())
    summary = {"beta": args.beta, "c": args.c, "step": args.step, "nodes": len(prof.grid)}
    _write_artifact(out, name.replace(".txt", ".json"), _json_bytes(summary))
    artifacts = [name, name.replace(".txt", ".json")]
    if args.plot_data:
        plot = name.replace(".txt", "_plot.csv")
        _write_artifact(out, plot, _csv_bytes(("phi", "f"), zip(prof.grid, prof.values)))
        artifacts.append(plot)
    print(f"profile beta={args.beta:g} c={args.c:g}: {len(prof.grid)} nodes -> {path}")
    return summary, artifacts


def _cmd_phi0(args, out):
    sol = symmetric_solution(args.c, step=args.step)
    payload = {"c": args.c, "phi0": sol.phi0, "t0": sol.t0, "H1": sol.H1}
    name = f"phi0_c{args.c:g}.json"
    _write_artifact(out, name, _json_bytes(payload))
    print(f"phi0(c={args.c:g}) = {sol.phi0:.10f}")
    return payload, [name]


def _cmd_stability(args, out):
    rep = stability_margin(args.c, step=args.step, with_steklov=args.steklov)
    payload = rep.to_dict()
    name = f"stability_c{args.c:g}.json"
    _write_artifact(out, name, _json_bytes(payload))
    print(
        f"stability(c={args.c:g}): margin={rep.margin:+.6e} -> "
        + ("stable" if rep.stable else "unstable")
    )
    return payload, [name]


def _cmd_critical_c(args, out):
    record = []
    c0 = find_critical_c0((args.lo, args.hi), args.tol, step=args.step, record=record)
    payload = {"lo": args.lo, "hi": args.hi, "tol": args.tol, "c0": c0}
    name = "critical_c.json"
    _write_artifact(out, name, _json_bytes(payload))
    rows = [(r.c, r.phi0, r.H1, r.margin, r.stable) for r in record]
    csv_name = "critical_c_trace.csv"
    _write_artifact(out, csv_name, _csv_bytes(_SWEEP_COLUMNS["stability"], rows))
    print(f"critical slope c0 = {c0:.8f} ({len(record)} margin evaluations)")
    return payload, [name, csv_name]


def _cmd_steklov(args, out):
    lam = steklov_min_quotient(
        args.c, args.R, num_r=args.grid[0], num_phi=args.grid[1], step=args.step
    )
    rep = stability_margin(args.c, step=args.step)
    payload = {"c": args.c, "R": args.R, "lambda": lam, "closed_form": rep.ratio}
    name = f"steklov_c{args.c:g}_R{args.R:g}.json"
    _write_artifact(out, name, _json_bytes(payload))
    print(f"steklov(c={args.c:g}, R={args.R:g}) = {lam:.8f} (closed form {rep.ratio:.8f})")
    return payload, [name]


def _cmd_minimize(args, out):
    sol = symmetric_solution(args.c, step=args.step)
    cfg = MinimizeConfig(c=args.c, nr=args.grid[0], nphi=args.grid[1])
    phis = np.linspace(0.0, math.pi, cfg.nphi)
    inside = phis < sol.phi0
    bdry = np.zeros(cfg.nphi)
    bdry[inside] = np.clip(sol.profile.sample(phis[inside])[0], 0.0, None)
    res = minimize(cfg, bdry)
    ref = field_from_solution(sol, cfg.nr, cfg.nphi)
    sup, gap, touch = compare_to_symmetric(res.field, reference=ref)
    payload = {
        "c": args.c,
        "grid": list(args.grid),
        "energy": res.energy,
        "energy_reference": energy(ref),
        "energy_gap": gap,
        "sup_distance": sup,
        "fb_mean": res.fb_mean,
        "fb_spread": res.fb_spread,
        "fb_angles": [[r, a] for r, a in res.fb_angle_per_radius],
        "vertex_touch": touch,
    }
    name = f"minimize_c{args.c:g}.json"
    _write_artifact(out, name, _json_bytes(payload))
    snap = f"minimize_c{args.c:g}_field.txt"
    save_field_text(res.field, os.path.join(out, snap))
    print(f"minimize(c={args.c:g}): energy={res.energy:.8f} gap={gap:+.3e} fb={res.fb_mean}")
    return payload, [name, snap]


def _cmd_weiss(args, out):
    sol = symmetric_solution(args.c, step=args.step)
    fld = field_from_solution(sol, args.grid[0], args.grid[1])
    tr = weiss_trace(fld, num_radii=args.radii)
    rows = list(zip(tr.radii, tr.values))
    name = f"weiss_c{args.c:g}.csv"
    _write_artifact(out, name, _csv_bytes(("r", "W"), rows))
    payload = {
        "c": args.c,
        "monotone_violation": tr.monotone_violation,
        "homogeneity_flag": tr.homogeneity_flag,
        "variation": float(tr.values.max() - tr.values.min()),
    }
    jname = f"weiss_c{args.c:g}.json"
    _write_artifact(out, jname, _json_bytes(payload))
    print(
        f"weiss(c={args.c:g}): variation={payload['variation']:.3e} "
        f"homogeneous={tr.homogeneity_flag}"
    )
    return payload, [name, jname]


def _cmd_barriers(args, out):
    if args.M is not None:
        sol = symmetric_solution(args.c, step=args.step)
        phi2 = args.phi2 if args.phi2 is not None else sol.phi0 + 0.1
        cfg = BarrierConfig(c=args.c, M=args.M, phi2=phi2)
        lift = supersolution_lift_check(cfg, sol=sol)
        payload = {
            "c": args.c,
            "M": args.M,
            "phi2": phi2,
            "epsilon": lift.epsilon,
            "flat_margin": lift.flat_margin,
            "flux_margin": lift.flux_margin,
            "lift_gradient_ok": lift.lift_gradient_ok,
        }
    else:
        cb, reports = admissible_parameter_search([args.c])
        cert = next((r for r in reports if r.certified), None)
        payload = {"c": args.c, "certified": cert is not None}
        if cert is not None:
            payload.update(cert.to_dict())
    name = f"barriers_c{args.c:g}.json"
    _write_artifact(out, name, _json_bytes(payload))
    print(f"barriers(c={args.c:g}): {json.dumps(payload['checks'] if 'checks' in payload else payload, sort_keys=True)}")
    return payload, [name]


def _cmd_morgan(args, out):
    thr = morgan_threshold(args.k)
    payload = {
        "k": args.k,
        "c_threshold": thr,
        "is_minimizing_at_threshold": is_minimizing(args.k, thr),
    }
    name = f"morgan_k{args.k}.json"
    _write_artifact(out, name, _json_bytes(payload))
    print(f"morgan(k={args.k}) threshold = {thr:.10f}")
    return payload, [name]


def _sweep_point(task):
    name, value, args_dict = task
    try:
        if name == "stability":
            rep = stability_margin(value, step=args_dict["step"])
            return ("ok", (value, rep.phi0, rep.H1, rep.margin, rep.stable))
        if name == "phi0":
            sol = symmetric_solution(value, step=args_dict["step"])
            return ("ok", (value, sol.phi0))
        if name == "morgan":
            return ("ok", (int(value), morgan_threshold(int(value))))
        if name == "minimize":
            sol = symmetric_solution(value, step=args_dict["step"])
            cfg = MinimizeConfig(c=value, nr=args_dict["grid"][0], nphi=args_dict["grid"][1])
            phis = np.linspace(0.0, math.pi, cfg.nphi)
            inside = phis < sol.phi0
            bdry = np.zeros(cfg.nphi)
            bdry[inside] = np.clip(sol.profile.sample(phis[inside])[0], 0.0, None)
            res = minimize(cfg, bdry)
            ref = field_from_solution(sol, cfg.nr, cfg.nphi)
            _, gap, touch = compare_to_symmetric(res.field, reference=ref)
            return ("ok", (value, res.energy, gap, res.fb_mean, touch))
        return ("error: unknown subcommand", None)
    except Exception as exc:  # per-point failures land in the row status
        return (f"error: {exc}", None)


def _cmd_sweep(args, out):
    name, grid_values = _parse_grid_spec(args.spec)
    sub = args.subcommand
    if sub not in _SWEEP_COLUMNS:
        raise InvalidParameterError(f"sweep does not support subcommand {sub!r}")
    header = _SWEEP_COLUMNS[sub] + ("status",)
    shared = {"step": args.step, "grid": args.grid}
    tasks = [(sub, v, shared) for v in grid_values]
    if args.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_point, tasks))
    else:
        results = [_sweep_point(t) for t in tasks]
    rows = []
    failures = 0
    for value, (status, row) in zip(grid_values, results):
        if row is None:
            failures += 1
            rows.append(tuple([value] + ["nan"] * (len(header) - 2) + [status]))
        else:
            rows.append(tuple(list(row) + [status]))
    csv_name = f"sweep_{sub}_{name}.csv"
    _write_artifact(out, csv_name, _csv_bytes(header, rows))
    print(f"sweep {sub} over {name}: {len(rows)} rows, {failures} failures -> {csv_name}")
    payload = {"rows": len(rows), "failures": failures}
    if failures == len(rows) and rows:
        raise ConvergenceFailureError("every sweep point failed")
    return payload, [csv_name]


def _parse_grid_spec(spec: str):
    try:
        name, _, rng = spec.partition("=")
        start_s, stop_s, count_s = rng.split(":")
        start, stop, count = float(start_s), float(stop_s), int(count_s)
    except ValueError as exc:
        raise InvalidParameterError(f"bad grid spec {spec!r}; expected name=start:stop:count") from exc
    if count < 0:
        raise InvalidParameterError("grid count must be nonnegative")
    if count == 0:
        return name.strip(), []
    if count == 1:
        return name.strip(), [start]
    return name.strip(), list(np.linspace(start, stop, count))


def _grid_pair(text: str):
    try:
        a, b = text.split(",")
        return (int(a), int(b))
    except ValueError as exc:
        raise argparse.ArgumentTypeError("grid must be Nr,Nphi") from exc


def _load_config_file(path):
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, val = line.partition("=")
            out[key.strip()] = val.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="conefbp",
        description="Free boundary problem laboratory on right circular cones",
    )
    subparsers = parser.add_subparsers(dest="command")
    created = []

    class sub:
        # record subparsers so config defaults can reach them (argparse
        # subparsers parse into a fresh namespace, shadowing parent defaults)
        @staticmethod
        def add_parser(*a, **kw):
            p = subparsers.add_parser(*a, **kw)
            created.append(p)
            return p

    parser._command_parsers = created

    def common(p, c_default=0.0):
        p.add_argument("--c", type=float, default=c_default)
        p.add_argument("--step", type=float, default=DEFAULT_STEP)
        p.add_argument("--tol", type=float, default=1e-6)
        p.add_argument("--grid", type=_grid_pair, default=(128, 128))
        p.add_argument("--out", default="out")
        p.add_argument("--jobs", type=int, default=min(8, os.cpu_count() or 1))
        p.add_argument("--plot-data", action="store_true")

    p = sub.add_parser("profile", help="integrate one separated profile")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--phi-max", dest="phi_max", type=float, default=2.2)
    common(p)

    common(sub.add_parser("phi0", help="free boundary angle of the symmetric solution"))

    p = sub.add_parser("stability", help="stability margin at one slope")
    p.add_argument("--steklov", action="store_true")
    common(p)

    p = sub.add_parser("critical-c", help="bisect the critical slope")
    p.add_argument("--lo", type=float, default=0.0)
    p.add_argument("--hi", type=float, default=10.0)
    common(p)
    p.set_defaults(step=1e-3)

    p = sub.add_parser("steklov", help="discrete boundary Rayleigh quotient minimum")
    p.add_argument("--R", type=float, default=32.0)
    common(p, c_default=0.2)
    p.set_defaults(grid=(257, 129), step=1e-3)

    common(sub.add_parser("minimize", help="minimize the penalized energy"))

    p = sub.add_parser("weiss", help="scale monitor trace for the symmetric solution")
    p.add_argument("--radii", type=int, default=16)
    common(p)

    p = sub.add_parser("barriers", help="barrier certification at one slope")
    p.add_argument("--M", type=float, default=None)
    p.add_argument("--phi2", type=float, default=None)
    common(p)

    p = sub.add_parser("morgan", help="plane-through-vertex minimality threshold")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out", default="out")

    p = sub.add_parser("sweep", help="map a subcommand over a parameter grid")
    p.add_argument("spec", help="grid spec name=start:stop:count")
    p.add_argument("subcommand", help="one of: " + ", ".join(sorted(_SWEEP_COLUMNS)))
    common(p)
    p.set_defaults(step=1e-3, grid=(64, 64))

    return parser


_HANDLERS = {
    "profile": _cmd_profile,
    "phi0": _cmd_phi0,
    "stability": _cmd_stability,
    "critical-c": _cmd_critical_c,
    "steklov": _cmd_steklov,
    "minimize": _cmd_minimize,
    "weiss": _cmd_weiss,
    "barriers": _cmd_barriers,
    "morgan": _cmd_morgan,
    "sweep": _cmd_sweep,
}


def _config_defaults(path) -> dict:
    raw = _load_config_file(path)
    out = {}
    for key, val in raw.items():
        attr = key.replace("-", "_")
        if attr == "grid":
            out[attr] = _grid_pair(val)
        elif attr in ("jobs", "radii", "k"):
            out[attr] = int(val)
        elif attr in ("plot_data", "steklov"):
            out[attr] = val.lower() in ("1", "true", "yes")
        elif attr in ("out", "spec", "subcommand"):
            out[attr] = val
        else:
            out[attr] = float(val)
    return out


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    # the config file only supplies defaults, so explicit flags win
    if "--config" in argv:
        i = argv.index("--config")
        if i + 1 >= len(argv):
            print("--config needs a path", file=sys.stderr)
            return 2
        path = argv[i + 1]
        del argv[i : i + 2]
        try:
            defaults = _config_defaults(path)
        except (OSError, ValueError, argparse.ArgumentTypeError) as exc:
            print(f"bad config file: {exc}", file=sys.stderr)
            return 2
        defaults.pop("spec", None)
        defaults.pop("subcommand", None)
        parser.set_defaults(**defaults)
        for command_parser in parser._command_parsers:
            command_parser.set_defaults(**defaults)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage()
        return 2
    out = getattr(args, "out", "out")
    handler = _HANDLERS[args.command]
    start = time.perf_counter()
    try:
        payload, artifacts = handler(args, out)
    except (InvalidParameterError, ValueError) as exc:
        print(f"invalid arguments: {exc}", file=sys.stderr)
        return 2
    except ConvergenceFailureError as exc:
        print(f"numerical non-convergence: {exc}", file=sys.stderr)
        return 3
    wall = time.perf_counter() - start
    params = {
        k: (list(v) if isinstance(v, tuple) else v)
        for k, v in vars(args).items()
        if k not in ("command", "config")
    }
    _append_record(out, args.command, params, artifacts, wall)
    return 0


if __name__ == "__main__":
    sys.exit(main())

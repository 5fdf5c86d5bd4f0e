"""Command-line front end.

Every command reads a problem JSON (or builds one for ``repro``), writes
``result.json`` and, with ``--format csv``, plot-data CSVs into ``--out``.
Exit codes: 0 on an optimal solve or a certificate, 2 when the answer is
inconclusive (Unknown bound, Undecided certificate), 1 on errors.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import certify, instances, matrixsos
from .minmax import (
    BilinearObjective,
    BoundStatus,
    alternate_two_stage,
    dual_weights,
    solve_minmax,
    two_stage,
)
from .oracles import grid_minmax_1d, grid_minmax_2d, plot_grid
from .polynomial import MonomialPolynomial, TrigPolynomial, evaluate, poly_from_json
from .sdp import Status
from .simpleset import Kind, set_from_json, set_to_json, with_hierarchy
from .sosmin import solve_min

EXIT_OK, EXIT_ERROR, EXIT_INCONCLUSIVE = 0, 1, 2
PLOT_POINTS = 1000
TIME_KEY = "timestamp"  # the only field allowed to differ between runs


class InputError(ValueError):
    """Problem file does not match the schema."""


@dataclass
class RunConfig:
    command: str
    input_path: str | None = None
    seed: int = 0
    hierarchy_x: int | None = None
    hierarchy_y: int | None = None
    out: str = "."
    fmt: str = "csv"
    grid: int | None = None
    extra: dict = field(default_factory=dict)


@dataclass
class Outcome:
    result: dict
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    code: int = EXIT_OK
    timings: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# problem parsing and validation
# ---------------------------------------------------------------------------


def _set(obj, key):
    if key not in obj:
        raise InputError(f"missing {key!r}")
    try:
        return set_from_json(obj[key])
    except (KeyError, ValueError) as e:
        raise InputError(f"bad {key}: {e}") from None


def _poly(obj, where):
    try:
        return poly_from_json(obj)
    except (KeyError, ValueError, TypeError, IndexError) as e:
        raise InputError(f"bad polynomial in {where}: {e}") from None


def _g_list(problem):
    g = problem.get("g")
    if isinstance(g, dict) and "g_list" in g:
        return g["g_list"]
    return problem.get("g_list")


def parse_objective(problem, hx=None, hy=None):
    """BilinearObjective from the problem JSON, with hierarchy overrides."""
    sx = _set(problem, "setX")
    hier = problem.get("hierarchy", {})
    hx = hx if hx is not None else hier.get("sx")
    hy = hy if hy is not None else hier.get("sy")
    if hx is not None:
        sx = with_hierarchy(sx, int(hx))
    gl = _g_list(problem)
    sety = problem.get("setY", {"kind": "finite"})
    if gl is not None:
        if sety.get("kind") != "finite":
            raise InputError("g_list needs a finite setY")
        if "p" in sety and int(sety["p"]) != len(gl):
            raise InputError(f"setY.p = {sety['p']} but g_list has {len(gl)} entries")
        if not gl:
            raise InputError("g_list is empty")
        return BilinearObjective(sx, g_list=[_poly(g, f"g_list[{i}]") for i, g in enumerate(gl)])
    if "g" not in problem:
        raise InputError("missing 'g' and 'g_list'")
    sy = _set(problem, "setY")
    if hy is not None:
        sy = with_hierarchy(sy, int(hy))
    return BilinearObjective(sx, sy, g=_poly(problem["g"], "g"))


def _degree_on(p, cols):
    if isinstance(p, TrigPolynomial):
        return int(np.abs(p.freqs[:, cols]).max()) if p.freqs.size else 0
    if isinstance(p, MonomialPolynomial):
        return int(p.exps[:, cols].sum(axis=1).max()) if p.exps.size else 0
    return 0


def _audit_poly(p, sset, cols, where, errors):
    if p.n_vars < max(cols) + 1:
        errors.append(f"{where}: has {p.n_vars} variables, expected at least {max(cols) + 1}")
        return
    if sset.kind is Kind.TRIG and not isinstance(p, TrigPolynomial):
        errors.append(f"{where}: torus data must use the trig basis")
        return
    if sset.kind in (Kind.SPHERE, Kind.BALL, Kind.BOOLCUBE) and not isinstance(p, MonomialPolynomial):
        errors.append(f"{where}: {sset.kind.value} data must use the monomial basis")
        return
    deg = _degree_on(p, cols)
    if sset.kind is Kind.BOOLCUBE:
        deg = int((p.exps[:, cols] % 2).sum(axis=1).max())
    if sset.kind is not Kind.DISCRETE and deg > 2 * sset.degree:
        errors.append(
            f"{where}: degree {deg} exceeds the representable bound 2r = {2 * sset.degree}"
        )


def validate_problem(problem, command=None):
    """Structural, dimension and degree-representability audit; never solves."""
    errors = []
    if not isinstance(problem, dict):
        return ["problem must be a JSON object"]
    command = command or problem.get("command", "solve-minmax")
    try:
        if command == "solve-min":
            key = "set" if "set" in problem else "setX"
            sset = _set(problem, key)
            if "f" not in problem:
                raise InputError("missing 'f'")
            f = _poly(problem["f"], "f")
            _audit_poly(f, sset, list(range(sset.ambient_dim)), "f", errors)
            if f.n_vars != sset.ambient_dim:
                errors.append(f"f: has {f.n_vars} variables, set has {sset.ambient_dim}")
            return errors
        obj = parse_objective(problem)
    except InputError as e:
        return errors + [str(e)]
    sx = obj.set_x
    nx = sx.ambient_dim
    if obj.finite:
        for i, g in enumerate(obj.g_list):
            if g.n_vars != nx:
                errors.append(f"g_list[{i}]: has {g.n_vars} variables, setX has {nx}")
            else:
                _audit_poly(g, sx, list(range(nx)), f"g_list[{i}]", errors)
        if command == "certify" and sx.kind is not Kind.BALL:
            errors.append("certify needs a ball setX")
    else:
        ny = obj.set_y.ambient_dim
        if obj.g.n_vars != nx + ny:
            errors.append(f"g: has {obj.g.n_vars} variables, setX x setY has {nx + ny}")
        else:
            _audit_poly(obj.g, sx, list(range(nx)), "g (x part)", errors)
            _audit_poly(obj.g, obj.set_y, list(range(nx, nx + ny)), "g (y part)", errors)
    return errors


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _status_code(status):
    return EXIT_OK if status is Status.OPTIMAL else EXIT_ERROR


def _gap(sol):
    return None if sol is None else float(sol.gap)


def cmd_solve_min(problem, cfg: RunConfig):
    key = "set" if "set" in problem else "setX"
    sset = _set(problem, key)
    if cfg.hierarchy_x is not None:
        sset = with_hierarchy(sset, cfg.hierarchy_x)
    f = _poly(problem["f"], "f")
    t0 = time.perf_counter()
    r = solve_min(sset, f, cfg.seed)
    out = Outcome(
        {
            "command": "solve-min",
            "status": r.status.value,
            "value": r.value,
            "x_star": r.x_star.tolist(),
            "moment_rank": r.moment_rank,
            "duality_gap": _gap(r.solution),
            "set": set_to_json(sset),
            "seed": cfg.seed,
        },
        code=_status_code(r.status),
        timings={"solve": time.perf_counter() - t0},
    )
    if sset.kind is Kind.TRIG and sset.d == 1:
        X = plot_grid(PLOT_POINTS)
        out.tables["function"] = (["x", "f"], np.column_stack([X[:, 0], evaluate(f, X)]))
    return out


def cmd_solve_minmax(problem, cfg: RunConfig):
    obj = parse_objective(problem, cfg.hierarchy_x, cfg.hierarchy_y)
    t0 = time.perf_counter()
    r = solve_minmax(obj, cfg.seed)
    timings = {"solve": time.perf_counter() - t0}
    res = {
        "command": "solve-minmax",
        "status": r.status.value,
        "value": r.value,
        "x_star": r.x_star.tolist(),
        "bound_status": r.bound_status.value,
        "moment_rank": r.moment_rank,
        "duality_gap": _gap(r.solution),
        "setX": set_to_json(obj.set_x),
        "seed": cfg.seed,
    }
    out = Outcome(res, timings=timings)
    if r.status is not Status.OPTIMAL:
        out.code = EXIT_ERROR
    elif r.bound_status is BoundStatus.UNKNOWN:
        out.code = EXIT_INCONCLUSIVE
    one_d = obj.set_x.kind is Kind.TRIG and obj.set_x.d == 1
    if obj.finite and one_d and r.ok:
        X = plot_grid(PLOT_POINTS)
        G = obj.eval_table(X)
        V = dual_weights(r, X)
        res["v_samples"] = {"x_star": dual_weights(r, r.x_star[None, :])[0].tolist()}
        t0 = time.perf_counter()
        res["grid_value"], res["grid_argmin"] = grid_minmax_1d(obj.g_list, cfg.grid or 100_000)
        timings["oracle"] = time.perf_counter() - t0
        p = G.shape[1]
        header = ["x"] + [f"g_{j + 1}" for j in range(p)] + ["max_g"] + [f"v_{j + 1}" for j in range(p)]
        out.tables["functions"] = (header, np.column_stack([X[:, 0], G, G.max(axis=1), V]))
    elif not obj.finite and one_d and obj.g.n_vars == 2 and r.ok:
        t0 = time.perf_counter()
        val, arg, t, inner = grid_minmax_2d(obj.g, cfg.grid or 1000)
        res["grid_value"], res["grid_argmin"] = val, arg
        timings["oracle"] = time.perf_counter() - t0
        out.tables["inner_max"] = (["x", "max_y_g"], np.column_stack([t, inner]))
    return out


def cmd_two_stage(problem, cfg: RunConfig):
    base = parse_objective(problem, None, cfg.hierarchy_y)
    degrees = problem.get("degrees")
    if degrees is None:
        degrees = [cfg.hierarchy_x or base.set_x.hierarchy_level]
    runs, timings = [], {}
    cols = []
    X = plot_grid(PLOT_POINTS)
    for s in degrees:
        obj = BilinearObjective(with_hierarchy(base.set_x, int(s)), base.set_y, base.g, base.g_list)
        t0 = time.perf_counter()
        r = two_stage(obj, seed=cfg.seed)
        timings[f"s={s}"] = time.perf_counter() - t0
        runs.append(
            {
                "s": int(s),
                "status": r.status.value,
                "value": r.value,
                "stage1_value": r.stage1_value,
                "stage2_gap": r.stage2_gap,
                "x_star": np.asarray(r.x_star).tolist(),
            }
        )
        cols.append(r)
    ok = all(c.status is Status.OPTIMAL for c in cols)
    res = {"command": "two-stage", "runs": runs, "setX": set_to_json(base.set_x), "seed": cfg.seed}
    out = Outcome(res, code=EXIT_OK if ok else EXIT_ERROR, timings=timings)
    if base.finite and base.set_x.kind is Kind.TRIG and base.set_x.d == 1 and ok:
        mx = base.eval_table(X).max(axis=1)
        A = np.column_stack([c.upper(X) for c in cols])
        res["mean_excess"] = [float(v) for v in (A - mx[:, None]).mean(axis=0)]
        header = ["x", "max_g"] + [f"a_{s}" for s in degrees]
        out.tables["upper_bounds"] = (header, np.column_stack([X[:, 0], mx, A]))
    return out


def cmd_alternate(problem, cfg: RunConfig):
    obj = parse_objective(problem, cfg.hierarchy_x, cfg.hierarchy_y)
    iters = int(problem.get("iters", 6))
    t0 = time.perf_counter()
    al = alternate_two_stage(obj, iters=iters, seed=cfg.seed)
    timings = {"solve": time.perf_counter() - t0}
    last = al.steps[-1]
    res = {
        "command": "alternate",
        "values": [float(v) for v in al.values],
        "exact": [bool(s.exact) for s in al.steps],
        "x_star": np.asarray(last.x_star).tolist(),
        "status": last.status.value,
        "setX": set_to_json(obj.set_x),
        "seed": cfg.seed,
    }
    out = Outcome(res, code=_status_code(last.status), timings=timings)
    if obj.finite and obj.set_x.kind is Kind.TRIG and obj.set_x.d == 1:
        res["grid_value"], res["grid_argmin"] = grid_minmax_1d(obj.g_list, cfg.grid or 100_000)
    out.tables["iterations"] = (
        ["iteration", "value"],
        np.column_stack([np.arange(1, len(al.values) + 1), al.values]),
    )
    return out


def cmd_certify(problem, cfg: RunConfig):
    sx = _set(problem, "setX")
    if sx.kind is not Kind.BALL:
        raise InputError("certify needs a ball setX")
    gl = _g_list(problem)
    if not gl:
        raise InputError("certify needs a nonempty g_list")
    g_list = [_poly(g, f"g_list[{i}]") for i, g in enumerate(gl)]
    s = cfg.hierarchy_x or problem.get("hierarchy", {}).get("sx") or sx.hierarchy_level
    t0 = time.perf_counter()
    c = certify.emptiness_certificate(g_list, int(s), d=sx.d)
    timings = {"solve": time.perf_counter() - t0}
    if isinstance(c, certify.Undecided):
        res = {"command": "certify", "outcome": "Undecided", "value": c.value,
               "status": c.status.value, "note": c.note, "degree": int(s)}
        return Outcome(res, code=EXIT_INCONCLUSIVE, timings=timings)
    res = {
        "command": "certify",
        "outcome": "Certificate",
        "degree": int(s),
        "residual": c.residual,
        "psd_margin": c.psd_margin(),
        "certificate": c.to_json(),
    }
    print(f"residual {c.residual:.3e}  psd margin {c.psd_margin():.3e}")
    return Outcome(res, timings=timings)


def cmd_verify_matrix_sos(problem, cfg: RunConfig):
    ds = problem.get("d", [1, 2])
    rs = problem.get("r", [1, 2])
    s_max = int(problem.get("s_max", 12))
    rows = matrixsos.bound_table(ds, rs, s_max)
    print(f"{'d':>2} {'r':>2} {'s':>3} {'max_dev':>12} {'eps(s)':>12}  ok")
    for row in rows:
        print(f"{row['d']:>2} {row['r']:>2} {row['s']:>3} {row['max_dev']:12.6g} {row['bound']:12.6g}  {row['ok']}")
    ok = all(row["ok"] for row in rows)
    res = {"command": "verify-matrix-sos", "rows": rows, "all_ok": ok}
    table = np.array([[r["d"], r["r"], r["s"], r["max_dev"], r["bound"], int(r["ok"])] for r in rows])
    return Outcome(res, {"bounds": (["d", "r", "s", "max_dev", "bound", "ok"], table)},
                   EXIT_OK if ok else EXIT_ERROR)


COMMANDS = {
    "solve-min": cmd_solve_min,
    "solve-minmax": cmd_solve_minmax,
    "two-stage": cmd_two_stage,
    "alternate": cmd_alternate,
    "certify": cmd_certify,
    "verify-matrix-sos": cmd_verify_matrix_sos,
}


# ---------------------------------------------------------------------------
# reproduction problems
# ---------------------------------------------------------------------------


def _trig_set(s):
    return {"kind": "trig", "d": 1, "r": 1, "s": s}


def repro_problem(name):
    """(command, problem JSON) for a figure analogue."""
    if name == "fig1":
        gl = [g.to_json() for g in instances.three_polys(instances.THREE_POLY_SEED)]
        return "two-stage", {"setX": _trig_set(2), "setY": {"kind": "finite", "p": 3},
                             "g_list": gl, "degrees": [2, 4, 8]}
    if name == "fig2":
        gl = [g.to_json() for g in instances.three_polys(instances.THREE_POLY_SEED)]
        return "solve-minmax", {"setX": _trig_set(4), "setY": {"kind": "finite", "p": 3},
                                "g_list": gl}
    if name == "fig3":
        _, g = instances.bivariate()
        return "solve-minmax", {"setX": _trig_set(1), "setY": _trig_set(1), "g": g.to_json()}
    if name == "fig5":
        gl = [g.to_json() for g in instances.three_polys(instances.ALTERNATING_SEED)]
        return "alternate", {"setX": _trig_set(2), "setY": {"kind": "finite", "p": 3},
                             "g_list": gl, "iters": 6}
    raise InputError(f"unknown figure {name!r}")


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if np.isfinite(x) else None
    return x


def dumps_result(result):
    return json.dumps(_jsonable(result), indent=2, sort_keys=True) + "\n"


def strip_timestamp(result):
    return {k: v for k, v in result.items() if k != TIME_KEY}


def write_csv(path, header, rows):
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join("%.12g" % v for v in row) + "\n")


def _write(outcome: Outcome, cfg: RunConfig, problem=None):
    os.makedirs(cfg.out, exist_ok=True)
    res = dict(outcome.result)
    res[TIME_KEY] = {
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "elapsed_s": outcome.timings,
    }
    with open(os.path.join(cfg.out, "result.json"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_result(res))
    if problem is not None:
        with open(os.path.join(cfg.out, "problem.json"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(dumps_result(problem))
    if cfg.fmt == "csv":
        for name, (header, rows) in outcome.tables.items():
            write_csv(os.path.join(cfg.out, f"{name}.csv"), header, rows)


def _error(cfg: RunConfig, kind, message):
    err = {"error": kind, "message": str(message), "command": cfg.command}
    print(json.dumps(err, sort_keys=True), file=sys.stderr)
    try:
        os.makedirs(cfg.out, exist_ok=True)
        with open(os.path.join(cfg.out, "error.json"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(dumps_result(err))
    except OSError:
        pass
    return EXIT_ERROR


def _load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise InputError(f"cannot read {path}: {e}") from None


def run(cfg: RunConfig) -> int:
    """Execute one command; returns the process exit code."""
    try:
        if cfg.command == "validate":
            problem = _load(cfg.input_path)
            errors = validate_problem(problem, problem.get("command"))
            print(json.dumps({"errors": errors}, indent=2))
            return EXIT_ERROR if errors else EXIT_OK
        if cfg.command == "repro":
            command, problem = repro_problem(cfg.extra["figure"])
            outcome = COMMANDS[command](problem, cfg)
            outcome.result["figure"] = cfg.extra["figure"]
            _write(outcome, cfg, problem)
            return outcome.code
        if cfg.command == "verify-matrix-sos" and cfg.input_path is None:
            problem = {}
        else:
            problem = _load(cfg.input_path)
            if cfg.command != "verify-matrix-sos":
                errors = validate_problem(problem, cfg.command)
                if errors:
                    return _error(cfg, "schema", "; ".join(errors))
        if "seed" in problem and cfg.extra.get("seed_from_cli") is False:
            cfg.seed = int(problem["seed"])
        outcome = COMMANDS[cfg.command](problem, cfg)
    except InputError as e:
        return _error(cfg, "schema", e)
    except Exception as e:  # noqa: BLE001 - report anything else as a solver/runtime error
        return _error(cfg, type(e).__name__, e)
    _write(outcome, cfg)
    return outcome.code


def build_parser():
    ap = argparse.ArgumentParser(prog="sosminmax", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    common.add_argument("--hierarchy-x", type=int, default=None, metavar="S")
    common.add_argument("--hierarchy-y", type=int, default=None, metavar="S")
    common.add_argument("--grid", type=int, default=None, metavar="N", help="oracle grid size")
    common.add_argument("--out", default=".", metavar="DIR")
    common.add_argument("--format", choices=("json", "csv"), default="csv")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("solve-min", "solve-minmax", "two-stage", "alternate", "certify"):
        sp = sub.add_parser(name, parents=[common])
        sp.add_argument("input")
    sp = sub.add_parser("verify-matrix-sos", parents=[common])
    sp.add_argument("input", nargs="?")
    sp = sub.add_parser("repro", parents=[common])
    sp.add_argument("figure", choices=("fig1", "fig2", "fig3", "fig5"))
    sp = sub.add_parser("validate")
    sp.add_argument("input")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    cfg = RunConfig(command=args.command, input_path=getattr(args, "input", None))
    if args.command != "validate":
        cfg.seed = args.seed if args.seed is not None else 0
        cfg.hierarchy_x = args.hierarchy_x
        cfg.hierarchy_y = args.hierarchy_y
        cfg.grid = args.grid
        cfg.out = args.out
        cfg.fmt = args.format
        cfg.extra["seed_from_cli"] = args.seed is not None
    if args.command == "repro":
        cfg.extra["figure"] = args.figure
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line experiment runner.

Each subcommand mirrors an experiment id. A JSON config supplies the inputs;
its keys override the ``--seed`` and ``--tol`` flags. The JSON record goes to
``--out`` (or stdout) and tabular outputs are written as CSV next to it.

Exit status: 0 when the experiment passes, 1 when it fails, 2 on usage or
input errors.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._util import jsonable
from .acceptance import MIN_GRID_STEP, decay_reference, example31_oracle, verify_suite
from .conealg import dual_norm_bracket, eval_functional
from .errors import (ApproximationFailedError, ChartMismatchError, DegenerateInputError, InvalidStructureError,
                     MalformedInputError, NotInConeError, OutOfDomainError, PreconditionError)
from .fields import field_from_spec
from .finsler import (Example31Field, FinslerChart, chart_from_json, chart_index_of_symmetry, finsler_distance,
                      validate_minkowski)
from .isometry import (check_finsler_isometry, check_metric_isometry, map_from_spec, map_slip_constants,
                       myers_nakai_consistency, random_pairs)
from .quasimetric import (ANALYTIC_FAMILIES, index_of_symmetry, load_space, slip0_linearity, slip_constant,
                          space_from_json, validate_space)
from .semilip import example34_ratio_experiment, verify_slip_equals_derivative_sup

EXPERIMENTS = ("validate", "distance", "slip", "index", "dual-gap", "isometry", "example31", "example34",
               "linearity", "verify")

# concept tags recorded with every result for traceability
EXERCISES = {
    "validate": ["quasi-metric axioms", "minkowski norm axioms"],
    "distance": ["finsler distance"],
    "slip": ["semi-lipschitz constant", "derivative norm supremum"],
    "index": ["index of symmetry"],
    "dual-gap": ["evaluation functionals", "dual norm bracket"],
    "isometry": ["finsler isometry", "metric isometry", "composition operator"],
    "example31": ["index-zero finsler line"],
    "example34": ["norm comparison on the index-zero line", "sign of the index"],
    "linearity": ["slip0 linearity", "index of symmetry"],
    "verify": ["acceptance suite"],
}


class UsageError(Exception):
    pass


def _digest(obj) -> str:
    blob = json.dumps(jsonable(obj), sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _samples(spec, dim=1, rng=None):
    """A list of points, ``{"linspace": [a, b, n]}`` or ``{"uniform": [[lo, hi], ...], "n": k}``."""
    if isinstance(spec, dict):
        if "linspace" in spec:
            a, b, n = spec["linspace"]
            return np.linspace(a, b, int(n))
        if "uniform" in spec:
            if rng is None:
                raise UsageError("random samples need a seed")
            box = np.atleast_2d(np.asarray(spec["uniform"], dtype=float))
            return rng.uniform(box[:, 0], box[:, 1], size=(int(spec["n"]), box.shape[0])).squeeze()
        raise UsageError(f"unrecognised sample spec {spec}")
    return np.asarray(spec, dtype=float)


def _space(cfg):
    if "space" not in cfg:
        raise UsageError("config needs a 'space'")
    sp = cfg["space"]
    if isinstance(sp, str):
        return load_space(sp)
    if isinstance(sp, list):
        return space_from_json({"dist": sp})
    if isinstance(sp, dict) and sp.get("family") in ANALYTIC_FAMILIES:
        return ANALYTIC_FAMILIES[sp["family"]]()
    return space_from_json(sp)


def _chart(cfg, key="chart"):
    if key not in cfg:
        raise UsageError(f"config needs a '{key}'")
    return chart_from_json(cfg[key])


def _pairs(cfg, chart, rng):
    if "pairs" in cfg:
        return [tuple(p) for p in cfg["pairs"]]
    if "n_pairs" in cfg:
        if rng is None:
            raise UsageError("random pairs need a seed")
        return random_pairs(chart, int(cfg["n_pairs"]), rng)
    raise UsageError("config needs 'pairs' or 'n_pairs'")


# ----------------------------------------------------------------- experiments


def exp_validate(cfg, rng, tol, tables):
    if "space" in cfg:
        sp = _space(cfg)
        samples = cfg.get("samples")
        viol = validate_space(sp, samples)
        return {"violations": [v.to_json() for v in viol]}, not viol
    chart = _chart(cfg)
    rep = validate_minkowski(chart.field, _samples(cfg.get("x_samples", chart.grid_points()), chart.dim),
                             _samples(cfg["v_samples"], chart.dim))
    return rep.to_json(), rep.ok


def exp_distance(cfg, rng, tol, tables):
    chart = _chart(cfg)
    method = cfg.get("method", "auto")
    rows = []
    for x, y in _pairs(cfg, chart, rng):
        r = finsler_distance(chart, x, y, method)
        rows.append(r.to_json())
    tables["distances"] = [[json.dumps(r["x"]), json.dumps(r["y"]), r["value"], r["method"]] for r in rows]
    tables["distances_header"] = ["x", "y", "value", "method"]
    return {"distances": rows}, True


def exp_slip(cfg, rng, tol, tables):
    if "space" in cfg:
        sp = _space(cfg)
        if "function" not in cfg:
            raise UsageError("finite slip needs 'function' values")
        s = slip_constant(cfg["function"], sp)
        return {"slip": s}, True
    chart = _chart(cfg)
    f = field_from_spec(cfg["field"], chart.dim)
    xs = _samples(cfg.get("samples", chart.grid_points()), chart.dim, rng)
    pairs = cfg.get("pairs")
    rep = verify_slip_equals_derivative_sup(chart, f, xs, pairs, cfg.get("tol", tol if tol else 1e-2))
    return rep.to_json(), rep.passed


def exp_index(cfg, rng, tol, tables):
    if "space" in cfg:
        sp = _space(cfg)
        rep = index_of_symmetry(sp, cfg.get("samples"))
    else:
        chart = _chart(cfg)
        rep = chart_index_of_symmetry(chart, _pairs(cfg, chart, rng), cfg.get("method", "auto"))
    if rep.trend:
        tables["trend"] = [[k, t] for k, t in enumerate(rep.trend)]
        tables["trend_header"] = ["sample", "ratio"]
    return rep.to_json(), True


def exp_dual_gap(cfg, rng, tol, tables):
    chart = _chart(cfg)
    x, y = cfg["x"], cfg["y"]
    eps = float(cfg.get("eps", 1e-3))
    b = dual_norm_bracket(eval_functional(y, chart) - eval_functional(x, chart), chart, eps)
    ok = b.lower <= b.upper + 1e-12 and b.lower >= min(b.upper, 1.0) - 3 * eps
    return {**b.to_json(), "gap": b.upper - b.lower, "eps": eps}, bool(ok)


def exp_isometry(cfg, rng, tol, tables):
    X = _chart(cfg, "chartX")
    Y = _chart(cfg, "chartY")
    h = map_from_spec(cfg["map"])
    tol = cfg.get("tol", tol if tol else 1e-3)
    pairs = _pairs(cfg, X, rng) if ("pairs" in cfg or "n_pairs" in cfg) else random_pairs(
        X, 1000, rng or np.random.default_rng(0))
    fin = check_finsler_isometry(X, Y, h, X.grid_points(), np.vstack([np.eye(X.dim), -np.eye(X.dim)]), tol)
    met = check_metric_isometry(X, Y, h, pairs, tol)
    s, s_inv = map_slip_constants(h, X, Y, pairs)
    mn = myers_nakai_consistency(X, Y, h, pairs=pairs, tol=tol, rng=rng)
    out = {"finsler": fin.to_json(), "metric": met.to_json(), "slip_h": s, "slip_h_inv": s_inv,
           "consistency": mn.to_json()}
    return out, bool(mn.consistent and met.agrees_with_finsler)


def exp_example31(cfg, rng, tol, tables):
    step = float(cfg.get("step", MIN_GRID_STEP))
    box = cfg.get("box", [-2.0, 3.0])
    chart = FinslerChart.with_step(Example31Field(), [box], step)
    method = cfg.get("method", "refine")
    tol = cfg.get("tol", tol if tol else 1e-3)
    rows, ok = [], True
    for x, y in cfg.get("pairs", [[0.0, 1.0], [1.0, 0.0]]):
        r = finsler_distance(chart, x, y, method)
        ref = example31_oracle(x, y)
        rows.append({"x": x, "y": y, "value": r.value, "oracle": ref, "error": abs(r.value - ref)})
        ok &= abs(r.value - ref) <= tol
    decay = [[x, decay_reference(x)] for x in cfg.get("decay_points", [0, 5, 20])]
    tables["decay"] = decay
    tables["decay_header"] = ["x", "ratio"]
    return {"distances": [r["value"] for r in rows], "rows": rows, "decay": decay}, bool(ok)


def exp_example34(cfg, rng, tol, tables):
    box = cfg.get("box", [-1e4, 1e4])
    chart = FinslerChart([box], Example31Field(), (3,))
    specs = cfg.get("fields", {"arctan": {"family": "arctan"}, "u": {"family": "affine", "params": {"w": [1.0]}},
                               "constant": {"family": "constant", "params": {"value": 1.0}}})
    fields = {k: field_from_spec(v, 1) for k, v in specs.items()}
    xs = _samples(cfg["samples"]) if "samples" in cfg else None
    rep = example34_ratio_experiment(chart, fields, xs)
    tables["norms"] = [[k, r["classical"], r["finsler_max_sampled"], r["diverges"], r["upper_bound_holds"]]
                       for k, r in rep.items()]
    tables["norms_header"] = ["field", "classical", "finsler_sampled", "diverges", "reverse_bound_holds"]
    return rep, all(r["lower_bound_holds"] for r in rep.values())


def exp_linearity(cfg, rng, tol, tables):
    v = slip0_linearity(_space(cfg))
    return v.to_json(), True


def exp_verify(cfg, rng, tol, tables):
    results = verify_suite(oracle_shift=float(cfg.get("oracle_shift", 0.0)),
                           grid_step=float(cfg.get("grid_step", MIN_GRID_STEP)),
                           seed=int(cfg.get("seed", 0)))
    for r in results:
        print(r.line(), file=sys.stderr)
    tables["criteria"] = [[r.number, r.title, r.passed] for r in results]
    tables["criteria_header"] = ["criterion", "title", "pass"]
    return {"criteria": [r.to_json() for r in results]}, all(r.passed for r in results)


HANDLERS = {
    "validate": exp_validate, "distance": exp_distance, "slip": exp_slip, "index": exp_index,
    "dual-gap": exp_dual_gap, "isometry": exp_isometry, "example31": exp_example31,
    "example34": exp_example34, "linearity": exp_linearity, "verify": exp_verify,
}


def run(config: dict, seed: int | None = None, tol: float | None = None):
    """Run one experiment; returns ``(record, tables)``."""
    exp = config.get("experiment-id")
    if exp not in HANDLERS:
        raise UsageError(f"unknown experiment id {exp!r}; expected one of {', '.join(EXPERIMENTS)}")
    seed = config.get("seed", seed)
    tol = config.get("tol", tol)
    if tol is not None and not tol > 0:
        raise UsageError("tolerances must be positive")
    rng = None if seed is None else np.random.default_rng(int(seed))
    tables: dict = {}
    t0 = time.perf_counter()
    outputs, passed = HANDLERS[exp](config, rng, tol, tables)
    runtime = time.perf_counter() - t0
    outputs = jsonable(outputs)
    record = {
        "experiment-id": exp,
        "inputs-digest": _digest(config),
        "outputs": outputs,
        "outputs-digest": _digest(outputs),
        "pass": bool(passed),
        "runtime_s": runtime,
        "version": __version__,
        "exercises": EXERCISES[exp],
    }
    return record, tables


def write_tables(tables: dict, out: Path | None):
    written = []
    names = [k for k in tables if not k.endswith("_header")]
    for name in names:
        path = (out.with_name(f"{out.stem}_{name}.csv") if out is not None else Path(f"{name}.csv"))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            if f"{name}_header" in tables:
                w.writerow(tables[f"{name}_header"])
            w.writerows(jsonable(tables[name]))
        written.append(str(path))
    return written


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="finslerslip", description="Asymmetric-distance experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS + ("run",):
        sp = sub.add_parser(name, help="run the experiment named in the config" if name == "run" else None)
        sp.add_argument("--config", type=Path, help="JSON config file")
        sp.add_argument("--out", type=Path, help="JSON record path (default: stdout)")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--tol", type=float, default=None)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = {}
        if args.config is not None:
            try:
                cfg = json.loads(args.config.read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise UsageError(f"cannot read config: {exc}") from None
        if args.command != "run":
            if cfg.get("experiment-id", args.command) != args.command:
                raise UsageError(f"config is for {cfg['experiment-id']!r}, not {args.command!r}")
            cfg["experiment-id"] = args.command
        record, tables = run(cfg, args.seed, args.tol)
    except (UsageError, MalformedInputError, DegenerateInputError, KeyError, TypeError) as exc:
        print(f"finslerslip: error: {exc}", file=sys.stderr)
        return 2
    except (InvalidStructureError, OutOfDomainError, PreconditionError, ChartMismatchError,
            ApproximationFailedError, NotInConeError) as exc:
        print(f"finslerslip: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if tables:
        record["tables"] = write_tables(tables, args.out)
    text = json.dumps(record, indent=2, allow_nan=False)
    if args.out is not None:
        args.out.write_text(text + "\n")
    else:
        print(text)
    return 0 if record["pass"] else 1


if __name__ == "__main__":
    sys.exit(main())

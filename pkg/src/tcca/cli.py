"""``tcca`` command-line interface.

Exit codes: 0 success, 2 bad input (arguments, config, files, shapes),
3 numerical failure, 4 iteration budget exhausted (results are still
written, flagged as not converged).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import experiments as ex
from .errors import Budget, NumericalError, ShapeError, TccaError
from .hopm import HopmConfig, check_assumptions, fit_tcca
from .multiway import deflate, fit_block_tcca
from .synth import P2dccaModel, generate, population_optimum
from .tensor import DataTensor, _atomic_write, read_tensor, write_tensor

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL, EXIT_BUDGET = 0, 2, 3, 4


class ConfigError(TccaError, ValueError):
    """Malformed or incomplete key=value configuration."""


# ---------------------------------------------------------------- config

def parse_config(text: str, source: str = "<config>") -> Dict[str, tuple]:
    """Parse flat ``key = value`` lines; ``#`` starts a comment.

    Returns ``{key: (value, line_number)}``.
    """
    out: Dict[str, tuple] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r} "
                              f"(first set on line {out[key][1]})")
        out[key] = (value, lineno)
    return out


def read_config(path) -> Dict[str, tuple]:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), os.fspath(path))


class _Config:
    """Typed access to parsed config entries with located error messages."""

    def __init__(self, entries: Dict[str, tuple], source: str, known: Sequence[str]):
        self.entries, self.source = entries, source
        for key, (_, lineno) in entries.items():
            if key not in known:
                raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")

    def _get(self, key, conv, default, what):
        if key not in self.entries:
            if default is _REQUIRED:
                raise ConfigError(f"{self.source}: missing required key {key!r}")
            return default
        value, lineno = self.entries[key]
        try:
            return conv(value)
        except ValueError:
            raise ConfigError(f"{self.source}:{lineno}: {key} must be {what}, got {value!r}") from None

    def int(self, key, default=None):
        return self._get(key, int, default, "an integer")

    def float(self, key, default=None):
        return self._get(key, float, default, "a number")

    def ints(self, key, default=None):
        return self._get(key, lambda s: tuple(int(x) for x in s.split(",")), default,
                         "a comma-separated list of integers")

    def floats(self, key, default=None):
        return self._get(key, lambda s: tuple(float(x) for x in s.split(",")), default,
                         "a comma-separated list of numbers")


_REQUIRED = object()


def _load(path, known) -> _Config:
    if path is None:
        return _Config({}, "<defaults>", known)
    return _Config(read_config(path), os.fspath(path), known)


# ---------------------------------------------------------------- output

def _dumps(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, indent=2) + "\n").encode("utf-8")


def _write_json(path, obj) -> None:
    _atomic_write(path, _dumps(obj))


def _write_rows(path, rows: List[dict], columns: Sequence[str]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    _atomic_write(path, buf.getvalue().encode("utf-8"))


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _vec(f) -> list:
    return [float(x) for x in np.asarray(f).ravel()]


def _directions_json(d) -> dict:
    return {"factors": [_vec(f) for f in d.factors], "scale": float(getattr(d, "scale", 1.0))}


# --------------------------------------------------------------- commands

SIMULATE_KEYS = ("k", "dims", "lambda", "seed", "n", "lambdas")


def cmd_simulate(args) -> int:
    cfg = _load(args.config, SIMULATE_KEYS)
    k = cfg.int("k", _REQUIRED)
    dims = cfg.ints("dims", _REQUIRED)
    lam = cfg.float("lambda", _REQUIRED)
    seed = cfg.int("seed", _REQUIRED) if args.seed is None else args.seed
    n = cfg.int("n", 100)
    lambdas = cfg.floats("lambdas", None)
    if len(dims) != 4:
        raise ConfigError(f"{cfg.source}: dims needs 4 entries (m_x,n_x,m_y,n_y), got {len(dims)}")
    model = P2dccaModel.build(k, dims, lam, seed, lambdas)
    X, Y = generate(model, n)
    opt = population_optimum(model)
    os.makedirs(args.out, exist_ok=True)
    write_tensor(os.path.join(args.out, "X.tcca"), X)
    write_tensor(os.path.join(args.out, "Y.tcca"), Y)
    _write_json(os.path.join(args.out, "truth.json"), {
        "k": k, "dims": list(dims), "lambda": lam, "seed": seed, "n": n,
        "lambdas": list(lambdas) if lambdas else [lam],
        "rho": float(opt.rho), "u": _directions_json(opt.u), "v": _directions_json(opt.v),
    })
    return EXIT_OK


def _read_pair(args):
    X = read_tensor(args.X)
    Y = read_tensor(args.Y)
    if X.ndim < 2 or Y.ndim < 2:
        raise ShapeError("data files need a sample mode and at least one data mode")
    if X.shape[0] != Y.shape[0]:
        raise ShapeError(f"sample counts differ: X has {X.shape[0]}, Y has {Y.shape[0]}")
    if X.ndim != Y.ndim:
        raise ShapeError(f"X has {X.ndim - 1} data modes, Y has {Y.ndim - 1}")
    if args.center:
        X = X - X.mean(axis=0)
        Y = Y - Y.mean(axis=0)
    return DataTensor(X), DataTensor(Y)


def _hopm_config(args) -> HopmConfig:
    return HopmConfig(ridge_x=args.ridge_x, ridge_y=args.ridge_y, inner_eps=args.eps,
                      normalization=args.normalization, inner=args.inner,
                      max_sweeps=args.max_sweeps, tol=args.tol, seed=args.seed,
                      inner_method=args.inner_method)


def _report_json(rep) -> dict:
    return {"sigma_lx": float(rep.sigma_lx), "sigma_ux": float(rep.sigma_ux),
            "sigma_ly": float(rep.sigma_ly), "sigma_uy": float(rep.sigma_uy),
            "rho0": float(rep.rho0), "sign_flipped": bool(rep.sign_flipped),
            "violations": list(rep.violations)}


def cmd_fit(args) -> int:
    X, Y = _read_pair(args)
    cfg = _hopm_config(args)
    ranks = args.ranks
    if ranks is not None and any(r != 1 for r in ranks):
        res = fit_block_tcca(X, Y, ranks, cfg)
        _write_json(args.out, {
            "kind": "block", "ranks": list(ranks), "converged": bool(res.converged),
            "sweeps": len(res.trace.rho), "rho": res.trace.rho[-1],
            "u": [np.asarray(F).tolist() for F in res.u.factors],
            "v": [np.asarray(F).tolist() for F in res.v.factors],
        })
        if args.trace:
            rows = [{"sweep": i + 1, "rho": r, "diff": d, "inner_gap": 0.0}
                    for i, (r, d) in enumerate(zip(res.trace.rho, res.trace.diff))]
            _write_rows(args.trace, rows, ("sweep", "rho", "diff", "inner_gap"))
        return EXIT_OK if res.converged else EXIT_BUDGET

    if args.init == "effective":
        from .init import init_effective
        init = init_effective(X, Y)
    else:
        from .init import init_random
        init = init_random(X.dims, Y.dims, cfg.seed)
    report = check_assumptions(X, Y, init)
    st = fit_tcca(X, Y, init, cfg)
    _write_json(args.out, {
        "kind": "rank-one", "converged": bool(st.converged), "sweeps": st.sweeps, "rho": st.rho,
        "lambda": st.lambda_, "mu": st.mu, "u": _directions_json(st.u),
        "v": _directions_json(st.v), "assumptions": _report_json(report),
    })
    if args.trace:
        t = st.trace
        rows = [{"sweep": i + 1, "rho": t.rho[i], "diff": t.diff[i], "inner_gap": t.inner_gaps[i]}
                for i in range(st.sweeps)]
        _write_rows(args.trace, rows, ("sweep", "rho", "diff", "inner_gap"))
    return EXIT_OK if st.converged else EXIT_BUDGET


def cmd_deflate(args) -> int:
    X, Y = _read_pair(args)
    cfg = _hopm_config(args)
    init = "effective" if args.init == "effective" else None
    d = deflate(X, Y, args.components, cfg, outer_rounds=args.rounds, init=init)
    _write_json(args.out, {
        "kind": "deflation", "rounds": d.rounds, "rho": [float(r) for r in d.rho],
        "converged": [bool(s.converged) for s in d.states],
        "components": [{"u": _directions_json(u), "v": _directions_json(v)}
                       for u, v in d.components],
    })
    return EXIT_OK if all(s.converged for s in d.states) else EXIT_BUDGET


FIG2_KEYS = ("k", "dims", "lambda", "n", "inits", "max_sweeps", "tol")
FIG3_KEYS = ("k", "dims", "ns", "lambdas", "trials", "restarts", "max_sweeps", "tol")
INEXACT_KEYS = ("k", "dims", "lambda", "n", "sweeps", "eps", "ridge", "method", "step")


def cmd_experiment(args) -> int:
    seed = args.seed
    if args.protocol == "figure2":
        c = _load(args.config, FIG2_KEYS)
        d = ex.Figure2Config()
        cfg = ex.Figure2Config(c.int("k", d.k), c.ints("dims", d.dims), c.float("lambda", d.lam),
                               c.int("n", d.n), c.int("inits", d.inits),
                               c.int("max_sweeps", d.max_sweeps), c.float("tol", d.tol), seed)
        rows = ex.figure2(cfg)
        cols = ("init", "sweep", "rho_hopm", "diff_hopm", "rho_shopm", "diff_shopm")
    elif args.protocol == "figure3":
        c = _load(args.config, FIG3_KEYS)
        d = ex.Figure3Config()
        trials = 1000 if args.full else c.int("trials", d.trials)
        if args.trials is not None:
            trials = args.trials
        cfg = ex.Figure3Config(c.int("k", d.k), c.ints("dims", d.dims), c.ints("ns", d.ns),
                               c.floats("lambdas", d.lambdas), trials,
                               c.int("restarts", d.restarts), c.int("max_sweeps", d.max_sweeps),
                               c.float("tol", d.tol), seed)
        rows = ex.figure3(cfg)
        cols = ("n", "lambda", "trials", "success_effective", "error_effective",
                "success_random", "error_random")
    else:
        c = _load(args.config, INEXACT_KEYS)
        d = ex.InexactScalingConfig()
        method = c.entries.get("method", (d.method,))[0]
        cfg = ex.InexactScalingConfig(c.int("k", d.k), c.ints("dims", d.dims),
                                      c.float("lambda", d.lam), c.int("n", d.n),
                                      c.int("sweeps", d.sweeps), c.floats("eps", d.eps),
                                      c.float("ridge", d.ridge), method,
                                      c.float("step", d.step), d.max_iter, seed)
        rows = ex.inexact_scaling(cfg)
        cols = ("eps", "deviation", "sweeps")
    _write_rows(args.out, rows, cols)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _int_list(s: str) -> tuple:
    try:
        return tuple(int(x) for x in s.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def _add_solver_flags(p):
    p.add_argument("X", help="X data tensor (binary .tcca or 2-mode .csv), samples first")
    p.add_argument("Y", help="Y data tensor")
    p.add_argument("--normalization", choices=("metric", "sphere"), default="metric")
    p.add_argument("--inner", choices=("exact", "inexact"), default="exact")
    p.add_argument("--inner-method", choices=("gd", "svrg"), default="gd")
    p.add_argument("--eps", type=float, default=1e-6, help="inexact solve tolerance")
    p.add_argument("--ridge-x", type=float, default=0.0)
    p.add_argument("--ridge-y", type=float, default=0.0)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-sweeps", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init", choices=("random", "effective"), default="random")
    p.add_argument("--center", action="store_true", help="subtract sample means first")
    p.add_argument("--out", required=True, help="result JSON path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tcca", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a synthetic dataset with known optimum")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit one canonical pair (or a block with --ranks)")
    _add_solver_flags(p)
    p.add_argument("--ranks", type=_int_list, default=None)
    p.add_argument("--trace", default=None, help="per-sweep trace CSV path")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("deflate", help="fit several components by deflation")
    _add_solver_flags(p)
    p.add_argument("--components", type=int, required=True)
    p.add_argument("--rounds", type=int, default=3)
    p.set_defaults(func=cmd_deflate)

    p = sub.add_parser("experiment", help="run a simulation protocol, write CSV")
    p.add_argument("protocol", choices=("figure2", "figure3", "inexact-scaling"))
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=None, help="figure3: trials per grid point")
    p.add_argument("--full", action="store_true", help="figure3: 1000 trials per grid point")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_INPUT
    try:
        return args.func(args)
    except Budget as e:
        print(f"tcca: budget exhausted: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except NumericalError as e:
        print(f"tcca: numerical failure ({type(e).__name__}): {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as e:
        print(f"tcca: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

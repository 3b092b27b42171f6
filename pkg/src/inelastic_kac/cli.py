"""Command-line runner.

Commands::

    kac simulate          McKean ensembles at each t (CSV + JSON sidecar)
    kac solve             Wild-series characteristic function at each t
    kac stationary-check  fixed-point residual of the initial cf
    kac tails             rho(x) = x**alpha (1 - F0*(x)) and the c0 estimate
    kac equilibrium       ensembles against the predicted stable limit
    kac a0                equilibrium scale from c0, closed form and oracle

Settings come from an optional JSON file (``--config``) overridden by flags.
Every run writes ``manifest.json`` with the resolved configuration.  Exit
codes: 0 success, 2 configuration error, 3 numerical guard tripped.
"""

import argparse
from dataclasses import dataclass, field
import json
import math
from pathlib import Path
import sys

import numpy as np

from . import __version__
from .diagnostics import cf_noise_band, equilibrium_ladder, rho_curve
from .mckean import WORKERS_ENV, WorkLimitExceeded, run_ensemble, save_ensemble
from .model import ModelParams, law_from_config, symmetrize, unwrap
from .rng import check_seed
from .stable import a0_from_c0, stable_cf
from .wild import (CfGrid, SeriesCapExceeded, SolverConfig, fixed_point_residual,
                   p_wild_convolution, solve_cf, solve_cf_asymmetric)

COMMANDS = ("simulate", "solve", "stationary-check", "tails", "equilibrium", "a0")
NEEDS_SEED = ("simulate", "equilibrium")
NEEDS_INIT = ("simulate", "solve", "stationary-check", "tails", "equilibrium")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GUARD = 3


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    p: float = 1.0
    t: list = field(default_factory=lambda: [1.0])
    init: dict | None = None
    n: int = 10000
    seed: int | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    output_dir: str = "kac-output"
    c0: float | None = None
    probes: list | None = None
    plots: bool = True

    FIELDS = ("command", "p", "t", "init", "n", "seed", "solver", "output_dir",
              "c0", "probes", "plots")

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; choose from {list(COMMANDS)}")
        if not (isinstance(self.p, (int, float)) and self.p >= 0 and math.isfinite(self.p)):
            raise ConfigError("p must be a finite number >= 0")
        if not self.t or any(not (isinstance(x, (int, float)) and x >= 0 and math.isfinite(x))
                             for x in self.t):
            raise ConfigError("t must be a non-empty list of finite times >= 0")
        if not (isinstance(self.n, int) and not isinstance(self.n, bool) and self.n >= 1):
            raise ConfigError("n must be a positive integer")
        if self.command in NEEDS_SEED and self.seed is None:
            raise ConfigError(f"{self.command} needs an explicit seed (--seed)")
        if self.seed is not None:
            try:
                check_seed(self.seed)
            except (TypeError, ValueError) as exc:
                raise ConfigError(str(exc)) from None
        if self.command in NEEDS_INIT:
            if self.init is None:
                raise ConfigError(f"{self.command} needs an initial law (--init)")
            try:
                law_from_config(self.init)
            except (TypeError, ValueError, OSError) as exc:
                raise ConfigError(f"bad initial law: {exc}") from None
        if self.command == "a0":
            if self.c0 is None or not self.c0 >= 0:
                raise ConfigError("a0 needs c0 >= 0 (--c0)")
            if self.p == 0:
                raise ConfigError("a0 is defined for p > 0 (alpha < 2)")
        if self.probes is not None:
            xs = np.asarray(self.probes, dtype=float)
            if xs.size == 0 or np.any(xs <= 0) or np.any(np.diff(xs) <= 0):
                raise ConfigError("probes must be positive and strictly increasing")
        return self

    def to_json(self):
        return {"command": self.command, "p": self.p, "t": list(self.t), "init": self.init,
                "n": self.n, "seed": self.seed, "solver": self.solver.to_json(),
                "output_dir": self.output_dir, "c0": self.c0, "probes": self.probes,
                "plots": self.plots}

    @classmethod
    def from_json(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        unknown = set(data) - set(cls.FIELDS)
        if unknown:
            raise ConfigError(f"unknown configuration fields: {sorted(unknown)}")
        if "command" not in data:
            raise ConfigError("configuration needs a command")
        kw = dict(data)
        if "solver" in kw:
            try:
                kw["solver"] = SolverConfig.from_json(kw["solver"] or {})
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad solver settings: {exc}") from None
        if "t" in kw:
            kw["t"] = [kw["t"]] if isinstance(kw["t"], (int, float)) else list(kw["t"])
        return cls(**kw).validate()


# ---------------------------------------------------------------------------
# argument parsing

def parse_times(text):
    """``"1,2,4,8"`` or ``"3"`` -> list of floats."""
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad time ladder {text!r}") from None


def parse_law(text):
    """``"pareto:alpha0=1,x0=1"`` or a JSON object."""
    text = text.strip()
    if text.startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad --init JSON: {exc}") from None
    family, _, rest = text.partition(":")
    out = {"family": family}
    for item in filter(None, rest.split(",")):
        key, eq, value = item.partition("=")
        if not eq:
            raise ConfigError(f"bad --init item {item!r}; expected key=value")
        if key == "path":
            out[key] = value
        else:
            try:
                out[key] = float(value)
            except ValueError:
                raise ConfigError(f"bad --init value {item!r}") from None
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser():
    ap = _Parser(prog="kac", description="Inelastic Kac equation: sampling, solving, diagnostics.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON configuration file; flags override it")
    ap.add_argument("--p", type=float)
    ap.add_argument("--t", help="time or comma-separated ladder, e.g. 1,2,4,8")
    ap.add_argument("--init", help='initial law, e.g. "pareto:alpha0=1,x0=1" or JSON')
    ap.add_argument("--n", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", dest="output_dir")
    ap.add_argument("--c0", type=float)
    ap.add_argument("--probes", help="comma-separated tail probe points")
    ap.add_argument("--grid-size", type=int)
    ap.add_argument("--xi-max", type=float)
    ap.add_argument("--quad-nodes", type=int)
    ap.add_argument("--series-eps", type=float)
    ap.add_argument("--no-plots", action="store_true")
    return ap


def config_from_args(argv):
    args = build_parser().parse_args(argv)
    data = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
    data["command"] = args.command
    for key in ("p", "n", "seed", "output_dir", "c0"):
        value = getattr(args, key)
        if value is not None:
            data[key] = value
    if args.t is not None:
        data["t"] = parse_times(args.t)
    if args.init is not None:
        data["init"] = parse_law(args.init)
    if args.probes is not None:
        data["probes"] = parse_times(args.probes)
    if args.no_plots:
        data["plots"] = False
    solver = dict(data.get("solver") or {})
    for key in ("grid_size", "xi_max", "quad_nodes", "series_eps"):
        value = getattr(args, key)
        if value is not None:
            solver[key] = value
    if solver:
        data["solver"] = solver
    return RunConfig.from_json(data)


# ---------------------------------------------------------------------------
# commands

def _tag(t):
    return f"t{t:g}"


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _simulate(cfg, params, law, out, plots):
    runs = []
    for t in cfg.t:
        ens = run_ensemble(params, law, t, cfg.n, cfg.seed)
        stem = f"ensemble_{_tag(t)}"
        save_ensemble(ens, out / f"{stem}.csv", out / f"{stem}.json")
        v = ens.values
        runs.append({"t": t, "csv": f"{stem}.csv", "cap_events": ens.cap_events,
                     "leaves": ens.leaves, "median_abs": float(np.median(np.abs(v))),
                     "mean_square": float(np.mean(v ** 2))})
        if plots:
            plots.ensemble_histogram(v, out / f"{stem}.png", f"p = {cfg.p:g}, t = {t:g}")
    return {"runs": runs, "cap_events": sum(r["cap_events"] for r in runs)}


def _solve(cfg, params, law, out, plots):
    phi0 = CfGrid.for_law(law, cfg.solver)
    asymmetric = bool(np.any(phi0.values.imag != 0.0))
    runs, curves = [], {}
    for t in cfg.t:
        if asymmetric:
            sol = solve_cf_asymmetric(phi0, params, t, cfg.solver)
        else:
            sol = solve_cf(phi0, params, t, cfg.solver)
        stem = f"cf_{_tag(t)}"
        sol.to_csv(out / f"{stem}.csv")
        runs.append({"t": t, "csv": f"{stem}.csv", "asymmetric": asymmetric,
                     "invariant_violations": sol.violations(symmetric=not asymmetric),
                     **sol.meta})
        curves[f"t = {t:g}"] = sol.values.real
    if plots:
        plots.cf_curves(phi0.nodes, curves, out / "cf.png", f"p = {cfg.p:g}")
    return {"runs": runs}


def _stationary(cfg, params, law, out, plots):
    phi = CfGrid.for_law(law, cfg.solver)
    conv = p_wild_convolution(phi, phi, params, cfg.solver)
    residual = fixed_point_residual(phi, params, cfg.solver)
    data = np.column_stack([phi.nodes, phi.values.real, conv.values.real])
    np.savetxt(out / "fixed_point.csv", data, delimiter=",", header="xi,phi_re,conv_re",
               comments="", fmt="%.17g")
    if plots:
        plots.cf_curves(phi.nodes, {"phi": phi.values.real, "phi . phi": conv.values.real},
                        out / "fixed_point.png", f"p = {cfg.p:g}")
    return {"residual": residual, "alpha": params.alpha, "csv": "fixed_point.csv"}


def _tails(cfg, params, law, out, plots):
    rep = rho_curve(symmetrize(law), params.alpha, cfg.probes)
    np.savetxt(out / "rho.csv", np.column_stack([rep.xs, rep.rho_values]), delimiter=",",
               header="x,rho", comments="", fmt="%.17g")
    if plots:
        plots.rho_plot(rep.xs, rep.rho_values, rep.c0_estimate, out / "rho.png",
                       f"alpha = {params.alpha:g}")
    return {"tail": rep.to_json(), "csv": "rho.csv"}


def _equilibrium(cfg, params, law, out, plots):
    reports, summary = equilibrium_ladder(params, law, cfg.t, cfg.n, cfg.seed)
    for rep in reports:
        if rep.target is None:
            continue
        emp = rep.cf_values
        data = np.column_stack([rep.xis, emp.real, emp.imag, stable_cf(rep.target, rep.xis)])
        np.savetxt(out / f"cf_{_tag(rep.t)}.csv", data, delimiter=",",
                   header="xi,re,im,target_re", comments="", fmt="%.17g")
    if plots and not reports[0].divergent:
        plots.distance_ladder(cfg.t, summary["cf_sup_distance"], cf_noise_band(cfg.n),
                              out / "distance.png", f"p = {cfg.p:g}")
    return {"reports": [r.to_json() for r in reports], "summary": summary,
            "cap_events": sum(r.cap_events for r in reports)}


def _a0(cfg, params, law, out, plots):
    closed = a0_from_c0(cfg.c0, params.alpha, "closed")
    oracle = a0_from_c0(cfg.c0, params.alpha, "oracle")
    return {"c0": cfg.c0, "alpha": params.alpha, "a0_closed": closed, "a0_oracle": oracle,
            "agree_1e-8": abs(closed - oracle) < 1e-8}


RUNNERS = {"simulate": _simulate, "solve": _solve, "stationary-check": _stationary,
           "tails": _tails, "equilibrium": _equilibrium, "a0": _a0}


def run(cfg):
    """Execute one configuration; returns ``(exit code, report dict)``."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    params = ModelParams(cfg.p)
    law = law_from_config(cfg.init) if cfg.init is not None else None
    if law is not None and cfg.command in ("stationary-check",) and not unwrap(law)[0].symmetric:
        law = symmetrize(law)
    plots = None
    if cfg.plots:
        from . import plotting as plots
    manifest = {"version": __version__, "config": cfg.to_json(),
                "workers_env": WORKERS_ENV}
    _write_json(out / "manifest.json", manifest)
    try:
        report = RUNNERS[cfg.command](cfg, params, law, out, plots)
    except (SeriesCapExceeded, WorkLimitExceeded) as exc:
        err = {"error": "numerical-guard", "kind": type(exc).__name__, "message": str(exc)}
        _write_json(out / "error.json", err)
        return EXIT_GUARD, err
    report = {"command": cfg.command, "p": cfg.p, "alpha": params.alpha, **report}
    _write_json(out / "report.json", report)
    return EXIT_OK, report


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = config_from_args(argv)
    except ConfigError as exc:
        json.dump({"error": "config", "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return EXIT_CONFIG
    code, report = run(cfg)
    json.dump(report, sys.stdout, indent=2, sort_keys=True, default=_json_default)
    sys.stdout.write("\n")
    return code


if __name__ == "__main__":
    sys.exit(main())

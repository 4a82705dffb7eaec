"""Command-line interface: ``intcens <command> [options]``.

Every command accepts ``--config FILE`` with flat ``key = value`` lines whose
keys are the command's long option names (dashes or underscores).  Options
given on the command line override the file.  The resolved configuration is
logged to stderr; data go to stdout or ``--out``.

Exit codes: 0 success, 1 usage or I/O error, 2 numerical non-convergence or a
failed optimality check.
"""

from __future__ import annotations

import argparse
import io
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import PRESETS, SCALINGS, chernoff_variance, curve_csv, get_model, theoretical_variance_curve
from .characterization import verify_fenchel, verify_fenchel_simple
from .data import DataError, ingest_csv, ingest_current_status_csv, read_step_csv, write_step_csv
from .estimators import IcmOptions, fit_current_status, fit_ls_full, fit_ls_simple, fit_mle_ic2
from .functionals import functional_variance_study
from .simulation import ESTIMATORS, StudyConfig, StudyTable, variance_grid_study

log = logging.getLogger("intcens")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors exit with 1 instead of argparse's 2, which is reserved for numerics
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> tuple:
    try:
        return tuple(float(x) for x in str(text).replace(";", ",").split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def _estimator_list(text: str) -> tuple:
    names = tuple(x.strip().replace("-", "_") for x in str(text).split(",") if x.strip())
    bad = [x for x in names if x not in ESTIMATORS]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"estimators must be drawn from {','.join(ESTIMATORS)}")
    return names


def _model_name(text: str) -> str:
    try:
        return get_model(text).name
    except KeyError as exc:
        raise argparse.ArgumentTypeError(str(exc.args[0])) from None


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _threads_default() -> int:
    return os.cpu_count() or 1


# -- parser ------------------------------------------------------------------

DEFAULTS: dict[str, dict] = {}


def _add(sub, name, help_text, description):
    p = sub.add_parser(name, help=help_text, description=description,
                       argument_default=argparse.SUPPRESS)
    p.add_argument("--config", metavar="FILE", help="key = value file; command-line options override it")
    DEFAULTS[name] = {}
    return p


def _opt(p, cmd, *flags, default=None, **kw):
    action = p.add_argument(*flags, **kw)
    DEFAULTS[cmd][action.dest] = default
    return action


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="intcens", description="Estimation and limit theory for interval censored data.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-q", "--quiet", action="store_true", help="only log warnings and errors")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = _add(sub, "estimate", "fit a distribution function to a CSV sample",
             "Fit F from a CSV sample and write t,F rows.  Case-2 input has rows "
             "u,v,d0,d1 or u,v,x; current status input has rows t,delta.")
    _opt(p, "estimate", "input", metavar="INPUT", help="input CSV file")
    _opt(p, "estimate", "--estimator", default="ls-full",
         choices=["mle", "ls-full", "ls-simple", "current-status"], help="estimator (default: ls-full)")
    _opt(p, "estimate", "--tol", default=1e-8, type=float, help="convergence tolerance (default: 1e-8)")
    _opt(p, "estimate", "--max-iter", default=500, type=int, help="iteration cap (default: 500)")
    _opt(p, "estimate", "--out", metavar="PATH", help="output CSV (default: stdout)")

    p = _add(sub, "study", "simulated variance of F_n(t) on a time grid",
             "Monte Carlo study of n^(2/3) var(F_n(t)) per estimator and grid time.")
    _opt(p, "study", "--model", default="uniform-[0,2]", type=_model_name,
         help=f"model preset: {', '.join(PRESETS)} (default: uniform-[0,2])")
    _opt(p, "study", "--n", default=1000, type=int, help="sample size (default: 1000)")
    _opt(p, "study", "--reps", default=1000, type=int, help="replications, at least 2 (default: 1000)")
    _opt(p, "study", "--grid", type=_float_list, help="comma-separated times (default: model grid)")
    _opt(p, "study", "--estimators", default=ESTIMATORS, type=_estimator_list,
         help="comma-separated subset of mle,ls_full,ls_simple (default: all)")
    _opt(p, "study", "--seed", default=0, type=int, help="master seed (default: 0)")
    _opt(p, "study", "--theory", default=False, type=_bool, help="join the limit curve: true/false (default: false)")
    _opt(p, "study", "--scaling", default="direct", choices=SCALINGS, help="sigma scaling for --theory (default: direct)")
    _opt(p, "study", "--var-z", type=float, help="Var(Z) for --theory (default: Monte Carlo estimate)")
    _opt(p, "study", "--threads", default=None, type=int, help="worker processes (default: all cores)")
    _opt(p, "study", "--out", metavar="PATH", help="output CSV (default: stdout)")

    p = _add(sub, "asymptotics", "limit scale sigma(t) and n^(2/3) variance limit",
             "Tabulate sigma(t) and sigma(t)^2 Var(Z) on a grid of times.")
    _opt(p, "asymptotics", "--model", default="uniform-[0,2]", type=_model_name,
         help=f"model preset: {', '.join(PRESETS)} (default: uniform-[0,2])")
    _opt(p, "asymptotics", "--grid", type=_float_list, help="comma-separated times (default: model grid)")
    _opt(p, "asymptotics", "--variant", default="full", choices=["full", "simple"],
         help="least squares variant (default: full)")
    _opt(p, "asymptotics", "--scaling", default="direct", choices=SCALINGS, help="sigma scaling (default: direct)")
    _opt(p, "asymptotics", "--var-z", type=float, help="Var(Z) (default: Monte Carlo estimate)")
    _opt(p, "asymptotics", "--seed", default=0, type=int, help="seed for the Var(Z) estimate (default: 0)")
    _opt(p, "asymptotics", "--out", metavar="PATH", help="output CSV (default: stdout)")

    p = _add(sub, "chernoff", "Monte Carlo estimate of Var(Z)",
             "Estimate Var(Z) for Z the minimizer of two-sided Brownian motion plus t^2.")
    _opt(p, "chernoff", "--paths", default=100_000, type=int, help="number of paths (default: 100000)")
    _opt(p, "chernoff", "--horizon", default=2.5, type=float, help="half-width T of [-T, T] (default: 2.5)")
    _opt(p, "chernoff", "--step", default=1e-3, type=float, help="grid step (default: 0.001)")
    _opt(p, "chernoff", "--seed", default=0, type=int, help="seed (default: 0)")
    _opt(p, "chernoff", "--no-cache", default=False, type=_bool, help="bypass the on-disk cache: true/false")
    _opt(p, "chernoff", "--out", metavar="PATH", help="output CSV (default: stdout)")

    p = _add(sub, "functional", "Monte Carlo variance of the plug-in mean",
             "Estimate n var(m(F_n)) for the mean functional per estimator.")
    _opt(p, "functional", "--model", default="triangle-[0,1]", type=_model_name,
         help="model preset (default: triangle-[0,1])")
    _opt(p, "functional", "--n", default=1000, type=int, help="sample size (default: 1000)")
    _opt(p, "functional", "--reps", default=2000, type=int, help="replications (default: 2000)")
    _opt(p, "functional", "--seed", default=0, type=int, help="master seed (default: 0)")
    _opt(p, "functional", "--estimators", default=ESTIMATORS, type=_estimator_list,
         help="comma-separated subset of mle,ls_full,ls_simple (default: all)")
    _opt(p, "functional", "--raw-dir", metavar="DIR", help="write raw estimates, one file per estimator")
    _opt(p, "functional", "--threads", default=None, type=int, help="worker processes (default: all cores)")
    _opt(p, "functional", "--out", metavar="PATH", help="output CSV (default: stdout)")

    p = _add(sub, "verify", "check the optimality conditions of a fit",
             "Audit a t,F fit against a sample; exit 0 iff the conditions hold at --tol.")
    _opt(p, "verify", "input", metavar="INPUT", help="sample CSV")
    _opt(p, "verify", "fit", metavar="FIT", help="fitted t,F CSV")
    _opt(p, "verify", "--which", default="full", choices=["full", "simple"], help="criterion (default: full)")
    _opt(p, "verify", "--tol", default=None, type=float,
         help="tolerance (default: 1e-8 full, 1e-10 simple)")

    p = _add(sub, "plot-data", "long-format plotting data from a study table",
             "Turn a study CSV into t,series,value rows, linearly interpolated between grid times.")
    _opt(p, "plot-data", "input", metavar="INPUT", help="study CSV")
    _opt(p, "plot-data", "--points", default=1, type=int, help="points per grid interval (default: 1)")
    _opt(p, "plot-data", "--out", metavar="PATH", help="output CSV (default: stdout)")
    return parser


# -- config ------------------------------------------------------------------

def read_config(path: str) -> dict:
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def resolve(parser: argparse.ArgumentParser, ns: argparse.Namespace) -> dict:
    """Defaults, then config file values, then explicit options."""
    cmd = ns.command
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices[cmd]
    actions = {a.dest: a for a in sub._actions if a.dest in DEFAULTS[cmd]}
    resolved = dict(DEFAULTS[cmd])
    given = vars(ns)
    if given.get("config"):
        for key, text in read_config(given["config"]).items():
            if key not in actions:
                raise UsageError(f"unknown config key {key!r} for {cmd}")
            act = actions[key]
            try:
                value = act.type(text) if act.type else text
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"config key {key}: {exc}") from None
            if act.choices is not None and value not in act.choices:
                raise UsageError(f"config key {key}: {value!r} not in {list(act.choices)}")
            resolved[key] = value
    for key in actions:
        if key in given:
            resolved[key] = given[key]
    missing = [k for k, a in actions.items() if not a.option_strings and resolved[k] is None]
    if missing:
        raise UsageError(f"missing required argument(s): {', '.join(missing)}")
    return resolved


def _emit(text: str, out):
    if out:
        try:
            Path(out).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot write {out}: {exc.strerror}") from None
    else:
        sys.stdout.write(text)


def _threads(cfg) -> int:
    t = cfg.get("threads") or _threads_default()
    if t < 1:
        raise UsageError("--threads must be >= 1")
    return t


# -- commands ------------------------------------------------------------------

def cmd_estimate(cfg: dict) -> int:
    est = cfg["estimator"]
    opts = IcmOptions(tol=cfg["tol"], max_iter=cfg["max_iter"])
    converged = True
    if est == "current-status":
        F = fit_current_status(ingest_current_status_csv(cfg["input"]))
    else:
        sample = ingest_csv(cfg["input"])
        if est == "ls-simple":
            F = fit_ls_simple(sample)
            log.info("fenchel: %s", verify_fenchel_simple(F, sample).as_dict())
        else:
            res = (fit_ls_full if est == "ls-full" else fit_mle_ic2)(sample, opts)
            F, converged = res.F, res.converged
            log.info("iterations: %d, fenchel: %s", res.iterations, res.fenchel.as_dict())
    buf = io.StringIO()
    write_step_csv(F, buf)
    _emit(buf.getvalue(), cfg["out"])
    if not converged:
        log.error("no convergence at tol %g", cfg["tol"])
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_study(cfg: dict) -> int:
    sc = StudyConfig(model=cfg["model"], n=cfg["n"], reps=cfg["reps"], grid=cfg["grid"],
                     estimators=cfg["estimators"], seed=cfg["seed"], workers=_threads(cfg),
                     theory=cfg["theory"], var_z=cfg["var_z"], scaling=cfg["scaling"])
    table = variance_grid_study(sc)
    if any(table.failures.values()):
        log.warning("excluded non-converged replications: %s", table.failures)
    _emit(table.to_csv(), cfg["out"])
    return EXIT_OK


def cmd_asymptotics(cfg: dict) -> int:
    from .simulation import default_grid

    model = get_model(cfg["model"])
    grid = default_grid(model) if cfg["grid"] is None else np.asarray(cfg["grid"])
    if np.any(grid <= 0) or np.any(grid >= model.M):
        raise UsageError(f"grid must lie in (0, {model.M})")
    var_z = cfg["var_z"]
    if var_z is None:
        var_z = chernoff_variance(seed=cfg["seed"]).var
        log.info("Var(Z) estimate: %r", var_z)
    rows = theoretical_variance_curve(model, grid, cfg["variant"], var_z, cfg["scaling"])
    _emit(curve_csv(rows), cfg["out"])
    return EXIT_OK


def cmd_chernoff(cfg: dict) -> int:
    if cfg["paths"] < 1 or cfg["horizon"] <= 0 or cfg["step"] <= 0:
        raise UsageError("need --paths >= 1, --horizon > 0, --step > 0")
    est = chernoff_variance(cfg["paths"], cfg["horizon"], cfg["step"], cfg["seed"],
                            use_cache=not cfg["no_cache"])
    d = est.as_dict()
    _emit(",".join(d) + "\n" + ",".join(repr(v) for v in d.values()) + "\n", cfg["out"])
    return EXIT_OK


def cmd_functional(cfg: dict) -> int:
    study = functional_variance_study(cfg["model"], cfg["n"], cfg["reps"], cfg["seed"],
                                      cfg["estimators"], workers=_threads(cfg))
    if cfg["raw_dir"]:
        raw = Path(cfg["raw_dir"])
        try:
            raw.mkdir(parents=True, exist_ok=True)
            for est in cfg["estimators"]:
                (raw / f"{est}.txt").write_text(study.raw_lines(est), encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot write raw estimates: {exc}") from None
    _emit(study.to_csv(), cfg["out"])
    return EXIT_OK


def cmd_verify(cfg: dict) -> int:
    sample = ingest_csv(cfg["input"])
    F = read_step_csv(cfg["fit"])
    if cfg["which"] == "full":
        report = verify_fenchel(F, sample, cfg["tol"] or 1e-8)
    else:
        report = verify_fenchel_simple(F, sample, cfg["tol"] or 1e-10)
    sys.stdout.write(report.to_text() + "\n")
    return EXIT_OK if report.passed else EXIT_NUMERIC


def cmd_plot_data(cfg: dict) -> int:
    if cfg["points"] < 1:
        raise UsageError("--points must be >= 1")
    try:
        text = Path(cfg["input"]).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {cfg['input']}: {exc.strerror}") from None
    _emit(StudyTable.from_csv(text).to_long(cfg["points"]), cfg["out"])
    return EXIT_OK


COMMANDS = {
    "estimate": cmd_estimate,
    "study": cmd_study,
    "asymptotics": cmd_asymptotics,
    "chernoff": cmd_chernoff,
    "functional": cmd_functional,
    "verify": cmd_verify,
    "plot-data": cmd_plot_data,
}


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if ns.quiet else logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s", force=True)
    try:
        cfg = resolve(parser, ns)
        log.info("config %s: %s", ns.command, cfg)
        return COMMANDS[ns.command](cfg)
    except (UsageError, DataError, OSError, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"intcens {ns.command}: error: {msg}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

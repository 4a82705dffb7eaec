"""Data generators and Monte Carlo variance studies.

Replication ``r`` of a study with master seed ``s`` draws from the stream
``SeedSequence(s, spawn_key=(r,))``.  Results therefore depend only on
``(s, r)`` and not on the number of workers or on scheduling.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .asymptotics import ModelSpec, get_model, theoretical_variance_curve
from .data import Sample2, StepDistribution, evaluate
from .estimators import IcmOptions, fit_ls_full, fit_ls_simple, fit_mle_ic2

log = logging.getLogger(__name__)

_TRUNC = 1.0 - math.exp(-2.0)
ESTIMATORS = ("mle", "ls_full", "ls_simple")


# -- generators ---------------------------------------------------------------

def trunc_exp_inverse(w):
    """Inverse of ``F0(x) = (1 - exp(-x)) / (1 - exp(-2))`` on [0, 2]."""
    return -np.log1p(-np.asarray(w, dtype=float) * _TRUNC)


def _check_n(n):
    if n < 1:
        raise ValueError("n must be >= 1")


def gen_example1(n: int, f0_choice: str, rng: np.random.Generator) -> Sample2:
    """Event times from the truncated exponential or uniform law on [0, 2];
    ``(U, V)`` the ordered pair of two independent Uniform[0, 2] variables."""
    _check_n(n)
    w = rng.uniform(size=n)
    if f0_choice in ("trunc-exp", "trunc-exp-[0,2]", "exp"):
        x = trunc_exp_inverse(w)
    elif f0_choice in ("uniform", "uniform-[0,2]"):
        x = 2.0 * w
    else:
        raise ValueError(f"unknown f0_choice {f0_choice!r}")
    uv = np.sort(rng.uniform(0.0, 2.0, size=(n, 2)), axis=1)
    return Sample2.from_latent(uv[:, 0], uv[:, 1], x, M=2.0)


def gen_triangle(n: int, rng: np.random.Generator) -> Sample2:
    """Uniform[0, 1] event times; ``(U, V)`` uniform on the upper triangle of the unit square."""
    _check_n(n)
    x = rng.uniform(size=n)
    uv = np.sort(rng.uniform(size=(n, 2)), axis=1)
    return Sample2.from_latent(uv[:, 0], uv[:, 1], x, M=1.0)


def generate(model: str | ModelSpec, n: int, rng: np.random.Generator) -> Sample2:
    name = model.name if isinstance(model, ModelSpec) else get_model(model).name
    if name == "triangle-[0,1]":
        return gen_triangle(n, rng)
    return gen_example1(n, name, rng)


def replication_rng(seed: int, r: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(r,)))


def fit_named(name: str, sample: Sample2, tol: float = 1e-8) -> tuple[StepDistribution, bool]:
    """Fit one of ``mle``, ``ls_full``, ``ls_simple``; returns ``(F, converged)``."""
    if name == "ls_simple":
        return fit_ls_simple(sample), True
    if name == "ls_full":
        res = fit_ls_full(sample, IcmOptions(tol=tol))
    elif name == "mle":
        res = fit_mle_ic2(sample, IcmOptions(tol=tol))
    else:
        raise ValueError(f"unknown estimator {name!r}")
    return res.F, res.converged


def sup_error(F: StepDistribution, F0: Callable, M: float) -> float:
    """``sup_{t in [0, M]} |F(t) - F0(t)|`` for a step F and continuous increasing F0.

    The supremum is attained at a knot, either at the value or the left limit.
    """
    knots = np.asarray(F.knots, dtype=float)
    inside = (knots >= 0) & (knots <= M)
    k = knots[inside]
    right = np.asarray(F.values)[inside]
    left = np.concatenate(([0.0], np.asarray(F.values)))[:-1][inside]
    f0k = np.asarray(F0(k), dtype=float)
    cands = [np.abs(right - f0k), np.abs(left - f0k), [abs(float(evaluate(F, M)) - float(F0(M)))],
             [abs(float(F0(0.0)))]]
    return float(max(np.max(c) if len(c) else 0.0 for c in cands))


# -- variance studies ------------------------------------------------------------

def default_grid(model: ModelSpec) -> np.ndarray:
    if model.M == 2.0:
        return np.round(np.arange(1, 20) * 0.1, 10)
    return np.round(np.linspace(0.0, model.M, 21)[1:-1], 10)


@dataclass(frozen=True)
class StudyConfig:
    model: str = "uniform-[0,2]"
    n: int = 1000
    reps: int = 1000
    grid: tuple | None = None
    estimators: tuple = ESTIMATORS
    seed: int = 0
    workers: int = 1
    tol: float = 1e-8
    theory: bool = False
    var_z: float | None = None
    scaling: str = "direct"

    def __post_init__(self):
        spec = get_model(self.model)
        object.__setattr__(self, "model", spec.name)
        grid = default_grid(spec) if self.grid is None else np.asarray(self.grid, dtype=float)
        if grid.size == 0 or np.any(grid <= 0) or np.any(grid >= spec.M):
            raise ValueError(f"grid must lie in (0, {spec.M})")
        object.__setattr__(self, "grid", tuple(float(t) for t in grid))
        est = tuple(self.estimators)
        bad = [e for e in est if e not in ESTIMATORS]
        if bad or not est:
            raise ValueError(f"estimators must be a non-empty subset of {ESTIMATORS}")
        object.__setattr__(self, "estimators", est)
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def spec(self) -> ModelSpec:
        return get_model(self.model)


@dataclass(frozen=True)
class StudyRow:
    t: float
    estimator: str
    n: int
    reps: int
    scaled_var: float
    mc_stderr: float
    theory: float | None = None


@dataclass
class StudyTable:
    rows: list[StudyRow]
    failures: dict = field(default_factory=dict)

    def select(self, estimator: str) -> list[StudyRow]:
        return sorted((r for r in self.rows if r.estimator == estimator), key=lambda r: r.t)

    def value(self, estimator: str, t: float) -> float:
        """Scaled variance at ``t``, linearly interpolated between grid values."""
        rows = self.select(estimator)
        if not rows:
            raise KeyError(estimator)
        ts = np.array([r.t for r in rows])
        vs = np.array([r.scaled_var for r in rows])
        if t < ts[0] or t > ts[-1]:
            raise ValueError("t outside the study grid")
        return float(np.interp(t, ts, vs))

    def to_csv(self) -> str:
        with_theory = any(r.theory is not None for r in self.rows)
        head = "t,estimator,n,reps,scaled_var,mc_stderr" + (",theory" if with_theory else "")
        lines = [head]
        for r in self.rows:
            line = f"{r.t!r},{r.estimator},{r.n},{r.reps},{r.scaled_var!r},{r.mc_stderr!r}"
            if with_theory:
                line += "," + ("" if r.theory is None else repr(r.theory))
            lines.append(line)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "StudyTable":
        reader = csv.DictReader(io.StringIO(text))
        need = {"t", "estimator", "n", "reps", "scaled_var", "mc_stderr"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise ValueError(f"study table needs columns {sorted(need)}")
        rows = []
        for rec in reader:
            theory = rec.get("theory")
            rows.append(StudyRow(float(rec["t"]), rec["estimator"], int(rec["n"]), int(rec["reps"]),
                                 float(rec["scaled_var"]), float(rec["mc_stderr"]),
                                 float(theory) if theory not in (None, "") else None))
        return cls(rows)

    def to_long(self, points_per_interval: int = 1) -> str:
        """Tidy long format ``t,series,value`` with linear interpolation between grid values."""
        out = ["t,series,value"]
        for est in dict.fromkeys(r.estimator for r in self.rows):
            rows = self.select(est)
            ts = np.array([r.t for r in rows])
            series = {est: np.array([r.scaled_var for r in rows])}
            if all(r.theory is not None for r in rows):
                series[f"{est}:theory"] = np.array([r.theory for r in rows])
            fine = _refine(ts, points_per_interval)
            for name, vals in series.items():
                for t, val in zip(fine, np.interp(fine, ts, vals)):
                    out.append(f"{t!r},{name},{float(val)!r}")
        return "\n".join(out) + "\n"


def _refine(ts, k):
    if k <= 1 or ts.size < 2:
        return ts
    pieces = [np.linspace(a, b, k, endpoint=False) for a, b in zip(ts[:-1], ts[1:])]
    return np.concatenate(pieces + [ts[-1:]])


def variance_with_stderr(x: np.ndarray) -> tuple[float, float]:
    """Unbiased sample variance and its delta-method standard error (fourth moment)."""
    x = np.asarray(x, dtype=float)
    r = x.size
    if r < 2:
        raise ValueError("variance needs reps >= 2")
    c = x - math.fsum(x) / r
    var = math.fsum(c * c) / (r - 1)
    m2 = math.fsum(c * c) / r
    m4 = math.fsum(c ** 4) / r
    return var, math.sqrt(max(m4 - m2 * m2, 0.0) / r)


def _one_replication(args):
    cfg, r = args
    rng = replication_rng(cfg.seed, r)
    sample = generate(cfg.model, cfg.n, rng)
    grid = np.asarray(cfg.grid)
    out = {}
    for est in cfg.estimators:
        F, ok = fit_named(est, sample, cfg.tol)
        out[est] = (np.asarray(evaluate(F, grid), dtype=float), ok)
    return out


def run_replications(cfg: StudyConfig, fn=_one_replication) -> list:
    """Evaluate ``fn((cfg, r))`` for every replication, in replication order."""
    tasks = [(cfg, r) for r in range(cfg.reps)]
    if cfg.workers > 1 and cfg.reps > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(fn, tasks, chunksize=max(1, cfg.reps // (8 * cfg.workers))))
    return [fn(t) for t in tasks]


def variance_grid_study(cfg: StudyConfig) -> StudyTable:
    """``n^{2/3}`` times the across-replication variance of ``F_n(t)`` at every grid point."""
    if cfg.reps < 2:
        raise ValueError("variance_grid_study needs reps >= 2")
    results = run_replications(cfg)
    grid = np.asarray(cfg.grid)
    scale = cfg.n ** (2.0 / 3.0)
    theory = {}
    if cfg.theory:
        for est in cfg.estimators:
            variant = "simple" if est == "ls_simple" else "full"
            curve = theoretical_variance_curve(cfg.spec, grid, variant, cfg.var_z, cfg.scaling)
            theory[est] = [row.var_limit for row in curve]
    rows, failures = [], {}
    for est in cfg.estimators:
        kept = np.array([res[est][0] for res in results if res[est][1]])
        failures[est] = cfg.reps - len(kept)
        if failures[est]:
            log.warning("%s: %d of %d replications did not converge and were excluded",
                        est, failures[est], cfg.reps)
        if len(kept) < 2:
            raise RuntimeError(f"{est}: fewer than two converged replications")
        for j, t in enumerate(grid):
            var, se = variance_with_stderr(kept[:, j])
            rows.append(StudyRow(float(t), est, cfg.n, len(kept), scale * var, scale * se,
                                 theory[est][j] if cfg.theory else None))
    return StudyTable(rows, failures)


def with_reps(cfg: StudyConfig, reps: int) -> StudyConfig:
    return replace(cfg, reps=reps)


def consistency_errors(model: str, ns: Sequence[int], reps: int, estimators=ESTIMATORS,
                       seed: int = 0) -> dict:
    """Sup-distance to ``F0`` for every ``(estimator, n)`` over ``reps`` replications."""
    spec = get_model(model)
    out = {(e, n): [] for e in estimators for n in ns}
    for n in ns:
        for r in range(reps):
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(n, r)))
            sample = generate(spec, n, rng)
            for e in estimators:
                F, _ = fit_named(e, sample)
                out[(e, n)].append(sup_error(F, spec.F0, spec.M))
    return {k: np.array(v) for k, v in out.items()}

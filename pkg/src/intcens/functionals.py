"""Score equations at the mass points of a fitted distribution and smooth functionals.

For a fitted step function with masses ``p_j`` at ``W_1 < ... < W_m`` the
score ``a`` enters only through ``x_j = a_j p_j`` and the cumulative sums
``A(x) = sum_{W_j <= x} x_j = -phi(x)``.  Row ``k`` of the linear system is the
empirical score equation evaluated at ``x = W_k``::

    sum_{i: x <= U_i}      A(U_i) / (n F(U_i))
  + sum_{i: U_i < x <= V_i} (A(V_i) - A(U_i)) / (n (F(V_i) - F(U_i)))
  - sum_{i: V_i < x}       A(V_i) / (n (1 - F(V_i)))   =  kappa_F(x)

with ``kappa_F(x) = kappa(x) - sum_j kappa(W_j) p_j`` and ``0/0 = 0``.

If the fit stops below 1 the missing mass ``1 - F(max)`` is placed at the
right endpoint ``M``, beyond every observation.

Multiplying the rows by ``p_k`` and summing gives ``(N_1 / n) sum_j x_j`` where
``N_1`` counts observations with ``F(V_i) = 1``.  When ``N_1 > 0`` the system
is nonsingular in the generic case and ``sum_j a_j p_j = 0`` follows from the
centering of the right-hand side.  When ``N_1 = 0`` (exactly the case where
mass sits at ``M``) the matrix is singular with left null vector ``p``; the
solve then uses the rank-one completion ``K + p 1^T`` which enforces
``sum_j x_j = 0`` and still solves ``K x = rhs``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .data import Sample2, StepDistribution, evaluate

log = logging.getLogger(__name__)


def _safe_inverse(den: np.ndarray) -> np.ndarray:
    out = np.zeros_like(den, dtype=float)
    pos = den > 0
    out[pos] = 1.0 / den[pos]
    return out


@dataclass(frozen=True)
class ScoreSolution:
    """Solution of the empirical score equation.

    ``residual`` is the max-norm residual of the original system ``K x = rhs``.
    ``deflated`` records whether the rank-one completion was needed.
    """

    mass_points: np.ndarray
    masses: np.ndarray
    scores: np.ndarray
    residual: float
    condition: float
    deflated: bool = False
    weighted: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.weighted is None:
            object.__setattr__(self, "weighted", self.scores * self.masses)

    @property
    def centering(self) -> float:
        """``sum_j a_j p_j``."""
        return math.fsum(self.weighted)

    def cumulative(self, x) -> np.ndarray | float:
        """``A(x) = sum_{W_j <= x} a_j p_j``."""
        csum = np.concatenate(([0.0], np.cumsum(self.weighted)))
        idx = np.searchsorted(self.mass_points, x, side="right")
        out = csum[idx]
        return float(out) if np.ndim(out) == 0 else out

    def phi(self, x) -> np.ndarray | float:
        """``phi(x) = -sum_{W_j <= x} a_j p_j``."""
        return -self.cumulative(x)


def _endpoint(sample: Sample2, M) -> float:
    if M is None:
        M = sample.M
    top = float(np.max(sample.v))
    if M is None or not M > top:
        # any point beyond the data gives the same system
        M = np.nextafter(top, np.inf)
    return float(M)


def completed_masses(F: StepDistribution, sample: Sample2, M=None):
    """Mass points and masses of F, with ``1 - F(max)`` placed at the endpoint."""
    W, p = F.mass_points()
    top = float(F.values[-1]) if F.values.size else 0.0
    if top < 1.0:
        W = np.append(W, _endpoint(sample, M))
        p = np.append(p, 1.0 - top)
    return W, p


def _design(F: StepDistribution, sample: Sample2, M=None):
    W, p = completed_masses(F, sample, M)
    if W.size == 0:
        raise ValueError("fitted distribution has no mass points")
    Fu = evaluate(F, sample.u)
    Fv = evaluate(F, sample.v)
    return W, p, np.asarray(Fu, dtype=float), np.asarray(Fv, dtype=float)


def _row_blocks(x, sample, Fu, Fv):
    """Per-observation row indicators at evaluation points ``x`` (shape len(x) x n)."""
    x = np.asarray(x, dtype=float)[:, None]
    u, v = sample.u[None, :], sample.v[None, :]
    r1 = (x <= u) * _safe_inverse(Fu)[None, :]
    r2 = ((u < x) & (x <= v)) * _safe_inverse(Fv - Fu)[None, :]
    r3 = (v < x) * _safe_inverse(1.0 - Fv)[None, :]
    return r1, r2, r3


def _col_blocks(W, sample):
    """Per-observation column indicators (shape n x m)."""
    w = W[None, :]
    u, v = sample.u[:, None], sample.v[:, None]
    return (w <= u).astype(float), ((u < w) & (w <= v)).astype(float), (w <= v).astype(float)


def _operator(x, W, sample, Fu, Fv):
    r1, r2, r3 = _row_blocks(x, sample, Fu, Fv)
    c1, c2, c3 = _col_blocks(W, sample)
    return (r1 @ c1 + r2 @ c2 - r3 @ c3) / sample.n


def centered_kappa(kappa: Callable, W: np.ndarray, p: np.ndarray) -> Callable:
    """``kappa_F(x) = kappa(x) - sum_j kappa(W_j) p_j``."""
    mean = float(np.dot(np.asarray(kappa(W), dtype=float), p))
    return lambda x: np.asarray(kappa(x), dtype=float) - mean


def build_score_system(F: StepDistribution, sample: Sample2, kappa: Callable, M=None):
    """Matrix ``K`` (m x m, unknowns ``a_j p_j``) and right-hand side at the mass points.

    ``M`` locates any mass F leaves unassigned; it defaults to ``sample.M``.
    """
    W, p, Fu, Fv = _design(F, sample, M)
    K = _operator(W, W, sample, Fu, Fv)
    rhs = centered_kappa(kappa, W, p)(W)
    return K, rhs


def solve_scores(F: StepDistribution, sample: Sample2, kappa: Callable, M=None) -> ScoreSolution:
    """Solve the score system by dense LU with partial pivoting."""
    W, p, _, Fv = _design(F, sample, M)
    K, rhs = build_score_system(F, sample, kappa, M)
    m = W.size
    if m == 1:
        # a centered score on a point mass vanishes
        return ScoreSolution(W, p, np.zeros(1), float(abs(rhs[0])), 1.0, False)
    n_top = int(np.count_nonzero(Fv >= 1.0))
    deflated = n_top == 0
    A = K + np.outer(p, np.ones(m)) if deflated else K
    cond = float(np.linalg.cond(A, 1))
    if not math.isfinite(cond) or cond > 1e14:
        # nearly singular even after completion: small ridge, flagged
        log.warning("score system ill-conditioned (cond=%.3g); adding ridge 1e-12", cond)
        A = A + 1e-12 * np.eye(m)
        deflated = True
    lu = scipy.linalg.lu_factor(A, check_finite=True)
    x = scipy.linalg.lu_solve(lu, rhs)
    # one step of iterative refinement on the original system
    x = x + scipy.linalg.lu_solve(lu, rhs - K @ x)
    residual = float(np.max(np.abs(K @ x - rhs)))
    return ScoreSolution(W, p, x / p, residual, cond, deflated, x)


def kappa_extension(F: StepDistribution, sol: ScoreSolution, sample: Sample2, x) -> np.ndarray:
    """Left-hand side of the score equation at arbitrary ``x`` in ``[0, M]``.

    Equals the centered ``kappa`` at the mass points (up to the solve residual)
    and extends it in between.
    """
    W = sol.mass_points
    Fu = np.asarray(evaluate(F, sample.u), dtype=float)
    Fv = np.asarray(evaluate(F, sample.v), dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return _operator(x, W, sample, Fu, Fv) @ sol.weighted


def theta_values(F: StepDistribution, sol: ScoreSolution, sample: Sample2) -> np.ndarray:
    """``theta(U_i, V_i, d0_i, d1_i)`` for every observation (``0/0 = 0``)."""
    Fu = np.asarray(evaluate(F, sample.u), dtype=float)
    Fv = np.asarray(evaluate(F, sample.v), dtype=float)
    Au = np.asarray(sol.cumulative(sample.u), dtype=float)
    Av = np.asarray(sol.cumulative(sample.v), dtype=float)
    return (sample.d0 * Au * _safe_inverse(Fu)
            + sample.d1 * (Av - Au) * _safe_inverse(Fv - Fu)
            - sample.d2 * Av * _safe_inverse(1.0 - Fv))


def estimate_mean(F: StepDistribution, M: float) -> float:
    """``int_0^M (1 - F(x)) dx`` computed exactly for a right-continuous step function."""
    knots = np.asarray(F.knots, dtype=float)
    vals = np.asarray(F.values, dtype=float)
    inside = knots < M
    edges = np.concatenate(([0.0], np.clip(knots[inside], 0.0, M), [M]))
    levels = np.concatenate(([0.0], vals[inside]))
    # F before the first knot is 0; knots at or below 0 shift the start level
    widths = np.diff(edges)
    return float(np.dot(1.0 - levels, widths))


# -- Monte Carlo study of the mean functional ------------------------------------

INFORMATION_BOUND_TRIANGLE = 0.1198987


@dataclass(frozen=True)
class FunctionalRow:
    estimator: str
    n: int
    reps: int
    n_var: float
    mc_stderr: float


@dataclass
class FunctionalStudy:
    rows: list[FunctionalRow]
    raw: dict
    failures: dict

    def n_var(self, estimator: str) -> float:
        return next(r.n_var for r in self.rows if r.estimator == estimator)

    def to_csv(self) -> str:
        lines = ["estimator,n,reps,n_var,mc_stderr"]
        lines += [f"{r.estimator},{r.n},{r.reps},{r.n_var!r},{r.mc_stderr!r}" for r in self.rows]
        return "\n".join(lines) + "\n"

    def raw_lines(self, estimator: str) -> str:
        return "".join(f"{x!r}\n" for x in self.raw[estimator])


def _mean_replication(args):
    from .simulation import fit_named, generate, replication_rng

    model, n, seed, r, estimators = args
    spec = _model(model)
    sample = generate(spec, n, replication_rng(seed, r))
    out = {}
    for est in estimators:
        F, ok = fit_named(est, sample)
        out[est] = (estimate_mean(F, spec.M), ok)
    return out


def _model(model):
    from .asymptotics import ModelSpec, get_model

    return model if isinstance(model, ModelSpec) else get_model(model)


def functional_variance_study(model="triangle-[0,1]", n: int = 1000, reps: int = 2000,
                              seed: int = 0, estimators=("mle", "ls_full", "ls_simple"),
                              workers: int = 1) -> FunctionalStudy:
    """``n`` times the Monte Carlo variance of the plug-in mean for each estimator."""
    from .simulation import variance_with_stderr

    spec = _model(model)
    if reps < 2:
        raise ValueError("reps must be >= 2")
    tasks = [(spec.name, n, seed, r, tuple(estimators)) for r in range(reps)]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_mean_replication, tasks, chunksize=max(1, reps // (8 * workers))))
    else:
        results = [_mean_replication(t) for t in tasks]
    rows, raw, failures = [], {}, {}
    for est in estimators:
        vals = np.array([res[est][0] for res in results if res[est][1]])
        failures[est] = reps - vals.size
        if failures[est]:
            log.warning("%s: %d replications did not converge and were excluded", est, failures[est])
        var, se = variance_with_stderr(vals)
        rows.append(FunctionalRow(est, n, int(vals.size), n * var, n * se))
        raw[est] = vals
    return FunctionalStudy(rows, raw, failures)

"""Nonparametric estimators of F from current status and case-2 interval censored data.

The case-2 estimators all work with the vector ``y`` of values of F at the
merged grid of inspection times, ``0 <= y_1 <= ... <= y_m <= 1``:

* ``fit_ls_simple``: one isotonic regression (two-term criterion);
* ``fit_ls_full``: three-term criterion, iterative convex minorant algorithm
  with clipping to [0, 1] and boundary multipliers;
* ``fit_ls_full_barrier``: the same minimizer by a log-barrier interior point
  method, used as an independent cross-check;
* ``fit_mle_ic2``: the nonparametric MLE by the iterative convex minorant
  algorithm with line search.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg

from .characterization import (
    FenchelReport,
    fenchel_from_increments,
    ls_increments,
    ls_simple_increments,
    residual_parts,
)
from .data import (
    CurrentStatusObservation,
    DataError,
    Sample2,
    StepDistribution,
    grid_values,
)
from .isotonic import CusumDiagram, gcm_left_slopes, pava

log = logging.getLogger(__name__)

MLE_EPS = 1e-10
MLE_WEIGHT_FLOOR = 1e-8


class ConvergenceError(RuntimeError):
    """Raised by callers that insist on a converged fit."""


@dataclass(frozen=True)
class IcmOptions:
    tol: float = 1e-8
    max_iter: int = 500
    line_search: bool = True
    armijo: float = 1e-4

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0 < self.armijo < 1:
            raise ValueError("armijo parameter must be in (0, 1)")


@dataclass(frozen=True)
class FitResult:
    F: StepDistribution
    lambda1: float
    lambda2: float
    iterations: int
    fenchel: FenchelReport
    objective: float
    converged: bool = True
    history: list = field(default_factory=list, repr=False, compare=False)


# -- objectives ------------------------------------------------------------

def _ls_full_value(y, sample):
    r0, r1, r2 = residual_parts(y, sample)
    return float(np.dot(r0, r0) + np.dot(r1, r1) + np.dot(r2, r2))


def _ls_full_quadratic(d, sample):
    """Second-order term ``q`` in ``f(y + d) = f(y) + grad . d + q``."""
    du = d[sample.u_idx]
    dv = d[sample.v_idx]
    e = dv - du
    return float(np.dot(du, du) + np.dot(e, e) + np.dot(dv, dv))


def _ls_simple_value(y, sample):
    r0, _, r2 = residual_parts(y, sample)
    return float(np.dot(r0, r0) + np.dot(r2, r2))


def _xlogy(x, y):
    # 0 * log(0) = 0; x * log(y) = -inf for x > 0, y <= 0
    out = np.zeros(np.shape(y))
    pos = x > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        out[pos] = np.where(y[pos] > 0, np.log(np.where(y[pos] > 0, y[pos], 1.0)), -np.inf)
    return out


def _loglik_value(y, sample):
    yu = y[sample.u_idx]
    yv = y[sample.v_idx]
    total = (_xlogy(sample.d0, yu).sum() + _xlogy(sample.d1, yv - yu).sum()
             + _xlogy(sample.d2, 1.0 - yv).sum())
    return float(total)


def _log1p_ratio(weight, delta, base):
    # weight * log((base + delta) / base), evaluated without cancellation
    out = np.zeros(np.shape(base))
    pos = weight > 0
    x = delta[pos] / base[pos]
    with np.errstate(divide="ignore", invalid="ignore"):
        out[pos] = np.where(x > -1.0, np.log1p(np.maximum(x, -1.0 + 1e-300)), -np.inf)
    return out


def _loglik_change(y, d, sample):
    """``loglik(y + d) - loglik(y)`` for a feasible ``y``."""
    yu = y[sample.u_idx]
    yv = y[sample.v_idx]
    du = d[sample.u_idx]
    dv = d[sample.v_idx]
    return float(_log1p_ratio(sample.d0, du, yu).sum()
                 + _log1p_ratio(sample.d1, dv - du, yv - yu).sum()
                 + _log1p_ratio(sample.d2, -dv, 1.0 - yv).sum())


def criterion_ls_full(F: StepDistribution, sample: Sample2) -> float:
    """Sum of ``(F(u)-d0)^2 + (F(v)-F(u)-d1)^2 + (1-F(v)-d2)^2``."""
    return _ls_full_value(grid_values(F, sample), sample)


def criterion_ls_simple(F: StepDistribution, sample: Sample2) -> float:
    """Sum of ``(F(u)-d0)^2 + (F(v)-d0-d1)^2``."""
    return _ls_simple_value(grid_values(F, sample), sample)


def loglik_ic2(F: StepDistribution, sample: Sample2) -> float:
    """Case-2 log-likelihood with the convention ``0 log 0 = 0``."""
    return _loglik_value(grid_values(F, sample), sample)


# -- current status and one-step estimators --------------------------------

def fit_current_status(sample: Sequence[CurrentStatusObservation]) -> StepDistribution:
    """Nonparametric MLE (= isotonic LS fit) for current status data.

    Left slopes of the greatest convex minorant of the cusum diagram
    ``(i, sum_{j<=i} delta_j)``; tied times are merged into one diagram
    point with the pooled count.
    """
    obs = list(sample)
    if not obs:
        raise DataError("empty sample")
    t = np.array([o.t for o in obs], dtype=float)
    d = np.array([o.delta for o in obs], dtype=float)
    times, inv, counts = np.unique(t, return_inverse=True, return_counts=True)
    sums = np.bincount(inv, d, minlength=times.size)
    slopes = gcm_left_slopes(CusumDiagram.from_increments(sums, counts.astype(float)))
    return StepDistribution(times, np.clip(slopes, 0.0, 1.0))


def _simple_response(sample):
    m = sample.m
    s = (np.bincount(sample.u_idx, sample.d0, minlength=m)
         + np.bincount(sample.v_idx, sample.d0 + sample.d1, minlength=m))
    return s / sample.mult, sample.mult.astype(float)


def _ls_simple_values(sample):
    resp, w = _simple_response(sample)
    # slopes of 0/1 cusum increments are already in [0, 1]; clip only rounding
    return np.clip(pava(resp, w), 0.0, 1.0)


def fit_ls_simple(sample: Sample2) -> StepDistribution:
    """One-step LS estimator: GCM slopes of the cusum that adds ``d0`` at a u and ``d0+d1`` at a v."""
    return StepDistribution(sample.grid, _ls_simple_values(sample))


# -- full least squares: iterative convex minorant -------------------------

def fit_ls_full(sample: Sample2, opts: IcmOptions | None = None) -> FitResult:
    """Minimize the three-term LS criterion over distribution functions.

    Each iteration takes a diagonal-Newton step from the current iterate (the
    criterion's Hessian diagonal is 4 per inspection time), projects it on the
    monotone cone by PAVA, clips to [0, 1], recomputes the boundary
    multipliers and optionally backtracks on the criterion.  Iteration stops
    once both duality residuals and the sup-change of the iterate are <= tol.
    """
    opts = opts or IcmOptions()
    n = sample.n
    w = 4.0 * sample.mult
    y = _ls_simple_values(sample)
    f = _ls_full_value(y, sample)
    inc = ls_increments(y, sample)
    history = []
    converged = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        z = y + 2.0 * inc / w
        y_new = np.clip(pava(z, w), 0.0, 1.0)
        step = y_new - y
        if opts.line_search:
            slope = -2.0 * float(np.dot(inc, step))
            curv = _ls_full_quadratic(step, sample)
            alpha = 1.0
            # exact change of the quadratic criterion along the step
            while alpha * slope + alpha * alpha * curv > opts.armijo * alpha * slope and alpha > 1e-12:
                alpha *= 0.5
            y_new = y + alpha * step
        f_new = _ls_full_value(y_new, sample)
        change = float(np.max(np.abs(y_new - y)))
        y, f = y_new, f_new
        inc = ls_increments(y, sample)
        report = fenchel_from_increments(y, inc / n, opts.tol, "full")
        history.append((f, change, report.min_slack, report.equality_residual))
        if report.passed and change <= opts.tol:
            converged = True
            break
    report = fenchel_from_increments(y, inc / n, opts.tol, "full")
    if not converged:
        log.warning("fit_ls_full: no convergence in %d iterations (slack %.3g, eq %.3g)",
                    opts.max_iter, report.min_slack, report.equality_residual)
    return FitResult(StepDistribution(sample.grid, y), report.lambda1, report.lambda2,
                     it, report, f, converged, history)


# -- full least squares: log-barrier interior point ------------------------

def _ls_hessian(sample):
    m = sample.m
    H = np.zeros((m, m))
    ui, vi = sample.u_idx, sample.v_idx
    np.add.at(H, (ui, ui), 4.0)
    np.add.at(H, (vi, vi), 4.0)
    np.add.at(H, (ui, vi), -2.0)
    np.add.at(H, (vi, ui), -2.0)
    return H


def _barrier_terms(y):
    s = np.diff(np.concatenate(([0.0], y, [1.0])))
    inv = 1.0 / s
    inv2 = inv * inv
    value = -float(np.sum(np.log(s)))
    grad = -inv[:-1] + inv[1:]
    diag = inv2[:-1] + inv2[1:]
    off = -inv2[1:-1]
    return value, grad, diag, off


def _slacks_positive(y):
    return y[0] > 0 and y[-1] < 1 and np.all(np.diff(y) > 0)


@dataclass(frozen=True)
class BarrierOptions:
    mu0: float = 1.0
    shrink: float = 10.0
    mu_min: float = 1e-12
    newton_tol: float = 1e-14
    max_newton: int = 200


def fit_ls_full_barrier(sample: Sample2, opts: BarrierOptions | None = None) -> StepDistribution:
    """Three-term LS estimator by a log-barrier method (cross-check solver).

    Minimizes ``criterion + mu * barrier`` where the barrier is
    ``-log y_1 - sum log(y_{j+1} - y_j) - log(1 - y_m)``, with damped Newton
    steps from the strict interior and ``mu`` divided by 10 from 1 down to
    1e-10.
    """
    opts = opts or BarrierOptions()
    m = sample.m
    H = _ls_hessian(sample)
    diag_idx = np.arange(m)
    y = np.arange(1, m + 1) / (m + 1.0)
    mu = opts.mu0

    def objective(yy):
        b, _, _, _ = _barrier_terms(yy)
        return _ls_full_value(yy, sample) + mu * b

    while True:
        for _ in range(opts.max_newton):
            b, bg, bd, bo = _barrier_terms(y)
            g = -2.0 * ls_increments(y, sample) + mu * bg
            K = H.copy()
            K[diag_idx, diag_idx] += mu * bd
            K[diag_idx[:-1], diag_idx[1:]] += mu * bo
            K[diag_idx[1:], diag_idx[:-1]] += mu * bo
            try:
                step = -linalg.cho_solve(linalg.cho_factor(K, check_finite=False), g,
                                         check_finite=False)
            except linalg.LinAlgError:
                log.debug("barrier: Newton system not positive definite, gradient step")
                step = -g / np.diag(K)
            dec = -float(np.dot(g, step))
            if dec / 2.0 <= opts.newton_tol or not np.isfinite(dec):
                break
            t = 1.0
            while not _slacks_positive(y + t * step):
                t *= 0.5
            f0 = objective(y)
            while objective(y + t * step) > f0 - 0.25 * t * dec and t > 1e-16:
                t *= 0.5
            if t <= 1e-16:
                break
            y = y + t * step
        if mu <= opts.mu_min:
            break
        mu /= opts.shrink
    return StepDistribution(sample.grid, np.clip(y, 0.0, 1.0))


# -- nonparametric MLE ------------------------------------------------------

def _safe_ratio(num, den):
    out = np.zeros(np.shape(den))
    nz = num != 0
    out[nz] = num[nz] / den[nz]
    return out


def _mle_grad_weights(y, sample):
    m = sample.m
    yu = y[sample.u_idx]
    yv = y[sample.v_idx]
    a = _safe_ratio(sample.d0.astype(float), yu)
    b = _safe_ratio(sample.d1.astype(float), yv - yu)
    c = _safe_ratio(sample.d2.astype(float), 1.0 - yv)
    grad = (np.bincount(sample.u_idx, a - b, minlength=m)
            + np.bincount(sample.v_idx, b - c, minlength=m))
    hess = (np.bincount(sample.u_idx, a * a + b * b, minlength=m)
            + np.bincount(sample.v_idx, b * b + c * c, minlength=m))
    return grad, hess


def _to_boundary(y):
    # line-search combinations can land a few ulps off the clip values
    lo = MLE_EPS * (1.0 + 1e-6)
    return np.where(y <= lo, 0.0, np.where(y >= 1.0 - lo, 1.0, y))


def _mle_report(y, grad, n, tol):
    # iterates live in [eps, 1-eps]; treat the clip values as the boundary
    return fenchel_from_increments(_to_boundary(y), grad / n, tol, "mle")


def _snap(y, sample):
    """Replace clip values by exact 0 / 1 where the likelihood stays finite."""
    ys = _to_boundary(y)
    if np.isfinite(_loglik_value(ys, sample)):
        return ys
    return y


def fit_mle_ic2(sample: Sample2, opts: IcmOptions | None = None) -> FitResult:
    """Nonparametric MLE for case-2 data by the iterative convex minorant algorithm.

    Weights are the diagonal of the negative Hessian of the log-likelihood
    (floored at 1e-8); each isotonic step is clipped to [eps, 1 - eps] and
    followed by Armijo backtracking on the log-likelihood.  The returned
    solution has exact 0 / 1 values where the iterate sits on the clip bounds.
    """
    opts = opts or IcmOptions()
    n = sample.n
    m = sample.m
    ramp = np.arange(1, m + 1) / (m + 1.0)
    y = 0.5 * np.clip(_ls_simple_values(sample), MLE_EPS, 1 - MLE_EPS) + 0.5 * ramp
    f = _loglik_value(y, sample)
    grad, hess = _mle_grad_weights(y, sample)
    converged = False
    history = []
    it = 0
    for it in range(1, opts.max_iter + 1):
        w = np.maximum(hess, MLE_WEIGHT_FLOOR)
        y_new = np.clip(pava(y + grad / w, w), MLE_EPS, 1.0 - MLE_EPS)
        step = y_new - y
        slope = float(np.dot(grad, step))
        alpha = 1.0
        gain = _loglik_change(y, step, sample)
        if opts.line_search or not np.isfinite(gain):
            while not (gain >= opts.armijo * alpha * slope) and alpha > 1e-14:
                alpha *= 0.5
                gain = _loglik_change(y, alpha * step, sample)
            if not np.isfinite(gain):
                alpha = 0.0
        # a convex combination of monotone vectors, up to rounding
        y_new = np.maximum.accumulate(y + alpha * step)
        f_new = _loglik_value(y_new, sample)
        change = float(np.max(np.abs(y_new - y)))
        y, f = y_new, f_new
        grad, hess = _mle_grad_weights(y, sample)
        report = _mle_report(y, grad, n, opts.tol)
        history.append((f, change, report.min_slack, report.equality_residual))
        if report.passed and change <= opts.tol:
            converged = True
            break
    y = _snap(y, sample)
    f = _loglik_value(y, sample)
    grad, _ = _mle_grad_weights(y, sample)
    report = fenchel_from_increments(y, grad / n, opts.tol, "mle")
    if not converged:
        log.warning("fit_mle_ic2: no convergence in %d iterations (slack %.3g, eq %.3g)",
                    opts.max_iter, report.min_slack, report.equality_residual)
    # the likelihood needs no multipliers; the boundary terms stay in the report
    return FitResult(StepDistribution(sample.grid, y), 0.0, 0.0,
                     it, report, f, converged, history)

"""Cumulative residual processes, Lagrange multipliers and optimality audits.

All processes are evaluated on the merged observation grid of a sample and
normalized by the empirical measure (division by n).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Sample2, StepDistribution, grid_values


@dataclass(frozen=True)
class FenchelReport:
    """Residuals of the duality conditions for a fitted distribution function.

    ``min_slack`` is ``min_t (lambda1 + W(t))`` over t >= 0 (for the one-step
    estimator ``min_t W2(t)``), ``equality_residual`` is
    ``|int F dW - lambda2|`` (respectively ``|int F dW2|``).
    """

    min_slack: float
    equality_residual: float
    tol: float
    lambda1: float = 0.0
    lambda2: float = 0.0
    kind: str = "full"

    @property
    def passed(self) -> bool:
        return self.min_slack >= -self.tol and self.equality_residual <= self.tol

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "min_slack": self.min_slack,
            "equality_residual": self.equality_residual,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "tol": self.tol,
            "pass": self.passed,
        }

    def to_text(self) -> str:
        items = []
        for k, v in self.as_dict().items():
            if isinstance(v, bool):
                items.append(f'  "{k}": {"true" if v else "false"}')
            elif isinstance(v, str):
                items.append(f'  "{k}": "{v}"')
            else:
                items.append(f'  "{k}": {v!r}')
        return "{\n" + ",\n".join(items) + "\n}"


def residual_parts(y: np.ndarray, sample: Sample2):
    """Per-observation residuals ``(r0, r1, r2)`` of the three indicator fits."""
    yu = y[sample.u_idx]
    yv = y[sample.v_idx]
    r0 = sample.d0 - yu
    r1 = sample.d1 - (yv - yu)
    r2 = sample.d0 + sample.d1 - yv
    return r0, r1, r2


def ls_increments(y: np.ndarray, sample: Sample2) -> np.ndarray:
    """``n * dW_{n,F}`` at every grid point, for grid values ``y`` of F."""
    r0, r1, r2 = residual_parts(y, sample)
    m = sample.m
    return (np.bincount(sample.u_idx, r0 - r1, minlength=m)
            + np.bincount(sample.v_idx, r1 + r2, minlength=m))


def ls_simple_increments(y: np.ndarray, sample: Sample2) -> np.ndarray:
    """``n * dW2_{n,F}`` at every grid point."""
    r0, _, r2 = residual_parts(y, sample)
    m = sample.m
    return (np.bincount(sample.u_idx, r0, minlength=m)
            + np.bincount(sample.v_idx, r2, minlength=m))


def w_process(F: StepDistribution, sample: Sample2) -> np.ndarray:
    """``W_{n,F}`` at every grid time (aligned with ``sample.grid``); zero before the first."""
    y = grid_values(F, sample)
    return np.cumsum(ls_increments(y, sample)) / sample.n


def w2_process(F: StepDistribution, sample: Sample2) -> np.ndarray:
    """``W2_{n,F}`` at every grid time, the process of the one-step estimator."""
    y = grid_values(F, sample)
    return np.cumsum(ls_simple_increments(y, sample)) / sample.n


def multipliers_from_increments(y: np.ndarray, dW: np.ndarray) -> tuple[float, float]:
    # grid points where F is exactly 0 (resp. 1) carry the boundary increments
    lam1 = 0.0 - float(np.sum(dW[y == 0.0]))
    lam2 = float(np.sum(dW[y == 1.0]))
    return lam1, lam2


def lagrange_multipliers(F: StepDistribution, sample: Sample2) -> tuple[float, float]:
    """Boundary multipliers ``(lambda1, lambda2)``.

    ``lambda1`` is minus the ``dW_{n,F}`` mass on grid points with F = 0 and
    ``lambda2`` the mass on grid points with F = 1.  Each observation's u-part
    and v-part increments are attributed to the grid point they sit on, so a
    record with F(u) = 0 and F(v) = 1 feeds both multipliers.
    """
    y = grid_values(F, sample)
    dW = ls_increments(y, sample) / sample.n
    return multipliers_from_increments(y, dW)


def fenchel_from_increments(y, dW, tol, kind="full") -> FenchelReport:
    """Audit of grid values ``y`` given normalized increments ``dW``."""
    W = np.cumsum(dW)
    if kind == "simple":
        lam1 = lam2 = 0.0
        slack = min(0.0, float(W.min()))
        eq = abs(float(np.dot(y, dW)))
    else:
        lam1, lam2 = multipliers_from_increments(y, dW)
        slack = min(lam1, lam1 + float(W.min()))
        eq = abs(float(np.dot(y, dW)) - lam2)
    return FenchelReport(slack, eq, tol, lam1, lam2, kind)


def verify_fenchel(F: StepDistribution, sample: Sample2, tol: float = 1e-8) -> FenchelReport:
    """Check ``lambda1 + W(t) >= 0`` and ``int F dW = lambda2`` for the three-term criterion."""
    y = grid_values(F, sample)
    return fenchel_from_increments(y, ls_increments(y, sample) / sample.n, tol, "full")


def verify_fenchel_simple(F: StepDistribution, sample: Sample2, tol: float = 1e-10) -> FenchelReport:
    """Check ``W2(t) >= 0`` and ``int F dW2 = 0`` for the one-step criterion."""
    y = grid_values(F, sample)
    return fenchel_from_increments(y, ls_simple_increments(y, sample) / sample.n, tol, "simple")


def jump_touch_residual(F: StepDistribution, sample: Sample2) -> float:
    """Largest ``|W2|`` at the grid point just left of a jump of F.

    The one-step estimator's process touches zero there; the value is 0 up to
    rounding for the exact minimizer.  Returns 0 when F has no interior jump.
    """
    y = grid_values(F, sample)
    W = np.cumsum(ls_simple_increments(y, sample)) / sample.n
    jumps = np.flatnonzero(np.diff(y) > 0)
    if jumps.size == 0:
        return 0.0
    return float(np.max(np.abs(W[jumps])))

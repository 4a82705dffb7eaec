"""Pointwise limit theory for the two least squares estimators.

For ``t0`` in ``(0, M)`` the estimators satisfy
``n^{1/3} (F_n(t0) - F0(t0)) / sigma(t0) -> Z`` with ``Z`` the location of
the minimum of two-sided Brownian motion plus ``t^2``.  This module computes
the scale ``a(t0)``, drift ``b(t0)`` and ``sigma(t0)`` for a model given by
``F0`` and the density ``h`` of the inspection pair ``(U, V)``, a Monte Carlo
estimate of ``Var(Z)``, and the resulting limit curve of ``n^{2/3} var``.

Two scalings of ``sigma`` are available.  ``"direct"`` is
``(a f0 / b)^{1/3}`` (``(a' f0 / b')^{1/3}`` for the one-step estimator).
``"consistent"`` is the time-scale invariant version obtained from the
local cusum argument, ``(a^2 f0 / b^2)^{1/3}`` and
``(a'^2 f0 / (4 b'^2))^{1/3}``; it coincides with the classical current
status constant ``(4 F0 (1-F0) f0 / g)^{1/3}`` for the one-step estimator.
The two agree when ``a = 1`` and ``b = 1`` and otherwise differ.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

log = logging.getLogger(__name__)

VARIANTS = ("full", "simple")
SCALINGS = ("direct", "consistent")


# -- quadrature ---------------------------------------------------------------

@dataclass(frozen=True)
class Quadrature:
    """Composite Gauss-Legendre rule: ``panels`` equal panels of ``order`` nodes."""

    panels: int = 16
    order: int = 16

    def nodes(self, a: float, b: float):
        x, w = np.polynomial.legendre.leggauss(self.order)
        edges = np.linspace(a, b, self.panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        xs = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        ws = (half[:, None] * w[None, :]).ravel()
        return xs, ws

    def integrate(self, fn: Callable, a: float, b: float) -> float:
        if b <= a:
            return 0.0
        xs, ws = self.nodes(a, b)
        vals = np.asarray(fn(xs), dtype=float)
        total = float(np.dot(ws, vals))
        if not math.isfinite(total):
            raise FloatingPointError("non-finite quadrature value")
        return total

    def refined(self) -> "Quadrature":
        return Quadrature(2 * self.panels, self.order)


DEFAULT_QUADRATURE = Quadrature()


# -- models ------------------------------------------------------------------

@dataclass(frozen=True)
class ModelSpec:
    """Event time distribution ``F0`` (density ``f0``) and inspection density ``h`` on
    ``{0 <= u < v <= M}``."""

    name: str
    F0: Callable
    f0: Callable
    h: Callable
    M: float
    h1_exact: Callable | None = None
    h2_exact: Callable | None = None

    def total_mass(self, quad: Quadrature = DEFAULT_QUADRATURE) -> float:
        h1, _ = marginals(self.h, self.M, quad)
        return quad.integrate(h1, 0.0, self.M)

    def validate(self, quad: Quadrature = DEFAULT_QUADRATURE, grid_points: int = 41):
        mass = self.total_mass(quad)
        if abs(mass - 1.0) > 1e-6:
            raise ValueError(f"observation density integrates to {mass}, not 1")
        ts = np.linspace(0.0, self.M, grid_points)[1:-1]
        if np.any(np.asarray(self.f0(ts)) <= 0):
            raise ValueError("f0 must be positive on (0, M)")
        uu, vv = np.meshgrid(ts, ts, indexing="ij")
        upper = uu < vv
        if np.any(np.asarray(self.h(uu[upper], vv[upper])) <= 0):
            raise ValueError("h must be positive on the open triangle")
        return self


def _const_density(value):
    return lambda u, v: np.full(np.broadcast(np.asarray(u), np.asarray(v)).shape, float(value))


_TE = 1.0 - math.exp(-2.0)

PRESETS: dict[str, ModelSpec] = {
    "trunc-exp-[0,2]": ModelSpec(
        "trunc-exp-[0,2]",
        F0=lambda x: (1.0 - np.exp(-np.asarray(x, dtype=float))) / _TE,
        f0=lambda x: np.exp(-np.asarray(x, dtype=float)) / _TE,
        h=_const_density(0.5),
        M=2.0,
        h1_exact=lambda t: (2.0 - np.asarray(t, dtype=float)) / 2.0,
        h2_exact=lambda t: np.asarray(t, dtype=float) / 2.0,
    ),
    "uniform-[0,2]": ModelSpec(
        "uniform-[0,2]",
        F0=lambda x: np.asarray(x, dtype=float) / 2.0,
        f0=lambda x: np.full(np.shape(x), 0.5),
        h=_const_density(0.5),
        M=2.0,
        h1_exact=lambda t: (2.0 - np.asarray(t, dtype=float)) / 2.0,
        h2_exact=lambda t: np.asarray(t, dtype=float) / 2.0,
    ),
    "triangle-[0,1]": ModelSpec(
        "triangle-[0,1]",
        F0=lambda x: np.asarray(x, dtype=float),
        f0=lambda x: np.ones(np.shape(x)),
        h=_const_density(2.0),
        M=1.0,
        h1_exact=lambda t: 2.0 * (1.0 - np.asarray(t, dtype=float)),
        h2_exact=lambda t: 2.0 * np.asarray(t, dtype=float),
    ),
}

ALIASES = {
    "trunc-exp": "trunc-exp-[0,2]",
    "exp": "trunc-exp-[0,2]",
    "uniform": "uniform-[0,2]",
    "triangle": "triangle-[0,1]",
}


def get_model(name: str) -> ModelSpec:
    key = ALIASES.get(name, name)
    try:
        return PRESETS[key]
    except KeyError:
        raise KeyError(f"unknown model {name!r}; choose from {sorted(PRESETS)}") from None


def _check_t0(t0, model):
    if not 0.0 < t0 < model.M:
        raise ValueError(f"t0 must lie in (0, {model.M})")


# -- marginals, scale and drift ---------------------------------------------------

def marginals(h: Callable, M: float, quad: Quadrature = DEFAULT_QUADRATURE):
    """Marginal densities ``h1(t) = int_t^M h(t, v) dv`` and ``h2(t) = int_0^t h(u, t) du``."""

    def h1(t):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.array([quad.integrate(lambda v: h(np.full_like(v, s), v), s, M) for s in t_arr])
        return out if np.ndim(t) else float(out[0])

    def h2(t):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.array([quad.integrate(lambda u: h(u, np.full_like(u, s)), 0.0, s) for s in t_arr])
        return out if np.ndim(t) else float(out[0])

    return h1, h2


def scale_a_terms(t0: float, model: ModelSpec, quad: Quadrature = DEFAULT_QUADRATURE) -> np.ndarray:
    """The five nonnegative contributions to ``a(t0)^2``.

    Conditional variances of the u-part and v-part increments of the
    cumulative residual process (three trinomial variance terms) and the
    two covariance terms.
    """
    _check_t0(t0, model)
    F, h, M = model.F0, model.h, model.M
    Ft = float(F(t0))
    h1, h2 = marginals(h, M, quad)

    def right(v):
        q = F(v) - Ft
        return q, h(np.full_like(v, t0), v)

    def left(u):
        r = Ft - F(u)
        return r, h(u, np.full_like(u, t0))

    t1 = Ft * (1.0 - Ft) * (h1(t0) + h2(t0))
    t2 = quad.integrate(lambda v: (lambda q, hv: q * (1.0 - q) * hv)(*right(v)), t0, M)
    t3 = quad.integrate(lambda u: (lambda r, hu: r * (1.0 - r) * hu)(*left(u)), 0.0, t0)
    t4 = 2.0 * Ft * quad.integrate(lambda v: (lambda q, hv: q * hv)(*right(v)), t0, M)
    t5 = 2.0 * (1.0 - Ft) * quad.integrate(lambda u: (lambda r, hu: r * hu)(*left(u)), 0.0, t0)
    return np.array([t1, t2, t3, t4, t5])


def scale_a(t0: float, model: ModelSpec, quad: Quadrature = DEFAULT_QUADRATURE) -> float:
    """Positive square root of the limiting variance rate ``a(t0)^2`` (full LS)."""
    a2 = float(np.sum(scale_a_terms(t0, model, quad)))
    if a2 < 0:
        raise ArithmeticError(f"negative a^2 = {a2} at t0 = {t0}")
    return math.sqrt(a2)


def drift_b(t0: float, model: ModelSpec, quad: Quadrature = DEFAULT_QUADRATURE) -> float:
    """``b(t0) = h1(t0) + h2(t0)``."""
    _check_t0(t0, model)
    h1, h2 = marginals(model.h, model.M, quad)
    return h1(t0) + h2(t0)


def drift_b_simple(t0: float, model: ModelSpec, quad: Quadrature = DEFAULT_QUADRATURE) -> float:
    """``b'(t0) = (h1(t0) + h2(t0)) / 4``."""
    return drift_b(t0, model, quad) / 4.0


def scale_a_simple(t0: float, model: ModelSpec, quad: Quadrature = DEFAULT_QUADRATURE) -> float:
    """``a'(t0) = sqrt(F0 (1 - F0) (h1 + h2))`` at t0."""
    Ft = float(model.F0(t0))
    return math.sqrt(Ft * (1.0 - Ft) * drift_b(t0, model, quad))


def sigma(t0: float, model: ModelSpec, variant: str = "full", scaling: str = "direct",
          quad: Quadrature = DEFAULT_QUADRATURE) -> float:
    """Scale ``sigma(t0)`` of the Chernoff-type limit of either LS estimator."""
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    if scaling not in SCALINGS:
        raise ValueError(f"scaling must be one of {SCALINGS}")
    f0 = float(model.f0(t0))
    if variant == "full":
        a, b = scale_a(t0, model, quad), drift_b(t0, model, quad)
        core = a * f0 / b if scaling == "direct" else a * a * f0 / (b * b)
    else:
        a, b = scale_a_simple(t0, model, quad), drift_b_simple(t0, model, quad)
        core = a * f0 / b if scaling == "direct" else a * a * f0 / (4.0 * b * b)
    return core ** (1.0 / 3.0)


# -- Chernoff constant ------------------------------------------------------------

@dataclass(frozen=True)
class ChernoffEstimate:
    var: float
    var_stderr: float
    mean: float
    mean_stderr: float
    paths: int
    horizon: float
    step: float
    seed: int

    def as_dict(self):
        return dict(self.__dict__)


_BLOCK = 256
_CHUNK = 500


def _argmin_block(rng, k, count, step):
    # two-sided Brownian motion on {-k..k} * step plus t^2, built in chunks of
    # _CHUNK steps per side so that a longer horizon extends the same paths
    sd = math.sqrt(step)
    best = np.zeros(count)
    where = np.zeros(count)
    level = np.zeros((2, count))
    rows = np.arange(count)
    for start in range(0, k, _CHUNK):
        width = min(_CHUNK, k - start)
        t = (start + np.arange(1, width + 1)) * step
        for side, sign in ((0, 1.0), (1, -1.0)):
            path = level[side][:, None] + np.cumsum(rng.standard_normal((count, width)), axis=1) * sd
            level[side] = path[:, -1]
            vals = path + t * t
            idx = np.argmin(vals, axis=1)
            low = vals[rows, idx]
            better = low < best
            best = np.where(better, low, best)
            where = np.where(better, sign * t[idx], where)
    return where


def simulate_argmin(paths: int, horizon: float, step: float, seed: int) -> np.ndarray:
    """Locations of the minimum of ``W(t) + t^2`` on ``[-horizon, horizon]``.

    Paths are generated in fixed blocks of 256; block ``b`` draws from its own
    stream ``SeedSequence(seed, spawn_key=(b,))`` so the result does not depend
    on how blocks are scheduled.
    """
    if paths < 1 or horizon <= 0 or step <= 0:
        raise ValueError("need paths >= 1, horizon > 0, step > 0")
    k = int(round(horizon / step))
    out = np.empty(paths)
    for b, start in enumerate(range(0, paths, _BLOCK)):
        count = min(_BLOCK, paths - start)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(b,)))
        out[start:start + count] = _argmin_block(rng, k, count, step)
    return out


def _cache_path() -> Path:
    root = os.environ.get("INTCENS_CACHE_DIR")
    base = Path(root) if root else Path.home() / ".cache" / "intcens"
    return base / "chernoff.json"


def _cache_key(paths, horizon, step, seed):
    return f"{paths}|{horizon!r}|{step!r}|{seed}"


def chernoff_variance(paths: int = 100_000, horizon: float = 2.5, step: float = 1e-3,
                      seed: int = 0, use_cache: bool = True) -> ChernoffEstimate:
    """Monte Carlo estimate of ``Var(Z)``, ``Z = argmin_t {W(t) + t^2}``.

    Results are cached on disk per ``(paths, horizon, step, seed)`` in
    ``$INTCENS_CACHE_DIR/chernoff.json`` (default ``~/.cache/intcens``).
    """
    key = _cache_key(paths, horizon, step, seed)
    path = _cache_path()
    table = {}
    if use_cache and path.exists():
        try:
            table = json.loads(path.read_text())
        except (OSError, ValueError):
            table = {}
        if key in table:
            return ChernoffEstimate(**table[key])
    z = simulate_argmin(paths, horizon, step, seed)
    mean = math.fsum(z) / paths
    c = z - mean
    var = math.fsum(c * c) / max(paths - 1, 1)
    m4 = math.fsum(c ** 4) / paths
    est = ChernoffEstimate(
        var=var,
        var_stderr=math.sqrt(max(m4 - var * var, 0.0) / paths),
        mean=mean,
        mean_stderr=math.sqrt(var / paths),
        paths=paths, horizon=horizon, step=step, seed=seed,
    )
    if use_cache:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            table[key] = est.as_dict()
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(table, indent=1, sort_keys=True))
            tmp.replace(path)
        except OSError as exc:
            log.warning("could not write Chernoff cache %s: %s", path, exc)
    return est


# -- limit curves ---------------------------------------------------------------

@dataclass(frozen=True)
class CurveRow:
    t: float
    sigma: float
    var_limit: float


def theoretical_variance_curve(model: ModelSpec, grid, variant: str = "full",
                               var_z: float | None = None, scaling: str = "direct",
                               quad: Quadrature = DEFAULT_QUADRATURE) -> list[CurveRow]:
    """Limit of ``n^{2/3} var(F_n(t))``, i.e. ``sigma(t)^2 Var(Z)``, on a time grid."""
    if var_z is None:
        var_z = chernoff_variance().var
    rows = []
    for t in np.asarray(grid, dtype=float):
        s = sigma(float(t), model, variant, scaling, quad)
        rows.append(CurveRow(float(t), s, s * s * var_z))
    return rows


def curve_csv(rows: list[CurveRow]) -> str:
    return "t,sigma,var_limit\n" + "".join(
        f"{r.t!r},{r.sigma!r},{r.var_limit!r}\n" for r in rows)

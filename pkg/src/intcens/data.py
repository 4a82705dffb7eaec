"""Observation records, samples and step distribution functions."""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class DataError(ValueError):
    """Invalid or malformed input data."""


@dataclass(frozen=True)
class Observation2:
    """One interval censored record: inspection times ``u < v`` and indicators.

    ``d0 = [x <= u]``, ``d1 = [u < x <= v]``; ``d2 = 1 - d0 - d1``.
    """

    u: float
    v: float
    d0: int
    d1: int

    def __post_init__(self):
        _check_record(self.u, self.v, self.d0, self.d1)

    @property
    def d2(self) -> int:
        return 1 - self.d0 - self.d1


@dataclass(frozen=True)
class CurrentStatusObservation:
    t: float
    delta: int

    def __post_init__(self):
        if not np.isfinite(self.t) or self.t < 0:
            raise DataError("t must be finite and >= 0")
        if self.delta not in (0, 1):
            raise DataError("delta must be 0 or 1")


def _check_record(u, v, d0, d1):
    if not (np.isfinite(u) and np.isfinite(v)):
        raise DataError("times must be finite")
    if u < 0:
        raise DataError("u must be >= 0")
    if not u < v:
        raise DataError("u must be < v")
    if d0 not in (0, 1) or d1 not in (0, 1):
        raise DataError("indicators must be 0 or 1")
    if d0 + d1 > 1:
        raise DataError("d0 + d1 must be <= 1")


def _freeze(a):
    a = np.array(a)
    a.flags.writeable = False
    return a


class Sample2:
    """A validated case-2 sample together with its merged observation grid.

    Attributes
    ----------
    u, v : ndarray of float, shape (n,)
    d0, d1, d2 : ndarray of int, shape (n,)
    M : float
        Upper endpoint of the support (defaults to ``max(v)``).
    grid : ndarray, shape (m,)
        Distinct sorted inspection times; ``m = 2n`` minus the number of ties.
    u_idx, v_idx : ndarray of int, shape (n,)
        Grid index of each observation's ``u`` and ``v``.
    mult : ndarray of int, shape (m,)
        Number of inspection times merged into each grid point.
    """

    def __init__(self, u, v, d0, d1, M: float | None = None):
        u = np.asarray(u, dtype=float).ravel()
        v = np.asarray(v, dtype=float).ravel()
        d0 = np.asarray(d0).ravel()
        d1 = np.asarray(d1).ravel()
        n = u.size
        if n == 0:
            raise DataError("empty sample")
        if not (v.size == d0.size == d1.size == n):
            raise DataError("columns must have equal lengths")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise DataError("times must be finite")
        if np.any(u < 0):
            raise DataError("u must be >= 0")
        bad = np.flatnonzero(~(u < v))
        if bad.size:
            raise DataError(f"u must be < v (observation {bad[0]})")
        for name, d in (("d0", d0), ("d1", d1)):
            if not np.all((d == 0) | (d == 1)):
                raise DataError(f"{name} must be 0 or 1")
        d0 = d0.astype(np.int64)
        d1 = d1.astype(np.int64)
        if np.any(d0 + d1 > 1):
            raise DataError("d0 + d1 must be <= 1")
        vmax = float(v.max())
        if M is None:
            M = vmax
        elif M < vmax:
            raise DataError("M must be >= every v")

        times = np.concatenate((u, v))
        grid, inverse, mult = np.unique(times, return_inverse=True, return_counts=True)

        self.u = _freeze(u)
        self.v = _freeze(v)
        self.d0 = _freeze(d0)
        self.d1 = _freeze(d1)
        self.d2 = _freeze(1 - d0 - d1)
        self.M = float(M)
        self.grid = _freeze(grid)
        self.u_idx = _freeze(inverse[:n].astype(np.int64))
        self.v_idx = _freeze(inverse[n:].astype(np.int64))
        self.mult = _freeze(mult.astype(np.int64))

    @classmethod
    def from_observations(cls, obs: Iterable[Observation2], M: float | None = None) -> "Sample2":
        obs = list(obs)
        if not obs:
            raise DataError("empty sample")
        return cls([o.u for o in obs], [o.v for o in obs],
                   [o.d0 for o in obs], [o.d1 for o in obs], M=M)

    @classmethod
    def from_latent(cls, u, v, x, M: float | None = None) -> "Sample2":
        """Build indicators from latent event times ``x``."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        x = np.asarray(x, dtype=float)
        d0 = (x <= u).astype(np.int64)
        d1 = ((u < x) & (x <= v)).astype(np.int64)
        return cls(u, v, d0, d1, M=M)

    @property
    def n(self) -> int:
        return self.u.size

    @property
    def m(self) -> int:
        return self.grid.size

    @property
    def observations(self) -> list[Observation2]:
        return [Observation2(float(a), float(b), int(c), int(d))
                for a, b, c, d in zip(self.u, self.v, self.d0, self.d1)]

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"Sample2(n={self.n}, m={self.m}, M={self.M})"


class StepDistribution:
    """Right-continuous nondecreasing step function with values in [0, 1].

    ``F(t) = values[j]`` for the largest ``knots[j] <= t``; ``F(t) = 0`` left of
    the first knot.
    """

    def __init__(self, knots, values, *, atol: float = 1e-12):
        knots = np.asarray(knots, dtype=float).ravel()
        values = np.asarray(values, dtype=float).ravel()
        if knots.shape != values.shape:
            raise DataError("knots and values must have equal lengths")
        if knots.size and not np.all(np.diff(knots) > 0):
            raise DataError("knots must be strictly increasing")
        if np.any(np.diff(values) < -atol):
            raise DataError("values must be nondecreasing")
        if values.size and (values[0] < -atol or values[-1] > 1 + atol):
            raise DataError("values must lie in [0, 1]")
        # absorb rounding noise so that masses are exactly nonnegative
        values = np.clip(np.maximum.accumulate(values), 0.0, 1.0) if values.size else values
        self.knots = _freeze(knots)
        self.values = _freeze(values)

    def __call__(self, t):
        return evaluate(self, t)

    @property
    def masses(self) -> np.ndarray:
        """Point masses ``p_j = F_j - F_{j-1}`` at every knot (``F_0 = 0``)."""
        return np.diff(self.values, prepend=0.0)

    def mass_points(self) -> tuple[np.ndarray, np.ndarray]:
        """Locations and sizes of the strictly positive point masses."""
        p = self.masses
        keep = p > 0
        return self.knots[keep], p[keep]

    def __repr__(self):
        return f"StepDistribution(knots={self.knots.size})"


def evaluate(F: StepDistribution, t):
    """Value of ``F`` at ``t`` under the right-continuous step rule."""
    t_arr = np.asarray(t, dtype=float)
    idx = np.searchsorted(F.knots, t_arr, side="right") - 1
    vals = np.where(idx >= 0, F.values[np.maximum(idx, 0)] if F.knots.size else 0.0, 0.0)
    if np.ndim(t) == 0:
        return float(vals)
    return vals


def grid_values(F: StepDistribution, sample: Sample2) -> np.ndarray:
    """``F`` evaluated at every grid point of ``sample``."""
    if F.knots.size == sample.m and np.array_equal(F.knots, sample.grid):
        return np.array(F.values)
    return np.asarray(evaluate(F, sample.grid), dtype=float)


# -- CSV ------------------------------------------------------------------

def format_float(x) -> str:
    """Canonical text form: shortest repr that round-trips."""
    return repr(float(x))


def _is_header(row: Sequence[str]) -> bool:
    try:
        [float(c) for c in row]
    except ValueError:
        return True
    return False


def _parse_indicator(text: str, line: int, name: str) -> int:
    try:
        val = float(text)
    except ValueError:
        raise DataError(f"row {line}: cannot parse {name} {text!r}") from None
    if val not in (0.0, 1.0):
        raise DataError(f"row {line}: indicator {name} must be 0 or 1")
    return int(val)


def _read_rows(path: str | os.PathLike):
    with open(path, newline="", encoding="utf-8") as fh:
        text = fh.read()
    rows = [(i + 1, [c.strip() for c in row]) for i, row in enumerate(csv.reader(io.StringIO(text)))]
    rows = [(i, r) for i, r in rows if r and any(r)]
    if rows and _is_header(rows[0][1]):
        rows = rows[1:]
    return rows


def ingest_csv(path: str | os.PathLike, M: float | None = None) -> Sample2:
    """Read a case-2 sample from CSV.

    Accepts 4-column rows ``u,v,d0,d1`` or 3-column rows ``u,v,x`` with ``x``
    a latent event time.  A header line is optional.
    """
    rows = _read_rows(path)
    if not rows:
        raise DataError("empty sample")
    ncol = len(rows[0][1])
    if ncol not in (3, 4):
        raise DataError(f"row {rows[0][0]}: expected 3 or 4 columns, got {ncol}")
    u, v, d0, d1 = [], [], [], []
    for line, row in rows:
        if len(row) != ncol:
            raise DataError(f"row {line}: expected {ncol} columns, got {len(row)}")
        try:
            a, b = float(row[0]), float(row[1])
        except ValueError:
            raise DataError(f"row {line}: cannot parse times {row[:2]}") from None
        if ncol == 4:
            c = _parse_indicator(row[2], line, "d0")
            d = _parse_indicator(row[3], line, "d1")
        else:
            try:
                x = float(row[2])
            except ValueError:
                raise DataError(f"row {line}: cannot parse x {row[2]!r}") from None
            c, d = int(x <= a), int(a < x <= b)
        try:
            _check_record(a, b, c, d)
        except DataError as exc:
            raise DataError(f"row {line}: {exc}") from None
        u.append(a)
        v.append(b)
        d0.append(c)
        d1.append(d)
    return Sample2(u, v, d0, d1, M=M)


def write_csv(sample: Sample2, path_or_buf, header: bool = False):
    """Write the 4-column form ``u,v,d0,d1``."""
    lines = ["u,v,d0,d1"] if header else []
    lines += [f"{format_float(a)},{format_float(b)},{int(c)},{int(d)}"
              for a, b, c, d in zip(sample.u, sample.v, sample.d0, sample.d1)]
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_buf, "write"):
        path_or_buf.write(text)
    else:
        with open(path_or_buf, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def ingest_current_status_csv(path: str | os.PathLike) -> list[CurrentStatusObservation]:
    """Read 2-column rows ``t,delta``."""
    rows = _read_rows(path)
    if not rows:
        raise DataError("empty sample")
    out = []
    for line, row in rows:
        if len(row) != 2:
            raise DataError(f"row {line}: expected 2 columns, got {len(row)}")
        try:
            t = float(row[0])
        except ValueError:
            raise DataError(f"row {line}: cannot parse t {row[0]!r}") from None
        out.append(CurrentStatusObservation(t, _parse_indicator(row[1], line, "delta")))
    return out


def read_step_csv(path: str | os.PathLike) -> StepDistribution:
    """Read a fitted distribution written as ``t,F`` rows."""
    rows = _read_rows(path)
    if not rows:
        raise DataError("empty distribution file")
    try:
        t = [float(r[0]) for _, r in rows]
        F = [float(r[1]) for _, r in rows]
    except (ValueError, IndexError):
        raise DataError("distribution file must have columns t,F") from None
    return StepDistribution(t, F, atol=1e-9)


def write_step_csv(F: StepDistribution, path_or_buf):
    text = "t,F\n" + "".join(f"{format_float(t)},{format_float(y)}\n"
                             for t, y in zip(F.knots, F.values))
    if hasattr(path_or_buf, "write"):
        path_or_buf.write(text)
    else:
        with open(path_or_buf, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def embed_current_status(times, deltas):
    """Write current status data ``(t, delta)`` as case-2 records.

    ``delta = 1`` becomes ``(t, hi, 1, 0)`` and ``delta = 0`` becomes
    ``(lo, t, 0, 0)`` with ``lo`` below and ``hi`` above every ``t``.  The
    case-2 log-likelihood of the embedded sample equals the current status
    log-likelihood; the auxiliary times ``lo`` and ``hi`` carry no information.

    Returns the sample and the grid index of every original ``t``.
    """
    t = np.asarray(times, dtype=float)
    d = np.asarray(deltas, dtype=np.int64)
    if t.size == 0:
        raise DataError("empty sample")
    if np.any(t <= 0):
        raise DataError("embedding needs strictly positive times")
    lo, hi = 0.0, float(t.max()) + 1.0
    u = np.where(d == 1, t, lo)
    v = np.where(d == 1, hi, t)
    sample = Sample2(u, v, d, np.zeros_like(d))
    idx = np.where(d == 1, sample.u_idx, sample.v_idx)
    return sample, idx

import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from intcens.data import (
    CurrentStatusObservation,
    DataError,
    Observation2,
    Sample2,
    StepDistribution,
    embed_current_status,
    evaluate,
    grid_values,
    ingest_csv,
    ingest_current_status_csv,
    read_step_csv,
    write_csv,
    write_step_csv,
)


def _csv(tmp_path, text, name="s.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_four_column_row(tmp_path):
    s = ingest_csv(_csv(tmp_path, "1.0,2.0,1,0\n"))
    assert s.observations == [Observation2(1.0, 2.0, 1, 0)]


def test_three_column_row_builds_indicators(tmp_path):
    s = ingest_csv(_csv(tmp_path, "1.0,2.0,1.5\n"))
    assert (s.d0[0], s.d1[0], s.d2[0]) == (0, 1, 0)


def test_header_is_optional(tmp_path):
    s = ingest_csv(_csv(tmp_path, "u,v,d0,d1\n0.5,1.5,0,0\n"))
    assert s.n == 1 and s.d2[0] == 1


@pytest.mark.parametrize("text, msg", [
    ("2.0,1.0,0,0\n", "row 1: u must be < v"),
    ("1.0,2.0,2,0\n", "row 1: indicator d0 must be 0 or 1"),
    ("1.0,2.0,1,1\n", "row 1"),
    ("1,2,0,0\n1,x,0,0\n", "row 2: cannot parse"),
    ("1,2,0,0\n1,2,0\n", "row 2: expected 4 columns"),
    ("1,2\n", "expected 3 or 4 columns"),
    ("", "empty sample"),
])
def test_malformed_rows(tmp_path, text, msg):
    with pytest.raises(DataError, match=msg):
        ingest_csv(_csv(tmp_path, text))


def test_record_validation():
    with pytest.raises(DataError, match="u must be < v"):
        Observation2(2.0, 1.0, 0, 0)
    with pytest.raises(DataError):
        CurrentStatusObservation(-1.0, 1)
    with pytest.raises(DataError):
        CurrentStatusObservation(1.0, 3)
    assert Observation2(0.0, 1.0, 0, 0).d2 == 1


def test_csv_round_trip(tmp_path, rng):
    u = rng.uniform(0, 1, 30)
    s = Sample2(u, u + rng.uniform(0.01, 1, 30), rng.integers(0, 2, 30), np.zeros(30, int))
    buf = io.StringIO()
    write_csv(s, buf)
    p = _csv(tmp_path, buf.getvalue())
    buf2 = io.StringIO()
    write_csv(ingest_csv(p), buf2)
    assert buf2.getvalue() == buf.getvalue()


def test_grid_merges_ties():
    s = Sample2([1.0, 1.0, 2.0], [2.0, 3.0, 3.0], [0, 1, 0], [1, 0, 0])
    np.testing.assert_array_equal(s.grid, [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(s.mult, [2, 2, 2])
    assert s.m == 2 * s.n - 3
    np.testing.assert_array_equal(s.grid[s.u_idx], s.u)
    np.testing.assert_array_equal(s.grid[s.v_idx], s.v)


def test_sample_is_immutable():
    s = Sample2([1.0], [2.0], [0], [1])
    with pytest.raises(ValueError):
        s.u[0] = 0.5
    assert s.M == 2.0
    with pytest.raises(DataError, match="M must be"):
        Sample2([1.0], [2.0], [0], [1], M=1.5)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 8), st.integers(1, 4)), min_size=1, max_size=20))
def test_grid_length_is_2n_minus_ties(pairs):
    u = np.array([a for a, _ in pairs], float)
    v = u + np.array([b for _, b in pairs], float)
    s = Sample2(u, v, np.zeros(len(u), int), np.zeros(len(u), int))
    times = np.concatenate((u, v))
    assert s.m == 2 * s.n - (times.size - np.unique(times).size)
    assert np.all(np.diff(s.grid) > 0)
    assert s.mult.sum() == 2 * s.n


@pytest.mark.parametrize("t, expected", [(0.4, 0.0), (0.5, 1.0), (2.0, 1.0)])
def test_evaluate_examples(t, expected):
    F = StepDistribution([0.5], [1.0])
    assert evaluate(F, t) == expected


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=10),
       st.floats(-1, 12), st.floats(-1, 12))
def test_evaluate_is_monotone(vals, s, t):
    F = StepDistribution(np.arange(len(vals), dtype=float), np.sort(vals))
    lo, hi = min(s, t), max(s, t)
    assert evaluate(F, lo) <= evaluate(F, hi)


def test_step_distribution_validation():
    with pytest.raises(DataError, match="strictly increasing"):
        StepDistribution([1.0, 1.0], [0.2, 0.3])
    with pytest.raises(DataError, match="nondecreasing"):
        StepDistribution([1.0, 2.0], [0.5, 0.3])
    with pytest.raises(DataError, match=r"\[0, 1\]"):
        StepDistribution([1.0], [1.5])
    F = StepDistribution([1.0, 2.0, 3.0], [0.25, 0.25, 0.75])
    np.testing.assert_allclose(F.masses, [0.25, 0.0, 0.5])
    w, p = F.mass_points()
    np.testing.assert_array_equal(w, [1.0, 3.0])
    assert p.sum() <= 1.0


def test_grid_values_off_grid():
    s = Sample2([1.0], [2.0], [0], [1])
    F = StepDistribution([1.5], [0.7])
    np.testing.assert_array_equal(grid_values(F, s), [0.0, 0.7])


def test_step_csv_round_trip(tmp_path):
    F = StepDistribution([0.1, 0.7, 1.3], [0.0, 1 / 3, 1.0])
    p = tmp_path / "f.csv"
    write_step_csv(F, p)
    G = read_step_csv(p)
    np.testing.assert_array_equal(G.knots, F.knots)
    np.testing.assert_array_equal(G.values, F.values)


def test_current_status_csv(tmp_path):
    obs = ingest_current_status_csv(_csv(tmp_path, "t,delta\n1.0,1\n2.0,0\n"))
    assert obs == [CurrentStatusObservation(1.0, 1), CurrentStatusObservation(2.0, 0)]
    with pytest.raises(DataError, match="row 1"):
        ingest_current_status_csv(_csv(tmp_path, "1.0,1,3\n", "bad.csv"))


def test_embedding_places_original_times():
    sample, idx = embed_current_status([0.5, 1.0, 2.0], [1, 0, 1])
    np.testing.assert_array_equal(sample.grid[idx], [0.5, 1.0, 2.0])
    assert sample.n == 3 and np.all(sample.d1 == 0)
    with pytest.raises(DataError):
        embed_current_status([0.0], [1])

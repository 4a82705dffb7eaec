import math

import numpy as np
import pytest

from intcens.asymptotics import (
    DEFAULT_QUADRATURE,
    PRESETS,
    ModelSpec,
    Quadrature,
    chernoff_variance,
    curve_csv,
    drift_b,
    drift_b_simple,
    get_model,
    marginals,
    scale_a,
    scale_a_simple,
    scale_a_terms,
    sigma,
    simulate_argmin,
    theoretical_variance_curve,
)

UNIFORM = get_model("uniform-[0,2]")
TGRID = np.round(np.arange(1, 20) * 0.1, 10)


def grid_for(model):
    return np.linspace(0, model.M, 21)[1:-1]


@pytest.mark.parametrize("name", list(PRESETS))
def test_marginals_match_closed_forms(name):
    model = PRESETS[name]
    h1, h2 = marginals(model.h, model.M)
    t = grid_for(model)
    np.testing.assert_allclose(h1(t), model.h1_exact(t), atol=1e-8)
    np.testing.assert_allclose(h2(t), model.h2_exact(t), atol=1e-8)


def test_marginal_examples():
    h1, h2 = marginals(UNIFORM.h, 2.0)
    assert h1(0.5) == pytest.approx(0.75, abs=1e-12)
    assert h2(0.5) == pytest.approx(0.25, abs=1e-12)
    tri = get_model("triangle-[0,1]")
    assert marginals(tri.h, 1.0)[0](0.25) == pytest.approx(1.5, abs=1e-12)


def test_quadrature_rejects_nonfinite():
    with pytest.raises(FloatingPointError):
        Quadrature().integrate(lambda x: np.full_like(x, np.nan), 0.0, 1.0)


def test_scale_a_uniform_hand_values():
    np.testing.assert_allclose(scale_a_terms(1.0, UNIFORM), [0.25, 1 / 12, 1 / 12, 0.125, 0.125], atol=1e-14)
    assert scale_a(1.0, UNIFORM) ** 2 == pytest.approx(2 / 3, abs=1e-13)
    np.testing.assert_allclose(scale_a_terms(0.5, UNIFORM),
                               [0.1875, 0.140625, 0.0260416666666667, 0.140625, 0.046875], atol=1e-13)


@pytest.mark.parametrize("name", list(PRESETS))
def test_scale_a_terms_nonnegative_and_lower_bound(name):
    model = PRESETS[name]
    for t in grid_for(model):
        terms = scale_a_terms(t, model)
        assert np.all(terms >= 0)
        F = float(model.F0(t))
        assert scale_a(t, model) ** 2 >= F * (1 - F) * drift_b(t, model) - 1e-15


def test_scale_a_symmetry():
    for t in (0.2, 0.7, 1.3):
        assert scale_a(t, UNIFORM) == pytest.approx(scale_a(2 - t, UNIFORM), abs=1e-13)


@pytest.mark.parametrize("name", list(PRESETS))
def test_quadrature_refinement(name):
    model = PRESETS[name]
    fine = DEFAULT_QUADRATURE.refined()
    for t in grid_for(model):
        assert abs(scale_a(t, model) - scale_a(t, model, fine)) < 1e-6


@pytest.mark.parametrize("name", ["trunc-exp-[0,2]", "uniform-[0,2]"])
def test_drift_example1(name):
    model = get_model(name)
    for t in (0.1, 1.0, 1.9):
        assert drift_b(t, model) == pytest.approx(1.0, abs=1e-13)
        assert drift_b_simple(t, model) == pytest.approx(0.25, abs=1e-13)


def test_scale_a_simple_example():
    assert scale_a_simple(1.0, UNIFORM) == pytest.approx(0.5, abs=1e-13)


def test_sigma_examples():
    assert sigma(1.0, UNIFORM) == pytest.approx((math.sqrt(2 / 3) * 0.5) ** (1 / 3), abs=1e-12)
    assert sigma(1.0, UNIFORM) == pytest.approx(0.7418, abs=5e-5)
    assert sigma(1.0, UNIFORM, "simple") == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("name", ["trunc-exp-[0,2]", "uniform-[0,2]"])
def test_simple_sigma_dominates(name):
    model = get_model(name)
    for t in TGRID:
        assert sigma(t, model, "simple") >= sigma(t, model, "full")


def test_consistent_scaling_matches_current_status_constant():
    # one-step estimator: (4 F(1-F) f0 / g)^(1/3) with g = h1 + h2
    for t in (0.3, 1.0, 1.6):
        F = t / 2
        expected = (4 * F * (1 - F) * 0.5 / 1.0) ** (1 / 3)
        assert sigma(t, UNIFORM, "simple", "consistent") == pytest.approx(expected, rel=1e-12)
    a = scale_a(1.0, UNIFORM)
    assert sigma(1.0, UNIFORM, "full", "consistent") == pytest.approx((a * a * 0.5) ** (1 / 3), rel=1e-12)


def test_consistent_scaling_is_time_scale_invariant():
    # the estimators only use the ordering of times, so F_n(c t) on the rescaled
    # model has the law of F_n(t) on the original one and sigma must not change
    c = 3.0
    slow = ModelSpec("slow", F0=lambda x: np.asarray(x) / (2 * c), f0=lambda x: np.full(np.shape(x), 0.5 / c),
                     h=lambda u, v: np.full(np.broadcast(np.asarray(u), np.asarray(v)).shape, 0.5 / c ** 2),
                     M=2 * c).validate()
    for variant in ("full", "simple"):
        ratio = sigma(1.0 * c, slow, variant, "consistent") / sigma(1.0, UNIFORM, variant, "consistent")
        assert ratio == pytest.approx(1.0, rel=1e-10)
        direct = sigma(1.0 * c, slow, variant, "direct") / sigma(1.0, UNIFORM, variant, "direct")
        # a ~ c^(-1/2), f0 ~ 1/c, b ~ 1/c, so (a f0 / b)^(1/3) ~ c^(-1/6)
        assert direct == pytest.approx(c ** (-1 / 6), rel=1e-10)


def test_invalid_arguments():
    with pytest.raises(ValueError):
        scale_a(0.0, UNIFORM)
    with pytest.raises(ValueError):
        sigma(1.0, UNIFORM, "weird")
    with pytest.raises(ValueError):
        sigma(1.0, UNIFORM, scaling="weird")
    with pytest.raises(KeyError):
        get_model("nope")


def test_model_validation():
    bad = ModelSpec("bad", F0=UNIFORM.F0, f0=UNIFORM.f0, h=lambda u, v: np.ones(np.shape(u)), M=2.0)
    with pytest.raises(ValueError, match="integrates"):
        bad.validate()
    for model in PRESETS.values():
        assert model.validate().total_mass() == pytest.approx(1.0, abs=1e-12)


def test_argmin_scaling_oracle():
    # argmin of W(t) + c t^2 equals c^(-2/3) Z in law; on a rescaled grid this is exact pathwise
    z = simulate_argmin(4000, 2.0, 2e-3, seed=5)
    assert np.var(z) == pytest.approx(0.2636, rel=0.1)


def test_chernoff_mean_zero():
    est = chernoff_variance(paths=20_000, seed=3, use_cache=False)
    assert abs(est.mean) <= 3 * est.mean_stderr
    assert est.var > 0 and est.var_stderr > 0


def test_chernoff_is_deterministic_and_cached(monkeypatch, tmp_path):
    monkeypatch.setenv("INTCENS_CACHE_DIR", str(tmp_path))
    a = chernoff_variance(paths=3000, seed=11)
    assert (tmp_path / "chernoff.json").exists()
    b = chernoff_variance(paths=3000, seed=11)
    c = chernoff_variance(paths=3000, seed=11, use_cache=False)
    assert a == b == c


def test_chernoff_block_layout_is_path_count_invariant():
    z1 = simulate_argmin(300, 1.0, 1e-2, seed=2)
    z2 = simulate_argmin(700, 1.0, 1e-2, seed=2)
    np.testing.assert_array_equal(z1[:256], z2[:256])


@pytest.mark.slow
def test_chernoff_seed_stability_and_truncation():
    a = chernoff_variance(seed=0)
    b = chernoff_variance(seed=1)
    assert abs(a.var - b.var) <= 3 * math.hypot(a.var_stderr, b.var_stderr)
    assert round(a.var, 2) == round(b.var, 2)
    wide = chernoff_variance(horizon=5.0, seed=0)
    assert abs(wide.var - a.var) < a.var_stderr


def test_variance_curve():
    rows = theoretical_variance_curve(UNIFORM, TGRID, "full", var_z=0.25)
    mid = rows[9]
    assert mid.t == 1.0 and mid.var_limit == pytest.approx(sigma(1.0, UNIFORM) ** 2 * 0.25)
    for r, s in zip(rows, rows[::-1]):
        assert r.var_limit == pytest.approx(s.var_limit, rel=1e-12)
    simple = theoretical_variance_curve(UNIFORM, TGRID, "simple", var_z=0.25)
    assert all(s.var_limit >= f.var_limit for s, f in zip(simple, rows))
    text = curve_csv(rows)
    assert text.splitlines()[0] == "t,sigma,var_limit" and len(text.splitlines()) == 20

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from bregsmooth import (
    DESIGNS,
    Dataset,
    SelectorConfig,
    SimDesign,
    VCDataset,
    ase,
    boxplot_stats,
    generate,
    replicate,
    rng_for,
    typical_indices,
)

# truth functions typed in independently of the library table
_BUMP = lambda x: math.exp(-(4 * x - 1) ** 2) + math.exp(-(4 * x - 3) ** 2)
UNI_TRUTH = {
    "uni_poisson_1": lambda x: 3.5 * _BUMP(x) - 1.5,
    "uni_poisson_2": lambda x: math.sin(2 * (4 * x - 2)) + 1.0,
    "uni_poisson_3": lambda x: 2 - 0.5 * (4 * x - 2) ** 2,
    "uni_bernoulli_1": lambda x: 7 * _BUMP(x) - 5.5,
    "uni_bernoulli_2": lambda x: 2.5 * math.sin(2 * math.pi * x),
    "uni_bernoulli_3": lambda x: 2 - (4 * x - 2) ** 2,
}
VC_TRUTH = {
    "vc_poisson_1": [lambda u: 5.5 + 0.1 * math.exp(2 * u - 1), lambda u: 0.8 * u * (1 - u)],
    "vc_poisson_2": [lambda u: 5.5 + 0.1 * math.exp(2 * u - 1), lambda u: 0.8 * u * (1 - u),
                     lambda u: 0.2 * math.sin(2 * math.pi * u) ** 2],
    "vc_bernoulli_1": [lambda u: 1.3 * (math.exp(2 * u - 1) - 1.5), lambda u: 1.2 * (8 * u * (1 - u) - 1)],
    "vc_bernoulli_2": [lambda u: math.exp(2 * u - 1) - 1.5, lambda u: 0.8 * (8 * u * (1 - u) - 1),
                       lambda u: 0.9 * (2 * math.sin(math.pi * u) - 1)],
}
POINTS = np.linspace(0, 1, 13)


@pytest.mark.parametrize("name", sorted(UNI_TRUTH))
def test_univariate_truth_matches_table(name):
    ref = [UNI_TRUTH[name](x) for x in POINTS]
    assert np.allclose(DESIGNS[name].theta(POINTS), ref, rtol=0, atol=1e-13)


@pytest.mark.parametrize("name", sorted(UNI_TRUTH))
def test_second_derivative_by_differences(name):
    f, h = UNI_TRUTH[name], 1e-3
    x = np.linspace(0.05, 0.95, 9)
    fd = [(-f(t + 2 * h) + 16 * f(t + h) - 30 * f(t) + 16 * f(t - h) - f(t - 2 * h)) / (12 * h * h) for t in x]
    assert np.allclose(DESIGNS[name].theta2(x), fd, rtol=1e-6, atol=1e-5)


@pytest.mark.parametrize("name", sorted(VC_TRUTH))
def test_coefficients_match_table(name):
    ref = np.array([[f(u) for f in VC_TRUTH[name]] for u in POINTS])
    assert np.allclose(DESIGNS[name].coef_values(POINTS), ref, rtol=0, atol=1e-13)
    assert DESIGNS[name].d == len(VC_TRUTH[name])


def test_grid_floor_per_design():
    assert DESIGNS["uni_poisson_1"].grid_spec().h_min_factor == 3.0
    assert DESIGNS["uni_bernoulli_1"].grid_spec().h_min_factor == 5.0
    for name in ("uni_bernoulli_2", "uni_bernoulli_3", "vc_bernoulli_1", "vc_bernoulli_2"):
        assert DESIGNS[name].grid_spec().lo == 0.1


def test_sim_design_validation():
    with pytest.raises(ValueError):
        SimDesign("uni_gamma_1")
    with pytest.raises(ValueError):
        SimDesign("uni_poisson_1", n=49)
    with pytest.raises(ValueError):
        SimDesign("uni_poisson_1", seed=-1)
    assert SimDesign("uni_poisson_1").n == 400


def test_rng_streams():
    a, b = rng_for(3).random(5), rng_for(3).random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, rng_for(4).random(5))
    assert isinstance(rng_for(0).bit_generator, np.random.Philox)


@pytest.mark.parametrize("name", sorted(DESIGNS))
def test_generate_is_deterministic_and_sorted(name):
    d1, d2 = generate(SimDesign(name, 120, 11)), generate(SimDesign(name, 120, 11))
    assert d1.y.tobytes() == d2.y.tobytes()
    x = d1.u if isinstance(d1, VCDataset) else d1.x
    assert np.all(np.diff(x) >= 0) and x[0] >= 0 and x[-1] <= 1
    assert ase(d1.theta_true, d1) == 0.0
    assert set(np.unique(d1.y)) <= ({0.0, 1.0} if DESIGNS[name].family == "bernoulli" else set(range(10**6)))


def test_generate_returns_truth_on_canonical_scale():
    d = generate(SimDesign("uni_poisson_2", 200, 4))
    assert isinstance(d, Dataset)
    assert np.allclose(d.theta_true, [UNI_TRUTH["uni_poisson_2"](x) for x in d.x], atol=1e-13)
    vc = generate(SimDesign("vc_bernoulli_2", 200, 4))
    A = np.array([[f(u) for f in VC_TRUTH["vc_bernoulli_2"]] for u in vc.u])
    assert np.allclose(vc.theta_true, np.sum(vc.X * A, axis=1), atol=1e-13)
    assert np.all(vc.X[:, 0] == 1.0)


def test_bernoulli_marginal_mean():
    d = generate(SimDesign("uni_bernoulli_1", 100_000, 2))
    ref = quad(lambda x: 1 / (1 + math.exp(-UNI_TRUTH["uni_bernoulli_1"](x))), 0, 1, epsabs=1e-12)[0]
    se = math.sqrt(ref * (1 - ref) / d.n)
    assert abs(d.y.mean() - ref) < 3 * se


def test_poisson_marginal_mean():
    d = generate(SimDesign("uni_poisson_3", 100_000, 2))
    f = lambda x: math.exp(UNI_TRUTH["uni_poisson_3"](x))
    ref = quad(f, 0, 1, epsabs=1e-12)[0]
    var = quad(lambda x: f(x) + f(x) ** 2, 0, 1)[0] - ref**2
    assert abs(d.y.mean() - ref) < 3 * math.sqrt(var / d.n)


def test_covariate_laws():
    X = generate(SimDesign("vc_poisson_2", 10_000, 1)).X
    assert np.corrcoef(X[:, 1], X[:, 2])[0, 1] == pytest.approx(1 / math.sqrt(2), abs=0.05)
    assert np.std(X[:, 1]) == pytest.approx(1, abs=0.05) and np.std(X[:, 2]) == pytest.approx(1, abs=0.05)
    Z = generate(SimDesign("vc_bernoulli_2", 10_000, 1)).X
    assert abs(np.corrcoef(Z[:, 1], Z[:, 2])[0, 1]) < 0.05


def test_ase_basics():
    t = np.linspace(-1, 1, 9)
    assert ase(t, t) == 0
    assert ase(t + 1, t) == pytest.approx(1.0)
    err = np.sin(np.arange(9.0))
    assert ase(t + 2 * err, t) == pytest.approx(4 * ase(t + err, t))
    with pytest.raises(ValueError):
        ase(t[:-1], t)


def test_typical_indices_rule():
    v = [5.0, 1.0, 3.0, 2.0, 4.0]
    # sorted order 1,3,2,4,0 ; ranks round(q*(5-1)) = 1, 2, 3
    assert typical_indices(v) == {25: 3, 50: 2, 75: 4}
    assert typical_indices([0.7]) == {25: 0, 50: 0, 75: 0}
    assert typical_indices([1.0, 1.0, 1.0]) == {25: 0, 50: 1, 75: 2}
    assert typical_indices([]) == {}


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=40))
def test_boxplot_stats_properties(values):
    s = boxplot_stats(values)
    # whiskers end at data points, which may sit inside interpolated quartiles
    assert s["min"] <= s["whisker_low"] <= s["whisker_high"] <= s["max"]
    assert s["min"] <= s["q1"] <= s["median"] <= s["q3"] <= s["max"]
    iqr = s["q3"] - s["q1"]
    outside = [v for v in values if v < s["q1"] - 1.5 * iqr or v > s["q3"] + 1.5 * iqr]
    assert len(outside) == s["n_outliers"]
    assert s["median"] == pytest.approx(float(np.median(values)))
    assert 0 <= s["n_outliers"] < s["n"] == len(values)


def test_boxplot_outliers():
    s = boxplot_stats([1, 2, 3, 4, 100])
    assert s["n_outliers"] == 1 and s["whisker_high"] == 4 and s["max"] == 100


def test_replicate_bookkeeping():
    sel = SelectorConfig(npts=10)
    s = replicate(SimDesign("uni_poisson_3", 100, 20), 4, sel, threads=1)
    assert [row["seed"] for row in s.per_rep] == [20, 21, 22, 23]
    assert s.n_failed == 0 and s.criterion == "ecv"
    assert len(s.relative_errors["ampec"]) == s.reps - s.n_failed
    for row, r in zip(s.per_rep, s.relative_errors["ampec"]):
        assert r == pytest.approx((row["h"] - s.h_ampec) / s.h_ampec)
    assert s.boxplot["h"]["n"] == 4 and set(s.typical_indices) == {25, 50, 75}
    # each replication is reproducible on its own
    one = replicate(SimDesign("uni_poisson_3", 100, 22), 1, sel)
    assert one.per_rep[0]["h"] == s.per_rep[2]["h"] and one.per_rep[0]["ase"] == s.per_rep[2]["ase"]
    assert one.typical_indices == {25: 0, 50: 0, 75: 0}


def test_replicate_typical_fits():
    s = replicate(SimDesign("uni_poisson_2", 100, 3), 3, SelectorConfig(npts=8), curve_points=21)
    tf = s.typical_fits
    assert tf["grid"].shape == (21,) and np.allclose(tf["truth"], DESIGNS["uni_poisson_2"].theta(tf["grid"]))
    for q in (25, 50, 75):
        assert tf[q].shape == (21,) and np.all(np.isfinite(tf[q]))
    ases = [row["ase"] for row in s.per_rep]
    assert ases[s.typical_indices[50]] == sorted(ases)[1]


def test_replicate_bernoulli_defaults_to_hybrid():
    s = replicate(SimDesign("uni_bernoulli_2", 100, 1), 2, SelectorConfig(npts=8))
    assert s.criterion == "hybrid_ecv"
    assert all(row["h"] >= 0.1 - 1e-12 for row in s.per_rep if not row["failed"])


def test_replicate_varying_coefficient():
    s = replicate(SimDesign("vc_poisson_1", 100, 2), 2, SelectorConfig(npts=8), curve_points=11)
    assert s.h_ampec is None and s.relative_errors == {}
    assert s.typical_fits["truth"].shape == (11, 2) and s.typical_fits[50].shape == (11, 2)


def test_replicate_is_thread_independent():
    sel = SelectorConfig(npts=8)
    a = replicate(SimDesign("uni_bernoulli_3", 100, 7), 4, sel, threads=1)
    b = replicate(SimDesign("uni_bernoulli_3", 100, 7), 4, sel, threads=3)
    assert a.per_rep == b.per_rep and a.typical_indices == b.typical_indices
    for q in (25, 50, 75):
        assert a.typical_fits[q].tobytes() == b.typical_fits[q].tobytes()


def test_replicate_rejects_zero_reps():
    with pytest.raises(ValueError):
        replicate(SimDesign("uni_poisson_1", 100), 0)

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rankjoint import (
    AttributeSchema,
    EfficiencyReport,
    Mode,
    SimDesign,
    attribute_importance,
    empirical_se_comparison,
    estimate_amce,
    fcc_sample_multiplier,
    position_effect_check,
    precision_per_time,
    relative_precision_per_time,
    simulate_dataset,
    theoretical_se_reduction,
    theoretical_variance_ratio,
)
from rankjoint.efficiency import variance_ratio_fraction
from rankjoint.estimator import INTERCEPT, AmceFit


def fake_fit(se, beta=None, labels=None):
    se = np.asarray(se, float)
    beta = np.zeros(len(se)) if beta is None else np.asarray(beta, float)
    labels = labels or [INTERCEPT] + [("A", str(i)) for i in range(len(se) - 1)]
    return AmceFit(labels, beta, np.diag(se ** 2), 1000, 100)


@pytest.mark.parametrize("K,ratio", [(2, Fraction(1)), (3, Fraction(4, 9)), (4, Fraction(5, 18)),
                                     (6, Fraction(7, 45))])
def test_variance_ratio_table(K, ratio):
    assert variance_ratio_fraction(K) == ratio
    assert theoretical_variance_ratio(K) == float(ratio)


@pytest.mark.parametrize("K,pct", [(2, 0), (3, 33), (4, 47), (6, 61)])
def test_se_reduction_table(K, pct):
    assert round(100 * theoretical_se_reduction(K)) == pct


def test_se_reduction_k3_exact():
    assert theoretical_se_reduction(3) == pytest.approx(1 / 3, abs=1e-15)
    assert theoretical_se_reduction(2) == 0.0


def test_invalid_k():
    for bad in (1, 0, 2.5):
        with pytest.raises(ValueError):
            theoretical_variance_ratio(bad)


@given(st.integers(2, 200))
def test_variance_ratio_decreasing(K):
    assert theoretical_variance_ratio(K + 1) < theoretical_variance_ratio(K)


@given(st.integers(2, 50))
def test_report_identities(K):
    r = EfficiencyReport.theoretical(K)
    assert r.variance_ratio == pytest.approx(r.se_ratio ** 2, rel=1e-14)
    assert r.fcc_sample_multiplier == pytest.approx(1 / r.variance_ratio, rel=1e-14)
    assert r.se_reduction == pytest.approx(1 - r.se_ratio, abs=1e-15)


def test_k2_report_is_neutral():
    r = EfficiencyReport.theoretical(2)
    assert (r.variance_ratio, r.se_ratio, r.se_reduction, r.fcc_sample_multiplier) == (1, 1, 0, 1)


def test_sample_multiplier():
    assert fcc_sample_multiplier(3) == 2.25
    assert fcc_sample_multiplier(6) == pytest.approx(45 / 7)
    assert fcc_sample_multiplier(se_reduction=0.0) == 1.0
    assert fcc_sample_multiplier(se_reduction=0.5) == 4.0
    with pytest.raises(ValueError):
        fcc_sample_multiplier(se_reduction=1.0)
    with pytest.raises(ValueError):
        fcc_sample_multiplier()


def test_empirical_se_comparison():
    a = fake_fit([0.01, 0.04, 0.02, 0.06])
    assert np.allclose(empirical_se_comparison(a, a).ratios, 1.0)
    b = fake_fit([0.5, 0.02, 0.01, 0.03])
    cmp = empirical_se_comparison(a, b)
    assert cmp.reduction == pytest.approx(0.5)
    assert cmp.fcc_sample_multiplier == pytest.approx(4.0)
    assert len(cmp.labels) == 3
    with pytest.raises(ValueError):
        empirical_se_comparison(a, fake_fit([0.1, 0.1], labels=[INTERCEPT, ("Z", "z")]))


def test_precision_per_time():
    a = fake_fit([1.0, 0.04, 0.02])
    assert relative_precision_per_time(a, 110.0, a, 110.0) == pytest.approx(1.0)
    b = fake_fit([1.0, 0.02, 0.01])
    assert relative_precision_per_time(a, 100.0, b, 200.0) == pytest.approx(2.0)
    for agg in ("mean", "median", "mean_se"):
        assert relative_precision_per_time(a, 100.0, b, 200.0, agg) == pytest.approx(2.0)
    assert precision_per_time(a, 2.0) == pytest.approx((1 / 0.04 ** 2 + 1 / 0.02 ** 2) / 2 / 2)
    assert precision_per_time(a, 1.0, "mean_se") == pytest.approx(1 / 0.03 ** 2)
    with pytest.raises(ValueError):
        precision_per_time(a, 0.0)


def test_attribute_importance():
    labels = [INTERCEPT, ("Party", "R"), ("Party", "I"), ("Age", "45")]
    fit = fake_fit([0.1] * 4, beta=[0.5, 0.1, -0.3, 0.0], labels=labels)
    imp = attribute_importance(fit)
    assert imp == {"Party": pytest.approx(0.2), "Age": 0.0}


def test_attribute_importance_candidate_schema(candidate_schema):
    fit = fake_fit([0.1] * 21, labels=[INTERCEPT] + candidate_schema.labels)
    assert len(attribute_importance(fit)) == 6


def test_attribute_importance_level_order_invariant():
    schema1 = AttributeSchema.from_levels({"T": ["a", "b", "c"]})
    schema2 = AttributeSchema.from_dict({"attributes": [{"name": "T", "levels": ["a", "c", "b"], "baseline": "a"}]})
    d = simulate_dataset(SimDesign(n_subjects=40, n_tasks=2, K=3, gamma=(0.5, -0.4), schema=schema1, seed=2))
    codes = d.levels.copy()
    remap = np.array([0, 2, 1])
    d2 = type(d)(schema2, d.mode, d.subject, d.task, d.position, remap[codes], d.outcome)
    i1 = attribute_importance(estimate_amce(d))
    i2 = attribute_importance(estimate_amce(d2))
    assert i1["T"] == pytest.approx(i2["T"], abs=1e-12)


def test_position_effect_null():
    hits = []
    for rep in range(40):
        d = simulate_dataset(SimDesign(n_subjects=100, n_tasks=3, K=3, gamma=(0.3, 0.0), seed=300 + rep))
        fit = position_effect_check(d)
        idx = [i for i, lab in enumerate(fit.labels) if lab[0] == "position"]
        hits += list(np.abs(fit.z[idx]) < 2)
    # 80 tests, |z| < 2 at rate ~0.954
    assert np.mean(hits) >= 0.89


def test_position_effect_primacy_bias():
    # later positions lose utility -> worse (higher) ranks
    d = simulate_dataset(SimDesign(n_subjects=400, n_tasks=3, K=4, gamma=(0.3, 0.0), position_effect=-0.3, seed=8))
    fit = position_effect_check(d)
    pos = [fit.coef("position", str(k)) for k in (2, 3, 4)]
    assert 0 < pos[0] < pos[1] < pos[2]
    nr = position_effect_check(d, outcome="normalized_rank")
    pos_nr = [nr.coef("position", str(k)) for k in (2, 3, 4)]
    assert 0 > pos_nr[0] > pos_nr[1] > pos_nr[2]
    # attribute AMCE stays close to the model without position dummies
    plain = estimate_amce(d, outcome="NormalizedRank")
    assert nr.coef("x1", "1") == pytest.approx(plain.coef("x1", "1"), abs=0.01)


def test_position_effect_k2_symmetric():
    d = simulate_dataset(SimDesign(n_subjects=300, n_tasks=4, K=2, gamma=(0.5,), seed=12), Mode.FORCED_CHOICE)
    fit = position_effect_check(d)
    b = fit.coef("position", "2")
    assert abs(b) < 3 * fit.se[fit.labels.index(("position", "2"))]

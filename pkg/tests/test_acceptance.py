"""Acceptance criteria, one test each.

Every test prints a single ``[PASS]``/``[FAIL]`` line (outside pytest's
capture) before asserting, so ``pytest -v tests/test_acceptance.py`` gives a
readable scorecard.  Monte Carlo criteria run at full scale and are marked
``slow``; together they take a few minutes on one core.
"""

import json
from fractions import Fraction

import numpy as np
import pytest

import oracles
from conftest import random_ranked
from rankjoint import (
    AttributeSchema,
    DesignMatrix,
    SimDesign,
    corruption_sensitivity,
    efficiency_table,
    estimate_amce,
    expand_dataset,
    null_efficiency_check,
    power_comparison,
    sampling_distribution,
    simulate_dataset,
    two_proportion_test,
    z_test_coefficients,
)
from rankjoint.cli import main
from rankjoint.consistency import summarize_counts
from rankjoint.efficiency import variance_ratio_fraction
from rankjoint.estimator import INTERCEPT, AmceFit, encode_design, fit_ols, vcov_clustered


@pytest.fixture
def verdict(capsys):
    def report(number, title, ok, detail=""):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}" + (f" ({detail})" if detail else ""))
        assert ok, f"criterion {number} failed: {detail}"
    return report


def test_01_expansion_counts(verdict):
    rng = np.random.default_rng(1)
    schema = AttributeSchema.binary(2)
    counts = {}
    for K in (2, 3, 4, 5, 6):
        d = random_ranked(rng, schema, 5, 2, [K])
        pairs = expand_dataset(d)
        per_task = np.unique(np.char.add(pairs.subject.astype(str), "|" + pairs.task.astype(str)),
                             return_counts=True)[1]
        counts[K] = sorted(set(per_task.tolist()))
    ok = counts == {2: [2], 3: [6], 4: [12], 5: [20], 6: [30]}
    verdict(1, "expanded rows per task are 2, 6, 12, 20, 30 for K = 2..6", ok, str(counts))


def test_02_pair_normalized_rank_equivalence(verdict):
    rng = np.random.default_rng(2)
    schemas = [AttributeSchema.binary(3),
               AttributeSchema.from_levels({"a": ["0", "1", "2"], "b": ["p", "q"], "c": list("wxyz")}),
               AttributeSchema.from_levels({"u": list("abcde"), "v": ["0", "1"]})]
    worst = 0.0
    for i in range(100):
        schema = schemas[i % 3]
        # most datasets fix K; every fifth mixes task sizes
        Ks = list(range(2, 7)) if i % 5 == 4 else [int(rng.integers(2, 7))]
        d = random_ranked(rng, schema, int(rng.integers(15, 60)), int(rng.integers(1, 5)), Ks, shuffle=True)
        a = estimate_amce(d, outcome="PairChoice", vcov="CR0")
        b = estimate_amce(d, outcome="NormalizedRank", vcov="CR0")
        worst = max(worst, float(np.max(np.abs(a.beta - b.beta))))
    verdict(2, "pair OLS equals normalized-rank OLS on 100 datasets", worst < 1e-10, f"max |diff| {worst:.1e}")


def test_03_theoretical_table(verdict):
    exact = {K: variance_ratio_fraction(K) for K in (2, 3, 4, 6)}
    table = {r.K: r for r in efficiency_table((2, 3, 4, 6))}
    ratios_ok = exact == {2: Fraction(1), 3: Fraction(4, 9), 4: Fraction(5, 18), 6: Fraction(7, 45)}
    floats_ok = all(table[K].variance_ratio == float(exact[K]) for K in table)
    pct = {K: round(100 * table[K].se_reduction) for K in table}
    ok = ratios_ok and floats_ok and pct == {2: 0, 3: 33, 4: 47, 6: 61}
    verdict(3, "variance ratios 1, 4/9, 5/18, 7/45; SE reductions 0/33/47/61%", ok, f"reductions {pct}")


@pytest.mark.slow
def test_04_null_variance_ratio(verdict):
    res = {r["K"]: r["empirical_se_ratio"]
           for r in null_efficiency_check((3, 6), SimDesign(n_subjects=500, n_tasks=3, seed=4), reps=500)}
    ok = abs(res[3] - 2 / 3) <= 0.03 and abs(res[6] - 0.394) <= 0.03
    verdict(4, "null SE ratio K=3 within 2/3 +/- 0.03, K=6 within 0.394 +/- 0.03", ok,
            f"K=3 {res[3]:.4f}, K=6 {res[6]:.4f}")


@pytest.mark.slow
def test_05_power_shape(verdict):
    res = power_comparison(base_design=SimDesign(n_subjects=500, n_tasks=3, K=3, seed=5), reps=1000)
    g, diff = res.rcc.gamma, res.difference
    moderate = (g >= 0.06) & (g <= 0.2)
    large = g >= 1
    size_ok = abs(res.rcc.power[g == 0.01][0] - 0.05) <= 0.03 and abs(res.fcc.power[g == 0.01][0] - 0.05) <= 0.03
    ok = bool((diff[moderate] > 0).all() and (np.abs(diff[large]) < 0.03).all() and size_ok)
    detail = ", ".join(f"{gi:g}:{d:+.3f}" for gi, d in zip(g, diff))
    detail += f"; power at 0.01 rcc {res.rcc.power[0]:.3f} fcc {res.fcc.power[0]:.3f}"
    verdict(5, "RCC-FCC power > 0 on [0.06, 0.2], ~0 at gamma >= 1, size at 0.01", ok, detail)


@pytest.mark.slow
def test_06_sampling_distribution(verdict):
    design = SimDesign(n_subjects=500, n_tasks=3, K=3, gamma=(0.01, 0.06, 0.1, 0.2, 0.5, 1.0), seed=6)
    sd = sampling_distribution(design, reps=500)
    z = sd.mean_difference_z()
    ok = bool((np.abs(z) < 2).all() and (sd.variances("rcc") < sd.variances("fcc")).all())
    verdict(6, "RCC/FCC means within 2 MC SEs; RCC variance smaller", ok,
            f"|z| max {np.abs(z).max():.2f}, variance ratio max "
            f"{(sd.variances('rcc') / sd.variances('fcc')).max():.3f}")


def test_07_cr2_oracle(verdict):
    schema = AttributeSchema.binary(1, prefix="T")
    y = np.array([0.2, 0.9, 0.1, 0.7, 0.4, 0.5])
    clusters = np.array([1, 1, 2, 2, 3, 3])
    dm = encode_design(np.array([[0], [1], [0], [1], [1], [0]]), schema, y=y, cluster_ids=clusters)
    V = vcov_clustered(fit_ols(dm), dm, "CR2")
    toy_err = float(np.max(np.abs(V - oracles.cr2_bruteforce(dm.X, y, list(clusters)))))
    rng = np.random.default_rng(7)
    hc2_err = 0.0
    for _ in range(50):
        n, p = int(rng.integers(10, 80)), int(rng.integers(1, 5))
        X = np.column_stack([np.ones(n), rng.normal(size=(n, p))])
        yy = rng.normal(size=n)
        d = DesignMatrix(X, yy, np.arange(n), [INTERCEPT] + [(f"x{j}", "") for j in range(p)])
        hc2_err = max(hc2_err, float(np.max(np.abs(vcov_clustered(fit_ols(d), d, "CR2") - oracles.hc2(X, yy)))))
    ok = toy_err < 1e-10 and hc2_err < 1e-12
    verdict(7, "CR2 matches brute force (1e-10); singleton CR2 equals HC2 (1e-12)", ok,
            f"toy {toy_err:.1e}, HC2 {hc2_err:.1e}")


@pytest.mark.slow
def test_08_corruption_sensitivity(verdict):
    d = simulate_dataset(SimDesign(n_subjects=500, n_tasks=3, K=3, gamma=(0.2, 0.5, -0.3, 0.1, 1.0, 0.0), seed=8))
    grid = [round(0.05 * i, 2) for i in range(11)]
    res = corruption_sensitivity(d, grid, iters=200, seed=8)
    rows = res["results"]
    dev = np.array([r["mean_deviation"] for r in rows])
    se = np.array([r["mc_se"] for r in rows])
    monotone = bool((dev[1:] >= dev[:-1] - np.sqrt(se[1:] ** 2 + se[:-1] ** 2)).all())
    last = rows[-1]
    mc = np.asarray(last["coefficient_sd"]) / np.sqrt(res["iters"])
    centred = bool((np.abs(last["mean_coefficients"]) < 3 * mc).all())
    ok = dev[0] == 0.0 and monotone and centred
    verdict(8, "p=0 gives 0; deviation monotone in p; p=0.5 coefficients ~ 0", ok,
            "deviations " + " ".join(f"{v:.4f}" for v in dev))


def test_09_consistency_counts(verdict):
    n = 950
    s = summarize_counts({"2": (round(0.13 * n), n), "4": (round(0.22 * n), n), "6": (round(0.22 * n), n)})
    p24, p46 = s.test("2", "4").p, s.test("4", "6").p
    ok = p24 < 0.001 and abs(p46 - 1.0) < 1e-9
    verdict(9, "K=2 vs K=4 p < 0.001; K=4 vs K=6 p ~ 1", ok, f"p24 {p24:.2e}, p46 {p46:.3f}")


def test_10_z_test(verdict):
    labels = [INTERCEPT, ("A", "a1")]
    a = AmceFit(labels, np.array([0.0, 0.1]), np.diag([1.0, 0.03 ** 2]), 100, 10)
    b = AmceFit(labels, np.array([0.0, 0.2]), np.diag([1.0, 0.04 ** 2]), 100, 10)
    (r,) = z_test_coefficients(a, b)
    oracle_p = oracles.normal_two_sided_p(-2.0)
    ok = abs(r.z + 2.0) < 1e-12 and abs(r.p - oracle_p) < 1e-6
    verdict(10, "beta (0.1, 0.2), se (0.03, 0.04) gives z = -2", ok, f"z {r.z:.6f}, p {r.p:.10f}")


@pytest.mark.slow
def test_11_determinism(verdict, tmp_path):
    data, schema = tmp_path / "d.csv", tmp_path / "s.json"
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n_subjects": 60, "n_tasks": 2, "K": 4, "gamma": [0.5, -0.2, 0.1]}))
    assert main(["simulate-data", "--seed", "1", "--config", str(cfg), "--out", str(data),
                 "--schema-out", str(schema)]) == 0
    commands = {
        "simulate-power": ["simulate-power", "--config", str(cfg), "--reps", "20", "--oracle-pairs", "20000",
                           "--gamma-grid", "0.05", "0.2", "1"],
        "simulate-data": ["simulate-data", "--config", str(cfg)],
        "sensitivity": ["sensitivity", "--in", str(data), "--schema", str(schema), "--iters", "30"],
    }
    out = tmp_path / "out"
    same = {}
    for name, cmd in commands.items():
        blobs = []
        for threads in (1, 2, 4):
            for _ in range(2):
                assert main(cmd + ["--seed", "11", "--threads", str(threads), "--canonical", "--out", str(out)]) == 0
                blobs.append(out.read_bytes())
        same[name] = len(set(blobs)) == 1
    verdict(11, "identical seeds give byte-identical canonical output across --threads", all(same.values()),
            str(same))


if __name__ == "__main__":
    raise SystemExit(pytest.main(["-v", __file__]))

"""Monte Carlo engine for random-utility conjoint data.

Profiles draw each attribute level uniformly and independently.  Latent
utility is ``U = gamma . x + eps`` with ``eps ~ N(0, noise_sd^2)``; ranked
tasks order profiles by descending utility and forced-choice tasks pick the
maximum.  Every replication owns a random stream derived from
``(seed, replication index)``, so results do not depend on thread count.
"""

from __future__ import annotations

import dataclasses
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .data import Attribute, AttributeSchema, ConjointDataset, Mode, write_dataset_csv
from .estimator import encode_design, estimate_amce, fit_ols
from .expansion import PairDataset, expand_dataset

__all__ = [
    "DEFAULT_GAMMA_GRID",
    "PowerComparison",
    "PowerResult",
    "SamplingDistribution",
    "SimDesign",
    "corruption_sensitivity",
    "null_efficiency_check",
    "power_comparison",
    "resolve_threads",
    "sampling_distribution",
    "simulate_dataset",
    "true_amce",
    "write_dataset_csv",
]

DEFAULT_GAMMA_GRID = (0.01, 0.02, 0.04, 0.06, 0.08, 0.1, 0.15, 0.2, 0.25, 0.5, 1.0, 2.0)

# spawn-key tags keep streams for different purposes disjoint
_ORACLE_STREAM = 1 << 30


def resolve_threads(threads: Optional[int] = None) -> int:
    if threads is None:
        env = os.environ.get("RANKJOINT_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    if threads < 1:
        raise ValueError("threads must be >= 1")
    return int(threads)


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def _pmap(fn: Callable, items: Sequence, threads: Optional[int]) -> list:
    threads = resolve_threads(threads)
    if threads == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class SimDesign:
    """Synthetic conjoint design.

    ``gamma`` holds one utility coefficient per non-baseline level in schema
    order.  Without a schema, ``len(gamma)`` binary attributes are used.
    ``position_effect`` adds ``position_effect * (position - 1)`` to utility.
    """

    n_subjects: int = 500
    n_tasks: int = 3
    K: int = 3
    gamma: tuple = (0.0,) * 6
    schema: Optional[AttributeSchema] = None
    noise_sd: float = 1.0
    seed: int = 0
    position_effect: float = 0.0

    def __post_init__(self):
        gamma = tuple(float(g) for g in np.atleast_1d(np.asarray(self.gamma, dtype=float)))
        object.__setattr__(self, "gamma", gamma)
        if self.schema is None:
            object.__setattr__(self, "schema", AttributeSchema.binary(len(gamma)))
        if len(gamma) != self.schema.n_dummies:
            raise ValueError(f"gamma has {len(gamma)} entries; schema has {self.schema.n_dummies} non-baseline levels")
        if self.K < 2:
            raise ValueError("K must be at least 2")
        if self.n_subjects < 1 or self.n_tasks < 1:
            raise ValueError("n_subjects and n_tasks must be positive")
        if not self.noise_sd > 0:
            raise ValueError("noise_sd must be positive")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be a non-negative 64-bit integer")

    def replace(self, **changes) -> "SimDesign":
        if "gamma" in changes and "schema" not in changes and len(changes["gamma"]) != len(self.gamma):
            changes["schema"] = None
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_dict(cls, doc: dict) -> "SimDesign":
        doc = dict(doc)
        schema = doc.pop("schema", None)
        n_bin = doc.pop("n_binary_attributes", None)
        if schema is not None:
            schema = AttributeSchema.from_dict(schema)
        elif n_bin is not None:
            schema = AttributeSchema.binary(int(n_bin))
            doc.setdefault("gamma", [0.0] * int(n_bin))
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown design field(s): {sorted(unknown)}")
        return cls(schema=schema, **doc)

    def to_dict(self) -> dict:
        return {"n_subjects": self.n_subjects, "n_tasks": self.n_tasks, "K": self.K,
                "gamma": list(self.gamma), "schema": self.schema.to_dict(), "noise_sd": self.noise_sd,
                "seed": int(self.seed), "position_effect": self.position_effect}


def _ids(prefix: str, n: int) -> np.ndarray:
    width = len(str(max(n, 1)))
    out = np.empty(n, dtype=object)
    out[:] = [f"{prefix}{i + 1:0{width}d}" for i in range(n)]
    return out


def simulate_dataset(design: SimDesign, mode=Mode.RANKED, *, rng: Optional[np.random.Generator] = None,
                     return_utilities: bool = False):
    """Draw one synthetic dataset; returns ``(dataset, utilities)`` if requested.

    Exact utility ties are broken in favour of the earlier display position.
    """
    mode = Mode.parse(mode)
    rng = _stream(design.seed) if rng is None else rng
    N, J, K = design.n_subjects, design.n_tasks, design.K
    n_tasks = N * J
    n = n_tasks * K
    schema = design.schema
    codes = np.column_stack([rng.integers(0, a.n_levels, size=n) for a in schema.attributes]) \
        if len(schema) else np.empty((n, 0), dtype=np.int64)
    X = encode_design(codes, schema).X[:, 1:]
    position = np.tile(np.arange(1, K + 1), n_tasks)
    U = X @ np.asarray(design.gamma) + rng.normal(0.0, design.noise_sd, size=n)
    if design.position_effect:
        U = U + design.position_effect * (position - 1)
    Ut = U.reshape(n_tasks, K)
    if mode is Mode.RANKED:
        order = np.argsort(-Ut, axis=1, kind="stable")
        ranks = np.empty_like(order)
        np.put_along_axis(ranks, order, np.arange(1, K + 1)[None, :].repeat(n_tasks, 0), axis=1)
        outcome = ranks.ravel()
    else:
        outcome = np.zeros((n_tasks, K), dtype=np.int64)
        outcome[np.arange(n_tasks), np.argmax(Ut, axis=1)] = 1
        outcome = outcome.ravel()
    subject = np.repeat(_ids("s", N), J * K)
    task = np.tile(np.repeat(_ids("t", J), K), N)
    d = ConjointDataset(schema, mode, subject, task, position, codes, outcome)
    return (d, U) if return_utilities else d


def true_amce(design: SimDesign, n_pairs: int = 1_000_000, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Large-sample forced-choice oracle for the AMCE of every non-baseline level.

    Simulates independent profile pairs and returns, per level, the choice
    rate when the focal profile has that level minus the rate at baseline.
    """
    rng = _stream(design.seed, _ORACLE_STREAM) if rng is None else rng
    schema = design.schema
    gamma = np.asarray(design.gamma)
    chunk = 250_000
    num = np.zeros(schema.n_dummies)
    cnt = np.zeros(schema.n_dummies)
    base_num = np.zeros(len(schema))
    base_cnt = np.zeros(len(schema))
    done = 0
    while done < n_pairs:
        m = min(chunk, n_pairs - done)
        ca = np.column_stack([rng.integers(0, a.n_levels, size=m) for a in schema.attributes])
        cb = np.column_stack([rng.integers(0, a.n_levels, size=m) for a in schema.attributes])
        Xa = encode_design(ca, schema).X[:, 1:]
        Xb = encode_design(cb, schema).X[:, 1:]
        ua = Xa @ gamma + rng.normal(0.0, design.noise_sd, m)
        ub = Xb @ gamma + rng.normal(0.0, design.noise_sd, m)
        y = (ua > ub).astype(float)
        num += Xa.T @ y
        cnt += Xa.sum(axis=0)
        for j, a in enumerate(schema.attributes):
            at_base = ca[:, j] == a.baseline_index
            base_num[j] += y[at_base].sum()
            base_cnt[j] += at_base.sum()
        done += m
    base_rate = base_num / base_cnt
    attr_of = np.concatenate([[j] * (a.n_levels - 1) for j, a in enumerate(schema.attributes)]).astype(int)
    return num / cnt - base_rate[attr_of]


@dataclass(frozen=True, eq=False)
class PowerResult:
    labels: list
    gamma: np.ndarray
    true_amce: np.ndarray
    power: np.ndarray
    mean_estimate: np.ndarray
    empirical_se: np.ndarray
    mean_se: np.ndarray
    replications: int
    alpha: float
    K: int

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "replications": self.replications,
            "alpha": self.alpha,
            "coefficients": [
                {"attribute": lab[0], "level": lab[1], "gamma": float(g), "true_amce": float(t),
                 "power": float(p), "mean_estimate": float(m), "empirical_se": float(e), "mean_se": float(s)}
                for lab, g, t, p, m, e, s in zip(self.labels, self.gamma, self.true_amce, self.power,
                                                 self.mean_estimate, self.empirical_se, self.mean_se)
            ],
        }


@dataclass(frozen=True, eq=False)
class PowerComparison:
    rcc: PowerResult
    fcc: PowerResult

    @property
    def difference(self) -> np.ndarray:
        return self.rcc.power - self.fcc.power

    def to_dict(self) -> dict:
        return {
            "rcc": self.rcc.to_dict(),
            "fcc": self.fcc.to_dict(),
            "power_difference": [{"gamma": float(g), "difference": float(d)}
                                 for g, d in zip(self.rcc.gamma, self.difference)],
        }


def _batch_designs(gamma_grid, base: SimDesign, n_attributes: int) -> list[SimDesign]:
    grid = [float(g) for g in gamma_grid]
    designs = []
    for b in range(0, len(grid), n_attributes):
        chunk = grid[b:b + n_attributes]
        schema = AttributeSchema(tuple(Attribute(f"x{b + i + 1}", ("0", "1"), "0") for i in range(len(chunk))))
        designs.append(base.replace(gamma=tuple(chunk), schema=schema))
    return designs


def _fit_summary(d: ConjointDataset, alpha: float):
    fit = estimate_amce(d, vcov="CR2", cluster="subject", alpha=alpha)
    idx = fit.amce_index()
    return fit.beta[idx], fit.se[idx], fit.p[idx]


def power_comparison(gamma_grid=DEFAULT_GAMMA_GRID, base_design: Optional[SimDesign] = None, reps: int = 1000,
                     alpha: float = 0.05, *, n_attributes: int = 6, oracle_pairs: int = 1_000_000,
                     threads: Optional[int] = None) -> PowerComparison:
    """Power of ranked (``base_design.K``) versus forced-choice (K=2) designs.

    The gamma grid is split into designs of ``n_attributes`` binary
    attributes.  Each replication simulates both arms with the same N and J
    and tests ``H0: beta = 0`` with CR2 subject-clustered SEs.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    base = base_design or SimDesign()
    if base.K == 2:
        raise ValueError("the ranked arm needs K > 2")
    designs = _batch_designs(gamma_grid, base, n_attributes)
    arms = {"rcc": (base.K, Mode.RANKED), "fcc": (2, Mode.FORCED_CHOICE)}
    collected = {name: {"est": [], "se": [], "rej": []} for name in arms}
    labels, gammas, truths = [], [], []
    for b, design in enumerate(designs):
        labels += design.schema.labels
        gammas += list(design.gamma)
        truths.append(true_amce(design.replace(K=2), oracle_pairs, _stream(base.seed, _ORACLE_STREAM, b)))

        def one(rep, design=design, b=b):
            out = {}
            for a, (name, (K, mode)) in enumerate(arms.items()):
                d = simulate_dataset(design.replace(K=K), mode, rng=_stream(base.seed, b, rep, a))
                out[name] = _fit_summary(d, alpha)
            return out

        results = _pmap(one, list(range(reps)), threads)
        for name in arms:
            est = np.array([r[name][0] for r in results])
            se = np.array([r[name][1] for r in results])
            pv = np.array([r[name][2] for r in results])
            collected[name]["est"].append(est)
            collected[name]["se"].append(se)
            collected[name]["rej"].append(pv < alpha)
    truth = np.concatenate(truths)
    out = {}
    for name, (K, _) in arms.items():
        est = np.concatenate(collected[name]["est"], axis=1)
        se = np.concatenate(collected[name]["se"], axis=1)
        rej = np.concatenate(collected[name]["rej"], axis=1)
        out[name] = PowerResult(
            labels=labels,
            gamma=np.asarray(gammas),
            true_amce=truth,
            power=rej.mean(axis=0),
            mean_estimate=est.mean(axis=0),
            empirical_se=est.std(axis=0, ddof=1) if reps > 1 else np.full(est.shape[1], np.nan),
            mean_se=se.mean(axis=0),
            replications=reps,
            alpha=alpha,
            K=K,
        )
    return PowerComparison(out["rcc"], out["fcc"])


def null_efficiency_check(K_values=(2, 3, 4, 6), base_design: Optional[SimDesign] = None, reps: int = 500, *,
                          threads: Optional[int] = None) -> list[dict]:
    """Empirical SE ratio of ranked arms over a K=2 arm under gamma = 0.

    The ratio is the mean (over replications and coefficients) CR2 SE in the
    ranked arm divided by the same quantity in an independent K=2 arm.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    base = base_design or SimDesign()
    null = base.replace(gamma=(0.0,) * base.schema.n_dummies, schema=base.schema)
    Ks = [int(k) for k in K_values]
    if any(k < 2 for k in Ks):
        raise ValueError("K values must be >= 2")

    def one(rep):
        ses = []
        for a, K in enumerate([2] + Ks):
            d = simulate_dataset(null.replace(K=K), Mode.RANKED, rng=_stream(base.seed, rep, a))
            ses.append(float(np.mean(_fit_summary(d, 0.05)[1])))
        return ses

    ses = np.array(_pmap(one, list(range(reps)), threads))
    baseline = ses[:, 0].mean()
    out = []
    for j, K in enumerate(Ks, start=1):
        ratio = ses[:, j].mean() / baseline
        theory = math.sqrt(2 * (K + 1) / (3 * K * (K - 1)))
        out.append({"K": K, "empirical_se_ratio": float(ratio), "theoretical_se_ratio": theory,
                    "difference": float(ratio - theory), "mean_se": float(ses[:, j].mean()),
                    "baseline_mean_se": float(baseline), "replications": reps})
    return out


@dataclass(frozen=True, eq=False)
class SamplingDistribution:
    labels: list
    rcc: np.ndarray
    fcc: np.ndarray

    def means(self, arm: str) -> np.ndarray:
        return getattr(self, arm).mean(axis=0)

    def variances(self, arm: str) -> np.ndarray:
        return getattr(self, arm).var(axis=0, ddof=1)

    def mean_difference_z(self) -> np.ndarray:
        """Arm mean difference in units of its combined Monte Carlo SE."""
        se = np.sqrt(self.variances("rcc") / len(self.rcc) + self.variances("fcc") / len(self.fcc))
        return (self.means("rcc") - self.means("fcc")) / se

    def to_dict(self) -> dict:
        return {"labels": [list(l) for l in self.labels], "rcc": self.rcc.tolist(), "fcc": self.fcc.tolist()}


def sampling_distribution(design: SimDesign, reps: int = 500, *, threads: Optional[int] = None) -> SamplingDistribution:
    """Estimate draws for a ranked arm (``design.K``) and a K=2 forced-choice arm."""
    if reps < 2:
        raise ValueError("reps must be >= 2")

    def one(rep):
        rcc = simulate_dataset(design, Mode.RANKED, rng=_stream(design.seed, rep, 0))
        fcc = simulate_dataset(design.replace(K=2), Mode.FORCED_CHOICE, rng=_stream(design.seed, rep, 1))
        return _fit_summary(rcc, 0.05)[0], _fit_summary(fcc, 0.05)[0]

    res = _pmap(one, list(range(reps)), threads)
    return SamplingDistribution(design.schema.labels, np.array([r[0] for r in res]), np.array([r[1] for r in res]))


def corruption_sensitivity(data, p_grid=tuple(np.round(np.arange(0, 0.51, 0.05), 2)), iters: int = 200,
                           seed: int = 0, *, method: str = "fixed", threads: Optional[int] = None) -> dict:
    """AMCE deviation from the uncorrupted fit when pairwise outcomes are flipped.

    For each ``p`` and iteration, ``round(p * M)`` of the ``M`` unordered
    pairs (or a Bernoulli(p) subset with ``method="bernoulli"``) have both
    directed rows flipped, the model is refit, and the mean absolute AMCE
    deviation is recorded.
    """
    if method not in ("fixed", "bernoulli"):
        raise ValueError("method must be 'fixed' or 'bernoulli'")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    pairs = data if isinstance(data, PairDataset) else expand_dataset(data)
    dm = encode_design(pairs.levels, pairs.schema, y=pairs.y, cluster_ids=pairs.subject)
    X = dm.X
    base_fit = fit_ols(dm)                           # raises on rank deficiency
    solve = base_fit.xtx_inv @ X.T                   # (p, n): beta = solve @ y
    y0 = pairs.y.astype(float)
    beta0 = base_fit.beta
    amce = slice(1, X.shape[1])
    M = pairs.n_pairs
    pair_id = pairs.pair_id

    def one(task):
        pi, p = task
        if not 0 <= p <= 1:
            raise ValueError("p must lie in [0, 1]")
        # OLS is linear in y, so refit through the outcome change; no flips gives exactly zero shift
        delta = np.zeros((len(y0), iters))
        for it in range(iters):
            rng = _stream(seed, pi, it)
            if method == "fixed":
                flip = np.zeros(M, dtype=bool)
                flip[rng.choice(M, size=int(math.floor(p * M + 0.5)), replace=False)] = True
            else:
                flip = rng.random(M) < p
            f = flip[pair_id]
            delta[f, it] = 1.0 - 2.0 * y0[f]
        shift = (solve @ delta)[amce]
        dev = np.abs(shift).mean(axis=0)
        B = beta0[amce, None] + shift
        return dev, B.mean(axis=1), B.std(axis=1, ddof=1) if iters > 1 else np.zeros(X.shape[1] - 1)

    tasks = list(enumerate(float(p) for p in p_grid))
    res = _pmap(one, tasks, threads)
    rows = []
    for (pi, p), (dev, mean_coef, sd_coef) in zip(tasks, res):
        sd = float(dev.std(ddof=1)) if iters > 1 else 0.0
        rows.append({"p": p, "mean_deviation": float(dev.mean()), "std_deviation": sd,
                     "mc_se": sd / math.sqrt(iters), "mean_coefficients": mean_coef.tolist(),
                     "coefficient_sd": sd_coef.tolist()})
    labels = dm.column_labels[1:]
    return {"labels": [list(l) for l in labels], "baseline": beta0[amce].tolist(),
            "mean_abs_baseline": float(np.mean(np.abs(beta0[amce]))), "iters": iters,
            "method": method, "n_pairs": M, "results": rows}

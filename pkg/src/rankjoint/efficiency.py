"""Design-efficiency diagnostics for ranked versus forced-choice conjoints."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .data import ConjointDataset, Mode
from .estimator import INTERCEPT, AmceFit, encode_design, fit_design
from .expansion import normalized_rank

__all__ = [
    "EfficiencyReport",
    "SEComparison",
    "attribute_importance",
    "efficiency_table",
    "empirical_se_comparison",
    "fcc_sample_multiplier",
    "position_effect_check",
    "precision_per_time",
    "relative_precision_per_time",
    "theoretical_se_reduction",
    "theoretical_variance_ratio",
]


def _check_k(K) -> int:
    if isinstance(K, bool) or int(K) != K:
        raise ValueError(f"K must be an integer, got {K!r}")
    K = int(K)
    if K < 2:
        raise ValueError("K must be at least 2")
    return K


def variance_ratio_fraction(K: int) -> Fraction:
    """Exact ranked/forced-choice variance ratio ``2(K+1) / (3K(K-1))`` under the null."""
    K = _check_k(K)
    return Fraction(2 * (K + 1), 3 * K * (K - 1))


def theoretical_variance_ratio(K: int) -> float:
    return float(variance_ratio_fraction(K))


def theoretical_se_reduction(K: int) -> float:
    return 1.0 - math.sqrt(theoretical_variance_ratio(K))


def fcc_sample_multiplier(K: Optional[int] = None, *, se_reduction: Optional[float] = None) -> float:
    """Forced-choice respondents needed per ranked respondent for equal precision.

    Give either ``K`` (theoretical, ``1 / variance_ratio``) or an observed
    ``se_reduction`` (``1 / (1 - reduction)**2``).
    """
    if (K is None) == (se_reduction is None):
        raise ValueError("pass exactly one of K or se_reduction")
    if K is not None:
        return float(1 / variance_ratio_fraction(K))
    if not 0 <= se_reduction < 1:
        raise ValueError("se_reduction must lie in [0, 1)")
    return 1.0 / (1.0 - se_reduction) ** 2


@dataclass(frozen=True)
class EfficiencyReport:
    K: int
    variance_ratio: float
    se_ratio: float
    se_reduction: float
    fcc_sample_multiplier: float

    @classmethod
    def theoretical(cls, K: int) -> "EfficiencyReport":
        frac = variance_ratio_fraction(K)
        se_ratio = math.sqrt(float(frac))
        return cls(int(K), float(frac), se_ratio, 1.0 - se_ratio, float(1 / frac))

    def to_dict(self) -> dict:
        return {"K": self.K, "variance_ratio": self.variance_ratio, "se_ratio": self.se_ratio,
                "se_reduction": self.se_reduction, "fcc_sample_multiplier": self.fcc_sample_multiplier}


def efficiency_table(K_values) -> list[EfficiencyReport]:
    return [EfficiencyReport.theoretical(K) for K in K_values]


def _matched(fit_a: AmceFit, fit_b: AmceFit):
    index_b = {tuple(l): j for j, l in enumerate(fit_b.labels)}
    pairs = [(i, index_b[tuple(l)]) for i, l in enumerate(fit_a.labels)
             if tuple(l) != INTERCEPT and tuple(l) in index_b]
    if not pairs:
        raise ValueError("fits share no coefficient labels")
    ia, ib = map(np.array, zip(*pairs))
    return [tuple(fit_a.labels[i]) for i in ia], ia, ib


@dataclass(frozen=True)
class SEComparison:
    labels: list
    ratios: np.ndarray
    mean_ratio: float
    reduction: float

    @property
    def fcc_sample_multiplier(self) -> float:
        return fcc_sample_multiplier(se_reduction=self.reduction) if self.reduction >= 0 else float("nan")

    def to_dict(self) -> dict:
        return {
            "coefficients": [{"attribute": a, "level": l, "se_ratio": float(r)}
                             for (a, l), r in zip(self.labels, self.ratios)],
            "mean_se_ratio": self.mean_ratio,
            "se_reduction": self.reduction,
            "fcc_sample_multiplier": self.fcc_sample_multiplier,
        }


def empirical_se_comparison(fit_a: AmceFit, fit_b: AmceFit) -> SEComparison:
    """Per-coefficient ``se_b / se_a`` over shared AMCE labels (intercept excluded)."""
    labels, ia, ib = _matched(fit_a, fit_b)
    ratios = fit_b.se[ib] / fit_a.se[ia]
    mean = float(np.mean(ratios))
    return SEComparison(labels, ratios, mean, 1.0 - mean)


_AGGREGATIONS = ("mean", "median", "mean_se")


def _precision(fit: AmceFit, aggregate: str) -> float:
    se = fit.se[fit.amce_index()]
    if aggregate == "mean":
        return float(np.mean(1.0 / se ** 2))
    if aggregate == "median":
        return float(np.median(1.0 / se ** 2))
    if aggregate == "mean_se":
        return float(1.0 / np.mean(se) ** 2)
    raise ValueError(f"aggregate must be one of {_AGGREGATIONS}")


def precision_per_time(fit: AmceFit, mean_completion_seconds: float, aggregate: str = "mean") -> float:
    """Precision (``1/se^2`` aggregated over AMCEs) per second of survey time.

    ``aggregate="mean"`` averages ``1/se^2``; ``"median"`` takes its median;
    ``"mean_se"`` averages the SEs first and returns ``1/mean(se)^2``.
    """
    if not mean_completion_seconds > 0:
        raise ValueError("completion time must be positive")
    return _precision(fit, aggregate) / mean_completion_seconds


def relative_precision_per_time(fit_a: AmceFit, time_a: float, fit_b: AmceFit, time_b: float,
                                aggregate: str = "mean") -> float:
    """Precision-per-time of design ``b`` relative to baseline design ``a``."""
    return precision_per_time(fit_b, time_b, aggregate) / precision_per_time(fit_a, time_a, aggregate)


def attribute_importance(fit: AmceFit) -> dict[str, float]:
    """Mean absolute AMCE over each attribute's non-baseline levels."""
    groups: dict[str, list[float]] = {}
    for label, b in zip(fit.labels, fit.beta):
        attr, _ = label
        if tuple(label) == INTERCEPT or attr == "position":
            continue
        groups.setdefault(attr, []).append(abs(float(b)))
    return {attr: float(np.mean(v)) for attr, v in groups.items()}


def position_effect_check(d: ConjointDataset, *, outcome: str = "rank", vcov="CR2", alpha: float = 0.05):
    """Regress the profile outcome on display-position dummies plus attributes.

    ``outcome="rank"`` uses the raw rank (positive coefficients mean later
    positions are ranked worse); ``"normalized_rank"`` uses ``(K-R)/(K-1)``.
    Forced-choice data always uses the choice indicator.  Position 1 is the
    baseline; position columns are labelled ``("position", "<k>")``.
    """
    K = d.task_sizes
    if d.mode is Mode.FORCED_CHOICE:
        y, kind = d.outcome.astype(float), "choice"
    elif outcome == "rank":
        y, kind = d.outcome.astype(float), "rank"
    elif outcome == "normalized_rank":
        y, kind = normalized_rank(d.outcome, K), "normalized_rank"
    else:
        raise ValueError("outcome must be 'rank' or 'normalized_rank'")
    max_pos = int(d.position.max()) if len(d) else 1
    extra = {("position", str(k)): (d.position == k).astype(float) for k in range(2, max_pos + 1)}
    dm = encode_design(d.levels, d.schema, y=y, cluster_ids=d.subject, extra_columns=extra)
    return fit_design(dm, vcov=vcov, alpha=alpha, metadata={"outcome": kind})

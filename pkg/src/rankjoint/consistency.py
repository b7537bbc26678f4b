"""Retest-based checks of transitivity and IIA, with proportion tests.

A transitivity retest re-presents two profiles from the main task as a
forced choice.  An IIA retest re-ranks two main-task profiles alongside a
new third profile; only the relative order of the original two matters.
Either way a record is a violation when the retest order disagrees with the
order implied by the main-task ranking.
"""

from __future__ import annotations

import csv
import enum
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Optional, Union

import numpy as np
from scipy import stats

from .data import AttributeSchema, ConjointDataset
from .exceptions import DataError
from .estimator import INTERCEPT, AmceFit, estimate_amce

__all__ = [
    "RetestKind",
    "RetestRecord",
    "ViolationSummary",
    "iia_violation",
    "load_retest_csv",
    "refit_excluding_violators",
    "summarize_counts",
    "summarize_violations",
    "transitivity_violation",
    "two_proportion_test",
]


class RetestKind(str, enum.Enum):
    TRANSITIVITY = "transitivity"
    IIA = "iia"

    @classmethod
    def parse(cls, value) -> "RetestKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown retest kind {value!r}") from None


@dataclass(frozen=True)
class RetestRecord:
    """Order of one profile pair {a, b} in the main task and in the retest.

    ``original_better`` / ``retest_better`` are True when ``a`` is preferred
    to ``b``.
    """

    subject_id: str
    kind: RetestKind
    original_better: bool
    retest_better: bool

    def __post_init__(self):
        object.__setattr__(self, "kind", RetestKind.parse(self.kind))
        object.__setattr__(self, "subject_id", str(self.subject_id))

    @classmethod
    def from_ranks(cls, subject_id, kind, original_rank_a: int, original_rank_b: int,
                   retest_rank_a: int, retest_rank_b: int) -> "RetestRecord":
        """Build a record from ranks (1 = best).

        For IIA the retest ranks come from the three-profile re-ranking; the
        added profile's rank is not needed.
        """
        if original_rank_a == original_rank_b or retest_rank_a == retest_rank_b:
            raise ValueError("the two focal profiles must have distinct ranks")
        return cls(subject_id, kind, original_rank_a < original_rank_b, retest_rank_a < retest_rank_b)

    @property
    def violated(self) -> bool:
        return self.original_better != self.retest_better


def _require_kind(r: RetestRecord, kind: RetestKind):
    if r.kind is not kind:
        raise ValueError(f"expected a {kind.value} record, got {r.kind.value}")


def transitivity_violation(r: RetestRecord) -> bool:
    _require_kind(r, RetestKind.TRANSITIVITY)
    return r.violated


def iia_violation(r: RetestRecord) -> bool:
    _require_kind(r, RetestKind.IIA)
    return r.violated


def two_proportion_test(x1: int, n1: int, x2: int, n2: int, *,
                        continuity_correction: bool = False) -> tuple[float, float]:
    """Pooled two-sample z-test for equal proportions; returns ``(z, p)``.

    When the pooled variance is zero (both samples all-0 or all-1) the
    proportions are identical and ``(0.0, 1.0)`` is returned.
    """
    for x, n in ((x1, n1), (x2, n2)):
        if int(n) != n or int(x) != x or n < 1 or not 0 <= x <= n:
            raise ValueError(f"invalid counts x={x}, n={n}")
    p1, p2 = x1 / n1, x2 / n2
    pooled = (x1 + x2) / (n1 + n2)
    se = math.sqrt(pooled * (1 - pooled) * (1 / n1 + 1 / n2))
    if se == 0:
        return 0.0, 1.0
    diff = p1 - p2
    if continuity_correction:
        cc = 0.5 * (1 / n1 + 1 / n2)
        diff = math.copysign(max(abs(diff) - cc, 0.0), diff)
    z = diff / se
    return z, float(min(1.0, 2 * stats.norm.sf(abs(z))))


def _condition_sort_key(label: str):
    try:
        return (0, float(label), label)
    except ValueError:
        return (1, 0.0, label)


@dataclass(frozen=True)
class ConditionRate:
    condition: str
    n: int
    violations: int

    @property
    def rate(self) -> float:
        return self.violations / self.n if self.n else float("nan")


@dataclass(frozen=True)
class PairwiseTest:
    condition_a: str
    condition_b: str
    z: float
    p: float
    p_adjusted: float


@dataclass(frozen=True)
class ViolationSummary:
    conditions: list
    tests: list
    adjust: str = "none"

    def rate(self, condition: str) -> float:
        return next(c.rate for c in self.conditions if c.condition == condition)

    def test(self, a: str, b: str) -> PairwiseTest:
        for t in self.tests:
            if {t.condition_a, t.condition_b} == {a, b}:
                return t
        raise KeyError((a, b))

    def to_dict(self) -> dict:
        return {
            "conditions": [{"condition": c.condition, "n": c.n, "violations": c.violations, "rate": c.rate}
                           for c in self.conditions],
            "pairwise_tests": [{"condition_a": t.condition_a, "condition_b": t.condition_b,
                                "z": t.z, "p": t.p, "p_adjusted": t.p_adjusted} for t in self.tests],
            "adjust": self.adjust,
        }


def _adjust(pvals: list[float], method: str) -> list[float]:
    m = len(pvals)
    if method == "none" or m == 0:
        return list(pvals)
    if method == "bonferroni":
        return [min(1.0, p * m) for p in pvals]
    if method == "holm":
        order = np.argsort(pvals, kind="stable")
        adjusted = np.empty(m)
        running = 0.0
        for rank, i in enumerate(order):
            running = max(running, min(1.0, (m - rank) * pvals[i]))
            adjusted[i] = running
        return adjusted.tolist()
    raise ValueError("adjust must be 'none', 'bonferroni' or 'holm'")


def summarize_counts(counts: Mapping[str, tuple[int, int]], *, continuity_correction: bool = False,
                     adjust: str = "none") -> ViolationSummary:
    """Summary from ``{condition: (violations, n)}``."""
    labels = sorted((str(k) for k in counts), key=_condition_sort_key)
    keyed = {str(k): v for k, v in counts.items()}
    conditions = [ConditionRate(c, int(keyed[c][1]), int(keyed[c][0])) for c in labels]
    raw = []
    for a, b in itertools.combinations(conditions, 2):
        z, p = two_proportion_test(a.violations, a.n, b.violations, b.n,
                                   continuity_correction=continuity_correction)
        raw.append((a.condition, b.condition, z, p))
    adjusted = _adjust([r[3] for r in raw], adjust)
    tests = [PairwiseTest(a, b, z, p, pa) for (a, b, z, p), pa in zip(raw, adjusted)]
    return ViolationSummary(conditions, tests, adjust)


def summarize_violations(records: Iterable[RetestRecord],
                         condition_of: Union[Mapping[str, str], Callable[[str], str]], *,
                         continuity_correction: bool = False, adjust: str = "none") -> ViolationSummary:
    """Violation rates per condition and pooled z-tests for every condition pair."""
    lookup = condition_of if callable(condition_of) else condition_of.__getitem__
    counts: dict[str, list[int]] = {}
    for r in records:
        try:
            cond = lookup(r.subject_id)
        except KeyError:
            cond = None
        if cond is None:
            raise DataError(f"subject {r.subject_id!r} has no condition label")
        c = counts.setdefault(str(cond), [0, 0])
        c[0] += int(r.violated)
        c[1] += 1
    return summarize_counts({k: tuple(v) for k, v in counts.items()},
                            continuity_correction=continuity_correction, adjust=adjust)


@dataclass(frozen=True, eq=False)
class RefitComparison:
    original: AmceFit
    filtered: AmceFit
    labels: list
    deviations: np.ndarray
    mean_absolute_deviation: float
    max_deviation: float
    excluded_subjects: list

    def to_dict(self) -> dict:
        return {
            "excluded_subjects": self.excluded_subjects,
            "n_excluded": len(self.excluded_subjects),
            "deviations": [{"attribute": a, "level": l, "deviation": float(d)}
                           for (a, l), d in zip(self.labels, self.deviations)],
            "mean_absolute_deviation": self.mean_absolute_deviation,
            "max_deviation": self.max_deviation,
            "original": self.original.to_dict(include_vcov=False),
            "filtered": self.filtered.to_dict(include_vcov=False),
        }


def refit_excluding_violators(d: ConjointDataset, records: Iterable[RetestRecord],
                              schema: Optional[AttributeSchema] = None, **options) -> RefitComparison:
    """Refit after dropping every subject with any violation; report AMCE deviations.

    ``options`` are forwarded to :func:`estimate_amce`.
    """
    schema = schema or d.schema
    violators = sorted({r.subject_id for r in records if r.violated})
    keep = ~np.isin(d.subject.astype(str), violators)
    if not keep.any():
        raise DataError("every subject was excluded as a violator")
    original = estimate_amce(d, schema, **options)
    filtered = estimate_amce(d.take(np.flatnonzero(keep)), schema, **options) if len(violators) else original
    idx = original.amce_index()
    labels = [tuple(original.labels[i]) for i in idx]
    dev = filtered.beta[idx] - original.beta[idx]
    return RefitComparison(original, filtered, labels, dev, float(np.mean(np.abs(dev))),
                           float(np.max(np.abs(dev))), violators)


def _parse_bool(value: str, where: str) -> bool:
    v = (value or "").strip().lower()
    if v in ("1", "true", "t", "yes"):
        return True
    if v in ("0", "false", "f", "no"):
        return False
    raise DataError(f"{where}: expected 0/1, got {value!r}")


def load_retest_csv(path) -> list[RetestRecord]:
    """Read ``subject,kind,original_better,retest_better`` rows."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in ("subject", "kind", "original_better", "retest_better")
                   if c not in (reader.fieldnames or [])]
        if missing:
            raise DataError(f"{path}: missing column(s) {missing}")
        out = []
        for rec in reader:
            where = f"{path}: row {reader.line_num}"
            try:
                kind = RetestKind.parse(rec["kind"])
            except ValueError as exc:
                raise DataError(f"{where}: {exc}") from None
            out.append(RetestRecord(rec["subject"], kind, _parse_bool(rec["original_better"], where),
                                    _parse_bool(rec["retest_better"], where)))
    return out


def load_conditions_csv(path) -> dict[str, str]:
    """Read ``subject,condition`` rows into a mapping."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not {"subject", "condition"} <= set(reader.fieldnames or []):
            raise DataError(f"{path}: needs 'subject' and 'condition' columns")
        return {rec["subject"]: rec["condition"] for rec in reader}

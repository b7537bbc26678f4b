"""Rank expansion into directed pairwise choices, and normalized ranks.

A ranked task of size K yields ``2 * C(K, 2)`` directed rows.  Row
``(a vs b)`` has outcome 1 when profile ``a`` is ranked above ``b``.  Each
profile is focal in exactly ``K - 1`` rows, so the mean of its focal
outcomes is its normalized rank ``(K - rank) / (K - 1)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .data import AttributeSchema, ConjointDataset, Mode
from .exceptions import DataError

__all__ = [
    "NormalizedRankData",
    "PairDataset",
    "Provenance",
    "RankExpander",
    "expand_dataset",
    "forced_choice_pairs",
    "normalized_rank",
    "normalized_rank_dataset",
]


class Provenance(str, enum.Enum):
    EXPANDED = "expanded"
    NATIVE_FORCED_CHOICE = "native_forced_choice"


@dataclass(frozen=True, eq=False)
class PairDataset:
    """Directed pairwise rows carrying the focal profile's attributes.

    ``pair_id`` indexes the unordered pair, shared by its two directed rows.
    ``focal_row`` / ``opponent_row`` point back into the source dataset.
    """

    schema: AttributeSchema
    subject: np.ndarray
    task: np.ndarray
    focal_position: np.ndarray
    opponent_position: np.ndarray
    levels: np.ndarray
    y: np.ndarray
    pair_id: np.ndarray
    focal_row: np.ndarray
    opponent_row: np.ndarray
    provenance: Provenance = Provenance.EXPANDED
    opponent_levels: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.y)

    @property
    def n_pairs(self) -> int:
        return int(self.pair_id.max()) + 1 if len(self.pair_id) else 0

    def with_outcome(self, y) -> "PairDataset":
        y = np.asarray(y, dtype=np.int64)
        if y.shape != self.y.shape:
            raise ValueError("outcome length mismatch")
        return PairDataset(self.schema, self.subject, self.task, self.focal_position,
                           self.opponent_position, self.levels, y, self.pair_id,
                           self.focal_row, self.opponent_row, self.provenance, self.opponent_levels)

    def take(self, index) -> "PairDataset":
        index = np.asarray(index)
        opp = None if self.opponent_levels is None else self.opponent_levels[index]
        return PairDataset(self.schema, self.subject[index], self.task[index],
                           self.focal_position[index], self.opponent_position[index],
                           self.levels[index], self.y[index], self.pair_id[index],
                           self.focal_row[index], self.opponent_row[index], self.provenance, opp)


def _directed_pairs(K: int) -> tuple[np.ndarray, np.ndarray]:
    focal, opp = np.nonzero(~np.eye(K, dtype=bool))
    return focal, opp


def _sorted_task_blocks(d: ConjointDataset):
    """Row indices per task size: ``{K: (task ids, (n_tasks, K) index array)}``."""
    group = d.task_ids
    sizes = d._tasks[2]
    order = np.lexsort((d.position, group))
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    blocks = {}
    for K in np.unique(sizes):
        tasks = np.flatnonzero(sizes == K)
        idx = order[starts[tasks][:, None] + np.arange(K)[None, :]]
        blocks[int(K)] = (tasks, idx)
    return blocks


def _check_ranked(d: ConjointDataset):
    if Mode.parse(d.mode) is not Mode.RANKED:
        raise DataError("rank expansion requires a dataset in ranked mode")


def expand_dataset(d: ConjointDataset, *, with_opponent: bool = False) -> PairDataset:
    """Expand every ranked task into its ``2 * C(K, 2)`` directed pairwise rows.

    Output is sorted by (subject, task, focal position, opponent position).
    """
    _check_ranked(d)
    L = len(d.schema)
    if len(d) == 0:
        empty = np.empty(0, dtype=np.int64)
        return PairDataset(d.schema, d.subject[:0], d.task[:0], empty, empty,
                           np.empty((0, L), dtype=np.int64), empty, empty, empty, empty,
                           Provenance.EXPANDED, np.empty((0, L), dtype=np.int64) if with_opponent else None)

    task_parts, focal_parts, opp_parts, pair_parts = [], [], [], []
    for K, (tasks, idx) in _sorted_task_blocks(d).items():
        if K < 2:
            continue
        f, o = _directed_pairs(K)
        # unordered pair index within a task, shared by (a,b) and (b,a)
        lo, hi = np.minimum(f, o), np.maximum(f, o)
        local_pair = lo * K + hi
        _, local_pair = np.unique(local_pair, return_inverse=True)
        n_rows = len(f)
        task_parts.append(np.repeat(tasks, n_rows))
        focal_parts.append(idx[:, f].ravel())
        opp_parts.append(idx[:, o].ravel())
        pair_parts.append(np.tile(local_pair, len(tasks)))

    task_of = np.concatenate(task_parts)
    focal = np.concatenate(focal_parts)
    opp = np.concatenate(opp_parts)
    local = np.concatenate(pair_parts)
    order = np.argsort(task_of, kind="stable")
    task_of, focal, opp, local = task_of[order], focal[order], opp[order], local[order]

    # global pair ids: offset local pair ids by the number of pairs in earlier tasks
    pairs_per_task = np.zeros(d.n_tasks, dtype=np.int64)
    np.maximum.at(pairs_per_task, task_of, local + 1)
    offsets = np.concatenate([[0], np.cumsum(pairs_per_task)[:-1]])
    pair_id = offsets[task_of] + local

    y = (d.outcome[focal] < d.outcome[opp]).astype(np.int64)
    return PairDataset(
        schema=d.schema,
        subject=d.subject[focal],
        task=d.task[focal],
        focal_position=d.position[focal],
        opponent_position=d.position[opp],
        levels=d.levels[focal],
        y=y,
        pair_id=pair_id,
        focal_row=focal,
        opponent_row=opp,
        provenance=Provenance.EXPANDED,
        opponent_levels=d.levels[opp] if with_opponent else None,
    )


def forced_choice_pairs(d: ConjointDataset) -> PairDataset:
    """Stack native K=2 forced-choice tasks as directed pairwise rows."""
    if Mode.parse(d.mode) is not Mode.FORCED_CHOICE:
        raise DataError("forced_choice_pairs requires a forced-choice dataset")
    if len(d) and not (d.task_sizes == 2).all():
        raise DataError("only K=2 forced-choice tasks map onto pairwise rows")
    # a K=2 choice is a ranking: chosen profile gets rank 1
    as_ranked = ConjointDataset(d.schema, Mode.RANKED, d.subject, d.task, d.position, d.levels, 2 - d.outcome)
    pairs = expand_dataset(as_ranked)
    return PairDataset(pairs.schema, pairs.subject, pairs.task, pairs.focal_position,
                       pairs.opponent_position, pairs.levels, pairs.y, pairs.pair_id,
                       pairs.focal_row, pairs.opponent_row, Provenance.NATIVE_FORCED_CHOICE)


def normalized_rank(rank, K):
    """Map rank ``1..K`` (1 = best) to ``(K - rank) / (K - 1)`` in [0, 1].

    Works elementwise on arrays.
    """
    rank_a = np.asarray(rank)
    K_a = np.asarray(K)
    if np.any(K_a < 2):
        raise ValueError("K must be at least 2")
    if np.any(rank_a < 1) or np.any(rank_a > K_a):
        raise ValueError("rank must lie in 1..K")
    out = (K_a - rank_a) / (K_a - 1.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class NormalizedRankData:
    """One row per profile with its normalized rank and task size."""

    schema: AttributeSchema
    subject: np.ndarray
    task: np.ndarray
    position: np.ndarray
    levels: np.ndarray
    y: np.ndarray
    K: np.ndarray

    def __len__(self):
        return len(self.y)


def normalized_rank_dataset(d: ConjointDataset) -> NormalizedRankData:
    _check_ranked(d)
    K = d.task_sizes
    y = normalized_rank(d.outcome, K) if len(d) else np.empty(0)
    return NormalizedRankData(d.schema, d.subject, d.task, d.position, d.levels,
                              np.asarray(y, dtype=float), np.asarray(K))


class RankExpander(BaseEstimator, TransformerMixin):
    """Transformer wrapper around :func:`expand_dataset`.

    Forced-choice K=2 input is passed through as native pairwise rows.
    """

    def __init__(self, with_opponent: bool = False):
        self.with_opponent = with_opponent

    def fit(self, X, y=None):
        return self

    def transform(self, X: ConjointDataset) -> PairDataset:
        if Mode.parse(X.mode) is Mode.FORCED_CHOICE:
            return forced_choice_pairs(X)
        return expand_dataset(X, with_opponent=self.with_opponent)

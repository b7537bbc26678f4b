"""Attribute schemas and long-format conjoint datasets.

A dataset holds one row per displayed profile.  Attribute levels are stored
as integer codes into the schema's level lists so that design encoding and
simulation stay vectorised; :meth:`ConjointDataset.rows` gives the
string-valued view.

Ranks follow the convention ``1 = most preferred``.  Survey exports that use
``1 = least preferred`` can be flipped on ingest with ``invert_ranks=True``.
"""

from __future__ import annotations

import csv
import enum
import json
import os
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Mapping, NamedTuple, Sequence

import numpy as np

from .exceptions import DataError, SchemaError

__all__ = [
    "Attribute",
    "AttributeSchema",
    "ConjointDataset",
    "Mode",
    "Row",
    "TaskView",
    "Violation",
    "group_tasks",
    "load_dataset_csv",
    "load_schema",
    "validate_dataset",
    "write_dataset_csv",
]

RESERVED_COLUMNS = ("subject", "task", "position", "rank", "choice")


class Mode(str, enum.Enum):
    RANKED = "ranked"
    FORCED_CHOICE = "forced_choice"

    @classmethod
    def parse(cls, value) -> "Mode":
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace("-", "_")
        aliases = {"rank": "ranked", "fc": "forced_choice", "choice": "forced_choice",
                   "forcedchoice": "forced_choice", "rcc": "ranked", "fcc": "forced_choice"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ValueError(f"unknown mode {value!r}; expected 'ranked' or 'forced_choice'") from None

    @property
    def outcome_column(self) -> str:
        return "rank" if self is Mode.RANKED else "choice"


@dataclass(frozen=True)
class Attribute:
    name: str
    levels: tuple[str, ...]
    baseline: str

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(str(v) for v in self.levels))
        if not self.name:
            raise SchemaError("attribute name must be non-empty")
        if len(set(self.levels)) != len(self.levels):
            raise SchemaError(f"attribute {self.name!r} has duplicate level names")
        if len(self.levels) < 2:
            raise SchemaError(f"attribute {self.name!r} needs at least 2 levels")
        if self.baseline not in self.levels:
            raise SchemaError(f"baseline {self.baseline!r} is not a level of {self.name!r}")

    @property
    def baseline_index(self) -> int:
        return self.levels.index(self.baseline)

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def non_baseline(self) -> list[tuple[int, str]]:
        return [(i, lvl) for i, lvl in enumerate(self.levels) if lvl != self.baseline]


@dataclass(frozen=True)
class AttributeSchema:
    """Ordered attributes, each with ordered levels and a baseline level."""

    attributes: tuple[Attribute, ...]

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise SchemaError("attribute names must be unique")
        clash = set(names) & set(RESERVED_COLUMNS)
        if clash:
            raise SchemaError(f"attribute names clash with reserved columns: {sorted(clash)}")

    @classmethod
    def from_dict(cls, doc: Mapping) -> "AttributeSchema":
        try:
            entries = doc["attributes"]
        except (KeyError, TypeError):
            raise SchemaError("schema document needs an 'attributes' list") from None
        attrs = []
        for entry in entries:
            levels = tuple(entry["levels"])
            baseline = entry.get("baseline")
            attrs.append(Attribute(entry["name"], levels, levels[0] if baseline is None else baseline))
        return cls(tuple(attrs))

    @classmethod
    def from_levels(cls, levels_by_name: Mapping[str, Sequence[str]]) -> "AttributeSchema":
        """Build a schema from ``{name: levels}``; baselines are the first levels."""
        return cls(tuple(Attribute(name, tuple(levels), levels[0]) for name, levels in levels_by_name.items()))

    @classmethod
    def binary(cls, n_attributes: int, prefix: str = "x") -> "AttributeSchema":
        """``n_attributes`` binary attributes with levels ``("0", "1")``."""
        return cls(tuple(Attribute(f"{prefix}{i + 1}", ("0", "1"), "0") for i in range(n_attributes)))

    def to_dict(self) -> dict:
        return {"attributes": [{"name": a.name, "levels": list(a.levels), "baseline": a.baseline}
                               for a in self.attributes]}

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.attributes]

    @property
    def n_dummies(self) -> int:
        return sum(a.n_levels - 1 for a in self.attributes)

    @property
    def labels(self) -> list[tuple[str, str]]:
        """(attribute, level) for every non-baseline level, in design-column order."""
        return [(a.name, lvl) for a in self.attributes for _, lvl in a.non_baseline()]

    def __getitem__(self, name: str) -> Attribute:
        for a in self.attributes:
            if a.name == name:
                return a
        raise KeyError(name)

    def __len__(self):
        return len(self.attributes)


def load_schema(path) -> AttributeSchema:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON ({exc})") from None
    return AttributeSchema.from_dict(doc)


class Row(NamedTuple):
    subject_id: str
    task_id: str
    position: int
    levels: dict
    outcome: int


class Violation(NamedTuple):
    subject_id: str
    task_id: str
    message: str

    def __str__(self):
        return f"subject {self.subject_id!r}, task {self.task_id!r}: {self.message}"


def _as_str_array(values) -> np.ndarray:
    out = np.empty(len(values), dtype=object)
    out[:] = [str(v) for v in values]
    return out


@dataclass(frozen=True, eq=False)
class ConjointDataset:
    """Long-format conjoint observations (one row per profile).

    Arrays are read-only after construction.  ``levels`` is an ``(n, L)``
    integer array of level codes indexed in schema order.
    """

    schema: AttributeSchema
    mode: Mode
    subject: np.ndarray
    task: np.ndarray
    position: np.ndarray
    levels: np.ndarray
    outcome: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode.parse(self.mode))
        object.__setattr__(self, "subject", _as_str_array(self.subject))
        object.__setattr__(self, "task", _as_str_array(self.task))
        n = len(self.subject)
        position = np.asarray(self.position, dtype=np.int64).reshape(n)
        outcome = np.asarray(self.outcome, dtype=np.int64).reshape(n)
        levels = np.asarray(self.levels, dtype=np.int64).reshape(n, len(self.schema))
        if len(self.task) != n:
            raise DataError("subject and task columns differ in length")
        object.__setattr__(self, "position", position)
        object.__setattr__(self, "outcome", outcome)
        object.__setattr__(self, "levels", levels)
        for arr in (self.subject, self.task, position, outcome, levels):
            arr.setflags(write=False)

    @classmethod
    def from_records(cls, records, schema: AttributeSchema, mode) -> "ConjointDataset":
        """Build from an iterable of mappings with subject/task/position/outcome/levels."""
        records = list(records)
        codes = np.empty((len(records), len(schema)), dtype=np.int64)
        for i, rec in enumerate(records):
            for j, attr in enumerate(schema.attributes):
                value = str(rec["levels"][attr.name])
                if value not in attr.levels:
                    raise DataError(f"record {i}: attribute {attr.name!r} has unknown level {value!r}")
                codes[i, j] = attr.levels.index(value)
        return cls(
            schema=schema,
            mode=mode,
            subject=[r["subject"] for r in records],
            task=[r["task"] for r in records],
            position=[r["position"] for r in records],
            levels=codes,
            outcome=[r["outcome"] for r in records],
        )

    def __len__(self):
        return len(self.subject)

    def rows(self) -> Iterator[Row]:
        names = self.schema.names
        tables = [a.levels for a in self.schema.attributes]
        for i in range(len(self)):
            lv = {name: tables[j][self.levels[i, j]] for j, name in enumerate(names)}
            yield Row(self.subject[i], self.task[i], int(self.position[i]), lv, int(self.outcome[i]))

    def level_values(self, attribute: str) -> np.ndarray:
        j = self.schema.names.index(attribute)
        table = np.asarray(self.schema.attributes[j].levels, dtype=object)
        return table[self.levels[:, j]]

    def take(self, index) -> "ConjointDataset":
        index = np.asarray(index)
        return ConjointDataset(self.schema, self.mode, self.subject[index], self.task[index],
                               self.position[index], self.levels[index], self.outcome[index])

    def subjects(self) -> list[str]:
        return sorted(set(self.subject.tolist()))

    def equals(self, other: "ConjointDataset") -> bool:
        return (
            self.schema == other.schema
            and self.mode == other.mode
            and np.array_equal(self.subject, other.subject)
            and np.array_equal(self.task, other.task)
            and np.array_equal(self.position, other.position)
            and np.array_equal(self.levels, other.levels)
            and np.array_equal(self.outcome, other.outcome)
        )

    @cached_property
    def _tasks(self):
        """(group id per row, group keys, task sizes); groups sorted by (subject, task)."""
        n = len(self)
        if n == 0:
            return np.empty(0, dtype=np.int64), [], np.empty(0, dtype=np.int64)
        subj_keys, subj_inv = np.unique(self.subject.astype(str), return_inverse=True)
        task_keys, task_inv = np.unique(self.task.astype(str), return_inverse=True)
        combined = subj_inv.astype(np.int64) * len(task_keys) + task_inv
        uniq, group = np.unique(combined, return_inverse=True)
        keys = [(str(subj_keys[u // len(task_keys)]), str(task_keys[u % len(task_keys)])) for u in uniq]
        sizes = np.bincount(group, minlength=len(uniq))
        return group.astype(np.int64), keys, sizes

    @property
    def task_ids(self) -> np.ndarray:
        """Integer task-group id per row (groups ordered by subject then task)."""
        return self._tasks[0]

    @property
    def task_sizes(self) -> np.ndarray:
        """Number of profiles K in each row's task."""
        group, _, sizes = self._tasks
        return sizes[group]

    @property
    def n_tasks(self) -> int:
        return len(self._tasks[1])


class TaskView(NamedTuple):
    subject_id: str
    task_id: str
    K: int
    indices: np.ndarray
    dataset: ConjointDataset

    @property
    def rows(self) -> list[Row]:
        sub = self.dataset.take(self.indices)
        return list(sub.rows())


def group_tasks(d: ConjointDataset) -> Iterator[TaskView]:
    """Yield one view per (subject, task) with rows sorted by position."""
    group, keys, sizes = d._tasks
    if not keys:
        return
    order = np.lexsort((d.position, group))
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    for g, (subj, task) in enumerate(keys):
        idx = order[bounds[g]:bounds[g + 1]]
        yield TaskView(subj, task, int(sizes[g]), idx, d)


def validate_dataset(d: ConjointDataset) -> list[Violation]:
    """Return every invariant violation, ordered by (subject, task) then check."""
    out: list[Violation] = []
    n_levels = np.array([a.n_levels for a in d.schema.attributes], dtype=np.int64)
    for view in group_tasks(d):
        idx = view.indices
        K = view.K
        expected = np.arange(1, K + 1)
        if K < 2:
            out.append(Violation(view.subject_id, view.task_id, f"task has {K} profile(s); at least 2 required"))
        pos = d.position[idx]
        if not np.array_equal(np.sort(pos), expected):
            out.append(Violation(view.subject_id, view.task_id,
                                 f"positions {sorted(pos.tolist())} are not exactly 1..{K}"))
        y = d.outcome[idx]
        if d.mode is Mode.RANKED:
            if not np.array_equal(np.sort(y), expected):
                out.append(Violation(view.subject_id, view.task_id,
                                     f"ranks {sorted(y.tolist())} are not a permutation of 1..{K}"))
        else:
            if not np.isin(y, (0, 1)).all():
                out.append(Violation(view.subject_id, view.task_id, "choice values must be 0 or 1"))
            elif int(y.sum()) != 1:
                out.append(Violation(view.subject_id, view.task_id,
                                     f"exactly one profile must be chosen; found {int(y.sum())}"))
        codes = d.levels[idx]
        if len(n_levels) and ((codes < 0) | (codes >= n_levels)).any():
            out.append(Violation(view.subject_id, view.task_id, "level code outside the schema"))
    return out


def _invert_ranks(d: ConjointDataset) -> ConjointDataset:
    K = d.task_sizes
    return ConjointDataset(d.schema, d.mode, d.subject, d.task, d.position, d.levels, K + 1 - d.outcome)


def load_dataset_csv(path, schema: AttributeSchema, mode=Mode.RANKED, *,
                     invert_ranks: bool = False) -> ConjointDataset:
    """Read and validate a long-format conjoint CSV.

    Raises
    ------
    DataError
        On a missing column, an unknown level, a non-integer outcome, or any
        invariant violation reported by :func:`validate_dataset`.
    """
    mode = Mode.parse(mode)
    outcome_col = mode.outcome_column
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        required = ["subject", "task", "position", outcome_col] + schema.names
        missing = [c for c in required if c not in header]
        if missing:
            raise DataError(f"{path}: missing column(s) {missing}")
        lookups = [{lvl: i for i, lvl in enumerate(a.levels)} for a in schema.attributes]
        subject, task, position, outcome, codes = [], [], [], [], []
        for rec in reader:
            lineno = reader.line_num
            subject.append(rec["subject"])
            task.append(rec["task"])
            for col, sink in (("position", position), (outcome_col, outcome)):
                raw = (rec[col] or "").strip()
                try:
                    sink.append(int(raw))
                except ValueError:
                    raise DataError(f"{path}: row {lineno}: column {col!r} has non-integer value {raw!r}") from None
            row_codes = []
            for attr, lookup in zip(schema.attributes, lookups):
                value = rec[attr.name]
                try:
                    row_codes.append(lookup[value])
                except KeyError:
                    raise DataError(
                        f"{path}: row {lineno}: attribute {attr.name!r} has unknown level {value!r}"
                    ) from None
            codes.append(row_codes)
    d = ConjointDataset(schema, mode, subject, task, position,
                        np.asarray(codes, dtype=np.int64).reshape(len(subject), len(schema)), outcome)
    if invert_ranks and mode is Mode.RANKED:
        d = _invert_ranks(d)
    violations = validate_dataset(d)
    if violations:
        shown = "; ".join(str(v) for v in violations[:5])
        more = f" (+{len(violations) - 5} more)" if len(violations) > 5 else ""
        raise DataError(f"{path}: {len(violations)} violation(s): {shown}{more}", violations)
    return d


def write_dataset_csv(d: ConjointDataset, path) -> None:
    """Write ``d`` in the long-format CSV contract read by :func:`load_dataset_csv`.

    ``path`` may also be an open text file.
    """
    if hasattr(path, "write"):
        _write_rows(d, path)
        return
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        _write_rows(d, fh)
    os.replace(tmp, path)


def _write_rows(d: ConjointDataset, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["subject", "task", "position", d.mode.outcome_column] + d.schema.names)
    tables = [a.levels for a in d.schema.attributes]
    for i in range(len(d)):
        writer.writerow([d.subject[i], d.task[i], int(d.position[i]), int(d.outcome[i])]
                        + [tables[j][c] for j, c in enumerate(d.levels[i])])

"""AMCE estimation: dummy-coded linear probability model with clustered variance.

The pipeline is ``encode_design -> fit_ols -> vcov_clustered``, wrapped by
:func:`estimate_amce`.  Weighted fits are handled by rescaling rows by the
square root of their weight, so every variance estimator sees an ordinary
least-squares problem.
"""

from __future__ import annotations

import enum
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence

import numpy as np
import scipy.linalg
from scipy import stats
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .data import AttributeSchema, ConjointDataset, Mode
from .exceptions import DataError, RankDeficiencyError
from .expansion import PairDataset, expand_dataset, normalized_rank

__all__ = [
    "INTERCEPT",
    "AmceEstimator",
    "AmceFit",
    "ClusteredOLS",
    "DesignEncoder",
    "DesignMatrix",
    "OLSResult",
    "OutcomeKind",
    "VcovType",
    "ZTestResult",
    "encode_design",
    "estimate_amce",
    "fit_ols",
    "vcov_clustered",
    "z_test_coefficients",
]

INTERCEPT = ("(Intercept)", "")
EIGEN_FLOOR = 1e-12


class VcovType(str, enum.Enum):
    CR0 = "CR0"
    CR1 = "CR1"
    CR2 = "CR2"

    @classmethod
    def parse(cls, value) -> "VcovType":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(f"unknown vcov type {value!r}; expected CR0, CR1 or CR2") from None


class OutcomeKind(str, enum.Enum):
    PAIR_CHOICE = "PairChoice"
    NORMALIZED_RANK = "NormalizedRank"

    @classmethod
    def parse(cls, value) -> "OutcomeKind":
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace("_", "").replace("-", "")
        if key in ("pair", "pairchoice", "pairs", "choice"):
            return cls.PAIR_CHOICE
        if key in ("normalizedrank", "rank", "normalized", "nrank"):
            return cls.NORMALIZED_RANK
        raise ValueError(f"unknown outcome kind {value!r}")


# -- design -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DesignMatrix:
    X: np.ndarray
    y: Optional[np.ndarray]
    cluster_ids: Optional[np.ndarray]
    column_labels: list
    weights: Optional[np.ndarray] = None

    @property
    def n_obs(self) -> int:
        return self.X.shape[0]

    @property
    def n_params(self) -> int:
        return self.X.shape[1]


def _codes_from_rows(rows, schema: AttributeSchema) -> np.ndarray:
    if hasattr(rows, "levels") and isinstance(getattr(rows, "levels"), np.ndarray):
        return np.asarray(rows.levels)
    if isinstance(rows, np.ndarray):
        return rows
    rows = list(rows)
    codes = np.empty((len(rows), len(schema)), dtype=np.int64)
    for i, row in enumerate(rows):
        lv = row.levels if hasattr(row, "levels") else row
        for j, attr in enumerate(schema.attributes):
            value = str(lv[attr.name])
            if value not in attr.levels:
                raise DataError(f"row {i}: attribute {attr.name!r} has unknown level {value!r}")
            codes[i, j] = attr.levels.index(value)
    return codes


def encode_design(rows, schema: AttributeSchema, *, y=None, cluster_ids=None, weights=None,
                  extra_columns: Optional[Mapping[tuple, np.ndarray]] = None) -> DesignMatrix:
    """Treatment-code attribute levels against each attribute's baseline.

    ``rows`` may be a dataset (its level codes are used), an ``(n, L)`` code
    array, or an iterable of ``{attribute: level}`` mappings.  Columns are the
    intercept followed by one dummy per non-baseline level in schema order,
    then any ``extra_columns`` in insertion order.
    """
    codes = np.asarray(_codes_from_rows(rows, schema), dtype=np.int64)
    n = codes.shape[0]
    if codes.ndim != 2 or codes.shape[1] != len(schema):
        raise DataError(f"expected level codes of shape (n, {len(schema)}), got {codes.shape}")
    for j, attr in enumerate(schema.attributes):
        bad = (codes[:, j] < 0) | (codes[:, j] >= attr.n_levels)
        if bad.any():
            raise DataError(f"row {int(np.argmax(bad))}: unknown level code for attribute {attr.name!r}")
    extra = dict(extra_columns or {})
    X = np.empty((n, 1 + schema.n_dummies + len(extra)))
    X[:, 0] = 1.0
    labels = [INTERCEPT]
    col = 1
    for j, attr in enumerate(schema.attributes):
        for level_idx, level in attr.non_baseline():
            X[:, col] = codes[:, j] == level_idx
            labels.append((attr.name, level))
            col += 1
    for label, values in extra.items():
        X[:, col] = values
        labels.append(tuple(label))
        col += 1
    return DesignMatrix(
        X=X,
        y=None if y is None else np.asarray(y, dtype=float),
        cluster_ids=None if cluster_ids is None else np.asarray(cluster_ids),
        column_labels=labels,
        weights=None if weights is None else np.asarray(weights, dtype=float),
    )


# -- OLS ----------------------------------------------------------------------

class OLSResult(NamedTuple):
    beta: np.ndarray
    residuals: np.ndarray
    xtx_inv: np.ndarray


def _weighted(dm: DesignMatrix):
    if dm.weights is None:
        return dm.X, dm.y, None
    sw = np.sqrt(dm.weights)
    return dm.X * sw[:, None], dm.y * sw, sw


def _rank_tolerance(R: np.ndarray, shape) -> float:
    d = np.abs(np.diag(R))
    return (d.max() if d.size else 0.0) * max(shape) * np.finfo(float).eps * 10


def fit_ols(dm: DesignMatrix) -> OLSResult:
    """Least squares via column-pivoted QR.

    Raises :class:`RankDeficiencyError` naming the dependent columns when the
    design is not of full column rank.  Residuals are on the original
    (unweighted) scale.
    """
    if dm.y is None:
        raise ValueError("design matrix has no outcome")
    Xw, yw, _ = _weighted(dm)
    n, p = Xw.shape
    if n < p:
        raise RankDeficiencyError(f"{n} observations for {p} parameters", dm.column_labels[n:])
    Q, R, piv = scipy.linalg.qr(Xw, mode="economic", pivoting=True)
    rank = int((np.abs(np.diag(R)) > _rank_tolerance(R, Xw.shape)).sum())
    if rank < p:
        dependent = [dm.column_labels[i] for i in sorted(piv[rank:])]
        names = ", ".join(_label_str(lab) for lab in dependent)
        raise RankDeficiencyError(f"design matrix is rank deficient (rank {rank} < {p}); "
                                  f"dependent column(s): {names}", dependent)
    beta_piv = scipy.linalg.solve_triangular(R, Q.T @ yw)
    R_inv = scipy.linalg.solve_triangular(R, np.eye(p))
    beta = np.empty(p)
    beta[piv] = beta_piv
    inv_piv = R_inv @ R_inv.T
    xtx_inv = np.empty((p, p))
    xtx_inv[np.ix_(piv, piv)] = inv_piv
    residuals = dm.y - dm.X @ beta
    return OLSResult(beta, residuals, xtx_inv)


def _label_str(label) -> str:
    attr, level = label
    return attr if not level else f"{attr}={level}"


# -- clustered variance -------------------------------------------------------

def _cluster_index(cluster_ids) -> tuple[np.ndarray, int]:
    _, inv = np.unique(np.asarray(cluster_ids).astype(str), return_inverse=True)
    inv = inv.ravel()
    return inv, int(inv.max()) + 1 if inv.size else 0


def _cluster_scores(Xw, ew, inv, G):
    scores = np.zeros((G, Xw.shape[1]))
    np.add.at(scores, inv, Xw * ew[:, None])
    return scores


def _cr2_scores(Xw, ew, xtx_inv, inv, G):
    """Per-cluster scores ``X_g' A_g e_g`` with ``A_g = (I - H_gg)^{-1/2}``.

    ``H_gg = Z_g Z_g'`` with ``Z = X L`` and ``L L' = (X'X)^{-1}``, so the
    non-trivial eigenvectors of ``I - H_gg`` come from a thin SVD of ``Z_g``.
    Directions orthogonal to ``Z_g`` have eigenvalue 1 and need no adjustment.
    Clusters of equal size are processed as one batch.
    """
    p = Xw.shape[1]
    L = np.linalg.cholesky(xtx_inv)
    Z = Xw @ L
    scores = np.zeros((G, p))
    degenerate = 0
    order = np.argsort(inv, kind="stable")
    sizes = np.bincount(inv, minlength=G)
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    by_size = defaultdict(list)
    for g in range(G):
        by_size[int(sizes[g])].append(g)
    for size, groups in by_size.items():
        if size == 0:
            continue
        groups = np.asarray(groups)
        rows = order[starts[groups][:, None] + np.arange(size)[None, :]]
        Zb = Z[rows]                              # (Gs, size, p)
        eb = ew[rows]                             # (Gs, size)
        U, s, _ = np.linalg.svd(Zb, full_matrices=False)
        lam = 1.0 - s ** 2                        # eigenvalues of I - H_gg on range(Z_g)
        ok = lam > EIGEN_FLOOR
        degenerate += int((~ok).any(axis=1).sum())
        root = np.where(ok, 1.0 / np.sqrt(np.where(ok, lam, 1.0)), 0.0)
        proj = np.einsum("gns,gn->gs", U, eb)
        adj = eb + np.einsum("gns,gs->gn", U, (root - 1.0) * proj)
        scores[groups] = np.einsum("gnp,gn->gp", Xw[rows], adj)
    return scores, degenerate


def vcov_clustered(fit: OLSResult, dm: DesignMatrix, type="CR2", *, return_info: bool = False):
    """Cluster-robust sandwich covariance of the OLS coefficients.

    CR0 uses raw residuals, CR1 scales CR0 by ``G/(G-1) * (n-1)/(n-p)``, and
    CR2 applies ``(I - H_gg)^{-1/2}`` to each cluster's residuals; eigenvalues
    of ``I - H_gg`` at or below 1e-12 are pseudo-inverted (set to zero).

    With ``return_info=True`` returns ``(vcov, n_degenerate_clusters)``.
    """
    vtype = VcovType.parse(type)
    if dm.cluster_ids is None:
        raise ValueError("design matrix has no cluster ids")
    if len(dm.cluster_ids) != dm.n_obs:
        raise ValueError("every observation needs a cluster id")
    Xw, _, sw = _weighted(dm)
    ew = fit.residuals if sw is None else fit.residuals * sw
    inv, G = _cluster_index(dm.cluster_ids)
    n, p = Xw.shape
    degenerate = 0
    if vtype is VcovType.CR2:
        scores, degenerate = _cr2_scores(Xw, ew, fit.xtx_inv, inv, G)
    else:
        scores = _cluster_scores(Xw, ew, inv, G)
    meat = scores.T @ scores
    V = fit.xtx_inv @ meat @ fit.xtx_inv
    if vtype is VcovType.CR1:
        if G < 2 or n <= p:
            raise ValueError("CR1 needs at least 2 clusters and n > p")
        V = V * (G / (G - 1) * (n - 1) / (n - p))
    V = (V + V.T) / 2
    return (V, degenerate) if return_info else V


# -- fit result ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AmceFit:
    """Coefficients, clustered covariance and intervals for one AMCE model.

    ``labels[i]`` is the ``(attribute, level)`` of coefficient ``i``; the
    intercept is labelled ``("(Intercept)", "")``.
    """

    labels: list
    beta: np.ndarray
    vcov: np.ndarray
    n_obs: int
    n_clusters: int
    vcov_type: VcovType = VcovType.CR2
    outcome_kind: OutcomeKind = OutcomeKind.PAIR_CHOICE
    alpha: float = 0.05
    df: Optional[int] = None
    degenerate_clusters: int = 0
    metadata: dict = field(default_factory=dict)

    @property
    def n_params(self) -> int:
        return len(self.beta)

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.vcov), 0.0, None))

    @property
    def critical_value(self) -> float:
        q = 1 - self.alpha / 2
        return float(stats.norm.ppf(q) if self.df is None else stats.t.ppf(q, self.df))

    @property
    def ci_lower(self) -> np.ndarray:
        return self.beta - self.critical_value * self.se

    @property
    def ci_upper(self) -> np.ndarray:
        return self.beta + self.critical_value * self.se

    @property
    def z(self) -> np.ndarray:
        se = self.se
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(se > 0, self.beta / np.where(se > 0, se, 1.0), np.nan)

    @property
    def p(self) -> np.ndarray:
        z = np.abs(self.z)
        if self.df is None:
            return 2 * stats.norm.sf(z)
        return 2 * stats.t.sf(z, self.df)

    def amce_index(self) -> np.ndarray:
        """Indices of the non-intercept coefficients."""
        return np.array([i for i, lab in enumerate(self.labels) if tuple(lab) != INTERCEPT], dtype=int)

    def coef(self, attribute: str, level: str) -> float:
        return float(self.beta[self.labels.index((attribute, level))])

    def to_dict(self, include_vcov: bool = True) -> dict:
        coefs = []
        for i, (attr, level) in enumerate(self.labels):
            coefs.append({
                "attribute": attr,
                "level": level if level != "" else None,
                "estimate": float(self.beta[i]),
                "se": float(self.se[i]),
                "ci_lower": float(self.ci_lower[i]),
                "ci_upper": float(self.ci_upper[i]),
                "z": None if np.isnan(self.z[i]) else float(self.z[i]),
                "p": None if np.isnan(self.p[i]) else float(self.p[i]),
            })
        out = {
            "coefficients": coefs,
            "n_obs": self.n_obs,
            "n_clusters": self.n_clusters,
            "n_params": self.n_params,
            "vcov_type": self.vcov_type.value,
            "outcome_kind": self.outcome_kind.value,
            "alpha": self.alpha,
            "critical": "normal" if self.df is None else "t",
            "df": self.df,
            "degenerate_clusters": self.degenerate_clusters,
        }
        if self.metadata:
            out["metadata"] = self.metadata
        if include_vcov:
            out["vcov"] = self.vcov.tolist()
        return out

    @classmethod
    def from_dict(cls, doc: Mapping) -> "AmceFit":
        coefs = doc["coefficients"]
        labels = [(c["attribute"], c["level"] or "") for c in coefs]
        beta = np.array([c["estimate"] for c in coefs], dtype=float)
        if doc.get("vcov") is not None:
            vcov = np.asarray(doc["vcov"], dtype=float)
        else:
            vcov = np.diag(np.array([c["se"] for c in coefs], dtype=float) ** 2)
        return cls(
            labels=labels,
            beta=beta,
            vcov=vcov,
            n_obs=int(doc["n_obs"]),
            n_clusters=int(doc["n_clusters"]),
            vcov_type=VcovType.parse(doc.get("vcov_type", "CR2")),
            outcome_kind=OutcomeKind.parse(doc.get("outcome_kind", "PairChoice")),
            alpha=float(doc.get("alpha", 0.05)),
            df=doc.get("df"),
            degenerate_clusters=int(doc.get("degenerate_clusters", 0)),
            metadata=dict(doc.get("metadata", {})),
        )


# -- estimate_amce --------------------------------------------------------------

def _cluster_labels(subject, task, cluster: str) -> np.ndarray:
    if cluster == "subject":
        return subject
    if cluster == "task":
        return np.array([f"{s}\x1f{t}" for s, t in zip(subject, task)], dtype=object)
    if cluster in ("observation", "none"):
        return np.arange(len(subject))
    raise ValueError(f"unknown cluster level {cluster!r}; expected subject, task or observation")


def _design_for(data, schema, outcome: OutcomeKind, cluster: str, extra_columns=None) -> DesignMatrix:
    if isinstance(data, PairDataset):
        if outcome is not OutcomeKind.PAIR_CHOICE:
            raise ValueError("pairwise data supports only the PairChoice outcome")
        return encode_design(data.levels, schema, y=data.y,
                             cluster_ids=_cluster_labels(data.subject, data.task, cluster),
                             extra_columns=extra_columns)
    if not isinstance(data, ConjointDataset):
        raise TypeError(f"expected ConjointDataset or PairDataset, got {type(data).__name__}")
    if data.mode is Mode.FORCED_CHOICE:
        # standard forced-choice estimator: one row per profile, choice indicator
        return encode_design(data.levels, schema, y=data.outcome,
                             cluster_ids=_cluster_labels(data.subject, data.task, cluster),
                             extra_columns=extra_columns)
    if outcome is OutcomeKind.PAIR_CHOICE:
        if extra_columns:
            raise ValueError("extra columns are per-profile; use the NormalizedRank outcome")
        pairs = expand_dataset(data)
        return _design_for(pairs, schema, outcome, cluster)
    K = data.task_sizes
    # weight K-1 reproduces the pairwise normal equations when K varies by task
    return encode_design(data.levels, schema, y=normalized_rank(data.outcome, K),
                         cluster_ids=_cluster_labels(data.subject, data.task, cluster),
                         weights=(K - 1).astype(float), extra_columns=extra_columns)


def fit_design(dm: DesignMatrix, *, vcov="CR2", alpha: float = 0.05, use_t: bool = False,
               outcome_kind=OutcomeKind.PAIR_CHOICE, metadata=None) -> AmceFit:
    """OLS plus clustered covariance on an already-encoded design."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    vtype = VcovType.parse(vcov)
    ols = fit_ols(dm)
    V, degenerate = vcov_clustered(ols, dm, vtype, return_info=True)
    _, G = _cluster_index(dm.cluster_ids)
    return AmceFit(
        labels=list(dm.column_labels),
        beta=ols.beta,
        vcov=V,
        n_obs=dm.n_obs,
        n_clusters=G,
        vcov_type=vtype,
        outcome_kind=OutcomeKind.parse(outcome_kind),
        alpha=alpha,
        df=(G - 1) if use_t else None,
        degenerate_clusters=degenerate,
        metadata=dict(metadata or {}),
    )


def estimate_amce(data, schema: Optional[AttributeSchema] = None, *, vcov="CR2", cluster: str = "subject",
                  alpha: float = 0.05, outcome="PairChoice", use_t: bool = False) -> AmceFit:
    """Estimate AMCEs from ranked, forced-choice, or pre-expanded pairwise data.

    Parameters
    ----------
    data : ConjointDataset or PairDataset
        Ranked data is expanded internally for ``outcome="PairChoice"`` or
        regressed on the normalized rank (weighted by ``K - 1``) for
        ``outcome="NormalizedRank"``.  Forced-choice data uses the choice
        indicator per profile under either outcome.
    vcov : {"CR0", "CR1", "CR2"}
    cluster : {"subject", "task", "observation"}
    alpha : float
        Intervals are ``beta +/- q * se`` with ``q`` the normal quantile, or
        the t quantile on ``G - 1`` degrees of freedom when ``use_t``.
    """
    schema = schema or data.schema
    kind = OutcomeKind.parse(outcome)
    dm = _design_for(data, schema, kind, cluster)
    return fit_design(dm, vcov=vcov, alpha=alpha, use_t=use_t, outcome_kind=kind)


class ZTestResult(NamedTuple):
    attribute: str
    level: str
    estimate_a: float
    estimate_b: float
    z: float
    p: float


def z_test_coefficients(fit_a: AmceFit, fit_b: AmceFit, *, include_intercept: bool = False) -> list[ZTestResult]:
    """Two-sided z-tests of equal coefficients across two independent fits.

    Labels present in only one fit are skipped with a warning.
    """
    index_b = {tuple(lab): i for i, lab in enumerate(fit_b.labels)}
    se_a, se_b = fit_a.se, fit_b.se
    out, unmatched = [], []
    for i, lab in enumerate(fit_a.labels):
        lab = tuple(lab)
        if lab == INTERCEPT and not include_intercept:
            continue
        j = index_b.get(lab)
        if j is None:
            unmatched.append(lab)
            continue
        diff = fit_a.beta[i] - fit_b.beta[j]
        denom = math.sqrt(se_a[i] ** 2 + se_b[j] ** 2)
        if denom > 0:
            z = float(diff / denom)
        else:
            z = 0.0 if diff == 0 else math.copysign(math.inf, diff)
        out.append(ZTestResult(lab[0], lab[1], float(fit_a.beta[i]), float(fit_b.beta[j]),
                               z, float(2 * stats.norm.sf(abs(z)))))
    names_a = {tuple(lab) for lab in fit_a.labels}
    unmatched += [tuple(lab) for lab in fit_b.labels
                  if tuple(lab) not in names_a and (include_intercept or tuple(lab) != INTERCEPT)]
    if not out:
        raise ValueError("fits share no coefficient labels")
    if unmatched:
        warnings.warn(f"skipping unmatched coefficients: {[_label_str(l) for l in unmatched]}", stacklevel=2)
    return out


# -- estimator API --------------------------------------------------------------

class DesignEncoder(BaseEstimator, TransformerMixin):
    """Dummy-code level codes (or datasets) into a design matrix with intercept."""

    def __init__(self, schema: Optional[AttributeSchema] = None, drop_intercept: bool = False):
        self.schema = schema
        self.drop_intercept = drop_intercept

    def fit(self, X, y=None):
        schema = self.schema if self.schema is not None else getattr(X, "schema", None)
        if schema is None:
            raise ValueError("DesignEncoder needs a schema")
        self.schema_ = schema
        labels = [INTERCEPT] + schema.labels
        self.feature_names_out_ = np.array([_label_str(l) for l in labels], dtype=object)
        if self.drop_intercept:
            self.feature_names_out_ = self.feature_names_out_[1:]
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "schema_")
        M = encode_design(X, self.schema_).X
        return M[:, 1:] if self.drop_intercept else M

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "schema_")
        return self.feature_names_out_


class ClusteredOLS(RegressorMixin, BaseEstimator):
    """OLS regressor with cluster-robust covariance (``vcov_``, ``bse_``).

    ``groups`` gives cluster ids; without it every observation is its own
    cluster (CR2 then coincides with HC2).
    """

    def __init__(self, vcov: str = "CR2", fit_intercept: bool = True, alpha: float = 0.05):
        self.vcov = vcov
        self.fit_intercept = fit_intercept
        self.alpha = alpha

    def fit(self, X, y, groups=None, sample_weight=None):
        X, y = check_X_y(X, y, dtype=float, y_numeric=True)
        n = X.shape[0]
        if self.fit_intercept:
            X = np.column_stack([np.ones(n), X])
        labels = [(f"x{i}", "") for i in range(X.shape[1])]
        if self.fit_intercept:
            labels[0] = INTERCEPT
        groups = np.arange(n) if groups is None else np.asarray(groups)
        if len(groups) != n:
            raise ValueError("groups must have one entry per row")
        dm = DesignMatrix(X, y, groups, labels, None if sample_weight is None else np.asarray(sample_weight, float))
        self.fit_ = fit_design(dm, vcov=self.vcov, alpha=self.alpha)
        beta = self.fit_.beta
        self.vcov_ = self.fit_.vcov
        self.bse_ = self.fit_.se
        self.intercept_ = float(beta[0]) if self.fit_intercept else 0.0
        self.coef_ = beta[1:] if self.fit_intercept else beta
        self.n_features_in_ = X.shape[1] - int(self.fit_intercept)
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=float)
        return X @ self.coef_ + self.intercept_


class AmceEstimator(BaseEstimator):
    """Estimator wrapper around :func:`estimate_amce`.

    ``fit`` takes a :class:`ConjointDataset` or :class:`PairDataset`; the
    fitted :class:`AmceFit` is ``result_`` and the AMCEs are ``coef_``.
    """

    def __init__(self, vcov: str = "CR2", cluster: str = "subject", alpha: float = 0.05,
                 outcome: str = "PairChoice", use_t: bool = False):
        self.vcov = vcov
        self.cluster = cluster
        self.alpha = alpha
        self.outcome = outcome
        self.use_t = use_t

    def fit(self, X, y=None):
        self.result_ = estimate_amce(X, vcov=self.vcov, cluster=self.cluster, alpha=self.alpha,
                                     outcome=self.outcome, use_t=self.use_t)
        self.schema_ = X.schema
        idx = self.result_.amce_index()
        self.coef_ = self.result_.beta[idx]
        self.intercept_ = float(self.result_.beta[0])
        self.labels_ = [self.result_.labels[i] for i in idx]
        return self

    def predict(self, X) -> np.ndarray:
        """Linear-probability predictions for the profiles (or pairs) in ``X``."""
        check_is_fitted(self, "result_")
        return encode_design(X, self.schema_).X @ self.result_.beta

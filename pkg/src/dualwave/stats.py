"""Regression, logistic classification, cross-validation and hypothesis tests."""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy import stats as _st
from scipy.special import expit

from .errors import DataError, InputError
from .fbm import make_rng

__all__ = [
    "ols_fit",
    "Dataset",
    "LogisticFit",
    "logistic_fit",
    "FoldResult",
    "CvReport",
    "stratified_folds",
    "stratified_repeated_cv",
    "TestResult",
    "corrected_cv_ttest",
    "deviance_test",
    "paired_ttest",
]

log = logging.getLogger(__name__)

LABEL_COLUMN = "label"


def ols_fit(points):
    """Least-squares line through ``points`` (an ``(n, 2)`` array of x, y).

    Returns ``(slope, intercept, residual_ss)``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InputError(f"points must have shape (n, 2), got {pts.shape}")
    x, y = pts[:, 0], pts[:, 1]
    if x.size < 2 or np.ptp(x) == 0:
        raise InputError("OLS needs at least two distinct x values")
    xc = x - x.mean()
    yc = y - y.mean()
    slope = float(np.dot(xc, yc) / np.dot(xc, xc))
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    return slope, intercept, float(np.dot(resid, resid))


# ----------------------------------------------------------------------
# datasets


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    feature_names: list[str]

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        if self.features.ndim == 1:
            self.features = self.features[:, None]
        self.labels = np.asarray(self.labels).astype(int)
        self.feature_names = list(self.feature_names)
        n, p = self.features.shape
        if self.labels.shape != (n,):
            raise InputError("labels must be a vector with one entry per row")
        if len(self.feature_names) != p:
            raise InputError("feature_names does not match the number of columns")
        if not np.isin(self.labels, (0, 1)).all():
            raise InputError("labels must be 0 or 1")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    def select(self, names) -> "Dataset":
        missing = [nm for nm in names if nm not in self.feature_names]
        if missing:
            raise DataError(f"missing feature columns: {', '.join(missing)}")
        idx = [self.feature_names.index(nm) for nm in names]
        return Dataset(self.features[:, idx], self.labels, list(names))

    def complete_rows(self) -> "Dataset":
        """Drop rows with a missing (NaN) feature."""
        keep = ~np.isnan(self.features).any(axis=1)
        return Dataset(self.features[keep], self.labels[keep], self.feature_names)

    @classmethod
    def from_csv(cls, path, allow_missing=False) -> "Dataset":
        """Read a CSV with a header of feature names and a ``label`` column.

        Empty cells are read as NaN and rejected unless ``allow_missing``.
        Columns other than numeric features and ``label`` (e.g. ``path``)
        are ignored.
        """
        try:
            with open(path, newline="") as fh:
                rows = list(csv.reader(fh))
        except OSError as exc:
            raise DataError(f"cannot read {path}: {exc}") from exc
        if not rows or LABEL_COLUMN not in rows[0]:
            raise DataError(f"{path}: header must contain a {LABEL_COLUMN!r} column")
        header, body = rows[0], [r for r in rows[1:] if r]
        label_at = header.index(LABEL_COLUMN)
        try:
            labels = [int(float(r[label_at])) for r in body]
        except (ValueError, IndexError) as exc:
            raise DataError(f"{path}: bad label value ({exc})") from exc
        names, columns = [], []
        for i, name in enumerate(header):
            if i == label_at:
                continue
            try:
                col = [float(r[i]) if r[i].strip() else math.nan for r in body]
            except ValueError:
                continue  # non-numeric column
            names.append(name)
            columns.append(col)
        feats = np.array(columns, dtype=float).T if columns else np.empty((len(body), 0))
        if not allow_missing and np.isnan(feats).any():
            raise DataError(f"{path}: missing feature values")
        return cls(feats.reshape(len(body), len(names)), labels, names)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.feature_names + [LABEL_COLUMN])
            for row, lab in zip(self.features, self.labels):
                w.writerow(["" if np.isnan(v) else repr(float(v)) for v in row] + [int(lab)])


# ----------------------------------------------------------------------
# logistic regression


def _log_sigmoid(eta):
    return -np.logaddexp(0.0, -eta)


def _deviance(X, y, beta):
    eta = X @ beta
    return float(-2.0 * np.sum(y * _log_sigmoid(eta) + (1 - y) * _log_sigmoid(-eta)))


@dataclass
class LogisticFit:
    coefficients: np.ndarray  # intercept first
    deviance: float
    converged: bool
    n_iter: int

    def predict_proba(self, features):
        X = np.column_stack([np.ones(len(features)), np.asarray(features, dtype=float)])
        return expit(X @ self.coefficients)


def logistic_fit(
    data, labels=None, *, max_iter: int = 100, tol: float = 1e-8, warn: bool = True
) -> LogisticFit:
    """Maximum-likelihood logistic regression by IRLS with step halving.

    ``data`` is a :class:`Dataset` or a feature matrix (then ``labels`` is
    required).  An intercept column is prepended.  Under perfect separation
    the iteration cap is reached and ``converged`` is False; the last
    coefficients are returned.
    """
    if isinstance(data, Dataset):
        feats, y = data.features, data.labels
    else:
        if labels is None:
            raise InputError("labels are required when passing a feature matrix")
        feats, y = np.asarray(data, dtype=float), np.asarray(labels)
    feats = feats.reshape(len(y), -1)
    y = y.astype(float)
    if y.min() == y.max():
        raise InputError("logistic regression needs both classes present")
    X = np.column_stack([np.ones(len(y)), feats])
    beta = np.zeros(X.shape[1])
    dev = _deviance(X, y, beta)
    for it in range(1, max_iter + 1):
        mu = expit(X @ beta)
        w = mu * (1.0 - mu)
        info = X.T @ (X * w[:, None])
        score = X.T @ (y - mu)
        try:
            with warnings.catch_warnings():
                # near-separation makes the information matrix ill-conditioned
                warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
                step = scipy.linalg.solve(info, score, assume_a="pos")
        except (scipy.linalg.LinAlgError, scipy.linalg.LinAlgWarning, ValueError):
            step = np.linalg.lstsq(info, score, rcond=None)[0]
        new_dev = _deviance(X, y, beta + step)
        halvings = 0
        while new_dev > dev + 1e-12 * max(1.0, abs(dev)) and halvings < 30:
            step /= 2
            new_dev = _deviance(X, y, beta + step)
            halvings += 1
        beta = beta + step
        dev = new_dev
        if np.max(np.abs(step)) < tol:
            return LogisticFit(beta, dev, True, it)
    if warn:
        log.warning("logistic fit did not converge in %d iterations (possible separation)", max_iter)
    return LogisticFit(beta, dev, False, max_iter)


# ----------------------------------------------------------------------
# cross-validation


@dataclass
class FoldResult:
    repetition: int
    fold: int
    sensitivity: float
    specificity: float
    accuracy: float
    tp: int
    tn: int
    fp: int
    fn: int


@dataclass
class CvReport:
    per_fold: list[FoldResult]
    k: int
    r: int
    n_train: float
    n_test: float
    feature_names: list[str] = field(default_factory=list)
    n_not_converged: int = 0

    def metric(self, name) -> np.ndarray:
        return np.array([getattr(f, name) for f in self.per_fold])

    def summary(self) -> dict:
        out = {}
        for name in ("sensitivity", "specificity", "accuracy"):
            v = self.metric(name)
            out[name] = {"mean": float(np.nanmean(v)), "sd": float(np.nanstd(v, ddof=1))}
        return out

    def to_dict(self) -> dict:
        return {
            "features": self.feature_names,
            "k": self.k,
            "r": self.r,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "n_not_converged": self.n_not_converged,
            "summary": self.summary(),
            "per_fold": [vars(f) for f in self.per_fold],
        }


def stratified_folds(labels, k: int, rng: np.random.Generator) -> np.ndarray:
    """Fold index per observation: shuffle each class, then deal round-robin."""
    labels = np.asarray(labels)
    order = np.concatenate([rng.permutation(np.flatnonzero(labels == c)) for c in (0, 1)])
    folds = np.empty(labels.size, dtype=int)
    folds[order] = np.arange(labels.size) % k
    return folds


def _safe_ratio(num, den):
    return num / den if den else math.nan


def stratified_repeated_cv(
    data: Dataset, k: int = 10, r: int = 10, threshold: float = 0.5, seed: int = 0
) -> CvReport:
    """Repeated stratified k-fold CV of a logistic classifier.

    Probabilities equal to ``threshold`` are classified as positive.  Fold
    splits depend only on (labels, k, r, seed), so different feature sets
    evaluated with the same seed share identical splits.
    """
    counts = np.bincount(data.labels, minlength=2)
    if counts.min() < k:
        raise InputError(f"each class needs at least k={k} members, got {counts.tolist()}")
    results = []
    not_converged = 0
    for rep in range(r):
        folds = stratified_folds(data.labels, k, make_rng(seed, rep))
        for fold in range(k):
            test = folds == fold
            model = logistic_fit(data.features[~test], data.labels[~test], warn=False)
            not_converged += not model.converged
            pred = (model.predict_proba(data.features[test]) >= threshold).astype(int)
            truth = data.labels[test]
            tp = int(np.sum((pred == 1) & (truth == 1)))
            tn = int(np.sum((pred == 0) & (truth == 0)))
            fp = int(np.sum((pred == 1) & (truth == 0)))
            fn = int(np.sum((pred == 0) & (truth == 1)))
            results.append(
                FoldResult(
                    rep,
                    fold,
                    _safe_ratio(tp, tp + fn),
                    _safe_ratio(tn, tn + fp),
                    (tp + tn) / truth.size,
                    tp,
                    tn,
                    fp,
                    fn,
                )
            )
    if not_converged:
        log.warning(
            "%d of %d fold fits did not converge (possible separation) for %s",
            not_converged, k * r, ", ".join(data.feature_names),
        )
    n = data.n
    return CvReport(results, k, r, n - n / k, n / k, list(data.feature_names), not_converged)


# ----------------------------------------------------------------------
# hypothesis tests


@dataclass
class TestResult:
    statistic: float
    p_value: float
    kind: str
    df: float | None = None
    details: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "df": self.df,
            **self.details,
        }


def _t_from_diffs(d, scale):
    """t statistic for mean(d) with variance multiplier ``scale``; handles var == 0."""
    mean = float(np.mean(d))
    var = float(np.var(d, ddof=1))
    if var == 0.0:
        return 0.0 if mean == 0.0 else math.copysign(math.inf, mean)
    return mean / math.sqrt(scale * var)


def corrected_cv_ttest(acc_a, acc_b, k: int, r: int, n_train: float, n_test: float) -> TestResult:
    """One-sided corrected repeated k-fold CV t-test of mean(A) > mean(B).

    The sample variance of the paired differences is inflated by
    ``1/(k r) + n_test/n_train``; the reference distribution is Student t
    with ``k r - 1`` degrees of freedom.
    """
    a = np.asarray(acc_a, dtype=float)
    b = np.asarray(acc_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise InputError("accuracy vectors must be 1D and of equal length")
    if a.size != k * r:
        raise InputError(f"expected k*r = {k * r} paired accuracies, got {a.size}")
    multiplier = 1.0 / (k * r) + n_test / n_train
    t = _t_from_diffs(a - b, multiplier)
    df = k * r - 1
    p = 0.5 if t == 0.0 else float(_st.t.sf(t, df))
    return TestResult(t, p, "corrected_cv_t", df, {"variance_multiplier": multiplier})


def deviance_test(data: Dataset, reduced_features, full_features) -> TestResult:
    """Likelihood-ratio (deviance difference) test for one added feature."""
    reduced, full = list(reduced_features), list(full_features)
    added = [f for f in full if f not in reduced]
    if not set(reduced) <= set(full) or len(added) != 1 or len(full) != len(reduced) + 1:
        raise InputError("full feature set must be the reduced set plus exactly one feature")
    fit_r = logistic_fit(data.select(reduced))
    fit_f = logistic_fit(data.select(full))
    D = fit_r.deviance - fit_f.deviance
    p = float(_st.chi2.sf(max(D, 0.0), 1))
    return TestResult(
        float(D),
        p,
        "deviance_chi2",
        1,
        {
            "added": added[0],
            "deviance_reduced": fit_r.deviance,
            "deviance_full": fit_f.deviance,
            "converged": bool(fit_r.converged and fit_f.converged),
        },
    )


def paired_ttest(x, y) -> TestResult:
    """Two-sided paired t-test.

    Zero variance of the differences gives ``t = 0, p = 1`` when the mean
    difference is zero and ``t = +-inf, p = 0`` otherwise.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise InputError("paired t-test needs two equal-length vectors of length >= 2")
    n = x.size
    t = _t_from_diffs(x - y, 1.0 / n)
    p = float(2 * _st.t.sf(abs(t), n - 1)) if math.isfinite(t) else 0.0
    return TestResult(t, min(p, 1.0), "paired_t", n - 1, {"mean_difference": float(np.mean(x - y))})

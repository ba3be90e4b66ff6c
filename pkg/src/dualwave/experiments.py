"""Simulation-study, mixed-H and feature-comparison harnesses.

Every harness is deterministic given its seed: each simulated field draws
from its own counter-based stream keyed by (seed, H index, replicate), so
adding estimators or reordering work never changes the simulated data.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DataError, EstimationError, InputError
from .fbm import FbmSpec, generate_fbm2d, make_rng
from .filters import make_filter
from .spectra import (
    DualSpectraConfig,
    PrimalSpectraConfig,
    SpectraFit,
    dual_spectra,
    loglinear_decomposition,
    primal_spectra,
    wavelet_entropy,
)
from .stats import (
    CvReport,
    Dataset,
    TestResult,
    corrected_cv_ttest,
    deviance_test,
    paired_ttest,
    stratified_repeated_cv,
)
from .wavelet import dwt2d, inverse_ndwt2d, ndwt2d, side_exponent

__all__ = [
    "Estimator",
    "DEFAULT_ESTIMATORS",
    "StudyConfig",
    "StudyResult",
    "run_simulation_study",
    "mix_fine_levels",
    "MixedResult",
    "run_mixed_H_experiment",
    "FeatureStudyResult",
    "DEFAULT_FEATURE_SETS",
    "DUAL_FEATURES",
    "run_feature_study",
]

log = logging.getLogger(__name__)

DEFAULT_H_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))


# ----------------------------------------------------------------------
# estimators


@dataclass(frozen=True)
class Estimator:
    """One Hurst estimator setting.

    For primal estimators ``j2=None`` means ``L - 2``, i.e. the fit drops
    the finest level only; with ``L = 10`` that is the familiar ``2..8``.
    """

    name: str
    method: str  # "dual" or "primal"
    filter: str = "haar"
    transform: str = "ndwt2d"
    xq: int = 2
    p1: float = 10.0
    p2: float = 85.0
    j1: int = 2
    j2: int | None = None
    filter_param: float | None = None

    def __post_init__(self):
        if self.method not in ("dual", "primal"):
            raise InputError(f"method must be 'dual' or 'primal', got {self.method!r}")
        if self.transform not in ("dwt2d", "ndwt2d"):
            raise InputError(f"transform must be 'dwt2d' or 'ndwt2d', got {self.transform!r}")

    @property
    def settings(self) -> str:
        if self.method == "dual":
            return f"xq={self.xq},p1={self.p1:g},p2={self.p2:g}"
        j2 = "L-2" if self.j2 is None else self.j2
        return f"j1={self.j1},j2={j2}"

    def decomposition_key(self):
        return (self.filter, self.filter_param, self.transform)

    def fit(self, dec) -> SpectraFit:
        if self.method == "dual":
            return dual_spectra(dec, DualSpectraConfig(self.xq, self.p1, self.p2))
        j2 = dec.L - 2 if self.j2 is None else self.j2
        return primal_spectra(dec, PrimalSpectraConfig(self.j1, j2, self.transform))

    def estimate(self, field_, L: int | None = None) -> SpectraFit:
        return self.fit(decompose(field_, self.filter, self.transform, L, self.filter_param))


def decompose(field_, filter_name, transform, L=None, filter_param=None):
    """Diagonal-only NDWT or full DWT of ``field_`` with ``L`` (default ``J``) levels."""
    J = side_exponent(field_)
    filt = make_filter(filter_name, filter_param)
    L = J if L is None else L
    if transform == "ndwt2d":
        return ndwt2d(field_, filt, L, full=False)
    return dwt2d(field_, filt, L)


DEFAULT_ESTIMATORS = {
    "H_d": Estimator("H_d", "dual", "haar", "ndwt2d", xq=2, p1=10, p2=85),
    "H_d2": Estimator("H_d2", "dual", "haar", "ndwt2d", xq=5, p1=20, p2=95),
    "H_p_ndwt": Estimator("H_p_ndwt", "primal", "symmlet4", "ndwt2d"),
    "H_p_dwt": Estimator("H_p_dwt", "primal", "db2", "dwt2d"),
}


def _estimate_all(estimators, decomp: Callable):
    """Run estimators sharing decompositions; failures map to their message."""
    cache = {}
    out = {}
    for est in estimators:
        key = est.decomposition_key()
        if key not in cache:
            cache[key] = decomp(est)
        try:
            out[est.name] = est.fit(cache[key]).H_hat
        except EstimationError as exc:
            out[est.name] = str(exc)
    return out


# ----------------------------------------------------------------------
# simulation study


@dataclass
class StudyConfig:
    H_grid: Sequence[float] = DEFAULT_H_GRID
    N: int = 256
    replicates: int = 25
    estimators: Sequence[Estimator] = tuple(DEFAULT_ESTIMATORS.values())
    base_seed: int = 0
    L: int | None = None
    source: str = "fbm"  # or "loglinear" for exact synthetic decompositions

    def __post_init__(self):
        if not self.H_grid or not all(0 < h < 1 for h in self.H_grid):
            raise InputError("every H must lie in (0, 1)")
        if self.replicates < 1:
            raise InputError("replicates must be >= 1")
        if self.source not in ("fbm", "loglinear"):
            raise InputError(f"unknown source {self.source!r}")
        names = [e.name for e in self.estimators]
        if len(set(names)) != len(names):
            raise InputError("estimator names must be unique")
        FbmSpec(self.H_grid[0], self.N)  # validates N


@dataclass
class StudyResult:
    records: list[dict]
    config: StudyConfig

    def _ok(self, name):
        return [r for r in self.records if r["estimator"] == name and r["error"] is None]

    @property
    def estimator_names(self):
        return [e.name for e in self.config.estimators]

    def amse(self, name) -> float:
        sq = [r["sq_error"] for r in self._ok(name)]
        return float(np.mean(sq)) if sq else math.nan

    def amse_se(self, name) -> float:
        """Monte-Carlo standard error of the AMSE estimate."""
        sq = np.array([r["sq_error"] for r in self._ok(name)])
        return float(sq.std(ddof=1) / math.sqrt(sq.size)) if sq.size > 1 else math.nan

    def failures(self, name) -> int:
        return sum(1 for r in self.records if r["estimator"] == name and r["error"] is not None)

    def per_H(self, name) -> dict:
        out = {}
        for H in self.config.H_grid:
            est = np.array([r["H_hat"] for r in self._ok(name) if r["H"] == H])
            out[H] = {
                "mean": float(est.mean()) if est.size else math.nan,
                "bias": float(est.mean() - H) if est.size else math.nan,
                "sd": float(est.std(ddof=1)) if est.size > 1 else math.nan,
                "mse": float(np.mean((est - H) ** 2)) if est.size else math.nan,
                "n": int(est.size),
            }
        return out

    def summary(self) -> dict:
        cfg = self.config
        return {
            "config": {
                "H_grid": list(cfg.H_grid),
                "N": cfg.N,
                "replicates": cfg.replicates,
                "base_seed": cfg.base_seed,
                "L": cfg.L,
                "source": cfg.source,
            },
            "estimators": {
                e.name: {
                    "estimator": asdict(e),
                    "settings": e.settings,
                    "amse": self.amse(e.name),
                    "amse_se": self.amse_se(e.name),
                    "failures": self.failures(e.name),
                    "per_H": {str(h): v for h, v in self.per_H(e.name).items()},
                }
                for e in cfg.estimators
            },
        }

    def write_csv(self, path):
        cols = ["H", "estimator", "settings", "replicate", "H_hat", "sq_error", "error"]
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=cols)
            w.writeheader()
            for r in self.records:
                w.writerow({c: ("" if r[c] is None else r[c]) for c in cols})

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)
            fh.write("\n")


def _study_cell(cfg: StudyConfig, h_index: int, rep: int):
    H = cfg.H_grid[h_index]
    J = int(cfg.N).bit_length() - 1
    L = J if cfg.L is None else cfg.L
    if cfg.source == "fbm":
        field_ = generate_fbm2d(FbmSpec(H, cfg.N), rng=make_rng(cfg.base_seed, h_index, rep))

        def decomp(est):
            return decompose(field_, est.filter, est.transform, L, est.filter_param)

    else:

        def decomp(est):
            filt = make_filter(est.filter, est.filter_param)
            return loglinear_decomposition(H, J, L, est.transform, filt)

    return _estimate_all(cfg.estimators, decomp)


def run_simulation_study(cfg: StudyConfig, progress: Callable | None = None) -> StudyResult:
    """Estimate H on ``replicates`` fields per grid value with every estimator."""
    records = []
    cells = list(itertools.product(range(len(cfg.H_grid)), range(cfg.replicates)))
    for count, (h_index, rep) in enumerate(cells, 1):
        H = cfg.H_grid[h_index]
        estimates = _study_cell(cfg, h_index, rep)
        for est in cfg.estimators:
            value = estimates[est.name]
            failed = isinstance(value, str)
            records.append(
                {
                    "H": H,
                    "estimator": est.name,
                    "settings": est.settings,
                    "replicate": rep,
                    "H_hat": None if failed else value,
                    "sq_error": None if failed else (value - H) ** 2,
                    "error": value if failed else None,
                }
            )
        if progress is not None:
            progress(count, len(cells))
    return StudyResult(records, cfg)


# ----------------------------------------------------------------------
# mixed-H experiment


def mix_fine_levels(base, donor, filt, L: int, swap_levels: int) -> np.ndarray:
    """Replace the finest ``swap_levels`` detail levels of ``base`` with ``donor``'s.

    Both fields are decomposed with the scale-mixing NDWT; every region with
    at least one fine axis index is taken from ``donor`` and the result is
    inverted.  Regions whose indices are both coarse add up to the level
    ``J - swap_levels`` approximation of ``base``.
    """
    J = side_exponent(base)
    if not 0 <= swap_levels < L:
        raise InputError(f"swap_levels must be in [0, {L - 1}], got {swap_levels}")
    if swap_levels == 0:
        return np.array(base, dtype=float, copy=True)
    fine = set(range(J - swap_levels, J))
    dec = ndwt2d(base, filt, L)
    donor_dec = ndwt2d(donor, filt, L)
    for key in dec.regions:
        if key[0] in fine or key[1] in fine:
            dec.regions[key] = donor_dec.regions[key]
            if key[0] == key[1]:
                dec.diagonal_details[key[0]] = donor_dec.regions[key]
    del donor_dec
    return inverse_ndwt2d(dec)


@dataclass
class MixedResult:
    primal: np.ndarray
    dual: np.ndarray
    test: TestResult
    failures: int
    settings: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "settings": self.settings,
            "primal": self.primal.tolist(),
            "dual": self.dual.tolist(),
            "mean_primal": float(np.mean(self.primal)),
            "mean_dual": float(np.mean(self.dual)),
            "failures": self.failures,
            "test": self.test.to_dict(),
        }


def mixed_field(H_lo, H_hi, swap_levels, N, rng, filt=None, L=None):
    """One mixed-H field: ``H_hi`` coarse structure with ``H_lo`` fine levels."""
    filt = make_filter("haar") if filt is None else filt
    J = int(N).bit_length() - 1
    L = J if L is None else L
    lo = generate_fbm2d(FbmSpec(H_lo, N), rng=rng)
    hi = generate_fbm2d(FbmSpec(H_hi, N), rng=rng)
    return mix_fine_levels(hi, lo, filt, L, swap_levels)


def run_mixed_H_experiment(
    H_lo: float = 0.4,
    H_hi: float = 0.6,
    swap_levels: int = 3,
    replicates: int = 100,
    N: int = 512,
    seed: int = 0,
    primal: Estimator = DEFAULT_ESTIMATORS["H_p_ndwt"],
    dual: Estimator = DEFAULT_ESTIMATORS["H_d"],
    progress: Callable | None = None,
) -> MixedResult:
    """Paired primal/dual estimates on mixed-H fields and a paired t-test."""
    if not 0 < H_lo <= H_hi < 1:
        raise InputError("need 0 < H_lo <= H_hi < 1")
    filt = make_filter("haar")
    p_est, d_est, failures = [], [], 0
    for rep in range(replicates):
        x = mixed_field(H_lo, H_hi, swap_levels, N, make_rng(seed, rep), filt)
        try:
            p_val = primal.estimate(x).H_hat
            d_val = dual.estimate(x).H_hat
        except EstimationError as exc:
            log.warning("replicate %d failed: %s", rep, exc)
            failures += 1
            continue
        p_est.append(p_val)
        d_est.append(d_val)
        if progress is not None:
            progress(rep + 1, replicates)
    p_arr, d_arr = np.array(p_est), np.array(d_est)
    test = paired_ttest(p_arr, d_arr)
    settings = {
        "H_lo": H_lo,
        "H_hi": H_hi,
        "swap_levels": swap_levels,
        "replicates": replicates,
        "N": N,
        "seed": seed,
        "primal": asdict(primal),
        "dual": asdict(dual),
    }
    return MixedResult(p_arr, d_arr, test, failures, settings)


# ----------------------------------------------------------------------
# feature study

DUAL_FEATURES = ("H_d", "H_d2")

DEFAULT_FEATURE_SETS = {
    "H_p_dwt": ["H_p_dwt"],
    "H_p_ndwt": ["H_p_ndwt"],
    "H_d": ["H_d"],
    "H_d2": ["H_d2"],
    "H_p_dwt+H_d": ["H_p_dwt", "H_d"],
    "H_p_dwt+H_d2": ["H_p_dwt", "H_d2"],
    "H_p_ndwt+H_d": ["H_p_ndwt", "H_d"],
    "H_p_ndwt+H_d2": ["H_p_ndwt", "H_d2"],
    "H_p_dwt+E_p_dwt": ["H_p_dwt", "E_p_dwt"],
    "H_p_dwt+E_p_dwt+H_d": ["H_p_dwt", "E_p_dwt", "H_d"],
    "H_p_dwt+E_p_dwt+H_d2": ["H_p_dwt", "E_p_dwt", "H_d2"],
    "H_p_ndwt+E_p_ndwt": ["H_p_ndwt", "E_p_ndwt"],
    "H_p_ndwt+E_p_ndwt+H_d": ["H_p_ndwt", "E_p_ndwt", "H_d"],
    "H_p_ndwt+E_p_ndwt+H_d2": ["H_p_ndwt", "E_p_ndwt", "H_d2"],
}


@dataclass
class FeatureStudyResult:
    reports: dict[str, CvReport]
    accuracy_tests: list[dict]
    deviance_tests: list[dict]
    n: int

    def to_dict(self):
        return {
            "n": self.n,
            "cv": {name: rep.to_dict() for name, rep in self.reports.items()},
            "accuracy_tests": self.accuracy_tests,
            "deviance_tests": self.deviance_tests,
        }

    def metrics_rows(self):
        rows = []
        for name, rep in self.reports.items():
            s = rep.summary()
            row = {"feature_set": name}
            for m in ("sensitivity", "specificity", "accuracy"):
                row[f"{m}_mean"] = s[m]["mean"]
                row[f"{m}_sd"] = s[m]["sd"]
            rows.append(row)
        return rows

    def write_tables(self, prefix):
        """Write ``<prefix>_metrics.csv``, ``_accuracy_tests.csv``, ``_deviance_tests.csv``."""
        paths = []
        for suffix, rows in (
            ("metrics", self.metrics_rows()),
            ("accuracy_tests", self.accuracy_tests),
            ("deviance_tests", self.deviance_tests),
        ):
            path = f"{prefix}_{suffix}.csv"
            with open(path, "w", newline="") as fh:
                if rows:
                    w = csv.DictWriter(fh, fieldnames=list(rows[0]))
                    w.writeheader()
                    w.writerows(rows)
            paths.append(path)
        return paths


def _comparisons(feature_sets, dual_features):
    """(with-dual, without-dual) pairs: singletons, or A = B plus one dual feature."""
    out = []
    for a_name, a in feature_sets.items():
        a_dual = [f for f in a if f in dual_features]
        if not a_dual:
            continue
        for b_name, b in feature_sets.items():
            if any(f in dual_features for f in b):
                continue
            single = len(a) == 1 and len(b) == 1
            nested = set(b) < set(a) and len(a) == len(b) + 1
            if single or nested:
                out.append((a_name, b_name, nested))
    return out


def run_feature_study(
    data,
    feature_sets: dict | None = None,
    k: int = 10,
    r: int = 10,
    seed: int = 0,
    dual_features=DUAL_FEATURES,
) -> FeatureStudyResult:
    """Cross-validate each feature set on shared folds and run the comparisons.

    ``data`` is a :class:`Dataset` or a CSV path.  Rows with a missing value
    in any used feature are dropped up front so every set sees the same
    observations and fold splits.
    """
    if not isinstance(data, Dataset):
        data = Dataset.from_csv(data, allow_missing=True)
    feature_sets = dict(DEFAULT_FEATURE_SETS if feature_sets is None else feature_sets)
    used = sorted({f for fs in feature_sets.values() for f in fs})
    missing = [f for f in used if f not in data.feature_names]
    if missing:
        raise DataError(f"missing feature columns: {', '.join(missing)}")
    full = data.select(used)
    complete = full.complete_rows()
    if complete.n < full.n:
        log.warning("dropping %d rows with missing features", full.n - complete.n)
    reports = {
        name: stratified_repeated_cv(complete.select(fs), k, r, seed=seed)
        for name, fs in feature_sets.items()
    }
    acc_tests, dev_tests = [], []
    for a_name, b_name, nested in _comparisons(feature_sets, dual_features):
        ra, rb = reports[a_name], reports[b_name]
        t = corrected_cv_ttest(
            ra.metric("accuracy"), rb.metric("accuracy"), k, r, ra.n_train, ra.n_test
        )
        acc_tests.append(
            {"A": a_name, "B": b_name, "statistic": t.statistic, "p_value": t.p_value}
        )
        if nested:
            d = deviance_test(complete, feature_sets[b_name], feature_sets[a_name])
            dev_tests.append(
                {
                    "reduced": b_name,
                    "full": a_name,
                    "added": d.details["added"],
                    "D": d.statistic,
                    "p_value": d.p_value,
                    "converged": d.details["converged"],
                }
            )
    return FeatureStudyResult(reports, acc_tests, dev_tests, complete.n)

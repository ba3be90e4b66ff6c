"""Per-image feature extraction: Hurst estimates and finest-level entropy."""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError, DualwaveError, EstimationError, InputError
from .experiments import DEFAULT_ESTIMATORS, Estimator, decompose, mixed_field
from .fbm import FbmSpec, generate_fbm2d, make_rng
from .imageio import CropSpec, crop_region, load_image
from .spectra import wavelet_entropy
from .stats import Dataset
from .wavelet import side_exponent

__all__ = [
    "FEATURE_NAMES",
    "FeatureConfig",
    "extract_features",
    "extract_from_array",
    "read_manifest",
    "extract_batch",
    "write_feature_csv",
    "fbm_corpus",
    "mixed_corpus",
]

log = logging.getLogger(__name__)

FEATURE_NAMES = ("H_p_dwt", "H_p_ndwt", "H_d", "H_d2", "E_p_dwt", "E_p_ndwt")

# entropy feature name -> estimator whose decomposition it reuses
_ENTROPY_SOURCES = {"E_p_dwt": "H_p_dwt", "E_p_ndwt": "H_p_ndwt"}


@dataclass(frozen=True)
class FeatureConfig:
    """Estimator settings for each feature and an optional crop.

    ``estimators`` must define ``H_p_dwt``, ``H_p_ndwt``, ``H_d`` and
    ``H_d2``.  Without a crop the image must already be a power-of-two
    square.
    """

    estimators: dict = field(default_factory=lambda: dict(DEFAULT_ESTIMATORS))
    crop: CropSpec | None = None
    L: int | None = None

    def __post_init__(self):
        missing = [n for n in FEATURE_NAMES[:4] if n not in self.estimators]
        if missing:
            raise InputError(f"feature config lacks estimators: {', '.join(missing)}")


def extract_from_array(image, config: FeatureConfig = FeatureConfig()) -> dict:
    """Feature row for an in-memory square image; failed features are NaN."""
    try:
        side_exponent(image)
    except InputError as exc:
        raise DataError(str(exc)) from exc
    image = np.asarray(image, dtype=float)
    row = {}
    cache = {}
    for name in FEATURE_NAMES[:4]:
        est: Estimator = config.estimators[name]
        key = est.decomposition_key()
        if key not in cache:
            cache[key] = decompose(image, est.filter, est.transform, config.L, est.filter_param)
        try:
            row[name] = est.fit(cache[key]).H_hat
        except EstimationError as exc:
            log.warning("%s failed: %s", name, exc)
            row[name] = math.nan
    for name, source in _ENTROPY_SOURCES.items():
        dec = cache[config.estimators[source].decomposition_key()]
        try:
            row[name] = wavelet_entropy(dec)
        except EstimationError as exc:
            log.warning("%s failed: %s", name, exc)
            row[name] = math.nan
    return row


def extract_features(image_path, config: FeatureConfig = FeatureConfig(), stream=()) -> dict:
    """Read, optionally crop, and summarize one image.

    ``stream`` keys the crop's vertical draw so batch rows stay independent
    of processing order.
    """
    image = load_image(image_path)
    if config.crop is not None:
        image = crop_region(image, config.crop, stream)
    return extract_from_array(image, config)


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: int
    orientation: str | None = None


def read_manifest(path) -> list[ManifestEntry]:
    """Read a ``path,label[,orientation]`` CSV; relative paths resolve against it."""
    base = os.path.dirname(os.path.abspath(path))
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"path", "label"} <= set(reader.fieldnames):
                raise DataError(f"{path}: manifest needs 'path' and 'label' columns")
            entries = []
            for lineno, rec in enumerate(reader, 2):
                try:
                    label = int(rec["label"])
                except (TypeError, ValueError) as exc:
                    raise DataError(f"{path}:{lineno}: label must be 0 or 1") from exc
                if label not in (0, 1):
                    raise DataError(f"{path}:{lineno}: label must be 0 or 1")
                orient = (rec.get("orientation") or "").strip() or None
                entries.append(ManifestEntry(os.path.join(base, rec["path"]), label, orient))
    except OSError as exc:
        raise DataError(f"{path}: cannot read manifest ({exc})") from exc
    return entries


def _job(args):
    index, entry, config = args
    if config.crop is not None and entry.orientation is not None:
        config = replace(config, crop=replace(config.crop, orientation=entry.orientation))
    try:
        return extract_features(entry.path, config, stream=(index,)), None
    except DualwaveError as exc:
        msg = str(exc)
        return None, msg if entry.path in msg else f"{entry.path}: {msg}"


def extract_batch(entries, config: FeatureConfig = FeatureConfig(), jobs: int = 1):
    """Extract rows for every manifest entry, in manifest order.

    Returns ``(rows, errors)``; unreadable images produce an all-empty row
    and an error message.
    """
    tasks = [(i, e, config) for i, e in enumerate(entries)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_job, tasks))
    else:
        results = [_job(t) for t in tasks]
    rows, errors = [], []
    for entry, (row, err) in zip(entries, results):
        if err is not None:
            errors.append(err)
            row = {name: math.nan for name in FEATURE_NAMES}
        rows.append({"path": entry.path, "label": entry.label, **row})
    return rows, errors


def write_feature_csv(path, rows):
    """Write feature rows; NaN becomes an empty cell and floats use ``repr``."""
    cols = ["path", *FEATURE_NAMES, "label"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in rows:
            out = []
            for c in cols:
                v = row[c]
                if isinstance(v, float):
                    v = "" if math.isnan(v) else repr(v)
                out.append(v)
            w.writerow(out)


# ----------------------------------------------------------------------
# synthetic corpora


def _rows_to_dataset(rows, labels):
    feats = [[r[n] for n in FEATURE_NAMES] for r in rows]
    return Dataset(np.array(feats), np.array(labels), list(FEATURE_NAMES))


def fbm_corpus(H0=0.3, H1=0.5, n_per_class=60, N=256, seed=0, config=FeatureConfig()):
    """Features of ``n_per_class`` fBm fields at ``H0`` (label 0) and ``H1`` (label 1)."""
    rows, labels = [], []
    for label, H in enumerate((H0, H1)):
        for i in range(n_per_class):
            x = generate_fbm2d(FbmSpec(H, N), rng=make_rng(seed, label, i))
            rows.append(extract_from_array(x, config))
            labels.append(label)
    return _rows_to_dataset(rows, labels)


def mixed_corpus(
    n_per_class=60,
    N=256,
    seed=0,
    H_lo=0.4,
    H_hi=0.6,
    swap_levels=3,
    control_H=(0.05, 0.6),
    config=FeatureConfig(),
):
    """Mixed-H fields (label 1) against plain fBm controls (label 0).

    Control exponents are drawn uniformly from ``control_H`` so the primal
    estimates of both classes overlap and the label is not recoverable from a
    single scaling exponent.
    """
    rows, labels = [], []
    for i in range(n_per_class):
        rng = make_rng(seed, 0, i)
        H = rng.uniform(*control_H)
        rows.append(extract_from_array(generate_fbm2d(FbmSpec(H, N), rng=rng), config))
        labels.append(0)
    for i in range(n_per_class):
        x = mixed_field(H_lo, H_hi, swap_levels, N, make_rng(seed, 1, i))
        rows.append(extract_from_array(x, config))
        labels.append(1)
    return _rows_to_dataset(rows, labels)

"""Primal and dual wavelet spectra, Hurst estimators and wavelet entropy.

The primal spectra regresses ``log2`` mean diagonal energy on level ``j``;
for 2D fBm the slope is ``-(2H + 2)``.  The dual spectra inverts the
relationship: energies from all levels are pooled, cut into intervals at
empirical quantiles, and the mean level of each interval is regressed on
the ``log2`` midpoint energy of that interval, giving slope
``-1 / (2H + 2)``.

Only diagonal detail regions enter either spectra.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import EstimationError, InputError
from .stats import ols_fit
from .wavelet import DWT2D, NDWT2D, Decomposition

__all__ = [
    "PrimalSpectraConfig",
    "DualSpectraConfig",
    "EnergyPool",
    "SpectraFit",
    "diagonal_energies",
    "dual_quantiles",
    "primal_spectra",
    "dual_spectra",
    "wavelet_entropy",
    "hurst_from_primal_slope",
    "hurst_from_dual_slope",
    "loglinear_decomposition",
]

log = logging.getLogger(__name__)

# tolerance when comparing quantile probabilities against the fit range
_PROB_EPS = 1e-12


def hurst_from_primal_slope(slope: float) -> float:
    return -slope / 2.0 - 1.0


def hurst_from_dual_slope(slope: float) -> float:
    return -0.5 * (1.0 / slope + 2.0)


@dataclass(frozen=True)
class PrimalSpectraConfig:
    """Fit range for the primal spectra.

    ``j1`` and ``j2`` are inclusive and counted from the coarsest detail
    level, so with ``L = J`` they are plain level indices.
    """

    j1: int = 2
    j2: int = 8
    transform: str = "ndwt2d"

    def __post_init__(self):
        if self.transform not in ("dwt2d", "ndwt2d"):
            raise InputError(f"transform must be 'dwt2d' or 'ndwt2d', got {self.transform!r}")
        if not 0 <= self.j1 < self.j2:
            raise InputError(f"need 0 <= j1 < j2, got j1={self.j1}, j2={self.j2}")


@dataclass(frozen=True)
class DualSpectraConfig:
    """Quantile multiplier ``xq`` (``n_q = xq * L``) and fit range in percent."""

    xq: int = 2
    p1: float = 10.0
    p2: float = 85.0

    def __post_init__(self):
        if int(self.xq) != self.xq or self.xq < 1:
            raise InputError(f"xq must be a positive integer, got {self.xq!r}")
        if not (0 <= self.p1 < self.p2 <= 100):
            raise InputError(f"need 0 <= p1 < p2 <= 100, got p1={self.p1}, p2={self.p2}")


@dataclass
class EnergyPool:
    """Pooled diagonal energies tagged with their level.

    The quantile fields are filled in by :func:`dual_quantiles`.  Interval
    ``m`` (1-based) is ``[q_0, q_1]`` for ``m = 1`` and ``(q_{m-1}, q_m]``
    afterwards; ``probabilities[i]`` is the probability defining ``q_i``
    with ``0`` and ``1`` standing for the minimum and maximum.
    """

    levels: np.ndarray
    energies: np.ndarray
    level_values: np.ndarray
    n_zero: int = 0
    quantiles: np.ndarray | None = None
    probabilities: np.ndarray | None = None
    midpoints: np.ndarray | None = None
    interval_counts: np.ndarray | None = None
    level_weights: np.ndarray | None = None

    @property
    def mean_levels(self) -> np.ndarray:
        """Average level per interval (NaN for empty intervals)."""
        with np.errstate(invalid="ignore"):
            return self.level_weights @ self.level_values.astype(float)


@dataclass
class SpectraFit:
    points: np.ndarray
    used_mask: np.ndarray
    slope: float
    intercept: float
    H_hat: float
    method: str
    config: dict = field(default_factory=dict)
    n_zero_excluded: int = 0

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "H_hat": None if math.isnan(self.H_hat) else self.H_hat,
            "slope": self.slope,
            "intercept": self.intercept,
            "points": self.points.tolist(),
            "used_mask": [bool(b) for b in self.used_mask],
            "n_zero_excluded": self.n_zero_excluded,
            "config": self.config,
        }

    def to_json(self, path=None, **kwargs) -> str:
        text = json.dumps(self.to_dict(), indent=2, **kwargs)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    def to_csv(self, path):
        """Write the plot points as a two-column ``x,y`` CSV."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y"])
            for x, y in self.points:
                w.writerow([repr(float(x)), repr(float(y))])


# ----------------------------------------------------------------------
# energies


def diagonal_energies(dec: Decomposition) -> EnergyPool:
    """One ``(level, |d|^2)`` entry per diagonal detail coefficient."""
    if len(dec.diagonal_details) < 2:
        raise InputError("need at least two detail levels")
    level_values = np.array(sorted(dec.diagonal_details), dtype=np.int64)
    energies, levels = [], []
    for j in level_values:
        d = np.asarray(dec.diagonal_details[int(j)])
        e = (d.real**2 + d.imag**2) if np.iscomplexobj(d) else d * d
        energies.append(e.ravel())
        levels.append(np.full(e.size, j, dtype=np.int16))
    return EnergyPool(np.concatenate(levels), np.concatenate(energies), level_values)


def _level_means(dec: Decomposition):
    out = {}
    for j in sorted(dec.diagonal_details):
        d = np.asarray(dec.diagonal_details[j])
        out[j] = float(np.mean(d.real**2 + d.imag**2 if np.iscomplexobj(d) else d * d))
    return out


# ----------------------------------------------------------------------
# primal spectra


def primal_spectra(dec: Decomposition, cfg: PrimalSpectraConfig = PrimalSpectraConfig()) -> SpectraFit:
    """Regress ``log2`` mean diagonal energy on level over ``[j1, j2]``."""
    coarsest = dec.J - dec.L
    if coarsest + cfg.j2 > dec.J - 1:
        raise InputError(
            f"fit range j1={cfg.j1}..j2={cfg.j2} exceeds the {dec.L} available levels"
        )
    means = _level_means(dec)
    used = {j for j in means if cfg.j1 <= j - coarsest <= cfg.j2}
    zero = sorted(j for j in used if means[j] <= 0.0)
    if zero:
        raise EstimationError(f"levels {zero} in the fit range have zero energy")
    pts = [(j, math.log2(m)) for j, m in means.items() if m > 0.0]
    points = np.array(pts, dtype=float)
    mask = np.array([int(j) in used for j, _ in pts])
    slope, intercept, _ = ols_fit(points[mask])
    method = "primal_dwt" if dec.kind == DWT2D else "primal_ndwt"
    config = {**asdict(cfg), "filter": dec.filter.to_dict(), "J": dec.J, "L": dec.L}
    return SpectraFit(points, mask, slope, intercept, hurst_from_primal_slope(slope), method, config)


# ----------------------------------------------------------------------
# dual spectra


def dual_quantiles(pool: EnergyPool, n_q: int) -> EnergyPool:
    """Cut the pooled energies into ``n_q + 1`` quantile intervals.

    Zero energies are dropped first (their count is kept in ``n_zero``).
    Interior cut points are type-1 (inverted-CDF) empirical quantiles at
    probabilities ``(i - 0.5) / n_q``, ``i = 1 .. n_q``.
    """
    n_q = int(n_q)
    if n_q < 1:
        raise InputError("need at least one quantile")
    nonzero = pool.energies > 0
    n_zero = int(pool.energies.size - np.count_nonzero(nonzero))
    if n_zero:
        log.info("excluding %d zero energies from the dual spectra", n_zero)
    energies = pool.energies[nonzero]
    levels = pool.levels[nonzero]
    if energies.size < 2:
        raise EstimationError("too few nonzero energies for the dual spectra")
    lo, hi = float(energies.min()), float(energies.max())
    if lo == hi:
        raise EstimationError("all nonzero energies are equal; dual spectra is degenerate")

    probs = (np.arange(1, n_q + 1) - 0.5) / n_q
    interior = np.quantile(energies, probs, method="inverted_cdf")
    q = np.concatenate([[lo], interior, [hi]])
    prob_all = np.concatenate([[0.0], probs, [1.0]])
    M = n_q + 1

    # interval index 0..M-1: first interval closed, others (q_{m-1}, q_m]
    idx = np.searchsorted(interior, energies, side="left")
    counts = np.bincount(idx, minlength=M)
    level_pos = np.searchsorted(pool.level_values, levels)
    n_levels = pool.level_values.size
    freq = np.bincount(idx * n_levels + level_pos, minlength=M * n_levels).reshape(M, n_levels)
    with np.errstate(invalid="ignore", divide="ignore"):
        weights = freq / counts[:, None]

    return EnergyPool(
        levels,
        energies,
        pool.level_values,
        n_zero=pool.n_zero + n_zero,
        quantiles=q,
        probabilities=prob_all,
        midpoints=np.log2((q[:-1] + q[1:]) / 2.0),
        interval_counts=counts,
        level_weights=weights,
    )


def _dual_used(prob, p1, p2):
    lower, upper = prob[:-1], prob[1:]
    return (lower >= p1 / 100.0 - _PROB_EPS) & (upper <= p2 / 100.0 + _PROB_EPS)


def dual_spectra(dec: Decomposition, cfg: DualSpectraConfig = DualSpectraConfig()) -> SpectraFit:
    """Dual spectra fit and Hurst estimate ``-(1/slope + 2)/2``.

    Points are ``(c_m, mean level)`` for each nonempty interval.  An interval
    enters the fit when both of its bounding quantile probabilities lie in
    ``[p1, p2]`` percent.  A non-negative slope raises
    :class:`EstimationError` with the fit attached.
    """
    pool = dual_quantiles(diagonal_energies(dec), cfg.xq * dec.L)
    nonempty = pool.interval_counts > 0
    points = np.column_stack([pool.midpoints, pool.mean_levels])[nonempty]
    mask = _dual_used(pool.probabilities, cfg.p1, cfg.p2)[nonempty]
    config = {
        **asdict(cfg),
        "n_q": cfg.xq * dec.L,
        "filter": dec.filter.to_dict(),
        "transform": dec.kind,
        "J": dec.J,
        "L": dec.L,
    }
    used = points[mask]
    if used.shape[0] < 2 or np.ptp(used[:, 0]) == 0:
        fit = SpectraFit(points, mask, math.nan, math.nan, math.nan, "dual", config, pool.n_zero)
        raise EstimationError("dual fit range selects fewer than two distinct points", fit)
    slope, intercept, _ = ols_fit(used)
    fit = SpectraFit(points, mask, slope, intercept, math.nan, "dual", config, pool.n_zero)
    if not slope < 0:
        raise EstimationError(f"dual slope {slope:.6g} is not negative; H is undefined", fit)
    fit.H_hat = hurst_from_dual_slope(slope)
    return fit


# ----------------------------------------------------------------------
# entropy


def wavelet_entropy(dec: Decomposition, level: int | None = None) -> float:
    """Shannon entropy (bits) of normalized diagonal energies at ``level``.

    ``level`` defaults to the finest level ``J - 1``.
    """
    j = dec.J - 1 if level is None else int(level)
    if j not in dec.diagonal_details:
        raise InputError(f"level {j} is not in the decomposition")
    d = np.asarray(dec.diagonal_details[j])
    e = (d.real**2 + d.imag**2 if np.iscomplexobj(d) else d * d).ravel()
    total = e.sum()
    if total <= 0:
        raise EstimationError(f"level {j} has zero energy; entropy undefined")
    p = e[e > 0] / total
    return float(-np.sum(p * np.log2(p)))


# ----------------------------------------------------------------------
# synthetic inputs


def loglinear_decomposition(H, J, L=None, kind="ndwt2d", filt=None, offset=0.0) -> Decomposition:
    """Decomposition whose level-``j`` diagonal energies all equal ``2**(-(2H+2) j + offset)``.

    Used to check exact recovery; only diagonal regions are populated.
    """
    from .filters import make_filter

    L = J if L is None else L
    filt = make_filter("haar") if filt is None else filt
    n = 2**J
    diag = {}
    for j in range(J - L, J):
        side = n if kind == "ndwt2d" else 2**j
        amp = 2.0 ** ((-(2 * H + 2) * j + offset) / 2)
        signs = np.where(np.indices((side, side)).sum(axis=0) % 2 == 0, 1.0, -1.0)
        diag[j] = amp * signs
    kind_tag = NDWT2D if kind == "ndwt2d" else DWT2D
    return Decomposition(kind_tag, J, L, filt, diag, None)

"""Orthonormal quadrature-mirror filter banks.

Seven filters are supported: ``haar``, ``db2``, ``db3``, ``pollen`` (one
angle parameter), ``coif1``, ``symmlet4`` and the complex symmetric
``conf6``.  Low-pass filters are normalized so that ``sum(h) == sqrt(2)`` and
``sum(|h|**2) == 1``; the high-pass filter is derived by the quadrature-mirror
rule ``g[n] = (-1)**n * conj(h[L-1-n])``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

__all__ = ["WaveletFilter", "make_filter", "FILTER_NAMES", "qmf"]

FILTER_NAMES = ("haar", "db2", "db3", "pollen", "coif1", "symmlet4", "conf6")

_SQRT2 = math.sqrt(2.0)
_SQRT15 = math.sqrt(15.0)

_LOW_PASS = {
    "haar": [1 / _SQRT2, 1 / _SQRT2],
    "db2": [
        0.48296291314453416,
        0.8365163037378079,
        0.2241438680420134,
        -0.12940952255126037,
    ],
    "db3": [
        0.33267055295008263,
        0.8068915093110925,
        0.45987750211849154,
        -0.13501102001025458,
        -0.08544127388202666,
        0.03522629188570953,
    ],
    "coif1": [
        -0.07273261951252645,
        0.3378976624574818,
        0.8525720202116004,
        0.3848648468648578,
        -0.07273261951252645,
        -0.015655728135791993,
    ],
    "symmlet4": [
        0.032223100604051466,
        -0.012603967262031304,
        -0.09921954357663353,
        0.29785779560530606,
        0.8037387518051321,
        0.497618667632775,
        -0.029635527646002493,
        -0.07576571478950221,
    ],
    # Symmetric complex Daubechies filter with three vanishing moments.
    "conf6": [
        complex(-3, -_SQRT15) / (32 * _SQRT2),
        complex(5, -_SQRT15) / (32 * _SQRT2),
        complex(30, 2 * _SQRT15) / (32 * _SQRT2),
        complex(30, 2 * _SQRT15) / (32 * _SQRT2),
        complex(5, -_SQRT15) / (32 * _SQRT2),
        complex(-3, -_SQRT15) / (32 * _SQRT2),
    ],
}


def qmf(low_pass):
    """High-pass mirror of ``low_pass``: ``g[n] = (-1)**n conj(h[L-1-n])``."""
    h = np.asarray(low_pass)
    signs = (-1.0) ** np.arange(h.size)
    return signs * np.conj(h[::-1])


def _pollen(phi):
    c, s = math.cos(phi), math.sin(phi)
    scale = 1.0 / (2.0 * _SQRT2)
    return [
        (1 - c + s) * scale,
        (1 + c + s) * scale,
        (1 + c - s) * scale,
        (1 - c - s) * scale,
    ]


@dataclass(frozen=True)
class WaveletFilter:
    """A named orthonormal filter pair.

    ``param`` is only set for the Pollen family, where it is the angle in
    radians.
    """

    name: str
    low_pass: np.ndarray = field(repr=False)
    high_pass: np.ndarray = field(repr=False)
    param: float | None = None

    @property
    def n_taps(self) -> int:
        return int(self.low_pass.size)

    @property
    def is_complex(self) -> bool:
        return bool(np.iscomplexobj(self.low_pass))

    def label(self) -> str:
        if self.param is None:
            return self.name
        return f"{self.name}({self.param:g})"

    def to_dict(self):
        return {"name": self.name, "param": self.param}


def make_filter(name: str, param: float | None = None) -> WaveletFilter:
    """Build one of the supported filters by name.

    >>> make_filter("haar").low_pass
    array([0.70710678, 0.70710678])
    """
    key = str(name).lower()
    if key not in FILTER_NAMES:
        raise InputError(f"unknown filter {name!r}; expected one of {', '.join(FILTER_NAMES)}")
    if key == "pollen":
        phi = math.pi / 4 if param is None else float(param)
        if not math.isfinite(phi) or not (0.0 <= phi < 2 * math.pi):
            raise InputError(f"pollen angle must lie in [0, 2*pi), got {param!r}")
        low = np.array(_pollen(phi))
        param = phi
    else:
        if param is not None:
            raise InputError(f"filter {key!r} takes no parameter")
        low = np.array(_LOW_PASS[key])
    low.setflags(write=False)
    high = qmf(low)
    high.setflags(write=False)
    return WaveletFilter(key, low, high, param)

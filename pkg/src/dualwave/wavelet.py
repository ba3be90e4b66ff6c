"""Periodic 2D wavelet transforms.

Two forward transforms are provided:

* :func:`dwt2d` -- the decimated Mallat pyramid.  It is orthonormal, and its
  diagonal and approximation regions coincide with those of ``W Y W^H`` for
  the unitary 1D transform matrix ``W``.
* :func:`ndwt2d` -- the scale-mixing non-decimated transform ``X = W1 Y W2^H``
  where every region ``(r, c)`` is an ``N x N`` array.

Conventions shared by both
--------------------------
Levels follow the decreasing convention: the finest detail level is
``j = J - 1`` and the coarsest is ``J - L``.  Filtering is periodic
correlation, ``y[m] = sum_t f[t] x[(m + s*t) mod N]``, so a level-``j`` DWT
coefficient ``k`` equals the level-``j`` NDWT coefficient at position
``k * 2**(J-j)``.  Axis 0 uses the filter as stored and axis 1 its complex
conjugate, matching ``W Y W^H`` for complex filters.

The NDWT keeps the orthonormal filter scaling at every level (no extra
``1/sqrt(2)`` per level), which keeps the expected diagonal energy decay at
``2**(-(2H+2) j)`` for fractional Brownian fields.  Reconstruction is the
average-basis inverse, computed exactly in the Fourier domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .filters import WaveletFilter

__all__ = [
    "Decomposition",
    "dwt2d",
    "inverse_dwt2d",
    "ndwt2d",
    "inverse_ndwt2d",
    "side_exponent",
]

DWT2D = "dwt2d"
NDWT2D = "ndwt2d_scale_mixing"


def side_exponent(signal) -> int:
    """Return ``J`` for a square ``2**J`` array, raising otherwise."""
    a = np.asarray(signal)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError(f"expected a square 2D array, got shape {a.shape}")
    n = a.shape[0]
    if n < 2 or n & (n - 1):
        raise InputError(f"side length must be a power of two >= 2, got {n}")
    return n.bit_length() - 1


def _check_levels(J, L):
    if not isinstance(L, (int, np.integer)) or not 1 <= L <= J:
        raise InputError(f"number of detail levels must be in [1, {J}], got {L!r}")
    return int(L)


@dataclass
class Decomposition:
    """Output of :func:`dwt2d` or :func:`ndwt2d`.

    ``diagonal_details`` maps each level ``j`` in ``J-L .. J-1`` to its
    diagonal detail region.  For the NDWT, ``regions`` holds every
    scale-mixing region keyed by ``(row_level, col_level)`` with ``None``
    standing for the approximation; it is ``None`` when only the diagonal
    was requested.  For the DWT, ``coefficients`` is the full Mallat-layout
    matrix and the details are views into it.
    """

    kind: str
    J: int
    L: int
    filter: WaveletFilter
    diagonal_details: dict
    approximation: np.ndarray | None
    regions: dict | None = field(default=None, repr=False)
    coefficients: np.ndarray | None = field(default=None, repr=False)

    @property
    def original_side(self) -> int:
        return 2**self.J

    @property
    def levels(self) -> list[int]:
        """Detail level indices from coarsest to finest."""
        return list(range(self.J - self.L, self.J))

    def diagonal_only(self) -> "Decomposition":
        """Copy holding nothing but the diagonal detail regions."""
        return Decomposition(
            self.kind,
            self.J,
            self.L,
            self.filter,
            {j: d.copy() for j, d in self.diagonal_details.items()},
            None,
        )


# ----------------------------------------------------------------------
# decimated transform


def _analysis_step(x, f, axis, highpass=False):
    """One periodic decimated correlation along ``axis``.

    High-pass filters sum to zero, so they are applied to differences
    ``x[2k+t] - x[2k]``; constant input then gives exactly zero detail.
    """
    x = np.moveaxis(x, axis, 0)
    m = x.shape[0]
    out = np.zeros((m // 2,) + x.shape[1:], dtype=np.result_type(x, f))
    base = 2 * np.arange(m // 2)
    anchor = x[base] if highpass else 0
    for t, coef in enumerate(f):
        out += coef * (x[(base + t) % m] - anchor)
    return np.moveaxis(out, 0, axis)


def _synthesis_step(a, d, h, g, axis):
    """Adjoint of the analysis pair (h, g) along ``axis``."""
    a = np.moveaxis(a, axis, 0)
    d = np.moveaxis(d, axis, 0)
    m = 2 * a.shape[0]
    out = np.zeros((m,) + a.shape[1:], dtype=np.result_type(a, d, h))
    base = 2 * np.arange(m // 2)
    for t in range(len(h)):
        # indices (base + t) % m are distinct for fixed t
        out[(base + t) % m] += np.conj(h[t]) * a + np.conj(g[t]) * d
    return np.moveaxis(out, 0, axis)


def dwt2d(signal, filt: WaveletFilter, L: int) -> Decomposition:
    """Periodic 2D Mallat pyramid with ``L`` detail levels."""
    J = side_exponent(signal)
    L = _check_levels(J, L)
    h, g = filt.low_pass, filt.high_pass
    hc, gc = np.conj(h), np.conj(g)
    x = np.array(signal, dtype=np.result_type(np.asarray(signal), h, float))
    n = x.shape[0]
    for _ in range(L):
        block = x[:n, :n]
        lo = _analysis_step(block, h, 0)
        hi = _analysis_step(block, g, 0, highpass=True)
        half = n // 2
        x[:half, :half] = _analysis_step(lo, hc, 1)
        x[:half, half:n] = _analysis_step(lo, gc, 1, highpass=True)
        x[half:n, :half] = _analysis_step(hi, hc, 1)
        x[half:n, half:n] = _analysis_step(hi, gc, 1, highpass=True)
        n = half
    diag = {j: x[2**j : 2 ** (j + 1), 2**j : 2 ** (j + 1)] for j in range(J - L, J)}
    approx = x[: 2 ** (J - L), : 2 ** (J - L)]
    return Decomposition(DWT2D, J, L, filt, diag, approx, coefficients=x)


def inverse_dwt2d(dec: Decomposition) -> np.ndarray:
    """Invert :func:`dwt2d`, honouring any replaced diagonal regions."""
    if dec.kind != DWT2D or dec.coefficients is None:
        raise InputError("inverse_dwt2d needs a full dwt2d decomposition")
    J, L = dec.J, dec.L
    x = np.array(dec.coefficients, copy=True)
    for j, d in dec.diagonal_details.items():
        sl = slice(2**j, 2 ** (j + 1))
        if np.shape(d) != (2**j, 2**j):
            raise InputError(f"diagonal region {j} has shape {np.shape(d)}, expected {(2**j, 2**j)}")
        x[sl, sl] = d
    if dec.approximation is not None:
        a = dec.approximation
        if np.shape(a) != (2 ** (J - L),) * 2:
            raise InputError("approximation region has the wrong shape")
        x[: 2 ** (J - L), : 2 ** (J - L)] = a
    h, g = dec.filter.low_pass, dec.filter.high_pass
    hc, gc = np.conj(h), np.conj(g)
    n = 2 ** (J - L + 1)
    while n <= 2**J:
        half = n // 2
        lo = _synthesis_step(x[:half, :half], x[:half, half:n], hc, gc, 1)
        hi = _synthesis_step(x[half:n, :half], x[half:n, half:n], hc, gc, 1)
        x[:n, :n] = _synthesis_step(lo, hi, h, g, 0)
        n *= 2
    return x


# ----------------------------------------------------------------------
# non-decimated (scale-mixing) transform


def _response(f, n, step):
    """Frequency response of periodic correlation with ``f`` upsampled by ``step``."""
    k = np.arange(n)[:, None]
    t = np.arange(len(f))[None, :]
    return np.exp(2j * np.pi * ((k * t * step) % n) / n) @ np.asarray(f, dtype=complex)


def _chain_responses(f_low, f_high, n, J, L):
    """Per-level 1D responses keyed by level index, ``None`` for the approximation."""
    out = {}
    acc = np.ones(n, dtype=complex)
    for depth in range(1, L + 1):
        step = 2 ** (depth - 1)
        high = _response(f_high, n, step)
        high[0] = 0.0  # wavelets have zero mean; keep constants exactly undetected
        out[J - depth] = acc * high
        acc = acc * _response(f_low, n, step)
    out[None] = acc
    return out


def _weights(J, L):
    """Average-basis synthesis weights ``2**-depth`` per region index."""
    w = {J - depth: 0.5**depth for depth in range(1, L + 1)}
    w[None] = 0.5**L
    return w


def ndwt2d(signal, filt: WaveletFilter, L: int, *, full: bool = True) -> Decomposition:
    """Scale-mixing periodic 2D NDWT.

    Every region is ``N x N``.  With ``full=False`` only the diagonal detail
    regions are computed; such a decomposition feeds the spectra but cannot
    be inverted.
    """
    J = side_exponent(signal)
    L = _check_levels(J, L)
    y = np.asarray(signal)
    n = y.shape[0]
    rows = _chain_responses(filt.low_pass, filt.high_pass, n, J, L)
    cols = _chain_responses(np.conj(filt.low_pass), np.conj(filt.high_pass), n, J, L)
    real = not np.iscomplexobj(y) and not filt.is_complex
    keys = [(r, c) for r in rows for c in cols] if full else [(j, j) for j in range(J - L, J)]
    regions = {}
    if real:
        # Hermitian symmetry lets the half spectrum carry everything
        half = n // 2 + 1
        spectrum = np.fft.rfft2(y)
        for r, c in keys:
            regions[(r, c)] = np.fft.irfft2(spectrum * np.outer(rows[r], cols[c][:half]), s=(n, n))
    else:
        spectrum = np.fft.fft2(y)
        for r, c in keys:
            regions[(r, c)] = np.fft.ifft2(spectrum * np.outer(rows[r], cols[c]))
    diag = {j: regions[(j, j)] for j in range(J - L, J)}
    approx = regions.get((None, None))
    return Decomposition(NDWT2D, J, L, filt, diag, approx, regions=regions if full else None)


def inverse_ndwt2d(dec: Decomposition) -> np.ndarray:
    """Average-basis inverse of :func:`ndwt2d`.

    Diagonal regions are taken from ``dec.diagonal_details`` so that
    replacing entries there is enough to modify the reconstruction.
    """
    if dec.kind != NDWT2D:
        raise InputError("inverse_ndwt2d needs an ndwt2d decomposition")
    if dec.regions is None:
        raise InputError("decomposition holds diagonal regions only and cannot be inverted")
    J, L = dec.J, dec.L
    n = 2**J
    rows = _chain_responses(dec.filter.low_pass, dec.filter.high_pass, n, J, L)
    cols = _chain_responses(np.conj(dec.filter.low_pass), np.conj(dec.filter.high_pass), n, J, L)
    w = _weights(J, L)
    real = not dec.filter.is_complex and not any(
        np.iscomplexobj(v) for v in dec.regions.values()
    )
    half = n // 2 + 1
    acc = np.zeros((n, half if real else n), dtype=complex)
    for (r, c), region in dec.regions.items():
        if r == c and r is not None:
            region = dec.diagonal_details[r]
        if r is None and c is None and dec.approximation is not None:
            region = dec.approximation
        if np.shape(region) != (n, n):
            raise InputError(f"region {(r, c)} has shape {np.shape(region)}, expected {(n, n)}")
        synth = (w[r] * w[c]) * np.outer(np.conj(rows[r]), np.conj(cols[c]))
        if real:
            acc += np.fft.rfft2(region) * synth[:, :half]
        else:
            acc += np.fft.fft2(region) * synth
    return np.fft.irfft2(acc, s=(n, n)) if real else np.fft.ifft2(acc)

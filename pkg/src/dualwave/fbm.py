"""Exact simulation of isotropic 2D fractional Brownian motion.

Fields are sampled on the lattice ``t = (i/N, j/N)``, ``i, j = 0 .. N-1``,
so ``X[0, 0] = X(0) = 0``.  The covariance is

    E[X(t) X(s)] = sigma2_H / 2 * (|t|^2H + |s|^2H - |t - s|^2H).

The default generator is Stein's stationary-embedding construction: a
stationary field with a compactly supported covariance is simulated by
circulant embedding and the origin-anchored field plus a random linear
correction has exactly the fBm covariance on a disc of radius one.  The
target square is mapped into that disc by self-similarity.  A dense
Cholesky generator is kept for small ``N`` as an independent reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft
import scipy.linalg
from scipy.special import gamma

from .errors import DualwaveError, InputError

__all__ = [
    "FbmSpec",
    "EmbeddingError",
    "sigma2_H",
    "fbm_cov",
    "generate_fbm2d",
    "make_rng",
]

CHOLESKY_MAX_N = 64


class EmbeddingError(DualwaveError):
    """The circulant embedding produced materially negative eigenvalues."""


def _check_H(H):
    H = float(H)
    if not 0.0 < H < 1.0:
        raise InputError(f"Hurst exponent must lie in (0, 1), got {H}")
    return H


def sigma2_H(H: float) -> float:
    """Variance scale ``2^-(1+2H) Gamma(1-H) / (pi H Gamma(1+H))``."""
    H = _check_H(H)
    return 2.0 ** (-(1 + 2 * H)) * gamma(1 - H) / (math.pi * H * gamma(1 + H))


def fbm_cov(t, s, H: float) -> float:
    """Covariance of 2D fBm between points ``t`` and ``s``."""
    H = _check_H(H)
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    nt = np.linalg.norm(t, axis=-1) ** (2 * H)
    ns = np.linalg.norm(s, axis=-1) ** (2 * H)
    nd = np.linalg.norm(t - s, axis=-1) ** (2 * H)
    return 0.5 * sigma2_H(H) * (nt + ns - nd)


@dataclass(frozen=True)
class FbmSpec:
    H: float
    N: int
    seed: int = 0

    def __post_init__(self):
        _check_H(self.H)
        n = int(self.N)
        if n != self.N or n < 2 or n & (n - 1):
            raise InputError(f"N must be a power of two >= 2, got {self.N!r}")


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based generator for ``seed`` and an optional stream path.

    Each distinct ``stream`` tuple (for example ``(h_index, replicate)``)
    gets an independent Philox key, so results do not depend on the order
    in which replicates are generated.
    """
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=tuple(int(k) for k in stream))
    return np.random.Generator(np.random.Philox(ss))


# ----------------------------------------------------------------------
# circulant embedding


def _stein_constants(H):
    alpha = 2 * H
    if alpha <= 1.5:
        R, beta, c2 = 1.0, 0.0, alpha / 2
        c0 = 1 - alpha / 2
    else:
        R = 2.0
        beta = alpha * (2 - alpha) / (3 * R * (R**2 - 1))
        c2 = (alpha - beta * (R - 1) ** 2 * (R + 2)) / 2
        c0 = beta * (R - 1) ** 3 + 1 - c2
    return alpha, R, beta, c0, c2


def _stein_psi(r, H):
    alpha, R, beta, c0, c2 = _stein_constants(H)
    out = np.zeros_like(r)
    inner = r <= 1
    out[inner] = c0 - r[inner] ** alpha + c2 * r[inner] ** 2
    if beta:
        outer = (r > 1) & (r < R)
        out[outer] = beta * (R - r[outer]) ** 3 / r[outer]
    return out


# Square side after mapping into the unit disc; pairwise distances stay < 1.
_SHRINK = 1 / math.sqrt(2)


@lru_cache(maxsize=16)
def _embedding(H, N):
    """Square-root eigenvalues of the periodized Stein covariance."""
    _, R, _, _, _ = _stein_constants(H)
    delta = _SHRINK / N
    # torus side T must satisfy T >= R + max offset so aliases vanish on the grid
    m = scipy.fft.next_fast_len(int(math.ceil(R * N / _SHRINK)) + N)
    T = m * delta
    x = np.arange(m) * delta
    cov = np.zeros((m, m))
    for dx in (x, x - T):
        for dy in (x, x - T):
            cov += _stein_psi(np.hypot(dx[:, None], dy[None, :]), H)
    lam = scipy.fft.fft2(cov).real
    floor = -1e-10 * lam.max()
    if lam.min() < floor:
        raise EmbeddingError(
            f"circulant embedding not positive semidefinite (min eigenvalue {lam.min():.3e})"
        )
    root = np.sqrt(np.clip(lam, 0.0, None) / m**2)
    root.setflags(write=False)
    return root


def _circulant(H, N, rng):
    _, _, _, _, c2 = _stein_constants(H)
    root = _embedding(H, N)
    m = root.shape[0]
    noise = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    z = scipy.fft.fft2(root * noise).real[:N, :N]
    u = np.arange(N) * (_SHRINK / N)
    w = rng.standard_normal(2)
    field = z - z[0, 0] + math.sqrt(2 * c2) * (u[:, None] * w[0] + u[None, :] * w[1])
    # field has covariance |u|^2H + |v|^2H - |u-v|^2H on the shrunken square
    return math.sqrt(sigma2_H(H) / 2) * _SHRINK ** (-H) * field


# ----------------------------------------------------------------------
# Cholesky reference


@lru_cache(maxsize=8)
def _cholesky_factor(H, N):
    i, j = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    pts = np.column_stack([i.ravel(), j.ravel()])[1:] / N
    cov = fbm_cov(pts[:, None, :], pts[None, :, :], H)
    factor = scipy.linalg.cholesky(cov, lower=True)
    factor.setflags(write=False)
    return factor


def _cholesky(H, N, rng):
    factor = _cholesky_factor(H, N)
    values = factor @ rng.standard_normal(factor.shape[0])
    return np.concatenate([[0.0], values]).reshape(N, N)


def generate_fbm2d(spec: FbmSpec, method: str = "circulant", rng=None) -> np.ndarray:
    """Draw one ``N x N`` fBm field.

    ``rng`` overrides the generator derived from ``spec.seed``; experiment
    harnesses pass per-replicate streams this way.  ``method`` is
    ``"circulant"`` or ``"cholesky"`` (the latter only for ``N <= 64``).
    """
    if rng is None:
        rng = make_rng(spec.seed)
    H, N = float(spec.H), int(spec.N)
    if method == "circulant":
        return _circulant(H, N, rng)
    if method == "cholesky":
        if N > CHOLESKY_MAX_N:
            raise InputError(f"cholesky generation is limited to N <= {CHOLESKY_MAX_N}")
        return _cholesky(H, N, rng)
    raise InputError(f"unknown fBm method {method!r}")

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualwave.errors import EstimationError, InputError
from dualwave.fbm import FbmSpec, generate_fbm2d, make_rng
from dualwave.filters import FILTER_NAMES, make_filter
from dualwave.spectra import (
    DualSpectraConfig,
    EnergyPool,
    PrimalSpectraConfig,
    diagonal_energies,
    dual_quantiles,
    dual_spectra,
    hurst_from_dual_slope,
    hurst_from_primal_slope,
    loglinear_decomposition,
    primal_spectra,
    wavelet_entropy,
)
from dualwave.wavelet import NDWT2D, Decomposition, dwt2d, ndwt2d

H_GRID = [round(0.1 * i, 1) for i in range(1, 10)]


def _pool(levels, energies):
    levels = np.asarray(levels, dtype=np.int16)
    return EnergyPool(levels, np.asarray(energies, dtype=float), np.unique(levels).astype(np.int64))


def _brute_force_weights(levels, energies, n_q):
    """Type-1 quantiles and per-interval level frequencies with plain loops."""
    s = sorted(energies)
    n = len(s)
    q = [s[0]]
    for i in range(1, n_q + 1):
        p = (i - 0.5) / n_q
        q.append(s[math.ceil(n * p) - 1])
    q.append(s[-1])
    values = sorted(set(levels))
    counts = [[0] * len(values) for _ in range(n_q + 1)]
    for lev, e in zip(levels, energies):
        m = next(m for m in range(1, n_q + 2) if e <= q[m])
        counts[m - 1][values.index(lev)] += 1
    weights = []
    for row in counts:
        total = sum(row)
        weights.append([c / total if total else math.nan for c in row])
    return np.array(q), np.array(weights), np.array([sum(r) for r in counts])


def _fbm(H, N, seed=0):
    return generate_fbm2d(FbmSpec(H, N), rng=make_rng(seed))


class TestSlopeAlgebra:
    def test_primal_inverse(self):
        assert hurst_from_primal_slope(-2.6) == pytest.approx(0.3)

    def test_dual_reported_value(self):
        # reported to four decimals alongside the slope -0.38794
        assert hurst_from_dual_slope(-0.38794) == pytest.approx(0.2889, abs=5e-5)

    def test_theoretical_dual_slope(self):
        assert hurst_from_dual_slope(-1 / 2.6) == pytest.approx(0.3, abs=1e-12)

    def test_dual_map_is_increasing(self):
        # dH/dbeta = 1 / (2 beta^2) > 0
        beta = np.linspace(-0.4999, -1e-3, 2000)
        H = np.array([hurst_from_dual_slope(b) for b in beta])
        assert np.all(np.diff(H) > 0)


class TestExactRecovery:
    @pytest.mark.parametrize("name", FILTER_NAMES)
    def test_primal_and_dual(self, name):
        filt = make_filter(name)
        for H in H_GRID:
            dec = loglinear_decomposition(H, 6, kind="ndwt2d", filt=filt, offset=1.7)
            assert primal_spectra(dec, PrimalSpectraConfig(2, 4)).H_hat == pytest.approx(
                H, abs=1e-9
            )
            for cfg in (DualSpectraConfig(2, 10, 85), DualSpectraConfig(5, 20, 95)):
                assert dual_spectra(dec, cfg).H_hat == pytest.approx(H, abs=1e-9)

    @pytest.mark.parametrize("name", FILTER_NAMES)
    def test_primal_dwt(self, name):
        filt = make_filter(name)
        for H in H_GRID:
            dec = loglinear_decomposition(H, 10, kind="dwt2d", filt=filt, offset=-0.4)
            fit = primal_spectra(dec, PrimalSpectraConfig(2, 8, "dwt2d"))
            assert fit.H_hat == pytest.approx(H, abs=1e-9)

    def test_dual_on_dwt_has_too_few_coarse_coefficients(self):
        # three quarters of all DWT coefficients sit on the finest level, so
        # an interior quantile range sees at most one populated interval
        dec = loglinear_decomposition(0.5, 8, kind="dwt2d")
        with pytest.raises(EstimationError):
            dual_spectra(dec, DualSpectraConfig(2, 10, 85))

    @settings(max_examples=30, deadline=None)
    @given(
        st.floats(0.05, 0.95),
        st.integers(1, 5),
        st.floats(0.5, 40),
        st.floats(5, 55),
    )
    def test_dual_any_interior_setting(self, H, xq, p1, width):
        dec = loglinear_decomposition(H, 6, kind="ndwt2d")
        try:
            fit = dual_spectra(dec, DualSpectraConfig(xq, p1, min(p1 + width, 100)))
        except EstimationError as exc:
            # narrow ranges may hold a single level
            assert "fewer than two" in str(exc)
            return
        assert fit.H_hat == pytest.approx(H, abs=1e-9)

    def test_end_interval_breaks_exactness(self):
        # [q0, q1] collapses to one energy, so its midpoint lacks the constant
        # offset log2((1 + 2^-(2H+2)) / 2) carried by every interior midpoint
        H = 0.5
        dec = loglinear_decomposition(H, 6, kind="ndwt2d")
        fit = dual_spectra(dec, DualSpectraConfig(1, 0, 25))
        e = 2.0 ** (-(2 * H + 2) * np.arange(6))
        np.testing.assert_allclose(fit.points[0], [np.log2(e[5]), 5])
        np.testing.assert_allclose(fit.points[1], [np.log2((e[5] + e[4]) / 2), 4])
        slope = -1 / (fit.points[1, 0] - fit.points[0, 0])
        assert fit.H_hat == pytest.approx(-(1 / slope + 2) / 2, abs=1e-12)
        assert abs(fit.H_hat - H) > 0.1


class TestDiagonalEnergies:
    def test_constant_input_is_zero(self):
        pool = diagonal_energies(ndwt2d(np.ones((16, 16)), make_filter("haar"), 4, full=False))
        assert np.all(pool.energies == 0)

    def test_entry_counts(self):
        x = _fbm(0.5, 32)
        assert diagonal_energies(ndwt2d(x, make_filter("haar"), 5, full=False)).energies.size == 5 * 32**2
        assert diagonal_energies(dwt2d(x, make_filter("haar"), 5)).energies.size == sum(
            4**j for j in range(5)
        )

    def test_complex_modulus(self):
        dec = ndwt2d(_fbm(0.5, 16), make_filter("conf6"), 4, full=False)
        pool = diagonal_energies(dec)
        d = dec.diagonal_details[0]
        np.testing.assert_allclose(pool.energies[: d.size], np.abs(d.ravel()) ** 2)
        assert np.all(pool.levels[: d.size] == 0)


class TestDualQuantiles:
    def test_median_split(self):
        pool = dual_quantiles(_pool([0, 1, 2, 3], [1.0, 2.0, 4.0, 8.0]), 1)
        assert pool.quantiles.tolist() == [1.0, 2.0, 8.0]
        assert pool.interval_counts.tolist() == [2, 2]
        np.testing.assert_allclose(pool.midpoints, np.log2([1.5, 5.0]))
        np.testing.assert_allclose(pool.mean_levels, [0.5, 2.5])

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10**6), st.integers(1, 8), st.integers(20, 80))
    def test_matches_brute_force(self, seed, n_q, n):
        rng = np.random.default_rng(seed)
        levels = rng.integers(3, 7, n)
        # rounding creates ties, including ties on quantile boundaries
        energies = np.round(rng.exponential(size=n) * 2.0 ** -levels, 2) + 0.01
        if energies.min() == energies.max():
            return
        pool = dual_quantiles(_pool(levels, energies), n_q)
        q, w, counts = _brute_force_weights(levels.tolist(), energies.tolist(), n_q)
        np.testing.assert_array_equal(pool.quantiles, q)
        np.testing.assert_array_equal(pool.interval_counts, counts)
        np.testing.assert_allclose(pool.level_weights, w, equal_nan=True)
        full = counts > 0
        np.testing.assert_allclose(pool.level_weights[full].sum(axis=1), 1.0)

    def test_balanced_counts_and_increasing_midpoints(self):
        dec = ndwt2d(_fbm(0.4, 64), make_filter("haar"), 6, full=False)
        pool = dual_quantiles(diagonal_energies(dec), 12)
        inner = pool.interval_counts[1:-1]
        assert inner.max() / inner.min() <= 1.05
        assert np.all(np.diff(pool.midpoints) > 0)
        assert pool.quantiles[0] == pool.energies.min()
        assert pool.quantiles[-1] == pool.energies.max()

    def test_zero_energies_excluded_and_counted(self):
        pool = dual_quantiles(_pool([0, 0, 1, 1, 2], [0.0, 1.0, 2.0, 0.0, 4.0]), 1)
        assert pool.n_zero == 2
        assert pool.energies.size == 3

    def test_degenerate_pool(self):
        with pytest.raises(EstimationError):
            dual_quantiles(_pool([0, 1], [2.0, 2.0]), 1)
        with pytest.raises(EstimationError):
            dual_quantiles(_pool([0, 1], [0.0, 2.0]), 1)


class TestPrimalSpectra:
    def test_points_and_ols(self):
        dec = ndwt2d(_fbm(0.6, 64, 3), make_filter("db2"), 6, full=False)
        fit = primal_spectra(dec, PrimalSpectraConfig(1, 4))
        expected = [math.log2(np.mean(dec.diagonal_details[j] ** 2)) for j in range(6)]
        np.testing.assert_allclose(fit.points[:, 1], expected, rtol=1e-14)
        slope, intercept = np.polyfit(fit.points[1:5, 0], fit.points[1:5, 1], 1)
        assert fit.slope == pytest.approx(slope, rel=1e-12)
        assert fit.intercept == pytest.approx(intercept, rel=1e-12)
        assert fit.used_mask.tolist() == [False, True, True, True, True, False]
        assert fit.method == "primal_ndwt"

    def test_fit_range_counted_from_coarsest(self):
        dec = loglinear_decomposition(0.4, 8, L=5)
        fit = primal_spectra(dec, PrimalSpectraConfig(0, 4))
        assert fit.points[fit.used_mask, 0].tolist() == [3, 4, 5, 6, 7]

    def test_range_beyond_levels(self):
        dec = loglinear_decomposition(0.4, 6)
        with pytest.raises(InputError):
            primal_spectra(dec, PrimalSpectraConfig(2, 6))

    def test_zero_level_raises(self):
        with pytest.raises(EstimationError):
            primal_spectra(ndwt2d(np.ones((32, 32)), make_filter("haar"), 5, full=False),
                           PrimalSpectraConfig(1, 3))

    @pytest.mark.parametrize("bad", [dict(j1=3, j2=3), dict(j1=-1, j2=2), dict(transform="x")])
    def test_config_validation(self, bad):
        with pytest.raises(InputError):
            PrimalSpectraConfig(**bad)


class TestDualSpectra:
    def test_fbm_estimate_is_plausible(self):
        dec = ndwt2d(_fbm(0.3, 256, 1), make_filter("haar"), 8, full=False)
        fit = dual_spectra(dec, DualSpectraConfig(2, 10, 85))
        assert 0.15 < fit.H_hat < 0.45
        assert fit.method == "dual"
        assert fit.H_hat == pytest.approx(hurst_from_dual_slope(fit.slope))

    def test_fit_uses_interior_intervals_only(self):
        dec = loglinear_decomposition(0.5, 6)
        pool = dual_quantiles(diagonal_energies(dec), 12)
        fit = dual_spectra(dec, DualSpectraConfig(2, 10, 85))
        used = np.flatnonzero(fit.used_mask)
        lo, hi = pool.probabilities[:-1], pool.probabilities[1:]
        keep = (lo >= 0.1 - 1e-12) & (hi <= 0.85 + 1e-12)
        nonempty = pool.interval_counts > 0
        assert used.tolist() == np.flatnonzero(keep[nonempty]).tolist()

    def test_diagonal_only_copy_gives_identical_fit(self):
        dec = ndwt2d(_fbm(0.7, 64, 2), make_filter("haar"), 6)
        a = dual_spectra(dec)
        b = dual_spectra(dec.diagonal_only())
        assert a.to_dict() == b.to_dict()

    @pytest.mark.parametrize("scale", [3.0, 0.01])
    def test_scale_invariance(self, scale):
        x = _fbm(0.45, 128, 4)
        filt = make_filter("haar")
        base = ndwt2d(x, filt, 7, full=False)
        scaled = ndwt2d(scale * x, filt, 7, full=False)
        assert dual_spectra(scaled).H_hat == pytest.approx(dual_spectra(base).H_hat, abs=1e-9)
        cfg = PrimalSpectraConfig(2, 5)
        assert primal_spectra(scaled, cfg).H_hat == pytest.approx(
            primal_spectra(base, cfg).H_hat, abs=1e-9
        )

    def test_non_negative_slope_raises_with_fit(self):
        n = 16
        signs = np.where(np.indices((n, n)).sum(axis=0) % 2 == 0, 1.0, -1.0)
        diag = {j: 2.0**j * signs for j in range(4)}  # energy grows with level
        dec = Decomposition(NDWT2D, 4, 4, make_filter("haar"), diag, None)
        with pytest.raises(EstimationError) as info:
            dual_spectra(dec)
        assert info.value.fit is not None
        assert info.value.fit.slope > 0
        assert math.isnan(info.value.fit.H_hat)

    def test_serialization(self, tmp_path):
        fit = dual_spectra(loglinear_decomposition(0.3, 6))
        data = json.loads(fit.to_json(tmp_path / "f.json"))
        assert data["H_hat"] == pytest.approx(0.3)
        assert data["method"] == "dual"
        assert len(data["points"]) == len(data["used_mask"])
        assert data["config"]["n_q"] == 12
        fit.to_csv(tmp_path / "f.csv")
        back = np.loadtxt(tmp_path / "f.csv", delimiter=",", skiprows=1)
        np.testing.assert_array_equal(back, fit.points)

    @pytest.mark.parametrize("bad", [dict(xq=0), dict(xq=1.5), dict(p1=50, p2=40), dict(p2=101)])
    def test_config_validation(self, bad):
        with pytest.raises(InputError):
            DualSpectraConfig(**bad)


class TestEntropy:
    def test_uniform_energies(self):
        dec = loglinear_decomposition(0.5, 5)
        assert wavelet_entropy(dec) == pytest.approx(math.log2(32 * 32), abs=1e-12)

    def test_single_nonzero(self):
        d = np.zeros((8, 8))
        d[2, 3] = 5.0
        dec = Decomposition(NDWT2D, 3, 3, make_filter("haar"), {0: d, 1: d, 2: d}, None)
        assert wavelet_entropy(dec) == 0.0

    def test_direct_summation_oracle(self):
        dec = ndwt2d(_fbm(0.4, 32, 5), make_filter("symmlet4"), 5, full=False)
        e = [float(v) ** 2 for v in dec.diagonal_details[4].ravel()]
        total = math.fsum(e)
        oracle = -math.fsum(x / total * math.log2(x / total) for x in e if x > 0)
        assert wavelet_entropy(dec) == pytest.approx(oracle, abs=1e-10)
        assert 0 < wavelet_entropy(dec) < math.log2(32 * 32)

    def test_zero_level_and_missing_level(self):
        dec = ndwt2d(np.ones((8, 8)), make_filter("haar"), 3, full=False)
        with pytest.raises(EstimationError):
            wavelet_entropy(dec)
        with pytest.raises(InputError):
            wavelet_entropy(dec, level=7)

import numpy as np
import pytest

from eegfusion.errors import ParameterError
from eegfusion.features import (
    BNN_SCHEMA,
    SVM_SCHEMA,
    BandSpec,
    DELTA_BAND,
    FeatureVector,
    extract_bnn_features,
    extract_svm_features,
    iav,
    mavs,
    nleo,
    nleo_mean,
    relative_band_power,
    rms,
    total_spectral_energy,
    zero_crossings,
)
from eegfusion.signal_core import Epoch, TimeSeries

from oracles import (
    naive_dft,
    naive_iav,
    naive_mavs,
    naive_nleo,
    naive_relative_band_power,
    naive_rms,
    naive_total_spectral_energy,
    naive_zero_crossings,
)


def as_epoch(samples, rate=256.0):
    return Epoch(TimeSeries(np.asarray(samples, dtype=float), rate=rate))


class TestNleo:
    def test_constant_signal_cancels(self):
        assert np.array_equal(nleo([5.0, 5, 5, 5]), np.zeros(4))

    def test_direct_evaluation(self):
        # unit sinusoid at w = pi/2 sampled at the quarter points
        assert np.allclose(nleo([0.0, 1, 0, -1, 0]), [0, 1, 1, 1, 0])

    def test_impulse(self):
        assert np.allclose(nleo([0.0, 0, 1, 0, 0]), [0, 0, 1, 0, 0])

    def test_too_short(self):
        with pytest.raises(ParameterError):
            nleo([1.0, 2.0])

    def test_sinusoid_identity(self):
        # nleo of A*sin(w*j + phi) equals A^2 * sin(w)^2 at every interior
        # index (product-to-sum identity), independent of j and phi
        rng = np.random.default_rng(42)
        for _ in range(200):
            amp = rng.uniform(0.1, 50.0)
            omega = rng.uniform(0.01, np.pi - 0.01)
            phi = rng.uniform(0, 2 * np.pi)
            j = np.arange(rng.integers(3, 200))
            values = nleo(amp * np.sin(omega * j + phi))[1:-1]
            expected = amp**2 * np.sin(omega) ** 2
            assert np.allclose(values, expected, rtol=1e-9, atol=1e-12 * amp**2)


class TestNleoMean:
    def test_interior_mean(self):
        assert nleo_mean([0.0, 1, 0, -1, 0]) == pytest.approx(1.0)

    def test_constant(self):
        assert nleo_mean([3.0, 3, 3, 3]) == 0.0

    def test_quadratic_homogeneity(self):
        rng = np.random.default_rng(0)
        y = rng.normal(size=32)
        for c in (2.0, -3.0, 0.5):
            assert nleo_mean(c * y) == pytest.approx(c**2 * nleo_mean(y), rel=1e-12)


class TestTimeDomain:
    def test_rms_values(self):
        assert rms([1.0, 1, 1, 1]) == 1.0
        assert rms([3.0, -4.0]) == pytest.approx(np.sqrt(25 / 2))
        assert rms([0.0, 0, 0]) == 0.0

    def test_iav_values(self):
        assert iav([-1.0, 2, -3]) == 6.0
        assert iav([0.0, 0]) == 0.0

    def test_absolute_homogeneity(self):
        rng = np.random.default_rng(1)
        y = rng.normal(size=64)
        for c in (2.0, -5.0, 0.1):
            assert rms(c * y) == pytest.approx(abs(c) * rms(y), rel=1e-12)
            assert iav(c * y) == pytest.approx(abs(c) * iav(y), rel=1e-12)
            assert zero_crossings(3.0 * y) == zero_crossings(y)

    def test_mavs_values(self):
        assert mavs([1.0, -2, 4]) == pytest.approx(1.5)
        assert mavs([7.0, 7, 7]) == 0.0
        assert mavs([0.0, 5.0]) == 5.0

    def test_mavs_telescopes(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            y = rng.normal(size=int(rng.integers(2, 100)))
            closed = (abs(y[-1]) - abs(y[0])) / (len(y) - 1)
            assert mavs(y) == pytest.approx(closed, rel=1e-9, abs=1e-12)

    def test_zero_crossings_values(self):
        assert zero_crossings([1.0, -1, 1, -1]) == 3
        assert zero_crossings([0.5, 2.0, 1.0]) == 0
        # zero-touching samples count: both products with the 0 are 0
        assert zero_crossings([1.0, 0.0, 1.0]) == 2

    def test_short_epochs_rejected(self):
        with pytest.raises(ParameterError):
            mavs([1.0])
        with pytest.raises(ParameterError):
            zero_crossings([1.0])


class TestSpectral:
    def test_parseval(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            y = rng.normal(size=int(rng.integers(2, 300)))
            assert total_spectral_energy(y) == pytest.approx(np.sum(y**2), rel=1e-9)

    def test_zeros_and_impulse(self):
        assert total_spectral_energy([0.0, 0, 0]) == 0.0
        assert total_spectral_energy([1.0, 0, 0, 0]) == pytest.approx(1.0)

    def test_delta_sinusoid_lands_in_band(self):
        t = np.arange(512) / 256.0
        epoch = as_epoch(np.sin(2 * np.pi * 2.0 * t), rate=256.0)
        assert relative_band_power(epoch, DELTA_BAND) >= 0.99

    def test_fast_sinusoid_misses_band(self):
        t = np.arange(512) / 256.0
        epoch = as_epoch(np.sin(2 * np.pi * 20.0 * t), rate=256.0)
        assert relative_band_power(epoch, DELTA_BAND) <= 0.01

    def test_all_zero_epoch_is_zero(self):
        assert relative_band_power(as_epoch(np.zeros(64))) == 0.0

    def test_constant_epoch_scores_zero(self):
        # DC is excluded from every band but kept in the total
        assert relative_band_power(as_epoch(np.full(64, 3.0))) == 0.0

    def test_band_above_nyquist_rejected(self):
        with pytest.raises(ParameterError):
            relative_band_power(as_epoch(np.ones(8), rate=100.0), BandSpec(10, 60))

    def test_band_partition_sums_to_one(self):
        # disjoint partition of [0, Nyquist] on zero-mean signals
        rng = np.random.default_rng(4)
        edges = [0.0, 4.0, 12.0, 30.0, 64.0, 128.0]
        bands = [BandSpec(a, b) for a, b in zip(edges[:-1], edges[1:])]
        for _ in range(20):
            y = rng.normal(size=int(rng.integers(16, 200)))
            y -= y.mean()
            epoch = as_epoch(y, rate=256.0)
            total = sum(relative_band_power(epoch, band) for band in bands)
            assert total == pytest.approx(1.0, rel=1e-9)
            for band in bands:
                assert 0.0 <= relative_band_power(epoch, band) <= 1.0

    def test_bad_band_spec(self):
        with pytest.raises(ParameterError):
            BandSpec(4.0, 1.0)


class TestBruteForceAgreement:
    """Every feature op against an independent naive re-implementation."""

    def test_1000_random_epochs(self):
        rng = np.random.default_rng(2024)
        rate = 256.0
        for _ in range(1000):
            n = int(rng.integers(3, 513))
            y = rng.normal(scale=rng.uniform(0.1, 20.0), size=n)
            epoch = as_epoch(y, rate=rate)
            oracle_nleo = naive_nleo(y)
            assert np.allclose(nleo(y), oracle_nleo, rtol=1e-9, atol=1e-12)
            interior = oracle_nleo[1:-1]
            assert nleo_mean(y) == pytest.approx(
                float(np.sum(interior)) / len(interior), rel=1e-9, abs=1e-12
            )
            assert rms(y) == pytest.approx(naive_rms(y), rel=1e-9)
            assert iav(y) == pytest.approx(naive_iav(y), rel=1e-9)
            assert mavs(y) == pytest.approx(naive_mavs(y), rel=1e-9, abs=1e-12)
            assert zero_crossings(y) == naive_zero_crossings(y)
            spectrum = naive_dft(y)
            assert total_spectral_energy(y) == pytest.approx(
                naive_total_spectral_energy(y, spectrum), rel=1e-9
            )
            assert relative_band_power(epoch, DELTA_BAND) == pytest.approx(
                naive_relative_band_power(y, rate, 0.5, 4.0, spectrum),
                rel=1e-9,
                abs=1e-12,
            )


class TestExtractors:
    def test_svm_schema_and_values(self):
        epoch = as_epoch(np.full(64, 2.0))
        fv = extract_svm_features(epoch)
        assert fv.schema == SVM_SCHEMA
        assert fv.values[0] == 0.0  # constant: nleo vanishes
        assert fv.values[1] == pytest.approx(2.0)  # rms = c
        assert fv.values[2] == pytest.approx(64 * 4.0)  # Parseval: m * c^2
        assert fv.values[3] == 0.0  # DC convention

    def test_clinical_fusion_appends(self):
        fv = extract_svm_features(as_epoch(np.sin(np.arange(32))), clinical=[37.2, 9.1])
        assert len(fv) == 6
        assert fv.schema[:4] == SVM_SCHEMA
        assert fv.schema[4:] == ("clin_0", "clin_1")
        assert np.array_equal(fv.clinical, [37.2, 9.1])

    def test_bnn_vector(self):
        fv = extract_bnn_features([1.0, -2.0, 4.0])
        assert fv.schema == BNN_SCHEMA
        assert fv.values[0] == pytest.approx(np.sqrt(21 / 3))
        assert fv.values[1] == 7.0
        assert fv.values[2] == pytest.approx(1.5)
        assert fv.values[3] == 2.0

    def test_bnn_zeros_convention(self):
        fv = extract_bnn_features(np.zeros(10))
        assert np.array_equal(fv.values, [0.0, 0.0, 0.0, 9.0])

    def test_feature_vector_invariants(self):
        with pytest.raises(ParameterError):
            FeatureVector(values=[1.0, 2.0], schema=("a",))
        with pytest.raises(ParameterError):
            FeatureVector(values=[np.nan], schema=("a",))

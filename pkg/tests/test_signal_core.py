import numpy as np
import pytest

from eegfusion.errors import DataError, ParameterError
from eegfusion.signal_core import (
    ClassLabel,
    Epoch,
    TimeSeries,
    internal_labels,
    validate,
    window,
)


def make_series(n, rate=256.0, subject="s0"):
    return TimeSeries(np.arange(n, dtype=float), rate=rate, subject_id=subject)


class TestValidate:
    def test_clean_series_passes_through(self):
        s = TimeSeries([1.0, 2.0], rate=256.0)
        assert validate(s) is s

    def test_nan_sample_reports_first_bad_index(self):
        samples = np.arange(6, dtype=float)
        samples[3] = np.nan
        s = TimeSeries(samples, rate=256.0)
        with pytest.raises(DataError, match="index 3"):
            validate(s)

    def test_inf_sample_rejected(self):
        s = TimeSeries([0.0, np.inf], rate=100.0)
        with pytest.raises(DataError):
            validate(s)

    def test_zero_rate_rejected(self):
        with pytest.raises(ParameterError):
            validate(TimeSeries([1.0, 2.0], rate=0.0))

    def test_samples_are_immutable(self):
        s = make_series(4)
        with pytest.raises(ValueError):
            s.samples[0] = 99.0


class TestWindow:
    def test_count_formula(self):
        # n=10, length=4, hop=2 -> starts 0, 2, 4, 6
        epochs = window(make_series(10), length=4, hop=2)
        assert [e.start_index for e in epochs] == [0, 2, 4, 6]

    def test_exact_fit_single_epoch(self):
        assert len(window(make_series(4), length=4, hop=1)) == 1

    def test_partial_tail_dropped(self):
        # n=5, length=4, hop=4: only the epoch at 0 fits
        epochs = window(make_series(5), length=4, hop=4)
        assert len(epochs) == 1
        assert epochs[0].start_index == 0

    def test_epochs_stay_inside_series(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            n = int(rng.integers(3, 200))
            length = int(rng.integers(3, n + 1))
            hop = int(rng.integers(1, n + 1))
            for e in window(make_series(n), length, hop):
                assert e.start_index + e.length <= n

    def test_non_overlapping_windows_reconstruct_prefix(self):
        s = make_series(25)
        epochs = window(s, length=7)  # hop defaults to length
        rebuilt = np.concatenate([e.samples for e in epochs])
        assert np.array_equal(rebuilt, s.samples[: len(rebuilt)])

    def test_bad_parameters(self):
        with pytest.raises(ParameterError):
            window(make_series(10), length=2, hop=1)
        with pytest.raises(ParameterError):
            window(make_series(10), length=4, hop=0)
        with pytest.raises(ParameterError):
            window(make_series(3), length=4, hop=1)


class TestEpoch:
    def test_minimum_length(self):
        with pytest.raises(ParameterError):
            Epoch(make_series(10), start_index=0, length=2)

    def test_overrun_rejected(self):
        with pytest.raises(ParameterError):
            Epoch(make_series(10), start_index=8, length=3)

    def test_samples_view(self):
        e = Epoch(make_series(10), start_index=2, length=4)
        assert np.array_equal(e.samples, [2.0, 3.0, 4.0, 5.0])
        assert e.rate == 256.0


class TestClassLabel:
    def test_display_roundtrip(self):
        for d in (-2, 2):
            assert ClassLabel.from_display(d).display_value == d

    def test_internal_values(self):
        assert ClassLabel(1).display_value == 2
        assert ClassLabel(-1).display_value == -2

    def test_coerce_both_codings(self):
        assert ClassLabel.coerce(2).value == 1
        assert ClassLabel.coerce(-1).value == -1

    def test_invalid_labels(self):
        with pytest.raises(ParameterError):
            ClassLabel(0)
        with pytest.raises(ParameterError):
            ClassLabel.from_display(1)

    def test_vectorized_normalization(self):
        assert internal_labels([2, -2, 1, -1]).tolist() == [1, -1, 1, -1]

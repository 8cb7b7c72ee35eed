"""Per-epoch EEG features.

Two fixed quadruples feed the two classifier paths:

* margin-classifier path: mean nonlinear energy, RMS, total spectral
  energy, and relative delta-band power (schema ``SVM_SCHEMA``);
* network path: RMS, integrated absolute value, mean absolute value
  slope, and zero crossings (schema ``BNN_SCHEMA``).

All functions accept an :class:`~eegfusion.signal_core.Epoch` or a plain
1-D array; band power needs a sampling rate and therefore an Epoch (or an
explicit ``rate=``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .signal_core import Epoch

SVM_SCHEMA = ("nleo_mean", "rms", "spec_energy", "rel_delta")
BNN_SCHEMA = ("rms", "iav", "mavs", "zc")


def _samples(epoch) -> np.ndarray:
    if isinstance(epoch, Epoch):
        return epoch.samples
    arr = np.asarray(epoch, dtype=np.float64)
    if arr.ndim != 1:
        raise ParameterError(f"expected a 1-D signal, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class BandSpec:
    """A half-open frequency band [low_hz, high_hz)."""

    low_hz: float
    high_hz: float

    def __post_init__(self):
        if self.low_hz < 0 or self.high_hz <= self.low_hz:
            raise ParameterError(
                f"band must satisfy 0 <= low < high, got [{self.low_hz}, {self.high_hz})"
            )


#: Default delta band.  Elevated delta fraction is the spectral signature
#: of injured cortex this pipeline keys on.
DELTA_BAND = BandSpec(0.5, 4.0)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """Ordered features with a named schema, optionally fused with
    clinical covariates (covariate names are appended to the schema)."""

    values: np.ndarray
    schema: tuple
    source_epoch: Epoch | None = None
    clinical: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "schema", tuple(self.schema))
        if len(values) != len(self.schema):
            raise ParameterError(
                f"{len(values)} values for {len(self.schema)} schema names"
            )
        if not np.isfinite(values).all():
            raise ParameterError("feature values must be finite")

    def __len__(self):
        return len(self.values)


def nleo(epoch) -> np.ndarray:
    """Nonlinear energy u[j]^2 - u[j-1]*u[j+1]; zero at both boundaries."""
    u = _samples(epoch)
    if len(u) < 3:
        raise ParameterError(f"nleo needs length >= 3, got {len(u)}")
    out = np.zeros_like(u)
    out[1:-1] = u[1:-1] ** 2 - u[:-2] * u[2:]
    return out


def nleo_mean(epoch) -> float:
    """Mean nonlinear energy over interior samples (boundaries excluded).

    Tracks amplitude-frequency energy, so it reacts to both intensity and
    frequency changes; for A*sin(w*j + phi) it equals A^2*sin^2(w)."""
    return float(np.mean(nleo(epoch)[1:-1]))


def rms(epoch) -> float:
    """Root mean square sqrt(mean(y^2))."""
    y = _samples(epoch)
    if len(y) == 0:
        raise ParameterError("rms of an empty epoch")
    return float(np.sqrt(np.mean(y**2)))


def iav(epoch) -> float:
    """Integrated absolute value sum(|y|)."""
    y = _samples(epoch)
    if len(y) == 0:
        raise ParameterError("iav of an empty epoch")
    return float(np.sum(np.abs(y)))


def mavs(epoch) -> float:
    """Mean slope of the absolute signal.

    Averages |y[s+1]| - |y[s]| over the m-1 valid steps, which telescopes
    to (|y[m-1]| - |y[0]|) / (m-1).
    """
    y = _samples(epoch)
    if len(y) < 2:
        raise ParameterError(f"mavs needs length >= 2, got {len(y)}")
    a = np.abs(y)
    return float(np.mean(np.diff(a)))


def zero_crossings(epoch) -> int:
    """Count of steps with -y[s]*y[s+1] >= 0.

    The sign gate counts 0 as a crossing, so zero-touching samples are
    counted; an all-zero epoch therefore scores m-1.
    """
    y = _samples(epoch)
    if len(y) < 2:
        raise ParameterError(f"zero_crossings needs length >= 2, got {len(y)}")
    return int(np.count_nonzero(-y[:-1] * y[1:] >= 0))


def _taper_window(n: int, taper: str) -> np.ndarray | None:
    if taper == "none":
        return None
    if taper == "hann":
        return np.hanning(n)
    raise ParameterError(f"unknown taper {taper!r} (expected 'none' or 'hann')")


def power_spectrum(epoch, taper: str = "none"):
    """One-sided power per DFT bin, normalized so the bins sum to sum(y^2).

    Returns ``(power, freqs)``; symmetric bins are folded (doubled) so the
    one-sided sum matches the time-domain energy exactly (Parseval).
    ``freqs`` is in Hz when the input carries a rate, otherwise in cycles
    per sample.
    """
    y = _samples(epoch)
    n = len(y)
    if n < 2:
        raise ParameterError(f"spectrum needs length >= 2, got {n}")
    win = _taper_window(n, taper)
    if win is not None:
        y = y * win
    spectrum = np.fft.rfft(y)
    power = np.abs(spectrum) ** 2 / n
    # fold the negative-frequency half onto every bin except DC (and
    # Nyquist when n is even)
    fold = np.full(len(power), 2.0)
    fold[0] = 1.0
    if n % 2 == 0:
        fold[-1] = 1.0
    power = power * fold
    rate = epoch.rate if isinstance(epoch, Epoch) else 1.0
    freqs = np.fft.rfftfreq(n, d=1.0 / rate)
    return power, freqs


def total_spectral_energy(epoch, taper: str = "none") -> float:
    """Total energy of the DFT, normalized to equal sum(y^2) (Parseval)."""
    power, _ = power_spectrum(epoch, taper=taper)
    return float(np.sum(power))


def relative_band_power(
    epoch, band: BandSpec = DELTA_BAND, rate: float | None = None, taper: str = "none"
) -> float:
    """Fraction of spectral power inside ``band``.

    The DC bin never counts toward the band but stays in the total, so a
    constant signal scores 0.  A bin exactly at Nyquist belongs to a band
    whose upper edge reaches Nyquist.  An all-zero epoch scores 0 (the
    0/0 convention).
    """
    if isinstance(epoch, Epoch):
        rate = epoch.rate
    elif rate is None:
        raise ParameterError("relative_band_power needs an Epoch or explicit rate=")
    nyquist = rate / 2.0
    if band.high_hz > nyquist + 1e-12:
        raise ParameterError(
            f"band upper edge {band.high_hz} Hz exceeds Nyquist {nyquist} Hz"
        )
    power, _ = power_spectrum(epoch, taper=taper)
    freqs = np.fft.rfftfreq(len(_samples(epoch)), d=1.0 / rate)
    total = float(np.sum(power))
    if total == 0.0:
        return 0.0
    mask = (freqs >= band.low_hz) & (freqs < band.high_hz)
    if band.high_hz >= nyquist - 1e-12:
        mask |= np.isclose(freqs, nyquist)
    mask &= freqs > 0.0
    return float(np.sum(power[mask]) / total)


def extract_svm_features(
    epoch,
    clinical=None,
    band: BandSpec = DELTA_BAND,
    clinical_names=None,
    taper: str = "none",
) -> FeatureVector:
    """The margin-classifier quadruple, plus clinical covariates when given."""
    values = [
        nleo_mean(epoch),
        rms(epoch),
        total_spectral_energy(epoch, taper=taper),
        relative_band_power(epoch, band=band, taper=taper),
    ]
    schema = list(SVM_SCHEMA)
    clin = None
    if clinical is not None:
        clin = np.asarray(clinical, dtype=np.float64)
        if clin.ndim != 1:
            raise ParameterError("clinical covariates must be a flat vector")
        names = (
            list(clinical_names)
            if clinical_names is not None
            else [f"clin_{i}" for i in range(len(clin))]
        )
        if len(names) != len(clin):
            raise ParameterError("clinical names/values length mismatch")
        values.extend(clin.tolist())
        schema.extend(names)
    return FeatureVector(
        values=np.array(values),
        schema=tuple(schema),
        source_epoch=epoch if isinstance(epoch, Epoch) else None,
        clinical=clin,
    )


def extract_bnn_features(epoch) -> FeatureVector:
    """The network-path quadruple [rms, iav, mavs, zc] in fixed order."""
    values = np.array(
        [rms(epoch), iav(epoch), mavs(epoch), float(zero_crossings(epoch))]
    )
    return FeatureVector(
        values=values,
        schema=BNN_SCHEMA,
        source_epoch=epoch if isinstance(epoch, Epoch) else None,
    )

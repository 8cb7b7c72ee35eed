"""Core time-series containers, windowing, and the label convention.

Everything here is immutable after construction and safe to share across
threads; the operations are pure functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ParameterError

#: Internal binary labels.  The on-disk / reporting convention is +/-2
#: ("display" labels); internally everything runs on +/-1 because label
#: scaling only rescales the SVM margin, never the decision argmax.
POSITIVE = 1
NEGATIVE = -1


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """A uniformly sampled single-channel segment in microvolts."""

    samples: np.ndarray
    rate: float
    subject_id: str = ""
    channel: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ParameterError(f"samples must be 1-D, got shape {samples.shape}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "rate", float(self.rate))

    def __len__(self):
        return len(self.samples)


def validate(series: TimeSeries) -> TimeSeries:
    """Check finiteness and rate; return the series unchanged if clean."""
    if series.rate <= 0:
        raise ParameterError(f"sampling rate must be > 0, got {series.rate}")
    finite = np.isfinite(series.samples)
    if not finite.all():
        idx = int(np.argmin(finite))
        raise DataError(
            f"non-finite sample at index {idx}"
            + (f" (subject {series.subject_id})" if series.subject_id else "")
        )
    if len(series) == 0:
        raise DataError("series has no samples")
    return series


@dataclass(frozen=True, eq=False)
class Epoch:
    """A contiguous window into a parent :class:`TimeSeries`.

    Minimum length is 3 so the nonlinear energy operator has one neighbor
    on each side of every interior sample.
    """

    series: TimeSeries
    start_index: int = 0
    length: int = field(default=-1)

    def __post_init__(self):
        n = len(self.series)
        length = self.length if self.length >= 0 else n
        object.__setattr__(self, "length", int(length))
        object.__setattr__(self, "start_index", int(self.start_index))
        if self.start_index < 0:
            raise ParameterError("start_index must be >= 0")
        if self.length < 3:
            raise ParameterError(f"epoch length must be >= 3, got {self.length}")
        if self.start_index + self.length > n:
            raise ParameterError(
                f"epoch [{self.start_index}, {self.start_index + self.length}) "
                f"overruns series of length {n}"
            )

    @property
    def samples(self) -> np.ndarray:
        return self.series.samples[self.start_index : self.start_index + self.length]

    @property
    def rate(self) -> float:
        return self.series.rate

    @property
    def subject_id(self) -> str:
        return self.series.subject_id

    def __len__(self):
        return self.length


def window(series: TimeSeries, length: int, hop: int | None = None) -> list[Epoch]:
    """Tile ``series`` with fixed-size epochs; a partial tail is dropped.

    ``hop`` defaults to ``length`` (non-overlapping).  The epoch count is
    ``floor((n - length) / hop) + 1``.
    """
    if hop is None:
        hop = length
    n = len(series)
    if length < 3:
        raise ParameterError(f"window length must be >= 3, got {length}")
    if hop < 1:
        raise ParameterError(f"hop must be >= 1, got {hop}")
    if length > n:
        raise ParameterError(f"window length {length} exceeds series length {n}")
    count = (n - length) // hop + 1
    return [Epoch(series, start_index=i * hop, length=length) for i in range(count)]


@dataclass(frozen=True)
class ClassLabel:
    """Binary outcome label; internal value +/-1, reported as +/-2."""

    value: int

    def __post_init__(self):
        if self.value not in (NEGATIVE, POSITIVE):
            raise ParameterError(f"internal label must be +/-1, got {self.value}")

    @property
    def display_value(self) -> int:
        return 2 * self.value

    @classmethod
    def from_display(cls, display: int) -> "ClassLabel":
        if display not in (-2, 2):
            raise ParameterError(f"display label must be +/-2, got {display}")
        return cls(display // 2)

    @classmethod
    def coerce(cls, raw: int) -> "ClassLabel":
        """Accept either coding (+/-1 or +/-2)."""
        if raw in (NEGATIVE, POSITIVE):
            return cls(int(raw))
        return cls.from_display(int(raw))


def internal_labels(raw) -> np.ndarray:
    """Vectorized label normalization to the internal +/-1 coding."""
    arr = np.asarray(raw)
    return np.array([ClassLabel.coerce(int(v)).value for v in arr], dtype=np.int64)

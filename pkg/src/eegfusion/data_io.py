"""Dataset ingestion and the seeded synthetic cohort generator.

Directory layout mirrors the public single-channel corpus convention:
``<root>/{A,B,C,D,E}/*.txt`` with one sample per line.  Divisions A and
B are healthy (label -1), C, D and E are injured (+1); a task then maps
divisions onto the binary problem actually evaluated.  In directory mode
each file is one subject unless the manifest says otherwise; synthetic
cohorts have true multi-epoch subjects so leave-one-subject-out
evaluation is meaningful.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import features as feat
from .errors import DataError, InternalError, ParameterError
from .signal_core import TimeSeries, validate

HEALTHY_DIVISIONS = ("A", "B")
INJURED_DIVISIONS = ("C", "D", "E")
ALL_DIVISIONS = HEALTHY_DIVISIONS + INJURED_DIVISIONS

#: task name -> {division: label}; only listed divisions participate
TASKS = {
    "A_vs_E": {"A": -1, "E": 1},
    "CD_vs_E": {"C": -1, "D": -1, "E": 1},
    "AB_vs_CDE": {"A": -1, "B": -1, "C": 1, "D": 1, "E": 1},
}


def base_label(division: str) -> int:
    """Healthy/injured coding before any task mapping."""
    if division in HEALTHY_DIVISIONS:
        return -1
    if division in INJURED_DIVISIONS:
        return 1
    raise ParameterError(f"unknown division {division!r}")


@dataclass(frozen=True)
class DatasetManifest:
    rate: float
    task: str = "A_vs_E"
    divisions: dict = field(default_factory=dict)  # division -> subdirectory
    subjects: dict = field(default_factory=dict)  # filename -> subject_id
    custom_labels: dict = field(default_factory=dict)  # division -> label (task=custom)

    def __post_init__(self):
        if self.rate <= 0:
            raise ParameterError("rate must be > 0")
        if self.task != "custom" and self.task not in TASKS:
            raise ParameterError(
                f"unknown task {self.task!r} (expected one of {sorted(TASKS)} or 'custom')"
            )
        if self.task == "custom" and not self.custom_labels:
            raise ParameterError("custom task needs [labels] division mappings")

    @property
    def task_labels(self) -> dict:
        return dict(self.custom_labels) if self.task == "custom" else dict(TASKS[self.task])

    @classmethod
    def from_file(cls, path) -> "DatasetManifest":
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise DataError(f"manifest not found: {path}")
        if "dataset" not in parser:
            raise DataError(f"manifest {path} has no [dataset] section")
        section = parser["dataset"]
        try:
            rate = float(section.get("rate", ""))
        except ValueError as exc:
            raise DataError(f"manifest {path}: bad or missing rate") from exc
        task = section.get("task", "A_vs_E")
        divisions = dict(parser["divisions"]) if "divisions" in parser else {}
        divisions = {k.upper(): v for k, v in divisions.items()}
        subjects = dict(parser["subjects"]) if "subjects" in parser else {}
        custom = {}
        if "labels" in parser:
            custom = {k.upper(): int(v) for k, v in parser["labels"].items()}
        return cls(rate=rate, task=task, divisions=divisions, subjects=subjects,
                   custom_labels=custom)

    def to_text(self) -> str:
        lines = ["[dataset]", f"rate = {float(self.rate)!r}", f"task = {self.task}", ""]
        if self.divisions:
            lines.append("[divisions]")
            for name in sorted(self.divisions):
                lines.append(f"{name} = {self.divisions[name]}")
            lines.append("")
        if self.subjects:
            lines.append("[subjects]")
            for name in sorted(self.subjects):
                lines.append(f"{name} = {self.subjects[name]}")
            lines.append("")
        if self.custom_labels:
            lines.append("[labels]")
            for name in sorted(self.custom_labels):
                lines.append(f"{name} = {self.custom_labels[name]}")
            lines.append("")
        return "\n".join(lines)


@dataclass(frozen=True, eq=False)
class LabeledSeries:
    series: TimeSeries
    label: int  # internal +/-1 after task mapping
    division: str = ""


@dataclass(eq=False)
class Cohort:
    """Labeled series plus optional per-subject clinical covariates."""

    items: list
    rate: float
    clinical: dict | None = None  # subject_id -> covariate vector
    clinical_names: tuple = ()

    def subjects(self):
        seen = []
        for item in self.items:
            sid = item.series.subject_id
            if sid not in seen:
                seen.append(sid)
        return seen

    def __len__(self):
        return len(self.items)


def _parse_sample_file(path: Path) -> np.ndarray:
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    values = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            values.append(float(line))
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: bad sample {line!r}") from exc
    if not values:
        raise DataError(f"{path}: empty sample file")
    return np.array(values, dtype=np.float64)


def load_directory(root, manifest: DatasetManifest) -> Cohort:
    """Read every division the manifest's task uses; label per division."""
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"dataset root {root} is not a directory")
    items = []
    for division, label in sorted(manifest.task_labels.items()):
        subdir = root / manifest.divisions.get(division, division)
        if not subdir.is_dir():
            raise DataError(f"division directory missing: {subdir}")
        files = sorted(subdir.glob("*.txt"))
        if not files:
            raise DataError(f"no .txt sample files in {subdir}")
        for path in files:
            samples = _parse_sample_file(path)
            subject = manifest.subjects.get(path.name, path.stem)
            series = validate(
                TimeSeries(samples, rate=manifest.rate, subject_id=subject,
                           channel=division)
            )
            items.append(LabeledSeries(series=series, label=label, division=division))
    return Cohort(items=items, rate=manifest.rate)


# ---------------------------------------------------------------------------
# synthetic cohort generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BackgroundSpec:
    """Band-limited 1/f background shared by both classes.

    ``subject_gain_sigma`` is the sigma of a per-subject log-normal
    amplitude factor: it makes absolute-scale features (rms, energy)
    vary across subjects irrespective of class, the way per-patient
    electrode impedance does.
    """

    slope: float = 1.0
    low_hz: float = 0.5
    high_hz: float = 40.0
    subject_gain_sigma: float = 0.6


@dataclass(frozen=True)
class InjuredSpec:
    """Class-distinguishing morphology added on top of the background."""

    burst_rate_hz: float = 2.0
    burst_amplitude_ratio: float = 8.0
    delta_boost: float = 2.5  # multiplies delta-band amplitude
    jitter: float = 0.35  # per-subject spread of the morphology strength


@dataclass(frozen=True)
class SynthCohortSpec:
    subjects_per_class: int = 10
    epochs_per_subject: int = 20
    rate: float = 256.0
    epoch_length: int = 1024
    background: BackgroundSpec = BackgroundSpec()
    injured: InjuredSpec = InjuredSpec()
    snr: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.subjects_per_class < 1 or self.epochs_per_subject < 1:
            raise ParameterError("subject and epoch counts must be >= 1")
        if self.rate <= 0 or self.snr <= 0:
            raise ParameterError("rate and snr must be > 0")
        if self.epoch_length < 8:
            raise ParameterError("epoch_length must be >= 8")


def _shaped_noise(rng, n, rate, spec: BackgroundSpec) -> np.ndarray:
    """White noise spectrally shaped to 1/f^slope inside [low, high] Hz."""
    white = rng.normal(size=n)
    spectrum = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n, d=1.0 / rate)
    gain = np.zeros_like(freqs)
    band = (freqs >= spec.low_hz) & (freqs <= spec.high_hz)
    gain[band] = freqs[band] ** (-spec.slope / 2.0)
    shaped = np.fft.irfft(spectrum * gain, n=n)
    scale = shaped.std()
    return shaped / scale if scale > 0 else shaped


def _spike_wave(rate: float) -> np.ndarray:
    """A single biphasic sharp transient about 80 ms long."""
    width = max(int(0.08 * rate), 8)
    t = np.linspace(-1.0, 1.0, width)
    return np.exp(-8.0 * t**2) * np.sin(np.pi * t * 2.0)


def _injured_epoch(rng, n, rate, bg: BackgroundSpec, inj: InjuredSpec, snr, strength):
    base = _shaped_noise(rng, n, rate, bg)
    # elevated delta fraction: add slow band-limited component
    slow = _shaped_noise(rng, n, rate, replace(bg, low_hz=0.5, high_hz=4.0))
    out = base + snr * strength * inj.delta_boost * slow
    # periodic sharp transients
    spike = _spike_wave(rate)
    n_bursts = rng.poisson(inj.burst_rate_hz * n / rate)
    amplitude = snr * strength * inj.burst_amplitude_ratio
    for _ in range(n_bursts):
        start = int(rng.integers(0, max(n - len(spike), 1)))
        out[start : start + len(spike)] += amplitude * spike[: n - start]
    return out


def generate_cohort(spec: SynthCohortSpec, self_check: bool = True) -> Cohort:
    """Deterministic labeled cohort; injured subjects carry extra delta
    power and spike bursts.

    The generator asserts its own class separation: cohort-level means of
    relative delta power and mean nonlinear energy must differ by at
    least two pooled standard deviations (healthy below injured), which
    pins the morphology parameters to something a classifier can use.
    """
    root = np.random.SeedSequence(spec.seed)
    items = []
    n = spec.epoch_length
    per_class = spec.subjects_per_class
    children = root.spawn(2 * per_class)
    for class_idx, label in enumerate((-1, 1)):
        for s in range(per_class):
            rng = np.random.default_rng(children[class_idx * per_class + s])
            subject = f"{'h' if label < 0 else 'i'}{s:03d}"
            gain = float(np.exp(rng.normal(0.0, spec.background.subject_gain_sigma)))
            strength = float(
                max(rng.normal(1.0, spec.injured.jitter), 0.2)
            )  # per-subject morphology strength
            for _ in range(spec.epochs_per_subject):
                if label < 0:
                    samples = _shaped_noise(rng, n, spec.rate, spec.background)
                else:
                    samples = _injured_epoch(
                        rng, n, spec.rate, spec.background, spec.injured, spec.snr, strength
                    )
                series = TimeSeries(
                    gain * samples, rate=spec.rate, subject_id=subject, channel="synthetic"
                )
                items.append(
                    LabeledSeries(series=series, label=label,
                                  division="A" if label < 0 else "E")
                )
    cohort = Cohort(items=items, rate=spec.rate)
    if self_check:
        _check_class_separation(cohort)
    return cohort


def _check_class_separation(cohort: Cohort):
    rel_delta = {-1: [], 1: []}
    energy = {-1: [], 1: []}
    for item in cohort.items:
        epoch = item.series.samples
        # gain-invariant statistics so subject amplitude cannot mask class
        rel_delta[item.label].append(
            feat.relative_band_power(epoch, feat.DELTA_BAND, rate=cohort.rate)
        )
        # burstiness of the nonlinear energy trace: spikes fatten its tail
        nl = np.abs(feat.nleo(epoch)[1:-1])
        energy[item.label].append(float(np.percentile(nl, 99) / max(nl.mean(), 1e-12)))
    for name, stat in (("relative delta power", rel_delta), ("nleo burst energy", energy)):
        healthy = np.array(stat[-1])
        injured = np.array(stat[1])
        pooled = math.sqrt((healthy.var() + injured.var()) / 2.0)
        separation = (injured.mean() - healthy.mean()) / max(pooled, 1e-12)
        if separation < 2.0:
            raise InternalError(
                f"generator self-check failed: {name} class separation "
                f"{separation:.2f} < 2 pooled standard deviations"
            )


# ---------------------------------------------------------------------------
# clinical covariates
# ---------------------------------------------------------------------------


def parse_clinical_csv(text: str):
    """CSV with header ``subject_id,<name>...``; numeric covariates only."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DataError("clinical table is empty")
    header = [h.strip() for h in lines[0].split(",")]
    if header[0] != "subject_id" or len(header) < 2:
        raise DataError("clinical header must be 'subject_id,<name>...'")
    names = tuple(header[1:])
    table = {}
    for lineno, line in enumerate(lines[1:], start=2):
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != len(header):
            raise DataError(
                f"clinical line {lineno}: expected {len(header)} fields, got {len(parts)}"
            )
        try:
            table[parts[0]] = np.array([float(v) for v in parts[1:]])
        except ValueError as exc:
            raise DataError(f"clinical line {lineno}: non-numeric covariate") from exc
    return names, table


def attach_clinical(cohort: Cohort, csv_text: str) -> Cohort:
    """Fuse covariates onto a cohort; all subjects must be covered."""
    names, table = parse_clinical_csv(csv_text)
    missing = [s for s in cohort.subjects() if s not in table]
    if missing:
        raise DataError(
            "clinical table is missing subjects: " + ", ".join(sorted(missing))
        )
    return Cohort(
        items=list(cohort.items),
        rate=cohort.rate,
        clinical={s: table[s] for s in cohort.subjects()},
        clinical_names=names,
    )


# ---------------------------------------------------------------------------
# cohort export (the directory layout, byte-reproducible)
# ---------------------------------------------------------------------------


def export_cohort(cohort: Cohort, root, task: str = "A_vs_E") -> DatasetManifest:
    """Write one file per epoch into the division layout plus a manifest."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    subjects = {}
    counters = {}
    for item in cohort.items:
        division = item.division or ("A" if item.label < 0 else "E")
        subdir = root / division
        subdir.mkdir(exist_ok=True)
        sid = item.series.subject_id
        counters[sid] = counters.get(sid, 0)
        fname = f"{sid}_e{counters[sid]:03d}.txt"
        counters[sid] += 1
        with open(subdir / fname, "w") as fh:
            for v in item.series.samples:
                fh.write(f"{float(v)!r}\n")
        subjects[fname] = sid
    manifest = DatasetManifest(rate=cohort.rate, task=task, subjects=subjects)
    (root / "manifest").write_text(manifest.to_text())
    return manifest

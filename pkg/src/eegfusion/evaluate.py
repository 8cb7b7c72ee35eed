"""Nested leave-one-subject-out evaluation with per-subject voting.

The outer loop holds out one subject at a time; inner folds partition the
remaining subjects for hyperparameter search, swarm fitness, and sigmoid
calibration.  Nothing derived from the held-out subject ever reaches a
fit: the harness funnels all data access through
:meth:`FeatureTable.subset` so an instrumented table can prove it, and a
hard guard turns any slip into an :class:`~eegfusion.errors.InternalError`.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import bnn as bnn_mod
from . import svm as svm_mod
from .data_io import Cohort
from .errors import ConvergenceError, DataError, InternalError, ParameterError
from .features import (
    BNN_SCHEMA,
    DELTA_BAND,
    SVM_SCHEMA,
    extract_bnn_features,
    extract_svm_features,
)
from .signal_core import Epoch, internal_labels, window
from .swarm import SwarmConfig, Swarm

FEATURE_SETS = ("svm4", "bnn4", "union")
CLASSIFIERS = ("knn", "svm", "rbf", "bnn", "hybrid")
#: Column order of the comparison table (the hybrid pipeline is the
#: swarm-selected Bayesian network).
COMPARISON_COLUMNS = ("knn", "svm", "rbf", "hybrid")


def _fmt(x) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# feature table
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class FeatureTable:
    """Epoch-level feature matrix with subject bookkeeping."""

    subjects: np.ndarray  # per-row subject id
    labels: np.ndarray  # internal +/-1
    matrix: np.ndarray
    schema: tuple

    def __post_init__(self):
        if not (len(self.subjects) == len(self.labels) == len(self.matrix)):
            raise ParameterError("table arrays disagree on row count")

    @classmethod
    def from_cohort(
        cls,
        cohort: Cohort,
        feature_set: str = "union",
        epoch_length: int | None = None,
        hop: int | None = None,
        band=DELTA_BAND,
    ) -> "FeatureTable":
        if feature_set not in FEATURE_SETS:
            raise ParameterError(f"unknown feature set {feature_set!r}")
        rows, labels, subjects = [], [], []
        schema = None
        for item in cohort.items:
            series = item.series
            if epoch_length is not None and len(series) > epoch_length:
                epochs = window(series, epoch_length, hop)
            else:
                epochs = [Epoch(series)]
            clinical = None
            if cohort.clinical is not None:
                clinical = cohort.clinical.get(series.subject_id)
            for epoch in epochs:
                values, names = _extract(epoch, feature_set, clinical,
                                         cohort.clinical_names, band)
                if schema is None:
                    schema = names
                rows.append(values)
                labels.append(item.label)
                subjects.append(series.subject_id)
        if not rows:
            raise DataError("cohort produced no epochs")
        return cls(
            subjects=np.array(subjects),
            labels=internal_labels(labels),
            matrix=np.array(rows),
            schema=schema,
        )

    def subject_ids(self):
        seen = []
        for s in self.subjects:
            if s not in seen:
                seen.append(s)
        return seen

    def subject_label(self, subject) -> int:
        idx = np.nonzero(self.subjects == subject)[0]
        return int(self.labels[idx[0]])

    def subset(self, subjects, stage: str = ""):
        """Materialize the rows of ``subjects``.

        ``stage`` names what the caller is about to do with the rows;
        instrumented tables record it to prove the held-out subject is
        touched only at prediction time.
        """
        wanted = set(subjects)
        mask = np.array([s in wanted for s in self.subjects])
        return self.matrix[mask], self.labels[mask], self.subjects[mask]


def _extract(epoch, feature_set, clinical, clinical_names, band):
    if feature_set == "svm4":
        fv = extract_svm_features(epoch, clinical=clinical, band=band,
                                  clinical_names=clinical_names or None)
        return fv.values, fv.schema
    if feature_set == "bnn4":
        fv = extract_bnn_features(epoch)
        return fv.values, fv.schema
    svm_fv = extract_svm_features(epoch, band=band)
    bnn_fv = extract_bnn_features(epoch)
    # union de-duplicates on the shared rms column
    values = list(svm_fv.values) + [bnn_fv.values[1], bnn_fv.values[2], bnn_fv.values[3]]
    names = list(SVM_SCHEMA) + [BNN_SCHEMA[1], BNN_SCHEMA[2], BNN_SCHEMA[3]]
    if clinical is not None:
        values.extend(np.asarray(clinical, dtype=float).tolist())
        names.extend(clinical_names or [f"clin_{i}" for i in range(len(clinical))])
    return np.array(values), tuple(names)


# ---------------------------------------------------------------------------
# cross-validation plan
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CvPlan:
    outer: tuple  # ((test_subject, train_subjects), ...)
    inner: dict  # test_subject -> ((train_subjects, val_subjects), ...)
    seed: int

    def validate(self):
        all_subjects = set()
        for test_subject, train_subjects in self.outer:
            if test_subject in train_subjects:
                raise InternalError(f"{test_subject} appears in its own training set")
            if test_subject in all_subjects:
                raise InternalError(f"{test_subject} held out twice")
            all_subjects.add(test_subject)
            for inner_train, inner_val in self.inner[test_subject]:
                if test_subject in inner_train or test_subject in inner_val:
                    raise InternalError(
                        f"{test_subject} leaked into an inner fold of its own iteration"
                    )


def build_loso_plan(table_or_subjects, labels=None, inner_k: int = 5, seed: int = 0) -> CvPlan:
    """One outer fold per subject; inner folds partition the rest.

    Inner folds are stratified round-robin by class so every inner
    training set keeps both classes whenever each class has two or more
    subjects.
    """
    if isinstance(table_or_subjects, FeatureTable):
        subjects = table_or_subjects.subject_ids()
        label_of = {s: table_or_subjects.subject_label(s) for s in subjects}
    else:
        subjects = list(table_or_subjects)
        if labels is None:
            raise ParameterError("need per-subject labels alongside raw subject ids")
        label_of = dict(zip(subjects, internal_labels(labels).tolist()))
    if len(subjects) < 2:
        raise ParameterError("leave-one-subject-out needs >= 2 subjects")
    outer = []
    inner = {}
    for test_subject in subjects:
        train_subjects = tuple(s for s in subjects if s != test_subject)
        outer.append((test_subject, train_subjects))
        inner[test_subject] = _inner_folds(train_subjects, label_of, inner_k, seed)
    plan = CvPlan(outer=tuple(outer), inner=inner, seed=seed)
    plan.validate()
    return plan


def _inner_folds(train_subjects, label_of, k, seed):
    k_eff = max(2, min(k, len(train_subjects)))
    if len(train_subjects) < 2:
        return ()
    rng = np.random.default_rng(np.random.SeedSequence((seed, len(train_subjects))))
    buckets = [[] for _ in range(k_eff)]
    slot = 0
    for label in (-1, 1):
        members = [s for s in train_subjects if label_of[s] == label]
        order = rng.permutation(len(members))
        for j in order:
            buckets[slot % k_eff].append(members[int(j)])
            slot += 1
    folds = []
    for b in range(k_eff):
        val = tuple(buckets[b])
        if not val:
            continue
        train = tuple(s for s in train_subjects if s not in buckets[b])
        folds.append((train, val))
    return tuple(folds)


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RocSweep:
    points: tuple  # (threshold, tpr, fpr) ascending in threshold
    best_threshold: float
    auc: float


def threshold_sweep(probabilities, labels, steps: int = 100) -> RocSweep:
    """ROC from thresholds 0, 1/steps, ..., 1 over class probabilities.

    A point is called positive when its probability reaches the
    threshold, except at threshold 1 which is exclusive so the curve
    terminates at (0, 0).  The best threshold maximizes TPR - FPR, ties
    to the lower threshold; the area uses the trapezoid rule.
    """
    p = np.asarray(probabilities, dtype=np.float64)
    y = internal_labels(labels)
    pos = y > 0
    n_pos = int(pos.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("threshold sweep needs both classes")
    points = []
    best_threshold, best_youden = 0.0, -np.inf
    for i in range(steps + 1):
        threshold = i / steps
        if i == steps:
            predicted = np.zeros(len(p), dtype=bool)
        else:
            predicted = p >= threshold
        tpr = float((predicted & pos).sum()) / n_pos
        fpr = float((predicted & ~pos).sum()) / n_neg
        points.append((threshold, tpr, fpr))
        if tpr - fpr > best_youden + 1e-15:
            best_youden = tpr - fpr
            best_threshold = threshold
    order = sorted(range(len(points)), key=lambda k: (points[k][2], points[k][1]))
    auc = 0.0
    for a, b in zip(order[:-1], order[1:]):
        x1, y1 = points[a][2], points[a][1]
        x2, y2 = points[b][2], points[b][1]
        auc += 0.5 * (y1 + y2) * (x2 - x1)
    return RocSweep(points=tuple(points), best_threshold=best_threshold, auc=float(auc))


def majority_vote(classes) -> int:
    """Most frequent class; an exact tie goes to the positive class."""
    arr = internal_labels(classes)
    if len(arr) == 0:
        raise ParameterError("majority vote over no predictions")
    n_pos = int((arr > 0).sum())
    return 1 if n_pos >= len(arr) - n_pos else -1


# ---------------------------------------------------------------------------
# classifiers
# ---------------------------------------------------------------------------


class KnnClassifier:
    """k nearest neighbors on standardized features, Euclidean metric.

    Distance ties resolve to the lower training index (stable sort);
    the reported probability is the positive fraction among the k votes.
    """

    name = "knn"

    def __init__(self, k: int = 5):
        if k < 1:
            raise ParameterError("k must be >= 1")
        self.k = k
        self._scaler = None
        self._x = None
        self._y = None

    def fit(self, x, y, inner_folds=(), seed: int = 0):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if self.k > len(x):
            raise ParameterError(f"k={self.k} exceeds training size {len(x)}")
        self._scaler = svm_mod.standardize_fit(x)
        self._x = self._scaler.transform(x)
        self._y = internal_labels(y)
        return self

    def predict_proba(self, x):
        z = self._scaler.transform(np.atleast_2d(x))
        out = np.empty(len(z))
        for i, row in enumerate(z):
            d = np.sum((self._x - row) ** 2, axis=1)
            nearest = np.argsort(d, kind="stable")[: self.k]
            out[i] = float((self._y[nearest] > 0).sum()) / self.k
        return out

    def predict(self, x):
        return np.where(self.predict_proba(x) >= 0.5, 1, -1)


def _kmeans(x, k, rng, iterations: int = 60):
    centers = x[rng.choice(len(x), size=k, replace=False)]
    for _ in range(iterations):
        d = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = d.argmin(axis=1)
        new_centers = centers.copy()
        for c in range(k):
            members = x[assign == c]
            if len(members):
                new_centers[c] = members.mean(axis=0)
        if np.allclose(new_centers, centers):
            break
        centers = new_centers
    return centers


class RbfNetClassifier:
    """Least-squares readout over Gaussian bumps at k-means centers."""

    name = "rbf"

    def __init__(self, n_centers: int = 8, width: float | None = None):
        if n_centers < 1:
            raise ParameterError("need at least one center")
        self.n_centers = n_centers
        self.width = width
        self._scaler = None
        self._centers = None
        self._readout = None
        self._sigma = None

    def fit(self, x, y, inner_folds=(), seed: int = 0):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        y = internal_labels(y).astype(np.float64)
        self._scaler = svm_mod.standardize_fit(x)
        z = self._scaler.transform(x)
        k = min(self.n_centers, len(z))
        rng = np.random.default_rng(np.random.SeedSequence((seed, 17)))
        self._centers = _kmeans(z, k, rng)
        if self.width is not None:
            self._sigma = float(self.width)
        else:
            d = np.sqrt(((self._centers[:, None] - self._centers[None]) ** 2).sum(axis=2))
            positive = d[d > 0]
            self._sigma = float(np.median(positive)) if len(positive) else 1.0
        phi = self._design(z)
        self._readout, *_ = np.linalg.lstsq(phi, y, rcond=None)
        return self

    def _design(self, z):
        d = ((z[:, None, :] - self._centers[None, :, :]) ** 2).sum(axis=2)
        phi = np.exp(-d / (2.0 * self._sigma**2))
        return np.hstack([phi, np.ones((len(z), 1))])

    def raw_output(self, x):
        z = self._scaler.transform(np.atleast_2d(x))
        return self._design(z) @ self._readout

    def predict_proba(self, x):
        return np.clip((self.raw_output(x) + 1.0) / 2.0, 0.0, 1.0)

    def predict(self, x):
        return np.where(self.raw_output(x) >= 0, 1, -1)


class SvmClassifier:
    """Margin classifier with inner-fold grid search and calibration.

    The (cost, gamma) grid is scored by mean inner-fold accuracy; the
    winning combination's held-out decision values feed the sigmoid fit,
    so the calibration never sees training-set decision values.
    """

    name = "svm"

    def __init__(
        self,
        cost_grid=(0.1, 1.0, 10.0, 100.0),
        gamma_grid=(0.01, 0.1, 1.0, 10.0),
        kkt_tolerance: float = 1e-3,
        max_passes: int = 200,
    ):
        self.cost_grid = tuple(cost_grid)
        self.gamma_grid = tuple(gamma_grid)
        self.kkt_tolerance = kkt_tolerance
        self.max_passes = max_passes
        self.model = None
        self.chosen = None

    def _config(self, cost, gamma):
        return svm_mod.SvmTrainConfig(
            cost=cost,
            kernel=svm_mod.KernelSpec("rbf", gamma=gamma),
            kkt_tolerance=self.kkt_tolerance,
            max_passes=self.max_passes,
        )

    def fit(self, x, y, inner_folds=(), seed: int = 0):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        y = internal_labels(y)
        best = None
        for cost in self.cost_grid:
            for gamma in self.gamma_grid:
                accs, held_h, held_y = [], [], []
                for tr_idx, val_idx in inner_folds:
                    try:
                        model = svm_mod.train(x[tr_idx], y[tr_idx], self._config(cost, gamma))
                    except (DataError, ConvergenceError):
                        continue
                    h = model.decision_values(x[val_idx])
                    pred = np.where(h >= 0, 1, -1)
                    accs.append(float((pred == y[val_idx]).mean()))
                    held_h.extend(h.tolist())
                    held_y.extend(y[val_idx].tolist())
                if not accs:
                    continue
                score = float(np.mean(accs))
                if best is None or score > best[0] + 1e-12:
                    best = (score, cost, gamma, np.array(held_h), np.array(held_y))
        if best is None:
            # no usable inner fold (tiny data): single default combo,
            # calibrated on training decision values as a last resort
            cost, gamma = self.cost_grid[0], self.gamma_grid[0]
            self.model = svm_mod.train(x, y, self._config(cost, gamma))
            self.model.calibration = svm_mod.fit_sigmoid(self.model.decision_values(x), y)
            self.chosen = (cost, gamma)
            return self
        _, cost, gamma, held_h, held_y = best
        self.model = svm_mod.train(x, y, self._config(cost, gamma))
        if len(set(held_y.tolist())) == 2:
            self.model.calibration = svm_mod.fit_sigmoid(held_h, held_y)
        else:
            self.model.calibration = svm_mod.fit_sigmoid(self.model.decision_values(x), y)
        self.chosen = (cost, gamma)
        return self

    def predict_proba(self, x):
        return self.model.predict_probability(x)

    def predict(self, x):
        return self.model.predict(x)


class BnnClassifier:
    """Evidence-selected network on standardized features."""

    name = "bnn"

    def __init__(
        self,
        candidate_widths=(1, 2, 4, 8),
        epsilon: float = 0.1,
        max_iter: int = 2000,
        tolerance: float = 1e-4,
        restarts: int = 3,
        loss: str = "squared",
        two_hidden_layers: bool = True,
        decay_update_rounds: int = 0,
    ):
        self.candidate_widths = tuple(candidate_widths)
        self.epsilon = epsilon
        self.max_iter = max_iter
        self.tolerance = tolerance
        self.restarts = restarts
        self.loss = loss
        self.two_hidden_layers = two_hidden_layers
        self.decay_update_rounds = decay_update_rounds
        self._scaler = None
        self.model = None

    def fit(self, x, y, inner_folds=(), seed: int = 0):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        self._scaler = svm_mod.standardize_fit(x)
        cfg = bnn_mod.TrainerConfig(
            max_iter=self.max_iter,
            tolerance=self.tolerance,
            restarts=self.restarts,
            seed=seed,
            loss=self.loss,
            decay_update_rounds=self.decay_update_rounds,
            strict=False,
        )
        self.model = bnn_mod.select_model(
            self._scaler.transform(x),
            internal_labels(y),
            self.candidate_widths,
            cfg=cfg,
            epsilon=self.epsilon,
            two_hidden_layers=self.two_hidden_layers,
        )
        return self

    def predict_proba(self, x):
        return self.model.predict_proba(self._scaler.transform(np.atleast_2d(x)))

    def predict(self, x):
        return np.where(self.predict_proba(x) >= 0.5, 1, -1)


class HybridClassifier:
    """Swarm feature selection wrapped around the Bayesian network.

    Fitness of a feature mask is its mean inner-fold validation accuracy
    with a deliberately cheap network; the final model re-selects its
    width by evidence on the surviving features only.
    """

    name = "hybrid"

    def __init__(
        self,
        swarm: SwarmConfig = SwarmConfig(),
        fitness_widths=(2,),
        fitness_max_iter: int = 150,
        final: BnnClassifier | None = None,
        max_fitness_folds: int = 3,
    ):
        self.swarm_config = swarm
        self.fitness_widths = tuple(fitness_widths)
        self.fitness_max_iter = fitness_max_iter
        self.final = final or BnnClassifier()
        self.max_fitness_folds = max_fitness_folds
        self.mask = None
        self.swarm_result = None

    def fit(self, x, y, inner_folds=(), seed: int = 0):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        y = internal_labels(y)
        folds = tuple(inner_folds)[: self.max_fitness_folds]
        if not folds:
            half = len(x) // 2
            folds = ((np.arange(half), np.arange(half, len(x))),)

        def fitness(candidate):
            cols = np.nonzero(candidate.mask)[0]
            mask_key = int(sum(1 << int(c) for c in cols)) & 0xFFFF
            accs = []
            for tr_idx, val_idx in folds:
                if len(set(y[tr_idx].tolist())) < 2:
                    continue
                clf = BnnClassifier(
                    candidate_widths=self.fitness_widths,
                    max_iter=self.fitness_max_iter,
                    tolerance=1e-3,
                    restarts=1,
                )
                clf.fit(x[np.ix_(tr_idx, cols)], y[tr_idx], seed=seed * 65537 + mask_key)
                pred = clf.predict(x[np.ix_(val_idx, cols)])
                accs.append(float((pred == y[val_idx]).mean()))
            return float(np.mean(accs)) if accs else 0.0

        swarm = Swarm(
            n_features=x.shape[1],
            fitness_fn=fitness,
            config=replace(self.swarm_config, seed=self.swarm_config.seed + seed),
        )
        self.swarm_result = swarm.run()
        self.mask = self.swarm_result.candidate.mask
        if not self.mask.any():
            self.mask = np.ones(x.shape[1], dtype=bool)
        self.final.fit(x[:, self.mask], y, seed=seed)
        return self

    def predict_proba(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return self.final.predict_proba(x[:, self.mask])

    def predict(self, x):
        return np.where(self.predict_proba(x) >= 0.5, 1, -1)


# ---------------------------------------------------------------------------
# the pipeline
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EvalConfig:
    inner_k: int = 5
    threshold_steps: int = 100
    knn_k: int = 5
    rbf_centers: int = 8
    svm_cost_grid: tuple = (0.1, 1.0, 10.0, 100.0)
    svm_gamma_grid: tuple = (0.01, 0.1, 1.0, 10.0)
    svm_max_passes: int = 200
    bnn_candidates: tuple = (1, 2, 4, 8)
    bnn_max_iter: int = 2000
    bnn_restarts: int = 3
    bnn_epsilon: float = 0.1
    swarm: SwarmConfig = SwarmConfig()
    fitness_max_iter: int = 150
    max_fitness_folds: int = 3
    jobs: int = 1


def make_classifier(name: str, cfg: EvalConfig = EvalConfig()):
    if name == "knn":
        return KnnClassifier(k=cfg.knn_k)
    if name == "rbf":
        return RbfNetClassifier(n_centers=cfg.rbf_centers)
    if name == "svm":
        return SvmClassifier(
            cost_grid=cfg.svm_cost_grid,
            gamma_grid=cfg.svm_gamma_grid,
            max_passes=cfg.svm_max_passes,
        )
    if name == "bnn":
        return BnnClassifier(
            candidate_widths=cfg.bnn_candidates,
            max_iter=cfg.bnn_max_iter,
            restarts=cfg.bnn_restarts,
            epsilon=cfg.bnn_epsilon,
        )
    if name == "hybrid":
        return HybridClassifier(
            swarm=cfg.swarm,
            fitness_max_iter=cfg.fitness_max_iter,
            max_fitness_folds=cfg.max_fitness_folds,
            final=BnnClassifier(
                candidate_widths=cfg.bnn_candidates,
                max_iter=cfg.bnn_max_iter,
                restarts=cfg.bnn_restarts,
                epsilon=cfg.bnn_epsilon,
            ),
        )
    raise ParameterError(f"unknown classifier {name!r} (expected one of {CLASSIFIERS})")


@dataclass(frozen=True)
class PredictionRow:
    subject: str
    epoch_index: int
    label: int
    probability: float
    predicted: int


@dataclass(eq=False)
class EvalReport:
    classifier: str
    seed: int
    rows: tuple
    subject_votes: tuple  # (subject, true_label, voted_class, n_epochs)
    tp: int
    tn: int
    fp: int
    fn: int
    accuracy: float  # percent, epoch level
    sensitivity: float  # percent
    error_rate: float  # 1 - accuracy/100
    probability_mae: float  # mean |p - 1{label=+1}|
    subject_accuracy: float  # percent, after majority voting
    roc: RocSweep

    def to_csv(self) -> str:
        lines = [
            f"# seed = {self.seed}",
            f"# classifier = {self.classifier}",
            "subject,epoch,label,probability,predicted",
        ]
        for r in self.rows:
            lines.append(
                f"{r.subject},{r.epoch_index},{2 * r.label},{_fmt(r.probability)},"
                f"{2 * r.predicted}"
            )
        lines.append("")
        lines.append("metric,value")
        lines.append(f"tp,{self.tp}")
        lines.append(f"tn,{self.tn}")
        lines.append(f"fp,{self.fp}")
        lines.append(f"fn,{self.fn}")
        lines.append(f"accuracy_pct,{_fmt(self.accuracy)}")
        lines.append(f"sensitivity_pct,{_fmt(self.sensitivity)}")
        lines.append(f"error_rate,{_fmt(self.error_rate)}")
        lines.append(f"probability_mae,{_fmt(self.probability_mae)}")
        lines.append(f"subject_accuracy_pct,{_fmt(self.subject_accuracy)}")
        lines.append(f"auc,{_fmt(self.roc.auc)}")
        lines.append(f"best_threshold,{_fmt(self.roc.best_threshold)}")
        lines.append("")
        lines.append("subject,true_label,voted_class,epochs")
        for subject, true_label, voted, n in self.subject_votes:
            lines.append(f"{subject},{2 * true_label},{2 * voted},{n}")
        return "\n".join(lines) + "\n"

    def roc_csv(self) -> str:
        lines = [f"# seed = {self.seed}", "threshold,tpr,fpr"]
        for threshold, tpr, fpr in self.roc.points:
            lines.append(f"{_fmt(threshold)},{_fmt(tpr)},{_fmt(fpr)}")
        return "\n".join(lines) + "\n"


def _fold_job(table, plan, classifier_name, cfg, seed, fold_index):
    test_subject, train_subjects = plan.outer[fold_index]
    if test_subject in train_subjects:
        raise InternalError("leakage guard: test subject inside training set")
    x_train, y_train, train_rows = table.subset(train_subjects, stage="fit")
    if test_subject in set(train_rows):
        raise InternalError("leakage guard: test rows materialized for fitting")
    row_positions = {}
    for pos, subj in enumerate(train_rows):
        row_positions.setdefault(subj, []).append(pos)
    inner_folds = []
    for inner_train, inner_val in plan.inner[test_subject]:
        tr = np.concatenate([row_positions[s] for s in inner_train if s in row_positions]) if inner_train else np.array([], dtype=int)
        va = np.concatenate([row_positions[s] for s in inner_val if s in row_positions]) if inner_val else np.array([], dtype=int)
        if len(tr) and len(va):
            inner_folds.append((tr.astype(int), va.astype(int)))
    clf = make_classifier(classifier_name, cfg)
    clf.fit(x_train, y_train, inner_folds=inner_folds, seed=seed * 10007 + fold_index)
    x_test, y_test, _ = table.subset([test_subject], stage="predict")
    probs = clf.predict_proba(x_test)
    preds = np.where(probs >= 0.5, 1, -1)
    rows = tuple(
        PredictionRow(
            subject=test_subject,
            epoch_index=i,
            label=int(y_test[i]),
            probability=float(probs[i]),
            predicted=int(preds[i]),
        )
        for i in range(len(probs))
    )
    vote = majority_vote(preds)
    return rows, (test_subject, int(y_test[0]), vote, len(probs))


def run_pipeline(
    table: FeatureTable,
    classifier: str,
    plan: CvPlan | None = None,
    cfg: EvalConfig = EvalConfig(),
    seed: int = 0,
) -> EvalReport:
    """Leave-one-subject-out evaluation of one classifier."""
    if plan is None:
        plan = build_loso_plan(table, inner_k=cfg.inner_k, seed=seed)
    plan.validate()
    indices = range(len(plan.outer))
    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            shards = list(
                pool.map(lambda i: _fold_job(table, plan, classifier, cfg, seed, i), indices)
            )
    else:
        shards = [_fold_job(table, plan, classifier, cfg, seed, i) for i in indices]

    rows = tuple(r for shard_rows, _ in shards for r in shard_rows)
    votes = tuple(vote for _, vote in shards)
    labels = np.array([r.label for r in rows])
    preds = np.array([r.predicted for r in rows])
    probs = np.array([r.probability for r in rows])
    tp = int(((preds > 0) & (labels > 0)).sum())
    tn = int(((preds < 0) & (labels < 0)).sum())
    fp = int(((preds > 0) & (labels < 0)).sum())
    fn = int(((preds < 0) & (labels > 0)).sum())
    accuracy = 100.0 * (tp + tn) / len(rows)
    sensitivity = 100.0 * tp / max(tp + fn, 1)
    prob_mae = float(np.mean(np.abs(probs - (labels > 0))))
    vote_hits = sum(1 for _, true_label, voted, _ in votes if voted == true_label)
    subject_accuracy = 100.0 * vote_hits / len(votes)
    roc = threshold_sweep(probs, labels, steps=cfg.threshold_steps)
    return EvalReport(
        classifier=classifier,
        seed=seed,
        rows=rows,
        subject_votes=votes,
        tp=tp,
        tn=tn,
        fp=fp,
        fn=fn,
        accuracy=accuracy,
        sensitivity=sensitivity,
        error_rate=1.0 - accuracy / 100.0,
        probability_mae=prob_mae,
        subject_accuracy=subject_accuracy,
        roc=roc,
    )


def comparison_table(results: dict) -> str:
    """Text table, one row per repetition, one column per classifier.

    ``results`` maps classifier name -> {repetition: accuracy_pct}.
    """
    reps = sorted({rep for per in results.values() for rep in per})
    columns = [c for c in COMPARISON_COLUMNS if c in results]
    columns += [c for c in sorted(results) if c not in columns]
    header = ["repetitions"] + list(columns)
    widths = [max(12, len(h) + 2) for h in header]
    lines = ["".join(h.ljust(w) for h, w in zip(header, widths))]
    for rep in reps:
        cells = [str(rep)]
        for c in columns:
            value = results[c].get(rep)
            cells.append("-" if value is None else f"{value:.2f}")
        lines.append("".join(cell.ljust(w) for cell, w in zip(cells, widths)))
    return "\n".join(lines) + "\n"

"""Soft-margin kernel SVM trained by pairwise dual coordinate ascent,
plus sigmoid calibration of decision values to probabilities.

The dual solver repeatedly picks the sample with the largest KKT
violation and pairs it with the sample maximizing the error gap, then
solves that two-variable subproblem analytically.  The equality
constraint sum(beta_j * b_j) = 0 is preserved exactly by every pair
update; the box constraint 0 <= beta_j <= D is enforced by clipping.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DataError, ParameterError, StateError
from .signal_core import internal_labels


# ---------------------------------------------------------------------------
# standardization
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Per-feature centering/scaling fitted on training data only.

    Uses the population convention (divisor m).  Zero-variance features
    map to 0 after centering instead of dividing by zero.
    """

    mean: np.ndarray
    std: np.ndarray

    def transform(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        safe = np.where(self.std > 0, self.std, 1.0)
        out = (x - self.mean) / safe
        out[:, self.std == 0] = 0.0
        return out


def standardize_fit(train: np.ndarray) -> Standardizer:
    train = np.asarray(train, dtype=np.float64)
    if train.ndim != 2 or train.shape[0] < 2:
        raise ParameterError("standardization needs >= 2 training vectors")
    return Standardizer(mean=train.mean(axis=0), std=train.std(axis=0))


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "rbf"
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise ParameterError(f"unknown kernel {self.kind!r}")
        if self.kind == "rbf":
            if self.gamma is None or not math.isfinite(self.gamma) or self.gamma <= 0:
                raise ParameterError("rbf kernel needs finite gamma > 0")


def kernel_matrix(spec: KernelSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gram matrix K[i, j] = H(a_i, b_j)."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if spec.kind == "linear":
        return a @ b.T
    sq = (
        np.sum(a**2, axis=1)[:, None]
        + np.sum(b**2, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-spec.gamma * sq)


def default_gamma(features: np.ndarray) -> float:
    """1 / (n_features * total feature variance), floored for flat data."""
    features = np.atleast_2d(features)
    var = float(features.var())
    if var <= 0:
        var = 1.0
    return 1.0 / (features.shape[1] * var)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SvmTrainConfig:
    cost: float = 1.0
    kernel: KernelSpec | None = None  # None -> rbf with data-derived gamma
    kkt_tolerance: float = 1e-3
    max_passes: int = 200  # sweep budget; one sweep = up to m pair updates

    def __post_init__(self):
        if self.cost <= 0:
            raise ParameterError("cost must be > 0")
        if self.kkt_tolerance <= 0:
            raise ParameterError("kkt_tolerance must be > 0")
        if self.max_passes <= 0:
            raise ParameterError("max_passes must be > 0")


@dataclass(frozen=True)
class SigmoidParams:
    """Parameters of Q(h) = 1 / (1 + exp(x_slope*h + y_intercept))."""

    x_slope: float
    y_intercept: float

    def __post_init__(self):
        if not (math.isfinite(self.x_slope) and math.isfinite(self.y_intercept)):
            raise ParameterError("sigmoid parameters must be finite")


def _kkt_bias_interval(g: np.ndarray, y: np.ndarray, alpha: np.ndarray, cost: float):
    """Feasible bias range implied by the KKT conditions.

    ``g`` is the biasless decision value per training point.  Returns
    (lo, hi); any b in between satisfies every inequality, and the
    midpoint is used so the solver and any independent dual maximizer
    agree on degenerate (no free support vector) cases.
    """
    lo, hi = -np.inf, np.inf
    free = (alpha > 0) & (alpha < cost)
    if free.any():
        vals = y[free] - g[free]
        return float(vals.min()), float(vals.max())
    lower = (y > 0) & (alpha < cost) | (y < 0) & (alpha > 0)
    upper = (y > 0) & (alpha > 0) | (y < 0) & (alpha < cost)
    if lower.any():
        lo = float(np.max(y[lower] - g[lower]))
    if upper.any():
        hi = float(np.min(y[upper] - g[upper]))
    return lo, hi


def kkt_bias(g: np.ndarray, y: np.ndarray, alpha: np.ndarray, cost: float) -> float:
    """Deterministic bias: mean over free SVs, else interval midpoint."""
    free = (alpha > 0) & (alpha < cost)
    if free.any():
        return float(np.mean(y[free] - g[free]))
    lo, hi = _kkt_bias_interval(g, y, alpha, cost)
    if not math.isfinite(lo):
        return hi if math.isfinite(hi) else 0.0
    if not math.isfinite(hi):
        return lo
    return 0.5 * (lo + hi)


def _pair_update(K, y, alpha, g, i, j, cost) -> bool:
    """Solve the two-variable subproblem on (i, j) in place.

    Returns True when alpha actually moved.  The equality constraint is
    preserved exactly because the two deltas cancel through y_i, y_j.
    """
    e_i = g[i] - y[i]
    e_j = g[j] - y[j]
    if y[i] != y[j]:
        lo = max(0.0, alpha[j] - alpha[i])
        hi = min(cost, cost + alpha[j] - alpha[i])
    else:
        lo = max(0.0, alpha[i] + alpha[j] - cost)
        hi = min(cost, alpha[i] + alpha[j])
    if lo >= hi:
        return False
    eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
    if eta > 1e-12:
        a_j_new = alpha[j] + y[j] * (e_i - e_j) / eta
        a_j_new = min(hi, max(lo, a_j_new))
    else:
        # flat direction (duplicate points): the objective is linear
        # along it, so the optimum sits at whichever bound gains more
        s = y[i] * y[j]
        f_i = y[i] * e_i - alpha[i] * K[i, i] - s * alpha[j] * K[i, j]
        f_j = y[j] * e_j - s * alpha[i] * K[i, j] - alpha[j] * K[j, j]
        out = {}
        for bound in (lo, hi):
            a_i_b = alpha[i] + s * (alpha[j] - bound)
            out[bound] = (
                a_i_b * f_i
                + bound * f_j
                + 0.5 * a_i_b**2 * K[i, i]
                + 0.5 * bound**2 * K[j, j]
                + s * bound * a_i_b * K[i, j]
            )
        if abs(out[lo] - out[hi]) < 1e-12:
            return False
        a_j_new = lo if out[lo] < out[hi] else hi
    delta_j = a_j_new - alpha[j]
    if abs(delta_j) < 1e-14:
        return False
    delta_i = -y[i] * y[j] * delta_j
    alpha[i] += delta_i
    alpha[j] = a_j_new
    # snap float dust onto the box bounds so near-bound points do not
    # linger in the movable sets with phantom violations
    snap = 1e-10 * max(1.0, cost)
    for k in (i, j):
        if alpha[k] < snap:
            alpha[k] = 0.0
        elif alpha[k] > cost - snap:
            alpha[k] = cost
    g += (y[i] * delta_i) * K[:, i] + (y[j] * delta_j) * K[:, j]
    return True


def _kkt_scores(y, g, alpha, cost):
    """Per-point score y - g masked to the movable sets.

    The optimality gap max(up) - min(down) is the standard maximal-
    violating-pair criterion; it hits 0 exactly at the dual optimum and
    brackets the feasible bias interval in between.
    """
    score = y - g
    up_mask = ((y > 0) & (alpha < cost)) | ((y < 0) & (alpha > 0))
    down_mask = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < cost))
    up = np.where(up_mask, score, -np.inf)
    down = np.where(down_mask, score, np.inf)
    return up, down


def _solve_dual(K: np.ndarray, y: np.ndarray, cost: float, tol: float, max_passes: int):
    """Maximal-violating-pair coordinate ascent on the dual."""
    m = len(y)
    alpha = np.zeros(m)
    g = np.zeros(m)  # biasless decision values K @ (alpha * y)
    budget = max_passes * m

    for _ in range(budget):
        up, down = _kkt_scores(y, g, alpha, cost)
        gap = float(np.max(up) - np.min(down))
        if gap <= tol:
            return alpha, g
        updated = False
        # best violator first, then widen the search if the pair stalls
        for i in np.argsort(up)[::-1]:
            i = int(i)
            if not np.isfinite(up[i]):
                break
            for j in np.argsort(down):
                j = int(j)
                if j == i or not np.isfinite(down[j]):
                    continue
                if up[i] - down[j] <= tol:
                    break
                if _pair_update(K, y, alpha, g, i, j, cost):
                    updated = True
                    break
            if updated:
                break
            if up[i] - float(np.min(down)) <= tol:
                break
        if not updated:
            # no violating pair can move: numerically at the optimum
            break

    up, down = _kkt_scores(y, g, alpha, cost)
    gap = float(np.max(up) - np.min(down))
    if gap > tol:
        raise ConvergenceError(
            f"dual solver stopped after {budget} pair updates (KKT gap {gap:.3g} > "
            f"tolerance {tol:.3g})",
            diagnostics={"alpha": alpha, "kkt_gap": gap, "bias_free_values": g},
        )
    return alpha, g


@dataclass(eq=False)
class SvmModel:
    """Trained classifier: retained support vectors, dual coefficients,
    bias, standardizer, and (after calibration) sigmoid parameters."""

    kernel: KernelSpec
    support_vectors: np.ndarray
    alphas: np.ndarray
    labels: np.ndarray
    bias: float
    standardizer: Standardizer
    cost: float
    kkt_tolerance: float
    calibration: SigmoidParams | None = None

    def decision_value(self, x) -> float:
        return float(self.decision_values(np.atleast_2d(x))[0])

    def decision_values(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.support_vectors.shape[1]:
            raise ParameterError(
                f"expected {self.support_vectors.shape[1]} features, got {x.shape[1]}"
            )
        z = self.standardizer.transform(x)
        K = kernel_matrix(self.kernel, z, self.support_vectors)
        return K @ (self.alphas * self.labels) + self.bias

    def predict(self, x) -> np.ndarray:
        """Class per row; the h = 0 tie goes to +1."""
        h = self.decision_values(np.atleast_2d(x))
        return np.where(h >= 0, 1, -1)

    def predict_probability(self, x) -> np.ndarray:
        if self.calibration is None:
            raise StateError("model has no fitted calibration")
        h = self.decision_values(np.atleast_2d(x))
        return sigmoid_probability(self.calibration, h)

    # -- serialization ------------------------------------------------------

    FORMAT = "eegfusion-svm"
    VERSION = 1

    def to_json(self) -> str:
        payload = {
            "format": self.FORMAT,
            "version": self.VERSION,
            "kernel": {"kind": self.kernel.kind, "gamma": self.kernel.gamma},
            "support_vectors": self.support_vectors.tolist(),
            "alphas": self.alphas.tolist(),
            "labels": self.labels.tolist(),
            "bias": self.bias,
            "cost": self.cost,
            "kkt_tolerance": self.kkt_tolerance,
            "standardizer": {
                "mean": self.standardizer.mean.tolist(),
                "std": self.standardizer.std.tolist(),
            },
            "calibration": None
            if self.calibration is None
            else {
                "x_slope": self.calibration.x_slope,
                "y_intercept": self.calibration.y_intercept,
            },
        }
        return json.dumps(payload, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "SvmModel":
        payload = json.loads(text)
        if payload.get("format") != cls.FORMAT:
            raise DataError(f"not a {cls.FORMAT} record")
        if payload.get("version") != cls.VERSION:
            raise DataError(f"unsupported model version {payload.get('version')}")
        calib = payload["calibration"]
        return cls(
            kernel=KernelSpec(payload["kernel"]["kind"], payload["kernel"]["gamma"]),
            support_vectors=np.array(payload["support_vectors"], dtype=np.float64),
            alphas=np.array(payload["alphas"], dtype=np.float64),
            labels=np.array(payload["labels"], dtype=np.float64),
            bias=float(payload["bias"]),
            standardizer=Standardizer(
                mean=np.array(payload["standardizer"]["mean"]),
                std=np.array(payload["standardizer"]["std"]),
            ),
            cost=float(payload["cost"]),
            kkt_tolerance=float(payload["kkt_tolerance"]),
            calibration=None
            if calib is None
            else SigmoidParams(calib["x_slope"], calib["y_intercept"]),
        )


def train(
    features: np.ndarray,
    labels,
    cfg: SvmTrainConfig = SvmTrainConfig(),
    standardize: bool = True,
) -> SvmModel:
    """Fit the soft-margin dual on labeled feature rows.

    Labels may use either coding (+/-1 or +/-2).  Only rows with
    beta_j > 0 are retained as support vectors.
    """
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    y = internal_labels(labels).astype(np.float64)
    if len(x) != len(y):
        raise ParameterError("features/labels length mismatch")
    if not np.isfinite(x).all():
        raise DataError("non-finite feature value in training data")
    if (y > 0).sum() == 0 or (y < 0).sum() == 0:
        raise DataError("training data must contain both classes")

    if standardize:
        scaler = standardize_fit(x)
    else:
        scaler = Standardizer(mean=np.zeros(x.shape[1]), std=np.ones(x.shape[1]))
    z = scaler.transform(x)

    kernel = cfg.kernel
    if kernel is None:
        kernel = KernelSpec("rbf", gamma=default_gamma(z))

    K = kernel_matrix(kernel, z, z)
    alpha, g = _solve_dual(K, y, cfg.cost, cfg.kkt_tolerance, cfg.max_passes)
    bias = kkt_bias(g, y, alpha, cfg.cost)

    keep = alpha > 0
    if not keep.any():
        # degenerate but feasible optimum (e.g. identical opposing points);
        # keep everything so the decision function stays defined
        keep = np.ones(len(alpha), dtype=bool)
    return SvmModel(
        kernel=kernel,
        support_vectors=z[keep],
        alphas=alpha[keep],
        labels=y[keep],
        bias=bias,
        standardizer=scaler,
        cost=cfg.cost,
        kkt_tolerance=cfg.kkt_tolerance,
    )


# ---------------------------------------------------------------------------
# sigmoid calibration
# ---------------------------------------------------------------------------


def _smoothed_targets(y: np.ndarray):
    n_pos = int((y > 0).sum())
    n_neg = int((y < 0).sum())
    t = np.where(y > 0, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    return t


def calibration_nll(params: SigmoidParams, h: np.ndarray, y, smoothed: bool = True):
    """Negative log-likelihood of the sigmoid map on (h, label) pairs."""
    h = np.asarray(h, dtype=np.float64)
    y = internal_labels(y).astype(np.float64)
    t = _smoothed_targets(y) if smoothed else (y > 0).astype(np.float64)
    z = params.x_slope * h + params.y_intercept
    # stable log(1 + exp(z)) and its complement
    log1p_exp = np.logaddexp(0.0, z)
    # log Q = -log(1+exp(z)); log(1-Q) = z - log(1+exp(z))
    return float(np.sum(t * log1p_exp - (1.0 - t) * (z - log1p_exp)))


def fit_sigmoid(decision_values, labels, max_iter: int = 200) -> SigmoidParams:
    """Fit Q(h) = 1/(1+exp(x*h + y)) by damped Newton on the smoothed NLL.

    Targets are smoothed to (N+ + 1)/(N+ + 2) and 1/(N- + 2) so separable
    calibration sets keep a finite optimum.  Starting from (0, 0) and
    accepting only improving steps makes the fitted NLL never worse than
    the zero-parameter baseline.
    """
    h = np.asarray(decision_values, dtype=np.float64)
    y = internal_labels(labels).astype(np.float64)
    if (y > 0).sum() == 0 or (y < 0).sum() == 0:
        raise DataError("calibration needs both classes")
    t = _smoothed_targets(y)

    def nll(a, b):
        z = a * h + b
        log1p_exp = np.logaddexp(0.0, z)
        return float(np.sum(t * log1p_exp - (1.0 - t) * (z - log1p_exp)))

    a, b = 0.0, 0.0
    current = nll(a, b)
    for _ in range(max_iter):
        z = a * h + b
        q = 1.0 / (1.0 + np.exp(np.clip(z, -500, 500)))
        # d NLL / dz = q - (1 - t)... derive: NLL = sum t*log(1+e^z) - (1-t)*(z-log(1+e^z))
        # dNLL/dz = t*s - (1-t)*(1-s) with s = sigmoid(z) = 1-q  =>  s - (1-t)
        s = 1.0 - q
        dz = s - (1.0 - t)
        grad = np.array([np.dot(dz, h), np.sum(dz)])
        w = s * (1.0 - s)
        hess = np.array(
            [[np.dot(w, h * h), np.dot(w, h)], [np.dot(w, h), np.sum(w)]]
        )
        # Levenberg damping keeps the step defined when h is degenerate
        hess[0, 0] += 1e-12
        hess[1, 1] += 1e-12
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            break
        if not np.isfinite(step).all():
            break
        scale = 1.0
        improved = False
        for _ in range(40):
            cand = nll(a - scale * step[0], b - scale * step[1])
            if cand < current - 1e-15:
                a -= scale * step[0]
                b -= scale * step[1]
                current = cand
                improved = True
                break
            scale *= 0.5
        if not improved or float(np.abs(grad).max()) < 1e-10:
            break
    return SigmoidParams(x_slope=float(a), y_intercept=float(b))


def sigmoid_probability(params: SigmoidParams, h) -> np.ndarray:
    """Q = 1/(1+exp(x_slope*h + y_intercept)), computed overflow-safe."""
    z = params.x_slope * np.asarray(h, dtype=np.float64) + params.y_intercept
    return 1.0 / (1.0 + np.exp(np.clip(z, -500, 500)))

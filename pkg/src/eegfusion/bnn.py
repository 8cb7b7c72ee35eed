"""Multilayer network with grouped weight decay and Laplace evidence.

Training minimizes T = S_E + sum_h eps_h * 0.5*||w_h||^2 where the h
index runs over decay groups (per-layer weight blocks plus one shared
bias block by default).  After MAP training the marginal likelihood of
the trained width is scored with a Laplace approximation around the MAP
point; the Gauss-Newton curvature J'RJ + diag(eps) stands in for the
full Hessian so the score stays positive-definite.  Width selection
simply takes the candidate with the highest evidence total.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConvergenceError, DataError, NumericError, ParameterError, StateError
from .signal_core import internal_labels

LOG_DET_EIGEN_FLOOR = 1e-8
GAMMA_FLOOR = 1e-6
DEFAULT_OMEGA = 1e3


# ---------------------------------------------------------------------------
# architecture and parameter layout
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MlpArchitecture:
    """tanh hidden layers, linear scalar output (squashed at predict time)."""

    input_dim: int
    hidden_layers: tuple = ()
    output_dim: int = 1

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(int(w) for w in self.hidden_layers))
        if self.input_dim < 1:
            raise ParameterError("input_dim must be >= 1")
        if self.output_dim != 1:
            raise ParameterError("only scalar outputs are supported")
        if any(w < 1 for w in self.hidden_layers):
            raise ParameterError("hidden widths must be >= 1")

    @property
    def layer_dims(self):
        return (self.input_dim, *self.hidden_layers, self.output_dim)

    def _cached_slices(self):
        cached = getattr(self, "_slices", None)
        if cached is None:
            cached = self.weight_slices()
            object.__setattr__(self, "_slices", cached)
        return cached

    @property
    def n_hidden_units(self) -> int:
        """Unit count of the first hidden layer (what the evidence's
        symmetry terms count); 0 for a linear network."""
        return self.hidden_layers[0] if self.hidden_layers else 0

    def weight_slices(self):
        """Flat-vector layout: [W0, b0, W1, b1, ...]."""
        dims = self.layer_dims
        out = []
        offset = 0
        for layer in range(len(dims) - 1):
            w_size = dims[layer] * dims[layer + 1]
            out.append(("W", layer, (dims[layer], dims[layer + 1]), slice(offset, offset + w_size)))
            offset += w_size
            out.append(("b", layer, (dims[layer + 1],), slice(offset, offset + dims[layer + 1])))
            offset += dims[layer + 1]
        return out

    @property
    def n_params(self) -> int:
        dims = self.layer_dims
        return sum(dims[i] * dims[i + 1] + dims[i + 1] for i in range(len(dims) - 1))


def _unpack(arch: MlpArchitecture, w: np.ndarray):
    layers = []
    slices = arch._cached_slices()
    for idx in range(0, len(slices), 2):
        _, _, w_shape, w_slice = slices[idx]
        _, _, _, b_slice = slices[idx + 1]
        layers.append((w[w_slice].reshape(w_shape), w[b_slice]))
    return layers


@dataclass(frozen=True)
class DecayGroup:
    name: str
    indices: np.ndarray
    epsilon: float

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        if self.epsilon <= 0 or not math.isfinite(self.epsilon):
            raise ParameterError(f"group {self.name!r}: epsilon must be finite and > 0")

    @property
    def size(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class WeightGroups:
    """A partition of every parameter into decay groups."""

    groups: tuple

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))

    def validate(self, n_params: int):
        seen = np.concatenate([g.indices for g in self.groups]) if self.groups else np.array([], dtype=np.int64)
        if len(seen) != n_params or len(np.unique(seen)) != n_params:
            raise StateError(
                f"decay groups must partition all {n_params} parameters exactly "
                f"(covered {len(np.unique(seen))} of {len(seen)} listed)"
            )
        if len(seen) and (seen.min() < 0 or seen.max() >= n_params):
            raise StateError("group index out of range")

    def epsilon_vector(self, n_params: int) -> np.ndarray:
        eps = np.empty(n_params)
        eps.fill(np.nan)
        for g in self.groups:
            eps[g.indices] = g.epsilon
        return eps

    def with_epsilons(self, epsilons) -> "WeightGroups":
        return WeightGroups(
            tuple(replace(g, epsilon=float(e)) for g, e in zip(self.groups, epsilons))
        )


def default_groups(arch: MlpArchitecture, epsilon: float = 0.1, bias_epsilon: float | None = None) -> WeightGroups:
    """One decay group per weight matrix plus a single group for all biases."""
    if bias_epsilon is None:
        bias_epsilon = epsilon
    groups = []
    bias_idx = []
    for kind, layer, _, sl in arch.weight_slices():
        idx = np.arange(sl.start, sl.stop)
        if kind == "W":
            groups.append(DecayGroup(f"weights_l{layer}", idx, epsilon))
        else:
            bias_idx.append(idx)
    groups.append(DecayGroup("biases", np.concatenate(bias_idx), bias_epsilon))
    wg = WeightGroups(tuple(groups))
    wg.validate(arch.n_params)
    return wg


# ---------------------------------------------------------------------------
# objective / gradient / curvature
# ---------------------------------------------------------------------------


def _forward(arch: MlpArchitecture, w: np.ndarray, x: np.ndarray):
    layers = _unpack(arch, w)
    a = x
    activations = [x]
    for weight, bias in layers[:-1]:
        a = np.tanh(a @ weight + bias)
        activations.append(a)
    weight, bias = layers[-1]
    z = (a @ weight + bias).ravel()
    return z, activations, layers


def _data_error(z, t, loss):
    if loss == "squared":
        return 0.5 * float(np.sum((z - t) ** 2))
    if loss == "cross_entropy":
        return float(np.sum(np.logaddexp(0.0, -t * z)))
    raise ParameterError(f"unknown loss {loss!r}")


def _data_error_grad_z(z, t, loss):
    if loss == "squared":
        return z - t
    # d/dz log(1+exp(-t z)) = -t * sigmoid(-t z)
    return -t / (1.0 + np.exp(np.clip(t * z, -500, 500)))


def _gn_weights(z, t, loss):
    if loss == "squared":
        return np.ones_like(z)
    p = 1.0 / (1.0 + np.exp(np.clip(-z, -500, 500)))
    return p * (1.0 - p)


def _objective_fast(w, x, t, arch, eps_vec, loss) -> float:
    z, _, _ = _forward(arch, w, x)
    return _data_error(z, t, loss) + 0.5 * float(eps_vec @ (w * w))


def _gradient_fast(w, x, t, arch, eps_vec, loss) -> np.ndarray:
    z, activations, layers = _forward(arch, w, x)
    dz = _data_error_grad_z(z, t, loss)
    grad = np.empty_like(w)
    slices = arch._cached_slices()
    # output layer
    w_out, _ = layers[-1]
    a_last = activations[-1]
    grad[slices[-2][3]] = (a_last.T @ dz[:, None]).ravel()
    grad[slices[-1][3]] = dz.sum()
    # propagate into hidden stacks
    upstream = dz[:, None] * w_out.ravel()[None, :]  # dS/da for last hidden activations
    for layer in range(len(layers) - 2, -1, -1):
        a_prev = activations[layer]
        a_here = activations[layer + 1]
        dh = upstream * (1.0 - a_here**2)
        grad[slices[2 * layer][3]] = (a_prev.T @ dh).ravel()
        grad[slices[2 * layer + 1][3]] = dh.sum(axis=0)
        if layer > 0:
            upstream = dh @ layers[layer][0].T
    grad += eps_vec * w
    return grad


def objective(w, x, t, arch: MlpArchitecture, groups: WeightGroups, loss: str = "squared") -> float:
    """T = data error + sum_h eps_h * 0.5 * ||w_h||^2."""
    groups.validate(arch.n_params)
    w = np.asarray(w, dtype=np.float64)
    return _objective_fast(w, x, t, arch, groups.epsilon_vector(arch.n_params), loss)


def gradient(w, x, t, arch: MlpArchitecture, groups: WeightGroups, loss: str = "squared") -> np.ndarray:
    """Exact gradient of the objective via backpropagation."""
    groups.validate(arch.n_params)
    w = np.asarray(w, dtype=np.float64)
    return _gradient_fast(w, x, t, arch, groups.epsilon_vector(arch.n_params), loss)


def output_jacobian(arch: MlpArchitecture, w: np.ndarray, x: np.ndarray) -> np.ndarray:
    """J[n, p] = d z_n / d w_p, columns in flat parameter order."""
    w = np.asarray(w, dtype=np.float64)
    z, activations, layers = _forward(arch, w, x)
    n = len(z)
    J = np.zeros((n, arch.n_params))
    slices = arch._cached_slices()
    w_out, _ = layers[-1]
    a_last = activations[-1]
    J[:, slices[-2][3]] = a_last
    J[:, slices[-1][3]] = 1.0
    d_h = (1.0 - a_last**2) * w_out.ravel()[None, :] if len(layers) > 1 else None
    for layer in range(len(layers) - 2, -1, -1):
        a_prev = activations[layer]
        block = np.einsum("ni,nj->nij", a_prev, d_h)
        J[:, slices[2 * layer][3]] = block.reshape(n, a_prev.shape[1] * d_h.shape[1])
        J[:, slices[2 * layer + 1][3]] = d_h
        if layer > 0:
            a_below = activations[layer]
            d_h = (1.0 - a_below**2) * (d_h @ layers[layer][0].T)
    return J


def gauss_newton_matrix(arch, w, x, t, groups: WeightGroups, loss: str = "squared") -> np.ndarray:
    """A = J' R J + diag(eps): the curvature used for the Laplace score."""
    J = output_jacobian(arch, w, x)
    z, _, _ = _forward(arch, np.asarray(w, dtype=np.float64), x)
    r = _gn_weights(z, t, loss)
    A = J.T @ (r[:, None] * J)
    A[np.diag_indices_from(A)] += groups.epsilon_vector(arch.n_params)
    return A


def _floored_eigh(A):
    if not np.isfinite(A).all():
        raise NumericError("non-finite curvature matrix")
    vals, vecs = np.linalg.eigh(0.5 * (A + A.T))
    return np.maximum(vals, LOG_DET_EIGEN_FLOOR), vecs


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainerConfig:
    max_iter: int = 5000
    tolerance: float = 1e-5  # gradient 2-norm at the accepted minimum
    restarts: int = 5
    seed: int = 0
    loss: str = "squared"
    init_step: float = 0.5
    decay_update_rounds: int = 0  # re-estimate eps_h from gamma_h this many times
    strict: bool = True  # raise when no restart reaches tolerance

    def __post_init__(self):
        if self.max_iter < 1 or self.restarts < 1:
            raise ParameterError("max_iter and restarts must be >= 1")
        if self.tolerance <= 0:
            raise ParameterError("tolerance must be > 0")
        if self.loss not in ("squared", "cross_entropy"):
            raise ParameterError(f"unknown loss {self.loss!r}")


@dataclass(frozen=True)
class EvidenceReport:
    """Laplace log-evidence split into its additive pieces.

    core          -T - 0.5*logdet(A)
    prior_term    sum_h (X_h / 2) * log eps_h
    symmetry_term log N! + N log 2  (hidden-unit permutations and tanh
                  sign flips map the MAP point onto equivalent optima)
    hyper_term    sum_h 0.5*log(4*pi/gamma_h) - H*log(log Omega)
    """

    core: float
    prior_term: float
    symmetry_term: float
    hyper_term: float
    total: float


@dataclass(eq=False)
class BnnModel:
    architecture: MlpArchitecture
    weights: np.ndarray
    groups: WeightGroups
    loss: str
    hessian_logdet: float
    evidence: EvidenceReport
    omega: float = DEFAULT_OMEGA
    converged: bool = True
    objective_trace: np.ndarray | None = None

    def predict_one(self, x) -> float:
        return float(self.predict_proba(np.atleast_2d(x))[0])

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        """Forward-pass probability of the positive class."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.architecture.input_dim:
            raise ParameterError(
                f"expected {self.architecture.input_dim} features, got {x.shape[1]}"
            )
        z, _, _ = _forward(self.architecture, self.weights, x)
        return 1.0 / (1.0 + np.exp(np.clip(-z, -500, 500)))

    def predict(self, x) -> np.ndarray:
        return np.where(self.predict_proba(x) >= 0.5, 1, -1)

    # -- serialization ------------------------------------------------------

    FORMAT = "eegfusion-bnn"
    VERSION = 1

    def to_json(self) -> str:
        payload = {
            "format": self.FORMAT,
            "version": self.VERSION,
            "architecture": {
                "input_dim": self.architecture.input_dim,
                "hidden_layers": list(self.architecture.hidden_layers),
            },
            "weights": self.weights.tolist(),
            "groups": [
                {"name": g.name, "indices": g.indices.tolist(), "epsilon": g.epsilon}
                for g in self.groups.groups
            ],
            "loss": self.loss,
            "hessian_logdet": self.hessian_logdet,
            "omega": self.omega,
            "converged": self.converged,
            "evidence": {
                "core": self.evidence.core,
                "prior_term": self.evidence.prior_term,
                "symmetry_term": self.evidence.symmetry_term,
                "hyper_term": self.evidence.hyper_term,
                "total": self.evidence.total,
            },
        }
        return json.dumps(payload, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "BnnModel":
        payload = json.loads(text)
        if payload.get("format") != cls.FORMAT:
            raise DataError(f"not a {cls.FORMAT} record")
        if payload.get("version") != cls.VERSION:
            raise DataError(f"unsupported model version {payload.get('version')}")
        ev = payload["evidence"]
        return cls(
            architecture=MlpArchitecture(
                input_dim=payload["architecture"]["input_dim"],
                hidden_layers=tuple(payload["architecture"]["hidden_layers"]),
            ),
            weights=np.array(payload["weights"], dtype=np.float64),
            groups=WeightGroups(
                tuple(
                    DecayGroup(g["name"], np.array(g["indices"], dtype=np.int64), g["epsilon"])
                    for g in payload["groups"]
                )
            ),
            loss=payload["loss"],
            hessian_logdet=float(payload["hessian_logdet"]),
            omega=float(payload["omega"]),
            converged=bool(payload["converged"]),
            evidence=EvidenceReport(
                core=ev["core"],
                prior_term=ev["prior_term"],
                symmetry_term=ev["symmetry_term"],
                hyper_term=ev["hyper_term"],
                total=ev["total"],
            ),
        )


def _init_weights(arch: MlpArchitecture, rng: np.random.Generator) -> np.ndarray:
    w = np.zeros(arch.n_params)
    for kind, layer, shape, sl in arch.weight_slices():
        if kind == "W":
            fan_in = shape[0]
            w[sl] = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=shape[0] * shape[1])
        # biases start at zero
    return w


def _descend(w, x, t, arch, groups, cfg: TrainerConfig):
    """Monotone gradient descent with Armijo backtracking.

    The trial step length follows Barzilai-Borwein when the previous
    iterate admits it, which keeps badly conditioned quadratics (the
    linear-network evidence cases) from crawling; backtracking still
    guarantees a decrease at every accepted step.
    """
    eps_vec = groups.epsilon_vector(arch.n_params)
    obj = _objective_fast(w, x, t, arch, eps_vec, cfg.loss)
    trace = [obj]
    step = cfg.init_step
    prev_w = None
    prev_grad = None
    converged = False
    for _ in range(cfg.max_iter):
        grad = _gradient_fast(w, x, t, arch, eps_vec, cfg.loss)
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= cfg.tolerance:
            converged = True
            break
        if prev_grad is not None:
            dw = w - prev_w
            dg = grad - prev_grad
            denom = float(dw @ dg)
            if denom > 1e-300:
                step = min(max(float(dw @ dw) / denom, 1e-12), 1e6)
        gsq = gnorm * gnorm
        accepted = False
        trial = step
        ulp_floor = 4.0 * np.finfo(float).eps * max(abs(obj), 1.0)
        for _ in range(80):
            w_new = w - trial * grad
            obj_new = _objective_fast(w_new, x, t, arch, eps_vec, cfg.loss)
            need = 1e-4 * trial * gsq
            # once the Armijo decrement underflows the objective's float
            # resolution, equality counts: the true decrease is sub-ulp
            if obj_new <= obj - need or (need < ulp_floor and obj_new <= obj):
                accepted = True
                break
            trial *= 0.5
        if not accepted or np.array_equal(w_new, w):
            break  # no representable progress left
        prev_w, prev_grad = w, grad
        w, obj, step = w_new, obj_new, trial
        trace.append(obj)
    if not converged:
        w, converged = _polish(w, x, t, arch, eps_vec, cfg)
    return w, np.array(trace), converged


def _polish(w, x, t, arch, eps_vec, cfg: TrainerConfig):
    """Newton-CG endgame for when objective comparisons hit float floor.

    Near a minimum the objective is flat to machine precision while the
    gradient still resolves, so the last stretch solves the local Newton
    system with conjugate gradients on finite-difference Hessian-vector
    products and accepts steps only when the gradient norm drops.
    """

    def grad_at(v):
        return _gradient_fast(v, x, t, arch, eps_vec, cfg.loss)

    grad = grad_at(w)
    gnorm = float(np.linalg.norm(grad))
    for _ in range(5):
        if gnorm <= cfg.tolerance:
            return w, True

        def hvp(d):
            scale = 1e-5 * (1.0 + float(np.linalg.norm(w)))
            delta = scale / max(float(np.linalg.norm(d)), 1e-300)
            return (grad_at(w + delta * d) - grad_at(w - delta * d)) / (2.0 * delta)

        # CG on the Newton system H p = -grad; bail on negative curvature
        p = np.zeros_like(w)
        r = -grad
        d = r.copy()
        rs = float(r @ r)
        for _ in range(2 * len(w)):
            Ad = hvp(d)
            dAd = float(d @ Ad)
            if not np.isfinite(dAd) or dAd <= 0:
                break
            alpha = rs / dAd
            p += alpha * d
            r -= alpha * Ad
            rs_new = float(r @ r)
            if math.sqrt(rs_new) <= 1e-10 * gnorm:
                break
            d = r + (rs_new / rs) * d
            rs = rs_new
        w_try = w + p
        grad_try = grad_at(w_try)
        gnorm_try = float(np.linalg.norm(grad_try))
        if not np.isfinite(gnorm_try) or gnorm_try >= gnorm:
            break
        w, grad, gnorm = w_try, grad_try, gnorm_try
    return w, gnorm <= cfg.tolerance


def _gammas(arch, w, x, t, groups, loss):
    """Well-determined parameter count per group at the current point."""
    A = gauss_newton_matrix(arch, w, x, t, groups, loss)
    vals, vecs = _floored_eigh(A)
    inv_diag = (vecs**2 / vals[None, :]).sum(axis=1)
    logdet = float(np.sum(np.log(vals)))
    gammas = np.array(
        [g.size - g.epsilon * float(inv_diag[g.indices].sum()) for g in groups.groups]
    )
    return np.maximum(gammas, GAMMA_FLOOR), logdet


def hessian_logdet(model: BnnModel, x, t) -> float:
    """log det of the Gauss-Newton curvature at the stored MAP point."""
    t = _targets(t, model.loss)
    _, logdet = _gammas(
        model.architecture, model.weights, np.atleast_2d(x), t, model.groups, model.loss
    )
    return logdet


def _evidence_report(arch, w, x, t, groups, loss, omega) -> tuple:
    T = objective(w, x, t, arch, groups, loss)
    gammas, logdet = _gammas(arch, w, x, t, groups, loss)
    core = -T - 0.5 * logdet
    prior = sum(0.5 * g.size * math.log(g.epsilon) for g in groups.groups)
    n_hidden = arch.n_hidden_units
    symmetry = math.lgamma(n_hidden + 1) + n_hidden * math.log(2.0)
    hyper = float(np.sum(0.5 * np.log(4.0 * math.pi / gammas)))
    hyper -= len(groups.groups) * math.log(math.log(omega))
    total = core + prior + symmetry + hyper
    report = EvidenceReport(
        core=core, prior_term=prior, symmetry_term=symmetry, hyper_term=hyper, total=total
    )
    return report, logdet, gammas


def log_evidence(model: BnnModel, x, t) -> EvidenceReport:
    """Recompute the Laplace evidence of a trained model on its data."""
    report, _, _ = _evidence_report(
        model.architecture,
        model.weights,
        np.atleast_2d(x),
        _targets(t, model.loss),
        model.groups,
        model.loss,
        model.omega,
    )
    return report


def _targets(labels, loss: str = "squared") -> np.ndarray:
    """Cross-entropy needs the +/-1 coding; squared loss regresses onto
    whatever real targets the caller supplies (class labels included)."""
    if loss == "cross_entropy":
        return internal_labels(labels).astype(np.float64)
    t = np.asarray(labels, dtype=np.float64).ravel()
    if not np.isfinite(t).all():
        raise DataError("non-finite training target")
    return t


def train_map(
    x,
    labels,
    arch: MlpArchitecture,
    groups: WeightGroups | None = None,
    cfg: TrainerConfig = TrainerConfig(),
    omega: float = DEFAULT_OMEGA,
) -> BnnModel:
    """MAP-train ``arch`` with seeded restarts; best objective wins.

    With ``decay_update_rounds > 0`` the group decay strengths are
    re-estimated between rounds as eps_h <- gamma_h / (2 * S_Lh), the
    evidence-maximizing fixed point.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    t = _targets(labels, cfg.loss)
    if len(x) == 0 or len(x) != len(t):
        raise DataError("training data empty or mismatched with labels")
    if not np.isfinite(x).all():
        raise DataError("non-finite feature value in training data")
    if x.shape[1] != arch.input_dim:
        raise ParameterError(f"expected {arch.input_dim} features, got {x.shape[1]}")
    if groups is None:
        groups = default_groups(arch)
    groups.validate(arch.n_params)

    root = np.random.SeedSequence(cfg.seed)
    best = None
    for child in root.spawn(cfg.restarts):
        rng = np.random.default_rng(child)
        w = _init_weights(arch, rng)
        g_here = groups
        w, trace, converged = _descend(w, x, t, arch, g_here, cfg)
        for _ in range(cfg.decay_update_rounds):
            gammas, _ = _gammas(arch, w, x, t, g_here, cfg.loss)
            new_eps = []
            for g, gamma in zip(g_here.groups, gammas):
                s_l = 0.5 * float(np.dot(w[g.indices], w[g.indices]))
                new_eps.append(min(max(gamma / max(2.0 * s_l, 1e-12), 1e-6), 1e6))
            g_here = g_here.with_epsilons(new_eps)
            w, trace, converged = _descend(w, x, t, arch, g_here, cfg)
        final_obj = objective(w, x, t, arch, g_here, cfg.loss)
        entry = (converged, final_obj, w, trace, g_here)
        if best is None:
            best = entry
        else:
            # converged restarts beat non-converged ones, then lower T wins
            if (entry[0], -entry[1]) > (best[0], -best[1]):
                best = entry
    converged, final_obj, w, trace, groups_final = best
    if cfg.strict and not converged:
        raise ConvergenceError(
            f"no restart reached gradient tolerance {cfg.tolerance:g} "
            f"within {cfg.max_iter} iterations (best objective {final_obj:.6g})",
            diagnostics={"objective_trace": trace, "best_objective": final_obj},
        )
    report, logdet, _ = _evidence_report(arch, w, x, t, groups_final, cfg.loss, omega)
    return BnnModel(
        architecture=arch,
        weights=w,
        groups=groups_final,
        loss=cfg.loss,
        hessian_logdet=logdet,
        evidence=report,
        omega=omega,
        converged=converged,
        objective_trace=trace,
    )


def select_model(
    x,
    labels,
    candidate_widths,
    cfg: TrainerConfig = TrainerConfig(),
    epsilon: float = 0.1,
    two_hidden_layers: bool = True,
    omega: float = DEFAULT_OMEGA,
) -> BnnModel:
    """Train every candidate width and keep the highest-evidence model.

    Width N means hidden layers (N, N) in the default two-layer layout
    (the second layer is tied to the first), or (N,) when
    ``two_hidden_layers`` is False.  Ties go to the smallest width.
    """
    candidates = sorted(int(n) for n in candidate_widths)
    if not candidates:
        raise ParameterError("need at least one candidate width")
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    best = None
    failures = []
    for width in candidates:
        hidden = (width, width) if two_hidden_layers else (width,)
        arch = MlpArchitecture(input_dim=x.shape[1], hidden_layers=hidden)
        groups = default_groups(arch, epsilon=epsilon)
        try:
            model = train_map(x, labels, arch, groups, cfg, omega=omega)
        except ConvergenceError as exc:
            failures.append((width, exc))
            continue
        if best is None or model.evidence.total > best.evidence.total:
            best = model
    if best is None:
        raise ConvergenceError(
            f"all {len(candidates)} candidate widths failed to converge",
            diagnostics={"failures": [w for w, _ in failures]},
        )
    return best

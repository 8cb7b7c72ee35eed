import math

import numpy as np
import pytest

from eegfusion.errors import ConvergenceError, DataError, ParameterError, StateError
from eegfusion.bnn import (
    BnnModel,
    DecayGroup,
    MlpArchitecture,
    TrainerConfig,
    WeightGroups,
    default_groups,
    gauss_newton_matrix,
    gradient,
    hessian_logdet,
    log_evidence,
    objective,
    output_jacobian,
    select_model,
    train_map,
)


def random_architecture(rng, max_hidden=2):
    input_dim = int(rng.integers(1, 5))
    depth = int(rng.integers(0, max_hidden + 1))
    hidden = tuple(int(rng.integers(1, 5)) for _ in range(depth))
    return MlpArchitecture(input_dim=input_dim, hidden_layers=hidden)


def random_groups(rng, arch):
    return default_groups(
        arch, epsilon=float(rng.uniform(0.05, 1.5)), bias_epsilon=float(rng.uniform(0.05, 1.5))
    )


def naive_forward(arch, w, x):
    """Loop-based forward pass used as the prediction oracle."""
    from eegfusion.bnn import _unpack

    layers = _unpack(arch, w)
    out = []
    for row in np.atleast_2d(x):
        a = list(row)
        for li, (W, b) in enumerate(layers):
            nxt = []
            for q in range(W.shape[1]):
                s = b[q]
                for p in range(W.shape[0]):
                    s += a[p] * W[p, q]
                nxt.append(math.tanh(s) if li < len(layers) - 1 else s)
            a = nxt
        out.append(1.0 / (1.0 + math.exp(-a[0])))
    return np.array(out)


class TestLayout:
    def test_param_count(self):
        arch = MlpArchitecture(input_dim=3, hidden_layers=(4, 2))
        # (3*4+4) + (4*2+2) + (2*1+1)
        assert arch.n_params == 16 + 10 + 3

    def test_groups_partition(self):
        arch = MlpArchitecture(input_dim=3, hidden_layers=(4, 2))
        groups = default_groups(arch)
        sizes = sum(g.size for g in groups.groups)
        assert sizes == arch.n_params
        assert [g.name for g in groups.groups] == [
            "weights_l0",
            "weights_l1",
            "weights_l2",
            "biases",
        ]

    def test_bad_partition_detected(self):
        arch = MlpArchitecture(input_dim=2, hidden_layers=())
        broken = WeightGroups((DecayGroup("all", np.arange(arch.n_params - 1), 0.1),))
        with pytest.raises(StateError):
            objective(np.zeros(arch.n_params), np.ones((2, 2)), [1.0, -1.0], arch, broken)

    def test_invalid_widths(self):
        with pytest.raises(ParameterError):
            MlpArchitecture(input_dim=2, hidden_layers=(0,))


class TestObjective:
    def test_zero_weights_leave_only_data_error(self):
        arch = MlpArchitecture(input_dim=2, hidden_layers=(3,))
        groups = default_groups(arch, epsilon=7.0)
        x = np.array([[1.0, 2.0], [0.5, -1.0]])
        t = np.array([1.0, -1.0])
        w = np.zeros(arch.n_params)
        # network output is 0 everywhere, decay terms vanish
        assert objective(w, x, t, arch, groups) == pytest.approx(0.5 * np.sum(t**2))

    def test_single_weight_closed_form(self):
        # one datum (x=1, t=1), eps=1 on the weight; pinning the bias with
        # a huge decay reduces the problem to min 0.5*(1-w)^2 + 0.5*w^2,
        # whose minimizer is w = 0.5 with objective value 0.25
        arch = MlpArchitecture(input_dim=1, hidden_layers=())
        sl = arch.weight_slices()
        groups = WeightGroups(
            (
                DecayGroup("weight", np.arange(sl[0][3].start, sl[0][3].stop), 1.0),
                DecayGroup("bias", np.arange(sl[1][3].start, sl[1][3].stop), 1e9),
            )
        )
        x = np.array([[1.0]])
        t = np.array([1.0])
        # exact minimizer of the full quadratic (2x2 solve)
        A = np.array([[1.0 + 1.0, 1.0], [1.0, 1.0 + 1e9]])
        w_star = np.linalg.solve(A, np.array([1.0, 1.0]))
        assert w_star[0] == pytest.approx(0.5, abs=1e-6)
        assert objective(w_star, x, t, arch, groups) == pytest.approx(0.25, abs=1e-6)
        g = gradient(w_star, x, t, arch, groups)
        assert np.linalg.norm(g) <= 1e-9

    def test_linear_in_epsilon(self):
        rng = np.random.default_rng(20)
        arch = random_architecture(rng)
        groups = default_groups(arch, epsilon=0.3, bias_epsilon=0.7)
        x = rng.normal(size=(6, arch.input_dim))
        t = np.where(rng.random(6) < 0.5, -1.0, 1.0)
        w = rng.normal(size=arch.n_params)
        doubled = groups.with_epsilons([2 * g.epsilon for g in groups.groups])
        decay_sum = sum(
            g.epsilon * 0.5 * float(w[g.indices] @ w[g.indices]) for g in groups.groups
        )
        assert objective(w, x, t, arch, doubled) == pytest.approx(
            objective(w, x, t, arch, groups) + decay_sum, rel=1e-12
        )

    def test_zero_everything_gives_zero_gradient(self):
        arch = MlpArchitecture(input_dim=2, hidden_layers=(2,))
        groups = default_groups(arch, epsilon=0.5)
        g = gradient(
            np.zeros(arch.n_params), np.zeros((0, 2)), np.zeros(0), arch, groups
        )
        assert np.array_equal(g, np.zeros(arch.n_params))


class TestGradient:
    def test_matches_central_differences_50_networks(self):
        rng = np.random.default_rng(21)
        worst = 0.0
        for _ in range(50):
            arch = random_architecture(rng)
            groups = random_groups(rng, arch)
            loss = "squared" if rng.random() < 0.7 else "cross_entropy"
            n = int(rng.integers(2, 8))
            x = rng.normal(size=(n, arch.input_dim))
            t = np.where(rng.random(n) < 0.5, -1.0, 1.0)
            w = rng.normal(scale=0.8, size=arch.n_params)
            analytic = gradient(w, x, t, arch, groups, loss)
            fd = np.zeros_like(w)
            h = 1e-5
            for p in range(len(w)):
                wp = w.copy()
                wp[p] += h
                up = objective(wp, x, t, arch, groups, loss)
                wp[p] -= 2 * h
                dn = objective(wp, x, t, arch, groups, loss)
                fd[p] = (up - dn) / (2 * h)
            rel = np.linalg.norm(analytic - fd) / max(np.linalg.norm(analytic), 1e-12)
            worst = max(worst, rel)
        assert worst < 1e-5


class TestCurvature:
    def test_linear_network_matrix_is_exact(self):
        rng = np.random.default_rng(22)
        for _ in range(10):
            d = int(rng.integers(1, 5))
            n = int(rng.integers(3, 20))
            arch = MlpArchitecture(input_dim=d, hidden_layers=())
            groups = random_groups(rng, arch)
            x = rng.normal(size=(n, d))
            t = np.where(rng.random(n) < 0.5, -1.0, 1.0)
            w = rng.normal(size=arch.n_params)
            phi = np.hstack([x, np.ones((n, 1))])
            eps = groups.epsilon_vector(arch.n_params)
            expected = phi.T @ phi + np.diag(eps)
            A = gauss_newton_matrix(arch, w, x, t, groups)
            assert np.allclose(A, expected, atol=1e-10)
            model = _quick_model(arch, w, groups)
            direct = float(np.linalg.slogdet(expected)[1])
            assert hessian_logdet(model, x, t) == pytest.approx(direct, abs=1e-8)

    def test_pure_prior_limit(self):
        arch = MlpArchitecture(input_dim=3, hidden_layers=(2,))
        groups = default_groups(arch, epsilon=0.25, bias_epsilon=0.5)
        model = _quick_model(arch, np.zeros(arch.n_params), groups)
        expected = sum(g.size * math.log(g.epsilon) for g in groups.groups)
        got = hessian_logdet(model, np.zeros((0, 3)), np.zeros(0))
        assert got == pytest.approx(expected, rel=1e-12)

    def test_duplicate_point_weakly_increases_logdet(self):
        rng = np.random.default_rng(23)
        arch = MlpArchitecture(input_dim=2, hidden_layers=(2,))
        groups = default_groups(arch, epsilon=0.3)
        w = rng.normal(size=arch.n_params)
        model = _quick_model(arch, w, groups)
        x = rng.normal(size=(6, 2))
        t = np.where(rng.random(6) < 0.5, -1.0, 1.0)
        base = hessian_logdet(model, x, t)
        x2 = np.vstack([x, x[-1]])
        t2 = np.append(t, t[-1])
        assert hessian_logdet(model, x2, t2) >= base - 1e-10

    def test_jacobian_matches_finite_differences(self):
        rng = np.random.default_rng(24)
        arch = MlpArchitecture(input_dim=2, hidden_layers=(3, 2))
        w = rng.normal(size=arch.n_params)
        x = rng.normal(size=(4, 2))
        J = output_jacobian(arch, w, x)
        from eegfusion.bnn import _forward

        h = 1e-6
        for p in range(arch.n_params):
            wp = w.copy()
            wp[p] += h
            zp, _, _ = _forward(arch, wp, x)
            wp[p] -= 2 * h
            zm, _, _ = _forward(arch, wp, x)
            assert np.allclose(J[:, p], (zp - zm) / (2 * h), atol=1e-6)


def _quick_model(arch, w, groups, loss="squared"):
    from eegfusion.bnn import EvidenceReport

    return BnnModel(
        architecture=arch,
        weights=np.asarray(w, dtype=float),
        groups=groups,
        loss=loss,
        hessian_logdet=0.0,
        evidence=EvidenceReport(0.0, 0.0, 0.0, 0.0, 0.0),
    )


class TestTraining:
    def test_recovers_linear_teacher(self):
        rng = np.random.default_rng(25)
        x = rng.uniform(-1, 1, size=(60, 1))
        t = 2.0 * x[:, 0]
        arch = MlpArchitecture(input_dim=1, hidden_layers=())
        groups = default_groups(arch, epsilon=1e-6)
        model = train_map(
            x, t, arch, groups, TrainerConfig(max_iter=20000, tolerance=1e-8, restarts=2)
        )
        assert model.weights[0] == pytest.approx(2.0, abs=1e-3)

    def test_trace_is_monotone_non_increasing(self):
        rng = np.random.default_rng(26)
        x = rng.normal(size=(20, 2))
        t = np.where(x[:, 0] > 0, 1.0, -1.0)
        arch = MlpArchitecture(input_dim=2, hidden_layers=(3,))
        model = train_map(x, t, arch, cfg=TrainerConfig(restarts=2, max_iter=500, strict=False))
        trace = model.objective_trace
        assert np.all(np.diff(trace) <= 0)

    def test_seeded_run_is_bit_reproducible(self):
        rng = np.random.default_rng(27)
        x = rng.normal(size=(15, 2))
        t = np.where(rng.random(15) < 0.5, -1.0, 1.0)
        arch = MlpArchitecture(input_dim=2, hidden_layers=(2,))
        cfg = TrainerConfig(restarts=2, max_iter=300, seed=99, strict=False)
        m1 = train_map(x, t, arch, cfg=cfg)
        m2 = train_map(x, t, arch, cfg=cfg)
        assert np.array_equal(m1.weights, m2.weights)
        assert m1.evidence.total == m2.evidence.total

    def test_non_convergence_raises_with_trace(self):
        rng = np.random.default_rng(28)
        x = rng.normal(size=(30, 2))
        t = np.where(rng.random(30) < 0.5, -1.0, 1.0)
        arch = MlpArchitecture(input_dim=2, hidden_layers=(4,))
        with pytest.raises(ConvergenceError) as err:
            train_map(x, t, arch, cfg=TrainerConfig(max_iter=2, tolerance=1e-12, restarts=1))
        assert "objective_trace" in err.value.diagnostics

    def test_rejects_empty_or_nan(self):
        arch = MlpArchitecture(input_dim=1, hidden_layers=())
        with pytest.raises(DataError):
            train_map(np.zeros((0, 1)), [], arch)
        with pytest.raises(DataError):
            train_map(np.array([[np.nan]]), [1.0], arch)


class TestEvidence:
    def _conjugate_log_marginal(self, x, t, groups, arch):
        """Closed-form Bayesian linear-regression marginal (unit noise).

        t ~ N(0, I + Phi E^-1 Phi'); returns log density at the observed
        targets plus the (m/2) log 2pi that the core+prior terms drop.
        """
        phi = np.hstack([x, np.ones((len(x), 1))])
        eps = groups.epsilon_vector(arch.n_params)
        C = np.eye(len(x)) + phi @ np.diag(1.0 / eps) @ phi.T
        sign, logdet = np.linalg.slogdet(C)
        assert sign > 0
        quad = float(t @ np.linalg.solve(C, t))
        log_density = -0.5 * (len(x) * math.log(2 * math.pi) + logdet + quad)
        return log_density + 0.5 * len(x) * math.log(2 * math.pi)

    def test_core_plus_prior_matches_conjugate_oracle(self):
        rng = np.random.default_rng(29)
        for _ in range(50):
            d = int(rng.integers(1, 5))
            m = int(rng.integers(4, 30))
            x = rng.normal(size=(m, d)) / math.sqrt(m)
            t = np.where(rng.random(m) < 0.5, -1.0, 1.0)
            arch = MlpArchitecture(input_dim=d, hidden_layers=())
            groups = default_groups(
                arch,
                epsilon=float(rng.uniform(0.1, 2.0)),
                bias_epsilon=float(rng.uniform(0.1, 2.0)),
            )
            model = train_map(
                x, t, arch, groups, TrainerConfig(max_iter=30000, tolerance=1e-7, restarts=1)
            )
            got = model.evidence.core + model.evidence.prior_term
            expected = self._conjugate_log_marginal(x, t, groups, arch)
            assert got == pytest.approx(expected, abs=1e-6)

    def test_symmetry_term_for_one_unit(self):
        rng = np.random.default_rng(30)
        x = rng.normal(size=(10, 2))
        t = np.where(rng.random(10) < 0.5, -1.0, 1.0)
        arch = MlpArchitecture(input_dim=2, hidden_layers=(1,))
        model = train_map(x, t, arch, cfg=TrainerConfig(restarts=1, max_iter=400, strict=False))
        assert model.evidence.symmetry_term == pytest.approx(math.log(2.0))

    def test_report_parts_sum_exactly(self):
        rng = np.random.default_rng(31)
        x = rng.normal(size=(12, 3))
        t = np.where(rng.random(12) < 0.5, -1.0, 1.0)
        arch = MlpArchitecture(input_dim=3, hidden_layers=(2,))
        model = train_map(x, t, arch, cfg=TrainerConfig(restarts=1, max_iter=400, strict=False))
        ev = model.evidence
        assert ev.total == ev.core + ev.prior_term + ev.symmetry_term + ev.hyper_term

    def test_evidence_recomputable_from_stored_state(self):
        rng = np.random.default_rng(32)
        x = rng.normal(size=(12, 2))
        t = np.where(rng.random(12) < 0.5, -1.0, 1.0)
        arch = MlpArchitecture(input_dim=2, hidden_layers=(2,))
        model = train_map(x, t, arch, cfg=TrainerConfig(restarts=1, max_iter=400, strict=False))
        again = log_evidence(model, x, t)
        assert again.total == pytest.approx(model.evidence.total, abs=1e-9)


class TestSymmetries:
    def test_sign_flip_of_hidden_unit(self):
        rng = np.random.default_rng(33)
        arch = MlpArchitecture(input_dim=3, hidden_layers=(4, 2))
        w = rng.normal(size=arch.n_params)
        model = _quick_model(arch, w, default_groups(arch))
        probe = rng.normal(size=(20, 3))
        base = model.predict_proba(probe)
        from eegfusion.bnn import _unpack

        layers = _unpack(arch, w.copy())
        unit = 1
        layers[0][0][:, unit] *= -1  # incoming weights
        layers[0][1][unit] *= -1  # incoming bias
        layers[1][0][unit, :] *= -1  # outgoing weights
        flipped = np.concatenate([np.concatenate([W.ravel(), b]) for W, b in layers])
        model2 = _quick_model(arch, flipped, default_groups(arch))
        assert np.allclose(model2.predict_proba(probe), base, atol=1e-12)

    def test_hidden_unit_permutation(self):
        rng = np.random.default_rng(34)
        arch = MlpArchitecture(input_dim=2, hidden_layers=(5, 3))
        w = rng.normal(size=arch.n_params)
        model = _quick_model(arch, w, default_groups(arch))
        probe = rng.normal(size=(20, 2))
        base = model.predict_proba(probe)
        from eegfusion.bnn import _unpack

        layers = _unpack(arch, w.copy())
        perm = rng.permutation(5)
        layers[0][0][:, :] = layers[0][0][:, perm]
        layers[0][1][:] = layers[0][1][perm]
        layers[1][0][:, :] = layers[1][0][perm, :]
        permuted = np.concatenate([np.concatenate([W.ravel(), b]) for W, b in layers])
        model2 = _quick_model(arch, permuted, default_groups(arch))
        assert np.allclose(model2.predict_proba(probe), base, atol=1e-12)


class TestPrediction:
    def test_zero_weights_give_half(self):
        arch = MlpArchitecture(input_dim=2, hidden_layers=(3,))
        model = _quick_model(arch, np.zeros(arch.n_params), default_groups(arch))
        p = model.predict_proba(np.random.default_rng(0).normal(size=(10, 2)))
        assert np.array_equal(p, np.full(10, 0.5))

    def test_matches_naive_loop_forward(self):
        rng = np.random.default_rng(35)
        for _ in range(10):
            arch = random_architecture(rng)
            w = rng.normal(size=arch.n_params)
            model = _quick_model(arch, w, default_groups(arch))
            x = rng.normal(size=(5, arch.input_dim))
            assert np.allclose(model.predict_proba(x), naive_forward(arch, w, x), atol=1e-12)

    def test_output_strictly_inside_unit_interval(self):
        rng = np.random.default_rng(36)
        arch = MlpArchitecture(input_dim=2, hidden_layers=(3,))
        model = _quick_model(arch, rng.normal(size=arch.n_params), default_groups(arch))
        p = model.predict_proba(rng.normal(size=(50, 2), scale=5))
        assert np.all((p > 0) & (p < 1))

    def test_dimension_mismatch(self):
        arch = MlpArchitecture(input_dim=2, hidden_layers=())
        model = _quick_model(arch, np.zeros(arch.n_params), default_groups(arch))
        with pytest.raises(ParameterError):
            model.predict_proba(np.zeros((1, 3)))


class TestSelection:
    def test_single_candidate_returned(self):
        rng = np.random.default_rng(37)
        x = rng.normal(size=(16, 2))
        t = np.where(rng.random(16) < 0.5, -1.0, 1.0)
        cfg = TrainerConfig(restarts=1, max_iter=300, strict=False)
        model = select_model(x, t, [3], cfg=cfg)
        assert model.architecture.hidden_layers == (3, 3)

    def test_best_evidence_wins(self):
        rng = np.random.default_rng(38)
        x = rng.normal(size=(24, 2))
        t = np.where(x[:, 0] > 0, 1.0, -1.0)
        cfg = TrainerConfig(restarts=2, max_iter=600, tolerance=1e-4, strict=False)
        best = select_model(x, t, [1, 2, 4], cfg=cfg)
        totals = {}
        for width in (1, 2, 4):
            arch = MlpArchitecture(input_dim=2, hidden_layers=(width, width))
            m = train_map(x, t, arch, default_groups(arch), cfg)
            totals[width] = m.evidence.total
        assert best.evidence.total == pytest.approx(max(totals.values()))

    def test_empty_candidates_rejected(self):
        with pytest.raises(ParameterError):
            select_model(np.zeros((4, 1)), [1.0, -1.0, 1.0, -1.0], [])


class TestSerialization:
    def test_roundtrip_bit_identical_predictions(self):
        rng = np.random.default_rng(39)
        x = rng.normal(size=(20, 3))
        t = np.where(rng.random(20) < 0.5, -1.0, 1.0)
        arch = MlpArchitecture(input_dim=3, hidden_layers=(3, 2))
        model = train_map(x, t, arch, cfg=TrainerConfig(restarts=1, max_iter=300, strict=False))
        clone = BnnModel.from_json(model.to_json())
        probe = rng.normal(size=(40, 3))
        assert np.array_equal(model.predict_proba(probe), clone.predict_proba(probe))
        assert clone.to_json() == model.to_json()

    def test_rejects_foreign_payload(self):
        with pytest.raises(DataError):
            BnnModel.from_json('{"format": "nope", "version": 1}')

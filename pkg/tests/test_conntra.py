import math

import numpy as np
import pytest

from conntra import models, train
from conntra.domain import DiscreteSet, discretize, ternary
from conntra.errors import DomainError, InvalidArgumentError, InvalidStateError, TrainingDivergedError
from conntra.models import LabeledDataset, ModelSpec, ParamVector
from conntra.pretrain import PretrainConfig, init_params, pretrain
from conntra.rng import SplitMix64
from conntra.train import (
    ConntraConfig,
    conntra_train,
    discrete_gradients,
    incremental_eval,
    make_logit_cache,
)


def random_instance(seed, n, d, k):
    rng = SplitMix64(seed)
    X = rng.uniform_array(-1, 1, n * d).reshape(n, d)
    labels = np.array([rng.next_below(k) for _ in range(n)])
    return LabeledDataset(X, np.eye(k, dtype=np.uint8)[labels])


def reference_loss(spec, values, data):
    """Independent oracle: probability-space cross-entropy on a full forward."""
    pred = models.forward(spec, ParamVector(values.copy(), spec), data.features)
    return models.cross_entropy(pred, data.labels_onehot)


class TestConntraTrain:
    def test_monotone_membership_count_and_determinism(self, blobs):
        data, val = blobs
        spec = ModelSpec.logistic(data.features.shape[1], data.class_count)
        w_pre, _ = pretrain(spec, data, PretrainConfig(epochs=10, batch_size=24, seed=3))
        cfg = ConntraConfig(iterations_T=2, seed=5, record_every=3)
        w_opt, eps, report = conntra_train(spec, data, w_pre, ternary(), cfg, validation=val)

        losses = [p.optimal_loss for p in report.curve]
        assert all(b <= a for a, b in zip(losses, losses[1:]))
        assert np.all(np.isin(w_opt.values, ternary().values))
        assert report.loss_evaluations == 2 * w_pre.values.size * 3
        assert eps == losses[-1]

        again = conntra_train(spec, data, w_pre, ternary(), cfg, validation=val)
        assert np.array_equal(w_opt.values, again[0].values)
        assert [p.optimal_loss for p in again[2].curve] == losses
        assert [p.epoch for p in again[2].curve] == [p.epoch for p in report.curve]

    def test_phase1_is_discretization(self, blobs):
        data, _ = blobs
        spec = ModelSpec.logistic(data.features.shape[1], data.class_count)
        w_pre = init_params(spec, 1)
        omega = ternary()
        _, _, report = conntra_train(
            spec, data, w_pre, omega, ConntraConfig(iterations_T=1, seed=0, record_every=10**9)
        )
        start = discretize(w_pre.values, omega)
        expected = reference_loss(spec, start, data)
        assert report.curve[0].optimal_loss == pytest.approx(expected, rel=1e-12)

    def test_output_loss_never_above_initial(self, blobs):
        data, _ = blobs
        spec = ModelSpec.logistic(data.features.shape[1], data.class_count)
        for seed in range(4):
            w_pre = init_params(spec, seed)
            _, eps, report = conntra_train(
                spec, data, w_pre, ternary(), ConntraConfig(iterations_T=1, seed=seed)
            )
            assert eps <= report.curve[0].optimal_loss

    def test_tied_candidates_leave_largest_value(self):
        # feature 1 never fires, so every value of its weights ties and the
        # ascending scan with <= acceptance must leave the largest value
        rng = SplitMix64(31)
        X = np.zeros((16, 2))
        X[:, 0] = rng.uniform_array(-1, 1, 16)
        labels = (X[:, 0] > 0).astype(int)
        data = LabeledDataset(X, np.eye(2, dtype=np.uint8)[labels])
        spec = ModelSpec.logistic(2, 2)
        w_pre = ParamVector(np.full(6, -0.9), spec)
        cfg = ConntraConfig(iterations_T=8, seed=2)
        for mode in ("full", "incremental"):
            w_opt, _, _ = conntra_train(
                spec, data, w_pre, ternary(),
                ConntraConfig(iterations_T=8, seed=2, eval_mode=mode),
            )
            # dead-feature weights: flat indices 2 (W[1,0]) and 3 (W[1,1])
            assert w_opt.values[2] == 1.0
            assert w_opt.values[3] == 1.0

    @pytest.mark.parametrize("kind", ["logistic", "mlp"])
    def test_full_and_incremental_agree(self, blobs, kind):
        data, _ = blobs
        d, k = data.features.shape[1], data.class_count
        spec = ModelSpec.logistic(d, k) if kind == "logistic" else ModelSpec.mlp(d, (7, 5), k)
        w_pre, _ = pretrain(spec, data, PretrainConfig(epochs=8, batch_size=24, seed=9))
        runs = {}
        for mode in ("full", "incremental"):
            cfg = ConntraConfig(iterations_T=2, seed=17, eval_mode=mode, record_every=5)
            runs[mode] = conntra_train(spec, data, w_pre, ternary(), cfg)
        w_full, eps_full, rep_full = runs["full"]
        w_inc, eps_inc, rep_inc = runs["incremental"]
        assert np.array_equal(w_full.values, w_inc.values)
        assert eps_inc == pytest.approx(eps_full, abs=1e-9)
        for a, b in zip(rep_full.curve, rep_inc.curve):
            assert a.epoch == b.epoch
            assert b.optimal_loss == pytest.approx(a.optimal_loss, abs=1e-9)

    def test_exhaustive_coordinate_local_minimum(self):
        # 8 parameters, ternary domain: after enough epochs no single-weight
        # substitution may lower the loss (checked by brute force)
        data = random_instance(77, 30, 3, 2)
        spec = ModelSpec.logistic(3, 2)  # 3*2+2 = 8 parameters
        w_pre = init_params(spec, 4)
        omega = ternary()
        cfg = ConntraConfig(iterations_T=60, seed=13, record_every=100)
        w_opt, eps, _ = conntra_train(spec, data, w_pre, omega, cfg)
        for i in range(8):
            for v in omega.values:
                values = w_opt.values.copy()
                values[i] = v
                assert reference_loss(spec, values, data) >= eps - 1e-9

    def test_record_every_checkpoints(self, blobs):
        data, _ = blobs
        spec = ModelSpec.logistic(data.features.shape[1], data.class_count)
        w_pre = init_params(spec, 0)
        total = w_pre.values.size
        _, _, report = conntra_train(
            spec, data, w_pre, ternary(), ConntraConfig(iterations_T=1, seed=0, record_every=7)
        )
        epochs = [p.epoch for p in report.curve]
        assert epochs[0] == 0
        assert epochs[-1] == total
        assert all(e % 7 == 0 for e in epochs[1:-1])

    def test_custom_loss_callable_forces_full_eval(self, blobs):
        data, _ = blobs
        spec = ModelSpec.logistic(data.features.shape[1], data.class_count)
        w_pre = init_params(spec, 2)
        calls = []

        def sq_loss(P, Y):
            calls.append(1)
            return float(((P - Y) ** 2).sum()) / P.shape[0]

        cfg = ConntraConfig(iterations_T=1, seed=1, record_every=10**9)
        _, eps, report = conntra_train(spec, data, w_pre, ternary(), cfg, loss=sq_loss)
        assert report.loss_evaluations == w_pre.values.size * 3
        assert len(calls) == report.loss_evaluations + 1  # + initial evaluation
        assert math.isfinite(eps)

    def test_nan_loss_raises_diverged(self, blobs):
        data, _ = blobs
        spec = ModelSpec.logistic(data.features.shape[1], data.class_count)
        w_pre = init_params(spec, 2)
        with pytest.raises(TrainingDivergedError):
            conntra_train(
                spec, data, w_pre, ternary(), ConntraConfig(iterations_T=1, seed=0),
                loss=lambda P, Y: float("nan"),
            )

    def test_spec_mismatch_rejected(self, blobs):
        data, _ = blobs
        spec = ModelSpec.logistic(data.features.shape[1], data.class_count)
        other = ModelSpec.logistic(data.features.shape[1] + 1, data.class_count)
        with pytest.raises(InvalidArgumentError):
            conntra_train(spec, data, init_params(other, 0), ternary(), ConntraConfig())

    def test_euclidean_search_loss(self, blobs):
        data, _ = blobs
        spec = ModelSpec.logistic(data.features.shape[1], data.class_count)
        w_pre, _ = pretrain(spec, data, PretrainConfig(epochs=5, batch_size=24, seed=1))
        cfg = ConntraConfig(iterations_T=1, seed=3, search_loss="euclidean")
        _, eps, report = conntra_train(spec, data, w_pre, ternary(), cfg)
        losses = [p.optimal_loss for p in report.curve]
        assert all(b <= a for a, b in zip(losses, losses[1:]))
        assert 0.0 <= eps <= 2.0  # squared distance between two stochastic rows

    def test_config_validation(self):
        with pytest.raises(InvalidArgumentError):
            ConntraConfig(iterations_T=0)
        with pytest.raises(InvalidArgumentError):
            ConntraConfig(record_every=0)
        with pytest.raises(InvalidArgumentError):
            ConntraConfig(search_loss="hinge")
        with pytest.raises(InvalidArgumentError):
            ConntraConfig(eval_mode="lazy")


class TestLayerCachedEvaluator:
    def test_cnn_candidate_losses_bit_identical_to_full(self):
        rng = SplitMix64(19)
        X = rng.uniform_array(0, 1, 8 * 28 * 28).reshape(8, 28, 28, 1)
        labels = np.array([rng.next_below(10) for _ in range(8)])
        data = LabeledDataset(X, np.eye(10, dtype=np.uint8)[labels])
        spec = ModelSpec.lenet5()
        start = discretize(init_params(spec, 6).values, ternary())

        full = train._FullEvaluator(spec, start.copy(), data, "cross_entropy")
        cached = train._LayerCachedEvaluator(spec, start.copy(), data, "cross_entropy")
        assert cached.current_loss() == full.current_loss()

        total = start.size
        coords = [0, 160, 2600, 30_000, 55_000, 61_705] + [rng.next_below(total) for _ in range(8)]
        for i in coords:
            full.begin_scan(i)
            cached.begin_scan(i)
            best = None
            for v in ternary().values:
                a = full.eval_candidate(i, v)
                b = cached.eval_candidate(i, v)
                assert a == b  # exact: same layer code on identical cached inputs
                best = v
            full.commit(i, best)
            cached.commit(i, best)
        assert cached.current_loss() == full.current_loss()


class TestDiscreteGradients:
    def test_boundary_left_undefined(self, blobs):
        data, _ = blobs
        spec = ModelSpec.logistic(data.features.shape[1], data.class_count)
        values = np.zeros(spec.param_count)
        values[0] = -1.0  # at min(omega)
        left, right = discrete_gradients(spec, ParamVector(values, spec), data, ternary(), 0)
        assert left is None and right is not None

    def test_boundary_right_undefined(self, blobs):
        data, _ = blobs
        spec = ModelSpec.logistic(data.features.shape[1], data.class_count)
        values = np.zeros(spec.param_count)
        values[0] = 1.0
        left, right = discrete_gradients(spec, ParamVector(values, spec), data, ternary(), 0)
        assert left is not None and right is None

    def test_symmetric_instance_mirror_slopes(self):
        # two mirrored samples with the same label make the loss an even
        # function of the probed weight, so left = -right at 0
        data = LabeledDataset(
            np.array([[1.0], [-1.0]]), np.array([[1, 0], [1, 0]], dtype=np.uint8)
        )
        spec = ModelSpec.logistic(1, 2)
        params = ParamVector(np.zeros(4), spec)
        left, right = discrete_gradients(spec, params, data, ternary(), 0)
        assert left == pytest.approx(-right, abs=1e-14)

    def test_matches_direct_two_point_evaluations(self):
        data = random_instance(55, 25, 4, 3)
        spec = ModelSpec.logistic(4, 3)
        omega = DiscreteSet(np.array([-1.0, -0.25, 0.5, 2.0]))
        values = discretize(init_params(spec, 8).values, omega)
        params = ParamVector(values, spec)
        for index in (0, 5, 11, 14):
            pos = int(np.searchsorted(omega.values, values[index]))
            left, right = discrete_gradients(spec, params, data, omega, index, loss="cross_entropy")

            def loss_with(v):
                w = values.copy()
                w[index] = v
                z = models.logits(spec, ParamVector(w, spec), data.features)
                from conntra._kernels import xent_from_logits

                return xent_from_logits(z, data.label_indices)

            if pos > 0:
                lo, hi = omega.values[pos - 1], omega.values[pos]
                assert left == pytest.approx((loss_with(hi) - loss_with(lo)) / (hi - lo), abs=1e-12)
            if pos + 1 < len(omega):
                lo, hi = omega.values[pos], omega.values[pos + 1]
                assert right == pytest.approx((loss_with(hi) - loss_with(lo)) / (hi - lo), abs=1e-12)

    def test_params_left_untouched(self, blobs):
        data, _ = blobs
        spec = ModelSpec.logistic(data.features.shape[1], data.class_count)
        values = np.zeros(spec.param_count)
        params = ParamVector(values, spec)
        before = params.values.copy()
        discrete_gradients(spec, params, data, ternary(), 3)
        assert np.array_equal(params.values, before)

    def test_non_member_weight_rejected(self, blobs):
        data, _ = blobs
        spec = ModelSpec.logistic(data.features.shape[1], data.class_count)
        values = np.zeros(spec.param_count)
        values[2] = 0.37
        with pytest.raises(DomainError):
            discrete_gradients(spec, ParamVector(values, spec), data, ternary(), 2)

    def test_index_out_of_range(self, blobs):
        data, _ = blobs
        spec = ModelSpec.logistic(data.features.shape[1], data.class_count)
        with pytest.raises(InvalidArgumentError):
            discrete_gradients(spec, ParamVector(np.zeros(spec.param_count), spec), data, ternary(), 10**6)


class TestIncrementalEval:
    def setup_method(self):
        self.data = random_instance(33, 20, 5, 4)
        self.spec = ModelSpec.logistic(5, 4)

    def _cache(self, seed=0):
        values = discretize(init_params(self.spec, seed).values, ternary())
        params = ParamVector(values, self.spec)
        return params, make_logit_cache(self.spec, params, self.data)

    def test_single_edit_matches_full_recompute(self):
        params, cache = self._cache()
        loss = incremental_eval(cache, 7, 1.0)
        assert params.values[7] == 1.0
        assert loss == pytest.approx(reference_loss(self.spec, params.values, self.data), abs=1e-9)

    def test_change_then_revert_recovers_loss(self):
        params, cache = self._cache()
        original = cache.loss()
        keep = params.values[3]
        incremental_eval(cache, 3, -1.0)
        back = incremental_eval(cache, 3, keep)
        assert back == pytest.approx(original, abs=1e-9)

    def test_1000_random_edits_match_oracle(self):
        params, cache = self._cache(2)
        rng = SplitMix64(44)
        omega = ternary()
        for _ in range(1000):
            index = rng.next_below(params.values.size)
            value = omega.values[rng.next_below(3)]
            loss = incremental_eval(cache, index, value)
            assert loss == pytest.approx(
                reference_loss(self.spec, params.values, self.data), abs=1e-9
            )

    def test_stale_cache_detected(self):
        params, cache = self._cache()
        params.values[0] += 0.5  # out-of-band mutation
        with pytest.raises(InvalidStateError):
            incremental_eval(cache, 1, 1.0)

    def test_bias_coordinate_updates(self):
        params, cache = self._cache()
        bias_index = 5 * 4 + 2
        loss = incremental_eval(cache, bias_index, 1.0)
        assert loss == pytest.approx(reference_loss(self.spec, params.values, self.data), abs=1e-9)

    def test_requires_logistic(self):
        mlp = ModelSpec.mlp(5, (4,), 4)
        with pytest.raises(InvalidArgumentError):
            make_logit_cache(mlp, init_params(mlp, 0), self.data)

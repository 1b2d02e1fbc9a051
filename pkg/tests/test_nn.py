"""Neural toolkit tests: ops, LSTM vs a scalar-loop oracle, Adam, early stop."""

import math

import numpy as np
import pytest

from sessionbench import nn
from sessionbench.errors import InputError, ShapeError


def make_params(input_dim, hidden, seed=0):
    rng = np.random.default_rng(seed)
    return nn.init_lstm(input_dim, hidden, rng)


class TestOps:
    def test_uniform_logits_loss_is_log_k(self):
        loss, _ = nn.softmax_cross_entropy(np.zeros(6), target=2)
        assert loss == pytest.approx(math.log(6), abs=1e-12)

    def test_large_margin_loss_vanishes(self):
        logits = np.zeros(6)
        logits[3] = 50.0
        loss, _ = nn.softmax_cross_entropy(logits, target=3)
        assert 0.0 <= loss < 1e-6

    def test_gradient_sums_to_zero(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            logits = rng.normal(size=8) * 5
            _, grad = nn.softmax_cross_entropy(logits, target=int(rng.integers(8)))
            assert abs(grad.sum()) < 1e-12

    def test_target_out_of_range(self):
        with pytest.raises(IndexError):
            nn.softmax_cross_entropy(np.zeros(4), target=4)

    def test_softmax_rows_are_distributions(self):
        rng = np.random.default_rng(4)
        probs = nn.softmax(rng.normal(size=(500, 7)) * 30, axis=1)
        assert (probs >= 0).all()
        assert np.abs(probs.sum(axis=1) - 1.0).max() < 1e-12

    def test_softmax_cross_entropy_gradient_matches_fd(self):
        rng = np.random.default_rng(5)
        logits = rng.normal(size=6)
        _, grad = nn.softmax_cross_entropy(logits, target=2)
        eps = 1e-6
        for i in range(6):
            up = logits.copy()
            up[i] += eps
            down = logits.copy()
            down[i] -= eps
            numeric = (
                nn.softmax_cross_entropy(up, 2)[0] - nn.softmax_cross_entropy(down, 2)[0]
            ) / (2 * eps)
            assert grad[i] == pytest.approx(numeric, abs=1e-8)

    def test_bce_at_zero_is_log_two(self):
        for target in (0.0, 1.0):
            loss, _ = nn.sigmoid_bce(0.0, target)
            assert loss == pytest.approx(math.log(2), abs=1e-12)

    def test_bce_large_logit_stable(self):
        loss, _ = nn.sigmoid_bce(50.0, 1.0)
        assert 0.0 <= loss < 1e-9
        loss, _ = nn.sigmoid_bce(-745.0, 0.0)
        assert np.isfinite(loss)

    def test_bce_gradient(self):
        _, grad = nn.sigmoid_bce(0.0, 1.0)
        assert grad == pytest.approx(-0.5, abs=1e-12)

    def test_one_hot(self):
        out = nn.one_hot(np.array([[0, 2], [1, 3]]), depth=4)
        assert out.shape == (2, 2, 4)
        assert out[0, 1, 2] == 1.0 and out.sum() == 4.0
        padded = nn.one_hot(np.array([0, 4]), depth=4)  # out-of-range -> zero row
        assert padded[1].sum() == 0.0


class TestPaddedBatch:
    def test_mask_has_exact_leading_ones(self):
        batch = nn.pad_sequences([[1], [2, 3, 4], [0, 1]], pad_id=9)
        expected = np.array([[1, 0, 0], [1, 1, 1], [1, 1, 0]], dtype=float)
        assert (batch.mask == expected).all()
        assert (batch.tokens[0, 1:] == 9).all()

    def test_empty_sequence_rejected(self):
        with pytest.raises(InputError):
            nn.pad_sequences([[1], []], pad_id=9)

    def test_bucketed_order_partitions_and_is_deterministic(self):
        lengths = [5, 1, 9, 3, 3, 7, 2, 8]
        a = nn.bucketed_batch_order(lengths, 3, np.random.default_rng(1))
        b = nn.bucketed_batch_order(lengths, 3, np.random.default_rng(1))
        assert [list(x) for x in a] == [list(x) for x in b]
        assert sorted(i for batch in a for i in batch) == list(range(8))


def scalar_loop_lstm(tokens, lengths, params):
    """Independent scalar re-implementation of the masked LSTM recurrence."""
    B, T = tokens.shape
    H = params.hidden_dim
    D = params.input_dim
    out = np.zeros((B, T, H))
    for b in range(B):
        h = [0.0] * H
        c = [0.0] * H
        for t in range(T):
            if t < lengths[b]:
                x = [0.0] * D
                x[tokens[b, t]] = 1.0
                new_h = [0.0] * H
                new_c = [0.0] * H
                for j in range(H):
                    zi = params.bias[j]
                    zf = params.bias[H + j]
                    zo = params.bias[2 * H + j]
                    zg = params.bias[3 * H + j]
                    for d in range(D):
                        zi += params.wx[j, d] * x[d]
                        zf += params.wx[H + j, d] * x[d]
                        zo += params.wx[2 * H + j, d] * x[d]
                        zg += params.wx[3 * H + j, d] * x[d]
                    for k in range(H):
                        zi += params.wh[j, k] * h[k]
                        zf += params.wh[H + j, k] * h[k]
                        zo += params.wh[2 * H + j, k] * h[k]
                        zg += params.wh[3 * H + j, k] * h[k]
                    sig = lambda v: 1.0 / (1.0 + math.exp(-v))  # noqa: E731
                    new_c[j] = sig(zf) * c[j] + sig(zi) * math.tanh(zg)
                    new_h[j] = sig(zo) * math.tanh(new_c[j])
                h, c = new_h, new_c
            out[b, t] = h
    return out


class TestLstmForward:
    def test_all_zero_params_give_zero_states(self):
        params = nn.LstmParams(np.zeros((12, 4)), np.zeros((12, 3)), np.zeros(12))
        batch = nn.pad_sequences([[0, 1, 2], [3]], pad_id=4)
        cache = nn.forward(params, batch)
        assert (cache.hidden == 0).all()

    def test_padding_does_not_change_states(self):
        params = make_params(5, 4, seed=1)
        short = nn.pad_sequences([[2]], pad_id=5)
        padded = nn.pad_sequences([[2, 5, 5, 5, 5]], pad_id=5)
        padded.lengths = np.array([1])
        c1 = nn.forward(params, short)
        c2 = nn.forward(params, padded)
        assert np.array_equal(c1.hidden[0, 0], c2.hidden[0, 0])
        for t in range(1, 5):
            assert np.array_equal(c2.hidden[0, t], c2.hidden[0, 0])

    def test_matches_scalar_loop_oracle(self):
        params = make_params(6, 3, seed=2)
        rng = np.random.default_rng(7)
        tokens = rng.integers(0, 6, size=(4, 4)).astype(np.int64)
        lengths = np.array([4, 2, 3, 1], dtype=np.int64)
        batch = nn.PaddedBatch(tokens, lengths, pad_id=6)
        cache = nn.forward(params, batch)
        oracle = scalar_loop_lstm(tokens, lengths, params)
        assert np.abs(cache.hidden - oracle).max() < 1e-12

    def test_final_states_track_lengths(self):
        params = make_params(5, 4, seed=3)
        batch = nn.pad_sequences([[0, 1, 2], [3]], pad_id=5)
        cache = nn.forward(params, batch)
        h_final, _ = cache.final_states()
        assert np.array_equal(h_final[0], cache.hidden[0, 2])
        assert np.array_equal(h_final[1], cache.hidden[1, 0])

    def test_token_out_of_range_rejected(self):
        params = make_params(4, 3)
        batch = nn.pad_sequences([[4]], pad_id=9)
        with pytest.raises(ShapeError):
            nn.forward(params, batch)

    def test_param_shape_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            nn.LstmParams(np.zeros((12, 4)), np.zeros((12, 4)), np.zeros(12))


class TestLstmBackward:
    def loss_closure(self, params, batch, weights):
        def fn(p):
            lp = nn.LstmParams(p["wx"], p["wh"], p["bias"])
            cache = nn.forward(lp, batch)
            loss = float((cache.hidden * weights).sum())
            grads = nn.backward(lp, cache, weights)
            return loss, grads

        return fn

    def test_unused_token_rows_have_zero_gradient(self):
        params = make_params(6, 3, seed=4)
        batch = nn.pad_sequences([[0, 1], [2, 0]], pad_id=6)
        cache = nn.forward(params, batch)
        d_h = np.ones((2, 2, 3))
        grads = nn.backward(params, cache, d_h)
        assert (grads["wx"][:, 4] == 0).all()
        assert (grads["wx"][:, 5] == 0).all()

    def test_gradient_linearity(self):
        params = make_params(5, 3, seed=5)
        batch = nn.pad_sequences([[0, 1, 2]], pad_id=5)
        cache = nn.forward(params, batch)
        d_h = np.random.default_rng(0).normal(size=(1, 3, 3))
        g1 = nn.backward(params, cache, d_h)
        g2 = nn.backward(params, cache, 2.0 * d_h)
        for key in g1:
            assert np.array_equal(2.0 * g1[key], g2[key])

    def test_grad_check_on_masked_batch(self):
        params = make_params(5, 4, seed=6)
        rng = np.random.default_rng(8)
        tokens = rng.integers(0, 5, size=(3, 5)).astype(np.int64)
        lengths = np.array([5, 2, 4], dtype=np.int64)
        batch = nn.PaddedBatch(tokens, lengths, pad_id=5)
        weights = rng.normal(size=(3, 5, 4))
        # gradients must ignore pad positions: zero the weights there
        for b, n in enumerate(lengths):
            weights[b, n:] = 0.0
        fn = self.loss_closure(params, batch, weights)
        report = nn.grad_check(
            fn, {"wx": params.wx, "wh": params.wh, "bias": params.bias}, sample=120
        )
        assert report.max_rel_error < 1e-6

    def test_pad_extension_leaves_gradients_unchanged(self):
        params = make_params(5, 3, seed=7)
        tokens = np.array([[0, 1, 2]], dtype=np.int64)
        batch1 = nn.PaddedBatch(tokens, np.array([3]), pad_id=5)
        tokens2 = np.array([[0, 1, 2, 0, 0]], dtype=np.int64)
        batch2 = nn.PaddedBatch(tokens2, np.array([3]), pad_id=5)
        c1 = nn.forward(params, batch1)
        c2 = nn.forward(params, batch2)
        d1 = np.random.default_rng(1).normal(size=(1, 3, 3))
        d2 = np.zeros((1, 5, 3))
        d2[:, :3] = d1
        g1 = nn.backward(params, c1, d1)
        g2 = nn.backward(params, c2, d2)
        for key in g1:
            assert np.array_equal(g1[key], g2[key])


class TestGradCheck:
    def test_pure_linear_model_is_exact_up_to_rounding(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=12)
        params = {"w": rng.normal(size=12)}

        def linear_loss(p):
            return float(p["w"] @ x), {"w": x.copy()}

        result = nn.grad_check(linear_loss, params, step=1e-5, sample=12)
        assert result.max_rel_error < 1e-9

    def test_samples_at_least_requested_coordinates(self):
        rng = np.random.default_rng(12)
        params = {"a": rng.normal(size=(20, 20)), "b": rng.normal(size=30)}

        def quad_loss(p):
            return float((p["a"] ** 2).sum() + (p["b"] ** 2).sum()), {
                "a": 2 * p["a"],
                "b": 2 * p["b"],
            }

        result = nn.grad_check(quad_loss, params, sample=200)
        assert result.checked == 200
        assert result.max_rel_error < 1e-6


class TestAdam:
    def test_first_step_magnitude_is_learning_rate(self):
        state = nn.AdamState(learning_rate=0.01)
        params = {"w": np.array([1.0])}
        state.step(params, {"w": np.array([0.5])})
        delta = abs(params["w"][0] - 1.0)
        assert delta == pytest.approx(0.01, rel=1e-6)

    def test_zero_gradient_keeps_params(self):
        state = nn.AdamState(learning_rate=0.1)
        params = {"w": np.array([1.0, -2.0])}
        state.step(params, {"w": np.zeros(2)})
        assert (params["w"] == np.array([1.0, -2.0])).all()
        assert state.t == 1

    def test_determinism(self):
        def run():
            state = nn.AdamState(learning_rate=0.005)
            params = {"w": np.linspace(-1, 1, 5)}
            rng = np.random.default_rng(0)
            for _ in range(20):
                state.step(params, {"w": rng.normal(size=5)})
            return params["w"]

        assert np.array_equal(run(), run())

    def test_functional_wrapper_copies(self):
        state = nn.AdamState(learning_rate=0.1)
        params = {"w": np.array([1.0])}
        new_params, state = nn.adam_update(params, {"w": np.array([1.0])}, state)
        assert params["w"][0] == 1.0
        assert new_params["w"][0] != 1.0

    def test_clip_norm_defaults_off_and_bounds_gradients(self):
        grads = {"w": np.array([30.0, 40.0])}  # norm 50
        plain = nn.AdamState(learning_rate=0.1)
        params_plain = {"w": np.zeros(2)}
        plain.step(params_plain, grads)
        clipped = nn.AdamState(learning_rate=0.1, clip_norm=5.0)
        params_clipped = {"w": np.zeros(2)}
        clipped.step(params_clipped, grads)
        # clipping rescales the gradient direction, not the Adam step size,
        # so the first-step updates coincide; the moment buffers must not
        assert np.allclose(clipped.m["w"] * 10.0, plain.m["w"])
        big = nn.AdamState(learning_rate=0.1, clip_norm=500.0)
        params_big = {"w": np.zeros(2)}
        big.step(params_big, grads)
        assert np.array_equal(params_big["w"], params_plain["w"])
        assert np.array_equal(big.m["w"], plain.m["w"])


class TestEarlyStopper:
    def drive(self, metrics, patience=10, max_epochs=50):
        stopper = nn.EarlyStopper(patience=patience, max_epochs=max_epochs)
        for epoch, metric in enumerate(metrics, start=1):
            if stopper.update(epoch, metric, snapshot=epoch):
                break
        return stopper

    def test_improvements_only_at_first_three_epochs(self):
        metrics = [0.1, 0.2, 0.3] + [0.3] * 47
        stopper = self.drive(metrics)
        assert stopper.stopped_epoch == 13
        assert stopper.best_epoch == 3
        assert stopper.best_snapshot == 3

    def test_plateau_from_epoch_one_stops_at_eleven(self):
        stopper = self.drive([0.5] * 50)
        assert stopper.stopped_epoch == 11
        assert stopper.best_epoch == 1

    def test_max_epochs_cap(self):
        stopper = self.drive(list(np.linspace(0, 1, 60)), patience=10, max_epochs=50)
        assert stopper.stopped_epoch == 50
        assert stopper.best_epoch == 50


class TestCheckpoint:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        tensors = {
            "a": rng.normal(size=(3, 4)) * 1e-300,
            "b": np.array([np.pi, -0.0, 1e300]),
            "c": rng.normal(size=(2, 2, 2)),
        }
        meta = {"kind": "test", "pooling": "last"}
        path = tmp_path / "ckpt.txt"
        nn.save_tensors(path, meta, tensors)
        meta2, tensors2 = nn.load_tensors(path)
        assert meta2 == meta
        for name, arr in tensors.items():
            assert np.array_equal(tensors2[name], arr, equal_nan=True)
            assert tensors2[name].shape == arr.shape

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("something else\n")
        from sessionbench.errors import ParseError

        with pytest.raises(ParseError):
            nn.load_tensors(path)

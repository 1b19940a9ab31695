import math

import numpy as np
import pytest

from nestmention import nn
from nestmention.nn import Parameter, Tape


def numeric_grad(f, x: np.ndarray, eps=1e-5) -> np.ndarray:
    """Central differences of scalar ``f()`` w.r.t. array ``x`` (perturbed in place)."""
    g = np.zeros_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + eps
        up = f()
        flat[k] = orig - eps
        down = f()
        flat[k] = orig
        gflat[k] = (up - down) / (2 * eps)
    return g


def tape_grads(build, params):
    for p in params:
        p.zero_grad()
    with Tape() as tape:
        tape.backward(build())
    return [p.grad.copy() for p in params]


def max_rel(a, b, floor=1e-6):
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


def check_op(build, params, tol=1e-3):
    analytic = tape_grads(build, params)
    for p, a in zip(params, analytic):
        n = numeric_grad(lambda: float(build().value), p.value)
        assert max_rel(a, n) < tol, p.name


def weighted_sum(t, w):
    return nn.total(nn.mul(t, nn.Tensor(w)))


class TestForward:
    def test_affine_identity(self):
        x = np.array([1.0, -2.0, 3.0])
        assert np.array_equal(nn.affine(np.eye(3), x, np.zeros(3)).value, x)

    def test_activations_at_zero(self):
        assert nn.tanh(np.zeros(2)).value.tolist() == [0.0, 0.0]
        assert nn.sigmoid(np.zeros(2)).value.tolist() == [0.5, 0.5]

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            nn.add(np.zeros(2), np.zeros(3))
        with pytest.raises(ValueError):
            nn.matmul(np.zeros((2, 3)), np.zeros((2, 3)))
        with pytest.raises(ValueError):
            nn.affine(np.zeros((3, 2)), np.zeros(2), np.zeros(2))

    def test_no_recording_outside_tape(self):
        p = Parameter("p", np.ones(2))
        out = nn.tanh(p)
        assert not out.requires_grad and out._backward is None


class TestGradients:
    def test_matmul_3x4_4x2(self):
        rng = np.random.default_rng(0)
        a = Parameter("a", rng.normal(size=(3, 4)))
        b = Parameter("b", rng.normal(size=(4, 2)))
        w = rng.normal(size=(3, 2))
        check_op(lambda: weighted_sum(nn.matmul(a, b), w), [a, b], tol=1e-4)

    @pytest.mark.parametrize("trial", range(100))
    def test_random_primitives(self, trial):
        rng = np.random.default_rng(trial)
        n, m = rng.integers(1, 6, size=2)
        x = Parameter("x", rng.normal(size=n))
        y = Parameter("y", rng.normal(size=n))
        W = Parameter("W", rng.normal(size=(n, m)))
        b = Parameter("b", rng.normal(size=m))
        table = Parameter("table", rng.normal(size=(4, n)))
        w_n, w_m, w_2n = rng.normal(size=n), rng.normal(size=m), rng.normal(size=2 * n)
        k = int(rng.integers(0, 4))
        cases = [
            (lambda: weighted_sum(nn.add(x, y), w_n), [x, y]),
            (lambda: weighted_sum(nn.mul(x, y), w_n), [x, y]),
            (lambda: weighted_sum(nn.tanh(x), w_n), [x]),
            (lambda: weighted_sum(nn.sigmoid(x), w_n), [x]),
            (lambda: weighted_sum(nn.concat([x, y]), w_2n), [x, y]),
            (lambda: weighted_sum(nn.affine(W, x, b), w_m), [W, x, b]),
            (lambda: weighted_sum(nn.matmul(x, W), w_m), [x, W]),
            (lambda: weighted_sum(nn.take(table, k), w_n), [table]),
            (lambda: nn.scale(nn.total(nn.slice_(nn.concat([x, y]), 1, n + 1)), 0.7), [x, y]),
        ]
        for build, params in cases:
            check_op(build, params)

    def test_reuse_accumulates(self):
        x = Parameter("x", np.array([0.3, -0.2]))
        w = np.array([1.5, 2.0])
        check_op(lambda: weighted_sum(nn.mul(nn.tanh(x), nn.tanh(x)), w), [x])


class TestLSTM:
    def test_zero_weights(self):
        rng = np.random.default_rng(1)
        # candidate is tanh(0) = 0, so a fresh cell stays empty whatever the input
        for _ in range(5):
            h, c = nn.lstm_step(rng.normal(size=5) * 10, rng.normal(size=3), np.zeros(3), np.zeros((8, 12)), np.zeros(12))
            assert np.array_equal(h.value, np.zeros(3))
            assert np.array_equal(c.value, np.zeros(3))

    def test_gradients(self):
        rng = np.random.default_rng(2)
        x = Parameter("x", rng.normal(size=5))
        h = Parameter("h", rng.normal(size=7))
        c = Parameter("c", rng.normal(size=7))
        W = Parameter("W", rng.normal(size=(12, 28)) * 0.5)
        b = Parameter("b", rng.normal(size=28))
        wh, wc = rng.normal(size=7), rng.normal(size=7)

        def build():
            h2, c2 = nn.lstm_step(x, h, c, W, b)
            return nn.add(weighted_sum(h2, wh), weighted_sum(c2, wc))

        check_op(build, [x, h, c, W, b], tol=1e-4)

    def test_two_step_gradients(self):
        rng = np.random.default_rng(3)
        W = Parameter("W", rng.normal(size=(6, 12)))
        b = Parameter("b", rng.normal(size=12))
        s0 = Parameter("s0", rng.normal(size=6))
        xs = [rng.normal(size=3) for _ in range(3)]
        w = rng.normal(size=3)

        def build():
            s = s0
            for x in xs:
                s = nn.lstm_cell(x, s, W, b)
            return weighted_sum(nn.hidden(s), w)

        check_op(build, [W, b, s0])

    def test_saturated_gates_hold_cell(self):
        rng = np.random.default_rng(4)
        H, n_in = 4, 3
        W = rng.normal(size=(n_in + H, 4 * H)) * 0.1
        b = np.zeros(4 * H)
        b[:H] = -10.0  # input gate closed
        b[H : 2 * H] = 10.0  # forget gate open
        x = rng.normal(size=n_in)
        h, c = np.zeros(H), rng.normal(size=H)
        for _ in range(20):
            h_t, c_t = nn.lstm_step(x, h, c, W, b)
            # forget gate sigmoid(10) leaks about 4.5e-5 of the cell per step
            assert np.max(np.abs(c_t.value - c) / (np.abs(c) + 1.0)) < 1e-4
            h, c = h_t.value, c_t.value


class TestMaskedSoftmax:
    def test_single_valid(self):
        loss, probs = nn.masked_softmax_nll(np.array([3.0, -1.0, 2.0]), np.array([False, True, False]), 1)
        assert float(loss.value) == 0.0
        assert probs.tolist() == [0.0, 1.0, 0.0]

    def test_equal_logits(self):
        loss, probs = nn.masked_softmax_nll(np.array([0.4, 0.4, 9.0]), np.array([True, True, False]), 0)
        assert probs[:2].tolist() == [0.5, 0.5]
        assert math.isclose(float(loss.value), math.log(2), rel_tol=1e-14)

    def test_brute_force(self):
        rng = np.random.default_rng(5)
        logits = rng.normal(size=9) * 3
        mask = np.zeros(9, dtype=bool)
        mask[[0, 2, 3, 6, 8]] = True
        expected = np.zeros(9)
        denom = sum(math.exp(logits[k]) for k in range(9) if mask[k])
        for k in range(9):
            if mask[k]:
                expected[k] = math.exp(logits[k]) / denom
        for gold in np.flatnonzero(mask):
            loss, probs = nn.masked_softmax_nll(logits, mask, int(gold))
            assert np.max(np.abs(probs - expected)) < 1e-12
            assert abs(float(loss.value) + math.log(expected[gold])) < 1e-12
        assert np.all(probs[~mask] == 0.0)
        assert abs(probs.sum() - 1.0) < 1e-12

    def test_gradient(self):
        rng = np.random.default_rng(6)
        z = Parameter("z", rng.normal(size=7))
        mask = np.array([1, 0, 1, 1, 0, 1, 1], dtype=bool)
        check_op(lambda: nn.masked_softmax_nll(z, mask, 3)[0], [z])

    @pytest.mark.parametrize("seed", range(20))
    def test_non_negative(self, seed):
        rng = np.random.default_rng(seed)
        mask = rng.random(6) < 0.6
        mask[0] = True
        loss, _ = nn.masked_softmax_nll(rng.normal(size=6) * 5, mask, 0)
        assert float(loss.value) >= 0.0

    def test_errors(self):
        with pytest.raises(ValueError):
            nn.masked_softmax_nll(np.zeros(3), np.array([True, False, False]), 1)
        with pytest.raises(ValueError):
            nn.masked_softmax_nll(np.zeros(3), np.zeros(3, dtype=bool), 0)


class TestAdam:
    def test_first_step_magnitude(self):
        p = Parameter("p", np.array([1.0, -2.0, 0.5]))
        p.grad[...] = [0.3, -7.0, 1e-3]
        opt = nn.AdamState(lr=1e-3)
        nn.adam_step(opt, [p])
        # m_hat = g and v_hat = g^2 after bias correction
        np.testing.assert_allclose(p.value, [1.0 - 1e-3, -2.0 + 1e-3, 0.5 - 1e-3], rtol=0, atol=1e-8)

    def test_zero_gradient(self):
        p = Parameter("p", np.array([1.0, 2.0]))
        nn.adam_step(nn.AdamState(), [p])
        assert p.value.tolist() == [1.0, 2.0]

    def test_two_steps_recurrence(self):
        lr, b1, b2, eps = 0.01, 0.9, 0.999, 1e-8
        theta = np.array([0.5, -1.0])
        grads = [np.array([0.2, -0.4]), np.array([-0.1, 0.3])]
        m = v = np.zeros(2)
        expected = theta.copy()
        for t, g in enumerate(grads, start=1):
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g**2
            expected = expected - lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
        p = Parameter("p", theta)
        opt = nn.AdamState(lr=lr)
        for g in grads:
            p.grad[...] = g
            nn.adam_step(opt, [p])
        np.testing.assert_allclose(p.value, expected, rtol=1e-14)
        assert opt.t == 2


class TestClip:
    def test_scales_down(self):
        g = [np.array([3.0, 0.0]), np.array([0.0, 0.0, 3.0 * math.sqrt(3)])]
        norm = nn.clip_global_norm(g, 3.0)
        assert math.isclose(norm, 6.0)
        np.testing.assert_allclose(g[0], [1.5, 0.0])
        np.testing.assert_allclose(g[1], [0.0, 0.0, 1.5 * math.sqrt(3)])

    def test_unchanged(self):
        g = [np.array([0.6, 0.8])]
        nn.clip_global_norm(g, 3.0)
        assert g[0].tolist() == [0.6, 0.8]

    @pytest.mark.parametrize("seed", range(20))
    def test_random(self, seed):
        rng = np.random.default_rng(seed)
        g = [rng.normal(size=s) * rng.uniform(0.1, 3) for s in (3, (2, 4), 5)]
        before = np.concatenate([x.ravel() for x in g])
        norm = nn.clip_global_norm(g, 3.0)
        after = np.concatenate([x.ravel() for x in g])
        assert abs(np.linalg.norm(after) - min(norm, 3.0)) < 1e-12
        cosine = before @ after / (np.linalg.norm(before) * np.linalg.norm(after))
        assert abs(cosine - 1.0) < 1e-12


class TestDropout:
    def test_rate_zero(self):
        x = np.arange(5.0)
        assert np.array_equal(nn.dropout(x, 0.0, True, np.random.default_rng()).value, x)

    def test_evaluation_identity(self):
        x = np.arange(5.0)
        assert np.array_equal(nn.dropout(x, 0.9, False, None).value, x)

    def test_mean_preserved(self):
        x = np.random.default_rng(0).uniform(1, 2, size=100_000)
        y = nn.dropout(x, 0.5, True, np.random.default_rng(1)).value
        assert abs(y.mean() - x.mean()) / x.mean() < 0.02
        assert set(np.unique(np.round(y / x, 12))) <= {0.0, 2.0}

    def test_bad_rate(self):
        with pytest.raises(ValueError):
            nn.dropout(np.ones(2), 1.0, True, np.random.default_rng())

    def test_gradient_uses_same_mask(self):
        x = Parameter("x", np.random.default_rng(2).normal(size=6))
        w = np.arange(1.0, 7.0)
        check_op(lambda: weighted_sum(nn.dropout(x, 0.4, True, np.random.default_rng(9)), w), [x])


class TestGradCheck:
    def test_quadratic(self):
        x = Parameter("x", np.random.default_rng(0).normal(size=6))
        err = nn.grad_check(lambda: nn.scale(nn.total(nn.mul(x, x)), 0.5), [x])
        assert err < 1e-8

    def test_detects_wrong_gradient(self):
        x = Parameter("x", np.array([0.5, 1.5]))

        def broken():
            out = nn.scale(nn.total(nn.mul(x, x)), 0.5)
            out._backward = lambda g: x.accumulate(np.zeros(2)) if out._backward else None
            return out

        assert nn.grad_check(broken, [x]) > 0.5


class TestTape:
    def test_reverse_order_and_clear(self):
        x = Parameter("x", np.array([1.0, 2.0]))
        seen = []
        with Tape() as tape:
            a = nn.tanh(x)
            b = nn.total(a)
            for node in tape.nodes:
                original = node._backward
                node._backward = (lambda f, t: lambda g: (seen.append(t), f(g)))(original, node)
            assert tape.nodes == [a, b]
            tape.backward(b)
        assert seen == [b, a]
        assert len(tape) == 0


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        arrays = {"a": np.arange(6.0).reshape(2, 3), "b": np.array([1.5])}
        nn.save_arrays(tmp_path / "m.npz", arrays, {"note": "x"})
        loaded, meta = nn.load_arrays(tmp_path / "m.npz", {"a": (2, 3), "b": (1,)})
        assert meta == {"note": "x"}
        assert np.array_equal(loaded["a"], arrays["a"])
        assert list(tmp_path.iterdir()) == [tmp_path / "m.npz"]

    def test_shape_mismatch(self, tmp_path):
        nn.save_arrays(tmp_path / "m.npz", {"a": np.zeros((2, 3))})
        with pytest.raises(nn.CheckpointError):
            nn.load_arrays(tmp_path / "m.npz", {"a": (3, 2)})
        with pytest.raises(nn.CheckpointError):
            nn.load_arrays(tmp_path / "m.npz", {"a": (2, 3), "b": (1,)})

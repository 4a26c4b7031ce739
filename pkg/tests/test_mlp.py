import numpy as np
import pytest

from cryoplan.mlp import AdamState, Mlp, ModelFormatError, adam_step, load, save


def mse_loss(net: Mlp, x: np.ndarray, y: np.ndarray) -> float:
    q = net.forward(x)
    return float(np.mean((q - y) ** 2))


def analytic_grads(net: Mlp, x: np.ndarray, y: np.ndarray):
    q, acts = net.forward_cached(x)
    return net.backward(acts, (2.0 / len(y)) * (q - y))


def numeric_grads(net: Mlp, x: np.ndarray, y: np.ndarray, eps: float = 1e-6):
    """Central finite differences of the mean squared loss, parameter by
    parameter; the oracle never touches the backprop path."""
    grads = []
    for w, b in zip(net.weights, net.biases):
        gw = np.zeros_like(w)
        for idx in np.ndindex(w.shape):
            orig = w[idx]
            w[idx] = orig + eps
            up = mse_loss(net, x, y)
            w[idx] = orig - eps
            down = mse_loss(net, x, y)
            w[idx] = orig
            gw[idx] = (up - down) / (2 * eps)
        gb = np.zeros_like(b)
        for idx in np.ndindex(b.shape):
            orig = b[idx]
            b[idx] = orig + eps
            up = mse_loss(net, x, y)
            b[idx] = orig - eps
            down = mse_loss(net, x, y)
            b[idx] = orig
            gb[idx] = (up - down) / (2 * eps)
        grads.append((gw, gb))
    return grads


def max_relative_error(analytic, numeric) -> float:
    worst = 0.0
    for (aw, ab), (nw, nb) in zip(analytic, numeric):
        for a, n in ((aw, nw), (ab, nb)):
            denom = np.maximum(np.abs(a) + np.abs(n), 1e-8)
            worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


class TestForward:
    def test_zero_parameters_zero_output(self):
        net = Mlp([5, 8, 1], seed=0)
        for w in net.weights:
            w[:] = 0.0
        x = np.random.default_rng(0).normal(size=(6, 5))
        assert np.array_equal(net.forward(x), np.zeros(6))

    def test_batch_order_preserving(self):
        # BLAS kernels may sum in a different order for different batch
        # shapes, so per-row agreement is to float64 precision, not bitwise.
        net = Mlp([4, 16, 1], seed=1)
        x = np.random.default_rng(1).normal(size=(10, 4))
        out = net.forward(x)
        for i in range(10):
            assert out[i] == pytest.approx(net.forward(x[i : i + 1])[0], rel=1e-12, abs=1e-14)

    def test_duplicated_rows_equal_outputs(self):
        net = Mlp([4, 16, 1], seed=2)
        row = np.random.default_rng(2).normal(size=4)
        out = net.forward(np.stack([row, row, row]))
        assert out[0] == pytest.approx(out[1], rel=1e-12, abs=1e-14)
        assert out[1] == pytest.approx(out[2], rel=1e-12, abs=1e-14)

    def test_shape_mismatch_rejected(self):
        net = Mlp([4, 8, 1], seed=0)
        with pytest.raises(ValueError):
            net.forward(np.zeros((3, 5)))

    def test_default_architecture(self):
        net = Mlp.for_input(32, seed=0)
        assert net.layer_sizes == [32, 128, 256, 128, 1]


class TestBackward:
    def test_gradient_check_over_random_nets(self):
        # 50 seeded nets/inputs against the central-difference oracle.
        worst = 0.0
        for seed in range(50):
            rng = np.random.default_rng(seed)
            net = Mlp([6, 10, 7, 1], seed=seed)
            x = rng.normal(size=(4, 6))
            y = rng.normal(size=4)
            worst = max(
                worst,
                max_relative_error(analytic_grads(net, x, y), numeric_grads(net, x, y)),
            )
        assert worst < 1e-4

    def test_zero_loss_gradient_gives_zero_grads(self):
        net = Mlp([5, 9, 1], seed=3)
        x = np.random.default_rng(3).normal(size=(4, 5))
        _, acts = net.forward_cached(x)
        grads = net.backward(acts, np.zeros(4))
        for gw, gb in grads:
            assert np.all(gw == 0.0) and np.all(gb == 0.0)

    def test_gradient_linearity(self):
        net = Mlp([5, 9, 1], seed=4)
        rng = np.random.default_rng(4)
        x = rng.normal(size=(4, 5))
        d = rng.normal(size=4)
        _, acts = net.forward_cached(x)
        g1 = net.backward(acts, d)
        g2 = net.backward(acts, 2.0 * d)
        for (w1, b1), (w2, b2) in zip(g1, g2):
            assert np.allclose(w2, 2.0 * w1)
            assert np.allclose(b2, 2.0 * b1)


class TestAdam:
    def test_zero_gradients_no_change(self):
        net = Mlp([3, 4, 1], seed=5)
        st = AdamState.for_net(net, lr=0.01)
        before = [w.copy() for w in net.weights]
        zero = [(np.zeros_like(w), np.zeros_like(b)) for w, b in zip(net.weights, net.biases)]
        adam_step(net, zero, st)
        for w, old in zip(net.weights, before):
            assert np.array_equal(w, old)

    def test_first_step_moves_by_lr_sign(self):
        # Closed form: with zero moments, one bias-corrected Adam step is
        # lr * g / (|g| + eps) which is lr * sign(g) for |g| >> eps.
        net = Mlp([2, 2, 1], seed=6)
        st = AdamState.for_net(net, lr=0.01)
        grads = []
        rng = np.random.default_rng(6)
        for w, b in zip(net.weights, net.biases):
            grads.append((rng.choice([-1.0, 1.0], size=w.shape), rng.choice([-1.0, 1.0], size=b.shape)))
        before = [w.copy() for w in net.weights]
        adam_step(net, grads, st)
        for (gw, _), w, old in zip(grads, net.weights, before):
            assert np.allclose(old - w, 0.01 * np.sign(gw), atol=1e-9)

    def test_step_counter_increments(self):
        net = Mlp([2, 2, 1], seed=7)
        st = AdamState.for_net(net)
        zero = [(np.zeros_like(w), np.zeros_like(b)) for w, b in zip(net.weights, net.biases)]
        adam_step(net, zero, st)
        assert st.t == 1
        adam_step(net, zero, st)
        assert st.t == 2


class TestSaveLoad:
    def test_round_trip_bitwise(self, tmp_path):
        net = Mlp([7, 12, 1], seed=8)
        path = tmp_path / "net.bin"
        save(net, path)
        loaded = load(path)
        x = np.random.default_rng(8).normal(size=(5, 7))
        assert np.array_equal(net.forward(x), loaded.forward(x))
        assert net.parameters_equal(loaded)

    def test_truncated_file_rejected(self, tmp_path):
        net = Mlp([7, 12, 1], seed=9)
        path = tmp_path / "net.bin"
        save(net, path)
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) - 40])
        with pytest.raises(ModelFormatError):
            load(path)

    def test_wrong_input_dim_rejected(self, tmp_path):
        net = Mlp([7, 12, 1], seed=10)
        path = tmp_path / "net.bin"
        save(net, path)
        with pytest.raises(ModelFormatError, match="input width"):
            load(path, expected_input_dim=32)

    def test_not_a_container_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"not a container at all")
        with pytest.raises(ModelFormatError):
            load(path)

    def test_deterministic_bytes(self, tmp_path):
        net = Mlp([7, 12, 1], seed=11)
        a, b = tmp_path / "a.bin", tmp_path / "b.bin"
        save(net, a)
        save(net, b)
        assert a.read_bytes() == b.read_bytes()

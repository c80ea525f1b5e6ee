import numpy as np
import pytest

from gradcheck import max_relative_error, numeric_gradients, reference_loss
from ldu import nn
from ldu.errors import InvalidArgumentError, ParseError, TrainingDivergedError
from ldu.numerics import softmax


def test_init_is_deterministic_and_shaped():
    specs = [nn.LayerSpec(2, 3), nn.LayerSpec(3, 2, "identity")]
    a = nn.init_params(specs, 11)
    b = nn.init_params(specs, 11)
    assert a.equals(b)
    assert [w.shape for w in a.weights] == [(3, 2), (2, 3)]
    assert [x.shape for x in a.biases] == [(3,), (2,)]
    assert all(np.all(x == 0) for x in a.biases)
    assert not a.equals(nn.init_params(specs, 12))


def test_init_respects_glorot_bound():
    p = nn.init_params(nn.mlp_specs(30, [50], 2), 0)
    for w in p.weights:
        limit = np.sqrt(6.0 / sum(w.shape))
        assert np.all(np.abs(w) <= limit)
        assert np.abs(w).max() > 0.8 * limit


def test_init_rejects_broken_chain():
    with pytest.raises(InvalidArgumentError):
        nn.init_params([nn.LayerSpec(2, 3), nn.LayerSpec(4, 2)], 0)


def test_forward_zero_params():
    p = nn.init_params(nn.mlp_specs(4, [5], 3), 0)
    for w in p.weights:
        w[...] = 0.0
    np.testing.assert_array_equal(nn.forward(p, np.ones(4)), np.zeros(3))


def test_forward_affine_layer(rng):
    w, b, x = rng.normal(size=(3, 4)), rng.normal(size=3), rng.normal(size=4)
    p = nn.NetworkParams([w], [b], ["identity"])
    np.testing.assert_allclose(nn.forward(p, x), w @ x + b, atol=1e-14)


def test_forward_dimension_mismatch():
    p = nn.init_params(nn.mlp_specs(4, [5], 3), 0)
    with pytest.raises(InvalidArgumentError):
        nn.forward(p, np.ones(3))


def test_linear_cross_entropy_gradient_closed_form(rng, backend):
    w, b = rng.normal(size=(2, 3)), rng.normal(size=2)
    x, t = rng.normal(size=3), 1
    p = nn.NetworkParams([w], [b], ["identity"])
    _, gw, gb = nn.network_gradients(p, x[None, :], [t], nn.TrainConfig(), backend=backend)
    delta = softmax(w @ x + b) - np.eye(2)[t]
    np.testing.assert_allclose(gw[0], np.outer(delta, x), atol=1e-14)
    np.testing.assert_allclose(gb[0], delta, atol=1e-14)


@pytest.mark.parametrize("loss,alpha", [("cross_entropy", 0.0), ("defer", 0.0), ("defer", 0.5), ("defer", 1.5)])
def test_gradient_check_small_net(rng, backend, loss, alpha):
    out = 3
    worst = 0.0
    for case in range(10):
        p = nn.init_params(nn.mlp_specs(2, [3], out), case)
        for bias in p.biases:
            bias[...] = rng.normal(scale=0.5, size=bias.shape)
        x = rng.normal(size=(4, 2))
        n_classes = out - 1 if loss == "defer" else out
        y = rng.integers(0, n_classes, 4)
        cfg = nn.TrainConfig(loss=loss, alpha=alpha)
        value, gw, gb = nn.network_gradients(p, x, y, cfg, backend=backend)
        assert value == pytest.approx(reference_loss(p, x, y, loss == "defer", alpha), abs=1e-12)
        worst = max(worst, max_relative_error((gw, gb), numeric_gradients(p, x, y, loss == "defer", alpha)))
    assert worst < 1e-5


def test_gradient_mean_invariance(rng, backend):
    p = nn.init_params(nn.mlp_specs(3, [4], 3), 1)
    x, y = rng.normal(size=(5, 3)), rng.integers(0, 2, 5)
    cfg = nn.TrainConfig(loss="defer", alpha=0.7)
    l1, gw1, gb1 = nn.network_gradients(p, x, y, cfg, backend=backend)
    l2, gw2, gb2 = nn.network_gradients(p, np.vstack([x, x]), np.concatenate([y, y]), cfg, backend=backend)
    assert l1 == pytest.approx(l2, abs=1e-14)
    for a, b in zip(gw1 + gb1, gw2 + gb2):
        np.testing.assert_allclose(a, b, atol=1e-15)


def test_invalid_targets():
    p = nn.init_params(nn.mlp_specs(3, [4], 3), 1)
    with pytest.raises(InvalidArgumentError):
        nn.network_gradients(p, np.zeros((1, 3)), [2], nn.TrainConfig(loss="defer"))
    with pytest.raises(InvalidArgumentError):
        nn.network_gradients(p, np.zeros((1, 3)), [], nn.TrainConfig())


def _blobs(n=200):
    # linearly separable: a gap of 2 sigma around x0 = 0
    z = np.random.default_rng(3).normal(size=(n, 2))
    y = np.arange(n) % 2
    x = z.copy()
    x[:, 0] = np.where(y == 1, 1.0, -1.0) * (1.0 + np.abs(z[:, 0]))
    return x, y


def test_zero_epochs_returns_init():
    x, y = _blobs()
    specs = nn.mlp_specs(2, [8], 2)
    cfg = nn.TrainConfig(epochs=0, seed=4)
    assert nn.train(x, y, specs, cfg).equals(nn.init_params(specs, 4))


def test_training_is_deterministic(backend):
    x, y = _blobs()
    specs = nn.mlp_specs(2, [8], 2)
    cfg = nn.TrainConfig(epochs=5, learning_rate=1e-2, seed=9)
    a = nn.train(x, y, specs, cfg, backend=backend)
    b = nn.train(x, y, specs, cfg, backend=backend)
    assert nn.format_params(a) == nn.format_params(b)


def test_training_separates_blobs(backend):
    x, y = _blobs()
    cfg = nn.TrainConfig(epochs=50, learning_rate=1e-2, optimizer="adam")
    p = nn.train(x, y, nn.mlp_specs(2, [8], 2), cfg, backend=backend)
    acc = np.mean(np.argmax(nn.forward_batch(p, x), axis=1) == y)
    assert acc >= 0.95


def test_full_batch_gradient_descent_is_monotone(rng, backend):
    x = rng.normal(size=(60, 3))
    y = (x @ np.array([1.0, -2.0, 0.5]) + rng.normal(scale=0.5, size=60) > 0).astype(int)
    cfg = nn.TrainConfig(epochs=100, learning_rate=1e-3, batch_size=60, optimizer="sgd")
    res = nn.train(x, y, [nn.LayerSpec(3, 2, "identity")], cfg, backend=backend, return_losses=True)
    assert np.all(np.diff(res.losses) <= 0.0)


def test_weight_decay_shrinks_weights(backend):
    x, y = _blobs()
    specs = nn.mlp_specs(2, [8], 2)
    plain = nn.train(x, y, specs, nn.TrainConfig(epochs=10, learning_rate=1e-2), backend=backend)
    decayed = nn.train(x, y, specs, nn.TrainConfig(epochs=10, learning_rate=1e-2, weight_decay=0.5),
                       backend=backend)
    assert np.linalg.norm(decayed.weights[0]) < np.linalg.norm(plain.weights[0])


def test_divergence_names_the_step(backend):
    x, y = _blobs()
    cfg = nn.TrainConfig(epochs=3, learning_rate=1e308, optimizer="sgd", batch_size=50)
    with pytest.raises(TrainingDivergedError) as info:
        nn.train(100.0 * x, y, [nn.LayerSpec(2, 2, "identity")], cfg, backend=backend)
    assert info.value.step is not None and info.value.step >= 1
    assert f"step {info.value.step}" in str(info.value)


def test_train_config_validation():
    with pytest.raises(InvalidArgumentError):
        nn.TrainConfig(learning_rate=0)
    with pytest.raises(InvalidArgumentError):
        nn.TrainConfig(optimizer="rmsprop")
    with pytest.raises(InvalidArgumentError):
        nn.TrainConfig(epochs=-1)


def test_serialisation_round_trip(tmp_path):
    p = nn.init_params(nn.mlp_specs(5, [7, 4], 3), 2)
    p.biases[1][:] = np.linspace(-1, 1, 4) / 3
    path = tmp_path / "net.txt"
    nn.save_params(p, path)
    q = nn.load_params(path)
    assert q.equals(p)
    assert q.activations == ["sigmoid", "sigmoid", "identity"]
    nn.save_params(q, tmp_path / "again.txt")
    assert path.read_bytes() == (tmp_path / "again.txt").read_bytes()


def test_serialisation_line_format():
    p = nn.NetworkParams([np.array([[0.1, 0.2]])], [np.array([0.3])], ["identity"])
    lines = nn.format_params(p).splitlines()
    assert lines[1] == "0 W 1 2 0.10000000000000001 0.20000000000000001"
    assert lines[2] == "0 b 1 1 0.29999999999999999"


def test_parse_rejects_bad_tensor():
    with pytest.raises(ParseError) as info:
        nn.parse_params("0 W 2 2 1 2 3\n0 b 2 1 0 0\n")
    assert info.value.line == 1

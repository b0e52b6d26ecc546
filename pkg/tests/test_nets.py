import numpy as np
import pytest

from ebmlab.nets import (
    DenseNet,
    SimpleRecurrentCell,
    load_checkpoint,
    save_checkpoint,
)
from ebmlab.oracle import central_difference
from ebmlab.rng import derive_rng


def test_zero_weights_tanh_gives_zero_output():
    net = DenseNet([3, 4, 2], ["tanh", "tanh"], seed=0)
    for W in net.weights:
        W[:] = 0.0
    np.testing.assert_array_equal(net.output(np.ones(3)), np.zeros(2))


def test_identity_single_layer_passes_input_through():
    net = DenseNet([3, 3], ["identity"], seed=0)
    net.weights[0] = np.eye(3)
    x = np.array([0.5, -1.0, 2.0])
    np.testing.assert_array_equal(net.output(x), x)


def test_forward_matches_independent_reimplementation():
    net = DenseNet([4, 5, 3], ["tanh", "logistic"], seed=9)
    rng = derive_rng(9, "reimpl")
    x = rng.normal(size=4)
    # straight re-evaluation with scalar loops
    a = list(x)
    for layer, kind in enumerate(net.nonlinearities):
        W, b = net.weights[layer], net.biases[layer]
        z = [sum(W[i][j] * a[j] for j in range(len(a))) + b[i] for i in range(W.shape[0])]
        if kind == "tanh":
            a = [np.tanh(v) for v in z]
        elif kind == "logistic":
            a = [1.0 / (1.0 + np.exp(-v)) for v in z]
        else:
            a = z
    np.testing.assert_allclose(net.output(x), np.array(a), rtol=1e-12, atol=1e-14)


def test_linear_backward_gives_input_outer_product():
    net = DenseNet([3, 1], ["identity"], seed=2)
    x = np.array([1.0, -2.0, 0.5])
    cache = net.forward(x)
    grads, input_grad = net.backward(cache, np.array([1.0]))
    np.testing.assert_array_equal(grads["W0"], x[None, :])
    np.testing.assert_array_equal(grads["b0"], np.array([1.0]))
    np.testing.assert_array_equal(input_grad, net.weights[0][0])


def test_densenet_backward_matches_finite_differences():
    rng = derive_rng(4, "fd")
    net = DenseNet([3, 6, 4, 1], ["tanh", "logistic", "identity"], seed=4)
    x = rng.normal(size=3)
    cache = net.forward(x)
    grads, input_grad = net.backward(cache, np.array([1.0]))

    def f_params(theta):
        net.set_flat_params(theta)
        return float(net.output(x)[0])

    theta0 = net.get_flat_params()
    fd = central_difference(f_params, theta0, h=1e-5)
    net.set_flat_params(theta0)
    np.testing.assert_allclose(grads.flat(), fd, rtol=1e-5, atol=1e-8)

    fd_in = central_difference(lambda v: float(net.output(v)[0]), x, h=1e-5)
    np.testing.assert_allclose(input_grad, fd_in, rtol=1e-5, atol=1e-8)


def test_recurrent_bptt_matches_finite_differences():
    rng = derive_rng(5, "rnn")
    cell = SimpleRecurrentCell(2, 3, seed=5)
    inputs = rng.normal(size=(5, 2))
    head = rng.normal(size=3)

    def loss_from(theta):
        cell.set_flat_params(theta)
        hs = cell.forward(inputs)["hs"]
        return float(sum(head @ h for h in hs[1:]))

    cache = cell.forward(inputs)
    grads, input_grads = cell.backward(cache, np.tile(head, (5, 1)))
    theta0 = cell.get_flat_params()
    fd = central_difference(loss_from, theta0, h=1e-5)
    cell.set_flat_params(theta0)
    np.testing.assert_allclose(grads.flat(), fd, rtol=1e-5, atol=1e-8)

    def loss_from_inputs(flat):
        hs = cell.forward(flat.reshape(5, 2))["hs"]
        return float(sum(head @ h for h in hs[1:]))

    fd_in = central_difference(loss_from_inputs, inputs.ravel(), h=1e-5)
    np.testing.assert_allclose(input_grads.ravel(), fd_in, rtol=1e-5, atol=1e-8)


def test_gradient_check_on_100_random_nets():
    worst = 0.0
    for trial in range(100):
        rng = derive_rng(trial, "sweep")
        sizes = [int(rng.integers(1, 4)) for _ in range(3)] + [1]
        kinds = [str(rng.choice(["tanh", "logistic", "identity"])) for _ in range(3)]
        net = DenseNet(sizes, kinds, seed=1000 + trial)
        x = rng.normal(size=sizes[0])
        cache = net.forward(x)
        grads, _ = net.backward(cache, np.array([1.0]))

        def f(theta, net=net, x=x):
            net.set_flat_params(theta)
            return float(net.output(x)[0])

        theta0 = net.get_flat_params()
        fd = central_difference(f, theta0, h=1e-5)
        net.set_flat_params(theta0)
        denom = np.maximum(np.abs(fd), 1e-3)
        worst = max(worst, float(np.max(np.abs(grads.flat() - fd) / denom)))
    assert worst < 1e-4


def test_batched_forward_backward_consistent_with_single():
    net = DenseNet([3, 4, 2], seed=7)
    rng = derive_rng(7, "batch")
    xs = rng.normal(size=(6, 3))
    out = net.output(xs)
    for i in range(6):
        np.testing.assert_allclose(net.output(xs[i]), out[i], rtol=1e-14)
    g = rng.normal(size=(6, 2))
    cache = net.forward(xs)
    grads, input_grads = net.backward(cache, g)
    acc = np.zeros_like(grads.flat())
    for i in range(6):
        ci = net.forward(xs[i])
        gi, ii = net.backward(ci, g[i])
        acc += gi.flat()
        np.testing.assert_allclose(ii, input_grads[i], rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(grads.flat(), acc, rtol=1e-12, atol=1e-14)


def test_determinism_same_seed_bit_identical():
    a = DenseNet([3, 5, 2], seed=42)
    b = DenseNet([3, 5, 2], seed=42)
    assert all((wa == wb).all() for wa, wb in zip(a.weights, b.weights))
    x = np.linspace(-1, 1, 3)
    np.testing.assert_array_equal(a.output(x), b.output(x))
    c1 = SimpleRecurrentCell(2, 4, seed=42)
    c2 = SimpleRecurrentCell(2, 4, seed=42)
    assert (c1.Wx == c2.Wx).all() and (c1.Wh == c2.Wh).all()


def test_checkpoint_roundtrip_is_lossless(tmp_path):
    net = DenseNet([4, 7, 3], seed=3)
    net.weights[0] += np.pi * 1e-7  # non-round values
    path = tmp_path / "net.json"
    save_checkpoint(path, net.param_vector(), meta={"kind": "densenet"})
    loaded, meta = load_checkpoint(path)
    assert meta["kind"] == "densenet"
    np.testing.assert_array_equal(loaded.flat(), net.param_vector().flat())
    other = DenseNet([4, 7, 3], seed=99)
    other.set_param_vector(loaded)
    np.testing.assert_array_equal(other.get_flat_params(), net.get_flat_params())


def test_shape_errors():
    net = DenseNet([3, 2], seed=0)
    with pytest.raises(ValueError):
        net.forward(np.zeros(4))
    cache = net.forward(np.zeros(3))
    with pytest.raises(ValueError):
        net.backward(cache, np.zeros(3))
    cell = SimpleRecurrentCell(2, 3, seed=0)
    with pytest.raises(ValueError):
        cell.forward(np.zeros((4, 3)))
    cache = cell.forward(np.zeros((4, 2)))
    with pytest.raises(ValueError):
        cell.backward(cache, np.zeros((5, 3)))

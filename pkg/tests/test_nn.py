import numpy as np
import pytest

from playbench.nn import (
    DenseNet,
    MomentumSGD,
    bce_logits_loss,
    mse_loss,
    net_from_doc,
    net_to_doc,
    sigmoid,
)


def finite_difference_grads(net, x, y, loss_fn, eps=1e-6):
    """Central-difference gradient of loss_fn(net(x), y) per parameter."""
    grads = []
    for param in net.weights + net.biases:
        g = np.zeros_like(param)
        it = np.nditer(param, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            old = param[idx]
            param[idx] = old + eps
            lp, _ = loss_fn(net.forward(x)[0], y)
            param[idx] = old - eps
            lm, _ = loss_fn(net.forward(x)[0], y)
            param[idx] = old
            g[idx] = (lp - lm) / (2 * eps)
        grads.append(g)
    return grads


def make_net_off_kinks(dims, rng, x, margin=1e-3):
    """A net whose pre-activations stay away from the ReLU kink at x.

    Central differences are meaningless across the kink, so the check
    fixture re-rolls until every pre-activation clears the step size.
    """
    for _ in range(50):
        net = DenseNet(dims, rng)
        for b in net.biases:
            b += rng.standard_normal(b.shape) * 0.3
        _, pres = net.forward(x)
        if min(np.abs(p).min() for p in pres) > margin:
            return net
    raise AssertionError("could not find a kink-free configuration")


@pytest.mark.parametrize("loss_fn", [mse_loss, bce_logits_loss])
def test_gradient_check_against_central_differences(loss_fn):
    rng = np.random.default_rng(12)
    x = rng.standard_normal((10, 6))
    net = make_net_off_kinks([6, 9, 9, 4], rng, x)
    if loss_fn is bce_logits_loss:
        y = (rng.random((10, 4)) > 0.5).astype(np.float64)
    else:
        y = rng.standard_normal((10, 4))
    out, pres = net.forward(x)
    _, grad_out = loss_fn(out, y)
    gw, gb = net.backward(x, pres, grad_out)
    numeric = finite_difference_grads(net, x, y, loss_fn)
    worst = 0.0
    for analytic, fd in zip(gw + gb, numeric):
        denom = np.maximum(np.abs(analytic) + np.abs(fd), 1e-8)
        worst = max(worst, float((np.abs(analytic - fd) / denom).max()))
    assert worst < 1e-4, worst


def test_forward_shapes_and_relu():
    rng = np.random.default_rng(0)
    net = DenseNet([3, 5, 2], rng)
    out, pres = net.forward(np.zeros((7, 3)))
    assert out.shape == (7, 2)
    assert pres[0].shape == (7, 5)


def test_rejects_bad_dims():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        DenseNet([4], rng)
    with pytest.raises(ValueError):
        DenseNet([4, 0, 2], rng)


def test_bce_matches_naive_formula():
    rng = np.random.default_rng(1)
    z = rng.standard_normal((6, 3)) * 3
    y = (rng.random((6, 3)) > 0.5).astype(np.float64)
    loss, _ = bce_logits_loss(z, y)
    p = sigmoid(z)
    naive = float(-(y * np.log(p) + (1 - y) * np.log(1 - p)).mean())
    assert abs(loss - naive) < 1e-9


def test_momentum_descends_quadratic():
    rng = np.random.default_rng(2)
    net = DenseNet([2, 4, 1], rng)
    x = rng.standard_normal((32, 2))
    y = (x[:, :1] * 0.5 + x[:, 1:] * -0.25) + 1.0
    opt = MomentumSGD(net, learning_rate=0.01)
    first = None
    for _ in range(200):
        out, pres = net.forward(x)
        loss, grad = mse_loss(out, y)
        if first is None:
            first = loss
        gw, gb = net.backward(x, pres, grad)
        opt.step(gw, gb)
    final, _ = mse_loss(net.forward(x)[0], y)
    assert final < 0.05 * first


def test_net_doc_round_trip():
    rng = np.random.default_rng(3)
    net = DenseNet([4, 6, 2], rng)
    back = net_from_doc(net_to_doc(net))
    x = rng.standard_normal((5, 4))
    assert np.array_equal(net(x), back(x))

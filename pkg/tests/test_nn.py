import math

import numpy as np
import pytest

from futurelens.nn import (DenseNet, IDENTITY, Layer, NnError, OptimizerState,
                           RELU, adagrad_step, backward, build_net, forward,
                           gaussian_nll, gaussian_nll_grads)


def identity_net(n=3):
    return DenseNet([Layer(w=np.eye(n), b=np.zeros(n), act=IDENTITY)])


class TestForward:
    def test_identity_layer(self):
        x = np.array([1.0, -2.0, 3.0])
        assert np.array_equal(forward(identity_net(), x), x)

    def test_relu_kills_negatives(self):
        net = DenseNet([Layer(w=np.eye(2), b=np.array([-5.0, -5.0]), act=RELU)])
        assert np.array_equal(forward(net, np.array([1.0, 2.0])), np.zeros(2))

    def test_two_layer_hand_computed(self):
        w1 = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        b1 = np.array([0.5, -0.5])
        w2 = np.array([[2.0], [3.0]])
        b2 = np.array([1.0])
        net = DenseNet([Layer(w1, b1, RELU), Layer(w2, b2, IDENTITY)])
        x = np.array([1.0, 2.0, 3.0])
        h = np.maximum(x @ w1 + b1, 0)          # [4.5, 4.5]
        expect = h @ w2 + b2                    # [23.5]
        assert forward(net, x).tolist() == pytest.approx(expect.tolist())

    def test_dim_mismatch(self):
        with pytest.raises(NnError):
            forward(identity_net(3), np.zeros(4))

    def test_batch_matches_single(self, rng):
        net = build_net([4, 8, 2], rng)
        X = rng.normal(size=(5, 4))
        batch = forward(net, X)
        for i in range(5):
            assert np.allclose(batch[i], forward(net, X[i]))


class TestGaussianNll:
    def test_zero_residual_unit_sigma(self):
        assert gaussian_nll(1.0, 0.0, 1.0) == pytest.approx(0.5 * math.log(2 * math.pi))

    def test_closed_form(self):
        assert gaussian_nll(0.0, 0.0, 1.0) == pytest.approx(0.5 + 0.9189385, abs=1e-6)

    def test_clamp_floor_finite(self):
        v = gaussian_nll(0.0, -100.0, 0.5)
        assert np.isfinite(v)
        assert v == gaussian_nll(0.0, -5.0, 0.5)

    def test_non_finite_input(self):
        with pytest.raises(NnError):
            gaussian_nll(np.nan, 0.0, 1.0)

    def test_grad_wrt_mean(self):
        d_mean, _ = gaussian_nll_grads(0.0, 0.0, 1.0)
        assert d_mean == pytest.approx(-1.0)

    def test_grads_match_finite_difference(self, rng):
        for _ in range(20):
            m, ls, t = rng.normal(), rng.uniform(-3, 1.5), rng.normal()
            h = 1e-6
            fd_m = (gaussian_nll(m + h, ls, t) - gaussian_nll(m - h, ls, t)) / (2 * h)
            fd_ls = (gaussian_nll(m, ls + h, t) - gaussian_nll(m, ls - h, t)) / (2 * h)
            d_m, d_ls = gaussian_nll_grads(m, ls, t)
            assert d_m == pytest.approx(fd_m, abs=1e-4)
            assert d_ls == pytest.approx(fd_ls, abs=1e-4)


def net_loss(net, x, target):
    """Scalar loss: gaussian NLL of a 2-output net read as (mean, log_std)."""
    out = forward(net, x)
    return float(gaussian_nll(out[0], out[1], target))


def analytic_grads(net, x, target):
    caches = []
    out = forward(net, x, caches)
    d_mean, d_ls = gaussian_nll_grads(out[0], out[1], target)
    _, grads = backward(net, caches, np.array([d_mean, d_ls]))
    return grads


def fd_grads(net, x, target, h=1e-5):
    grads = []
    for p in net.params():
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + h
            up = net_loss(net, x, target)
            p[idx] = orig - h
            down = net_loss(net, x, target)
            p[idx] = orig
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return grads


class TestBackward:
    @pytest.mark.parametrize("dims", [[4, 6, 2], [3, 5, 4, 2], [18, 8, 2]])
    def test_finite_difference_agreement(self, dims, rng):
        net = build_net(dims, rng)
        x = rng.normal(size=dims[0])
        target = float(rng.normal())
        ana = analytic_grads(net, x, target)
        num = fd_grads(net, x, target)
        for a, n in zip(ana, num):
            rel = np.abs(a - n) / np.maximum(1.0, np.abs(a))
            assert rel.max() < 1e-4

    def test_dead_relu_zero_gradient(self):
        w1 = np.array([[1.0]])
        b1 = np.array([-10.0])        # relu always dead for x in [0, 1]
        w2 = np.array([[1.0, 1.0]])
        net = DenseNet([Layer(w1, b1, RELU), Layer(w2, np.zeros(2), IDENTITY)])
        grads = analytic_grads(net, np.array([0.5]), 0.3)
        assert np.all(grads[0] == 0.0) and np.all(grads[1] == 0.0)


class TestAdagrad:
    def test_hand_computed_step(self):
        p = [np.array([1.0])]
        g = [np.array([2.0])]
        opt = OptimizerState(lr=0.1, eps=1e-8)
        adagrad_step(p, g, opt)
        assert opt.accum[0][0] == 4.0
        assert p[0][0] == pytest.approx(1.0 - 0.1 * 2.0 / (2.0 + 1e-8))

    def test_zero_gradient_no_change(self):
        p = [np.array([1.0, 2.0])]
        opt = OptimizerState(lr=0.1)
        adagrad_step(p, [np.zeros(2)], opt)
        assert p[0].tolist() == [1.0, 2.0]
        assert np.all(opt.accum[0] == 0.0)

    def test_second_step_smaller(self):
        p = [np.array([0.0])]
        opt = OptimizerState(lr=0.1)
        adagrad_step(p, [np.array([1.0])], opt)
        first = abs(p[0][0])
        before = p[0][0]
        adagrad_step(p, [np.array([1.0])], opt)
        assert abs(p[0][0] - before) < first

    def test_shape_mismatch(self):
        opt = OptimizerState()
        with pytest.raises(NnError):
            adagrad_step([np.zeros(2)], [np.zeros(3)], opt)

    def test_descends_on_quadratic(self):
        # loss = (p - 3)^2, gradient 2(p - 3)
        p = [np.array([0.0])]
        opt = OptimizerState(lr=0.05)
        prev = (p[0][0] - 3.0) ** 2
        for _ in range(5):
            adagrad_step(p, [np.array([2 * (p[0][0] - 3.0)])], opt)
            cur = (p[0][0] - 3.0) ** 2
            assert cur < prev
            prev = cur

    def test_lr_decay_per_epoch(self):
        opt = OptimizerState(lr=1.0, decay=0.25)
        opt.end_epoch()
        opt.end_epoch()
        assert opt.effective_lr() == 0.5

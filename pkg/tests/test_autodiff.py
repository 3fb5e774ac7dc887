"""Tape mechanics and gradient correctness of every registered primitive."""

import numpy as np
import pytest

from hypca.core import ops
from hypca.core.gradcheck import grad_check
from hypca.core.tensor import (Parameter, Tape, Tensor, add, mul, relu,
                               sigmoid, sum_along)
from hypca.gradsuite import op_checks

import oracles


class TestTapeMechanics:
    def test_relu_sum_grad_ones(self):
        x = Tensor(np.array([1.0, 2.0, 3.0]))
        with Tape() as tape:
            loss = sum_along(relu(x))
            tape.backward(loss)
        assert np.array_equal(x.grad, np.ones(3))

    def test_sigmoid_sum_grad_quarter(self):
        x = Tensor(np.zeros((2, 3)))
        with Tape() as tape:
            loss = sum_along(sigmoid(x))
            tape.backward(loss)
        assert np.allclose(x.grad, 0.25, atol=0)

    def test_double_backward_errors(self):
        x = Tensor(np.ones(2))
        with Tape() as tape:
            loss = sum_along(mul(x, x))
            tape.backward(loss)
        with pytest.raises(RuntimeError):
            tape.backward(loss)

    def test_non_scalar_loss_errors(self):
        x = Tensor(np.ones(2))
        with Tape() as tape:
            y = mul(x, 2.0)
            with pytest.raises(ValueError):
                tape.backward(y)

    def test_backward_visits_reverse_order(self):
        x = Tensor(np.ones(3))
        with Tape() as tape:
            a = mul(x, 2.0)
            b = add(a, 1.0)
            loss = sum_along(b)
        visited = []
        for rec in reversed(tape._records):
            visited.append(rec.out)
        assert visited == [loss, b, a]
        tape.backward(loss)
        assert np.array_equal(x.grad, np.full(3, 2.0))

    def test_parameter_grads_accumulate_until_zeroed(self):
        w = Parameter("w", np.ones(3), init="test")
        for expected in (2.0, 4.0):
            with Tape() as tape:
                loss = sum_along(mul(w, 2.0))
                tape.backward(loss)
            assert np.allclose(w.grad, expected, atol=0)
        w.zero_grad()
        assert np.array_equal(w.grad, np.zeros(3))

    def test_shared_input_accumulates(self):
        x = Tensor(np.array([3.0]))
        with Tape() as tape:
            loss = sum_along(mul(x, x))   # d/dx x^2 = 2x
            tape.backward(loss)
        assert np.allclose(x.grad, 6.0, atol=0)


class TestOpGradients:
    def test_all_registered_ops_pass_fd(self):
        rows = op_checks()
        failures = [r for r in rows if not r["ok"]]
        assert not failures, failures

    def test_dense_tight_tolerance(self):
        rng = np.random.default_rng(0)
        x = Tensor(rng.standard_normal((3, 3)))
        w = Parameter("w", rng.standard_normal((3, 3)), "test")
        b = Parameter("b", rng.standard_normal(3), "test")
        err = grad_check(lambda: ops.dense(x, w, b), [x, w, b])
        assert err < 1e-7

    def test_gap_tight_tolerance(self):
        rng = np.random.default_rng(1)
        x = Tensor(rng.standard_normal((2, 3, 4, 4)))
        err = grad_check(lambda: ops.pool_global(x, "GAP"), [x])
        assert err < 1e-9

    def test_max_pool_tie_routes_to_first(self):
        # two equal maxima: gradient must go to the first row-major position
        x = Tensor(np.array([[5.0, 1.0], [1.0, 5.0]]).reshape(1, 1, 2, 2))
        with Tape() as tape:
            y = sum_along(ops.pool_global(x, "GMP"))
            tape.backward(y)
        assert np.array_equal(x.grad.reshape(2, 2), [[1.0, 0.0], [0.0, 0.0]])

    def test_analytic_matches_manual_fd(self):
        # independent scalar-loop finite differences, not grad_check
        rng = np.random.default_rng(2)
        x = Tensor(rng.standard_normal((1, 2, 4, 4)))
        w = Parameter("w", rng.standard_normal((2, 3, 3)), "test")
        b = Parameter("b", rng.standard_normal(2), "test")

        def loss_value():
            from hypca.core.tensor import no_tape
            with no_tape():
                return float(ops.conv2d(x, "DWC", w, b).data.sum())

        with Tape() as tape:
            loss = sum_along(ops.conv2d(x, "DWC", w, b))
            tape.backward(loss)
        fd = oracles.fd_gradient(loss_value, w.data)
        assert np.abs(fd - w.grad).max() < 1e-6


class TestDeterminism:
    def test_same_seed_same_bits(self):
        def run():
            rng = np.random.default_rng(77)
            x = Tensor(rng.standard_normal((2, 4, 6, 6)))
            w = Parameter("w", rng.standard_normal((4, 3, 3)), "test")
            b = Parameter("b", rng.standard_normal(4), "test")
            with Tape() as tape:
                y = ops.conv2d(x, "DDC", w, b, dilation=2)
                y = ops.pool_local(y, "MP", 2)
                loss = sum_along(sigmoid(y))
                tape.backward(loss)
            return y.data.copy(), w.grad.copy()

        y1, g1 = run()
        y2, g2 = run()
        assert np.array_equal(y1, y2)
        assert np.array_equal(g1, g2)

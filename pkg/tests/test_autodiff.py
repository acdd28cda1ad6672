"""Reverse-mode tape: every op against central finite differences."""

import numpy as np
import pytest

from qtomo import autodiff as ad

from oracles import grad_oracle


def check_gradient(build, x0, atol=1e-7):
    """Compare tape gradient of a scalar-valued graph against differences."""
    x0 = np.asarray(x0, dtype=float)

    def value(x):
        return float(build(ad.var(x)).value)

    leaf = ad.var(x0)
    out = build(leaf)
    (grad,) = ad.backward(out, [leaf])
    np.testing.assert_allclose(grad, grad_oracle(value, x0), atol=atol)


class TestOps:
    def test_arithmetic_chain(self):
        check_gradient(lambda x: ad.total((x * 2.0 + 1.0) * x - x / 3.0),
                       np.array([0.4, -1.2, 2.0]))

    def test_scalar_vector_broadcast(self):
        def build(x):
            s = ad.take(x, [0])
            v = ad.take(x, [1, 2, 3])
            return ad.total(s * v + v)
        check_gradient(build, np.array([0.5, 1.0, -2.0, 3.0]))

    def test_trig(self):
        check_gradient(lambda x: ad.total(ad.sin(x) * ad.cos(x * 0.5)),
                       np.array([0.3, -0.7, 1.9]))

    def test_sqrt_square_log_exp(self):
        check_gradient(
            lambda x: ad.total(ad.sqrt(ad.square(x) + 1.0) + ad.log(ad.exp(x))),
            np.array([0.2, -0.8]))

    def test_pow(self):
        check_gradient(lambda x: ad.total(x ** 3), np.array([0.5, -1.5]))

    def test_absolute(self):
        check_gradient(lambda x: ad.total(ad.absolute(x)),
                       np.array([0.4, -0.9, 2.2]))

    def test_absolute_subgradient_zero_at_kink(self):
        leaf = ad.var(np.array([0.0, 1.0]))
        out = ad.total(ad.absolute(leaf))
        (grad,) = ad.backward(out, [leaf])
        np.testing.assert_array_equal(grad, [0.0, 1.0])

    def test_take_scatter_adds(self):
        def build(x):
            return ad.total(ad.take(x, [0, 0, 1]))
        leaf = ad.var(np.array([2.0, 3.0]))
        out = build(leaf)
        (grad,) = ad.backward(out, [leaf])
        np.testing.assert_array_equal(grad, [2.0, 1.0])

    def test_matvec(self):
        m = np.array([[1.0, 2.0], [0.0, -1.0], [3.0, 0.5]])
        check_gradient(lambda x: ad.total(ad.square(ad.matvec(m, x))),
                       np.array([0.7, -0.2]))

    def test_division_by_node(self):
        check_gradient(lambda x: ad.total(1.0 / (x * x + 1.0)),
                       np.array([0.5, 2.0]))

    def test_diamond_reuse(self):
        def build(x):
            y = ad.sin(x)
            return ad.total(y * y + y)
        check_gradient(build, np.array([0.3, 1.1]))

    def test_custom_node(self):
        def build(x):
            value = np.sum(x.value ** 3)
            return ad.custom(value, (x, lambda g: g * 3.0 * x.value ** 2))
        check_gradient(build, np.array([0.4, -0.6, 1.2]))

    def test_ndarray_left_operand(self):
        def build(x):
            return ad.total(np.array([1.0, 2.0, 3.0]) * x)
        check_gradient(build, np.array([0.5, 0.6, 0.7]))

    def test_backward_requires_scalar(self):
        leaf = ad.var(np.array([1.0, 2.0]))
        with pytest.raises(ValueError):
            ad.backward(leaf * 2.0, [leaf])

    def test_unused_leaf_gets_zero(self):
        a = ad.var(np.array([1.0]))
        b = ad.var(np.array([2.0]))
        out = ad.total(a * 3.0)
        grads = ad.backward(out, [a, b])
        np.testing.assert_array_equal(grads[1], [0.0])

"""Autodiff gradients against central finite differences (float64)."""
from __future__ import annotations

import numpy as np
import pytest

from src.autograd import Tensor
from src.autograd import functional as F
from src.autograd.gradcheck import gradient_check, max_relative_error

TOLERANCE = 1e-4


@pytest.fixture
def gen() -> np.random.Generator:
    return np.random.default_rng(7)


def _param(gen: np.random.Generator, *shape: int) -> Tensor:
    return Tensor(gen.normal(size=shape), requires_grad=True)


def test_matmul(gen) -> None:
    a, b = _param(gen, 3, 4), _param(gen, 4, 2)
    weights = gen.normal(size=(3, 2))
    assert gradient_check(lambda: F.sum(F.mul(F.matmul(a, b), weights)), [a, b]) <= TOLERANCE


def test_batched_matmul_with_broadcast(gen) -> None:
    a, b = _param(gen, 2, 3, 4), _param(gen, 4, 5)
    assert gradient_check(lambda: F.sum(F.power(F.matmul(a, b), 2.0)), [a, b]) <= TOLERANCE


def test_relu_away_from_kink(gen) -> None:
    raw = gen.normal(size=(5, 3))
    x = Tensor(np.sign(raw) * (np.abs(raw) + 0.1), requires_grad=True)
    weights = gen.normal(size=(5, 3))
    assert gradient_check(lambda: F.sum(F.mul(F.relu(x), weights)), [x]) <= TOLERANCE


def test_softmax(gen) -> None:
    x = _param(gen, 4, 6)
    weights = gen.normal(size=(4, 6))
    assert gradient_check(lambda: F.sum(F.mul(F.softmax_axis(x, axis=-1), weights)), [x]) <= TOLERANCE


def test_log_softmax(gen) -> None:
    x = _param(gen, 3, 5)
    weights = gen.normal(size=(3, 5))
    assert gradient_check(lambda: F.sum(F.mul(F.log_softmax(x, axis=-1), weights)), [x]) <= TOLERANCE


def test_layernorm(gen) -> None:
    x, gain, bias = _param(gen, 4, 6), _param(gen, 6), _param(gen, 6)
    weights = gen.normal(size=(4, 6))
    loss = lambda: F.sum(F.mul(F.layernorm(x, gain, bias), weights))  # noqa: E731
    assert gradient_check(loss, [x, gain, bias]) <= TOLERANCE


def test_group_norm(gen) -> None:
    x, gain, bias = _param(gen, 2, 3, 3, 8), _param(gen, 8), _param(gen, 8)
    weights = gen.normal(size=(2, 3, 3, 8))
    loss = lambda: F.sum(F.mul(F.group_norm(x, 4, gain, bias), weights))  # noqa: E731
    assert gradient_check(loss, [x, gain, bias]) <= TOLERANCE


def test_elementwise_chain(gen) -> None:
    x = Tensor(gen.uniform(0.5, 2.0, size=(3, 4)), requires_grad=True)
    y = Tensor(gen.uniform(0.5, 2.0, size=(4,)), requires_grad=True)

    def loss() -> Tensor:
        z = F.div(F.exp(F.neg(x)), F.add(y, 1.0))
        return F.mean(F.add(F.log(F.add(F.sigmoid(z), 1.0)), F.abs(F.sub(x, y))))

    assert gradient_check(loss, [x, y]) <= TOLERANCE


def test_reshape_transpose_and_indexing(gen) -> None:
    x = _param(gen, 2, 3, 4)
    weights = gen.normal(size=(3, 8))

    def loss() -> Tensor:
        moved = F.reshape(F.transpose(x, (1, 0, 2)), (3, 8))
        return F.sum(F.mul(F.getitem(moved, (slice(None), slice(0, 8))), weights))

    assert gradient_check(loss, [x]) <= TOLERANCE


def test_max_relative_error_uses_floor() -> None:
    assert max_relative_error(np.array([0.0]), np.array([1e-7]), floor=1e-5) == pytest.approx(1e-2)

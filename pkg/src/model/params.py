"""Parameter containers shared by the neck and the detector."""
from __future__ import annotations

from dataclasses import dataclass, fields, is_dataclass
from typing import Iterator, List, Tuple

import numpy as np

from ..autograd.functional import add, matmul
from ..autograd.tensor import Tensor

__all__ = ["ParamGroup", "Linear", "new_param"]


def new_param(values: np.ndarray, name: str = "") -> Tensor:
    return Tensor(values, requires_grad=True, name=name or None)


class ParamGroup:
    """Mixin for dataclasses whose fields are Tensors, groups, or lists of groups."""

    def named_parameters(self, prefix: str = "") -> List[Tuple[str, Tensor]]:
        return list(self._iter_named(prefix))

    def _iter_named(self, prefix: str) -> Iterator[Tuple[str, Tensor]]:
        assert is_dataclass(self)
        for f in fields(self):
            value = getattr(self, f.name)
            path = f"{prefix}{f.name}"
            if isinstance(value, Tensor):
                if value.name is None:
                    value.name = path
                yield path, value
            elif isinstance(value, ParamGroup):
                yield from value._iter_named(path + ".")
            elif isinstance(value, list):
                for i, item in enumerate(value):
                    if isinstance(item, ParamGroup):
                        yield from item._iter_named(f"{path}.{i}.")

    def parameters(self) -> List[Tensor]:
        return [p for _, p in self.named_parameters()]


@dataclass
class Linear(ParamGroup):
    """y = x @ weight + bias, weight shaped [in, out]."""
    weight: Tensor
    bias: Tensor

    @classmethod
    def init(cls, rng: np.random.Generator, n_in: int, n_out: int) -> "Linear":
        # Glorot uniform weights, zero bias
        limit = np.sqrt(6.0 / (n_in + n_out))
        return cls(
            weight=new_param(rng.uniform(-limit, limit, size=(n_in, n_out))),
            bias=new_param(np.zeros(n_out)),
        )

    @property
    def n_in(self) -> int:
        return int(self.weight.shape[0])

    @property
    def n_out(self) -> int:
        return int(self.weight.shape[1])

    def __call__(self, x: Tensor) -> Tensor:
        return add(matmul(x, self.weight), self.bias)

"""Ordered, named parameter tensors with freeze flags."""

import numpy as np


class ParameterStore:
    """Ordered collection of named float64 tensors.

    Order is fixed at construction time and defines both checkpoint layout
    and initialization draw order.  Frozen tensors are never touched by an
    optimizer step.
    """

    def __init__(self):
        self._order = []
        self._tensors = {}
        self._frozen = {}

    def add(self, name, tensor, frozen=False):
        if name in self._tensors:
            raise ValueError(f"duplicate parameter name {name!r}")
        self._order.append(name)
        self._tensors[name] = np.asarray(tensor, dtype=np.float64)
        self._frozen[name] = bool(frozen)

    def __getitem__(self, name):
        return self._tensors[name]

    def __setitem__(self, name, tensor):
        old = self._tensors[name]
        tensor = np.asarray(tensor, dtype=np.float64)
        if tensor.shape != old.shape:
            raise ValueError(f"cannot assign shape {tensor.shape} to {name!r} "
                             f"of shape {old.shape}")
        self._tensors[name] = tensor

    def __contains__(self, name):
        return name in self._tensors

    def __len__(self):
        return len(self._order)

    @property
    def names(self):
        return tuple(self._order)

    def frozen(self, name):
        return self._frozen[name]

    def set_frozen(self, name, flag=True):
        if name not in self._tensors:
            raise KeyError(name)
        self._frozen[name] = bool(flag)

    def items(self):
        for name in self._order:
            yield name, self._tensors[name], self._frozen[name]

    def copy(self):
        out = ParameterStore()
        for name, tensor, frozen in self.items():
            out.add(name, tensor.copy(), frozen)
        return out

    def size(self):
        return sum(t.size for t in self._tensors.values())

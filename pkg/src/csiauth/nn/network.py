"""Executable layer stacks with a fused sigmoid/cross-entropy head."""

import numpy as np

from .layers import DenseLayer, sigmoid
from .train import cross_entropy_batch


class Network:
    """A feed-forward stack ending in a sigmoid dense unit of width 1.

    `input_kind` says what forward() expects:
      'channels'  (batch, channels, tones)
      'sequence'  (batch, steps, features)
      'flat'      (batch, features)
    """

    def __init__(self, config, store, layers, input_kind):
        head = layers[-1] if layers else None
        if not isinstance(head, DenseLayer) or head.activation != "sigmoid" \
                or head.d_out != 1:
            raise ValueError("network must end with a sigmoid dense layer of width 1")
        self.config = config
        self.store = store
        self.layers = layers
        self.input_kind = input_kind

    def forward(self, x):
        """Class-1 (Eve) probabilities, shape (batch,)."""
        h = np.asarray(x, dtype=np.float64)
        for layer in self.layers:
            h, _ = layer.forward(self.store, h)
        return h[:, 0]

    def loss(self, x, labels):
        """Summed cross-entropy of the batch."""
        return cross_entropy_batch(self.forward(x), labels)

    def loss_and_gradients(self, x, labels):
        """One fused forward/backward pass.

        Returns (summed loss, gradient dict).  The head's sigmoid and the
        cross-entropy are differentiated jointly (dz = f - y).  Gradients
        of frozen tensors are zero.
        """
        labels = np.asarray(labels, dtype=np.float64)
        h = np.asarray(x, dtype=np.float64)
        caches = []
        for layer in self.layers[:-1]:
            h, cache = layer.forward(self.store, h)
            caches.append(cache)
        head = self.layers[-1]
        z = head.preactivation(self.store, h)
        f = sigmoid(z)[:, 0]
        loss = cross_entropy_batch(f, labels)

        grads = {}
        dz = (f - labels)[:, None]
        dh, g = head.backward_from_preactivation(self.store, h, dz)
        grads.update(g)
        for layer, cache in zip(reversed(self.layers[:-1]), reversed(caches)):
            dh, g = layer.backward(self.store, cache, dh)
            grads.update(g)

        for name in self.store.names:
            if self.store.frozen(name):
                grads[name] = np.zeros_like(self.store[name])
        return loss, grads

    def predictions(self, x):
        """Hard labels via the ceiling decision rule (Eve iff f > 1/2)."""
        return np.ceil(self.forward(x) - 0.5).astype(np.int64)

    def copy(self):
        return Network(self.config, self.store.copy(), self.layers, self.input_kind)

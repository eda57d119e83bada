"""Finite-difference gradient oracle."""

import numpy as np


def grad_check(network, inputs, labels, step=1e-5, max_coords=200, rng=None,
               refine_threshold=1e-6):
    """Compare analytic gradients against central finite differences.

    For each non-frozen tensor, up to `max_coords` coordinates are sampled;
    per coordinate the relative error is |fd - g| / max(1e-8, |fd| + |g|)
    and the maximum over all checked coordinates is returned.  Frozen
    tensors contribute 0 (both sides are zero by the freeze contract).

    A coordinate whose error at `step` exceeds `refine_threshold` is
    re-probed at 10*step and the smaller error kept: the small step can
    straddle the roundoff floor of near-zero gradients, the large one a
    ReLU/pooling kink, but a genuinely wrong gradient disagrees at both.
    """
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    if rng is None:
        rng = np.random.default_rng(0)
    inputs = np.asarray(inputs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    _, grads = network.loss_and_gradients(inputs, labels)

    def rel_error(flat, i, g, h):
        orig = flat[i]
        flat[i] = orig + h
        e_plus = network.loss(inputs, labels)
        flat[i] = orig - h
        e_minus = network.loss(inputs, labels)
        flat[i] = orig
        fd = (e_plus - e_minus) / (2.0 * h)
        return abs(fd - g) / max(1e-8, abs(fd) + abs(g))

    max_rel = 0.0
    for name in network.store.names:
        if network.store.frozen(name):
            continue
        tensor = network.store[name]
        flat = tensor.reshape(-1)
        grad = grads[name].reshape(-1)
        if flat.size <= max_coords:
            coords = np.arange(flat.size)
        else:
            coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
        for i in coords:
            rel = rel_error(flat, i, grad[i], step)
            if rel > refine_threshold:
                rel = min(rel, rel_error(flat, i, grad[i], 10.0 * step))
            if rel > max_rel:
                max_rel = rel
    return max_rel

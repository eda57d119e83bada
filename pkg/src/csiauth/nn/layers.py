"""Forward/backward math for the four layer kinds.

Batched internal conventions (all float64):
  feature maps   [B, C, L]   batch, channel, tone
  sequences      [L, B, D]   step-major so the recurrence loop hits
                             contiguous (B, D) blocks
  flat vectors   [B, D]

The module also exposes single-sample functional forms of each forward
pass; these are the reference surface the batched classes are tested
against.
"""

import numpy as np

KERNEL_W = 3        # receptive field 1x3
POOL_W = 3          # pooling window 1x3
POOL_STRIDE = 2


def relu(x):
    return np.maximum(x, 0.0)


def sigmoid(x):
    # split by sign for overflow safety
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


_ACTIVATIONS = {
    "relu": relu,
    "sigmoid": sigmoid,
    "identity": lambda x: x,
    "tanh": np.tanh,
}


def pooled_length(length):
    """Output length of one pooling pass: floor((L-1)/2) + 1."""
    return (length - 1) // POOL_STRIDE + 1


# ---------------------------------------------------------------------------
# single-sample functional forms
# ---------------------------------------------------------------------------

def conv1d_forward(x, filters, bias):
    """Cross-correlate a (C_in, L) input with (C_out, C_in, 3) filters.

    Stride 1, zero padding 1 per side ("same" length), channels summed,
    bias added, ReLU applied.
    """
    x = np.asarray(x, dtype=np.float64)
    filters = np.asarray(filters, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"input must be 2-D (channels, length), got {x.ndim}-D")
    if filters.ndim != 3 or filters.shape[2] != KERNEL_W:
        raise ValueError(f"filters must have shape (c_out, c_in, {KERNEL_W}), "
                         f"got {filters.shape}")
    if filters.shape[1] != x.shape[0]:
        raise ValueError(f"filter input channels {filters.shape[1]} != "
                         f"input channels {x.shape[0]}")
    if bias.shape != (filters.shape[0],):
        raise ValueError(f"bias shape {bias.shape} != (c_out,)=({filters.shape[0]},)")
    y, _ = _conv_batch_forward(x[None], filters, bias)
    return y[0]


def maxpool_forward(x):
    """Max-pool a (C, L) input: window 3, stride 2, one -inf pad per side."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"input must be 2-D (channels, length), got {x.ndim}-D")
    y, _ = _pool_batch_forward(x[None])
    return y[0]


def recurrent_forward(inputs, w_yh, w_hh):
    """Run a vanilla tanh recurrence over an (L, D_in) sequence.

    h_0 = 0, h_l = tanh(W_hh h_{l-1} + W_yh y_l); returns all hidden
    states as (L, H).  No bias term.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    w_yh = np.asarray(w_yh, dtype=np.float64)
    w_hh = np.asarray(w_hh, dtype=np.float64)
    if inputs.ndim != 2:
        raise ValueError(f"inputs must be 2-D (steps, features), got {inputs.ndim}-D")
    h = w_hh.shape[0]
    if w_hh.shape != (h, h):
        raise ValueError(f"w_hh must be square, got {w_hh.shape}")
    if w_yh.shape != (h, inputs.shape[1]):
        raise ValueError(f"w_yh shape {w_yh.shape} != (hidden, d_in)="
                         f"({h}, {inputs.shape[1]})")
    hs, _ = _recur_batch_forward(np.ascontiguousarray(inputs[:, None, :]), w_yh, w_hh)
    return hs[1:, 0, :]


def dense_forward(x, weight, bias, activation="identity"):
    """activation(W x + b) for a 1-D input."""
    x = np.asarray(x, dtype=np.float64)
    weight = np.asarray(weight, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"input must be 1-D, got {x.ndim}-D")
    if weight.ndim != 2 or weight.shape[1] != x.shape[0]:
        raise ValueError(f"weight shape {weight.shape} incompatible with input "
                         f"length {x.shape[0]}")
    if bias.shape != (weight.shape[0],):
        raise ValueError(f"bias shape {bias.shape} != (d_out,)=({weight.shape[0]},)")
    if activation not in ("relu", "sigmoid", "identity"):
        raise ValueError(f"unknown activation {activation!r}")
    return _ACTIVATIONS[activation](weight @ x + bias)


# ---------------------------------------------------------------------------
# batched kernels
# ---------------------------------------------------------------------------

def _conv_batch_forward(x, filters, bias):
    b, c_in, length = x.shape
    c_out = filters.shape[0]
    xp = np.zeros((b, c_in, length + 2))
    xp[:, :, 1:-1] = x
    cols = np.lib.stride_tricks.sliding_window_view(xp, KERNEL_W, axis=2)
    # [B, Cin, L, 3] -> [B*L, Cin*3]
    cols = np.ascontiguousarray(cols.transpose(0, 2, 1, 3)).reshape(b * length, c_in * KERNEL_W)
    z = cols @ filters.reshape(c_out, -1).T
    z += bias
    z = np.ascontiguousarray(z.reshape(b, length, c_out).transpose(0, 2, 1))
    mask = z > 0
    y = np.where(mask, z, 0.0)
    return y, (cols, mask, x.shape)


def _conv_batch_backward(filters, cache, dy):
    cols, mask, x_shape = cache
    b, c_in, length = x_shape
    c_out = filters.shape[0]
    dz = np.where(mask, dy, 0.0)
    dzf = np.ascontiguousarray(dz.transpose(0, 2, 1)).reshape(b * length, c_out)
    d_filters = (dzf.T @ cols).reshape(c_out, c_in, KERNEL_W)
    d_bias = dzf.sum(axis=0)
    dcols = (dzf @ filters.reshape(c_out, -1)).reshape(b, length, c_in, KERNEL_W)
    dxp = np.zeros((b, c_in, length + 2))
    for k in range(KERNEL_W):
        dxp[:, :, k:k + length] += dcols[:, :, :, k].transpose(0, 2, 1)
    return dxp[:, :, 1:-1], d_filters, d_bias


def _pool_batch_forward(x):
    b, c, length = x.shape
    xp = np.full((b, c, length + 2), -np.inf)
    xp[:, :, 1:-1] = x
    win = np.lib.stride_tricks.sliding_window_view(xp, POOL_W, axis=2)[:, :, ::POOL_STRIDE]
    idx = win.argmax(axis=3)
    y = np.take_along_axis(win, idx[..., None], axis=3)[..., 0]
    return y, (idx, x.shape)


def _pool_batch_backward(cache, dy):
    idx, x_shape = cache
    b, c, length = x_shape
    l_out = idx.shape[2]
    dxp = np.zeros((b, c, length + 2))
    bb, cc, jj = np.meshgrid(np.arange(b), np.arange(c), np.arange(l_out), indexing="ij")
    np.add.at(dxp, (bb, cc, POOL_STRIDE * jj + idx), dy)
    return dxp[:, :, 1:-1]


def _recur_batch_forward(x, w_yh, w_hh):
    length, b, _ = x.shape
    h = w_hh.shape[0]
    u = (x.reshape(length * b, -1) @ w_yh.T).reshape(length, b, h)
    hs = np.zeros((length + 1, b, h))
    whh_t = np.ascontiguousarray(w_hh.T)
    buf = np.empty((b, h))
    for l in range(length):
        np.matmul(hs[l], whh_t, out=buf)
        buf += u[l]
        np.tanh(buf, out=hs[l + 1])
    return hs, (x, hs)


def _recur_batch_backward(w_yh, w_hh, cache, dy, dy_last_only):
    """dy is [L, B, H], or [B, H] for the final state when dy_last_only."""
    x, hs = cache
    length, b, d_in = x.shape
    h = w_hh.shape[0]
    da = np.empty((length, b, h))
    dh = np.zeros((b, h))
    w_hh_c = np.ascontiguousarray(w_hh)
    for l in range(length - 1, -1, -1):
        if dy_last_only:
            if l == length - 1:
                dh += dy
        else:
            dh += dy[l]
        # da[l] = dh * (1 - hs[l+1]^2), built in place
        a = da[l]
        np.multiply(hs[l + 1], hs[l + 1], out=a)
        np.subtract(1.0, a, out=a)
        a *= dh
        np.matmul(a, w_hh_c, out=dh)
    daf = da.reshape(length * b, h)
    d_w_yh = daf.T @ x.reshape(length * b, d_in)
    d_w_hh = daf.T @ hs[:length].reshape(length * b, h)
    dx = (daf @ w_yh).reshape(length, b, d_in)
    return dx, d_w_yh, d_w_hh


# ---------------------------------------------------------------------------
# layer objects (batched, parameters live in a ParameterStore)
# ---------------------------------------------------------------------------

class ConvLayer:
    kind = "conv"

    def __init__(self, index, c_in, c_out):
        self.c_in = c_in
        self.c_out = c_out
        self.w = f"layer{index}.filters"
        self.b = f"layer{index}.bias"
        self.param_names = (self.w, self.b)

    def init_params(self, store, rng):
        bound = np.sqrt(6.0 / (self.c_in * KERNEL_W + self.c_out * KERNEL_W))
        store.add(self.w, rng.uniform(-bound, bound, (self.c_out, self.c_in, KERNEL_W)))
        store.add(self.b, np.zeros(self.c_out))

    def param_shapes(self):
        return {self.w: (self.c_out, self.c_in, KERNEL_W), self.b: (self.c_out,)}

    def forward(self, store, x):
        if x.ndim != 3 or x.shape[1] != self.c_in:
            raise ValueError(f"conv layer expects (batch, {self.c_in}, length), "
                             f"got {x.shape}")
        return _conv_batch_forward(x, store[self.w], store[self.b])

    def backward(self, store, cache, dy):
        dx, dw, db = _conv_batch_backward(store[self.w], cache, dy)
        return dx, {self.w: dw, self.b: db}


class MaxPoolLayer:
    kind = "pool"
    param_names = ()

    def init_params(self, store, rng):
        pass

    def param_shapes(self):
        return {}

    def forward(self, store, x):
        return _pool_batch_forward(x)

    def backward(self, store, cache, dy):
        return _pool_batch_backward(cache, dy), {}


class RecurrentLayer:
    kind = "recur"

    def __init__(self, index, d_in, hidden, return_sequence):
        self.d_in = d_in
        self.hidden = hidden
        self.return_sequence = return_sequence
        self.w_yh = f"layer{index}.w_yh"
        self.w_hh = f"layer{index}.w_hh"
        self.param_names = (self.w_yh, self.w_hh)

    def init_params(self, store, rng):
        b_in = np.sqrt(6.0 / (self.d_in + self.hidden))
        b_rec = np.sqrt(6.0 / (2 * self.hidden))
        store.add(self.w_yh, rng.uniform(-b_in, b_in, (self.hidden, self.d_in)))
        store.add(self.w_hh, rng.uniform(-b_rec, b_rec, (self.hidden, self.hidden)))

    def param_shapes(self):
        return {self.w_yh: (self.hidden, self.d_in),
                self.w_hh: (self.hidden, self.hidden)}

    def forward(self, store, x):
        if x.ndim != 3 or x.shape[2] != self.d_in:
            raise ValueError(f"recurrent layer expects (steps, batch, {self.d_in}), "
                             f"got {x.shape}")
        hs, cache = _recur_batch_forward(x, store[self.w_yh], store[self.w_hh])
        y = hs[1:] if self.return_sequence else hs[-1]
        return y, cache

    def backward(self, store, cache, dy):
        dx, d_yh, d_hh = _recur_batch_backward(
            store[self.w_yh], store[self.w_hh], cache, dy,
            dy_last_only=not self.return_sequence)
        return dx, {self.w_yh: d_yh, self.w_hh: d_hh}


class DenseLayer:
    kind = "dense"

    def __init__(self, index, d_in, d_out, activation):
        if activation not in ("relu", "sigmoid", "identity"):
            raise ValueError(f"unknown activation {activation!r}")
        self.d_in = d_in
        self.d_out = d_out
        self.activation = activation
        self.w = f"layer{index}.weight"
        self.b = f"layer{index}.bias"
        self.param_names = (self.w, self.b)

    def init_params(self, store, rng):
        bound = np.sqrt(6.0 / (self.d_in + self.d_out))
        store.add(self.w, rng.uniform(-bound, bound, (self.d_out, self.d_in)))
        store.add(self.b, np.zeros(self.d_out))

    def param_shapes(self):
        return {self.w: (self.d_out, self.d_in), self.b: (self.d_out,)}

    def preactivation(self, store, x):
        if x.ndim != 2 or x.shape[1] != self.d_in:
            raise ValueError(f"dense layer expects (batch, {self.d_in}), got {x.shape}")
        return x @ store[self.w].T + store[self.b]

    def forward(self, store, x):
        z = self.preactivation(store, x)
        if self.activation == "relu":
            mask = z > 0
            return np.where(mask, z, 0.0), (x, mask)
        if self.activation == "sigmoid":
            y = sigmoid(z)
            return y, (x, y)
        return z, (x, None)

    def backward(self, store, cache, dy):
        x, extra = cache
        if self.activation == "relu":
            dz = np.where(extra, dy, 0.0)
        elif self.activation == "sigmoid":
            dz = dy * extra * (1.0 - extra)
        else:
            dz = dy
        return self.backward_from_preactivation(store, x, dz)

    def backward_from_preactivation(self, store, x, dz):
        dw = dz.T @ x
        db = dz.sum(axis=0)
        dx = dz @ store[self.w]
        return dx, {self.w: dw, self.b: db}


class MapToFlat:
    """Conv stack -> dense boundary: flatten channels x tones row-major."""
    kind = "adapter"
    param_names = ()

    def init_params(self, store, rng):
        pass

    def param_shapes(self):
        return {}

    def forward(self, store, x):
        b = x.shape[0]
        return np.ascontiguousarray(x).reshape(b, -1), x.shape

    def backward(self, store, cache, dy):
        return dy.reshape(cache), {}


class MapToSequence:
    """Conv stack -> recurrent boundary: tones become steps, channels features."""
    kind = "adapter"
    param_names = ()

    def init_params(self, store, rng):
        pass

    def param_shapes(self):
        return {}

    def forward(self, store, x):
        return np.ascontiguousarray(x.transpose(2, 0, 1)), None

    def backward(self, store, cache, dy):
        return np.ascontiguousarray(dy.transpose(1, 2, 0)), {}


class BatchToSequence:
    """Network input (B, L, D) -> internal step-major (L, B, D)."""
    kind = "adapter"
    param_names = ()

    def init_params(self, store, rng):
        pass

    def param_shapes(self):
        return {}

    def forward(self, store, x):
        if x.ndim != 3:
            raise ValueError(f"sequence input must be 3-D (batch, steps, features), "
                             f"got {x.ndim}-D")
        return np.ascontiguousarray(x.transpose(1, 0, 2)), None

    def backward(self, store, cache, dy):
        return np.ascontiguousarray(dy.transpose(1, 0, 2)), {}

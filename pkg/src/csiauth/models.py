"""Architecture mini-language, shape inference, network assembly, checkpoints.

A config is UTF-8 text with one layer token per line ("#" starts a
comment).  Grammar:

    conv1x3-<int> | maxpooling | recur-<int> | FC-<int>-<int>

Legal ordering is (conv/pool)* (recur)* (dense)+ and the terminal dense
must have one output unit (it gets the sigmoid; all other dense layers
are ReLU).  The nine named configs from the experiments are built in.
"""

import os
import re
import struct
import tempfile
from dataclasses import dataclass, replace

import numpy as np

from .datafile import DataFormatError
from .nn.layers import (BatchToSequence, ConvLayer, DenseLayer, MapToFlat,
                        MapToSequence, MaxPoolLayer, RecurrentLayer,
                        pooled_length)
from .nn.network import Network
from .nn.params import ParameterStore

CKPT_MAGIC = b"CSIM"
CKPT_VERSION = 1

LAYOUT_CHANNELS = "channels_over_tones"
LAYOUT_SEQUENCE = "sequence_over_tones"


class ConfigParseError(ValueError):
    """Config text that does not match the mini-language."""


class ShapeError(ValueError):
    """Declared layer dimensions that contradict the inferred ones."""


@dataclass(frozen=True)
class LayerSpec:
    kind: str                      # conv | pool | recur | dense
    out_channels: int = None       # conv
    hidden_dim: int = None         # recur
    in_dim: int = None             # dense
    out_dim: int = None            # dense
    activation: str = None


@dataclass(frozen=True)
class NetworkConfig:
    name: str
    layers: tuple
    input_layout: str
    inferred_shapes: tuple = None  # per layer (length, width); dense -> (1, out)
    input_dims: tuple = None       # (m_b, m_a, n_tones) once inferred


ZOO = {
    "CRNN-4": "conv1x3-32\nmaxpooling\nconv1x3-64\nmaxpooling\nrecur-256\nrecur-512\nFC-512-64\nFC-64-1",
    "CNN-4": "conv1x3-32\nconv1x3-32\nmaxpooling\nconv1x3-64\nconv1x3-64\nmaxpooling\nFC-2048-64\nFC-64-1",
    "RNN-4": "recur-256\nrecur-256\nrecur-512\nrecur-512\nFC-512-64\nFC-64-1",
    "CRNN-3": "conv1x3-32\nmaxpooling\nconv1x3-64\nmaxpooling\nrecur-512\nFC-512-64\nFC-64-1",
    "CNN-3": "conv1x3-32\nconv1x3-32\nmaxpooling\nconv1x3-64\nmaxpooling\nFC-2048-64\nFC-64-1",
    "RNN-3": "recur-128\nrecur-256\nrecur-512\nFC-512-64\nFC-64-1",
    "CRNN-r": "conv1x3-32\nmaxpooling\nrecur-128\nFC-128-64\nFC-64-1",
    "CNN-r": "conv1x3-32\nmaxpooling\nFC-2048-64\nFC-64-1",
    "RNN-r": "recur-128\nrecur-256\nFC-256-64\nFC-64-1",
}

_CONV_RE = re.compile(r"^conv1x3-(\d+)$")
_RECUR_RE = re.compile(r"^recur-(\d+)$")
_FC_RE = re.compile(r"^FC-(\d+)-(\d+)$")

# kind letters for the ordering check: (c|p)* r* d+
_ORDER_RE = re.compile(r"^[cp]*r*d+$")


def parse_config(text, name="custom"):
    """Parse mini-language text into a NetworkConfig (shapes not inferred)."""
    specs = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        token = raw.split("#", 1)[0].strip()
        if not token:
            continue
        if token == "maxpooling":
            specs.append(LayerSpec(kind="pool"))
            continue
        m = _CONV_RE.match(token)
        if m:
            n = int(m.group(1))
            if n < 1:
                raise ConfigParseError(f"line {line_no}: {token!r}: filter count must be positive")
            specs.append(LayerSpec(kind="conv", out_channels=n, activation="relu"))
            continue
        m = _RECUR_RE.match(token)
        if m:
            n = int(m.group(1))
            if n < 1:
                raise ConfigParseError(f"line {line_no}: {token!r}: hidden size must be positive")
            specs.append(LayerSpec(kind="recur", hidden_dim=n, activation="tanh"))
            continue
        m = _FC_RE.match(token)
        if m:
            d_in, d_out = int(m.group(1)), int(m.group(2))
            if d_in < 1 or d_out < 1:
                raise ConfigParseError(f"line {line_no}: {token!r}: dimensions must be positive")
            specs.append(LayerSpec(kind="dense", in_dim=d_in, out_dim=d_out,
                                   activation="relu"))
            continue
        raise ConfigParseError(f"line {line_no}: unknown layer token {token!r}")

    if not specs:
        raise ConfigParseError("empty config: no layer tokens")
    order = "".join({"conv": "c", "pool": "p", "recur": "r", "dense": "d"}[s.kind]
                    for s in specs)
    if not _ORDER_RE.match(order):
        raise ConfigParseError(
            "illegal layer ordering: expected (conv/pool)* (recur)* (dense)+, "
            f"got kinds {order!r}")
    if specs[-1].out_dim != 1:
        raise ConfigParseError(
            f"terminal dense layer must have one output unit, got {specs[-1].out_dim}")
    specs[-1] = replace(specs[-1], activation="sigmoid")

    layout = LAYOUT_SEQUENCE if specs[0].kind == "recur" else LAYOUT_CHANNELS
    return NetworkConfig(name=name, layers=tuple(specs), input_layout=layout)


def render(config):
    """Canonical mini-language text; parse(render(c)) round-trips."""
    tokens = []
    for spec in config.layers:
        if spec.kind == "conv":
            tokens.append(f"conv1x3-{spec.out_channels}")
        elif spec.kind == "pool":
            tokens.append("maxpooling")
        elif spec.kind == "recur":
            tokens.append(f"recur-{spec.hidden_dim}")
        else:
            tokens.append(f"FC-{spec.in_dim}-{spec.out_dim}")
    return "\n".join(tokens)


def named_config(name):
    if name not in ZOO:
        raise KeyError(f"unknown network name {name!r}; known: {', '.join(sorted(ZOO))}")
    return parse_config(ZOO[name], name=name)


def infer_shapes(config, m_b, m_a, n_tones):
    """Propagate shapes through the stack and cross-check declared FC dims.

    Conv-first input is (2*m_a*m_b channels, n_tones); the conv->recurrent
    boundary turns channels into per-step features and tones into steps;
    the ->dense boundary flattens maps to channels*length and reduces
    sequences to the final hidden state.  Recurrent-first input is a
    length-n_tones sequence of 2*m_a*m_b features.
    """
    width = 2 * m_a * m_b
    length = n_tones
    state = "seq" if config.input_layout == LAYOUT_SEQUENCE else "map"
    flat = None
    shapes = []
    for spec in config.layers:
        if spec.kind == "conv":
            width = spec.out_channels
            shapes.append((length, width))
        elif spec.kind == "pool":
            length = pooled_length(length)
            shapes.append((length, width))
        elif spec.kind == "recur":
            if state == "map":
                state = "seq"   # channels -> step features, tones -> steps
            width = spec.hidden_dim
            shapes.append((length, width))
        else:
            if flat is None:
                flat = width * length if state == "map" else width
            if spec.in_dim != flat:
                raise ShapeError(
                    f"layer {len(shapes)}: declared FC input {spec.in_dim} != "
                    f"inferred {flat}")
            flat = spec.out_dim
            shapes.append((1, spec.out_dim))
    return replace(config, inferred_shapes=tuple(shapes),
                   input_dims=(m_b, m_a, n_tones))


def _assemble_layers(config, first_width):
    """Layer objects for a config whose input width is known."""
    layers = []
    width = first_width
    state = "seq" if config.input_layout == LAYOUT_SEQUENCE else "map"
    if state == "seq":
        layers.append(BatchToSequence())
    entered_dense = False
    for i, spec in enumerate(config.layers):
        if spec.kind == "conv":
            layers.append(ConvLayer(i, width, spec.out_channels))
            width = spec.out_channels
        elif spec.kind == "pool":
            layers.append(MaxPoolLayer())
        elif spec.kind == "recur":
            if state == "map":
                layers.append(MapToSequence())
                state = "seq"
            next_is_recur = (i + 1 < len(config.layers)
                             and config.layers[i + 1].kind == "recur")
            layers.append(RecurrentLayer(i, width, spec.hidden_dim,
                                         return_sequence=next_is_recur))
            width = spec.hidden_dim
        else:
            if not entered_dense and state == "map":
                layers.append(MapToFlat())
            entered_dense = True
            layers.append(DenseLayer(i, spec.in_dim, spec.out_dim, spec.activation))
            width = spec.out_dim
    return layers


def _input_kind(config):
    if config.input_layout == LAYOUT_SEQUENCE:
        return "sequence"
    if config.layers[0].kind == "dense":
        return "flat"
    return "channels"


def build_network(config, seed):
    """Fresh network with Glorot-uniform weights and zero biases.

    `config` must already carry inferred shapes (build needs the input
    dimensions).  Parameters are drawn in store order from the seed.
    """
    if config.layers[0].kind == "dense":
        first_width = config.layers[0].in_dim
    elif config.input_dims is None:
        raise ValueError("config has no inferred shapes; call infer_shapes first")
    else:
        m_b, m_a, _ = config.input_dims
        first_width = 2 * m_a * m_b
    layers = _assemble_layers(config, first_width)
    store = ParameterStore()
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    for layer in layers:
        layer.init_params(store, rng)
    return Network(config, store, layers, _input_kind(config))


def network_from_store(config, store):
    """Rebuild an executable network around existing parameters."""
    first = config.layers[0]
    if first.kind == "conv":
        first_width = store["layer0.filters"].shape[1]
    elif first.kind == "recur":
        first_width = store["layer0.w_yh"].shape[1]
    elif first.kind == "pool":
        raise ValueError("cannot rebuild a network whose first layer is a pool "
                         "(input width is not recoverable from parameters)")
    else:
        first_width = first.in_dim
    layers = _assemble_layers(config, first_width)
    return Network(config, store, layers, _input_kind(config))


# ---------------------------------------------------------------------------
# input preparation
# ---------------------------------------------------------------------------

def conv_input(samples):
    """(n, 2*pairs, tones) batch: channel 2k is re of pair k, 2k+1 its im."""
    n = len(samples)
    pairs, tones = samples[0].values.shape
    out = np.empty((n, 2 * pairs, tones))
    for i, s in enumerate(samples):
        out[i, 0::2] = s.values.real
        out[i, 1::2] = s.values.imag
    return out


def sequence_input(samples):
    """(n, tones, 2*pairs) batch: tone-major steps of re/im features."""
    return np.ascontiguousarray(conv_input(samples).transpose(0, 2, 1))


def flat_input(samples):
    """(n, 2*pairs*tones) batch in dataset-file entry order."""
    return np.stack([s.flat() for s in samples])


def network_input(obj, samples):
    """Batch `samples` in the layout `obj` (a Network or NetworkConfig) expects."""
    kind = obj.input_kind if isinstance(obj, Network) else _input_kind(obj)
    if kind == "channels":
        return conv_input(samples)
    if kind == "sequence":
        return sequence_input(samples)
    return flat_input(samples)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def _expected_param_shapes(config, store):
    """Per-tensor shapes implied by the config, with input-derived dims
    taken from the stored tensors themselves."""
    expected = {}
    width = None
    for i, spec in enumerate(config.layers):
        if spec.kind == "conv":
            name = f"layer{i}.filters"
            c_in = width
            if c_in is None:
                if name not in store:
                    raise DataFormatError(f"missing tensor {name}")
                c_in = store[name].shape[1] if store[name].ndim == 3 else 0
            expected[name] = (spec.out_channels, c_in, 3)
            expected[f"layer{i}.bias"] = (spec.out_channels,)
            width = spec.out_channels
        elif spec.kind == "recur":
            name = f"layer{i}.w_yh"
            d_in = width
            if d_in is None:
                if name not in store:
                    raise DataFormatError(f"missing tensor {name}")
                d_in = store[name].shape[1] if store[name].ndim == 2 else 0
            expected[name] = (spec.hidden_dim, d_in)
            expected[f"layer{i}.w_hh"] = (spec.hidden_dim, spec.hidden_dim)
            width = spec.hidden_dim
        elif spec.kind == "dense":
            expected[f"layer{i}.weight"] = (spec.out_dim, spec.in_dim)
            expected[f"layer{i}.bias"] = (spec.out_dim,)
            width = spec.out_dim
    return expected


def save_checkpoint(path, config, store):
    """Write config text plus parameter tensors (atomic replace)."""
    text = render(config).encode("utf-8")
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(CKPT_MAGIC)
            f.write(struct.pack("<I", CKPT_VERSION))
            f.write(struct.pack("<I", len(text)))
            f.write(text)
            f.write(struct.pack("<I", len(store)))
            for name, tensor, _ in store.items():
                nb = name.encode("utf-8")
                f.write(struct.pack("<H", len(nb)))
                f.write(nb)
                f.write(struct.pack("<B", tensor.ndim))
                f.write(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
                f.write(np.ascontiguousarray(tensor, dtype="<f8").tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Reader:
    def __init__(self, path):
        with open(path, "rb") as f:
            self.data = f.read()
        self.path = path
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.data):
            raise DataFormatError(f"{self.path}: truncated while reading {what}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt, what):
        size = struct.calcsize(fmt)
        return struct.unpack(fmt, self.take(size, what))


def load_checkpoint(path):
    """Read a checkpoint and validate config/tensor consistency."""
    r = _Reader(path)
    if r.take(4, "magic") != CKPT_MAGIC:
        raise DataFormatError(f"{path}: bad magic, expected {CKPT_MAGIC!r}")
    (version,) = r.unpack("<I", "version")
    if version != CKPT_VERSION:
        raise DataFormatError(f"{path}: unsupported version {version}")
    (text_len,) = r.unpack("<I", "config length")
    try:
        text = r.take(text_len, "config").decode("utf-8")
    except UnicodeDecodeError as e:
        raise DataFormatError(f"{path}: config is not UTF-8 ({e})") from None
    try:
        config = parse_config(text, name=os.path.basename(path))
    except ConfigParseError as e:
        raise DataFormatError(f"{path}: embedded config: {e}") from None

    (count,) = r.unpack("<I", "tensor count")
    store = ParameterStore()
    for t in range(count):
        (name_len,) = r.unpack("<H", f"tensor {t} name length")
        name = r.take(name_len, f"tensor {t} name").decode("utf-8")
        (rank,) = r.unpack("<B", f"tensor {t} rank")
        shape = r.unpack(f"<{rank}I", f"tensor {t} extents")
        n_values = int(np.prod(shape)) if rank else 1
        raw = r.take(8 * n_values, f"tensor {t} values")
        tensor = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        try:
            store.add(name, tensor)
        except ValueError as e:
            raise DataFormatError(f"{path}: {e}") from None
    if r.pos != len(r.data):
        raise DataFormatError(f"{path}: {len(r.data) - r.pos} trailing bytes")

    expected = _expected_param_shapes(config, store)
    if tuple(expected) != store.names:
        raise DataFormatError(
            f"{path}: tensor names {store.names} do not match config "
            f"({tuple(expected)})")
    for name, shape in expected.items():
        if store[name].shape != shape:
            raise DataFormatError(
                f"{path}: tensor {name} has shape {store[name].shape}, "
                f"config implies {shape}")
    return config, store


def load_network(path):
    config, store = load_checkpoint(path)
    return network_from_store(config, store)

"""Binary dataset files and trial-directory round trips.

One `.csia` file holds a record collection, little-endian:

    magic "CSIA" | version u32 | M_B u32 | M_A u32 | N u32 | count u64
    then `count` records: label u8, then M_B*M_A*N entries of two f64
    (re, im), antenna-pair major, tone minor.

Labels: 0 Alice, 1 Eve, 255 unlabeled.  The per-transmitter means travel
as two extra records at the head of the stream with labels 254 (Alice)
and 253 (Eve).  Pseudo-labeled sets reuse the format with the version
field's high bit set; their head records carry the final cluster centers.

A full TrialDataset is a directory with `config.json` plus one `.csia`
file per split (train/validation/test/unlabeled), each embedding the
trial means.
"""

import json
import os
import struct
import tempfile
from dataclasses import asdict, dataclass, field

import numpy as np

from .chansim import (LABEL_ALICE, LABEL_EVE, LABEL_UNLABELED, ChannelSample,
                      SimConfig, TrialDataset)

MAGIC = b"CSIA"
VERSION = 1
PSEUDO_FLAG = 0x80000000
LABEL_MEAN_ALICE = 254
LABEL_MEAN_EVE = 253

_HEADER = struct.Struct("<4sIIIIQ")

SPLIT_FILES = ("train.csia", "validation.csia", "test.csia", "unlabeled.csia")
CONFIG_FILE = "config.json"


class DataFormatError(Exception):
    """Raised when a dataset or checkpoint file does not match its format."""


@dataclass
class RecordFile:
    """Contents of one .csia file."""
    m_b: int
    m_a: int
    n_tones: int
    samples: list
    mean_alice: np.ndarray = None
    mean_eve: np.ndarray = None
    pseudo: bool = False


def _entry_matrix(raw, n_pairs, n_tones):
    re_im = raw.reshape(n_pairs, n_tones, 2)
    return np.ascontiguousarray(re_im[..., 0] + 1j * re_im[..., 1])


def write_records(path, m_b, m_a, n_tones, samples,
                  mean_alice=None, mean_eve=None, pseudo=False):
    """Write one record collection to `path` (atomic replace)."""
    n_pairs = m_b * m_a
    head = []
    if mean_alice is not None:
        head.append((LABEL_MEAN_ALICE, np.asarray(mean_alice, dtype=np.complex128)))
    if mean_eve is not None:
        head.append((LABEL_MEAN_EVE, np.asarray(mean_eve, dtype=np.complex128)))
    records = head + [(s.label, s.values) for s in samples]

    version = VERSION | (PSEUDO_FLAG if pseudo else 0)
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(_HEADER.pack(MAGIC, version, m_b, m_a, n_tones, len(records)))
            for label, values in records:
                if values.shape != (n_pairs, n_tones):
                    raise ValueError(
                        f"record shape {values.shape} does not match "
                        f"(n_pairs, n_tones)=({n_pairs}, {n_tones})")
                f.write(struct.pack("<B", label))
                out = np.empty((n_pairs, n_tones, 2), dtype="<f8")
                out[..., 0] = values.real
                out[..., 1] = values.imag
                f.write(out.tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_records(path):
    """Read one record collection, validating the format strictly."""
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < _HEADER.size:
        raise DataFormatError(f"{path}: truncated header")
    magic, version, m_b, m_a, n_tones, count = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise DataFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    pseudo = bool(version & PSEUDO_FLAG)
    if version & ~PSEUDO_FLAG != VERSION:
        raise DataFormatError(f"{path}: unsupported version {version & ~PSEUDO_FLAG}")
    if m_b < 1 or m_a < 1 or n_tones < 1:
        raise DataFormatError(
            f"{path}: invalid dimensions m_b={m_b}, m_a={m_a}, n_tones={n_tones}")
    n_pairs = m_b * m_a
    rec_size = 1 + 16 * n_pairs * n_tones
    expected = _HEADER.size + count * rec_size
    if len(data) != expected:
        raise DataFormatError(
            f"{path}: file size {len(data)} does not match header "
            f"(expected {expected} bytes for {count} records)")

    samples = []
    mean_alice = mean_eve = None
    offset = _HEADER.size
    for i in range(count):
        label = data[offset]
        raw = np.frombuffer(data, dtype="<f8", count=2 * n_pairs * n_tones,
                            offset=offset + 1)
        values = _entry_matrix(raw, n_pairs, n_tones)
        if not np.isfinite(raw).all():
            raise DataFormatError(f"{path}: non-finite value in record {i}")
        if label == LABEL_MEAN_ALICE or label == LABEL_MEAN_EVE:
            if samples:
                raise DataFormatError(
                    f"{path}: mean record (label {label}) after body records")
            if label == LABEL_MEAN_ALICE:
                if mean_alice is not None:
                    raise DataFormatError(f"{path}: duplicate Alice mean record")
                mean_alice = values
            else:
                if mean_eve is not None:
                    raise DataFormatError(f"{path}: duplicate Eve mean record")
                mean_eve = values
        elif label in (LABEL_ALICE, LABEL_EVE, LABEL_UNLABELED):
            samples.append(ChannelSample(values=values, label=label))
        else:
            raise DataFormatError(f"{path}: invalid label {label} in record {i}")
        offset += rec_size
    return RecordFile(m_b=m_b, m_a=m_a, n_tones=n_tones, samples=samples,
                      mean_alice=mean_alice, mean_eve=mean_eve, pseudo=pseudo)


def write_dataset(path, dataset: TrialDataset):
    """Write a TrialDataset to directory `path` (created if missing)."""
    os.makedirs(path, exist_ok=True)
    cfg = dataset.config
    with open(os.path.join(path, CONFIG_FILE), "w") as f:
        json.dump(asdict(cfg), f, indent=2, sort_keys=True)
        f.write("\n")
    splits = (dataset.train, dataset.validation, dataset.test, dataset.unlabeled)
    for fname, samples in zip(SPLIT_FILES, splits):
        write_records(os.path.join(path, fname), cfg.m_b, cfg.m_a, cfg.n_tones,
                      samples, mean_alice=dataset.mean_alice, mean_eve=dataset.mean_eve)


def read_dataset(path) -> TrialDataset:
    """Read a TrialDataset directory written by write_dataset."""
    cfg_path = os.path.join(path, CONFIG_FILE)
    if not os.path.isfile(cfg_path):
        raise DataFormatError(f"{path}: missing {CONFIG_FILE}")
    with open(cfg_path) as f:
        try:
            cfg = SimConfig(**json.load(f))
        except (TypeError, ValueError, json.JSONDecodeError) as e:
            raise DataFormatError(f"{cfg_path}: bad config ({e})") from None

    parts = {}
    for fname in SPLIT_FILES:
        fpath = os.path.join(path, fname)
        if not os.path.isfile(fpath):
            raise DataFormatError(f"{path}: missing split file {fname}")
        rec = read_records(fpath)
        if (rec.m_b, rec.m_a, rec.n_tones) != (cfg.m_b, cfg.m_a, cfg.n_tones):
            raise DataFormatError(
                f"{fpath}: dimensions ({rec.m_b},{rec.m_a},{rec.n_tones}) do not "
                f"match config ({cfg.m_b},{cfg.m_a},{cfg.n_tones})")
        parts[fname] = rec

    train = parts["train.csia"]
    if train.mean_alice is None or train.mean_eve is None:
        raise DataFormatError(f"{path}: train.csia is missing the trial means")
    return TrialDataset(
        config=cfg,
        mean_alice=train.mean_alice,
        mean_eve=train.mean_eve,
        train=train.samples,
        validation=parts["validation.csia"].samples,
        test=parts["test.csia"].samples,
        unlabeled=parts["unlabeled.csia"].samples,
    )

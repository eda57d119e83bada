"""Simulated CSI datasets for the Alice/Bob/Eve authentication problem.

A trial draws one average channel gain per transmitter (frequency response
of random exponential-PDP taps) and then builds train/validation/test and
optional unlabeled pools by adding i.i.d. circularly-symmetric complex
Gaussian observed variation around those means.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .rng import substream

LABEL_ALICE = 0
LABEL_EVE = 1
LABEL_UNLABELED = 255

# substream roles within one trial seed
_R_MEAN_ALICE = 0
_R_MEAN_EVE = 1
_R_OBS_BASE = 2          # + 2*split_index + class_index
_R_VAL_SPLIT = 12


@dataclass(frozen=True)
class SimConfig:
    """Static description of one simulated scenario.

    Durations are in nanoseconds.  `xi_variance` is the total per-tone
    variance of the observed variation (environment change plus channel
    estimation error combined).
    """
    sigma_tau: float = 50.0
    t_s: float = 150.0
    m_b: int = 3
    m_a: int = 1
    n_tones: int = 128
    xi_variance: float = 50.0
    n_train_per_class: int = 500
    n_test_per_class: int = 200
    n_unlabeled: int = 0
    n_labeled_per_class: int = 10
    seed: int = 0

    @property
    def n_pairs(self):
        return self.m_b * self.m_a

    def validate(self):
        if self.sigma_tau <= 0:
            raise ValueError(f"sigma_tau must be positive, got {self.sigma_tau}")
        if self.t_s <= 0:
            raise ValueError(f"t_s must be positive, got {self.t_s}")
        if self.m_b < 1 or self.m_a < 1:
            raise ValueError(f"antenna counts must be >= 1, got m_b={self.m_b}, m_a={self.m_a}")
        n_taps = num_taps(self.sigma_tau, self.t_s)
        if self.n_tones < n_taps:
            raise ValueError(f"n_tones={self.n_tones} is smaller than the tap count {n_taps}")
        if self.xi_variance < 0:
            raise ValueError(f"xi_variance must be nonnegative, got {self.xi_variance}")
        for name in ("n_train_per_class", "n_test_per_class", "n_unlabeled", "n_labeled_per_class"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative, got {getattr(self, name)}")
        if self.seed < 0:
            raise ValueError(f"seed must be nonnegative, got {self.seed}")


@dataclass
class ChannelSample:
    """One complex channel observation: (antenna pair, tone) matrix plus a label."""
    values: np.ndarray          # complex128, shape (n_pairs, n_tones)
    label: int = LABEL_UNLABELED

    def flat(self):
        """Real feature vector in dataset-file entry order.

        Antenna-pair major, tone minor, each entry contributing (re, im);
        total length 2 * n_pairs * n_tones.
        """
        out = np.empty(self.values.shape + (2,), dtype=np.float64)
        out[..., 0] = self.values.real
        out[..., 1] = self.values.imag
        return out.reshape(-1)


@dataclass
class TrialDataset:
    """All data generated from one random draw of average gains."""
    config: SimConfig
    mean_alice: np.ndarray      # complex128, shape (n_pairs, n_tones)
    mean_eve: np.ndarray
    train: list = field(default_factory=list)
    validation: list = field(default_factory=list)
    test: list = field(default_factory=list)
    unlabeled: list = field(default_factory=list)


def num_taps(sigma_tau, t_s):
    """Number of channel taps, p_max + 1 with p_max = ceil(10*sigma_tau/t_s)."""
    return math.ceil(10.0 * sigma_tau / t_s) + 1


def pdp_tap_variances(sigma_tau, t_s):
    """Per-tap variances of the exponential power-delay profile.

    Returns sigma_p^2 = sigma_0^2 * exp(-p*t_s/sigma_tau) for
    p = 0..p_max, normalized so that the variances sum to one.
    """
    if sigma_tau <= 0:
        raise ValueError(f"sigma_tau must be positive, got {sigma_tau}")
    if t_s <= 0:
        raise ValueError(f"t_s must be positive, got {t_s}")
    p_max = math.ceil(10.0 * sigma_tau / t_s)
    r = t_s / sigma_tau
    sigma0_sq = (1.0 - math.exp(-r)) / (1.0 - math.exp(-(p_max + 1) * r))
    p = np.arange(p_max + 1, dtype=np.float64)
    return sigma0_sq * np.exp(-p * r)


def draw_average_gain(rng, tap_variances, n_tones):
    """Draw one average-gain frequency response at `n_tones` tones.

    Taps are independent circularly-symmetric complex Gaussians with the
    given variances, zero-padded and mapped to tones by a length-n DFT.
    The per-tone variance equals the sum of the tap variances.
    """
    tap_variances = np.asarray(tap_variances, dtype=np.float64)
    if n_tones < tap_variances.shape[0]:
        raise ValueError(
            f"n_tones={n_tones} is smaller than the tap count {tap_variances.shape[0]}")
    scale = np.sqrt(tap_variances / 2.0)
    taps = scale * rng.standard_normal(tap_variances.shape[0]) \
        + 1j * scale * rng.standard_normal(tap_variances.shape[0])
    padded = np.zeros(n_tones, dtype=np.complex128)
    padded[: taps.shape[0]] = taps
    return np.fft.fft(padded)


def draw_observation(rng, mean, xi_variance, label=LABEL_UNLABELED):
    """Draw one observation: mean plus complex Gaussian variation.

    Each entry of the variation has total variance `xi_variance`
    (xi_variance/2 per real component).
    """
    mean = np.asarray(mean, dtype=np.complex128)
    if xi_variance < 0:
        raise ValueError(f"xi_variance must be nonnegative, got {xi_variance}")
    s = math.sqrt(xi_variance / 2.0)
    noise = s * rng.standard_normal(mean.shape) + 1j * s * rng.standard_normal(mean.shape)
    return ChannelSample(values=mean + noise, label=label)


def _draw_split(seed, role, mean, xi_variance, count, label):
    rng = substream(seed, role)
    return [draw_observation(rng, mean, xi_variance, label) for _ in range(count)]


def generate_trial(config: SimConfig) -> TrialDataset:
    """Generate one full trial dataset from `config`.

    Deterministic given (config, seed): every random quantity comes from a
    substream keyed by (seed, role), so generation order and platform
    thread count are irrelevant.  The validation split is the last 10% of
    the shuffled per-class training samples.  The unlabeled pool is drawn
    half around each transmitter's mean with labels stripped.
    """
    config.validate()
    taps = pdp_tap_variances(config.sigma_tau, config.t_s)
    p = config.n_pairs

    # one independent gain vector per antenna pair, Alice and Eve on
    # disjoint substreams
    rng_a = substream(config.seed, _R_MEAN_ALICE)
    rng_e = substream(config.seed, _R_MEAN_EVE)
    mean_alice = np.stack([draw_average_gain(rng_a, taps, config.n_tones) for _ in range(p)])
    mean_eve = np.stack([draw_average_gain(rng_e, taps, config.n_tones) for _ in range(p)])

    means = {LABEL_ALICE: mean_alice, LABEL_EVE: mean_eve}
    train_by_class = {}
    test_by_class = {}
    for cls in (LABEL_ALICE, LABEL_EVE):
        train_by_class[cls] = _draw_split(
            config.seed, _R_OBS_BASE + cls, means[cls], config.xi_variance,
            config.n_train_per_class, cls)
        test_by_class[cls] = _draw_split(
            config.seed, _R_OBS_BASE + 2 + cls, means[cls], config.xi_variance,
            config.n_test_per_class, cls)

    n_unl_alice = config.n_unlabeled - config.n_unlabeled // 2
    n_unl_eve = config.n_unlabeled // 2
    unlabeled = _draw_split(config.seed, _R_OBS_BASE + 4, mean_alice, config.xi_variance,
                            n_unl_alice, LABEL_UNLABELED)
    unlabeled += _draw_split(config.seed, _R_OBS_BASE + 5, mean_eve, config.xi_variance,
                             n_unl_eve, LABEL_UNLABELED)

    split_rng = substream(config.seed, _R_VAL_SPLIT)
    train, validation = [], []
    for cls in (LABEL_ALICE, LABEL_EVE):
        samples = train_by_class[cls]
        perm = split_rng.permutation(len(samples))
        shuffled = [samples[i] for i in perm]
        n_val = int(0.1 * len(shuffled))
        if n_val:
            train += shuffled[:-n_val]
            validation += shuffled[-n_val:]
        else:
            train += shuffled

    return TrialDataset(
        config=config,
        mean_alice=mean_alice,
        mean_eve=mean_eve,
        train=train,
        validation=validation,
        test=test_by_class[LABEL_ALICE] + test_by_class[LABEL_EVE],
        unlabeled=unlabeled,
    )


def flatten_samples(samples):
    """Stack ChannelSamples into an (n, 2*n_pairs*n_tones) float64 matrix."""
    return np.stack([s.flat() for s in samples]) if samples else np.empty((0, 0))


def labels_of(samples):
    """Label vector of a sample list as an int array."""
    return np.array([s.label for s in samples], dtype=np.int64)

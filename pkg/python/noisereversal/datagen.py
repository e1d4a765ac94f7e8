"""
synthetic ground truths and Poisson corruption

truths are decaying sinusoids,

    1d:  floor + A * exp(-gamma i) * (1 + sin(omega i)) / 2
    2d:  floor + A * exp(-gamma_r r - gamma_c c)
                   * (1 + sin(omega_r r)) * (1 + sin(omega_c c)) / 4

clipped at zero and rounded half up to integer counts. the generator name,
formula and parameters travel with the result in its `meta` dict.

corruption adds i.i.d. Poisson(lambda) counts to every pixel, where lambda is
a fraction of the truth's peak (or mean) value. sampling runs on numpy's
counter-based Philox generator keyed by the seed.
"""

from dataclasses import dataclass
import enum
import logging
import math

import numpy as np

from .errors import InputError
from .pipeline import Image2D
from .smoothness import MeasuredFrame


__all__ = ["CorruptionSpec", "CorruptionRecord", "RelativeTo",
        "decaying_sinusoid_1d", "decaying_sinusoid_2d", "sinusoid_profile",
        "poisson_corrupt", "estimate_noise_total", "estimate_from_off_period",
        "noise_stream"]

log = logging.getLogger(__name__)

# keeps truth + noise comfortably inside int64
MAX_LAMBDA = 1e15

_FORMULA_1D = "floor + A*exp(-gamma*i)*(1+sin(omega*i))/2"
_FORMULA_2D = ("floor + A*exp(-gamma_r*r-gamma_c*c)"
        "*(1+sin(omega_r*r))*(1+sin(omega_c*c))/4")


class RelativeTo(enum.Enum):
    PEAK = "peak"
    MEAN = "mean"


def _round_half_up(values):
    return np.floor(np.maximum(values, 0.0) + 0.5).astype(np.int64)


def sinusoid_profile(length, omega, gamma):
    "the unrounded factor exp(-gamma i) * (1 + sin(omega i)) / 2"
    i = np.arange(length, dtype=np.float64)
    return np.exp(-gamma * i) * (1.0 + np.sin(omega * i)) / 2.0


def decaying_sinusoid_1d(length, amplitude, omega, gamma, floor=0.0):
    if length < 5:
        raise InputError("a truth needs at least 5 pixels")
    if amplitude < 0 or gamma < 0:
        raise InputError("amplitude and decay rate must be nonnegative")
    counts = _round_half_up(
            floor + amplitude * sinusoid_profile(length, omega, gamma))
    return MeasuredFrame(counts, {
        'generator': 'decaying_sinusoid_1d',
        'formula': _FORMULA_1D,
        'parameters': {'length': int(length), 'amplitude': float(amplitude),
            'omega': float(omega), 'gamma': float(gamma),
            'floor': float(floor)},
    })


def decaying_sinusoid_2d(rows, cols, amplitude, omega_r, omega_c,
        gamma_r, gamma_c, floor=0.0):
    if rows < 5 or cols < 1:
        raise InputError("a truth image needs at least 5 rows and 1 column")
    if amplitude < 0 or gamma_r < 0 or gamma_c < 0:
        raise InputError("amplitude and decay rates must be nonnegative")
    grid = np.outer(sinusoid_profile(rows, omega_r, gamma_r),
            sinusoid_profile(cols, omega_c, gamma_c))
    return Image2D(_round_half_up(floor + amplitude * grid), {
        'generator': 'decaying_sinusoid_2d',
        'formula': _FORMULA_2D,
        'parameters': {'rows': int(rows), 'cols': int(cols),
            'amplitude': float(amplitude), 'omega_r': float(omega_r),
            'omega_c': float(omega_c), 'gamma_r': float(gamma_r),
            'gamma_c': float(gamma_c), 'floor': float(floor)},
    })


@dataclass(frozen=True)
class CorruptionSpec:
    noise_mean_fraction: float
    seed: int = 0
    relative_to: RelativeTo = RelativeTo.PEAK

    def lam(self, truth_counts):
        if not self.noise_mean_fraction >= 0:
            raise InputError("noise fraction must be nonnegative")
        counts = np.asarray(truth_counts)
        if RelativeTo(self.relative_to) is RelativeTo.PEAK:
            scale = float(counts.max()) if counts.size else 0.0
        else:
            scale = float(counts.mean()) if counts.size else 0.0
        lam = self.noise_mean_fraction * scale
        if not math.isfinite(lam) or lam > MAX_LAMBDA:
            raise InputError("noise mean %r would overflow the counts" % lam)
        return lam


@dataclass(frozen=True, eq=False)
class CorruptionRecord:
    measured: object
    true_noise: np.ndarray
    true_total: int
    lambda_used: float
    seed: int
    relative_to: RelativeTo

    @property
    def pixels(self):
        return self.true_noise.size

    def meta(self):
        return {'lambda': self.lambda_used, 'true_total': self.true_total,
                'seed': self.seed, 'relative_to': self.relative_to.value,
                'pixels': int(self.pixels)}


def noise_stream(seed, stream=0):
    """a Generator on the Philox counter-based bit generator

    stream 0 corrupts pixels, stream 1 supplies off-period samples; they never
    overlap.
    """
    return np.random.Generator(np.random.Philox(
            np.random.SeedSequence(seed, spawn_key=(stream,))))


def poisson_corrupt(truth, spec):
    """add Poisson(lambda) background counts to every pixel of `truth`

    :param truth: MeasuredFrame or Image2D
    :param CorruptionSpec spec: noise level, reference and seed

    :returns: CorruptionRecord whose measured data has the truth's type
    """
    counts = truth.counts
    lam = spec.lam(counts)
    if counts.size and float(counts.max()) + lam + 10 * math.sqrt(lam) > \
            np.iinfo(np.int64).max / 2:
        raise InputError("noise mean %r would overflow the counts" % lam)

    noise = noise_stream(spec.seed).poisson(lam, size=counts.shape)
    noise = noise.astype(np.int64)

    n = noise.size
    if lam > 0 and n > 1:
        bound = 5 * math.sqrt(lam / n)
        if abs(noise.mean() - lam) > bound:
            log.warning("sampled noise mean %.4g is more than 5 standard "
                    "errors from %.4g", noise.mean(), lam)

    measured = type(truth)(counts + noise, dict(truth.meta))
    return CorruptionRecord(measured, noise, int(noise.sum()), float(lam),
            int(spec.seed), RelativeTo(spec.relative_to))


def estimate_noise_total(record, mode="exact", samples=0):
    """the noise total a denoiser is told to remove

    exact mode returns the record's true total. off_period mode draws
    `samples` independent Poisson(lambda) counts from a stream disjoint from
    the corruption and scales their mean to the pixel count.
    """
    if mode == "exact":
        return int(record.true_total)
    if mode != "off_period":
        raise InputError("unknown estimate mode %r" % (mode,))
    return estimate_from_off_period(record.lambda_used, record.pixels,
            samples, record.seed)


def estimate_from_off_period(lam, pixels, samples, seed):
    if samples < 1:
        raise InputError("off-period estimation needs at least one sample")
    if lam == 0:
        return 0
    draws = noise_stream(seed, 1).poisson(lam, size=samples)
    return int(math.floor(pixels * draws.mean() + 0.5))

"""Stanford optical matrix multiplier model.

Inputs drive a row of emitters (quantized DAC levels), each beam fans out over
an attenuating mask, and two detectors per output sum the positive and
negative rails. The rail difference is scaled electronically and squashed by
amplifier saturation, modelled as logsig.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument

SPEED_OF_LIGHT = 3.0e8  # m/s


@dataclass(frozen=True)
class QuantizationSpec:
    bits: int = 0  # 0: ideal, no quantization

    def __post_init__(self):
        if not (self.bits == 0 or 8 <= self.bits <= 12):
            raise InvalidArgument(f"bits must be 0 or in [8, 12], got {self.bits}")


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.sigma >= 0.0:
            raise InvalidArgument(f"noise sigma must be non-negative, got {self.sigma}")


IDEAL = QuantizationSpec(0)
NOISELESS = NoiseSpec(0.0, 0)


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class WeightMask:
    """Dual-rail attenuation mask; effective weight is gain * (pos - neg)."""

    pos: np.ndarray
    neg: np.ndarray
    gain: float = 1.0
    m: int = field(init=False)
    n: int = field(init=False)

    def __post_init__(self):
        pos, neg = _frozen(self.pos), _frozen(self.neg)
        if pos.ndim != 2 or pos.shape != neg.shape:
            raise InvalidArgument(f"rail shapes differ or are not 2-D: {pos.shape} vs {neg.shape}")
        for rail in (pos, neg):
            if rail.size and not np.all((rail >= 0.0) & (rail <= 1.0)):
                raise InvalidArgument("attenuations must lie in [0, 1]")
        if not self.gain > 0.0:
            raise InvalidArgument(f"gain must be positive, got {self.gain}")
        object.__setattr__(self, "pos", pos)
        object.__setattr__(self, "neg", neg)
        object.__setattr__(self, "gain", float(self.gain))
        object.__setattr__(self, "m", pos.shape[0])
        object.__setattr__(self, "n", pos.shape[1])

    @classmethod
    def from_signed(cls, weights) -> "WeightMask":
        """Canonical decomposition: one rail zero per entry, gain = max(1, max|w|)."""
        w = np.atleast_2d(np.asarray(weights, dtype=np.float64))
        gain = max(1.0, float(np.max(np.abs(w)))) if w.size else 1.0
        return cls(np.maximum(w, 0.0) / gain, np.maximum(-w, 0.0) / gain, gain)

    @classmethod
    def zeros(cls, m: int, n: int) -> "WeightMask":
        return cls(np.zeros((m, n)), np.zeros((m, n)), 1.0)

    def signed(self) -> np.ndarray:
        return self.gain * (self.pos - self.neg)

    def quantized(self, q: QuantizationSpec) -> "WeightMask":
        """Gray levels snapped to the same grid as the signal path."""
        if q.bits == 0:
            return self
        return WeightMask(quantize_array(self.pos, q), quantize_array(self.neg, q), self.gain)

    def __eq__(self, other):
        if not isinstance(other, WeightMask):
            return NotImplemented
        return (self.gain == other.gain and np.array_equal(self.pos, other.pos)
                and np.array_equal(self.neg, other.neg))

    def to_json(self) -> dict:
        return {"m": self.m, "n": self.n, "gain": self.gain,
                "pos": self.pos.reshape(-1).tolist(), "neg": self.neg.reshape(-1).tolist()}

    @classmethod
    def from_json(cls, doc: dict) -> "WeightMask":
        shape = (doc["m"], doc["n"])
        return cls(np.reshape(doc["pos"], shape), np.reshape(doc["neg"], shape), doc["gain"])


def quantize_array(x, q: QuantizationSpec) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.size and not np.all((x >= 0.0) & (x <= 1.0)):
        raise InvalidArgument("quantizer input must lie in [0, 1]")
    if q.bits == 0:
        return x
    top = (1 << q.bits) - 1
    return np.rint(x * top) / top


def quantize(x: float, q: QuantizationSpec = IDEAL) -> float:
    """Nearest level of the uniform 2**bits grid on [0, 1]."""
    return float(quantize_array(x, q))


def detector_sums(mask: WeightMask, x, q: QuantizationSpec = IDEAL) -> tuple[np.ndarray, np.ndarray]:
    """Positive- and negative-rail detector readings for input vector ``x``."""
    xq = quantize_array(x, q)
    if xq.ndim != 1 or xq.shape[0] != mask.n:
        raise InvalidArgument(f"expected {mask.n} inputs, got shape {xq.shape}")
    return mask.pos @ xq, mask.neg @ xq


def matvec(mask: WeightMask, x, q: QuantizationSpec = IDEAL, noise: NoiseSpec = NOISELESS,
           ordinal: int = 0) -> np.ndarray:
    """One optical pass: quantize, attenuate, sum per rail, subtract, scale.

    Detector noise is drawn from a Philox stream keyed by ``(noise.seed,
    ordinal)``; callers number their calls so repeated passes see fresh noise.
    """
    s_pos, s_neg = detector_sums(mask, x, q)
    out = mask.gain * (s_pos - s_neg)
    if noise.sigma > 0.0 and mask.m:
        key = ((noise.seed & (2**64 - 1)) << 64) | (ordinal & (2**64 - 1))
        gen = np.random.Generator(np.random.Philox(key=key))
        out = out + gen.normal(0.0, noise.sigma, mask.m)
    return out


def squash(s):
    """logsig(s) = 1 / (1 + exp(-s)); scalar in, scalar out."""
    arr = np.asarray(s, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgument("squash input must be finite")
    # split by sign so exp never overflows
    e = np.exp(-np.abs(arr))
    out = np.where(arr >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return float(out) if out.ndim == 0 else out


def throughput(n_inputs: int, n_outputs: int, delta_x: float) -> float:
    """Multiply-accumulates per second for one pass through a mask of thickness ``delta_x``."""
    if not (n_inputs > 0 and n_outputs > 0 and delta_x > 0):
        raise InvalidArgument("throughput arguments must be positive")
    dt = delta_x / SPEED_OF_LIGHT
    return n_inputs * n_outputs / dt


def transit_time(delta_x: float) -> float:
    if not delta_x > 0:
        raise InvalidArgument("delta_x must be positive")
    return delta_x / SPEED_OF_LIGHT


def logit(p: float) -> float:
    return math.log(p / (1.0 - p))

"""Stochastic pulse trains.

A unit-interval activation is carried as a train of ``np`` time slices. In the
standard form every slice is 0 or 1 and the probability of a 1 equals the
activation; the modified form also allows attenuated (fractional) pulses.
Decoding is the slice mean, so attenuation and slice-wise products stay exact
arithmetic on the slices.

Randomness is counter based: slice ``i`` of a train drawn on ``StreamId(seed,
lane)`` is the ``i``-th output of a Philox generator keyed by ``(seed, lane)``.
Two lanes never share a key, which is what makes AND-products of trains on
different lanes statistically independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidArgument

DEFAULT_NP = 256

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class Activation:
    value: float

    def __post_init__(self):
        v = float(self.value)
        if not (0.0 <= v < 1.0):
            raise InvalidArgument(f"activation must lie in [0, 1), got {self.value!r}")
        object.__setattr__(self, "value", v)


@dataclass(frozen=True)
class StreamId:
    seed: int
    lane: int

    def key(self) -> int:
        return ((self.seed & _MASK64) << 64) | (self.lane & _MASK64)


def make_lane(tag: int, step: int, index: int) -> int:
    """Pack (tag, step, index) into a 64-bit lane number.

    tag: 8 bits, step: 32 bits, index: 24 bits. Distinct triples give
    distinct lanes.
    """
    if not (0 <= tag < 1 << 8 and 0 <= step < 1 << 32 and 0 <= index < 1 << 24):
        raise InvalidArgument(f"lane fields out of range: {(tag, step, index)}")
    return (tag << 56) | (step << 24) | index


class PulseTrain:
    """Immutable train of per-slice pulse heights in [0, 1]."""

    __slots__ = ("_slices", "binary")

    def __init__(self, slices, binary: bool | None = None):
        arr = np.array(slices, dtype=np.float64).reshape(-1)
        if arr.size == 0:
            raise InvalidArgument("a pulse train needs at least one slice")
        if not np.all((arr >= 0.0) & (arr <= 1.0)):
            raise InvalidArgument("pulse heights must lie in [0, 1]")
        is_binary = bool(np.all((arr == 0.0) | (arr == 1.0)))
        if binary is None:
            binary = is_binary
        elif binary and not is_binary:
            raise InvalidArgument("binary train contains non-unit pulses")
        arr.setflags(write=False)
        self._slices = arr
        self.binary = bool(binary)

    @property
    def slices(self) -> np.ndarray:
        return self._slices

    @property
    def np(self) -> int:
        return int(self._slices.size)

    def __len__(self) -> int:
        return self.np

    def __eq__(self, other) -> bool:
        if not isinstance(other, PulseTrain):
            return NotImplemented
        return self.binary == other.binary and np.array_equal(self._slices, other._slices)

    def __hash__(self):
        return hash((self.binary, self._slices.tobytes()))

    def __repr__(self) -> str:
        return f"PulseTrain(np={self.np}, binary={self.binary}, mean={decode(self):.4f})"

    def to_json(self) -> dict:
        return {"np": self.np, "binary": self.binary, "slices": self._slices.tolist()}

    @classmethod
    def from_json(cls, doc: dict) -> "PulseTrain":
        train = cls(doc["slices"], binary=doc["binary"])
        if train.np != doc["np"]:
            raise InvalidArgument("np does not match the number of slices")
        return train

    @classmethod
    def constant(cls, height: float, np_: int) -> "PulseTrain":
        return cls(np.full(int(np_), float(height)))


def _check_np(np_: int) -> int:
    if int(np_) != np_ or np_ < 1:
        raise InvalidArgument(f"train length must be a positive integer, got {np_!r}")
    return int(np_)


def uniforms(stream: StreamId, np_: int) -> np.ndarray:
    """The first ``np_`` uniform draws of ``stream``."""
    gen = np.random.Generator(np.random.Philox(key=stream.key()))
    return gen.random(_check_np(np_))


def encode(a: Activation | float, np_: int = DEFAULT_NP, stream: StreamId = StreamId(0, 0)) -> PulseTrain:
    """Bernoulli-encode an activation as a binary train."""
    np_ = _check_np(np_)
    p = a.value if isinstance(a, Activation) else Activation(a).value
    return PulseTrain(uniforms(stream, np_) < p, binary=True)


def intensity(a: Activation | float) -> PulseTrain:
    """Degenerate single-slice train carrying the activation as a pulse height."""
    p = a.value if isinstance(a, Activation) else Activation(a).value
    return PulseTrain([p], binary=p == 0.0)


def decode(t: PulseTrain) -> float:
    return float(t.slices.mean())


def and_product(a: PulseTrain, b: PulseTrain) -> PulseTrain:
    """Slice-wise product (AND for binary trains).

    Callers must draw ``a`` and ``b`` on different lanes; the product of a
    train with itself decodes to the train's value, not its square.
    """
    if a.np != b.np:
        raise InvalidArgument(f"train lengths differ: {a.np} vs {b.np}")
    return PulseTrain(a.slices * b.slices, binary=a.binary and b.binary)


def attenuate(t: PulseTrain, w: float) -> PulseTrain:
    if not (0.0 <= w <= 1.0):
        raise InvalidArgument(f"attenuation must lie in [0, 1], got {w!r}")
    return PulseTrain(t.slices * w, binary=t.binary and w in (0.0, 1.0))


def estimator_stddev(p: float, np_: int) -> float:
    """Standard deviation of the decoded mean of ``np_`` Bernoulli(p) slices."""
    np_ = _check_np(np_)
    return math.sqrt(p * (1.0 - p) / np_)


def encode_many(values: Sequence[float], np_: int, streams: Sequence[StreamId]) -> np.ndarray:
    """Binary slice matrix, one row per (value, stream) pair."""
    np_ = _check_np(np_)
    out = np.empty((len(values), np_))
    for i, (v, s) in enumerate(zip(values, streams)):
        out[i] = uniforms(s, np_) < v
    return out

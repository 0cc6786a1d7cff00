import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fwlnn import pulse
from fwlnn.errors import InvalidArgument
from fwlnn.pulse import Activation, PulseTrain, StreamId


def test_activation_range():
    assert Activation(0.0).value == 0.0
    for bad in (-0.01, 1.0, 1.5, float("nan")):
        with pytest.raises(InvalidArgument):
            Activation(bad)


def test_encode_zero_is_silent():
    t = pulse.encode(0.0, 256, StreamId(3, 4))
    assert t.binary and t.np == 256 and not t.slices.any()


def test_encode_half_within_four_sigma():
    sigma = math.sqrt(0.25 / 256)
    assert pulse.estimator_stddev(0.5, 256) == pytest.approx(sigma)
    d = pulse.decode(pulse.encode(0.5, 256, StreamId(42, 0)))
    assert abs(d - 0.5) <= 4 * sigma


def test_encode_deterministic():
    a = pulse.encode(0.37, 512, StreamId(9, 77))
    b = pulse.encode(0.37, 512, StreamId(9, 77))
    assert a == b and hash(a) == hash(b)
    assert a != pulse.encode(0.37, 512, StreamId(9, 78))


def test_encode_rejects_bad_length():
    with pytest.raises(InvalidArgument):
        pulse.encode(0.5, 0)


def test_decode_counts():
    assert pulse.decode(PulseTrain(np.zeros(16))) == 0.0
    assert pulse.decode(PulseTrain(np.ones(128))) == 1.0
    s = np.zeros(256)
    s[::4] = 1.0  # 64 ones
    assert pulse.decode(PulseTrain(s)) == 0.25


def test_train_invariants():
    with pytest.raises(InvalidArgument):
        PulseTrain([0.5, 1.2])
    with pytest.raises(InvalidArgument):
        PulseTrain([0.5, 1.0], binary=True)
    with pytest.raises(InvalidArgument):
        PulseTrain([])
    t = PulseTrain([0.0, 1.0, 1.0])
    assert t.binary
    with pytest.raises(ValueError):
        t.slices[0] = 1.0


def test_and_product_identity_and_annihilator():
    t = pulse.encode(0.6, 64, StreamId(1, 1))
    assert pulse.and_product(PulseTrain.constant(1.0, 64), t) == t
    assert not pulse.and_product(PulseTrain.constant(0.0, 64), t).slices.any()


def test_and_product_length_mismatch():
    with pytest.raises(InvalidArgument):
        pulse.and_product(PulseTrain.constant(1.0, 4), PulseTrain.constant(1.0, 5))


def test_and_product_half_half():
    n = 4096
    a = pulse.encode(0.5, n, StreamId(5, pulse.make_lane(0, 0, 1)))
    b = pulse.encode(0.5, n, StreamId(5, pulse.make_lane(0, 0, 2)))
    assert abs(pulse.decode(pulse.and_product(a, b)) - 0.25) <= 4 * math.sqrt(0.25 * 0.75 / n)


def test_and_product_monte_carlo_mean():
    # 1000 independent products: the sample mean concentrates on 0.25
    n, trials = 4096, 1000
    vals = [pulse.decode(pulse.and_product(pulse.encode(0.5, n, StreamId(t, 1)), pulse.encode(0.5, n, StreamId(t, 2))))
            for t in range(trials)]
    assert abs(np.mean(vals) - 0.25) <= 5 * math.sqrt(0.25 * 0.75 / n) / math.sqrt(trials)


def test_attenuate():
    t = pulse.encode(0.8, 256, StreamId(2, 2))
    assert pulse.attenuate(t, 1.0) == t
    assert not pulse.attenuate(t, 0.0).slices.any()
    half = pulse.attenuate(t, 0.5)
    assert pulse.decode(half) == 0.5 * pulse.decode(t)
    assert not half.binary
    with pytest.raises(InvalidArgument):
        pulse.attenuate(t, 1.01)


def test_estimator_stddev_values():
    assert pulse.estimator_stddev(0.5, 256) == 0.03125
    assert pulse.estimator_stddev(0.0, 256) == 0.0
    # sqrt(0.1875 / 1024) = 0.013531646...
    assert pulse.estimator_stddev(0.25, 1024) == pytest.approx(0.0135316, abs=1e-6)


def test_intensity_is_single_slice():
    t = pulse.intensity(0.3)
    assert t.np == 1 and pulse.decode(t) == 0.3 and not t.binary


def test_lane_packing():
    assert pulse.make_lane(0, 0, 0) == 0
    lanes = {pulse.make_lane(t, s, i) for t in range(3) for s in range(3) for i in range(3)}
    assert len(lanes) == 27
    with pytest.raises(InvalidArgument):
        pulse.make_lane(0, 0, 1 << 24)


def test_json_round_trip():
    t = pulse.attenuate(pulse.encode(0.4, 32, StreamId(1, 2)), 0.25)
    doc = t.to_json()
    assert set(doc) == {"np", "binary", "slices"}
    assert PulseTrain.from_json(doc) == t


def test_encode_many_matches_encode():
    streams = [StreamId(4, i) for i in range(3)]
    m = pulse.encode_many([0.1, 0.5, 0.9], 64, streams)
    for row, v, s in zip(m, [0.1, 0.5, 0.9], streams):
        assert np.array_equal(row, pulse.encode(v, 64, s).slices)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(0.0, 0.999), n=st.sampled_from([64, 256, 1024]), seed=st.integers(0, 2**32))
def test_unbiasedness(a, n, seed):
    vals = pulse.encode_many([a] * 1000, n, [StreamId(seed, i) for i in range(1000)]).mean(axis=1)
    tol = 5 * pulse.estimator_stddev(a, n) / math.sqrt(1000)
    assert abs(vals.mean() - a) <= tol + 1e-12


@settings(max_examples=20, deadline=None)
@given(a=st.floats(0.0, 0.999), b=st.floats(0.0, 0.999), seed=st.integers(0, 2**32))
def test_product_law(a, b, seed):
    n, trials = 256, 1000
    x = pulse.encode_many([a] * trials, n, [StreamId(seed, 2 * i) for i in range(trials)])
    y = pulse.encode_many([b] * trials, n, [StreamId(seed, 2 * i + 1) for i in range(trials)])
    vals = (x * y).mean(axis=1)
    tol = 5 * pulse.estimator_stddev(a * b, n) / math.sqrt(trials)
    assert abs(vals.mean() - a * b) <= tol + 1e-12


@pytest.mark.parametrize("a", [0.3, 0.5, 0.8])
def test_correlation_hazard(a):
    # a train ANDed with itself carries a, not a squared
    t = pulse.encode(a, 4096, StreamId(11, 3))
    d = pulse.decode(pulse.and_product(t, t))
    assert d == pulse.decode(t)
    assert abs(d - a) <= 5 * pulse.estimator_stddev(a, 4096)
    assert abs(d - a * a) > 5 * pulse.estimator_stddev(a * a, 4096)


@settings(max_examples=50, deadline=None)
@given(a=st.floats(0.0, 0.999), w=st.floats(0.0, 1.0), seed=st.integers(0, 1000))
def test_attenuation_linearity(a, w, seed):
    t = pulse.encode(a, 128, StreamId(seed, 0))
    assert pulse.decode(pulse.attenuate(t, w)) == pytest.approx(w * pulse.decode(t), rel=1e-12, abs=1e-15)

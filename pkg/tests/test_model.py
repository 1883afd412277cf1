import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ionflux.errors import InvalidConfig, NonPositiveProfile, OutOfDomain
from ionflux.model import (BathState, ChannelGeometry, IonPair, Profile, cumulative_resistance,
                           moments)


def test_uniform_resistance_is_identity():
    for x in np.linspace(0, 1, 11):
        assert cumulative_resistance(Profile.uniform(), x) == pytest.approx(x, abs=1e-12)


def test_linear_profile_matches_log():
    # h = 1 + x gives H(1) = ln 2
    p = Profile.from_function(lambda x: 1.0 + x)
    assert cumulative_resistance(p, 1.0) == pytest.approx(math.log(2.0), rel=1e-12)
    assert cumulative_resistance(p, 0.5) == pytest.approx(math.log(1.5), rel=1e-12)


def test_table_profile_trapezoid():
    p = Profile.from_table([0.0, 0.5, 1.0], [1.0, 2.0, 1.0])
    # trapezoid on 1/h: 0.5 * (1 + 0.5)/2 twice
    assert cumulative_resistance(p, 1.0) == pytest.approx(0.75)
    assert cumulative_resistance(p, 0.5) == pytest.approx(0.375)


def test_out_of_domain():
    with pytest.raises(OutOfDomain):
        cumulative_resistance(Profile.uniform(), 1.5)


def test_nonpositive_profiles_rejected():
    with pytest.raises(NonPositiveProfile):
        Profile.from_function(lambda x: x - 0.5)
    with pytest.raises(NonPositiveProfile):
        Profile.from_table([0, 1], [1, 0])


def test_table_validation():
    with pytest.raises(InvalidConfig):
        Profile.from_table([0, 0.6, 0.5, 1], [1, 1, 1, 1])
    with pytest.raises(InvalidConfig):
        Profile.from_table([0.1, 1], [1, 1])


def test_csv_profile(tmp_path):
    f = tmp_path / "h.csv"
    f.write_text("x,h\n0,1\n0.5,2\n1,1\n")
    assert cumulative_resistance(Profile.from_csv(f), 1.0) == pytest.approx(0.75)
    bad = tmp_path / "bad.csv"
    bad.write_text("pos,area\n0,1\n1,1\n")
    with pytest.raises(InvalidConfig):
        Profile.from_csv(bad)


def test_config_validation():
    with pytest.raises(InvalidConfig):
        IonPair(z1=-1, z2=1)
    with pytest.raises(InvalidConfig):
        IonPair(D1=0)
    with pytest.raises(InvalidConfig):
        BathState(V=0, L=0, R=1)
    with pytest.raises(InvalidConfig):
        ChannelGeometry(a=0.7, b=0.3)
    with pytest.raises(InvalidConfig):
        ChannelGeometry(a=0.5, b=0.5)
    ChannelGeometry(a=0.5, b=0.5, allow_zero_width=True)


def test_reference_moments():
    m = moments(ChannelGeometry())
    assert (m.H1, m.alpha, m.beta) == pytest.approx((1.0, 1 / 3, 2 / 3), abs=1e-12)


def test_swapped_bath():
    b = BathState(V=2.0, L=0.3, R=1.2).swapped()
    assert (b.V, b.L, b.R) == (-2.0, 1.2, 0.3)


def test_mirrored_geometry_moments():
    g = ChannelGeometry(a=0.2, b=0.5, profile=Profile.from_function(lambda x: 1 + x))
    m, mm = moments(g), moments(g.mirrored())
    assert mm.H1 == pytest.approx(m.H1, rel=1e-12)
    assert mm.alpha == pytest.approx(1 - m.beta, rel=1e-12)
    assert mm.beta == pytest.approx(1 - m.alpha, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(c=st.floats(0.1, 10.0), k=st.floats(-0.8, 0.8),
       a=st.floats(0.05, 0.45), w=st.floats(0.05, 0.5))
def test_scaling_leaves_fractions_unchanged(c, k, a, w):
    p = Profile.from_function(lambda x: 1.0 + k * x)
    g = ChannelGeometry(a=a, b=a + w, profile=p)
    gs = ChannelGeometry(a=a, b=a + w, profile=p.scaled(c))
    m, ms = moments(g), moments(gs)
    assert ms.H1 == pytest.approx(m.H1 / c, rel=1e-10)
    assert ms.alpha == pytest.approx(m.alpha, rel=1e-10)
    assert ms.beta == pytest.approx(m.beta, rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(hs=st.lists(st.floats(0.2, 5.0), min_size=3, max_size=12))
def test_table_resistance_monotone(hs):
    xs = np.linspace(0, 1, len(hs))
    p = Profile.from_table(xs, hs)
    vals = [cumulative_resistance(p, x) for x in np.linspace(0, 1, 21)]
    assert all(v2 > v1 for v1, v2 in zip(vals, vals[1:]))

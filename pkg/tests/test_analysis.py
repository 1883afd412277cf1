import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ionflux import analysis as an
from ionflux import expansion as ex
from ionflux.errors import BEqualsOne, DegenerateGeometryB
from ionflux.model import BathState, ChannelGeometry, IonPair, moments


def test_reference_critical_voltages(ions, ref_bath, ref_moments):
    cv = an.critical_voltages(ref_bath, ref_moments, ions)
    assert cv.Vq1 == pytest.approx(22.2575, abs=1e-3)
    assert cv.Vq2 == pytest.approx(-cv.Vq1)
    assert cv.case_tag == "ii"


def test_critical_voltage_ratio():
    ions = IonPair(z1=2.0, z2=-1.0)
    cv = an.critical_voltages(BathState(0, 0.3, 1.0), moments(ChannelGeometry(a=0.2, b=0.7)), ions)
    assert cv.Vq1 * ions.z2 == pytest.approx(cv.Vq2 * ions.z1)


def test_zero_width_has_no_B(ions, ref_bath):
    mom = moments(ChannelGeometry(a=0.5, b=0.5, allow_zero_width=True))
    with pytest.raises(DegenerateGeometryB):
        an.critical_voltages(ref_bath, mom, ions)


def test_B_equal_one_detected(ions, ref_moments, monkeypatch):
    shape = ex.FirstOrderShape(A=0.2, B=1.0 + 1e-12, lam=1.0, AB=0.2)
    monkeypatch.setattr(ex, "first_order_shape", lambda bath, mom: shape)
    with pytest.raises(BEqualsOne):
        an.critical_voltages(BathState(0, 0.5, 1.0), ref_moments, ions)


def test_reference_point_is_purple(ions, ref_bath, ref_moments):
    c = an.classify_point(ions, ref_bath, ref_moments)
    assert (c.s1, c.s2, c.color) == (-1, 1, "purple")


@pytest.mark.parametrize("V,expect", [(30.0, (1, 1, "red")), (-30.0, (-1, -1, "blue"))])
def test_case_ii_outer_intervals(ions, ref_moments, V, expect):
    c = an.classify_point(ions, BathState(V, 0.5, 1.0), ref_moments)
    assert (c.s1, c.s2, c.color) == expect


def test_overlap_colors():
    assert an.overlap_color(1, 1) == "red"
    assert an.overlap_color(-1, -1) == "blue"
    assert an.overlap_color(1, -1) == an.overlap_color(-1, 1) == "purple"
    assert an.overlap_color(0, 1) == "boundary"


def test_scan_roots_no_root():
    assert an.scan_roots(lambda v: v * v + 1, -5, 5) == []


def test_scan_roots_reversal_voltage(ions, ref_moments):
    f = lambda V: ex.zeroth_order(ions, BathState(V, 0.5, 1.0), ref_moments).J1
    roots = an.scan_roots(f, -5, 5)
    assert roots == [pytest.approx(math.log(2.0), abs=1e-9)]


def test_scan_roots_ignores_touching_zero():
    assert an.scan_roots(lambda v: (v - 0.3) ** 2, -1, 1) == []
    assert an.scan_roots(lambda v: v, -1, 1) == [0.0]  # zero on a grid node


def test_scan_recovers_Vq1(ions, ref_moments):
    def f(V):
        s = ex.expand(ions, BathState(V, 0.5, 1.0), ref_moments, order=1)
        return s.order0.J1 * s.order1.J1
    roots = an.scan_roots(f, -50, 50)
    assert len(roots) == 1
    assert roots[0] == pytest.approx(an.critical_voltages(BathState(0, 0.5, 1.0), ref_moments, ions).Vq1, abs=1e-6)


def test_grid_excludes_equal_baths(ions):
    grid = an.SweepGrid(an.Axis("L", 0.5, 1.5, 3), an.Axis("V", -1, 1, 4))
    an.classify_grid(grid, ions, ChannelGeometry())
    assert len(grid.cells) == 12
    middle = grid.cells[4:8]
    assert all(c.excluded and c.classification is None for c in middle)
    assert all(c.classification.color in an.COLORS for c in grid.cells if not c.excluded)


def test_grid_parallel_is_deterministic(ions, monkeypatch):
    monkeypatch.setenv("IONFLUX_THREADS", "2")
    geom = ChannelGeometry()
    make = lambda: an.SweepGrid(an.Axis("R", 0.1, 2, 9), an.Axis("V", -10, 10, 7), include_second=True)
    par = an.classify_grid(make(), ions, geom, workers=4)
    monkeypatch.delenv("IONFLUX_THREADS")
    ser = an.classify_grid(make(), ions, geom)
    assert par.cells == ser.cells


def test_worker_count_respects_cap(monkeypatch):
    monkeypatch.setenv("IONFLUX_THREADS", "3")
    assert an.worker_count(8) == 3
    assert an.worker_count() == 3
    monkeypatch.delenv("IONFLUX_THREADS")
    assert an.worker_count() == 1


def test_iv_order0_is_linear(ions, ref_moments):
    Vs = np.linspace(-3, 3, 7)
    rows = an.iv_curve(ions, 0.5, 1.0, Vs, ref_moments, 0.0, mode="order0")
    I = np.array([r.I for r in rows])
    assert np.allclose(np.diff(I, 2), 0.0, atol=1e-12)
    d = math.log(0.5)
    expected = -0.5 * (Vs + d) / d - (-0.5) * (-Vs + d) / d
    assert np.allclose(I, expected, rtol=1e-12)


def test_iv_solver_near_order2(ions, ref_moments):
    Vs = np.linspace(-2, 2, 5)
    sol = an.iv_curve(ions, 0.5, 1.0, Vs, ref_moments, 1e-3, mode="solver")
    o2 = an.iv_curve(ions, 0.5, 1.0, Vs, ref_moments, 1e-3, mode="order2")
    assert all(r.status == "ok" for r in sol)
    assert max(abs(a.J1 - b.J1) for a, b in zip(sol, o2)) < 1e-7


def test_iv_bad_mode(ions, ref_moments):
    with pytest.raises(ValueError):
        an.iv_curve(ions, 0.5, 1.0, [0.0], ref_moments, 0.0, mode="order3")


@settings(max_examples=50, deadline=None)
@given(L=st.floats(0.05, 3.0), R=st.floats(0.05, 3.0), a=st.floats(0.05, 0.6), w=st.floats(0.05, 0.35),
       t=st.floats(-3.0, 3.0))
def test_sign_table_holds(L, R, a, w, t):
    ions = IonPair()
    if abs(math.log(L / R)) < 1e-3:
        return
    mom = moments(ChannelGeometry(a=a, b=a + w))
    try:
        cv = an.critical_voltages(BathState(0, L, R), mom, ions)
    except BEqualsOne:
        return
    # voltage placed relative to the critical voltages, away from every zero
    V = cv.Vq1 + t * abs(cv.Vq1)
    rev = -math.log(L / R)
    if min(abs(V - cv.Vq1), abs(V - cv.Vq2), abs(V - rev), abs(V + rev)) < 1e-6 * max(1, abs(V)):
        return
    c = an.classify_point(ions, BathState(V, L, R), mom)
    if 0 in (c.s1, c.s2):
        return
    assert (c.s1, c.s2) == an.expected_signs(cv, V)

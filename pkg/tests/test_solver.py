import numpy as np
import pytest

from ionflux import expansion as ex
from ionflux.errors import NoConvergence, NonPositiveConcentration
from ionflux.model import BathState, ChannelGeometry, Profile, moments
from ionflux.solver import (GoverningState, continuation_solve, excess_relation, jacobian, logmean,
                            residual, solve)


def test_logmean_series_branch():
    assert logmean(2.0, 2.0) == 2.0
    assert logmean(1.0, 1.0 + 1e-10) == pytest.approx(1.0 + 5e-11, rel=1e-14)
    assert logmean(1.0, np.e) == pytest.approx(np.e - 1.0)


def test_excess_relation_zero_for_neutral_layer(ions):
    # equal concentrations with no potential gap is a solution
    assert excess_relation(0.7, 0.7, 0.0, ions) == pytest.approx(0.0, abs=1e-15)


def test_zeroth_order_is_exact_root(ions, ref_bath, ref_moments):
    st = ex.state_from_solution(ex.expand(ions, ref_bath, ref_moments, order=0), 0.0, order=0)
    assert np.max(np.abs(residual(st, 0.0, ions, ref_bath, ref_moments))) < 1e-14
    assert np.linalg.cond(jacobian(st, 0.0, ions, ref_bath, ref_moments)) < 1e6


def test_small_charge_matches_expansion(ions, ref_bath, ref_moments):
    rep = continuation_solve(0.01, ions, ref_bath, ref_moments)
    pred = ex.evaluate_expansion(ex.expand(ions, ref_bath, ref_moments), 0.01)
    assert rep.residual_norm < 1e-12
    assert abs(rep.state.J1 - pred.J1) < 1e-6


@pytest.mark.parametrize("q", [-1.0, 0.5, 2.0, 10.0])
def test_continuation_large_charge(ions, ref_bath, ref_moments, q):
    rep = continuation_solve(q, ions, ref_bath, ref_moments)
    assert rep.residual_norm < 1e-12
    assert rep.state.is_admissible()
    assert rep.continuation_steps == max(1, int(np.ceil(80 * abs(q))))


def test_iteration_cap_raises_with_best_state(ions, ref_bath, ref_moments):
    init = ex.state_from_solution(ex.expand(ions, ref_bath, ref_moments, order=0), 0.0, order=0)
    with pytest.raises(NoConvergence) as info:
        solve(10.0, init, ions, ref_bath, ref_moments, max_iter=2)
    assert info.value.best_state is not None
    assert np.isfinite(info.value.residual_norm)


def test_inadmissible_start_rejected(ions, ref_bath, ref_moments):
    bad = GoverningState(0, 0, -1, 1, 1, 1, 0, 0, 0, 0, 0.1)
    with pytest.raises(NonPositiveConcentration):
        solve(0.0, bad, ions, ref_bath, ref_moments)


def test_mirror_symmetry_nonuniform(ions):
    g = ChannelGeometry(a=0.2, b=0.45, profile=Profile.from_function(lambda x: 1 + 0.5 * x * x))
    bath = BathState(V=0.7, L=0.3, R=1.4)
    s = continuation_solve(0.2, ions, bath, moments(g)).state
    m = continuation_solve(0.2, ions, bath.swapped(), moments(g.mirrored())).state
    assert m.J1 == pytest.approx(-s.J1, rel=1e-9)
    assert m.J2 == pytest.approx(-s.J2, rel=1e-9)

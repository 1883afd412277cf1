"""Direct Newton solve of the singular-limit governing system.

Eleven unknowns, eleven equations: the charge and excess relations at both
junctions, the flux of each species matched across the three segments, and
the middle-segment relations for potential, concentration and total flux.
The layer values on either side of the junctions are derived from the
unknowns, never solved for.
"""

from __future__ import annotations

import logging
import math
from dataclasses import astuple, dataclass, fields, replace
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.special import exprel

from .errors import IonFluxError, NoConvergence, NonFinite, NonPositiveConcentration, SingularJacobian
from .model import BathState, GeometryMoments, IonPair

log = logging.getLogger(__name__)

LOGMEAN_SWITCH = 1e-8
DEFAULT_TOL = 1e-12
MAX_ITER = 100
MAX_HALVINGS = 30
STEPS_PER_TENTH = 8


@dataclass(frozen=True)
class GoverningState:
    phi_a: float
    phi_b: float
    c1a: float
    c2a: float
    c1b: float
    c2b: float
    phi_am: float
    phi_bm: float
    J1: float
    J2: float
    y: float

    def to_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, v) -> "GoverningState":
        return cls(*(float(x) for x in v))

    @classmethod
    def names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def is_admissible(self) -> bool:
        return min(self.c1a, self.c2a, self.c1b, self.c2b, self.y) > 0


@dataclass(frozen=True)
class LayerValues:
    phi_al: float
    phi_br: float
    c1_al: float
    c2_al: float
    c1_br: float
    c2_br: float
    c1_am: float
    c1_bm: float


@dataclass(frozen=True)
class SolveReport:
    state: GoverningState
    residual_norm: float
    iterations: int
    continuation_steps: int = 0


def logmean(x: float, y: float) -> float:
    """(x - y) / (ln x - ln y), continuous across x == y."""
    if abs(x - y) < LOGMEAN_SWITCH * x:
        # series in u = (x - y)/y  around the geometric point
        u = (x - y) / y
        return y * (1.0 + u / 2.0 - u * u / 12.0 + u ** 3 / 24.0)
    return (x - y) / (math.log(x) - math.log(y))


def flux_expression(c_x: float, c_y: float, z: float, dphi: float, dH: float) -> float:
    """(c_x - c_y)/dH * (1 + z dphi / (ln c_x - ln c_y)) in log-mean form."""
    return ((c_x - c_y) + z * dphi * logmean(c_x, c_y)) / dH


def _binomial_tail(q: float, eps: float) -> float:
    """((1 + eps)**q - 1 - q*eps) / eps**2, smooth through eps = 0."""
    if abs(eps) < 1e-2:
        total, coef, power = 0.0, q * (q - 1) / 2.0, 1.0
        for k in range(2, 10):
            total += coef * power
            coef *= (q - k) / (k + 1)
            power *= eps
        return total
    return (math.expm1(q * math.log1p(eps)) - q * eps) / (eps * eps)


def excess_relation(c1: float, c2: float, gap: float, ions: IonPair) -> float:
    """Junction excess relation, reduced by the charge relation at the same junction.

    With w1 = z1 c1 e^{z1 gap}, w2 = -z2 c2 e^{z2 gap} and eps = w2/w1 - 1 the
    displayed relation equals w1 (z2-z1)/(z1 z2) eps**2 g(eps) - Q0 gap.  On
    the charge relation eps = Q0/w1, so one factor of Q0 divides out and the
    remaining equation stays regular at Q0 = 0 (the undivided form holds
    identically there for every gap).
    """
    z1, z2 = ions.z1, ions.z2
    q = z1 / (z1 - z2)
    w1 = z1 * c1 * math.exp(z1 * gap)
    w2 = -z2 * c2 * math.exp(z2 * gap)
    eps = w2 / w1 - 1.0
    return (z2 - z1) / (z1 * z2) * _binomial_tail(q, eps) * eps - gap


def auxiliary_values(state: GoverningState, ions: IonPair, bath: BathState,
                     moments: Optional[GeometryMoments] = None) -> LayerValues:
    """Layer values on the outer side of each junction and the middle-segment
    concentrations next to it."""
    z1, z2 = ions.z1, ions.z2
    s = state
    if min(s.c1a, s.c2a, s.c1b, s.c2b) <= 0:
        raise NonPositiveConcentration("junction concentrations must be positive")
    dz = z1 - z2
    p, q = -z2 / dz, z1 / dz
    phi_al = s.phi_a - math.log(-z2 * s.c2a / (z1 * s.c1a)) / dz
    phi_br = s.phi_b - math.log(-z2 * s.c2b / (z1 * s.c1b)) / dz
    geo_a = (z1 * s.c1a) ** p * (-z2 * s.c2a) ** q
    geo_b = (z1 * s.c1b) ** p * (-z2 * s.c2b) ** q
    return LayerValues(
        phi_al=phi_al,
        phi_br=phi_br,
        c1_al=geo_a / z1,
        c2_al=-geo_a / z2,
        c1_br=geo_b / z1,
        c2_br=-geo_b / z2,
        c1_am=math.exp(z1 * (s.phi_a - s.phi_am)) * s.c1a,
        c1_bm=math.exp(z1 * (s.phi_b - s.phi_bm)) * s.c1b,
    )


def residual(state: GoverningState, Q0: float, ions: IonPair, bath: BathState,
             moments: GeometryMoments) -> np.ndarray:
    z1, z2 = ions.z1, ions.z2
    s = state
    lv = auxiliary_values(s, ions, bath)
    Ha, Hb, H1 = moments.Ha, moments.Hb, moments.H1
    da = s.phi_a - s.phi_am
    db = s.phi_b - s.phi_bm
    e1a, e2a = math.exp(z1 * da), math.exp(z2 * da)
    e1b, e2b = math.exp(z1 * db), math.exp(z2 * db)
    c1L, c2L = bath.c1L(ions), bath.c2L(ions)
    c1R, c2R = bath.c1R(ions), bath.c2R(ions)
    T = s.J1 + s.J2
    arg = z1 * z2 * T * s.y
    # (1 - e^{z1 z2 T y}) / T == -z1 z2 y exprel(z1 z2 T y), finite as T -> 0
    r = np.array([
        z1 * s.c1a * e1a + z2 * s.c2a * e2a + Q0,
        z1 * s.c1b * e1b + z2 * s.c2b * e2b + Q0,
        excess_relation(s.c1a, s.c2a, da, ions),
        excess_relation(s.c1b, s.c2b, db, ions),
        s.J1 - flux_expression(c1L, lv.c1_al, z1, bath.V - lv.phi_al, Ha),
        s.J1 - flux_expression(lv.c1_br, c1R, z1, lv.phi_br, H1 - Hb),
        s.J2 - flux_expression(c2L, lv.c2_al, z2, bath.V - lv.phi_al, Ha),
        s.J2 - flux_expression(lv.c2_br, c2R, z2, lv.phi_br, H1 - Hb),
        s.phi_bm - s.phi_am + (z1 * s.J1 + z2 * s.J2) * s.y,
        lv.c1_bm - (math.exp(arg) * lv.c1_am + Q0 * s.J1 * z2 * s.y * exprel(arg)),
        T + ((z1 - z2) * (lv.c1_am - lv.c1_bm) + z2 * Q0 * (s.phi_am - s.phi_bm)) / (z2 * (Hb - Ha)),
    ])
    if not np.all(np.isfinite(r)):
        raise NonFinite("residual evaluation overflowed")
    return r


def displayed_residual(state: GoverningState, Q0: float, ions: IonPair, bath: BathState,
                       moments: GeometryMoments) -> np.ndarray:
    """Residual with the excess relations (rows 3, 4) in their undivided form."""
    z1, z2 = ions.z1, ions.z2
    s = state
    lv = auxiliary_values(s, ions, bath)
    r = residual(state, Q0, ions, bath, moments)
    da = s.phi_a - s.phi_am
    db = s.phi_b - s.phi_bm
    r[2] = (z2 - z1) / z2 * lv.c1_al - (s.c1a * math.exp(z1 * da) + s.c2a * math.exp(z2 * da) + Q0 * da)
    r[3] = (z2 - z1) / z2 * lv.c1_br - (s.c1b * math.exp(z1 * db) + s.c2b * math.exp(z2 * db) + Q0 * db)
    return r


def jacobian(state: GoverningState, Q0: float, ions: IonPair, bath: BathState,
             moments: GeometryMoments) -> np.ndarray:
    """Central-difference Jacobian, columns in GoverningState field order."""
    x = state.to_array()
    n = x.size
    jac = np.empty((n, n))
    for i in range(n):
        h = max(1e-7, 1e-7 * abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        rp = residual(GoverningState.from_array(xp), Q0, ions, bath, moments)
        rm = residual(GoverningState.from_array(xm), Q0, ions, bath, moments)
        jac[:, i] = (rp - rm) / (xp[i] - xm[i])
    return jac


def _norm(state, Q0, ions, bath, moments) -> float:
    try:
        return float(np.max(np.abs(residual(state, Q0, ions, bath, moments))))
    except (NonPositiveConcentration, NonFinite, OverflowError, ValueError):
        return math.inf


def solve(Q0: float, init: GoverningState, ions: IonPair, bath: BathState,
          moments: GeometryMoments, tol: float = DEFAULT_TOL,
          max_iter: int = MAX_ITER) -> SolveReport:
    """Damped Newton iteration from ``init``.

    Steps are halved (at most MAX_HALVINGS times) until the new point keeps
    every concentration and y positive and does not increase the residual
    max-norm.
    """
    if not init.is_admissible():
        raise NonPositiveConcentration("initial state must have positive concentrations and y")
    state = init
    norm = _norm(state, Q0, ions, bath, moments)
    best, best_norm = state, norm
    for it in range(max_iter + 1):
        if norm < tol:
            return SolveReport(state=state, residual_norm=norm, iterations=it)
        if it == max_iter:
            break
        r = residual(state, Q0, ions, bath, moments)
        jac = jacobian(state, Q0, ions, bath, moments)
        try:
            lu, piv = scipy.linalg.lu_factor(jac, check_finite=True)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise SingularJacobian(str(exc)) from exc
        if np.min(np.abs(np.diag(lu))) < 1e-14 * max(1.0, np.max(np.abs(jac))):
            raise SingularJacobian(f"Jacobian is numerically singular at iteration {it}")
        delta = scipy.linalg.lu_solve((lu, piv), -r)
        x = state.to_array()
        t = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = GoverningState.from_array(x + t * delta)
            if trial.is_admissible():
                trial_norm = _norm(trial, Q0, ions, bath, moments)
                if trial_norm < norm or (trial_norm <= norm and t == 1.0):
                    break
            t *= 0.5
        else:
            log.debug("line search stalled at iteration %d, norm %.3e", it, norm)
            break
        state, norm = trial, trial_norm
        if norm < best_norm:
            best, best_norm = state, norm
    raise NoConvergence(f"Newton did not reach tol={tol:g} (best residual {best_norm:.3e})",
                        best_state=best, residual_norm=best_norm)


def continuation_solve(Q0_target: float, ions: IonPair, bath: BathState, moments: GeometryMoments,
                       steps: Optional[int] = None, tol: float = DEFAULT_TOL) -> SolveReport:
    """Solve at Q0 = k*Q0_target/steps, k = 1..steps, warm-starting each stage."""
    from . import expansion

    if steps is None:
        steps = max(1, math.ceil(STEPS_PER_TENTH * abs(Q0_target) / 0.1))
    if steps < 1:
        raise ValueError("continuation needs at least one step")
    zeroth = expansion.state_from_solution(expansion.expand(ions, bath, moments, order=0), 0.0, order=0)
    if Q0_target == 0.0:
        report = solve(0.0, zeroth, ions, bath, moments, tol=tol)
        return replace(report, continuation_steps=0)
    state = zeroth
    try:
        sol = expansion.expand(ions, bath, moments, order=2)
        guess = expansion.state_from_solution(sol, Q0_target / steps, order=2)
        if guess.is_admissible():
            state = guess
    except IonFluxError:
        pass
    iterations = 0
    report = None
    for k in range(1, steps + 1):
        q = k * Q0_target / steps
        try:
            report = solve(q, state, ions, bath, moments, tol=tol)
        except NoConvergence as exc:
            exc.step = k
            raise NoConvergence(f"continuation step {k}/{steps} (Q0={q:g}): {exc}",
                                best_state=exc.best_state, residual_norm=exc.residual_norm,
                                step=k) from exc
        state = report.state
        iterations += report.iterations
    return SolveReport(state=report.state, residual_norm=report.residual_norm,
                       iterations=iterations, continuation_steps=steps)


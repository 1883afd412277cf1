"""Sign structure of the first- and second-order flux corrections.

Small positive Q0 strengthens |J_k| where J_k0 * J_k1 > 0 and weakens it where
the product is negative.  The critical voltages at which J10*J11 and J20*J21
change sign are available in closed form; :func:`scan_roots` recovers them
numerically so the same machinery applies to the second-order products.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize

from . import expansion as ex
from .errors import BEqualsOne, DegenerateInput, IonFluxError, NoConvergence
from .model import BathState, ChannelGeometry, GeometryMoments, IonPair, moments as geometry_moments
from .solver import continuation_solve

EXCLUSION_BAND = 1e-6
ZERO_PRODUCT = 1e-12
B_ONE_TOL = 1e-10
DEFAULT_Q0 = 0.01
SCAN_STEPS = 2000

COLORS = ("red", "blue", "purple")


@dataclass(frozen=True)
class CriticalVoltages:
    Vq1: float
    Vq2: float
    case_tag: str  # "i", "ii" or "degenerate"


@dataclass(frozen=True)
class SignClassification:
    V: float
    s1: int
    s2: int
    color: str
    q1: Optional[int] = None
    q2: Optional[int] = None


@dataclass(frozen=True)
class Axis:
    name: str
    lo: float
    hi: float
    steps: int

    def values(self) -> np.ndarray:
        if self.steps < 1:
            raise ValueError(f"axis {self.name} needs at least one step")
        if self.steps == 1:
            return np.array([self.lo])
        return np.linspace(self.lo, self.hi, self.steps)


@dataclass
class GridCell:
    axis1: float
    V: float
    excluded: bool
    classification: Optional[SignClassification] = None


@dataclass
class SweepGrid:
    """Concentration axis (``L`` or ``R``) by voltage axis.

    ``fixed`` holds the concentration that does not vary.  After
    :func:`classify_grid` runs, ``cells`` is row-major over (axis1, V), both
    ascending.
    """

    axis1: Axis
    axis2: Axis
    fixed: float = 1.0
    Q0: float = DEFAULT_Q0
    include_second: bool = False
    cells: list = field(default_factory=list)

    def __post_init__(self):
        if self.axis1.name not in ("L", "R"):
            raise ValueError(f"first axis must vary L or R, not {self.axis1.name!r}")
        if self.axis1.lo <= 0 or self.fixed <= 0:
            raise ValueError("concentrations on the grid must be positive")

    def bath(self, conc: float, V: float) -> BathState:
        if self.axis1.name == "L":
            return BathState(V=V, L=conc, R=self.fixed)
        return BathState(V=V, L=self.fixed, R=conc)


def _sign(x: float, zero: float = ZERO_PRODUCT) -> int:
    if abs(x) <= zero:
        return 0
    return 1 if x > 0 else -1


def overlap_color(s1: int, s2: int) -> str:
    if s1 == 0 or s2 == 0:
        return "boundary"
    if s1 > 0 and s2 > 0:
        return "red"
    if s1 < 0 and s2 < 0:
        return "blue"
    return "purple"


def critical_voltages(bath: BathState, moments: GeometryMoments, ions: IonPair) -> CriticalVoltages:
    shape = ex.first_order_shape(bath, moments)
    B = shape.require_B()
    if abs(B - 1.0) < B_ONE_TOL:
        raise BEqualsOne(f"B = {B!r} is within {B_ONE_TOL:g} of 1")
    lnLR = math.log(bath.L) - math.log(bath.R)
    Vq1 = -lnLR / (ions.z2 * (1 - B))
    Vq2 = -lnLR / (ions.z1 * (1 - B))
    if Vq1 < 0 < Vq2:
        tag = "i"
    elif Vq1 > 0 > Vq2:
        tag = "ii"
    else:
        tag = "degenerate"
    return CriticalVoltages(Vq1=Vq1, Vq2=Vq2, case_tag=tag)


def expected_signs(cv: CriticalVoltages, V: float) -> tuple[int, int]:
    """Signs of (J10*J11, J20*J21) at V according to the critical-voltage case table."""
    if cv.case_tag == "i":
        s1 = 1 if V < cv.Vq1 else -1
        s2 = 1 if V < cv.Vq2 else -1
    elif cv.case_tag == "ii":
        s1 = 1 if V > cv.Vq1 else -1
        s2 = 1 if V > cv.Vq2 else -1
    else:
        raise DegenerateInput("no sign table for a degenerate case")
    return s1, s2


def classify_point(ions: IonPair, bath: BathState, moments: GeometryMoments,
                   Q0: float = DEFAULT_Q0, include_second: bool = False) -> SignClassification:
    sol = ex.expand(ions, bath, moments, order=2 if include_second else 1)
    o0, o1 = sol.order0, sol.order1
    s1 = _sign(o0.J1 * o1.J1)
    s2 = _sign(o0.J2 * o1.J2)
    q1 = q2 = None
    if include_second:
        o2 = sol.order2
        q1 = _sign((o0.J1 + Q0 * o1.J1) * o2.J1)
        q2 = _sign((o0.J2 + Q0 * o1.J2) * o2.J2)
    return SignClassification(V=bath.V, s1=s1, s2=s2, color=overlap_color(s1, s2), q1=q1, q2=q2)


def sign_products(bath: BathState, moments: GeometryMoments, ions: IonPair, V_grid: Sequence[float],
                  Q0: float = DEFAULT_Q0, include_second: bool = False) -> list[Optional[SignClassification]]:
    """Classification at each voltage; ``None`` marks an excluded (degenerate) point."""
    out = []
    for V in V_grid:
        b = BathState(V=float(V), L=bath.L, R=bath.R)
        try:
            out.append(classify_point(ions, b, moments, Q0, include_second))
        except DegenerateInput:
            out.append(None)
    return out


def _classify_row(args) -> list[GridCell]:
    grid, ions, moments, conc = args
    cells = []
    excluded = abs(math.log(conc) - math.log(grid.fixed)) < EXCLUSION_BAND
    for V in grid.axis2.values():
        V = float(V)
        if excluded:
            cells.append(GridCell(axis1=conc, V=V, excluded=True))
            continue
        try:
            c = classify_point(ions, grid.bath(conc, V), moments, grid.Q0, grid.include_second)
            cells.append(GridCell(axis1=conc, V=V, excluded=False, classification=c))
        except DegenerateInput:
            cells.append(GridCell(axis1=conc, V=V, excluded=True))
    return cells


def worker_count(requested: Optional[int] = None) -> int:
    cap = os.environ.get("IONFLUX_THREADS")
    n = requested if requested is not None else 1
    if cap:
        n = min(n, max(1, int(cap))) if requested is not None else max(1, int(cap))
    return max(1, n)


def classify_grid(grid: SweepGrid, ions: IonPair, geometry: ChannelGeometry,
                  workers: Optional[int] = None) -> SweepGrid:
    """Fill ``grid.cells``; rows are evaluated independently and reassembled in order."""
    mom = geometry_moments(geometry)
    jobs = [(grid, ions, mom, float(c)) for c in grid.axis1.values()]
    n = worker_count(workers)
    if n > 1:
        with ProcessPoolExecutor(max_workers=n) as pool:
            rows = list(pool.map(_classify_row, jobs, chunksize=max(1, len(jobs) // (4 * n))))
    else:
        rows = [_classify_row(j) for j in jobs]
    grid.cells = [cell for row in rows for cell in row]
    return grid


def scan_roots(f: Callable[[float], float], lo: float, hi: float, steps: int = SCAN_STEPS,
               xtol: float = 1e-10) -> list[float]:
    """Sign changes of ``f`` on a uniform grid over [lo, hi], refined by bisection.

    Touching zeros (f vanishes without changing sign) are not reported.
    """
    xs = np.linspace(lo, hi, steps + 1)
    fs = np.array([f(float(x)) for x in xs])
    if not np.all(np.isfinite(fs)):
        raise ValueError("function is not finite on the scan grid")
    signs = np.sign(fs)
    roots = []
    i = 0
    n = len(xs)
    while i < n - 1:
        if signs[i] == 0:
            i += 1
            continue
        j = i + 1
        while j < n and signs[j] == 0:
            j += 1
        if j == n:
            break
        if signs[j] != signs[i]:
            if j == i + 1:
                roots.append(optimize.bisect(f, xs[i], xs[j], xtol=xtol))
            else:
                # run of exact zeros between opposite signs: report its midpoint
                roots.append(0.5 * (xs[i + 1] + xs[j - 1]))
        i = j
    return sorted(roots)


@dataclass(frozen=True)
class IVRow:
    V: float
    J1: float
    J2: float
    I: float
    mode: str
    Q0: float
    status: str = "ok"


IV_MODES = ("order0", "order1", "order2", "solver")


def iv_curve(ions: IonPair, L: float, R: float, V_grid: Sequence[float], moments: GeometryMoments,
             Q0: float, mode: str = "order2", continuation_steps: Optional[int] = None) -> list[IVRow]:
    if mode not in IV_MODES:
        raise ValueError(f"mode must be one of {IV_MODES}, got {mode!r}")
    rows = []
    for V in V_grid:
        V = float(V)
        bath = BathState(V=V, L=L, R=R)
        try:
            if mode == "solver":
                state = continuation_solve(Q0, ions, bath, moments, steps=continuation_steps).state
                J1, J2 = state.J1, state.J2
            else:
                order = int(mode[-1])
                sol = ex.expand(ions, bath, moments, order=order)
                coeffs = sol.orders()[:order + 1]
                J1 = sum(c.J1 * Q0 ** k for k, c in enumerate(coeffs))
                J2 = sum(c.J2 * Q0 ** k for k, c in enumerate(coeffs))
        except NoConvergence:
            rows.append(IVRow(V, math.nan, math.nan, math.nan, mode, Q0, "no_convergence"))
            continue
        except IonFluxError as exc:
            rows.append(IVRow(V, math.nan, math.nan, math.nan, mode, Q0, type(exc).__name__))
            continue
        current = ions.z1 * ions.D1 * J1 + ions.z2 * ions.D2 * J2
        rows.append(IVRow(V, J1, J2, current, mode, Q0))
    return rows

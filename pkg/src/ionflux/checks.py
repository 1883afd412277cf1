"""Cross-validation suites shared by ``ionflux verify`` and the acceptance tests.

Every check returns a :class:`CheckResult`; a suite is a list of checks.  All
random draws come from a seeded generator so reports are reproducible.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import analysis as an
from . import expansion as ex
from .errors import DegenerateInput, IonFluxError
from .model import BathState, ChannelGeometry, IonPair, Profile, moments
from .solver import continuation_solve, solve

FLUX_FIELDS = ("phi_a", "phi_b", "c1a", "c2a", "c1b", "c2b", "y", "J1", "J2")
SOLVE_TOL = 1e-14


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    elapsed: float
    limit: float
    metrics: dict = field(default_factory=dict)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}: {self.detail} ({self.elapsed:.2f}s, limit {self.limit:g}s)"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Draw:
    ions: IonPair
    bath: BathState
    geometry: ChannelGeometry


def _profile(rng) -> Profile:
    kind = rng.integers(3)
    if kind == 0:
        return Profile.uniform()
    c1, c2 = rng.uniform(-0.4, 0.4, size=2)
    if kind == 1:
        return Profile.from_function(lambda x, c1=c1, c2=c2: 1.0 + c1 * math.sin(math.pi * x) + c2 * x)
    xs = np.linspace(0.0, 1.0, 9)
    return Profile.from_table(xs, 1.0 + rng.uniform(-0.5, 0.5, size=xs.size))


def random_draw(rng, vmax: float = 3.0, min_log_gap: float = 0.1) -> Draw:
    z1 = float(rng.choice([1.0, 2.0, rng.uniform(0.5, 3.0)]))
    z2 = float(rng.choice([-1.0, -2.0, -rng.uniform(0.5, 3.0)]))
    D1, D2 = rng.uniform(0.5, 2.0, size=2)
    while True:
        L, R = np.exp(rng.uniform(math.log(0.1), math.log(3.0), size=2))
        if abs(math.log(L / R)) > min_log_gap:
            break
    a = rng.uniform(0.1, 0.6)
    b = rng.uniform(a + 0.1, 0.9)
    return Draw(ions=IonPair(z1=z1, z2=z2, D1=float(D1), D2=float(D2)),
                bath=BathState(V=float(rng.uniform(-vmax, vmax)), L=float(L), R=float(R)),
                geometry=ChannelGeometry(a=float(a), b=float(b), profile=_profile(rng)))


REFERENCE = Draw(ions=IonPair(), bath=BathState(V=1.0, L=0.5, R=1.0), geometry=ChannelGeometry())


def _timed(name: str, limit: float, body: Callable[[], tuple[bool, str, dict]]) -> CheckResult:
    t0 = time.perf_counter()
    try:
        ok, detail, metrics = body()
    except IonFluxError as exc:
        ok, detail, metrics = False, f"raised {type(exc).__name__}: {exc}", {}
    elapsed = time.perf_counter() - t0
    if elapsed > limit:
        ok = False
        detail += "; exceeded time limit"
    return CheckResult(name, ok, detail, elapsed, limit, metrics)


def _solve_J(draw: Draw, mom, Q0: float, init=None):
    if init is not None:
        return solve(Q0, init, draw.ions, draw.bath, mom, tol=SOLVE_TOL).state
    return continuation_solve(Q0, draw.ions, draw.bath, mom, tol=SOLVE_TOL).state


def _rel(x: float, y: float) -> float:
    return abs(x - y) / max(abs(y), 1e-300)


def check_zeroth_order(n: int = 50, seed: int = 1) -> CheckResult:
    def body():
        rng = np.random.default_rng(seed)
        worst_res, worst_rel, worst_it = 0.0, 0.0, 0
        for _ in range(n):
            d = random_draw(rng)
            mom = moments(d.geometry)
            sol = ex.expand(d.ions, d.bath, mom, order=0)
            init = ex.state_from_solution(sol, 0.0, order=0)
            rep = solve(0.0, init, d.ions, d.bath, mom)
            worst_res = max(worst_res, rep.residual_norm)
            worst_it = max(worst_it, rep.iterations)
            a, b = rep.state.to_array(), init.to_array()
            worst_rel = max(worst_rel, float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300))))
        ok = worst_res < 1e-12 and worst_it <= 2 and worst_rel < 1e-10
        return ok, f"max residual {worst_res:.2e}, max iterations {worst_it}, max rel diff {worst_rel:.2e}", \
            {"residual": worst_res, "iterations": worst_it, "rel": worst_rel}
    return _timed("zeroth-order exactness", 5.0, body)


def check_first_order_oracle(n: int = 20, seed: int = 2, h: float = 1e-4) -> CheckResult:
    def body():
        rng = np.random.default_rng(seed)
        worst, used = 0.0, 0
        while used < n:
            d = random_draw(rng)
            mom = moments(d.geometry)
            sol = ex.expand(d.ions, d.bath, mom, order=1)
            J11, J21 = sol.order1.J1, sol.order1.J2
            if abs(J11) <= 1e-6:
                continue
            used += 1
            init = ex.state_from_solution(sol, 0.0, order=0)
            plus = _solve_J(d, mom, h, init)
            minus = _solve_J(d, mom, -h, init)
            worst = max(worst, _rel((plus.J1 - minus.J1) / (2 * h), J11))
            if abs(J21) > 1e-6:
                worst = max(worst, _rel((plus.J2 - minus.J2) / (2 * h), J21))
        return worst < 1e-4, f"max rel error {worst:.2e} over {n} configs", {"rel": worst}
    return _timed("first-order oracle", 30.0, body)


def richardson_second(J: Callable[[float], float], hs=(1e-2, 5e-3, 2.5e-3)) -> float:
    """Two-stage Richardson limit of the symmetric second difference."""
    j0 = J(0.0)
    d = [(J(h) - 2 * j0 + J(-h)) / h ** 2 for h in hs]
    r1 = [(4 * d[i + 1] - d[i]) / 3 for i in range(len(d) - 1)]
    return (16 * r1[1] - r1[0]) / 15


def check_second_order_oracle(n: int = 20, seed: int = 3) -> CheckResult:
    def body():
        rng = np.random.default_rng(seed)
        worst, used = 0.0, 0
        while used < n:
            d = random_draw(rng)
            mom = moments(d.geometry)
            try:
                sol = ex.expand(d.ions, d.bath, mom, order=2)
            except DegenerateInput:
                continue
            J12, J22 = sol.order2.J1, sol.order2.J2
            if abs(J12) <= 1e-6:
                continue
            used += 1
            cache = {}

            def state(q):
                if q not in cache:
                    init = ex.state_from_solution(sol, q, order=2)
                    if not init.is_admissible():
                        init = ex.state_from_solution(sol, 0.0, order=0)
                    cache[q] = _solve_J(d, mom, q, init)
                return cache[q]

            worst = max(worst, _rel(richardson_second(lambda q: state(q).J1), 2 * J12))
            if abs(J22) > 1e-6:
                worst = max(worst, _rel(richardson_second(lambda q: state(q).J2), 2 * J22))
        return worst < 1e-3, f"max rel error {worst:.2e} over {n} configs", {"rel": worst}
    return _timed("second-order oracle", 120.0, body)


def convergence_slopes(draw: Draw = REFERENCE, Q0s=(1e-2, 5e-3, 2.5e-3)) -> list[float]:
    mom = moments(draw.geometry)
    sol = ex.expand(draw.ions, draw.bath, mom, order=2)
    errs = {k: [] for k in range(3)}
    for q in Q0s:
        st = _solve_J(draw, mom, q, ex.state_from_solution(sol, q, order=2))
        exact = np.array([getattr(st, f) for f in FLUX_FIELDS])
        for k in range(3):
            pred = ex.evaluate_expansion(sol, q, order=k)
            approx = np.array([getattr(pred, f) for f in FLUX_FIELDS])
            errs[k].append(float(np.max(np.abs(exact - approx))))
    logq = np.log(np.asarray(Q0s))
    return [float(np.polyfit(logq, np.log(errs[k]), 1)[0]) for k in range(3)]


def check_convergence_order() -> CheckResult:
    def body():
        slopes = convergence_slopes()
        ok = all(abs(s - (k + 1)) <= 0.25 for k, s in enumerate(slopes))
        return ok, "slopes " + ", ".join(f"k={k}: {s:.3f}" for k, s in enumerate(slopes)), {"slopes": slopes}
    return _timed("convergence order", 10.0, body)


def identity_errors(draw: Draw) -> dict:
    """Relative residuals of the algebraic identities tying the coefficients together."""
    ions, mom = draw.ions, moments(draw.geometry)
    sol = ex.expand(ions, draw.bath, mom, order=2)
    o1, o2, s = sol.order1, sol.order2, sol.second_system
    z1, z2 = ions.z1, ions.z2
    out = {}
    out["charge_a"] = abs(z1 * o1.c1a + z2 * o1.c2a + 0.5) / 0.5
    out["charge_b"] = abs(z1 * o1.c1b + z2 * o1.c2b + 0.5) / 0.5
    lhs, rhs = s.A1 * o2.phi_a + s.A2, s.B1 * o2.phi_b + s.B2
    out["flux_match"] = abs(lhs - rhs) / max(abs(lhs), abs(s.A1 * o2.phi_a), abs(s.A2), 1e-300)
    total = (o1.phi_b - o1.phi_a) / mom.H1
    out["flux_sum"] = abs(o2.J1 + o2.J2 - total) / max(abs(total), abs(o2.J1), 1e-300)
    J12l, J22l = ex.segment_fluxes(ions, draw.bath, mom, sol.order0, o1, o2)
    out["segment_J12"] = _rel(J12l, o2.J1)
    out["segment_J22"] = _rel(J22l, o2.J2)
    return out


def check_identities(n: int = 100, seed: int = 5) -> CheckResult:
    def body():
        rng = np.random.default_rng(seed)
        worst = {}
        used = 0
        while used < n:
            d = random_draw(rng)
            try:
                errs = identity_errors(d)
            except DegenerateInput:
                continue
            used += 1
            for k, v in errs.items():
                worst[k] = max(worst.get(k, 0.0), v)
        ok = all(v < 1e-9 for v in worst.values())
        return ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()), worst
    return _timed("algebraic identities", 10.0, body)


def _sample_points(lo: float, hi: float, avoid, rng, count: int = 3) -> list[float]:
    pts = []
    while len(pts) < count:
        v = float(rng.uniform(lo, hi))
        if all(abs(v - a) > 1e-3 * max(1.0, abs(a)) for a in avoid):
            pts.append(v)
    return pts


def critical_draw(rng):
    """Random configuration with B away from 1 and moderate critical voltages."""
    while True:
        d = random_draw(rng)
        mom = moments(d.geometry)
        try:
            cv = an.critical_voltages(d.bath, mom, d.ions)
        except DegenerateInput:
            continue
        if max(abs(cv.Vq1), abs(cv.Vq2)) < 500.0 and cv.case_tag in ("i", "ii"):
            return d, mom, cv


def check_sign_table(n: int = 100, seed: int = 6) -> CheckResult:
    def body():
        rng = np.random.default_rng(seed)
        mismatches, worst_root, bad_count = 0, 0.0, 0
        cases = {"i": 0, "ii": 0}
        for _ in range(n):
            d, mom, cv = critical_draw(rng)
            cases[cv.case_tag] += 1
            lnLR = math.log(d.bath.L / d.bath.R)
            avoid = [cv.Vq1, cv.Vq2, -lnLR / d.ions.z1, -lnLR / d.ions.z2]
            lo, hi = sorted((cv.Vq1, cv.Vq2))
            span = hi - lo
            pts = (_sample_points(lo - span, lo, avoid, rng) + _sample_points(lo, hi, avoid, rng)
                   + _sample_points(hi, hi + span, avoid, rng))
            for V in pts:
                c = an.classify_point(d.ions, BathState(V, d.bath.L, d.bath.R), mom)
                if (c.s1, c.s2) != an.expected_signs(cv, V):
                    mismatches += 1

            def product(k):
                def f(V):
                    s = ex.expand(d.ions, BathState(V, d.bath.L, d.bath.R), mom, order=1)
                    return s.order0.J1 * s.order1.J1 if k == 1 else s.order0.J2 * s.order1.J2
                return f

            for k, target in ((1, cv.Vq1), (2, cv.Vq2)):
                roots = an.scan_roots(product(k), lo - span, hi + span)
                if len(roots) != 1:
                    bad_count += 1
                    continue
                # 1e-6 absolute or 1e-8 relative, whichever is looser
                tol = max(1e-6, 1e-8 * abs(target))
                worst_root = max(worst_root, abs(roots[0] - target) / tol)
        ok = mismatches == 0 and bad_count == 0 and worst_root < 1.0
        return ok, (f"{mismatches} sign mismatches, {bad_count} scans without a single root, "
                    f"worst root error {worst_root:.1e} of tolerance, cases {cases}"), \
            {"mismatches": mismatches, "bad_scans": bad_count, "root_error": worst_root}
    return _timed("sign table and root scan", 60.0, body)


def grid_boundary_report(grid: an.SweepGrid, ions: IonPair, geometry: ChannelGeometry) -> dict:
    """Colors present and the largest distance (in cells) between a sign change
    of s1/s2 along V and the analytic critical voltage of that row."""
    Vs = grid.axis2.values()
    dV = Vs[1] - Vs[0]
    nV = len(Vs)
    mom = moments(geometry)
    colors = set()
    worst = 0.0
    missing = 0
    for r in range(grid.axis1.steps):
        row = grid.cells[r * nV:(r + 1) * nV]
        if row[0].excluded:
            colors.add("excluded")
            continue
        colors.update(c.classification.color for c in row)
        cv = an.critical_voltages(grid.bath(row[0].axis1, 0.0), mom, ions)
        for attr, vq in (("s1", cv.Vq1), ("s2", cv.Vq2)):
            signs = [getattr(c.classification, attr) for c in row]
            changes = [j for j in range(nV - 1) if signs[j] * signs[j + 1] < 0
                       or (signs[j] == 0) != (signs[j + 1] == 0)]
            for j in changes:
                # distance from vq to the cell pair [V_j, V_j+1], in cells
                dist = max(0.0, Vs[j] - vq, vq - Vs[j + 1]) / dV
                worst = max(worst, dist)
            if Vs[0] + dV < vq < Vs[-1] - dV and not changes:
                missing += 1
    return {"colors": sorted(colors), "worst_cells": worst, "missing": missing}


def figure_grid(vary: str, steps: int = 200, vsteps: int = 200) -> an.SweepGrid:
    return an.SweepGrid(an.Axis(vary, 0.05, 2.0, steps), an.Axis("V", -10.0, 10.0, vsteps), fixed=1.0)


def check_figure_grids(steps: int = 200) -> CheckResult:
    def body():
        reports = {}
        ok = True
        for vary in ("L", "R"):
            grid = an.classify_grid(figure_grid(vary, steps, steps), REFERENCE.ions, REFERENCE.geometry)
            rep = grid_boundary_report(grid, REFERENCE.ions, REFERENCE.geometry)
            reports[vary] = rep
            hues = [c for c in rep["colors"] if c in an.COLORS]
            extra = set(rep["colors"]) - set(an.COLORS) - {"boundary", "excluded"}
            ok &= len(hues) == 3 and not extra and rep["worst_cells"] <= 1.0 and rep["missing"] == 0
        detail = "; ".join(f"vary {k}: colors {v['colors']}, boundary offset {v['worst_cells']:.2f} cells, "
                           f"{v['missing']} missed" for k, v in reports.items())
        return ok, detail, reports
    return _timed("figure grids", 60.0, body)


def check_mirror_symmetry(n: int = 20, seed: int = 8) -> CheckResult:
    def body():
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(n):
            d = random_draw(rng)
            m1 = moments(d.geometry)
            m2 = moments(d.geometry.mirrored())
            for q in (0.0, 1e-2):
                s1 = continuation_solve(q, d.ions, d.bath, m1, tol=SOLVE_TOL).state
                s2 = continuation_solve(q, d.ions, d.bath.swapped(), m2, tol=SOLVE_TOL).state
                worst = max(worst, abs(s1.J1 + s2.J1) / abs(s1.J1), abs(s1.J2 + s2.J2) / abs(s1.J2))
        return worst < 1e-9, f"max rel asymmetry {worst:.1e}", {"rel": worst}
    return _timed("mirror symmetry", 30.0, body)


SUITES = {
    "convergence": (check_zeroth_order, check_first_order_oracle, check_second_order_oracle,
                    check_convergence_order),
    "consistency": (check_identities,),
    "theorem41": (check_sign_table, check_figure_grids),
    "symmetry": (check_mirror_symmetry,),
}


def run_suite(name: str) -> list[CheckResult]:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return [check() for check in SUITES[name]]


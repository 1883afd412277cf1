"""Command-line front end.

    ionflux expand --L 0.5 --R 1 --V 1 --format json
    ionflux solve --q0 0.01
    ionflux iv --vrange -5:5 --vsteps 101 --mode solver --q0 0.05
    ionflux heatmap --vary L --range 0.05:2 --steps 200 --vrange -10:10 --vsteps 200
    ionflux signs --L 0.5 --R 1 --vrange -30:30
    ionflux verify consistency

Exit codes: 0 success, 1 failed verification, 2 invalid configuration,
3 degenerate input, 4 no convergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np

from . import analysis as an
from . import checks
from . import expansion as ex
from .errors import DegenerateGeometryB, DegenerateInput, InvalidConfig, IonFluxError, NoConvergence
from .model import BathState, ChannelGeometry, IonPair, Profile, moments
from .solver import MAX_ITER, SolveReport, continuation_solve, solve

log = logging.getLogger("ionflux")

EXIT_OK, EXIT_VERIFY, EXIT_INVALID, EXIT_DEGENERATE, EXIT_NOCONV = 0, 1, 2, 3, 4
COMMANDS = ("expand", "solve", "iv", "heatmap", "signs", "verify")


@dataclass
class RunConfig:
    command: str = "expand"
    z1: float = 1.0
    z2: float = -1.0
    D1: float = 1.0
    D2: float = 1.0
    V: float = 1.0
    L: float = 0.5
    R: float = 1.0
    a: float = 1.0 / 3.0
    b: float = 2.0 / 3.0
    geometry: str = "uniform"
    q0: Optional[float] = None
    order: int = 2
    mode: str = "order2"
    vary: str = "L"
    range: str = "0.05:2"
    steps: int = 200
    vrange: str = "-10:10"
    vsteps: int = 200
    cont_steps: Optional[int] = None
    max_iter: int = MAX_ITER
    suite: Optional[str] = None
    out: Optional[str] = None
    format: str = "csv"

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    # built objects, validated on construction

    def ions(self) -> IonPair:
        return IonPair(z1=self.z1, z2=self.z2, D1=self.D1, D2=self.D2)

    def bath(self, V: Optional[float] = None) -> BathState:
        return BathState(V=self.V if V is None else V, L=self.L, R=self.R)

    def channel(self, allow_zero_width: bool = False) -> ChannelGeometry:
        if self.geometry == "uniform":
            profile = Profile.uniform()
        elif self.geometry.startswith("file:"):
            path = self.geometry[len("file:"):]
            try:
                profile = Profile.from_csv(path)
            except OSError as exc:
                raise InvalidConfig(f"cannot read profile file {path!r}: {exc}") from exc
        else:
            raise InvalidConfig(f"geometry must be 'uniform' or 'file:PATH', got {self.geometry!r}")
        return ChannelGeometry(a=self.a, b=self.b, profile=profile, allow_zero_width=allow_zero_width)

    def q(self) -> float:
        return an.DEFAULT_Q0 if self.q0 is None else self.q0

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise InvalidConfig(f"unknown command {self.command!r}")
        if self.format not in ("csv", "json"):
            raise InvalidConfig(f"format must be csv or json, got {self.format!r}")
        if self.order not in (0, 1, 2):
            raise InvalidConfig(f"order must be 0, 1 or 2, got {self.order}")
        if self.mode not in an.IV_MODES:
            raise InvalidConfig(f"mode must be one of {an.IV_MODES}, got {self.mode!r}")
        if self.vary not in ("L", "R"):
            raise InvalidConfig(f"vary must be L or R, got {self.vary!r}")
        if self.steps < 1 or self.vsteps < 1:
            raise InvalidConfig("grid step counts must be at least 1")
        if self.max_iter < 1:
            raise InvalidConfig("max_iter must be at least 1")
        if self.cont_steps is not None and self.cont_steps < 1:
            raise InvalidConfig("continuation steps must be at least 1")
        lo, hi = parse_range(self.range)
        if self.command == "heatmap" and lo <= 0:
            raise InvalidConfig(f"concentration range must be positive, got {self.range}")
        parse_range(self.vrange)
        if self.q0 is not None and not math.isfinite(self.q0):
            raise InvalidConfig("q0 must be finite")
        self.ions()
        self.bath()
        self.channel(allow_zero_width=self.command == "expand")


def parse_range(text: str) -> tuple[float, float]:
    try:
        lo_s, hi_s = text.split(":")
        lo, hi = float(lo_s), float(hi_s)
    except ValueError:
        raise InvalidConfig(f"range must look like MIN:MAX, got {text!r}") from None
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
        raise InvalidConfig(f"range needs finite MIN <= MAX, got {text!r}")
    return lo, hi


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x) + 0.0, ".17g")
    if x is None:
        return ""
    return str(x)


def _clean(x):
    if isinstance(x, (float, np.floating)):
        x = float(x) + 0.0
        return x if math.isfinite(x) else None
    return x


class Emitter:
    """Collects output and writes it once, to ``--out`` or stdout."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg

    def write(self, text: str) -> None:
        if self.cfg.out:
            with open(self.cfg.out, "w", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)

    def table(self, header: list[str], rows: list[list]) -> None:
        if self.cfg.format == "json":
            self.write(json.dumps([{k: _clean(v) for k, v in zip(header, r)} for r in rows], indent=1) + "\n")
            return
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])
        self.write(buf.getvalue())

    def mapping(self, data: dict) -> None:
        if self.cfg.format == "json":
            self.write(json.dumps({k: _clean(v) for k, v in data.items()}, indent=1) + "\n")
        else:
            self.table(["name", "value"], [[k, v] for k, v in data.items()])


def cmd_expand(cfg: RunConfig) -> int:
    ions, bath = cfg.ions(), cfg.bath()
    geom = cfg.channel(allow_zero_width=True)
    mom = moments(geom)
    sol = ex.expand(ions, bath, mom, order=cfg.order)
    out: dict = {"H1": mom.H1, "alpha": mom.alpha, "beta": mom.beta}
    for k, o in enumerate(sol.orders()):
        out.update(o.as_dict(k))
    for k, I in enumerate(ex.current_series(ions, sol.orders())):
        out[f"I{k}"] = I
    if sol.shape is not None:
        out.update(A=sol.shape.A, B=sol.shape.B, AB=sol.shape.AB, **{"lambda": sol.shape.lam})
        if sol.shape.degenerate:
            out["note"] = "alpha == beta: A = 0, B undefined, first-order fluxes vanish"
        else:
            try:
                cv = an.critical_voltages(bath, mom, ions)
                out.update(Vq1=cv.Vq1, Vq2=cv.Vq2, case=cv.case_tag)
            except DegenerateInput as exc:
                out["note"] = str(exc)
    if sol.second_system is not None:
        s = sol.second_system
        out.update(A1=s.A1, A2=s.A2, A3=s.A3, B1=s.B1, B2=s.B2, B3=s.B3, C=s.C)
    if cfg.q0 is not None:
        pred = ex.evaluate_expansion(sol, cfg.q0, order=sol.max_order)
        out["Q0"] = cfg.q0
        out.update({f"pred_{k}": v for k, v in asdict(pred).items()})
        out["pred_I"] = ions.z1 * ions.D1 * pred.J1 + ions.z2 * ions.D2 * pred.J2
    Emitter(cfg).mapping(out)
    return EXIT_OK


def _solve_report(cfg: RunConfig, ions, bath, mom) -> SolveReport:
    Q0 = cfg.q0 if cfg.q0 is not None else 0.0
    if cfg.max_iter == MAX_ITER:
        return continuation_solve(Q0, ions, bath, mom, steps=cfg.cont_steps)
    init = ex.state_from_solution(ex.expand(ions, bath, mom, order=0), 0.0, order=0)
    return solve(Q0, init, ions, bath, mom, max_iter=cfg.max_iter)


def cmd_solve(cfg: RunConfig) -> int:
    ions, bath, geom = cfg.ions(), cfg.bath(), cfg.channel()
    mom = moments(geom)
    try:
        rep = _solve_report(cfg, ions, bath, mom)
    except NoConvergence as exc:
        log.error("no convergence: %s", exc)
        out = {"status": "no_convergence", "residual_norm": exc.residual_norm}
        if exc.best_state is not None:
            out.update(asdict(exc.best_state))
        Emitter(cfg).mapping(out)
        return EXIT_NOCONV
    out = {"status": "converged", **asdict(rep.state), "residual_norm": rep.residual_norm,
           "iterations": rep.iterations, "continuation_steps": rep.continuation_steps}
    Emitter(cfg).mapping(out)
    return EXIT_OK


def _grid(text: str, steps: int) -> np.ndarray:
    lo, hi = parse_range(text)
    return an.Axis("V", lo, hi, steps).values()


def cmd_iv(cfg: RunConfig) -> int:
    ions, geom = cfg.ions(), cfg.channel()
    cfg.bath()
    rows = an.iv_curve(ions, cfg.L, cfg.R, _grid(cfg.vrange, cfg.vsteps), moments(geom), cfg.q(),
                       mode=cfg.mode, continuation_steps=cfg.cont_steps)
    failed = [r for r in rows if r.status != "ok"]
    for r in failed:
        log.warning("V=%g: %s", r.V, r.status)
    Emitter(cfg).table(["V", "J1", "J2", "I", "mode", "Q0"], [[r.V, r.J1, r.J2, r.I, r.mode, r.Q0] for r in rows])
    return EXIT_OK


def cmd_heatmap(cfg: RunConfig) -> int:
    ions, geom = cfg.ions(), cfg.channel()
    lo, hi = parse_range(cfg.range)
    vlo, vhi = parse_range(cfg.vrange)
    fixed = cfg.R if cfg.vary == "L" else cfg.L
    grid = an.SweepGrid(an.Axis(cfg.vary, lo, hi, cfg.steps), an.Axis("V", vlo, vhi, cfg.vsteps),
                        fixed=fixed, Q0=cfg.q(), include_second=cfg.order == 2)
    an.classify_grid(grid, ions, geom)
    rows = []
    for cell in grid.cells:
        c = cell.classification
        if c is None:
            rows.append([cell.axis1, cell.V, None, None, "excluded", None, None, True])
        else:
            rows.append([cell.axis1, cell.V, c.s1, c.s2, c.color, c.q1, c.q2, False])
    Emitter(cfg).table(["axis1", "axis2", "s1", "s2", "color", "q1", "q2", "excluded"], rows)
    return EXIT_OK


def cmd_signs(cfg: RunConfig) -> int:
    ions, bath, geom = cfg.ions(), cfg.bath(), cfg.channel()
    mom = moments(geom)
    try:
        cv = an.critical_voltages(bath, mom, ions)
        log.info("Vq1=%.17g Vq2=%.17g case %s", cv.Vq1, cv.Vq2, cv.case_tag)
    except DegenerateInput as exc:
        if isinstance(exc, DegenerateGeometryB):
            raise
        log.warning("%s", exc)
    Vs = _grid(cfg.vrange, cfg.vsteps)
    cls = an.sign_products(bath, mom, ions, Vs, Q0=cfg.q(), include_second=cfg.order == 2)
    rows = []
    for V, c in zip(Vs, cls):
        if c is None:
            rows.append([V, None, None, "excluded", None, None])
        else:
            rows.append([V, c.s1, c.s2, c.color, c.q1, c.q2])
    Emitter(cfg).table(["V", "s1", "s2", "color", "q1", "q2"], rows)
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    suite = cfg.suite or "consistency"
    if suite not in checks.SUITES:
        raise InvalidConfig(f"suite must be one of {sorted(checks.SUITES)}, got {suite!r}")
    results = checks.run_suite(suite)
    for r in results:
        print(r.line(), file=sys.stderr)
    passed = all(r.passed for r in results)
    report = {"suite": suite, "passed": passed, "checks": [r.to_dict() for r in results]}
    Emitter(cfg).write(json.dumps(report, indent=1, default=float) + "\n")
    return EXIT_OK if passed else EXIT_VERIFY


HANDLERS = {"expand": cmd_expand, "solve": cmd_solve, "iv": cmd_iv, "heatmap": cmd_heatmap,
            "signs": cmd_signs, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    # every flag defaults to None so that config-file values are only overridden when given
    common.add_argument("--config", help="JSON config, e.g. written by --dump-config")
    for name in ("z1", "z2", "D1", "D2", "V", "L", "R", "a", "b"):
        common.add_argument(f"--{name}", type=float)
    common.add_argument("--geometry", help="uniform or file:PATH (CSV with header x,h)")
    common.add_argument("--q0", type=float, help="permanent charge")
    common.add_argument("--order", type=int, choices=(0, 1, 2))
    common.add_argument("--mode", choices=an.IV_MODES)
    common.add_argument("--vary", choices=("L", "R"))
    common.add_argument("--range", help="MIN:MAX for the varied concentration")
    common.add_argument("--steps", type=int)
    common.add_argument("--vrange", help="MIN:MAX voltage range")
    common.add_argument("--vsteps", type=int)
    common.add_argument("--cont-steps", dest="cont_steps", type=int, help="continuation steps (solve, iv)")
    common.add_argument("--max-iter", dest="max_iter", type=int,
                        help="Newton iteration cap; a non-default value solves directly without continuation")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--dump-config", action="store_true", help="print the resolved config as JSON and exit")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="ionflux", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "verify":
            sp.add_argument("suite", nargs="?", choices=sorted(checks.SUITES))
    return p


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    data: dict = {}
    if ns.config:
        try:
            with open(ns.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidConfig(f"cannot load config {ns.config!r}: {exc}") from exc
    data["command"] = ns.command
    for f in fields(RunConfig):
        val = getattr(ns, f.name, None)
        if val is not None and f.name != "command":
            data[f.name] = val
    return RunConfig.from_dict(data)


RANGE_FLAGS = ("--range", "--vrange")


def _join_ranges(argv: list[str]) -> list[str]:
    """Rewrite ``--vrange -10:10`` as ``--vrange=-10:10`` so argparse does not
    read the negative bound as an option."""
    out, i = [], 0
    while i < len(argv):
        if argv[i] in RANGE_FLAGS and i + 1 < len(argv):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    ns = build_parser().parse_args(_join_ranges(argv))
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(ns)
        cfg.validate()
        if ns.dump_config:
            sys.stdout.write(json.dumps(asdict(cfg), indent=1) + "\n")
            return EXIT_OK
        return HANDLERS[cfg.command](cfg)
    except InvalidConfig as exc:
        log.error("invalid configuration: %s", exc)
        return EXIT_INVALID
    except DegenerateInput as exc:
        log.error("degenerate input (%s): %s", type(exc).__name__, exc)
        return EXIT_DEGENERATE
    except NoConvergence as exc:
        log.error("no convergence: %s", exc)
        return EXIT_NOCONV
    except IonFluxError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())

"""Physical configuration of the two-ion channel and its geometry functionals.

The channel occupies [0, 1] in dimensionless units.  Its cross-section
``h(x)`` enters the singular limit only through the cumulative resistance
``H(x) = int_0^x ds / h(s)`` evaluated at the junctions ``a`` and ``b`` and
at the right end.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import InvalidConfig, NonPositiveProfile, OutOfDomain

QUAD_TOL = 1e-12
MIN_WIDTH = 1e-9


@dataclass(frozen=True)
class IonPair:
    z1: float = 1.0
    z2: float = -1.0
    D1: float = 1.0
    D2: float = 1.0

    def __post_init__(self):
        if not (self.z1 > 0 > self.z2):
            raise InvalidConfig(f"valences must satisfy z1 > 0 > z2, got z1={self.z1}, z2={self.z2}")
        if not (self.D1 > 0 and self.D2 > 0):
            raise InvalidConfig(f"diffusion coefficients must be positive, got D1={self.D1}, D2={self.D2}")


@dataclass(frozen=True)
class BathState:
    """Voltage and electroneutral bath concentrations.

    ``L`` and ``R`` are the charge concentrations ``z1*c1 = -z2*c2`` in the
    left and right baths; the potential is ``V`` on the left and 0 on the right.
    """

    V: float
    L: float
    R: float

    def __post_init__(self):
        if not (self.L > 0 and self.R > 0):
            raise InvalidConfig(f"bath concentrations must be positive, got L={self.L}, R={self.R}")

    def c1L(self, ions: IonPair) -> float:
        return self.L / ions.z1

    def c2L(self, ions: IonPair) -> float:
        return -self.L / ions.z2

    def c1R(self, ions: IonPair) -> float:
        return self.R / ions.z1

    def c2R(self, ions: IonPair) -> float:
        return -self.R / ions.z2

    def swapped(self) -> "BathState":
        """Mirror image: baths exchanged, voltage negated."""
        return BathState(V=-self.V, L=self.R, R=self.L)


@dataclass(frozen=True)
class Profile:
    """Cross-section area h on [0, 1].

    Exactly one representation is used: ``kind == "uniform"`` (h = 1),
    ``"function"`` (a callable, integrated adaptively) or ``"table"``
    (knots ``xs``/``hs``, integrated by the trapezoid rule on the knots).
    """

    kind: str = "uniform"
    func: Optional[Callable[[float], float]] = field(default=None, compare=False)
    xs: Optional[tuple] = None
    hs: Optional[tuple] = None

    @classmethod
    def uniform(cls) -> "Profile":
        return cls("uniform")

    @classmethod
    def from_function(cls, func: Callable[[float], float]) -> "Profile":
        probe = np.linspace(0.0, 1.0, 257)
        if min(func(float(x)) for x in probe) <= 0:
            raise NonPositiveProfile("profile h must be strictly positive on [0, 1]")
        return cls("function", func=func)

    @classmethod
    def from_table(cls, xs, hs) -> "Profile":
        xs = tuple(float(x) for x in xs)
        hs = tuple(float(h) for h in hs)
        if len(xs) != len(hs) or len(xs) < 2:
            raise InvalidConfig("tabulated profile needs at least two (x, h) rows")
        if xs[0] != 0.0 or xs[-1] != 1.0:
            raise InvalidConfig("tabulated profile must start at x=0 and end at x=1")
        if any(x1 >= x2 for x1, x2 in zip(xs, xs[1:])):
            raise InvalidConfig("tabulated x values must be strictly increasing")
        if any(h <= 0 or not math.isfinite(h) for h in hs):
            raise NonPositiveProfile("tabulated h values must be strictly positive")
        return cls("table", xs=xs, hs=hs)

    @classmethod
    def from_csv(cls, path) -> "Profile":
        with open(Path(path), newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["x", "h"]:
                raise InvalidConfig(f"{path}: expected header 'x,h'")
            rows = [(float(r["x"]), float(r["h"])) for r in reader]
        if not rows:
            raise InvalidConfig(f"{path}: no profile rows")
        xs, hs = zip(*rows)
        return cls.from_table(xs, hs)

    def scaled(self, c: float) -> "Profile":
        if self.kind == "table":
            return Profile.from_table(self.xs, [c * h for h in self.hs])
        f = self.func if self.kind == "function" else (lambda x: 1.0)
        return Profile("function", func=lambda x: c * f(x))

    def mirrored(self) -> "Profile":
        if self.kind == "uniform":
            return self
        if self.kind == "table":
            return Profile.from_table([1.0 - x for x in reversed(self.xs)], list(reversed(self.hs)))
        f = self.func
        return Profile("function", func=lambda x: f(1.0 - x))

    def __call__(self, x: float) -> float:
        if self.kind == "uniform":
            return 1.0
        if self.kind == "function":
            return float(self.func(x))
        return float(np.interp(x, self.xs, self.hs))


@dataclass(frozen=True)
class ChannelGeometry:
    a: float = 1.0 / 3.0
    b: float = 2.0 / 3.0
    profile: Profile = field(default_factory=Profile.uniform)
    allow_zero_width: bool = False

    def __post_init__(self):
        if not (0.0 < self.a <= self.b < 1.0):
            raise InvalidConfig(f"junctions must satisfy 0 < a < b < 1, got a={self.a}, b={self.b}")
        if not self.allow_zero_width and self.b - self.a < MIN_WIDTH:
            raise InvalidConfig(f"charged segment too narrow: b - a = {self.b - self.a:g} < {MIN_WIDTH:g}")

    def mirrored(self) -> "ChannelGeometry":
        """Geometry seen from the right bath: h(1-x), a -> 1-b, b -> 1-a."""
        return ChannelGeometry(a=1.0 - self.b, b=1.0 - self.a, profile=self.profile.mirrored(),
                               allow_zero_width=self.allow_zero_width)


@dataclass(frozen=True)
class GeometryMoments:
    H1: float
    alpha: float
    beta: float

    @property
    def Ha(self) -> float:
        return self.alpha * self.H1

    @property
    def Hb(self) -> float:
        return self.beta * self.H1


def _table_cumulative(profile: Profile) -> np.ndarray:
    xs = np.asarray(profile.xs)
    inv = 1.0 / np.asarray(profile.hs)
    return np.concatenate([[0.0], np.cumsum(0.5 * (inv[1:] + inv[:-1]) * np.diff(xs))])


def cumulative_resistance(geometry: ChannelGeometry | Profile, x: float) -> float:
    """H(x) = int_0^x ds / h(s)."""
    profile = geometry.profile if isinstance(geometry, ChannelGeometry) else geometry
    if not (0.0 <= x <= 1.0):
        raise OutOfDomain(f"x={x} outside [0, 1]")
    if x == 0.0:
        return 0.0
    if profile.kind == "uniform":
        return float(x)
    if profile.kind == "table":
        # trapezoid sums on the knots, linear in between
        return float(np.interp(x, profile.xs, _table_cumulative(profile)))
    value, _ = integrate.quad(lambda s: 1.0 / profile.func(s), 0.0, x,
                              epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=200)
    return float(value)


def moments(geometry: ChannelGeometry) -> GeometryMoments:
    H1 = cumulative_resistance(geometry, 1.0)
    alpha = cumulative_resistance(geometry, geometry.a) / H1
    beta = cumulative_resistance(geometry, geometry.b) / H1
    return GeometryMoments(H1=H1, alpha=alpha, beta=beta)

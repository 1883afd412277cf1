"""Closed-form coefficients of the small permanent-charge expansion.

Every unknown u of the governing system is written as
``u = u0 + u1*Q0 + u2*Q0**2 + O(Q0**3)``.  The functions below return the
coefficients order by order; each later order consumes the earlier ones.

Notation used in the code:

* ``cL, cR`` are the species-1 bath concentrations ``L/z1`` and ``R/z1``.
* ``lnLR`` is ``ln L - ln R``; every formula divides by it.
* ``Pa, Pb`` are ``z1 (z1 - z2) c10^a`` and ``z1 (z1 - z2) c10^b``.

The formulas are written term by term as they are usually displayed,
without algebraic simplification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Optional

from scipy.special import exprel

from .errors import (DegenerateBoundary, DegenerateGeometryB, NegativePredictedConcentration,
                     SingularSecondOrderSystem)
from .model import BathState, GeometryMoments, IonPair

LOG_RATIO_MIN = 1e-10
SINGULAR_MIN = 1e-12


@dataclass(frozen=True)
class OrderCoefficients:
    """Order-k coefficients of the junction unknowns and fluxes."""

    phi_a: float
    phi_b: float
    c1a: float
    c2a: float
    c1b: float
    c2b: float
    y: float
    J1: float
    J2: float

    def as_dict(self, k: int) -> dict:
        return {
            f"phi{k}_a": self.phi_a, f"phi{k}_b": self.phi_b,
            f"c1{k}_a": self.c1a, f"c2{k}_a": self.c2a,
            f"c1{k}_b": self.c1b, f"c2{k}_b": self.c2b,
            f"y{k}": self.y, f"J1{k}": self.J1, f"J2{k}": self.J2,
        }


@dataclass(frozen=True)
class LayerCoefficients:
    """Order-k coefficients of the layer values and the flux sums I_k, T_k."""

    phi_am: float
    phi_bm: float
    phi_al: float
    phi_br: float
    c1_al: float
    c2_al: float
    c1_br: float
    c2_br: float
    c1_am: float
    c1_bm: float
    I: float
    T: float


@dataclass(frozen=True)
class IntermediateCoefficients:
    order0: LayerCoefficients
    order1: LayerCoefficients
    order2: Optional[LayerCoefficients] = None
    K1: float = math.nan
    K2: float = math.nan


@dataclass(frozen=True)
class FirstOrderShape:
    A: float
    B: float  # nan when A == 0
    lam: float
    AB: float  # the product A*B = ln(((1-beta)L + beta R)/((1-alpha)L + alpha R))

    @property
    def degenerate(self) -> bool:
        return self.A == 0.0

    def require_B(self) -> float:
        if self.degenerate:
            raise DegenerateGeometryB("alpha == beta: A vanishes and B is undefined")
        return self.B


@dataclass(frozen=True)
class SecondOrderRelations:
    """Order-2 layer relations expressed against the order-2 unknowns.

    ``charge_*`` is z1 c12 + z2 c22, ``gap_*`` is phi2 - phi2^m; the
    ``*_offset`` entries are the amounts added to the junction value to
    obtain the corresponding layer value.
    """

    charge_a: float
    charge_b: float
    gap_a: float
    gap_b: float
    phi_al_offset: float
    phi_br_offset: float
    c1_al_offset: float
    c2_al_offset: float
    c1_br_offset: float
    c2_br_offset: float
    c1_am_offset: float
    c1_bm_offset: float

    def layer(self, o2: OrderCoefficients, ions: IonPair) -> LayerCoefficients:
        z1, z2 = ions.z1, ions.z2
        return LayerCoefficients(
            phi_am=o2.phi_a - self.gap_a,
            phi_bm=o2.phi_b - self.gap_b,
            phi_al=o2.phi_a + self.phi_al_offset,
            phi_br=o2.phi_b + self.phi_br_offset,
            c1_al=z2 * (o2.c1a + o2.c2a) / (z2 - z1) + self.c1_al_offset,
            c2_al=z1 * (o2.c1a + o2.c2a) / (z1 - z2) + self.c2_al_offset,
            c1_br=z2 * (o2.c1b + o2.c2b) / (z2 - z1) + self.c1_br_offset,
            c2_br=z1 * (o2.c1b + o2.c2b) / (z1 - z2) + self.c2_br_offset,
            c1_am=o2.c1a + self.c1_am_offset,
            c1_bm=o2.c1b + self.c1_bm_offset,
            I=z1 * o2.J1 + z2 * o2.J2,
            T=o2.J1 + o2.J2,
        )


@dataclass(frozen=True)
class SecondOrderPotentialSystem:
    A1: float
    A2: float
    A3: float
    B1: float
    B2: float
    B3: float
    C: float


@dataclass(frozen=True)
class ExpansionSolution:
    ions: IonPair
    bath: BathState
    moments: GeometryMoments
    order0: OrderCoefficients
    order1: Optional[OrderCoefficients] = None
    order2: Optional[OrderCoefficients] = None
    intermediates: Optional[IntermediateCoefficients] = None
    shape: Optional[FirstOrderShape] = None
    relations: Optional[SecondOrderRelations] = None
    second_system: Optional[SecondOrderPotentialSystem] = None

    @property
    def max_order(self) -> int:
        return 2 if self.order2 is not None else (1 if self.order1 is not None else 0)

    def orders(self) -> list[OrderCoefficients]:
        return [o for o in (self.order0, self.order1, self.order2) if o is not None]


def _log_ratio(bath: BathState) -> float:
    lnLR = math.log(bath.L) - math.log(bath.R)
    if abs(lnLR) < LOG_RATIO_MIN:
        raise DegenerateBoundary(f"|ln L - ln R| = {abs(lnLR):.3g} < {LOG_RATIO_MIN:g}; L and R too close")
    return lnLR


def zeroth_order(ions: IonPair, bath: BathState, moments: GeometryMoments) -> OrderCoefficients:
    z1, z2 = ions.z1, ions.z2
    L, R, V = bath.L, bath.R, bath.V
    al, be, H1 = moments.alpha, moments.beta, moments.H1
    lnLR = _log_ratio(bath)
    ma = (1 - al) * L + al * R
    mb = (1 - be) * L + be * R
    c1a, c1b = ma / z1, mb / z1
    return OrderCoefficients(
        phi_a=(math.log(ma) - math.log(R)) / lnLR * V,
        phi_b=(math.log(mb) - math.log(R)) / lnLR * V,
        c1a=c1a,
        c2a=-z1 * c1a / z2,
        c1b=c1b,
        c2b=-z1 * c1b / z2,
        y=H1 / ((z1 - z2) * (L - R)) * math.log(ma / mb),
        J1=(L - R) / (z1 * H1 * lnLR) * (z1 * V + lnLR),
        J2=-(L - R) / (z2 * H1 * lnLR) * (z2 * V + lnLR),
    )


def zeroth_layer(ions: IonPair, o0: OrderCoefficients) -> LayerCoefficients:
    """At zeroth order every layer value collapses onto its junction value."""
    return LayerCoefficients(
        phi_am=o0.phi_a, phi_bm=o0.phi_b, phi_al=o0.phi_a, phi_br=o0.phi_b,
        c1_al=o0.c1a, c2_al=o0.c2a, c1_br=o0.c1b, c2_br=o0.c2b,
        c1_am=o0.c1a, c1_bm=o0.c1b,
        I=ions.z1 * o0.J1 + ions.z2 * o0.J2, T=o0.J1 + o0.J2,
    )


def first_order_shape(bath: BathState, moments: GeometryMoments) -> FirstOrderShape:
    L, R = bath.L, bath.R
    al, be = moments.alpha, moments.beta
    lnLR = _log_ratio(bath)
    ma = (1 - al) * L + al * R
    mb = (1 - be) * L + be * R
    A = -(be - al) * (L - R) ** 2 / (ma * mb * lnLR)
    AB = math.log(mb / ma)
    B = AB / A if A != 0.0 else math.nan
    return FirstOrderShape(A=A, B=B, lam=bath.V / lnLR, AB=AB)


def first_order(ions: IonPair, bath: BathState, moments: GeometryMoments,
                o0: OrderCoefficients) -> tuple[OrderCoefficients, LayerCoefficients]:
    z1, z2 = ions.z1, ions.z2
    V = bath.V
    al, be, H1 = moments.alpha, moments.beta, moments.H1
    lnLR = _log_ratio(bath)
    cL, cR = bath.c1L(ions), bath.c1R(ions)
    dz = z1 - z2
    ca, cb = o0.c1a, o0.c1b
    c2a0, c2b0 = o0.c2a, o0.c2b
    pa, pb = o0.phi_a, o0.phi_b
    T0 = o0.J1 + o0.J2
    shape = first_order_shape(bath, moments)
    lam = shape.lam

    c11a = z2 * al * (pb - pa) / dz - 1 / (2 * dz)
    c21a = z1 * al * (pb - pa) / (z2 - z1) - 1 / (2 * (z2 - z1))
    c11b = z2 * (1 - be) * (pa - pb) / dz - 1 / (2 * dz)
    c21b = z1 * (1 - be) * (pa - pb) / (z2 - z1) - 1 / (2 * (z2 - z1))

    common = (1 + z1 * lam) * (1 + z2 * lam) * (cb - ca) / (z1 * dz * ca * cb * (math.log(cR) - math.log(cL)))
    phi1a = (common * (math.log(cL) - math.log(ca)) + 1 / (2 * z1 * dz * ca)
             + z2 * al * (pb - pa) / (dz * ca) * lam)
    phi1b = (common * (math.log(cR) - math.log(cb)) + 1 / (2 * z1 * dz * cb)
             + z2 * (1 - be) * (pa - pb) / (dz * cb) * lam)

    y1 = (((1 - be) * cL + al * cR) * (pa - pb) / (z1 * dz * T0 * ca * cb)
          + (math.log(ca) - math.log(cb)) * (pa - pb) / (z1 * dz * T0 * (cL - cR))
          - (z2 * o0.J1 + z1 * o0.J2) * (ca - cb) / (z1 ** 2 * z2 * dz * T0 ** 2 * ca * cb))

    # A*(1-B) == A - A*B stays finite (and vanishes) as beta -> alpha
    A, AB = shape.A, shape.AB
    J11 = (z2 * (A - AB) * V + A * lnLR) / (dz * H1 * lnLR ** 2) * (z1 * V + lnLR)
    J21 = (z1 * (A - AB) * V + A * lnLR) / ((z2 - z1) * H1 * lnLR ** 2) * (z2 * V + lnLR)

    o1 = OrderCoefficients(phi_a=phi1a, phi_b=phi1b, c1a=c11a, c2a=c21a, c1b=c11b, c2b=c21b,
                           y=y1, J1=J11, J2=J21)
    layer = LayerCoefficients(
        phi_am=phi1a + 1 / (2 * z1 * dz * ca),
        phi_bm=phi1b + 1 / (2 * z1 * dz * cb),
        phi_al=phi1a - (ca * c21a - c2a0 * c11a) / (dz * ca * c2a0),
        phi_br=phi1b - (cb * c21b - c2b0 * c11b) / (dz * cb * c2b0),
        c1_al=z2 * (c11a + c21a) / (z2 - z1),
        c2_al=z1 * (c11a + c21a) / dz,
        c1_br=z2 * (c11b + c21b) / (z2 - z1),
        c2_br=z1 * (c11b + c21b) / dz,
        c1_am=c11a - 1 / (2 * dz),
        c1_bm=c11b - 1 / (2 * dz),
        I=z1 * J11 + z2 * J21,
        T=J11 + J21,
    )
    return o1, layer


def second_order_intermediates(ions: IonPair, bath: BathState, moments: GeometryMoments,
                               o0: OrderCoefficients, o1: OrderCoefficients) -> SecondOrderRelations:
    _log_ratio(bath)
    z1, z2 = ions.z1, ions.z2
    al, be = moments.alpha, moments.beta
    dz = z1 - z2
    ca, cb = o0.c1a, o0.c1b
    pa, pb = o0.phi_a, o0.phi_b
    Pa, Pb = z1 * dz * ca, z1 * dz * cb
    return SecondOrderRelations(
        charge_a=-(z1 + z2) / (24 * z1 * dz * ca),
        charge_b=-(z1 + z2) / (24 * z1 * dz * cb),
        gap_a=(z1 ** 2 * o1.c1a + z2 ** 2 * o1.c2a) / (2 * Pa ** 2) - (z1 + z2) / (12 * Pa ** 2),
        gap_b=(z1 ** 2 * o1.c1b + z2 ** 2 * o1.c2b) / (2 * Pb ** 2) - (z1 + z2) / (12 * Pb ** 2),
        phi_al_offset=z1 * z2 * al * (pb - pa) / (2 * Pa ** 2) - (z1 + z2) / (6 * Pa ** 2),
        phi_br_offset=z1 * z2 * (1 - be) * (pa - pb) / (2 * Pb ** 2) - (z1 + z2) / (6 * Pb ** 2),
        c1_al_offset=z2 / (8 * z1 * ca * dz ** 2),
        c2_al_offset=-z1 / (8 * z1 * ca * dz ** 2),
        c1_br_offset=z2 / (8 * z1 * cb * dz ** 2),
        c2_br_offset=-z1 / (8 * z1 * cb * dz ** 2),
        c1_am_offset=(z1 - 8 * z2) / (24 * z1 * dz ** 2 * ca),
        c1_bm_offset=(z1 - 8 * z2) / (24 * z1 * dz ** 2 * cb),
    )


def _exprel_slope(s: float) -> float:
    """Derivative of exprel(s) = (e^s - 1)/s."""
    if abs(s) < 0.1:
        total, fact = 0.0, 2.0
        for k in range(1, 16):
            total += k * s ** (k - 1) / fact
            fact *= k + 2
        return total
    return (s * math.exp(s) - math.expm1(s)) / (s * s)


def second_order_concentrations(ions: IonPair, moments: GeometryMoments, o0: OrderCoefficients,
                                o1: OrderCoefficients, layer1: LayerCoefficients,
                                rel: SecondOrderRelations) -> tuple[float, float, float, float, float]:
    """c12^a, c22^a, c12^b, c22^b and y2.

    y2 comes from the second-order term of the middle-segment concentration
    relation c1^{b,m} = e^s c1^{a,m} + Q0 z2 J1 y exprel(s), s = z1 z2 (J1+J2) y,
    with the total second-order flux T2 = (phi1^b - phi1^a)/H(1).
    """
    z1, z2 = ions.z1, ions.z2
    al, be, H1 = moments.alpha, moments.beta, moments.H1
    dz = z1 - z2
    ca, cb = o0.c1a, o0.c1b
    d1 = o1.phi_a - o1.phi_b

    c12a = -(z1 + 4 * z2) / (24 * z1 * dz ** 2 * ca) - d1 * al * z2 / dz
    c22a = (4 * z1 + z2) / (24 * z1 * dz ** 2 * ca) + d1 * al * z1 / dz
    c12b = -(z1 + 4 * z2) / (24 * z1 * dz ** 2 * cb) + d1 * (1 - be) * z2 / dz
    c22b = (4 * z1 + z2) / (24 * z1 * dz ** 2 * cb) - d1 * (1 - be) * z1 / dz

    T0, T1, T2 = o0.J1 + o0.J2, o1.J1 + o1.J2, -d1 / H1
    y0, y1 = o0.y, o1.y
    K1 = T0 * y1 + T1 * y0
    s0, s1 = z1 * z2 * T0 * y0, z1 * z2 * K1
    ratio = ca / cb  # e^{-s0}
    c12am = c12a + rel.c1_am_offset
    c12bm = c12b + rel.c1_bm_offset
    source = z2 * (exprel(s0) * (o1.J1 * y0 + o0.J1 * y1) + o0.J1 * y0 * _exprel_slope(s0) * s1)
    s2 = (c12bm * ratio - c12am - s1 * layer1.c1_am - ratio * source) / ca - s1 ** 2 / 2
    K2 = s2 / (z1 * z2)
    y2 = (K2 - T2 * y0 - T1 * y1) / T0
    return c12a, c22a, c12b, c22b, y2


def second_order_system(ions: IonPair, bath: BathState, moments: GeometryMoments,
                        o0: OrderCoefficients, o1: OrderCoefficients, y2: float) -> SecondOrderPotentialSystem:
    """Coefficients of the linear relations J12 = A1 phi2^a + A2 = B1 phi2^b + B2."""
    z1, z2 = ions.z1, ions.z2
    V = bath.V
    al, be, H1 = moments.alpha, moments.beta, moments.H1
    _log_ratio(bath)
    dz = z1 - z2
    cL, cR = bath.c1L(ions), bath.c1R(ions)
    ca, cb = o0.c1a, o0.c1b
    pa, pb = o0.phi_a, o0.phi_b
    Pa, Pb = z1 * dz * ca, z1 * dz * cb
    d1 = o1.phi_a - o1.phi_b
    I1 = z1 * o1.J1 + z2 * o1.J2
    y1 = o1.y
    sa = o1.c1a + o1.c2a
    sb = o1.c1b + o1.c2b

    lnA = math.log(cL) - math.log(ca)
    dA = cL - ca
    W = V - pa
    lnB = math.log(cb) - math.log(cR)
    dB = cb - cR

    A1 = -z1 * dA / (al * H1 * lnA)
    B1 = z1 * dB / ((1 - be) * H1 * lnB)

    A2 = (z1 * z2 * d1 / (dz * H1) * (1 / z1 + W / lnA - W * dA / (lnA ** 2 * ca))
          - z1 * dA / (al * H1 * lnA) * (z1 * z2 * al * (pb - pa) / (2 * Pa ** 2) - (z1 + z2) / (6 * Pa ** 2))
          - z1 * z2 * (pa - pb) / (H1 * lnA * dz ** 2) * (
              dz * o1.phi_a
              - dz * dA * o1.phi_a / (lnA * ca)
              - 1 / (2 * z1 * ca)
              + dA / (2 * z1 * lnA * ca ** 2)
              + z2 * sa * W * (cL + ca - 2 * dA / lnA) / (2 * lnA * ca ** 2)))

    B2 = (z1 * z2 * d1 / (dz * H1) * (1 / z1 + pb / lnB - pb * dB / (lnB ** 2 * cb))
          + z1 * dB / ((1 - be) * H1 * lnB) * (z1 * z2 * (1 - be) * (pa - pb) / (2 * Pb ** 2)
                                               - (z1 + z2) / (6 * Pb ** 2))
          - z1 * z2 * (pb - pa) / (H1 * lnB * dz ** 2) * (
              dz * o1.phi_b
              - dz * dB * o1.phi_b / (lnB * cb)
              - 1 / (2 * z1 * cb)
              + dB / (2 * z1 * lnB * cb ** 2)
              + z2 * sb * pb * (cR + cb - 2 * dB / lnB) / (2 * lnB * cb ** 2)))

    # potential drop across the middle segment at second order
    rel = second_order_intermediates(ions, bath, moments, o0, o1)
    I0 = z1 * o0.J1 + z2 * o0.J2
    C = rel.gap_b - rel.gap_a - I1 * y1 - I0 * y2

    flux_sum = (o1.phi_b - o1.phi_a) / H1
    return SecondOrderPotentialSystem(A1=A1, A2=A2, A3=-A2 + flux_sum, B1=B1, B2=B2,
                                      B3=-B2 + flux_sum, C=C)


def second_order(ions: IonPair, bath: BathState, moments: GeometryMoments,
                 o0: OrderCoefficients, o1: OrderCoefficients, layer1: LayerCoefficients
                 ) -> tuple[OrderCoefficients, SecondOrderPotentialSystem]:
    z1, z2 = ions.z1, ions.z2
    H1 = moments.H1
    dz = z1 - z2
    y0 = o0.y
    rel = second_order_intermediates(ions, bath, moments, o0, o1)
    c12a, c22a, c12b, c22b, y2 = second_order_concentrations(ions, moments, o0, o1, layer1, rel)
    sys2 = second_order_system(ions, bath, moments, o0, o1, y2)
    A1, A2, B1, B2, C = sys2.A1, sys2.A2, sys2.B1, sys2.B2, sys2.C
    denom = A1 - B1 + dz * y0 * A1 * B1
    if abs(denom) < SINGULAR_MIN:
        raise SingularSecondOrderSystem(f"second-order potential system is singular (det={denom:.3g})")
    dphi1 = (o1.phi_b - o1.phi_a) / H1
    phi2a = (B1 * C - dz * y0 * B1 * A2 - z2 * y0 * B1 * dphi1 + B2 - A2) / denom
    phi2b = (1 - dz * y0 * A1) * phi2a + C - dz * y0 * A2 - z2 * y0 * dphi1
    J12 = A1 * phi2a + A2
    J22 = -A1 * phi2a + sys2.A3
    o2 = OrderCoefficients(phi_a=phi2a, phi_b=phi2b, c1a=c12a, c2a=c22a, c1b=c12b, c2b=c22b,
                           y=y2, J1=J12, J2=J22)
    return o2, sys2


def segment_fluxes(ions: IonPair, bath: BathState, moments: GeometryMoments,
                 o0: OrderCoefficients, o1: OrderCoefficients, o2: OrderCoefficients
                 ) -> tuple[float, float]:
    """J12, J22 from the left-segment flux expansion, before the
    concentration terms are eliminated.  Used as a cross-check of the final
    closed forms."""
    z1, z2 = ions.z1, ions.z2
    V = bath.V
    al, H1 = moments.alpha, moments.H1
    dz = z1 - z2
    cL, c2L = bath.c1L(ions), bath.c2L(ions)
    ca, c2a = o0.c1a, o0.c2a
    pa, pb = o0.phi_a, o0.phi_b
    Pa = z1 * dz * ca
    W = V - pa
    s1 = o1.c1a + o1.c2a
    s2 = o2.c1a + o2.c2a
    aH = al * H1
    ln1 = math.log(cL) - math.log(ca)
    ln2 = math.log(c2L) - math.log(c2a)
    d1 = cL - ca
    d2 = c2L - c2a
    shift = z1 * z2 * al * (pb - pa) / (2 * Pa ** 2) - (z1 + z2) / (6 * Pa ** 2)

    J12 = (z2 * s2 / (dz * aH) * (1 + z1 * W / ln1 - z1 * W * d1 / (ln1 ** 2 * ca))
           - z1 * d1 / (aH * ln1) * (o2.phi_a + shift - z2 * W / (8 * z1 * dz ** 2 * ln1 * ca ** 2))
           - z1 * z2 * s1 / (aH * ln1 * dz) * (
               o1.phi_a - d1 * o1.phi_a / (ln1 * ca) - 1 / (2 * z1 * dz * ca)
               + d1 / (2 * z1 * dz * ln1 * ca ** 2)
               + z2 * s1 * W * (cL + ca - 2 * d1 / ln1) / (2 * dz * ln1 * ca ** 2))
           - z1 * z2 * W / (8 * z1 * dz ** 2 * ca * aH * ln1)
           - z2 / (8 * z1 * ca * dz ** 2 * aH))

    J22 = (-z1 * s2 / (dz * aH) * (1 + z2 * W / ln2 - z2 * W * d2 / (ln2 ** 2 * c2a))
           - z2 * d2 / (aH * ln2) * (o2.phi_a + shift + z1 * W / (8 * z1 * dz ** 2 * ln2 * ca * c2a))
           + z1 * z2 * s1 / (aH * ln2 * dz) * (
               o1.phi_a - d2 * o1.phi_a / (ln2 * c2a) - 1 / (2 * z1 * dz * ca)
               + d2 / (2 * z1 * dz * ln2 * ca * c2a)
               - z1 * s1 * W * (c2L + c2a - 2 * d2 / ln2) / (2 * dz * ln2 * c2a ** 2))
           + z1 * z2 * W / (8 * z1 * dz ** 2 * ca * aH * ln2)
           + z1 / (8 * z1 * ca * dz ** 2 * aH))
    return J12, J22


def expand(ions: IonPair, bath: BathState, moments: GeometryMoments, order: int = 2) -> ExpansionSolution:
    """All coefficients through ``order`` (0, 1 or 2)."""
    if order not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1 or 2, got {order}")
    o0 = zeroth_order(ions, bath, moments)
    if order == 0:
        return ExpansionSolution(ions, bath, moments, o0)
    shape = first_order_shape(bath, moments)
    o1, layer1 = first_order(ions, bath, moments, o0)
    layer0 = zeroth_layer(ions, o0)
    K1 = layer0.T * o1.y + layer1.T * o0.y
    if order == 1:
        inter = IntermediateCoefficients(order0=layer0, order1=layer1, K1=K1)
        return ExpansionSolution(ions, bath, moments, o0, o1, intermediates=inter, shape=shape)
    rel = second_order_intermediates(ions, bath, moments, o0, o1)
    o2, sys2 = second_order(ions, bath, moments, o0, o1, layer1)
    layer2 = rel.layer(o2, ions)
    K2 = layer2.T * o0.y + layer1.T * o1.y + layer0.T * o2.y
    inter = IntermediateCoefficients(order0=layer0, order1=layer1, order2=layer2, K1=K1, K2=K2)
    return ExpansionSolution(ions, bath, moments, o0, o1, o2, intermediates=inter, shape=shape,
                             relations=rel, second_system=sys2)


def evaluate_expansion(solution: ExpansionSolution, Q0: float, order: int = 2) -> OrderCoefficients:
    """Truncated series through ``order`` at permanent charge ``Q0``."""
    if order > solution.max_order:
        raise ValueError(f"solution holds coefficients through order {solution.max_order}, not {order}")
    coeffs = solution.orders()[:order + 1]
    values = {}
    for f in fields(OrderCoefficients):
        values[f.name] = sum(getattr(c, f.name) * Q0 ** k for k, c in enumerate(coeffs))
    pred = OrderCoefficients(**values)
    if min(pred.c1a, pred.c2a, pred.c1b, pred.c2b) <= 0:
        raise NegativePredictedConcentration(
            f"order-{order} prediction at Q0={Q0:g} has a nonpositive concentration")
    return pred


def evaluate_layers(solution: ExpansionSolution, Q0: float, order: int = 2) -> LayerCoefficients:
    inter = solution.intermediates
    layers = [inter.order0, inter.order1, inter.order2][:order + 1]
    return LayerCoefficients(**{
        f.name: sum(getattr(lc, f.name) * Q0 ** k for k, lc in enumerate(layers))
        for f in fields(LayerCoefficients)})


def state_from_solution(solution: ExpansionSolution, Q0: float, order: int = 2):
    """Governing-system state predicted by the truncated series."""
    from .solver import GoverningState

    pred = evaluate_expansion(solution, Q0, order)
    if order == 0:
        phi_am, phi_bm = pred.phi_a, pred.phi_b
    else:
        lay = evaluate_layers(solution, Q0, order)
        phi_am, phi_bm = lay.phi_am, lay.phi_bm
    return GoverningState(phi_a=pred.phi_a, phi_b=pred.phi_b, c1a=pred.c1a, c2a=pred.c2a,
                          c1b=pred.c1b, c2b=pred.c2b, phi_am=phi_am, phi_bm=phi_bm,
                          J1=pred.J1, J2=pred.J2, y=pred.y)


def current_series(ions: IonPair, orders) -> tuple[float, ...]:
    """Current coefficients I_k = z1 D1 J1k + z2 D2 J2k for each supplied order."""
    return tuple(ions.z1 * ions.D1 * o.J1 + ions.z2 * ions.D2 * o.J2 for o in orders)


def flux_series(ions: IonPair, orders) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Physical flux coefficients D_k J_kj for species 1 and 2."""
    return (tuple(ions.D1 * o.J1 for o in orders), tuple(ions.D2 * o.J2 for o in orders))

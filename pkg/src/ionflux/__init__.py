"""Fluxes of a two-ion channel with small piecewise-constant permanent charge.

Closed-form expansion in the permanent charge, a Newton solver for the full
matching system, and sign analysis of the flux corrections.
"""

from .errors import (BEqualsOne, DegenerateBoundary, DegenerateGeometryB, DegenerateInput, InvalidConfig,
                     IonFluxError, NegativePredictedConcentration, NoConvergence, SingularJacobian,
                     SingularSecondOrderSystem)
from .expansion import evaluate_expansion, expand
from .model import BathState, ChannelGeometry, GeometryMoments, IonPair, Profile, cumulative_resistance, moments
from .solver import GoverningState, continuation_solve, solve

__version__ = "0.1.0"

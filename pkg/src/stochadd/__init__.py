"""Stochastic adding machines over bounded mixed-radix numeration systems.

Transition matrices and simulation (``machine``), fibered escape-time sets
(``julia``), point-spectrum enumeration and verification (``spectrum``), all
parameterized by base/probability sequences (``numeration``).
"""

from .julia import FiberedSystem, MembershipGrid, OrbitResult, orbit, render
from .machine import SparseTransitionMatrix, Trajectory, build_matrix, simulate
from .numeration import (
    BaseSeq,
    DigitVec,
    ProbSeq,
    SpecError,
    parse_base_spec,
    parse_probs_spec,
)
from .spectrum import PointSpectrum, RootSet, point_spectrum

__version__ = "0.1.0"

__all__ = [
    "BaseSeq",
    "DigitVec",
    "FiberedSystem",
    "MembershipGrid",
    "OrbitResult",
    "PointSpectrum",
    "ProbSeq",
    "RootSet",
    "SparseTransitionMatrix",
    "SpecError",
    "Trajectory",
    "build_matrix",
    "orbit",
    "parse_base_spec",
    "parse_probs_spec",
    "point_spectrum",
    "render",
    "simulate",
    "__version__",
]

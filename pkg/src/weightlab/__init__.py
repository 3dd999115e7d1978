"""weightlab: rigorous condition functionals for radial weights on the disc.

The package reduces area conditions over Carleson boxes on the unit disc to
one-dimensional integrals over a dictionary of scales, evaluates twelve
condition functionals with two-sided enclosures, sweeps them across dyadic
scales, and validates the implication/counterexample maps shipped in the
family catalog.
"""

from .bounds import BoundPair, EnclosureError, Surd
from .profiles import (
    DivergentMomentError,
    NonIntegrableError,
    Piece,
    PowerProfile,
    ProfileFormatError,
    StepProfile,
    TailError,
    profile_from_dict,
    profile_from_json,
)

__all__ = [
    "BoundPair",
    "Surd",
    "EnclosureError",
    "DivergentMomentError",
    "NonIntegrableError",
    "Piece",
    "PowerProfile",
    "ProfileFormatError",
    "StepProfile",
    "TailError",
    "profile_from_dict",
    "profile_from_json",
]
__version__ = "0.1.0"

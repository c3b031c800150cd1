"""Records (left-to-right maxima) in words of geometric random letters.

Modules:

- :mod:`georecords.qkernel`: precision contexts, the letter model, q-series.
- :mod:`georecords.identities`: exact-rational generating-function identities.
- :mod:`georecords.exactmeans`: exact finite-n means via alternating sums.
- :mod:`georecords.asymptotics`: sigma_r, beta_r, position slopes, limits.
- :mod:`georecords.wordlab`: enumeration and Monte Carlo oracles.
- :mod:`georecords.cli`: the ``georecords`` command.
"""

from .qkernel import (
    BoundedValue,
    DomainError,
    GeomModel,
    PrecisionContext,
    make_model,
    math_constants,
    parse_q,
)
from .exactmeans import expected_position_exact, expected_value_exact
from .asymptotics import position_leading_coeff, sigma

__all__ = [
    "BoundedValue",
    "DomainError",
    "GeomModel",
    "PrecisionContext",
    "expected_position_exact",
    "expected_value_exact",
    "make_model",
    "math_constants",
    "parse_q",
    "position_leading_coeff",
    "sigma",
]

__version__ = "0.1.0"

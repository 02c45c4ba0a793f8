"""Executable generalized-function machinery over epsilon-parametrized nets.

Subpackages:

* ``nets``    -- generalized numbers on the dyadic epsilon grid
* ``linalg``  -- linear algebra over the ring of generalized numbers
* ``lorentz`` -- causality, boosts, energy tensors, dominant energy checks
* ``wave``    -- per-epsilon wave solver on generalized static metrics
* ``sharp``   -- sharp-topology ultrametric and spherical completeness
* ``scaling`` -- mollifier scaling (non-)invariance demos
* ``cli``     -- config-driven experiment runner
"""

from .nets import (
    EpsilonGrid,
    GeneralizedNumber,
    AsymptoticFit,
    NetClass,
    make_power,
    make_indicator,
    constant_net,
    valuation,
    sharp_norm,
    classify,
    invert,
)

__version__ = "0.1.0"

__all__ = [
    "EpsilonGrid",
    "GeneralizedNumber",
    "AsymptoticFit",
    "NetClass",
    "make_power",
    "make_indicator",
    "constant_net",
    "valuation",
    "sharp_norm",
    "classify",
    "invert",
    "__version__",
]

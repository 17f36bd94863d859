"""Built-in data-generating processes: ``draw(rng, size) -> array``."""

from __future__ import annotations

import math

import numpy as np

from .core import ValidationError


class UnknownDgp(ValidationError):
    pass


def _lognormal_centered(rng, size):
    return rng.lognormal(0.0, 1.0, size) - math.exp(0.5)


DGPS = {
    "normal": lambda rng, size: rng.standard_normal(size),
    "normal_3_4": lambda rng, size: rng.normal(3.0, 2.0, size),
    "uniform": lambda rng, size: rng.uniform(0.0, 1.0, size),
    "uniform_sym": lambda rng, size: rng.uniform(-1.0, 1.0, size),
    "exponential_centered": lambda rng, size: rng.exponential(1.0, size) - 1.0,
    "laplace": lambda rng, size: rng.laplace(0.0, 1.0, size),
    "lognormal_centered": _lognormal_centered,
}

# DGPs whose law is symmetric about zero
SYMMETRIC_DGPS = ("normal", "uniform_sym", "laplace")


def get_dgp(dgp):
    """Resolve a DGP name (``normal_3_4`` is mean 3, variance 4) or pass a callable through."""
    if callable(dgp):
        return dgp
    try:
        return DGPS[dgp]
    except KeyError:
        raise UnknownDgp(f"unknown dgp {dgp!r}; choose from {sorted(DGPS)}") from None

"""Test statistics.

A statistic maps the last axis of an array to a real number, so the same
code path scores the observed sample and every transformed copy of it.
That matters: ties in the randomization test are detected with exact
float equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import ValidationError


def _mean(x):
    return np.mean(x, axis=-1)


def _abs_mean(x):
    return np.abs(np.mean(x, axis=-1))


def _t_stat(x):
    n = x.shape[-1]
    if n < 2:
        raise ValidationError("the t statistic needs n >= 2")
    m = np.mean(x, axis=-1)
    dev = x - m[..., None]
    sd = np.sqrt(np.einsum("...i,...i->...", dev, dev) / (n - 1))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = m / (sd / np.sqrt(n))
    # zero spread: +-inf in the direction of the mean, 0 when the mean is 0 too
    degenerate = sd == 0
    if np.any(degenerate):
        t = np.where(degenerate, np.where(m == 0, 0.0, np.copysign(np.inf, m)), t)
    return t


def _abs_t_stat(x):
    return np.abs(_t_stat(x))


def _max_abs(x):
    return np.max(np.abs(x), axis=-1)


@dataclass(frozen=True)
class TestStatistic:
    """Named statistic.  ``func`` must reduce the last axis.

    Set ``vectorized=False`` for a plain ``Sample -> float`` function; it is
    then applied row by row.
    """

    __test__ = False  # keep pytest from collecting this class

    name: str
    func: Callable = field(compare=False)
    vectorized: bool = True
    params: tuple = ()

    def __call__(self, arr) -> np.ndarray:
        arr = np.asarray(arr, dtype=float)
        if self.vectorized:
            out = np.asarray(self.func(arr, *self.params), dtype=float)
        else:
            flat = arr.reshape(-1, arr.shape[-1])
            out = np.fromiter((float(self.func(row, *self.params)) for row in flat), float, len(flat))
            out = out.reshape(arr.shape[:-1])
        if out.shape != arr.shape[:-1]:
            raise ValidationError(f"statistic {self.name!r} returned shape {out.shape}, expected {arr.shape[:-1]}")
        if np.any(np.isnan(out)):
            raise ValidationError(f"statistic {self.name!r} produced NaN")
        return out


BUILTIN_STATISTICS = {
    "mean": TestStatistic("mean", _mean),
    "abs_mean": TestStatistic("abs_mean", _abs_mean),
    "t_stat": TestStatistic("t_stat", _t_stat),
    "abs_t_stat": TestStatistic("abs_t_stat", _abs_t_stat),
    "max_abs": TestStatistic("max_abs", _max_abs),
}


def get_statistic(spec) -> TestStatistic:
    """Resolve a name, a :class:`TestStatistic`, or a plain callable."""
    if isinstance(spec, TestStatistic):
        return spec
    if isinstance(spec, str):
        key = spec.lower().replace("-", "_")
        aliases = {"absmean": "abs_mean", "tstat": "t_stat", "abstt": "abs_t_stat", "abststat": "abs_t_stat"}
        key = aliases.get(key, key)
        try:
            return BUILTIN_STATISTICS[key]
        except KeyError:
            raise ValidationError(
                f"unknown statistic {spec!r}; choose from {sorted(BUILTIN_STATISTICS)}"
            ) from None
    if callable(spec):
        return TestStatistic(getattr(spec, "__name__", "custom"), spec, vectorized=False)
    raise ValidationError(f"cannot interpret {spec!r} as a test statistic")

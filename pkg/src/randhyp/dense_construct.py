"""Mixtures ``g = a p + (1 - a) h`` that hit a target functional.

Given a probability density ``p`` on a few disjoint intervals, each builder
picks a complement density ``h`` supported off those intervals and a scale
``a`` in ``(0, 1]`` so that ``g`` has a prescribed moment, quantile or
variance while agreeing with ``a p`` on the original intervals.  All
densities are piecewise constant, so moments and CDFs are closed form;
:func:`numeric_check_mixture` re-derives everything by adaptive quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .core import MassNotNormalized, PiecewiseDensity, RandHypError, ValidationError

MASS_TOL = 1e-10
TARGET_TOL = 1e-8
VARIANCE_EXACT_TOL = 1e-12


class WidthBoundViolated(ValidationError):
    pass


class TargetOutOfRange(ValidationError):
    pass


class NoGapInterval(ValidationError):
    pass


class QuantileNotInterior(ValidationError):
    pass


class BisectionFailed(RandHypError):
    pass


@dataclass(frozen=True)
class MixtureConstruction:
    scale: float
    base: PiecewiseDensity
    complement: PiecewiseDensity
    target: dict
    mixture: PiecewiseDensity
    support: tuple | None = None
    notes: tuple = field(default=())

    def to_json(self) -> dict:
        return {
            "scale": self.scale,
            "base": self.base.to_json(),
            "complement": self.complement.to_json(),
            "target": dict(self.target),
            "mixture": self.mixture.to_json(),
            "support": list(self.support) if self.support else None,
            "notes": list(self.notes),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MixtureConstruction":
        return cls(
            obj["scale"],
            PiecewiseDensity.from_json(obj["base"]),
            PiecewiseDensity.from_json(obj["complement"]),
            dict(obj["target"]),
            PiecewiseDensity.from_json(obj["mixture"]),
            tuple(obj["support"]) if obj.get("support") else None,
            tuple(obj.get("notes", ())),
        )


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _check_base(base: PiecewiseDensity, support=None) -> None:
    if abs(base.mass() - 1.0) > MASS_TOL:
        raise MassNotNormalized(f"base density integrates to {base.mass()!r}, not 1")
    if support is not None:
        b0, b1 = support
        if not b0 < b1:
            raise ValidationError("support must satisfy b0 < b1")
        if base.lower < b0 or base.upper > b1:
            raise ValidationError("base intervals must lie inside the support")


def _real_root(beta: float, t: int) -> float:
    """Real ``t``-th root (odd ``t`` keeps the sign)."""
    return math.copysign(abs(beta) ** (1.0 / t), beta)


def _uniform_moment(a: float, b: float, t: int) -> float:
    return (b ** (t + 1) - a ** (t + 1)) / ((t + 1) * (b - a))


def _assemble(scale: float, base: PiecewiseDensity, h: PiecewiseDensity, target: dict, support=None,
              notes=()) -> MixtureConstruction:
    if h.overlaps(base):
        raise ValidationError("complement support meets the base intervals")
    if scale >= 1.0:
        mixture = base
        scale = 1.0
    else:
        mixture = PiecewiseDensity(
            base.intervals + h.intervals,
            tuple(scale * v for v in base.heights) + tuple((1.0 - scale) * v for v in h.heights),
        )
    return MixtureConstruction(float(scale), base, h, target, mixture,
                               tuple(support) if support else None, tuple(notes))


def _widest_gap(base: PiecewiseDensity, lo: float, hi: float) -> tuple[float, float]:
    """Middle half of the widest stretch of ``[lo, hi]`` missing every base interval.

    Using the middle half keeps the complement strictly clear of the base
    and of the endpoint it must not cross.
    """
    best, cur = None, lo
    for a, b in list(base.intervals) + [(hi, hi)]:
        if b < lo or a > hi:
            continue
        a, b = max(a, lo), min(b, hi)
        if a > cur:
            if best is None or a - cur > best[1] - best[0]:
                best = (cur, a)
        cur = max(cur, b)
        if cur >= hi:
            break
    if best is None or best[1] - best[0] <= 0:
        raise NoGapInterval(f"no free interval inside [{lo}, {hi}]")
    w = best[1] - best[0]
    return best[0] + w / 4.0, best[1] - w / 4.0


def _check_width(base: PiecewiseDensity, bound: float) -> None:
    if not base.max_width < bound:
        raise WidthBoundViolated(
            f"widest base interval {base.max_width:.6g} is not below the bound {bound:.6g} for m={base.m}"
        )


def _scale_from_moments(mX: float, mY: float, beta: float) -> float:
    if mX == beta:
        return 1.0
    return (mY - beta) / (mY - mX)


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------


def match_moment_density(base: PiecewiseDensity, t: int, beta: float, support=None) -> MixtureConstruction:
    """Mixture with ``E[X^t] = beta``.

    ``support=None`` means the whole real line; otherwise pass ``(b0, b1)``.
    Even ``t`` (and any ``t`` on a bounded support) needs the base
    intervals to be narrow enough that a free interval is guaranteed on the
    required side of ``beta^(1/t)``.
    """
    if int(t) != t or t < 1:
        raise ValidationError("t must be a positive integer")
    t = int(t)
    beta = float(beta)
    _check_base(base, support)
    m = base.m
    mX = base.raw_moment(t)
    target = {"kind": "moment", "t": t, "beta": beta}
    odd = t % 2 == 1

    if support is None:
        if odd:
            root = _real_root(beta, t)
            if mX <= beta:
                P = max(base.upper + 1.0, root + 1.0)
                lo, hi = P, P + 1.0
            else:
                Q = min(base.lower - 1.0, root - 1.0)
                lo, hi = Q - 1.0, Q
        else:
            if beta <= 0:
                raise TargetOutOfRange("an even moment target must be positive")
            r = beta ** (1.0 / t)
            _check_width(base, r / (m + 1))
            if mX <= beta:
                P = max(base.upper + 1.0, r + 1.0)
                lo, hi = P, P + 1.0
            else:
                lo, hi = _widest_gap(base, 0.0, r)
    else:
        b0, b1 = map(float, support)
        if odd:
            if not (b0 ** t < beta < b1 ** t):
                raise TargetOutOfRange(f"beta must lie strictly between {b0 ** t} and {b1 ** t}")
            root = _real_root(beta, t)
            _check_width(base, min(b1 - root, root - b0) / (m + 1))
            lo, hi = _widest_gap(base, b0, root) if mX >= beta else _widest_gap(base, root, b1)
        else:
            top = max(abs(b0), abs(b1))
            if not (0 < beta < top ** t):
                raise TargetOutOfRange(f"beta must lie strictly between 0 and {top ** t}")
            r = beta ** (1.0 / t)
            _check_width(base, min(top - r, r) / (m + 1))
            if mX >= beta:
                lo, hi = _widest_gap(base, max(b0, -r), min(b1, r))
            elif abs(b1) >= abs(b0):
                lo, hi = _widest_gap(base, r, b1)
            else:
                lo, hi = _widest_gap(base, b0, -r)

    h = PiecewiseDensity.uniform(lo, hi)
    mY = _uniform_moment(lo, hi, t)
    scale = _scale_from_moments(mX, mY, beta)
    if not (0.0 < scale <= 1.0):
        raise ValidationError(f"no admissible scale (got {scale!r}); complement moment {mY!r}")
    return _assemble(scale, base, h, target, support)


# ---------------------------------------------------------------------------
# quantiles
# ---------------------------------------------------------------------------


def match_quantile_density(base: PiecewiseDensity, q: float, prob: float, support=None) -> MixtureConstruction:
    """Mixture with ``P[X <= q] = prob``.

    The complement puts weight ``w`` on a unit interval below ``q`` and
    ``1 - w`` on one above.  The scale is half the largest value that keeps
    ``w`` inside ``[0, 1]``, or exactly 1 when the base already has
    ``P[X <= q] = prob``.
    """
    q, prob = float(q), float(prob)
    if not (0.0 < prob < 1.0):
        raise ValidationError("prob must lie in (0, 1)")
    _check_base(base, support)
    m = base.m
    F = base.cdf(q)
    target = {"kind": "quantile", "q": q, "prob": prob}
    if support is None:
        N = math.ceil(max(abs(base.lower), abs(base.upper), abs(q))) + 1
        below, above = (-N - 1.0, -float(N)), (float(N), N + 1.0)
    else:
        b0, b1 = map(float, support)
        if not (b0 < q < b1):
            raise QuantileNotInterior(f"q={q} is not inside ({b0}, {b1})")
        _check_width(base, min(q - b0, b1 - q) / (m + 1))
        below, above = _widest_gap(base, b0, q), _widest_gap(base, q, b1)

    if abs(F - prob) <= 1e-12:
        scale = 1.0
        w = prob
    else:
        limits = [1.0]
        if F > 0:
            limits.append(prob / F)
        if F < 1:
            limits.append((1.0 - prob) / (1.0 - F))
        scale = min(limits) / 2.0
        w = (prob - scale * F) / (1.0 - scale)
    h = PiecewiseDensity(
        (below, above),
        (w / (below[1] - below[0]), (1.0 - w) / (above[1] - above[0])),
    )
    return _assemble(scale, base, h, target, support)


# ---------------------------------------------------------------------------
# variance
# ---------------------------------------------------------------------------


def _mean_var(d: PiecewiseDensity) -> tuple[float, float]:
    mass = d.mass()
    mu = d.raw_moment(1) / mass
    return mu, d.raw_moment(2) / mass - mu * mu


def match_variance_density(base: PiecewiseDensity, beta: float) -> MixtureConstruction:
    """Mixture on the real line with variance ``beta``.

    The complement is a narrow uniform block (variance below ``beta``) far
    to the right.  At scale 1/2 the mixture variance exceeds ``beta``; at 0
    it falls short, so the scale is found by bracketing root search.
    """
    beta = float(beta)
    if not beta > 0:
        raise TargetOutOfRange("variance target must be positive")
    _check_base(base)
    mu, V = _mean_var(base)
    target = {"kind": "variance", "beta": beta}
    M = max(abs(base.lower), abs(base.upper))
    w = min(0.5, math.sqrt(12.0 * beta) / 2.0)
    z = max(M + 1.0, mu + math.sqrt(max(0.0, 4.0 * beta - 2.0 * V))) + 1.0
    h = PiecewiseDensity.uniform(z - w / 2.0, z + w / 2.0)
    if abs(V - beta) <= VARIANCE_EXACT_TOL:
        return _assemble(1.0, base, h, target)
    vy = w * w / 12.0
    second_x, second_y = V + mu * mu, vy + z * z

    def excess(a):
        m1 = a * mu + (1 - a) * z
        return a * second_x + (1 - a) * second_y - m1 * m1 - beta

    lo, hi = excess(0.0), excess(0.5)
    if not (lo < 0 < hi):
        raise BisectionFailed(f"variance map does not bracket beta: f(0)={lo!r}, f(1/2)={hi!r}")
    scale = brentq(excess, 0.0, 0.5, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return _assemble(scale, base, h, target)


# ---------------------------------------------------------------------------
# numeric verification
# ---------------------------------------------------------------------------


def _integrate(d: PiecewiseDensity, f, upto: float | None = None) -> float:
    parts = []
    for (a, b), hgt in zip(d.intervals, d.heights):
        if upto is not None:
            if a >= upto:
                continue
            b = min(b, upto)
        val, _ = quad(lambda x: hgt * f(x), a, b, epsabs=1e-13, epsrel=1e-13, limit=200)
        parts.append(val)
    return math.fsum(parts)


def _probe_points(intervals, k: int = 7) -> np.ndarray:
    return np.concatenate([np.linspace(a, b, k + 2)[1:-1] for a, b in intervals])


@dataclass
class MixtureCheck:
    total_mass_error: float
    restriction_residual: float
    complement_mass_error: float
    decomposition_residual: float
    target_residual: float

    @property
    def passed(self) -> bool:
        return (self.total_mass_error <= MASS_TOL and self.restriction_residual <= 1e-12
                and self.complement_mass_error <= MASS_TOL and self.decomposition_residual <= 1e-12
                and self.target_residual <= TARGET_TOL)

    def to_json(self) -> dict:
        out = dict(self.__dict__)
        out["passed"] = self.passed
        return out


def numeric_check_mixture(c: MixtureConstruction) -> MixtureCheck:
    """Quadrature cross-check of a construction.

    Residuals: mixture mass minus 1, mixture versus ``scale * base`` on the
    base intervals, complement mass minus 1, mixture versus its stated
    decomposition, and the target functional.
    """
    g = c.mixture
    mass = _integrate(g, lambda x: 1.0)
    pts = _probe_points(c.base.intervals)
    restriction = float(np.max(np.abs(g(pts) - c.scale * c.base(pts))))
    all_pts = _probe_points(g.intervals + c.complement.intervals)
    decomposition = float(np.max(np.abs(
        g(all_pts) - c.scale * c.base(all_pts) - (1.0 - c.scale) * c.complement(all_pts)
    )))
    comp_mass = _integrate(c.complement, lambda x: 1.0)
    kind = c.target["kind"]
    if kind == "moment":
        t = c.target["t"]
        value = _integrate(g, lambda x: x ** t) - c.target["beta"]
    elif kind == "quantile":
        value = _integrate(g, lambda x: 1.0, upto=c.target["q"]) - c.target["prob"]
    elif kind == "variance":
        m1 = _integrate(g, lambda x: x)
        value = _integrate(g, lambda x: x * x) - m1 * m1 - c.target["beta"]
    else:
        raise ValidationError(f"unknown target kind {kind!r}")
    return MixtureCheck(abs(mass - 1.0), restriction, abs(comp_mass - 1.0), decomposition, abs(value))

"""The randomization test and its per-dataset averaging identity."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .core import (
    LevelOutOfRange,
    NotExplicitGroup,
    Sample,
    as_sample_array,
)
from .groups import DEFAULT_CAP, ExplicitGroup, GeneratedGroup, SampledGroup, realize_group
from .statistics import get_statistic

# Largest group for which group_average_phi recomputes every orbit by default.
ORBIT_METHOD_LIMIT = 256
_SNAP = 1e-9


def check_level(level: float) -> float:
    level = float(level)
    if not (0.0 < level < 1.0):
        raise LevelOutOfRange(f"level must lie strictly between 0 and 1, got {level!r}")
    return level


def _m_alpha(M: int, level: float) -> float:
    """``M * level``, snapped to the nearest integer when within 1e-9 of it.

    Without the snap, 0.3 * 10 == 3.0000000000000004 would move ``k`` by one.
    """
    x = M * level
    r = round(x)
    return float(r) if abs(x - r) <= _SNAP else x


def rejection_index(M: int, level: float) -> int:
    """``k = M - floor(M * level)`` (1-based rank of the critical value)."""
    return M - math.floor(_m_alpha(M, level))


@dataclass(frozen=True)
class Decision:
    phi: float
    p_value: float
    M: int
    k: int
    M_plus: int
    M_zero: int
    a_x: float
    T_obs: float
    level: float
    statistic: str = ""

    @property
    def rejects(self) -> bool:
        return self.phi == 1.0

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "Decision":
        return cls(**obj)


def _decide(T: np.ndarray, T_obs: np.ndarray, level: float, with_p: bool = True):
    """Vectorised decision: ``T`` has shape ``(..., M)``, ``T_obs`` ``(...)``."""
    M = T.shape[-1]
    k = rejection_index(M, level)
    Tk = np.partition(T, k - 1, axis=-1)[..., k - 1]
    M_plus = np.count_nonzero(T > Tk[..., None], axis=-1)
    M_zero = np.count_nonzero(T == Tk[..., None], axis=-1)
    a = (_m_alpha(M, level) - M_plus) / M_zero
    phi = np.where(T_obs > Tk, 1.0, np.where(T_obs == Tk, a, 0.0))
    p = np.count_nonzero(T >= T_obs[..., None], axis=-1) / M if with_p else None
    return phi, p, k, M_plus, M_zero, a


def _scores(G: ExplicitGroup, stat, X: np.ndarray):
    """Statistic on every orbit point and on ``X`` itself, in one call."""
    orbit = G.orbit(X)
    both = np.concatenate([orbit, X[..., None, :]], axis=-2)
    T = stat(both)
    return T[..., :-1], T[..., -1]


def run_randomization_test(sample, group, statistic="abs_mean", level: float = 0.05,
                           cap: int = DEFAULT_CAP) -> Decision:
    """Rank ``T(g x)`` over the group and return the full decision record.

    ``phi`` is 1 above the ``k``-th order statistic, ``a(x)`` on it and 0
    below.  The p-value is the share of group elements with
    ``T(g x) >= T(x)``.
    """
    level = check_level(level)
    x = as_sample_array(sample)
    stat = get_statistic(statistic)
    G = realize_group(group, cap)
    T, T_obs = _scores(G, stat, x)
    phi, p, k, M_plus, M_zero, a = _decide(T, T_obs, level)
    return Decision(
        phi=float(phi), p_value=float(p), M=T.shape[-1], k=k, M_plus=int(M_plus), M_zero=int(M_zero),
        a_x=float(a), T_obs=float(T_obs), level=level, statistic=stat.name,
    )


def phi_batch(X, group, statistic, level: float, cap: int = DEFAULT_CAP):
    """``(phi, p_value)`` arrays for each row of ``X`` (shape ``(R, n)``)."""
    level = check_level(level)
    X = np.asarray(X, dtype=float)
    G = group if isinstance(group, ExplicitGroup) else realize_group(group, cap)
    T, T_obs = _scores(G, get_statistic(statistic), X)
    phi, p, *_ = _decide(T, T_obs, level)
    return phi, p


def _average_levels(sample, group, statistic, levels, method: str = "auto") -> list[float]:
    if isinstance(group, SampledGroup):
        raise NotExplicitGroup("the averaging identity needs a genuine group, not i.i.d. draws")
    if not isinstance(group, (ExplicitGroup, GeneratedGroup)):
        raise NotExplicitGroup(f"expected an explicit group, got {type(group).__name__}")
    levels = [check_level(lv) for lv in levels]
    x = as_sample_array(sample)
    stat = get_statistic(statistic)
    G = realize_group(group)
    M = len(G)
    if method == "auto":
        method = "orbit" if M <= ORBIT_METHOD_LIMIT else "coset"
    if method == "orbit":
        # phi(gx) is computed from scratch on the orbit of gx, in row chunks
        X0 = G.orbit(x)
        chunk = max(1, 2_000_000 // max(1, M * x.size))
        parts_T, parts_obs = [], []
        for s in range(0, M, chunk):
            T, T_obs = _scores(G, stat, X0[s:s + chunk])
            parts_T.append(T)
            parts_obs.append(T_obs)
        T, T_obs = np.concatenate(parts_T), np.concatenate(parts_obs)
    elif method == "coset":
        # g G = G, so every orbit is the orbit of x; only T_obs changes
        t, _ = _scores(G, stat, x)
        T, T_obs = t[None, :], t
    else:
        raise ValueError(f"unknown method {method!r}")
    out = []
    for level in levels:
        phi, *_ = _decide(T, T_obs, level, with_p=False)
        phi = np.broadcast_to(phi, (M,))
        # only the randomized entries need compensated summation
        frac = phi[(phi != 0.0) & (phi != 1.0)]
        out.append(math.fsum([float(np.count_nonzero(phi == 1.0))] + frac.tolist()) / M)
    return out


def group_average_phi(sample, group, statistic="abs_mean", level: float = 0.05, method: str = "auto") -> float:
    """``(1/M) * sum over g of phi(g x)``; equals ``level`` for any sample.

    ``method="orbit"`` recomputes the orbit of each ``g x``; ``"coset"``
    reuses the orbit of ``x`` and so presumes closure.  ``"auto"`` picks
    ``orbit`` for groups of at most 256 elements.
    """
    return _average_levels(sample, group, statistic, [level], method)[0]


def group_average_phi_levels(sample, group, statistic, levels, method: str = "auto") -> list[float]:
    """Several levels at once; the orbit scores are computed only once."""
    return _average_levels(sample, group, statistic, levels, method)


def apply_transform(g, sample) -> Sample:
    return Sample(tuple(g.apply(as_sample_array(sample)).tolist()))

"""Randomization-hypothesis decisions for nulls on a finite alphabet.

Every supported null family is the probability simplex cut by linear
equality constraints.  Products of masses over a sample depend only on the
atom counts, so a pair ``x, y`` has equal product mass under the whole
family exactly when ``F(p) = sum_i d_i log p_i`` vanishes on the family,
where ``d`` is the count difference.  ``F`` is analytic on the relative
interior, so it is identically zero there iff its gradient vanishes and it
is zero at one interior point; the gradient condition reduces to
``sum of d over each class of proportional masses == 0``.  That gives an
algebraic certificate for "yes"; "no" answers always carry an explicit
counterexample distribution.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog

from .core import (
    Alphabet,
    AtomNotInAlphabet,
    BudgetExceeded,
    CountDiff,
    DimensionMismatch,
    DiscreteDistribution,
    RandHypError,
    SameAtom,
    ValidationError,
    ZeroDiff,
)
from .groups import ExplicitGroup, atom_swap_group, witness_to_group

LOG_EQ_TOL = 1e-10
VIOLATION_MIN = 1e-6
CONSTRAINT_TOL = 1e-10
EPS_START = 1e-3
EPS_SHRINK = 0.25
EPS_ROUNDS = 10
OPT_RESTARTS = 50
DEFAULT_BUDGET = 100_000


class NoCounterexampleFound(RandHypError):
    pass


# ---------------------------------------------------------------------------
# Null families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SymmetricAboutZero:
    pass


@dataclass(frozen=True)
class EqualMass:
    a: float
    b: float


@dataclass(frozen=True)
class Moment:
    t: int
    beta: float


@dataclass(frozen=True)
class Quantile:
    q: float
    prob: float


Family = SymmetricAboutZero | EqualMass | Moment | Quantile


@dataclass(frozen=True)
class NullSpec:
    alphabet: Alphabet
    family: Family

    def __post_init__(self):
        if not isinstance(self.alphabet, Alphabet):
            object.__setattr__(self, "alphabet", Alphabet(tuple(self.alphabet)))
        A, f = self.alphabet, self.family
        atoms = A.atoms
        if isinstance(f, SymmetricAboutZero):
            if not A.is_closed_under_negation():
                raise ValidationError("a symmetric null needs an alphabet closed under negation")
        elif isinstance(f, EqualMass):
            a, b = float(f.a), float(f.b)
            if a == b:
                raise SameAtom("equal-mass atoms must differ")
            A.index(a)
            A.index(b)
            object.__setattr__(self, "family", EqualMass(a, b))
        elif isinstance(f, Moment):
            if int(f.t) != f.t or f.t < 1:
                raise ValidationError("moment order t must be a positive integer")
            v = [x ** int(f.t) for x in atoms]
            if not (min(v) < f.beta < max(v)):
                raise ValidationError(f"beta={f.beta} must lie strictly inside ({min(v)}, {max(v)})")
            object.__setattr__(self, "family", Moment(int(f.t), float(f.beta)))
        elif isinstance(f, Quantile):
            if not (atoms[0] < f.q < atoms[-1]):
                raise ValidationError(f"q={f.q} must lie strictly between the smallest and largest atom")
            if not (0.0 < f.prob < 1.0):
                raise ValidationError("quantile probability must lie in (0, 1)")
            object.__setattr__(self, "family", Quantile(float(f.q), float(f.prob)))
        else:
            raise ValidationError(f"unknown null family {f!r}")

    # linear description: {p >= 0 : E p = e}, the sum-to-one row included
    def constraints(self) -> tuple[np.ndarray, np.ndarray]:
        atoms = np.array(self.alphabet.atoms)
        K = len(atoms)
        rows, rhs = [np.ones(K)], [1.0]
        f = self.family
        if isinstance(f, SymmetricAboutZero):
            for a in atoms[atoms > 0]:
                r = np.zeros(K)
                r[self.alphabet.index(a)] = 1.0
                r[self.alphabet.index(-a)] = -1.0
                rows.append(r)
                rhs.append(0.0)
        elif isinstance(f, EqualMass):
            r = np.zeros(K)
            r[self.alphabet.index(f.a)] = 1.0
            r[self.alphabet.index(f.b)] = -1.0
            rows.append(r)
            rhs.append(0.0)
        elif isinstance(f, Moment):
            rows.append(atoms ** f.t)
            rhs.append(f.beta)
        else:
            rows.append((atoms <= f.q).astype(float))
            rhs.append(f.prob)
        return np.array(rows), np.array(rhs)

    def residual(self, p) -> float:
        E, e = self.constraints()
        return float(np.max(np.abs(E @ np.asarray(p, dtype=float) - e)))

    def contains(self, p, tol: float = CONSTRAINT_TOL) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= 0) and self.residual(p) <= tol)

    def to_json(self) -> dict:
        out = {"alphabet": list(self.alphabet.atoms)}
        f = self.family
        if isinstance(f, SymmetricAboutZero):
            out["family"] = "symmetric"
        elif isinstance(f, EqualMass):
            out.update(family="equal_mass", atoms=[f.a, f.b])
        elif isinstance(f, Moment):
            out.update(family="moment", t=f.t, beta=f.beta)
        else:
            out.update(family="quantile", q=f.q, prob=f.prob)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "NullSpec":
        try:
            alphabet = Alphabet(tuple(obj["alphabet"]))
            kind = obj["family"]
            if kind in ("symmetric", "symmetric_about_zero"):
                fam = SymmetricAboutZero()
            elif kind == "equal_mass":
                a, b = obj["atoms"]
                fam = EqualMass(a, b)
            elif kind == "moment":
                fam = Moment(obj["t"], obj["beta"])
            elif kind == "quantile":
                fam = Quantile(obj["q"], obj.get("prob", obj.get("p")))
            else:
                raise ValidationError(f"unknown null family {kind!r}")
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed null spec: {exc}") from None
        return cls(alphabet, fam)


# ---------------------------------------------------------------------------
# Counting and product masses
# ---------------------------------------------------------------------------


def counts(x, alphabet: Alphabet) -> np.ndarray:
    c = np.zeros(alphabet.K, dtype=int)
    for v in x:
        c[alphabet.index(v)] += 1
    return c


def count_diff(x, y, alphabet) -> CountDiff:
    """Per-atom occurrence counts of ``x`` minus those of ``y``."""
    if not isinstance(alphabet, Alphabet):
        alphabet = Alphabet(tuple(alphabet))
    return CountDiff(tuple(counts(x, alphabet) - counts(y, alphabet)), alphabet)


def log_violation(d, p) -> float:
    """``sum_i d_i log p_i`` over atoms with ``d_i != 0``."""
    d = np.asarray(d, dtype=float)
    p = np.asarray(p, dtype=float)
    nz = d != 0
    return math.fsum((d[nz] * np.log(p[nz])).tolist())


def product_mass_equal(p: DiscreteDistribution, x, y) -> bool:
    """Whether ``prod p(x_j) == prod p(y_j)``, compared in log space."""
    if len(x) != len(y):
        raise DimensionMismatch("x and y must have the same length")
    A = p.alphabet
    cx, cy = counts(x, A), counts(y, A)
    m = p.to_array()
    zero = m == 0
    zx, zy = int(cx[zero].sum()), int(cy[zero].sum())
    if zx or zy:
        return bool(zx and zy)
    return abs(log_violation(cx - cy, m)) <= LOG_EQ_TOL


# ---------------------------------------------------------------------------
# Geometry of a null family
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class _Slice:
    p0: np.ndarray  # strictly positive member
    U: np.ndarray  # orthonormal basis of directions staying in the family
    classes: tuple  # proportional-mass classes (atom index tuples), non-constant only


@lru_cache(maxsize=256)
def _slice(spec: NullSpec) -> _Slice:
    E, e = spec.constraints()
    K = E.shape[1]
    # maximise the smallest mass to land in the relative interior
    c = np.zeros(K + 1)
    c[-1] = -1.0
    res = linprog(
        c,
        A_ub=np.hstack([-np.eye(K), np.ones((K, 1))]),
        b_ub=np.zeros(K),
        A_eq=np.hstack([E, np.zeros((len(E), 1))]),
        b_eq=e,
        bounds=[(0, None)] * K + [(0, 1)],
        method="highs",
    )
    if res.status != 0 or res.x[-1] <= 1e-12:
        raise ValidationError("the null family has no member with full support")
    p0 = res.x[:K]
    p0 = p0 - np.linalg.pinv(E) @ (E @ p0 - e)
    U = null_space(E)
    rel = U / p0[:, None]
    classes: list[list[int]] = []
    reps: list[np.ndarray] = []
    for i in range(K):
        if U.shape[1] == 0 or np.max(np.abs(U[i])) <= 1e-9:
            continue
        for cls, r in zip(classes, reps):
            if np.max(np.abs(rel[i] - r)) <= 1e-9:
                cls.append(i)
                break
        else:
            classes.append([i])
            reps.append(rel[i])
    return _Slice(p0, U, tuple(tuple(cl) for cl in classes))


def _algebraic_witness(d: np.ndarray, spec: NullSpec) -> bool:
    sl = _slice(spec)
    if any(d[list(cl)].sum() != 0 for cl in sl.classes):
        return False
    return abs(log_violation(d, sl.p0)) <= 1e-9


def sample_null_distributions(spec: NullSpec, count: int, seed: int | None = 0, thin: int = 5) -> np.ndarray:
    """``count`` members of the family with full support, by hit-and-run.

    Returns an array of shape ``(count, K)``.
    """
    sl = _slice(spec)
    rng = np.random.default_rng(seed)
    K, r = sl.U.shape
    if r == 0:
        return np.tile(sl.p0, (count, 1))
    theta = np.zeros(r)
    out = np.empty((count, K))
    for j in range(count):
        for _ in range(thin):
            u = rng.standard_normal(r)
            dirn = sl.U @ u
            p = sl.p0 + sl.U @ theta
            with np.errstate(divide="ignore"):
                s = -p / dirn
            hi = np.min(s[dirn < 0], initial=np.inf)
            lo = np.max(s[dirn > 0], initial=-np.inf)
            theta = theta + rng.uniform(lo, hi) * u
        out[j] = np.clip(sl.p0 + sl.U @ theta, 0.0, None)
    return out


# ---------------------------------------------------------------------------
# Counterexample construction
# ---------------------------------------------------------------------------


def _accept(d, p, spec) -> bool:
    p = np.asarray(p, dtype=float)
    return bool(np.all(p > 0) and abs(log_violation(d, p)) > VIOLATION_MIN and spec.residual(p) <= CONSTRAINT_TOL)


def _moment_candidate(d, spec: NullSpec, eps: float):
    f = spec.family
    v = np.array(spec.alphabet.atoms) ** f.t
    beta = f.beta
    K = len(v)
    below = [i for i in range(K) if v[i] < beta]
    above = [i for i in range(K) if v[i] > beta]
    at = [i for i in range(K) if v[i] == beta]

    hot = [j for j in at if d[j] != 0]
    if hot:
        # mass piles on an atom sitting exactly at beta; the rest shrink together
        j = hot[0]
        p = np.zeros(K)
        for i in below:
            p[i] = eps / (len(below) * (beta - v[i]))
        for i in above:
            p[i] = eps / (len(above) * (v[i] - beta))
        for i in at:
            if i != j:
                p[i] = eps
        p[j] = 1.0 - math.fsum(p.tolist())
        return p

    pairs = [(i1, i2) for i1 in below for i2 in above]
    choice = next(((i1, i2) for i1, i2 in pairs if d[i1] + d[i2] != 0), None)
    if choice is None:
        choice = next(((i1, i2) for i1, i2 in pairs if beta - v[i1] != v[i2] - beta), None)
    if choice is not None:
        i1, i2 = choice
        p = np.full(K, eps)
        rest = eps * (K - 2)
        s_eps = eps * math.fsum(v[j] for j in range(K) if j not in choice)
        q = (beta - s_eps - (1.0 - rest) * v[i2]) / (v[i1] - v[i2])
        p[i1] = q
        p[i2] = 1.0 - rest - q
        return p
    return None


def _split_candidates(d, K, side_a, side_b, mass_a, mass_b, fixed: dict):
    """Spread ``mass_a`` evenly on ``side_a``; on ``side_b`` perturb two atoms."""
    out = []
    for delta in (0.0, 0.5, 1.0 / 3.0):
        p = np.zeros(K)
        for i, m in fixed.items():
            p[i] = m
        for i in side_a:
            p[i] = mass_a / len(side_a)
        nb = len(side_b)
        for i in side_b:
            p[i] = mass_b / nb
        if delta and nb >= 2:
            p[side_b[0]] = mass_b * (1 + delta) / nb
            p[side_b[1]] = mass_b * (1 - delta) / nb
        out.append(p)
    return out


def _moment_equal_distance(d, spec: NullSpec):
    """All below/above atoms are equidistant from beta: the constraint says the
    two sides carry equal mass, so perturb within one side."""
    f = spec.family
    v = np.array(spec.alphabet.atoms) ** f.t
    K = len(v)
    below = [i for i in range(K) if v[i] < f.beta]
    above = [i for i in range(K) if v[i] > f.beta]
    at = [i for i in range(K) if v[i] == f.beta]
    eps = EPS_START
    half = (1.0 - eps * len(at)) / 2.0
    side_a, side_b = (below, above) if len(above) >= 2 else (above, below)
    return _split_candidates(d, K, side_a, side_b, half, half, {i: eps for i in at})


def _quantile_candidates(d, spec: NullSpec, eps: float):
    f = spec.family
    atoms = spec.alphabet.atoms
    K = len(atoms)
    below = [i for i in range(K) if atoms[i] <= f.q]
    above = [i for i in range(K) if atoms[i] > f.q]
    pairs = [(i1, i2) for i1 in below for i2 in above]
    choice = next(((i1, i2) for i1, i2 in pairs if d[i1] + d[i2] != 0), None)
    if choice is not None:
        i1, i2 = choice
        p = np.full(K, eps)
        p[i1] = f.prob - (len(below) - 1) * eps
        p[i2] = 1.0 - f.prob - (len(above) - 1) * eps
        return [p]
    side_a, side_b = (below, above) if len(above) >= 2 else (above, below)
    ma, mb = (f.prob, 1.0 - f.prob) if side_a is below else (1.0 - f.prob, f.prob)
    return _split_candidates(d, K, side_a, side_b, ma, mb, {})


def _recipe(d, spec: NullSpec):
    f = spec.family
    eps = EPS_START
    for _ in range(EPS_ROUNDS + 1):
        if isinstance(f, Moment):
            cands = [_moment_candidate(d, spec, eps)]
            if cands[0] is None:
                cands = _moment_equal_distance(d, spec)
        elif isinstance(f, Quantile):
            cands = _quantile_candidates(d, spec, eps)
        else:
            return None
        for p in cands:
            if p is not None and _accept(d, p, spec):
                return p
        eps *= EPS_SHRINK
    return None


def _optimize(d, spec: NullSpec, seed: int = 0, restarts: int = OPT_RESTARTS, iters: int = 200):
    """Projected gradient ascent of ``|F|`` inside the family, random restarts."""
    sl = _slice(spec)
    if sl.U.shape[1] == 0:
        return sl.p0 if _accept(d, sl.p0, spec) else None
    starts = sample_null_distributions(spec, restarts, seed)
    for p in starts:
        if np.any(p <= 0):
            continue
        theta = np.linalg.lstsq(sl.U, p - sl.p0, rcond=None)[0]
        for _ in range(iters):
            p = sl.p0 + sl.U @ theta
            if _accept(d, p, spec):
                return p
            F = log_violation(d, p)
            g = sl.U.T @ (d / p) * (1.0 if F >= 0 else -1.0)
            step = sl.U @ g
            neg = step < 0
            # never move more than halfway to the boundary
            smax = np.min(-0.5 * p[neg] / step[neg], initial=1.0)
            if not np.isfinite(smax) or smax <= 0 or not np.any(g):
                break
            theta = theta + smax * g
    return None


def counterexample_distribution(d, spec: NullSpec, seed: int = 0) -> DiscreteDistribution:
    """A family member under which ``x`` and ``y`` have unequal product mass.

    The explicit small-mass recipe is tried first, then the optimizer.
    Raises :class:`NoCounterexampleFound` when neither succeeds, which is
    the expected outcome when ``d`` is in fact a witness.
    """
    d = _as_diff(d, spec)
    p = _recipe(d, spec)
    if p is None:
        p = _optimize(d, spec, seed)
    if p is None:
        note = ""
        if isinstance(spec.family, Moment) and spec.alphabet.K <= 4:
            note = " (alphabets with at most four atoms can admit witnesses under a moment null)"
        elif isinstance(spec.family, Quantile) and spec.alphabet.K <= 2:
            note = " (two-atom alphabets can admit witnesses under a quantile null)"
        raise NoCounterexampleFound(f"no counterexample found for d={tuple(int(v) for v in d)}{note}")
    p = np.asarray(p, dtype=float)
    return DiscreteDistribution(spec.alphabet, tuple(p.tolist()))


# ---------------------------------------------------------------------------
# Witness decisions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WitnessCheck:
    status: str  # "yes" | "no" | "unknown"
    counterexample: DiscreteDistribution | None = None
    note: str = ""

    def __bool__(self):
        return self.status == "yes"


def _as_diff(d, spec: NullSpec) -> np.ndarray:
    if isinstance(d, CountDiff):
        if d.alphabet != spec.alphabet:
            raise AtomNotInAlphabet("count difference is over a different alphabet")
        arr = np.array(d.d, dtype=int)
    else:
        arr = np.array(CountDiff(tuple(d), spec.alphabet).d, dtype=int)
    if not arr.any():
        raise ZeroDiff("d is zero: x is a permutation of y")
    return arr


def _collapse_rule(d: np.ndarray, spec: NullSpec) -> bool:
    """Sum of ``d`` over each forced-equal-mass class must be zero."""
    atoms = spec.alphabet.atoms
    f = spec.family
    if isinstance(f, SymmetricAboutZero):
        return all(d[i] + d[spec.alphabet.index(-a)] == 0 for i, a in enumerate(atoms))
    ia, ib = spec.alphabet.index(f.a), spec.alphabet.index(f.b)
    off = [d[i] for i in range(len(atoms)) if i not in (ia, ib)]
    return not any(off) and d[ia] == -d[ib]


def is_witness(d, spec: NullSpec, seed: int = 0) -> WitnessCheck:
    d = _as_diff(d, spec)
    if isinstance(spec.family, (SymmetricAboutZero, EqualMass)):
        yes = _collapse_rule(d, spec)
    else:
        yes = _algebraic_witness(d, spec)
    if yes:
        return WitnessCheck("yes")
    try:
        return WitnessCheck("no", counterexample_distribution(d, spec, seed))
    except NoCounterexampleFound as exc:
        return WitnessCheck("unknown", note=str(exc))


def _compositions(n: int, K: int):
    """All nonnegative integer vectors of length K summing to n, lexicographic."""
    for bars in itertools.combinations(range(n + K - 1), K - 1):
        prev, out = -1, []
        for b in bars:
            out.append(b - prev - 1)
            prev = b
        out.append(n + K - 2 - prev)
        yield tuple(out)


def realizable_diffs(n: int, K: int) -> dict[tuple, tuple]:
    """Nonzero ``d`` reachable as ``c(x) - c(y)`` with ``|x| = |y| = n``.

    Maps each ``d`` to the lexicographically first count pair realizing it;
    iteration order is ascending in ``d``.
    """
    comps = sorted(_compositions(n, K))
    found: dict[tuple, tuple] = {}
    for c1 in comps:
        for c2 in comps:
            d = tuple(a - b for a, b in zip(c1, c2))
            if any(d):
                found.setdefault(d, (c1, c2))
    return dict(sorted(found.items()))


def _expand(c, atoms) -> tuple:
    return tuple(a for a, k in zip(atoms, c) for _ in range(k))


@dataclass
class LedgerEntry:
    d: tuple
    status: str
    counterexample: tuple | None
    violation: float | None
    residual: float | None
    note: str = ""


@dataclass
class WitnessSearch:
    witness: tuple | None  # (x, y)
    group: ExplicitGroup | None
    ledger: list = field(default_factory=list)
    examined: int = 0

    @property
    def complete(self) -> bool:
        return self.witness is not None or all(e.status == "no" for e in self.ledger)


def find_witness(spec: NullSpec, n: int, budget: int = DEFAULT_BUDGET, seed: int = 0) -> WitnessSearch:
    """Scan count differences in ascending order until a witness turns up.

    ``budget`` bounds the number of differences examined; running out
    raises :class:`BudgetExceeded` carrying the partial search.
    """
    if n < 1:
        raise ValidationError("n must be positive")
    atoms = spec.alphabet.atoms
    result = WitnessSearch(None, None)
    for d, (c1, c2) in realizable_diffs(n, len(atoms)).items():
        if result.examined >= budget:
            raise BudgetExceeded(f"budget of {budget} count differences exhausted", partial=result)
        result.examined += 1
        check = is_witness(d, spec, seed)
        if check.status == "yes":
            x, y = _expand(c1, atoms), _expand(c2, atoms)
            result.witness = (x, y)
            result.group = _group_for(spec, x, y)
            return result
        entry = LedgerEntry(d, check.status, None, None, None, check.note)
        if check.counterexample is not None:
            p = check.counterexample.to_array()
            entry.counterexample = tuple(p.tolist())
            entry.violation = log_violation(d, p)
            entry.residual = spec.residual(p)
        result.ledger.append(entry)
    return result


def _group_for(spec: NullSpec, x, y) -> ExplicitGroup:
    f = spec.family
    if isinstance(f, EqualMass) and len(x) == 1 and {x[0], y[0]} == {f.a, f.b}:
        return atom_swap_group(spec.alphabet, f.a, f.b)
    return witness_to_group(x, y)


@dataclass
class Verdict:
    status: str  # "satisfied" | "not_satisfied" | "inconclusive"
    search: WitnessSearch | None = None
    note: str = ""
    budget_exhausted: bool = False

    @property
    def witness(self):
        return self.search.witness if self.search else None

    @property
    def group(self):
        return self.search.group if self.search else None

    @property
    def ledger(self):
        return self.search.ledger if self.search else []

    def to_json(self) -> dict:
        from .groups import group_to_json

        out = {"status": self.status, "examined": self.search.examined if self.search else 0}
        if self.note:
            out["note"] = self.note
        if self.witness is not None:
            x, y = self.witness
            out["witness"] = {"x": list(x), "y": list(y)}
            out["group"] = group_to_json(self.group)
        if self.ledger:
            out["ledger"] = [
                {"d": list(e.d), "status": e.status,
                 "counterexample": list(e.counterexample) if e.counterexample else None,
                 "violation": e.violation, "residual": e.residual}
                for e in self.ledger
            ]
        return out


def decide_randomization_hypothesis(spec: NullSpec, n: int, budget: int = DEFAULT_BUDGET,
                                    seed: int = 0) -> Verdict:
    """Satisfied with a witness, NotSatisfied with a full ledger, or Inconclusive."""
    try:
        search = find_witness(spec, n, budget, seed)
    except BudgetExceeded as exc:
        return Verdict("inconclusive", exc.partial, note=str(exc), budget_exhausted=True)
    if search.witness is not None:
        return Verdict("satisfied", search)
    unknown = [e for e in search.ledger if e.status != "no"]
    if unknown:
        return Verdict("inconclusive", search, note=f"{len(unknown)} count differences left undecided")
    return Verdict("not_satisfied", search)


def ledger_to_csv(ledger, alphabet: Alphabet) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["d", "status", "counterexample", "log_violation", "constraint_residual"])
    for e in ledger:
        w.writerow([
            json.dumps(list(e.d)),
            e.status,
            json.dumps(dict(zip(alphabet.atoms, e.counterexample))) if e.counterexample else "",
            "" if e.violation is None else repr(e.violation),
            "" if e.residual is None else repr(e.residual),
        ])
    return buf.getvalue()

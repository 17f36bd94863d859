"""Domain types shared across the package.

Everything here is immutable after construction and validated in
``__post_init__``.  Transforms act on the last axis of an array so that a
batch of samples ``(R, n)`` can be pushed through one transform at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

MATRIX_COND_LIMIT = 1e12
MATRIX_EQ_TOL = 1e-9
MASS_TOL = 1e-12


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------


class RandHypError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(RandHypError, ValueError):
    """Input violates a documented invariant."""


class NonFiniteValue(ValidationError):
    pass


class EmptySample(ValidationError):
    pass


class UnsortedAlphabet(ValidationError):
    pass


class MassNotNormalized(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class AtomNotInAlphabet(ValidationError):
    pass


class EqualPoints(ValidationError):
    pass


class SameAtom(ValidationError):
    pass


class SingularMatrix(ValidationError):
    pass


class LevelOutOfRange(ValidationError):
    pass


class NotExplicitGroup(ValidationError):
    pass


class ZeroDiff(ValidationError):
    pass


class CapExceeded(RandHypError):
    """A size, order, or search budget was exhausted."""


class GroupTooLarge(CapExceeded):
    pass


# The group constructors call this SizeCap; same condition.
SizeCap = GroupTooLarge


class OrderExceedsCap(CapExceeded):
    pass


class BudgetExceeded(CapExceeded):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


# ---------------------------------------------------------------------------
# Samples, alphabets, discrete distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Sample:
    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if len(vals) == 0:
            raise EmptySample("a sample needs at least one observation")
        if not all(math.isfinite(v) for v in vals):
            raise NonFiniteValue("sample contains NaN or infinite values")
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return len(self.values)

    def to_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


def as_sample_array(sample) -> np.ndarray:
    """Validate ``sample`` and return it as a 1-d float array."""
    if isinstance(sample, Sample):
        return sample.to_array()
    arr = np.asarray(sample, dtype=float)
    if arr.ndim != 1:
        raise DimensionMismatch(f"sample must be 1-d, got shape {arr.shape}")
    if arr.size == 0:
        raise EmptySample("a sample needs at least one observation")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue("sample contains NaN or infinite values")
    return arr


@dataclass(frozen=True)
class Alphabet:
    """Finite support ``a_1 < ... < a_K``."""

    atoms: tuple[float, ...]

    def __post_init__(self):
        atoms = tuple(float(a) for a in self.atoms)
        if len(atoms) < 2:
            raise ValidationError("an alphabet needs at least two atoms")
        if not all(math.isfinite(a) for a in atoms):
            raise NonFiniteValue("alphabet atoms must be finite")
        if any(b <= a for a, b in zip(atoms, atoms[1:])):
            raise UnsortedAlphabet("atoms must be distinct and strictly increasing")
        object.__setattr__(self, "atoms", atoms)

    @property
    def K(self) -> int:
        return len(self.atoms)

    def __len__(self):
        return len(self.atoms)

    def __iter__(self):
        return iter(self.atoms)

    def index(self, atom: float) -> int:
        try:
            return self.atoms.index(float(atom))
        except ValueError:
            raise AtomNotInAlphabet(f"{atom!r} is not an atom of {self.atoms}") from None

    def is_closed_under_negation(self) -> bool:
        s = set(self.atoms)
        return all(-a in s for a in self.atoms)


@dataclass(frozen=True)
class DiscreteDistribution:
    alphabet: Alphabet
    masses: tuple[float, ...]

    def __post_init__(self):
        masses = tuple(float(m) for m in self.masses)
        if len(masses) != self.alphabet.K:
            raise DimensionMismatch("one mass per atom is required")
        if any(not math.isfinite(m) or m < 0.0 or m > 1.0 for m in masses):
            raise ValidationError("masses must lie in [0, 1]")
        if abs(math.fsum(masses) - 1.0) > MASS_TOL:
            raise MassNotNormalized(f"masses sum to {math.fsum(masses)!r}, not 1")
        object.__setattr__(self, "masses", masses)

    @classmethod
    def from_mapping(cls, masses: Mapping[float, float], alphabet: Alphabet | None = None):
        if alphabet is None:
            alphabet = Alphabet(tuple(sorted(float(a) for a in masses)))
        lookup = {float(a): float(m) for a, m in masses.items()}
        for a in lookup:
            alphabet.index(a)
        return cls(alphabet, tuple(lookup.get(a, 0.0) for a in alphabet.atoms))

    def as_dict(self) -> dict[float, float]:
        return dict(zip(self.alphabet.atoms, self.masses))

    def to_array(self) -> np.ndarray:
        return np.asarray(self.masses)


@dataclass(frozen=True)
class CountDiff:
    """Per-atom occurrence differences ``c(a_i; x) - c(a_i; y)``."""

    d: tuple[int, ...]
    alphabet: Alphabet

    def __post_init__(self):
        d = tuple(int(v) for v in self.d)
        if len(d) != self.alphabet.K:
            raise DimensionMismatch("one count difference per atom is required")
        if sum(d) != 0:
            raise ValidationError("count differences must sum to zero")
        object.__setattr__(self, "d", d)

    def is_zero(self) -> bool:
        return not any(self.d)

    def to_array(self) -> np.ndarray:
        return np.asarray(self.d, dtype=float)


# ---------------------------------------------------------------------------
# Transforms
# ---------------------------------------------------------------------------


def _last_axis(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        raise DimensionMismatch("transforms act on vectors, not scalars")
    return arr


@dataclass(frozen=True)
class SignedPermutation:
    """``(g x)_i = signs[i] * x[perm[i]]``."""

    perm: tuple[int, ...]
    signs: tuple[int, ...]

    def __post_init__(self):
        perm = tuple(int(i) for i in self.perm)
        signs = tuple(int(s) for s in self.signs)
        if len(perm) == 0 or len(perm) != len(signs):
            raise DimensionMismatch("perm and signs must be non-empty and equally long")
        if sorted(perm) != list(range(len(perm))):
            raise ValidationError(f"{perm} is not a permutation of 0..{len(perm) - 1}")
        if any(s not in (-1, 1) for s in signs):
            raise ValidationError("signs must be +1 or -1")
        object.__setattr__(self, "perm", perm)
        object.__setattr__(self, "signs", signs)

    @classmethod
    def identity(cls, n: int) -> "SignedPermutation":
        return cls(tuple(range(n)), (1,) * n)

    @property
    def n(self) -> int:
        return len(self.perm)

    def apply(self, values) -> np.ndarray:
        arr = _last_axis(values)
        if arr.shape[-1] != self.n:
            raise DimensionMismatch(f"transform has n={self.n}, sample has n={arr.shape[-1]}")
        return arr[..., list(self.perm)] * np.asarray(self.signs, dtype=float)

    def compose(self, other: "Transform") -> "Transform":
        """Return ``self o other`` (apply ``other`` first)."""
        if isinstance(other, MatrixTransform):
            return self.to_matrix().compose(other)
        if not isinstance(other, SignedPermutation):
            raise TypeError(f"cannot compose SignedPermutation with {type(other).__name__}")
        if other.n != self.n:
            raise DimensionMismatch("dimension mismatch in composition")
        perm = tuple(other.perm[p] for p in self.perm)
        signs = tuple(s * other.signs[p] for s, p in zip(self.signs, self.perm))
        return SignedPermutation(perm, signs)

    def inverse(self) -> "SignedPermutation":
        inv = [0] * self.n
        for i, p in enumerate(self.perm):
            inv[p] = i
        return SignedPermutation(tuple(inv), tuple(self.signs[inv[j]] for j in range(self.n)))

    def is_identity(self) -> bool:
        return self.perm == tuple(range(self.n)) and all(s == 1 for s in self.signs)

    def key(self):
        return ("signed_permutation", self.perm, self.signs)

    def to_matrix(self) -> "MatrixTransform":
        A = np.zeros((self.n, self.n))
        A[np.arange(self.n), list(self.perm)] = self.signs
        return MatrixTransform(A)


@dataclass(frozen=True, eq=False)
class MatrixTransform:
    """Linear map ``x -> A x``; construction fails for ill-conditioned ``A``."""

    matrix: np.ndarray

    def __post_init__(self):
        A = np.array(self.matrix, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
            raise DimensionMismatch(f"matrix must be square, got shape {A.shape}")
        if not np.all(np.isfinite(A)):
            raise NonFiniteValue("matrix entries must be finite")
        cond = np.linalg.cond(A)
        if not np.isfinite(cond) or cond > MATRIX_COND_LIMIT:
            raise SingularMatrix(f"condition number {cond:.3g} exceeds {MATRIX_COND_LIMIT:g}")
        A.setflags(write=False)
        object.__setattr__(self, "matrix", A)

    @classmethod
    def identity(cls, n: int) -> "MatrixTransform":
        return cls(np.eye(n))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def apply(self, values) -> np.ndarray:
        arr = _last_axis(values)
        if arr.shape[-1] != self.n:
            raise DimensionMismatch(f"matrix is {self.n}x{self.n}, sample has n={arr.shape[-1]}")
        return arr @ self.matrix.T

    def compose(self, other: "Transform") -> "MatrixTransform":
        if isinstance(other, SignedPermutation):
            other = other.to_matrix()
        if not isinstance(other, MatrixTransform):
            raise TypeError(f"cannot compose MatrixTransform with {type(other).__name__}")
        if other.n != self.n:
            raise DimensionMismatch("dimension mismatch in composition")
        return MatrixTransform(self.matrix @ other.matrix)

    def inverse(self) -> "MatrixTransform":
        return MatrixTransform(np.linalg.inv(self.matrix))

    def is_identity(self) -> bool:
        return bool(np.max(np.abs(self.matrix - np.eye(self.n))) < MATRIX_EQ_TOL)

    def key(self):
        q = np.rint(self.matrix / MATRIX_EQ_TOL).astype(np.int64)
        return ("matrix", self.n, tuple(q.ravel().tolist()))

    def close_to(self, other: "MatrixTransform", tol: float = MATRIX_EQ_TOL) -> bool:
        return other.n == self.n and bool(np.max(np.abs(self.matrix - other.matrix)) < tol)

    def __eq__(self, other):
        return isinstance(other, MatrixTransform) and self.close_to(other)

    def __hash__(self):
        return hash(self.key())


@dataclass(frozen=True)
class AtomMap:
    """A bijection on a finite set of atoms, applied to every coordinate."""

    mapping: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if isinstance(self.mapping, Mapping):
            pairs = self.mapping.items()
        else:
            pairs = self.mapping
        pairs = tuple(sorted((float(a), float(b)) for a, b in pairs))
        src = [a for a, _ in pairs]
        dst = sorted(b for _, b in pairs)
        if len(set(src)) != len(src) or src != dst:
            raise ValidationError("an atom map must be a bijection on its atoms")
        object.__setattr__(self, "mapping", pairs)

    @classmethod
    def identity(cls, atoms: Sequence[float]) -> "AtomMap":
        return cls(tuple((a, a) for a in atoms))

    @classmethod
    def swap(cls, atoms: Sequence[float], a: float, b: float) -> "AtomMap":
        a, b = float(a), float(b)
        if a == b:
            raise SameAtom("cannot swap an atom with itself")
        atoms = [float(x) for x in atoms]
        for v in (a, b):
            if v not in atoms:
                raise AtomNotInAlphabet(f"{v!r} is not an atom of {tuple(atoms)}")
        table = {x: x for x in atoms}
        table[a], table[b] = b, a
        return cls(tuple(table.items()))

    @property
    def atoms(self) -> tuple[float, ...]:
        return tuple(a for a, _ in self.mapping)

    def apply(self, values) -> np.ndarray:
        arr = _last_axis(values)
        src = np.array([a for a, _ in self.mapping])
        dst = np.array([b for _, b in self.mapping])
        idx = np.clip(np.searchsorted(src, arr), 0, len(src) - 1)
        if not np.all(src[idx] == arr):
            bad = arr[src[idx] != arr].ravel()[0]
            raise AtomNotInAlphabet(f"value {bad!r} is not in the atom map's domain")
        return dst[idx]

    def compose(self, other: "Transform") -> "AtomMap":
        if not isinstance(other, AtomMap):
            raise TypeError(f"cannot compose AtomMap with {type(other).__name__}")
        if self.atoms != other.atoms:
            raise ValidationError("atom maps act on different atom sets")
        mine = dict(self.mapping)
        return AtomMap(tuple((a, mine[b]) for a, b in other.mapping))

    def inverse(self) -> "AtomMap":
        return AtomMap(tuple((b, a) for a, b in self.mapping))

    def is_identity(self) -> bool:
        return all(a == b for a, b in self.mapping)

    def key(self):
        return ("atom_map", tuple((a, b) for a, b in self.mapping if a != b))


Point = tuple[float, ...]


def _as_point(p) -> Point:
    pt = tuple(float(v) for v in p)
    if len(pt) == 0:
        raise EmptySample("points must have at least one coordinate")
    return pt


@dataclass(frozen=True)
class PointPermutation:
    """Permutes finitely many points of R^n and fixes everything else.

    Only the moved points are stored, so the map never has to be tabulated
    over a (possibly huge) product space.
    """

    mapping: tuple[tuple[Point, Point], ...] = ()

    def __post_init__(self):
        if isinstance(self.mapping, Mapping):
            pairs = self.mapping.items()
        else:
            pairs = self.mapping
        pairs = tuple(sorted((_as_point(a), _as_point(b)) for a, b in pairs if tuple(a) != tuple(b)))
        src = [a for a, _ in pairs]
        if len(set(src)) != len(src) or sorted(src) != sorted(b for _, b in pairs):
            raise ValidationError("a point permutation must be a bijection on its moved points")
        if len({len(a) for a in src}) > 1:
            raise DimensionMismatch("all moved points must have the same length")
        object.__setattr__(self, "mapping", pairs)

    @classmethod
    def identity(cls) -> "PointPermutation":
        return cls(())

    def _table(self) -> dict:
        return dict(self.mapping)

    def apply(self, values) -> np.ndarray:
        arr = _last_axis(values)
        table = self._table()
        if not table:
            return arr.copy()
        out = arr.copy()
        flat = out.reshape(-1, arr.shape[-1])
        for row in flat:
            img = table.get(tuple(row.tolist()))
            if img is not None:
                row[:] = img
        return out

    def compose(self, other: "Transform") -> "PointPermutation":
        if isinstance(other, PointSwap):
            other = other.as_point_permutation()
        if not isinstance(other, PointPermutation):
            raise TypeError(f"cannot compose PointPermutation with {type(other).__name__}")
        mine, theirs = self._table(), other._table()
        pts = set(mine) | set(theirs)
        out = {}
        for p in pts:
            mid = theirs.get(p, p)
            out[p] = mine.get(mid, mid)
        return PointPermutation(tuple(out.items()))

    def inverse(self) -> "PointPermutation":
        return PointPermutation(tuple((b, a) for a, b in self.mapping))

    def is_identity(self) -> bool:
        return not self.mapping

    def key(self):
        return ("point_permutation", self.mapping)


@dataclass(frozen=True)
class PointSwap:
    """Exchanges the two points ``x`` and ``y``; identity elsewhere."""

    x: Point
    y: Point

    def __post_init__(self):
        x, y = _as_point(self.x), _as_point(self.y)
        if len(x) != len(y):
            raise DimensionMismatch("swapped points must have the same length")
        if x == y:
            raise EqualPoints("a point swap needs two distinct points")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def as_point_permutation(self) -> PointPermutation:
        return PointPermutation(((self.x, self.y), (self.y, self.x)))

    def apply(self, values) -> np.ndarray:
        arr = _last_axis(values)
        if arr.shape[-1] != len(self.x):
            raise DimensionMismatch(f"swap acts on n={len(self.x)}, sample has n={arr.shape[-1]}")
        return self.as_point_permutation().apply(arr)

    def compose(self, other: "Transform") -> PointPermutation:
        return self.as_point_permutation().compose(other)

    def inverse(self) -> "PointSwap":
        return self

    def is_identity(self) -> bool:
        return False

    def key(self):
        return self.as_point_permutation().key()


Transform = SignedPermutation | MatrixTransform | AtomMap | PointPermutation | PointSwap


def identity_like(g: Transform) -> Transform:
    """Identity element of the same kind (and dimension) as ``g``."""
    if isinstance(g, SignedPermutation):
        return SignedPermutation.identity(g.n)
    if isinstance(g, MatrixTransform):
        return MatrixTransform.identity(g.n)
    if isinstance(g, AtomMap):
        return AtomMap.identity(g.atoms)
    return PointPermutation.identity()


# ---------------------------------------------------------------------------
# JSON encoding of transforms
# ---------------------------------------------------------------------------


def transform_to_json(g: Transform) -> dict:
    if isinstance(g, SignedPermutation):
        return {"type": "signed_permutation", "perm": list(g.perm), "signs": list(g.signs)}
    if isinstance(g, MatrixTransform):
        return {"type": "matrix", "rows": g.matrix.tolist()}
    if isinstance(g, AtomMap):
        return {"type": "atom_map", "mapping": [[a, b] for a, b in g.mapping]}
    if isinstance(g, PointSwap):
        return {"type": "point_swap", "x": list(g.x), "y": list(g.y)}
    if isinstance(g, PointPermutation):
        return {"type": "point_permutation", "mapping": [[list(a), list(b)] for a, b in g.mapping]}
    raise TypeError(f"not a transform: {g!r}")


def transform_from_json(obj: dict) -> Transform:
    kind = obj.get("type")
    if kind == "signed_permutation":
        return SignedPermutation(tuple(obj["perm"]), tuple(obj["signs"]))
    if kind == "matrix":
        return MatrixTransform(np.asarray(obj["rows"], dtype=float))
    if kind == "atom_map":
        return AtomMap(tuple(tuple(p) for p in obj["mapping"]))
    if kind == "point_swap":
        return PointSwap(tuple(obj["x"]), tuple(obj["y"]))
    if kind == "point_permutation":
        return PointPermutation(tuple((tuple(a), tuple(b)) for a, b in obj["mapping"]))
    raise ValidationError(f"unknown transform type {kind!r}")


# ---------------------------------------------------------------------------
# Intervals and piecewise-constant densities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PiecewiseDensity:
    """Constant height on each of a set of disjoint closed intervals.

    ``width_bound`` optionally records the largest interval width a
    construction was certified for.
    """

    intervals: tuple[tuple[float, float], ...]
    heights: tuple[float, ...]
    width_bound: float | None = field(default=None, compare=False)

    def __post_init__(self):
        ivs = tuple((float(a), float(b)) for a, b in self.intervals)
        hs = tuple(float(h) for h in self.heights)
        if len(ivs) == 0 or len(ivs) != len(hs):
            raise DimensionMismatch("need one height per interval and at least one interval")
        if any(not (math.isfinite(a) and math.isfinite(b)) for a, b in ivs):
            raise NonFiniteValue("interval endpoints must be finite")
        if any(b <= a for a, b in ivs):
            raise ValidationError("each interval must have positive width")
        if any(not math.isfinite(h) or h < 0 for h in hs):
            raise ValidationError("densities must be finite and nonnegative")
        order = sorted(range(len(ivs)), key=lambda i: ivs[i])
        ivs = tuple(ivs[i] for i in order)
        hs = tuple(hs[i] for i in order)
        if any(ivs[i + 1][0] <= ivs[i][1] for i in range(len(ivs) - 1)):
            raise ValidationError("intervals must be pairwise disjoint")
        object.__setattr__(self, "intervals", ivs)
        object.__setattr__(self, "heights", hs)
        if self.mass() <= 0:
            raise ValidationError("density must have positive mass")

    @classmethod
    def uniform(cls, lo: float, hi: float, mass: float = 1.0) -> "PiecewiseDensity":
        return cls(((lo, hi),), (mass / (hi - lo),))

    @property
    def m(self) -> int:
        return len(self.intervals)

    @property
    def max_width(self) -> float:
        return max(b - a for a, b in self.intervals)

    @property
    def lower(self) -> float:
        return self.intervals[0][0]

    @property
    def upper(self) -> float:
        return self.intervals[-1][1]

    def mass(self) -> float:
        return math.fsum(h * (b - a) for (a, b), h in zip(self.intervals, self.heights))

    def raw_moment(self, t: int) -> float:
        """Integral of ``x**t`` against the density (not normalised)."""
        return math.fsum(
            h * (b ** (t + 1) - a ** (t + 1)) / (t + 1) for (a, b), h in zip(self.intervals, self.heights)
        )

    def cdf(self, q: float) -> float:
        """Mass on ``(-inf, q]``."""
        total = []
        for (a, b), h in zip(self.intervals, self.heights):
            if q >= b:
                total.append(h * (b - a))
            elif q > a:
                total.append(h * (q - a))
        return math.fsum(total)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for (a, b), h in zip(self.intervals, self.heights):
            out = np.where((x >= a) & (x <= b), h, out)
        return out

    def scaled(self, c: float) -> "PiecewiseDensity":
        return PiecewiseDensity(self.intervals, tuple(c * h for h in self.heights), self.width_bound)

    def overlaps(self, other: "PiecewiseDensity") -> bool:
        return any(a < d and c < b for a, b in self.intervals for c, d in other.intervals)

    def to_json(self) -> dict:
        out = {"intervals": [list(iv) for iv in self.intervals], "heights": list(self.heights)}
        if self.width_bound is not None:
            out["width_bound"] = self.width_bound
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "PiecewiseDensity":
        return cls(tuple(tuple(iv) for iv in obj["intervals"]), tuple(obj["heights"]), obj.get("width_bound"))

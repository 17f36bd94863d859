"""Group descriptions, constructors, and group-axiom checks.

Three kinds of group description are supported:

* :class:`ExplicitGroup` -- a concrete list of transforms (kept as a packed
  array when every element is a signed permutation or a matrix);
* :class:`GeneratedGroup` -- generators closed under composition on demand;
* :class:`SampledGroup` -- identity followed by i.i.d. random draws.  This is
  a multiset, not a group; the randomization test run on it keeps its level
  because the identity is always included and the draws are independent of
  the data.  Exactness for finite groups is the only guarantee proved.
"""

from __future__ import annotations

import itertools
import math
import zlib
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import (
    MATRIX_EQ_TOL,
    Alphabet,
    AtomMap,
    DimensionMismatch,
    GroupTooLarge,
    MatrixTransform,
    OrderExceedsCap,
    PointPermutation,
    PointSwap,
    SignedPermutation,
    Transform,
    ValidationError,
    identity_like,
    transform_from_json,
    transform_to_json,
)

DEFAULT_CAP = 10**6
MAX_FULL_PERMUTATION_N = 9

BLOCK_ROTATION = np.array([[2.0, -1.0, 2.0], [2.0, 2.0, -1.0], [-1.0, 2.0, 2.0]]) / 3.0


def derive_seed(seed: int | None, label: str) -> int:
    """Child seed for ``label``; adding new labels never shifts old streams."""
    base = 0 if seed is None else int(seed)
    ss = np.random.SeedSequence(entropy=base, spawn_key=(zlib.crc32(label.encode()),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


# ---------------------------------------------------------------------------
# Packed element stacks
# ---------------------------------------------------------------------------


class _PermStack:
    def __init__(self, perms: np.ndarray, signs: np.ndarray):
        self.perms = np.ascontiguousarray(perms, dtype=np.intp)
        self.signs = np.ascontiguousarray(signs, dtype=float)
        self.n = self.perms.shape[1]
        self.unsigned = bool(np.all(self.signs == 1.0))

    def __len__(self):
        return self.perms.shape[0]

    def orbit(self, X: np.ndarray) -> np.ndarray:
        out = X[..., self.perms]
        return out if self.unsigned else out * self.signs

    def element(self, i: int) -> SignedPermutation:
        return SignedPermutation(tuple(self.perms[i].tolist()), tuple(int(s) for s in self.signs[i]))


class _MatrixStack:
    def __init__(self, mats: np.ndarray):
        self.mats = np.ascontiguousarray(mats, dtype=float)
        self.n = self.mats.shape[1]

    def __len__(self):
        return self.mats.shape[0]

    def orbit(self, X: np.ndarray) -> np.ndarray:
        return np.einsum("...j,mij->...mi", X, self.mats)

    def element(self, i: int) -> MatrixTransform:
        return MatrixTransform(self.mats[i])


class _ListStack:
    def __init__(self, elements: Sequence[Transform]):
        self.elements = tuple(elements)

    def __len__(self):
        return len(self.elements)

    def orbit(self, X: np.ndarray) -> np.ndarray:
        return np.stack([g.apply(X) for g in self.elements], axis=-2)

    def element(self, i: int) -> Transform:
        return self.elements[i]


def _pack(elements: Sequence[Transform]):
    if elements and all(isinstance(g, SignedPermutation) for g in elements):
        n = elements[0].n
        if any(g.n != n for g in elements):
            raise DimensionMismatch("group elements act on different dimensions")
        return _PermStack(np.array([g.perm for g in elements]), np.array([g.signs for g in elements]))
    if elements and all(isinstance(g, MatrixTransform) for g in elements):
        n = elements[0].n
        if any(g.n != n for g in elements):
            raise DimensionMismatch("group elements act on different dimensions")
        return _MatrixStack(np.stack([g.matrix for g in elements]))
    return _ListStack(elements)


# ---------------------------------------------------------------------------
# Group descriptions
# ---------------------------------------------------------------------------


class ExplicitGroup:
    """A finite list of transforms, identity included.

    Closure is not checked at construction; run :func:`verify_group_axioms`
    for that.
    """

    def __init__(self, elements: Iterable[Transform] | None = None, *, stack=None, source: dict | None = None):
        if stack is None:
            elements = tuple(elements or ())
            if not elements:
                raise ValidationError("a group needs at least one element")
            stack = _pack(elements)
        self._stack = stack
        self._elements = None
        self.source = source

    def __len__(self):
        return len(self._stack)

    @property
    def M(self) -> int:
        return len(self._stack)

    @property
    def elements(self) -> tuple[Transform, ...]:
        if self._elements is None:
            self._elements = tuple(self._stack.element(i) for i in range(len(self._stack)))
        return self._elements

    def __iter__(self):
        return iter(self.elements)

    def __getitem__(self, i):
        return self._stack.element(i) if self._elements is None else self._elements[i]

    def orbit(self, X) -> np.ndarray:
        """Return ``g x`` for every element: shape ``X.shape[:-1] + (M, n)``."""
        X = np.asarray(X, dtype=float)
        n = getattr(self._stack, "n", None)
        if n is not None and X.shape[-1] != n:
            raise DimensionMismatch(f"group acts on n={n}, sample has n={X.shape[-1]}")
        return self._stack.orbit(X)

    def realize(self, cap: int = DEFAULT_CAP) -> "ExplicitGroup":
        if len(self) > cap:
            raise GroupTooLarge(f"group has {len(self)} elements, cap is {cap}")
        return self

    def __repr__(self):
        kind = (self.source or {}).get("kind", "explicit")
        return f"ExplicitGroup(kind={kind!r}, M={len(self)})"


@dataclass(frozen=True)
class GeneratedGroup:
    generators: tuple
    closure_cap: int = DEFAULT_CAP
    source: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        gens = tuple(self.generators)
        if not gens:
            raise ValidationError("need at least one generator")
        if self.closure_cap < 1:
            raise ValidationError("closure_cap must be positive")
        object.__setattr__(self, "generators", gens)

    def realize(self, cap: int | None = None) -> ExplicitGroup:
        cap = self.closure_cap if cap is None else min(cap, self.closure_cap)
        elems = closure(self.generators, cap)
        return ExplicitGroup(elems, source=self.source)


SAMPLERS = ("permutation", "sign_change", "haar")


@dataclass(frozen=True)
class SampledGroup:
    """Identity plus ``draws - 1`` i.i.d. random transforms.

    With ``include_identity=False`` all ``draws`` elements are random and
    the level guarantee is lost; the flag exists for studying that effect.
    """

    sampler: str
    n: int
    draws: int
    seed: int | None = 0
    include_identity: bool = True

    def __post_init__(self):
        if self.sampler not in SAMPLERS:
            raise ValidationError(f"unknown sampler {self.sampler!r}; choose from {SAMPLERS}")
        if self.n < 1 or self.draws < 1:
            raise ValidationError("n and draws must be positive")

    def spawn(self, k: int) -> list["SampledGroup"]:
        """``k`` specs with independent deterministic streams."""
        children = np.random.SeedSequence(0 if self.seed is None else self.seed).spawn(k)
        return [
            SampledGroup(self.sampler, self.n, self.draws, int(c.generate_state(1, dtype=np.uint64)[0]),
                         self.include_identity)
            for c in children
        ]

    def realize(self, cap: int = DEFAULT_CAP) -> ExplicitGroup:
        if self.draws > cap:
            raise GroupTooLarge(f"{self.draws} draws requested, cap is {cap}")
        rng = np.random.default_rng(self.seed)
        n, k = self.n, self.draws - (1 if self.include_identity else 0)
        if self.sampler == "haar":
            mats = [haar_orthogonal(n, rng) for _ in range(k)]
            if self.include_identity:
                mats.insert(0, np.eye(n))
            stack = _MatrixStack(np.stack(mats))
        else:
            if self.sampler == "permutation":
                perms = rng.permuted(np.tile(np.arange(n), (k, 1)), axis=1)
                signs = np.ones((k, n))
            else:
                perms = np.tile(np.arange(n), (k, 1))
                signs = rng.choice(np.array([-1.0, 1.0]), size=(k, n))
            if self.include_identity:
                perms = np.vstack([np.arange(n), perms])
                signs = np.vstack([np.ones(n), signs])
            stack = _PermStack(perms, signs)
        return ExplicitGroup(stack=stack, source=group_to_json(self))


GroupSpec = ExplicitGroup | GeneratedGroup | SampledGroup


def realize_group(group, cap: int = DEFAULT_CAP) -> ExplicitGroup:
    if isinstance(group, (ExplicitGroup, GeneratedGroup, SampledGroup)):
        return group.realize(cap)
    if isinstance(group, (list, tuple)):
        return ExplicitGroup(group).realize(cap)
    raise ValidationError(f"not a group description: {group!r}")


# ---------------------------------------------------------------------------
# Membership and closure
# ---------------------------------------------------------------------------


def _keys(g: Transform):
    """Canonical key(s).  Matrices get a second, half-cell-shifted grid so
    entries sitting on a rounding boundary still collide with their twin."""
    if isinstance(g, MatrixTransform):
        shifted = np.floor(g.matrix / MATRIX_EQ_TOL).astype(np.int64)
        return (g.key(), ("matrix_shift", g.n, tuple(shifted.ravel().tolist())))
    return (g.key(),)


class _Index:
    def __init__(self):
        self.table = {}
        self.items = []

    def find(self, g: Transform) -> int | None:
        for k in _keys(g):
            i = self.table.get(k)
            if i is not None:
                h = self.items[i]
                if not isinstance(g, MatrixTransform) or g.close_to(h):
                    return i
        return None

    def add(self, g: Transform) -> int:
        i = len(self.items)
        self.items.append(g)
        for k in _keys(g):
            self.table.setdefault(k, i)
        return i


def snap_rational(A: np.ndarray, max_den: int = 64, tol: float = 1e-10) -> np.ndarray:
    """Replace entries within ``tol`` of a fraction ``p/q`` (``q <= max_den``) by that fraction.

    Products of matrices with simple rational entries pick up rounding
    noise; without snapping, ``A @ A`` for an order-6 rotation is only
    approximately a permutation, which breaks exact statistic ties.
    """
    dens = np.arange(1, max_den + 1, dtype=float)
    P = A[..., None] * dens
    R = np.rint(P)
    ok = np.abs(P - R) < tol
    first = np.argmax(ok, axis=-1)
    snapped = np.take_along_axis(R, first[..., None], -1)[..., 0] / dens[first]
    return np.where(ok.any(axis=-1), snapped, A)


def _compose(g: Transform, h: Transform) -> Transform:
    c = g.compose(h)
    if isinstance(c, MatrixTransform):
        c = MatrixTransform(snap_rational(c.matrix))
    return c


def closure(generators: Sequence[Transform], cap: int = DEFAULT_CAP) -> list[Transform]:
    """Breadth-first closure of ``generators`` under composition."""
    gens = list(generators)
    index = _Index()
    index.add(identity_like(gens[0]))
    frontier = list(index.items)
    while frontier:
        fresh = []
        for h in frontier:
            for g in gens:
                c = _compose(g, h)
                if index.find(c) is None:
                    index.add(c)
                    fresh.append(c)
                    if len(index.items) > cap:
                        raise GroupTooLarge(f"closure exceeds the cap of {cap} elements")
        frontier = fresh
    return index.items


@dataclass
class GroupAxiomReport:
    size: int
    has_identity: bool
    closure_violations: list = field(default_factory=list)
    missing_inverses: list = field(default_factory=list)

    @property
    def passes(self) -> bool:
        return self.has_identity and not self.closure_violations and not self.missing_inverses

    def summary(self) -> str:
        if self.passes:
            return f"group of order {self.size}: identity, closure and inverses verified"
        parts = []
        if not self.has_identity:
            parts.append("identity missing")
        if self.closure_violations:
            parts.append(f"{len(self.closure_violations)} non-closed products")
        if self.missing_inverses:
            parts.append(f"{len(self.missing_inverses)} missing inverses")
        return "; ".join(parts)


def _verify_perm_stack(stack: _PermStack, max_report: int) -> GroupAxiomReport:
    perms, signs = stack.perms, stack.signs
    M, n = perms.shape
    codes = np.concatenate([perms, signs.astype(np.intp)], axis=1)
    members = {row.tobytes() for row in codes}
    ident = np.concatenate([np.arange(n), np.ones(n, dtype=np.intp)]).astype(np.intp)
    report = GroupAxiomReport(M, ident.tobytes() in members)
    for i in range(M):
        # compose g_i o g_j for all j at once
        cp = perms[:, perms[i]]
        cs = signs[i] * signs[:, perms[i]]
        comp = np.concatenate([cp, cs.astype(np.intp)], axis=1)
        for j in range(M):
            if comp[j].tobytes() not in members:
                report.closure_violations.append((i, j))
                if len(report.closure_violations) >= max_report:
                    return report
        inv = stack.element(i).inverse()
        code = np.concatenate([np.array(inv.perm), np.array(inv.signs)]).astype(np.intp)
        if code.tobytes() not in members:
            report.missing_inverses.append(i)
    return report


def verify_group_axioms(group, max_report: int = 100) -> GroupAxiomReport:
    """Check identity membership, closure of pairwise products, and inverses.

    Returns a report instead of raising.  At most ``max_report`` closure
    violations are recorded.
    """
    if isinstance(group, (GeneratedGroup, SampledGroup)):
        group = group.realize()
    elif not isinstance(group, ExplicitGroup):
        group = ExplicitGroup(group)
    if isinstance(group._stack, _PermStack):
        return _verify_perm_stack(group._stack, max_report)
    elems = group.elements
    index = _Index()
    for g in elems:
        index.add(g)
    report = GroupAxiomReport(len(elems), any(g.is_identity() for g in elems))
    for i, g in enumerate(elems):
        for j, h in enumerate(elems):
            if index.find(g.compose(h)) is None:
                report.closure_violations.append((i, j))
                if len(report.closure_violations) >= max_report:
                    return report
        if index.find(g.inverse()) is None:
            report.missing_inverses.append(i)
    return report


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------


def sign_change_group(n: int, subset: Iterable[int] | None = None, cap: int = DEFAULT_CAP) -> ExplicitGroup:
    """All sign flips on ``subset`` (0-based indices; default: every coordinate)."""
    if n < 1:
        raise ValidationError("n must be positive")
    idx = sorted(set(range(n) if subset is None else (int(i) for i in subset)))
    if any(i < 0 or i >= n for i in idx):
        raise ValidationError(f"subset indices must lie in 0..{n - 1}")
    if 2 ** len(idx) > cap:
        raise GroupTooLarge(f"2^{len(idx)} sign vectors exceed the cap of {cap}; use a sampled group")
    flips = np.array(list(itertools.product([1.0, -1.0], repeat=len(idx))), dtype=float).reshape(-1, len(idx))
    signs = np.ones((len(flips), n))
    signs[:, idx] = flips
    perms = np.tile(np.arange(n), (len(flips), 1))
    source = {"kind": "sign_change", "n": n}
    if subset is not None:
        source["subset"] = idx
    return ExplicitGroup(stack=_PermStack(perms, signs), source=source)


def permutation_group(n: int, mode: str = "auto", draws: int = 1000, seed: int | None = 0,
                      max_full_n: int = MAX_FULL_PERMUTATION_N):
    """Full symmetric group for ``n <= max_full_n``, otherwise sampled.

    ``mode`` is ``"auto"``, ``"full"`` or ``"sampled"``.
    """
    if n < 1:
        raise ValidationError("n must be positive")
    if mode == "auto":
        mode = "full" if n <= max_full_n else "sampled"
    if mode == "full":
        if n > max_full_n:
            raise GroupTooLarge(f"{n}! permutations exceed the full-group limit n <= {max_full_n}")
        perms = np.array(list(itertools.permutations(range(n))), dtype=np.intp)
        return ExplicitGroup(stack=_PermStack(perms, np.ones(perms.shape)),
                             source={"kind": "permutation", "n": n, "mode": "full"})
    if mode == "sampled":
        return SampledGroup("permutation", n, draws, seed)
    raise ValidationError(f"unknown permutation mode {mode!r}")


def generate_cyclic(f: Transform, cap: int = DEFAULT_CAP) -> ExplicitGroup:
    """``{f^0, ..., f^(r-1)}`` where ``r`` is the order of ``f``."""
    elems = [identity_like(f)]
    cur = f
    while not cur.is_identity():
        elems.append(cur)
        if len(elems) > cap:
            raise OrderExceedsCap(f"order of the generator exceeds {cap}")
        cur = _compose(f, cur)
    return ExplicitGroup(elems, source={"kind": "cyclic", "generator": transform_to_json(f), "cap": cap})


def witness_to_group(x, y) -> ExplicitGroup:
    """Two-element group ``{identity, swap(x, y)}``."""
    swap = PointSwap(tuple(x), tuple(y))
    return ExplicitGroup([PointPermutation.identity(), swap],
                         source={"kind": "explicit",
                                 "elements": [transform_to_json(PointPermutation.identity()),
                                              transform_to_json(swap)]})


def atom_swap_group(alphabet, a: float, b: float) -> ExplicitGroup:
    """Identity plus the coordinatewise exchange of atoms ``a`` and ``b``."""
    atoms = alphabet.atoms if isinstance(alphabet, Alphabet) else tuple(float(v) for v in alphabet)
    swap = AtomMap.swap(atoms, a, b)
    return ExplicitGroup([AtomMap.identity(atoms), swap],
                         source={"kind": "atom_swap", "alphabet": list(atoms), "atoms": [float(a), float(b)]})


def haar_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Orthogonal matrix from the rotation-invariant (Haar) distribution."""
    Z = rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    return Q * np.sign(np.diag(R))


def haar_orthogonal_sampler(n: int, M: int, seed: int | None = 0) -> SampledGroup:
    if n < 2 or M < 2:
        raise ValidationError("need n >= 2 and M >= 2")
    return SampledGroup("haar", n, M, seed)


def block_rotation_group(n: int, mode: str = "cyclic_per_block", cap: int = DEFAULT_CAP) -> GeneratedGroup:
    """Block-diagonal copies of the 3x3 rotation fixing ``(1, 1, 1)``.

    ``cyclic_per_block`` rotates each block independently (``6^(n/3)``
    elements); ``with_block_permutations`` also lets whole blocks trade
    places.
    """
    if n < 3 or n % 3:
        raise ValidationError("n must be a positive multiple of 3")
    if mode not in ("cyclic_per_block", "with_block_permutations"):
        raise ValidationError(f"unknown block rotation mode {mode!r}")
    nb = n // 3
    gens = []
    for b in range(nb):
        G = np.eye(n)
        G[3 * b:3 * b + 3, 3 * b:3 * b + 3] = BLOCK_ROTATION
        gens.append(MatrixTransform(G))
    if mode == "with_block_permutations" and nb > 1:
        for perm in ([1, 0] + list(range(2, nb)), list(range(1, nb)) + [0]):
            P = np.zeros((n, n))
            for dst, src in enumerate(perm):
                P[3 * dst:3 * dst + 3, 3 * src:3 * src + 3] = np.eye(3)
            gens.append(MatrixTransform(P))
    return GeneratedGroup(tuple(gens), cap, source={"kind": "block_rotation", "n": n, "mode": mode, "cap": cap})


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------


def group_to_json(group) -> dict:
    if isinstance(group, SampledGroup):
        return {"kind": "sampled", "sampler": group.sampler, "n": group.n, "draws": group.draws,
                "seed": group.seed, "include_identity": group.include_identity}
    if getattr(group, "source", None):
        return dict(group.source)
    if isinstance(group, GeneratedGroup):
        return {"kind": "generated", "generators": [transform_to_json(g) for g in group.generators],
                "cap": group.closure_cap}
    if isinstance(group, ExplicitGroup):
        return {"kind": "explicit", "elements": [transform_to_json(g) for g in group.elements]}
    raise ValidationError(f"cannot serialise {group!r}")


def group_from_json(obj, n: int | None = None, seed: int | None = None):
    """Build a group spec from its JSON form.

    ``n`` and ``seed`` fill in parameters the JSON leaves out (the CLI takes
    ``n`` from the sample and the seed from ``--seed``).
    """
    if isinstance(obj, str):
        obj = {"kind": obj}
    kind = obj.get("kind")
    n = obj.get("n", n)
    seed = obj.get("seed", seed)

    def need_n():
        if n is None:
            raise ValidationError(f"group kind {kind!r} needs n")
        return int(n)

    if kind == "sign_change":
        return sign_change_group(need_n(), obj.get("subset"), obj.get("cap", DEFAULT_CAP))
    if kind == "permutation":
        return permutation_group(need_n(), obj.get("mode", "auto"), obj.get("draws", 1000),
                                 derive_seed(seed, "permutation") if "seed" not in obj else seed)
    if kind == "cyclic":
        return generate_cyclic(transform_from_json(obj["generator"]), obj.get("cap", DEFAULT_CAP))
    if kind == "atom_swap":
        a, b = obj["atoms"]
        return atom_swap_group(obj["alphabet"], a, b)
    if kind == "haar":
        return haar_orthogonal_sampler(need_n(), obj.get("draws", 1000),
                                       derive_seed(seed, "haar") if "seed" not in obj else seed)
    if kind == "block_rotation":
        return block_rotation_group(need_n(), obj.get("mode", "cyclic_per_block"), obj.get("cap", DEFAULT_CAP))
    if kind == "explicit":
        return ExplicitGroup([transform_from_json(e) for e in obj["elements"]], source=dict(obj))
    if kind == "generated":
        return GeneratedGroup(tuple(transform_from_json(e) for e in obj["generators"]),
                              obj.get("cap", DEFAULT_CAP), source=dict(obj))
    if kind == "sampled":
        return SampledGroup(obj["sampler"], need_n(), obj.get("draws", 1000), seed,
                            obj.get("include_identity", True))
    raise ValidationError(f"unknown group kind {kind!r}")

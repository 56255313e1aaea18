"""Elements of the full group over a finite-atom base, at working depth m.

A FieldElement assigns one depth-m LevelPerm to every atom of the base; the
ambient relation never mixes atoms, so this is the whole full group at this
resolution.  Three exact metrics live here:

    d_1(f, g)  = sum_y  nu(y) * d_u(f(y), g(y))      (integral; equals the
                 uniform metric of the product space)
    d_C(f, g)  = max_y  d_u(f(y), g(y))              (sup over atoms)

Both are bi-invariant.  Elements carry an ErrorBudget that adds under
composition, so chains built from odometer approximants keep a rigorous
bound on their distance to the ideal objects they stand for.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import NotInFullGroupError
from .measure import BaseSpace, CondMeasure, ProductSet
from .perms import (
    ErrorBudget,
    LevelPerm,
    d_u as perm_d_u,
    embed,
    finite_odometer,
    odometer_approx,
)


class FieldElement:
    """An atom-indexed family of LevelPerms at a common depth."""

    __slots__ = ("base", "depth", "perms", "budget")

    def __init__(
        self,
        base: BaseSpace,
        perms: Sequence[LevelPerm],
        budget: ErrorBudget = ErrorBudget.zero(),
    ):
        perms = tuple(perms)
        if len(perms) != len(base.atoms):
            raise ValueError("one permutation per atom required")
        depth = max(p.depth for p in perms)
        perms = tuple(embed(p, depth) for p in perms)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "perms", perms)
        object.__setattr__(self, "budget", budget)

    def __setattr__(self, *a):
        raise AttributeError("FieldElement is immutable")

    # -- construction ---------------------------------------------------------
    @staticmethod
    def identity(base: BaseSpace, depth: int) -> "FieldElement":
        ident = LevelPerm.identity(depth)
        return FieldElement(base, [ident] * len(base.atoms))

    @staticmethod
    def constant(base: BaseSpace, p: LevelPerm,
                 budget: ErrorBudget = ErrorBudget.zero()) -> "FieldElement":
        return FieldElement(base, [p] * len(base.atoms), budget)

    def perm(self, label: str) -> LevelPerm:
        return self.perms[self.base.labels.index(label)]

    def embed_to(self, depth: int) -> "FieldElement":
        if depth == self.depth:
            return self
        return FieldElement(
            self.base, [embed(p, depth) for p in self.perms], self.budget
        )

    # -- group structure --------------------------------------------------------
    def _check_base(self, other: "FieldElement"):
        if self.base != other.base:
            raise ValueError("base space mismatch")

    def __mul__(self, other: "FieldElement") -> "FieldElement":
        self._check_base(other)
        m = max(self.depth, other.depth)
        a, b = self.embed_to(m), other.embed_to(m)
        return FieldElement(
            self.base,
            [p * q for p, q in zip(a.perms, b.perms)],
            self.budget + other.budget,
        )

    def inverse(self) -> "FieldElement":
        return FieldElement(self.base, [p.inverse() for p in self.perms], self.budget)

    def __pow__(self, e: int) -> "FieldElement":
        return FieldElement(
            self.base, [p ** e for p in self.perms], self.budget.times(e)
        )

    def __eq__(self, other):
        return (
            isinstance(other, FieldElement)
            and self.base == other.base
            and self.depth == other.depth
            and all(p == q for p, q in zip(self.perms, other.perms))
        )

    def __hash__(self):
        return hash((self.base.labels, self.perms))

    def is_identity(self) -> bool:
        return all(p.is_identity() for p in self.perms)

    # -- supports ----------------------------------------------------------------
    def support(self) -> ProductSet:
        return ProductSet(
            self.base, self.depth, tuple(p.support().leaves for p in self.perms)
        )

    def to_lines(self) -> list[str]:
        from .perms import perm_to_line

        out = []
        for label, p in zip(self.base.labels, self.perms):
            out.append(f"atom={label} {perm_to_line(p)}")
        return out


def on_atoms(
    base: BaseSpace, atoms: Iterable[str], p: LevelPerm,
    budget: ErrorBudget = ErrorBudget.zero(),
) -> FieldElement:
    """The element acting as ``p`` on the given atoms and as the identity
    elsewhere.  A group homomorphism in ``p``; scales d_u by the measure of
    the atom set under d_1."""
    atoms = set(atoms)
    if not atoms:
        raise ValueError("atom set must be nonempty")
    unknown = atoms - set(base.labels)
    if unknown:
        raise ValueError(f"unknown atoms: {sorted(unknown)}")
    ident = LevelPerm.identity(p.depth)
    return FieldElement(
        base, [p if a in atoms else ident for a in base.labels], budget
    )


def odometer_field(base: BaseSpace, depth: int) -> FieldElement:
    """The odometer approximant on every atom, with its 2^-depth budget."""
    t, budget = odometer_approx(depth)
    return FieldElement.constant(base, t, budget)


# -- metrics ---------------------------------------------------------------------

def _per_atom_distances(f: FieldElement, g: FieldElement) -> list[Fraction]:
    f._check_base(g)
    m = max(f.depth, g.depth)
    f, g = f.embed_to(m), g.embed_to(m)
    return [perm_d_u(p, q) for p, q in zip(f.perms, g.perms)]


def d_1(f: FieldElement, g: FieldElement) -> Fraction:
    """Integral metric; on the product space this is the uniform metric."""
    ds = _per_atom_distances(f, g)
    return sum(
        (w * d for (_, w), d in zip(f.base.atoms, ds)), Fraction(0)
    )


def d_u(f: FieldElement, g: FieldElement) -> Fraction:
    """Uniform metric of the product space (coincides with d_1 here)."""
    return d_1(f, g)


def d_C(f: FieldElement, g: FieldElement) -> Fraction:
    """Sup over atoms of the per-atom uniform distance."""
    return max(_per_atom_distances(f, g))


def cond_support(f: FieldElement) -> CondMeasure:
    """Per-atom mass of the support."""
    return CondMeasure(
        f.base, tuple(p.support_measure() for p in f.perms)
    )


# -- involution paths ----------------------------------------------------------

def involution_path(f: FieldElement, t: Fraction) -> FieldElement:
    """Point on the canonical path from the identity to the involution ``f``.

    On each atom the support splits into 2-cycles; the lower leaf of every
    2-cycle forms the fundamental domain (sorted).  The path element acts as
    ``f`` on the first floor(t * domain size) domain leaves and their
    images, and fixes everything else; t=0 gives the identity and t=1 gives
    ``f``.  Along a grid where t * (domain size) stays integral the distance
    d_C between path points is bounded by |t1 - t2| exactly.
    """
    t = Fraction(t)
    if not 0 <= t <= 1:
        raise ValueError("t must lie in [0, 1]")
    den = t.denominator
    if den & (den - 1):
        raise ValueError("t must be a dyadic rational")
    if not (f * f).is_identity():
        raise ValueError("involution required")
    perms = []
    for p in f.perms:
        img = p.images
        ar = np.arange(1 << p.depth, dtype=img.dtype)
        moved = np.nonzero(img != ar)[0]
        domain = sorted(int(x) for x in moved if int(img[x]) > int(x))
        count = int(t * len(domain))
        out = ar.copy()
        for x in domain[:count]:
            y = int(img[x])
            out[x], out[y] = y, x
        perms.append(LevelPerm(p.depth, out, _trusted=True))
    return FieldElement(f.base, perms, f.budget)


# -- signature ------------------------------------------------------------------

def _perm_parity(mapping: dict[int, int]) -> int:
    seen = set()
    swaps = 0
    for start in mapping:
        if start in seen:
            continue
        size = 0
        x = start
        while x not in seen:
            seen.add(x)
            size += 1
            x = mapping[x]
        swaps += size - 1
    return -1 if swaps % 2 else 1


def signature_morphism(f: FieldElement, partition, atom: str, leaf: int) -> int:
    """Parity of ``f`` restricted to the chosen class of a partition.

    ``f`` must preserve every class of the partition (on every atom); the
    chosen class, identified by any of its leaves, must have size >= 2 so
    that the morphism onto {+1, -1} is surjective.
    """
    for label, p in zip(f.base.labels, f.perms):
        for cls in partition.classes(label):
            img_cls = {int(p.images[x]) for x in cls}
            if img_cls != set(cls):
                raise NotInFullGroupError(
                    f"element does not preserve class {sorted(cls)} on atom {label!r}"
                )
    cls = partition.class_of(atom, leaf)
    if len(cls) < 2:
        raise ValueError("chosen class must have size >= 2")
    p = f.perm(atom)
    mapping = {x: int(p.images[x]) for x in cls}
    return _perm_parity(mapping)


def parse_element_lines(base: BaseSpace, lines: Iterable[str]) -> FieldElement:
    """Read the one-perm-line-per-atom serialization back into an element."""
    from .perms import parse_perm_line

    mapping: dict[str, LevelPerm] = {}
    budget = ErrorBudget.zero()
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("budget"):
            from .words import parse_fraction

            budget = ErrorBudget(parse_fraction(line.split("=", 1)[1]))
            continue
        if not line.startswith("atom="):
            continue
        head, rest = line.split(None, 1)
        label = head.split("=", 1)[1]
        mapping[label] = parse_perm_line(rest)
    missing = set(base.labels) - set(mapping)
    if missing:
        raise ValueError(f"element file missing atoms: {sorted(missing)}")
    return FieldElement(base, [mapping[a] for a in base.labels], budget)

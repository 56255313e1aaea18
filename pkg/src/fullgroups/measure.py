"""Exact measure algebra over a finite-atom base crossed with dyadic cylinders.

The ambient space is Y x 2^N where Y is a finite atomic probability space
and 2^N carries the balanced Bernoulli measure.  Everything is truncated at
a working depth m: a set is a union of (atom, depth-m cylinder) pieces, so
every measure and conditional measure is an exact dyadic rational.  No
floating point appears anywhere in this module.

Determinism: whenever a choice of leaves has to be made (splitting,
matching), the lowest leaf labels are taken first, so repeated runs agree
bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from .errors import InfeasibleError, ResolutionError
from .words import check_word, format_fraction, word_to_leaf, zeros


@dataclass(frozen=True)
class BaseSpace:
    """Finite atomic base: labelled atoms with exact positive weights summing to 1."""

    atoms: tuple[tuple[str, Fraction], ...]

    def __post_init__(self):
        labels = [a for a, _ in self.atoms]
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate atom labels")
        if not self.atoms:
            raise ValueError("base space needs at least one atom")
        for label, w in self.atoms:
            if not (0 < w <= 1):
                raise ValueError(f"atom {label!r} has weight {w} outside (0,1]")
        if sum(w for _, w in self.atoms) != 1:
            raise ValueError("atom weights must sum to exactly 1")

    @staticmethod
    def of(*atoms: tuple[str, Fraction | int | str]) -> "BaseSpace":
        return BaseSpace(tuple((a, Fraction(w)) for a, w in atoms))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(a for a, _ in self.atoms)

    def weight(self, label: str) -> Fraction:
        for a, w in self.atoms:
            if a == label:
                return w
        raise KeyError(label)


def _label_index(base: BaseSpace, label: str) -> int:
    return base.labels.index(label)


@dataclass(frozen=True)
class DyadicSet:
    """A union of depth-m cylinders, stored as the set of their leaf labels."""

    depth: int
    leaves: frozenset[int]

    def __post_init__(self):
        if self.depth < 0:
            raise ValueError("depth must be >= 0")
        n = 1 << self.depth
        if any(not 0 <= l < n for l in self.leaves):
            raise ValueError("leaf label out of range for depth")

    @property
    def measure(self) -> Fraction:
        return Fraction(len(self.leaves), 1 << self.depth)

    def refine(self, depth: int) -> "DyadicSet":
        """Re-express at a finer depth; measure is preserved exactly."""
        if depth < self.depth:
            raise ValueError("refine target shallower than current depth")
        step = 1 << self.depth
        reps = 1 << (depth - self.depth)
        leaves = frozenset(l + k * step for l in self.leaves for k in range(reps))
        return DyadicSet(depth, leaves)

    def coarsen(self, depth: int) -> "DyadicSet":
        """Inverse of refine; fails unless the set is a union of depth-``depth``
        cylinders."""
        if depth > self.depth:
            raise ValueError("coarsen target finer than current depth")
        step = 1 << depth
        reps = 1 << (self.depth - depth)
        out = set()
        for l in self.leaves:
            out.add(l % step)
        for l in out:
            if any(l + k * step not in self.leaves for k in range(reps)):
                raise ResolutionError(
                    f"set is not a union of depth-{depth} cylinders",
                    required_depth=self.depth,
                )
        return DyadicSet(depth, frozenset(out))

    def _binop(self, other: "DyadicSet", op) -> "DyadicSet":
        if self.depth != other.depth:
            raise ValueError("depth mismatch; refine explicitly first")
        return DyadicSet(self.depth, frozenset(op(self.leaves, other.leaves)))

    def __or__(self, other):
        return self._binop(other, frozenset.union)

    def __and__(self, other):
        return self._binop(other, frozenset.intersection)

    def __sub__(self, other):
        return self._binop(other, frozenset.difference)

    def __le__(self, other):
        if self.depth != other.depth:
            raise ValueError("depth mismatch; refine explicitly first")
        return self.leaves <= other.leaves


def cylinder(word: str, depth: int) -> DyadicSet:
    """All depth-``depth`` cylinders extending ``word``; measure 2^-len(word)."""
    check_word(word)
    if depth < len(word):
        raise ValueError(f"depth {depth} smaller than |word| = {len(word)}")
    lo = word_to_leaf(word)
    step = 1 << len(word)
    leaves = frozenset(lo + k * step for k in range(1 << (depth - len(word))))
    return DyadicSet(depth, leaves)


@dataclass(frozen=True, eq=True)
class CondMeasure:
    """An exact [0,1]-valued function on the atoms of the base."""

    base: BaseSpace
    values: tuple[Fraction, ...]  # aligned with base.atoms

    def __post_init__(self):
        if len(self.values) != len(self.base.atoms):
            raise ValueError("one value per atom required")
        if any(not (0 <= v <= 1) for v in self.values):
            raise ValueError("conditional measures live in [0,1]")

    @staticmethod
    def constant(base: BaseSpace, value: Fraction | int | str) -> "CondMeasure":
        v = Fraction(value)
        return CondMeasure(base, tuple(v for _ in base.atoms))

    @staticmethod
    def from_mapping(base: BaseSpace, mapping: Mapping[str, Fraction]) -> "CondMeasure":
        return CondMeasure(
            base, tuple(Fraction(mapping.get(a, 0)) for a in base.labels)
        )

    def __call__(self, label: str) -> Fraction:
        return self.values[_label_index(self.base, label)]

    def integral(self) -> Fraction:
        return sum(
            (w * v for (_, w), v in zip(self.base.atoms, self.values)), Fraction(0)
        )

    def max(self) -> Fraction:
        return max(self.values)

    def __le__(self, other: "CondMeasure") -> bool:
        return all(a <= b for a, b in zip(self.values, other.values))

    def __str__(self):
        return " ".join(
            f"{a}={format_fraction(v)}" for a, v in zip(self.base.labels, self.values)
        )


@dataclass(frozen=True, eq=True)
class ProductSet:
    """A union of (atom, cylinder) pieces at a common depth."""

    base: BaseSpace
    depth: int
    parts: tuple[frozenset[int], ...]  # aligned with base.atoms

    def __post_init__(self):
        if len(self.parts) != len(self.base.atoms):
            raise ValueError("one leaf set per atom required")
        n = 1 << self.depth
        for leaves in self.parts:
            if any(not 0 <= l < n for l in leaves):
                raise ValueError("leaf label out of range for depth")

    @staticmethod
    def from_mapping(
        base: BaseSpace, depth: int, mapping: Mapping[str, Iterable[int]]
    ) -> "ProductSet":
        return ProductSet(
            base,
            depth,
            tuple(frozenset(mapping.get(a, ())) for a in base.labels),
        )

    @staticmethod
    def uniform(base: BaseSpace, dy: DyadicSet) -> "ProductSet":
        """The same dyadic set on every atom."""
        return ProductSet(base, dy.depth, tuple(dy.leaves for _ in base.atoms))

    @staticmethod
    def empty(base: BaseSpace, depth: int) -> "ProductSet":
        return ProductSet(base, depth, tuple(frozenset() for _ in base.atoms))

    @staticmethod
    def full(base: BaseSpace, depth: int) -> "ProductSet":
        leaves = frozenset(range(1 << depth))
        return ProductSet(base, depth, tuple(leaves for _ in base.atoms))

    def leaves(self, label: str) -> frozenset[int]:
        return self.parts[_label_index(self.base, label)]

    @property
    def measure(self) -> Fraction:
        return sum(
            (
                w * Fraction(len(p), 1 << self.depth)
                for (_, w), p in zip(self.base.atoms, self.parts)
            ),
            Fraction(0),
        )

    def refine(self, depth: int) -> "ProductSet":
        if depth < self.depth:
            raise ValueError("refine target shallower than current depth")
        if depth == self.depth:
            return self
        step = 1 << self.depth
        reps = 1 << (depth - self.depth)
        return ProductSet(
            self.base,
            depth,
            tuple(
                frozenset(l + k * step for l in p for k in range(reps))
                for p in self.parts
            ),
        )

    def _check_compatible(self, other: "ProductSet"):
        if self.base != other.base:
            raise ValueError("base space mismatch")
        if self.depth != other.depth:
            raise ValueError("depth mismatch; refine explicitly first")

    def __or__(self, other):
        self._check_compatible(other)
        return ProductSet(
            self.base, self.depth, tuple(a | b for a, b in zip(self.parts, other.parts))
        )

    def __and__(self, other):
        self._check_compatible(other)
        return ProductSet(
            self.base, self.depth, tuple(a & b for a, b in zip(self.parts, other.parts))
        )

    def __sub__(self, other):
        self._check_compatible(other)
        return ProductSet(
            self.base, self.depth, tuple(a - b for a, b in zip(self.parts, other.parts))
        )

    def __le__(self, other):
        self._check_compatible(other)
        return all(a <= b for a, b in zip(self.parts, other.parts))

    def is_empty(self) -> bool:
        return all(not p for p in self.parts)

    def to_lines(self) -> list[str]:
        out = []
        for label, p in zip(self.base.labels, self.parts):
            body = ",".join(str(l) for l in sorted(p))
            out.append(f"set depth={self.depth} atom={label} leaves={body}")
        return out


def parse_set_lines(base: BaseSpace, lines: Iterable[str]) -> ProductSet:
    depth = None
    mapping: dict[str, frozenset[int]] = {}
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = dict(tok.split("=", 1) for tok in line.split())
        if "set" in line.split()[0]:
            fields.pop("set", None)
        d = int(fields["depth"])
        if depth is None:
            depth = d
        elif depth != d:
            raise ValueError("inconsistent depths in set lines")
        body = fields["leaves"]
        leaves = frozenset(int(x) for x in body.split(",") if x != "")
        mapping[fields["atom"]] = leaves
    if depth is None:
        raise ValueError("no set lines found")
    return ProductSet.from_mapping(base, depth, mapping)


def cond_measure(A: ProductSet) -> CondMeasure:
    """Per-atom mass of ``A``; integrating it against the base weights gives
    back the plain measure."""
    return CondMeasure(
        A.base, tuple(Fraction(len(p), 1 << A.depth) for p in A.parts)
    )


def maharam_split(A: ProductSet, f: CondMeasure | Fraction | int) -> ProductSet:
    """The subset of ``A`` whose conditional measure equals ``f`` exactly.

    Deterministic: the lowest-labelled leaves of ``A`` are taken on every
    atom.  ``f`` must be representable at A's depth (f(y) * 2^depth integral)
    and pointwise at most cond_measure(A).
    """
    if not isinstance(f, CondMeasure):
        f = CondMeasure.constant(A.base, Fraction(f))
    if f.base != A.base:
        raise ValueError("base space mismatch")
    n = 1 << A.depth
    parts = []
    for label, p, v in zip(A.base.labels, A.parts, f.values):
        count = v * n
        if count.denominator != 1:
            raise ResolutionError(
                f"target measure {v} not representable at depth {A.depth} "
                f"on atom {label!r}",
                required_depth=A.depth + (count.denominator - 1).bit_length(),
            )
        count = int(count)
        if count > len(p):
            raise InfeasibleError(
                f"target exceeds conditional measure of A on atom {label!r}"
            )
        parts.append(frozenset(sorted(p)[:count]))
    return ProductSet(A.base, A.depth, tuple(parts))


def match_sets(A: ProductSet, B: ProductSet):
    """A measure-preserving leaf bijection A -> B staying inside each atom.

    Deterministic: leaves are paired in sorted order.  Requires equal
    conditional measures (equivalently, equal leaf counts per atom).
    """
    from .graphings import PartialMap

    A._check_compatible(B)
    maps = {}
    for label, pa, pb in zip(A.base.labels, A.parts, B.parts):
        if len(pa) != len(pb):
            raise InfeasibleError(
                f"conditional measures differ on atom {label!r}; no matching exists"
            )
        maps[label] = dict(zip(sorted(pa), sorted(pb)))
    return PartialMap.from_mapping(A.base, A.depth, maps)


def markers(base: BaseSpace, depth: int) -> list[ProductSet]:
    """The decreasing marker sequence A_n = Y x [0^n], n = 1..depth."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    return [
        ProductSet.uniform(base, cylinder(zeros(n), depth)) for n in range(1, depth + 1)
    ]

"""Partial isomorphisms, graphings and the relations they generate.

A PartialMap is an injective partial function on leaves, kept inside each
atom (atoms are invariant pieces of the ambient relation, so nothing may
cross them).  A Graphing is a finite list of PartialMaps at a common depth;
it generates a partition of the leaves per atom (its equivalence relation at
this resolution), computed by union-find with deterministic class labels.

A pre-p-cycle is a chain of p-1 maps whose levels are pairwise disjoint;
it extends canonically to a permutation with orbit sizes 1 and p by walking
forward along the chain and returning through the inverses.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .fields import FieldElement
from .measure import BaseSpace, CondMeasure, ProductSet
from .perms import LevelPerm


@dataclass(frozen=True, eq=True)
class PartialMap:
    """Per-atom injective partial function on depth-m leaves."""

    base: BaseSpace
    depth: int
    pairs: tuple[tuple[tuple[int, int], ...], ...]  # aligned with base.atoms

    def __post_init__(self):
        n = 1 << self.depth
        if len(self.pairs) != len(self.base.atoms):
            raise ValueError("one pair list per atom required")
        for label, pp in zip(self.base.labels, self.pairs):
            srcs = [s for s, _ in pp]
            dsts = [d for _, d in pp]
            if any(not (0 <= s < n and 0 <= d < n) for s, d in pp):
                raise ValueError("leaf out of range")
            if len(set(srcs)) != len(srcs) or len(set(dsts)) != len(dsts):
                raise ValueError(f"partial map not injective on atom {label!r}")

    @staticmethod
    def from_mapping(
        base: BaseSpace, depth: int, maps: Mapping[str, Mapping[int, int]]
    ) -> "PartialMap":
        unknown = set(maps) - set(base.labels)
        if unknown:
            raise ValueError(f"unknown atoms: {sorted(unknown)}")
        return PartialMap(
            base,
            depth,
            tuple(
                tuple(sorted(maps.get(a, {}).items())) for a in base.labels
            ),
        )

    def mapping(self, label: str) -> dict[int, int]:
        return dict(self.pairs[self.base.labels.index(label)])

    def domain(self) -> ProductSet:
        return ProductSet(
            self.base,
            self.depth,
            tuple(frozenset(s for s, _ in pp) for pp in self.pairs),
        )

    def range_(self) -> ProductSet:
        return ProductSet(
            self.base,
            self.depth,
            tuple(frozenset(d for _, d in pp) for pp in self.pairs),
        )

    def inverse(self) -> "PartialMap":
        return PartialMap(
            self.base,
            self.depth,
            tuple(tuple(sorted((d, s) for s, d in pp)) for pp in self.pairs),
        )

    def to_lines(self) -> list[str]:
        out = []
        for label, pp in zip(self.base.labels, self.pairs):
            body = ",".join(f"{s}:{d}" for s, d in pp)
            out.append(f"pmap atom={label} pairs={body}")
        return out


def parse_pmap_lines(base: BaseSpace, depth: int, lines: Iterable[str]) -> PartialMap:
    maps: dict[str, dict[int, int]] = {}
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = dict(tok.split("=", 1) for tok in line.split() if "=" in tok)
        pairs = {}
        body = fields.get("pairs", "")
        if body:
            for item in body.split(","):
                s, d = item.split(":")
                pairs[int(s)] = int(d)
        maps[fields["atom"]] = pairs
    return PartialMap.from_mapping(base, depth, maps)


@dataclass(frozen=True, eq=True)
class Graphing:
    """A finite sequence of PartialMaps at a common depth."""

    maps: tuple[PartialMap, ...]

    def __post_init__(self):
        if self.maps:
            base, depth = self.maps[0].base, self.maps[0].depth
            for m in self.maps:
                if m.base != base or m.depth != depth:
                    raise ValueError("graphing maps must share base and depth")

    def __len__(self):
        return len(self.maps)

    def __iter__(self):
        return iter(self.maps)

    @property
    def base(self) -> BaseSpace:
        return self.maps[0].base

    @property
    def depth(self) -> int:
        return self.maps[0].depth


@dataclass(frozen=True, eq=True)
class Partition:
    """Per-atom partition of the leaves; classes listed by least leaf."""

    base: BaseSpace
    depth: int
    parts: tuple[tuple[frozenset[int], ...], ...]  # aligned with base.atoms

    def classes(self, label: str) -> tuple[frozenset[int], ...]:
        return self.parts[self.base.labels.index(label)]

    def class_of(self, label: str, leaf: int) -> frozenset[int]:
        for cls in self.classes(label):
            if leaf in cls:
                return cls
        raise KeyError(leaf)

    def class_count(self) -> dict[str, int]:
        return {a: len(p) for a, p in zip(self.base.labels, self.parts)}

    def refines(self, other: "Partition") -> bool:
        """True iff every class of self is contained in a class of other."""
        if self.base != other.base or self.depth != other.depth:
            raise ValueError("partition comparison needs same base and depth")
        for label in self.base.labels:
            for cls in self.classes(label):
                target = other.class_of(label, min(cls))
                if not cls <= target:
                    return False
        return True

    def to_lines(self) -> list[str]:
        out = []
        for label, classes in zip(self.base.labels, self.parts):
            body = ";".join(",".join(str(l) for l in sorted(c)) for c in classes)
            out.append(f"partition atom={label} classes={body}")
        return out


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if rb < ra:  # keep the least leaf as the root
                ra, rb = rb, ra
            self.parent[rb] = ra


def _partition_from_edges(
    base: BaseSpace, depth: int, edges_per_atom: Sequence[Iterable[tuple[int, int]]]
) -> Partition:
    n = 1 << depth
    parts = []
    for edges in edges_per_atom:
        uf = _UnionFind(n)
        for a, b in edges:
            uf.union(a, b)
        classes: dict[int, list[int]] = {}
        for leaf in range(n):
            classes.setdefault(uf.find(leaf), []).append(leaf)
        parts.append(
            tuple(frozenset(classes[r]) for r in sorted(classes))
        )
    return Partition(base, depth, tuple(parts))


def generated_relation(g: Graphing, base: BaseSpace | None = None,
                       depth: int | None = None) -> Partition:
    """Smallest partition joining every (leaf, image) edge of the graphing.

    ``base``/``depth`` are only needed for the empty graphing, which
    generates the all-singletons partition.
    """
    if len(g) == 0:
        if base is None or depth is None:
            raise ValueError("empty graphing needs explicit base and depth")
        return _partition_from_edges(base, depth, [[] for _ in base.atoms])
    base, depth = g.base, g.depth
    edges = [[] for _ in base.atoms]
    for pm in g:
        for i, pp in enumerate(pm.pairs):
            edges[i].extend(pp)
    return _partition_from_edges(base, depth, edges)


def graphing_of_elements(elements: Sequence[FieldElement]) -> Graphing:
    """The graphing whose maps are the given elements as total maps."""
    maps = []
    for f in elements:
        maps.append(
            PartialMap(
                f.base,
                f.depth,
                tuple(
                    tuple((int(x), int(p.images[x])) for x in range(1 << f.depth))
                    for p in f.perms
                ),
            )
        )
    return Graphing(tuple(maps))


def conditional_cost(g: Graphing) -> CondMeasure:
    """Per-atom sum of the domain masses of the maps."""
    if len(g) == 0:
        raise ValueError("cost of an empty graphing needs a base; use CondMeasure.constant")
    totals = [Fraction(0)] * len(g.base.atoms)
    for pm in g:
        for i, pp in enumerate(pm.pairs):
            totals[i] += Fraction(len(pp), 1 << g.depth)
    return CondMeasure(g.base, tuple(totals))


def is_pre_cycle(g: Graphing) -> bool:
    """Chain check: consecutive ranges feed consecutive domains, and all the
    levels (every domain plus the final range) are pairwise disjoint.  The
    empty graphing counts as the trivial 1-cycle."""
    if len(g) == 0:
        return True
    for a, b in zip(g.maps, g.maps[1:]):
        if a.range_() != b.domain():
            return False
    levels = [m.domain() for m in g.maps] + [g.maps[-1].range_()]
    for i, A in enumerate(levels):
        for B in levels[i + 1 :]:
            if not (A & B).is_empty():
                return False
    return True


def cycle_extend(g: Graphing, base: BaseSpace | None = None,
                 depth: int | None = None) -> FieldElement:
    """Close a pre-p-cycle into a permutation with orbit sizes in {1, p}:
    forward along the chain, and from the last range back through the whole
    inverse chain."""
    if len(g) == 0:
        if base is None or depth is None:
            raise ValueError("empty pre-cycle needs explicit base and depth")
        return FieldElement.identity(base, depth)
    if not is_pre_cycle(g):
        raise ValueError("not a pre-cycle")
    base, depth = g.base, g.depth
    perms = []
    for i, label in enumerate(base.labels):
        img = np.arange(1 << depth, dtype=np.uint32)
        chain = [dict(pm.pairs[i]) for pm in g.maps]
        for step in chain:
            for s, d in step.items():
                img[s] = d
        last_range = [d for _, d in g.maps[-1].pairs[i]]
        inv_chain = [{d: s for s, d in step.items()} for step in chain]
        for x in last_range:
            y = x
            for invstep in reversed(inv_chain):
                y = invstep[y]
            img[x] = y
        perms.append(LevelPerm(depth, img))
    return FieldElement(base, perms)


def in_full_group(f: FieldElement, partition: Partition) -> bool:
    """True iff every leaf maps within its class on every atom."""
    if f.base != partition.base:
        raise ValueError("base space mismatch")
    if f.depth != partition.depth:
        raise ValueError("depth mismatch")
    for label, p in zip(f.base.labels, f.perms):
        for cls in partition.classes(label):
            if any(int(p.images[x]) not in cls for x in cls):
                return False
    return True

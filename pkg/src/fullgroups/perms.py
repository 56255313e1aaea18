"""Exact arithmetic in the groups of depth-m dyadic permutations.

A LevelPerm is a bijection of the 2^m depth-m cylinders, stored as a flat
image array in leaf encoding (see words.py).  Flat storage gives O(1)
application and cache-friendly composition; numpy keeps compositions at
depth 20+ in the hundreds of milliseconds.

The ideal infinite-depth odometer is never represented: ``odometer_approx``
hands out its depth-m truncation together with an ErrorBudget, an upper
bound on the uniform distance to the ideal element.  Budgets add under
composition and survive inversion because the uniform metric is
bi-invariant, so a word of length L in approximants is within L * 2^-m of
the ideal value.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .measure import DyadicSet
from .words import leaf_to_word, word_to_leaf, ones, zeros

_DTYPE = np.uint32


@dataclass(frozen=True)
class ErrorBudget:
    """Upper bound on d_u between a computed permutation and the ideal group
    element it stands for."""

    bound: Fraction

    def __post_init__(self):
        if self.bound < 0:
            raise ValueError("budget must be >= 0")

    @staticmethod
    def zero() -> "ErrorBudget":
        return ErrorBudget(Fraction(0))

    def __add__(self, other: "ErrorBudget") -> "ErrorBudget":
        return ErrorBudget(self.bound + other.bound)

    def times(self, k: int) -> "ErrorBudget":
        return ErrorBudget(self.bound * abs(k))


class LevelPerm:
    """A permutation of the 2^m depth-m cylinder labels."""

    __slots__ = ("depth", "images")

    def __init__(self, depth: int, images: Sequence[int] | np.ndarray, *, _trusted=False):
        arr = np.asarray(images, dtype=_DTYPE)
        if arr.shape != (1 << depth,):
            raise ValueError(f"need {1 << depth} images for depth {depth}")
        if not _trusted:
            counts = np.bincount(arr, minlength=1 << depth)
            if counts.max(initial=0) != 1:
                raise ValueError("images do not form a bijection")
        arr.setflags(write=False)
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "images", arr)

    def __setattr__(self, *a):
        raise AttributeError("LevelPerm is immutable")

    # -- basics -------------------------------------------------------------
    @staticmethod
    def identity(depth: int) -> "LevelPerm":
        return LevelPerm(depth, np.arange(1 << depth, dtype=_DTYPE), _trusted=True)

    @staticmethod
    def from_cycles(depth: int, *cycles: Sequence[int]) -> "LevelPerm":
        img = np.arange(1 << depth, dtype=_DTYPE)
        for cyc in cycles:
            for a, b in zip(cyc, list(cyc[1:]) + [cyc[0]]):
                img[a] = b
        return LevelPerm(depth, img)

    def apply(self, leaf: int) -> int:
        return int(self.images[leaf])

    def __eq__(self, other):
        return (
            isinstance(other, LevelPerm)
            and self.depth == other.depth
            and np.array_equal(self.images, other.images)
        )

    def __hash__(self):
        return hash((self.depth, self.images.tobytes()))

    def __repr__(self):
        if self.depth <= 4:
            return f"LevelPerm(depth={self.depth}, images={self.images.tolist()})"
        return f"LevelPerm(depth={self.depth}, 2^{self.depth} leaves)"

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.images, np.arange(1 << self.depth, dtype=_DTYPE)))

    # -- group structure ------------------------------------------------------
    def __mul__(self, other: "LevelPerm") -> "LevelPerm":
        """Composition self o other (other acts first); operands of unequal
        depth are embedded to the common refinement."""
        a, b = _common_depth(self, other)
        return LevelPerm(a.depth, a.images[b.images], _trusted=True)

    def inverse(self) -> "LevelPerm":
        inv = np.empty(1 << self.depth, dtype=_DTYPE)
        inv[self.images] = np.arange(1 << self.depth, dtype=_DTYPE)
        return LevelPerm(self.depth, inv, _trusted=True)

    def __pow__(self, e: int) -> "LevelPerm":
        if e < 0:
            return self.inverse() ** (-e)
        result = np.arange(1 << self.depth, dtype=_DTYPE)
        base = self.images
        while e:
            if e & 1:
                result = base[result]
            base = base[base]
            e >>= 1
        return LevelPerm(self.depth, result, _trusted=True)

    # -- supports and orbits ----------------------------------------------------
    def support(self) -> DyadicSet:
        moved = np.nonzero(self.images != np.arange(1 << self.depth, dtype=_DTYPE))[0]
        return DyadicSet(self.depth, frozenset(int(x) for x in moved))

    def support_measure(self) -> Fraction:
        moved = int(
            np.count_nonzero(self.images != np.arange(1 << self.depth, dtype=_DTYPE))
        )
        return Fraction(moved, 1 << self.depth)


def _common_depth(p: LevelPerm, q: LevelPerm) -> tuple[LevelPerm, LevelPerm]:
    m = max(p.depth, q.depth)
    return embed(p, m), embed(q, m)


def embed(p: LevelPerm, depth: int) -> LevelPerm:
    """Inclusion into a finer level: act on the first p.depth coordinates and
    fix the rest.  Injective homomorphism, isometric for d_u."""
    if depth < p.depth:
        raise ValueError("embedding target shallower than current depth")
    if depth == p.depth:
        return p
    blocks = np.arange(0, 1 << depth, 1 << p.depth, dtype=_DTYPE)
    img = (p.images[None, :] + blocks[:, None]).ravel()
    return LevelPerm(depth, img, _trusted=True)


def d_u(p: LevelPerm, q: LevelPerm) -> Fraction:
    """Uniform metric: the exact mass of the disagreement set."""
    if p.depth != q.depth:
        raise ValueError("depth mismatch; embed to a common depth first")
    differ = int(np.count_nonzero(p.images != q.images))
    return Fraction(differ, 1 << p.depth)


def square_root(p: LevelPerm) -> LevelPerm:
    """The depth-(m+1) element that squares to ``p`` and has the refined
    support: moving leaves walk through the new coordinate, so the root runs
    twice as slow."""
    n = 1 << p.depth
    ar = np.arange(n, dtype=_DTYPE)
    moved = p.images != ar
    out = np.empty(2 * n, dtype=_DTYPE)
    out[:n] = np.where(moved, ar + n, ar)
    out[n:] = np.where(moved, p.images, ar + n)
    return LevelPerm(p.depth + 1, out, _trusted=True)


def iterated_square_root(p: LevelPerm, q: int) -> LevelPerm:
    """q-fold square root: raising the result to the 2^q power gives back
    the embedding of ``p``; the support refines exactly."""
    if q < 0:
        raise ValueError("q must be >= 0")
    for _ in range(q):
        p = square_root(p)
    return p


def finite_odometer(depth: int) -> LevelPerm:
    """Add one with carry to the right on words of length ``depth``; the
    all-ones word wraps to all zeros.  A single 2^m-cycle."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    images = []
    for leaf in range(1 << depth):
        w = leaf_to_word(leaf, depth)
        k = w.find("0")
        if k == -1:
            out = zeros(depth)
        else:
            out = zeros(k) + "1" + w[k + 1 :]
        images.append(word_to_leaf(out))
    return LevelPerm(depth, images, _trusted=True)


def odometer_approx(depth: int) -> tuple[LevelPerm, ErrorBudget]:
    """The depth-m odometer together with its exact distance bound 2^-m to
    the ideal infinite-depth odometer (they differ only on the all-ones
    cylinder)."""
    return finite_odometer(depth), ErrorBudget(Fraction(1, 1 << depth))


def block_swap(n: int, depth: int | None = None) -> LevelPerm:
    """The transposition exchanging the cylinders [0^(n-1) 1] and
    [1^(n-1) 0]; support measure 2^-(n-1).  These two words are consecutive
    in odometer order, and for distinct n the supports are disjoint."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if depth is None:
        depth = n
    if depth < n:
        raise ValueError("depth must be >= n")
    a = word_to_leaf(ones(n - 1) + "0")  # 2^(n-1) - 1
    b = word_to_leaf(zeros(n - 1) + "1")  # 2^(n-1)
    img = np.arange(1 << n, dtype=_DTYPE)
    img[a], img[b] = b, a
    return embed(LevelPerm(n, img, _trusted=True), depth)


def cycle_type(p: LevelPerm) -> dict[int, int]:
    """Orbit-size multiset as a {size: count} dict, fixed points included."""
    n = 1 << p.depth
    ar = np.arange(n, dtype=_DTYPE)
    moved = np.nonzero(p.images != ar)[0]
    out: dict[int, int] = {}
    fixed = n - len(moved)
    if fixed:
        out[1] = fixed
    seen = set()
    img = p.images
    for start in moved:
        start = int(start)
        if start in seen:
            continue
        size = 0
        x = start
        while True:
            seen.add(x)
            size += 1
            x = int(img[x])
            if x == start:
                break
        out[size] = out.get(size, 0) + 1
    return out


def is_odd_cycle(p: LevelPerm) -> bool:
    """True iff every orbit has odd cardinality."""
    return all(size % 2 == 1 for size in cycle_type(p))


def signature(p: LevelPerm) -> int:
    """Parity of the permutation: +1 for even, -1 for odd."""
    swaps = sum((size - 1) * count for size, count in cycle_type(p).items())
    return -1 if swaps % 2 else 1


def element_order(p: LevelPerm) -> int:
    """Least e >= 1 with p^e = identity (lcm of the orbit sizes)."""
    import math

    order = 1
    for size in cycle_type(p):
        order = order * size // math.gcd(order, size)
    return order


def perm_to_line(p: LevelPerm) -> str:
    body = ",".join(str(int(x)) for x in p.images)
    return f"perm depth={p.depth} images={body}"


def parse_perm_line(line: str) -> LevelPerm:
    fields = dict(tok.split("=", 1) for tok in line.split() if "=" in tok)
    depth = int(fields["depth"])
    images = [int(x) for x in fields["images"].split(",")]
    return LevelPerm(depth, images)

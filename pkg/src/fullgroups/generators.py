"""The two-generator construction and its verifications.

A Schedule fixes everything the construction needs: the grouping of atoms
(which sizes the small-support zone Z), a decreasing error sequence eps_k,
block choices B_k, and strictly increasing swap sizes n_k chosen minimally
so that

  (i)  the swap lifted to B_k is supported inside Z, and
  (ii) 1 / 2^(n_{k+1} - 2)  <  eps_k / kappa(n_k),

where kappa is the exact worst-case word length of the synthesis in
wordtable.py.  The generator U is the truncated commuting product of lifted
iterated square roots of the swaps; truncation turns every tail bound into
an exactly checkable identity:

  U^(2^(k-1)) = lift_{B_k}(swap n_k) * W_k,   supp W_k = later factors.

``check_residual`` asserts both the exact residual sum and the eps/kappa
bound.  ``odd_cycle_recovery`` checks the Chinese-remainder recovery of U
from C*U for odd cycles C with disjoint support.  ``rank_generators`` and
``cost_one_perturbation`` realize the generator-set and perturbation
constructions on top of these.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .errors import InfeasibleError, ResolutionError
from .fields import FieldElement, cond_support, d_1, odometer_field, on_atoms
from .graphings import (
    Graphing,
    PartialMap,
    Partition,
    conditional_cost,
    cycle_extend,
    generated_relation,
    graphing_of_elements,
    is_pre_cycle,
)
from .measure import BaseSpace, CondMeasure, ProductSet, cylinder
from .perms import (
    LevelPerm,
    block_swap,
    cycle_type,
    element_order,
    embed,
    is_odd_cycle,
    iterated_square_root,
)
from .wordtable import word_length_bound
from .words import ones, zeros


@dataclass(frozen=True)
class Schedule:
    """Data of a truncated product construction at working depth ``depth``."""

    base: BaseSpace
    groups: tuple[int, ...]  # Z-block index per atom, aligned with base.atoms
    eps: tuple[Fraction, ...]  # eps_1 .. eps_L, positive, nonincreasing
    ns: tuple[int, ...]  # n_1 .. n_L, strictly increasing
    blocks: tuple[frozenset[str], ...]  # B_1 .. B_L
    depth: int

    @property
    def levels(self) -> int:
        return len(self.ns)

    def group_of(self, label: str) -> int:
        return self.groups[self.base.labels.index(label)]

    def zone(self) -> ProductSet:
        """Z = union over groups k of (atoms of group k) x ([0^(k+1)] u [1^(k+1)])."""
        parts = []
        for label, k in zip(self.base.labels, self.groups):
            if k + 1 > self.depth:
                raise ResolutionError(
                    f"zone block for group {k} needs depth >= {k + 1}",
                    required_depth=k + 1,
                )
            dy = cylinder(zeros(k + 1), self.depth) | cylinder(ones(k + 1), self.depth)
            parts.append(dy.leaves)
        return ProductSet(self.base, self.depth, tuple(parts))

    def validate(self):
        L = self.levels
        if len(self.eps) != L or len(self.blocks) != L:
            raise ValueError("eps, ns and blocks must have equal length")
        if any(e <= 0 for e in self.eps):
            raise ValueError("eps must be positive")
        if any(b - a <= 0 for a, b in zip(self.ns, self.ns[1:])):
            raise ValueError("ns must be strictly increasing")
        for k, (n, B) in enumerate(zip(self.ns, self.blocks), start=1):
            if not B:
                raise ValueError(f"block B_{k} is empty")
            need = max(self.group_of(a) for a in B) + 2
            if n < need:
                raise ValueError(
                    f"support condition fails at k={k}: swap size {n} < {need}"
                )
        for k in range(1, L):
            bound = self.eps[k - 1] / word_length_bound(self.ns[k - 1])
            if not Fraction(1, 1 << (self.ns[k] - 2)) < bound:
                raise ValueError(f"growth condition fails at k={k}")
        need = self.ns[-1] + L
        if self.depth < need:
            raise ResolutionError(
                f"depth {self.depth} too small; need >= {need}",
                required_depth=need,
            )


def default_blocks(base: BaseSpace, levels: int) -> tuple[frozenset[str], ...]:
    """Fallback repetition plan: the whole base first, then each atom in
    declaration order, cycling."""
    plan = [frozenset(base.labels)] + [frozenset({a}) for a in base.labels]
    return tuple(plan[k % len(plan)] for k in range(levels))


def build_schedule(
    base: BaseSpace,
    groups: Mapping[str, int],
    eps: Sequence[Fraction],
    levels: int,
    depth: int,
    blocks: Sequence[frozenset[str]] | None = None,
) -> Schedule:
    """Choose each n_{k+1} minimally subject to the support and growth
    conditions; fail loudly when the requested depth cannot host the result."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if len(eps) < levels:
        raise ValueError("need one eps per level")
    group_tuple = tuple(int(groups[a]) for a in base.labels)
    if blocks is None:
        blocks = default_blocks(base, levels)
    blocks = tuple(frozenset(b) for b in blocks[:levels])

    def min_support_n(block):
        return max(group_tuple[base.labels.index(a)] for a in block) + 2

    ns = [max(2, min_support_n(blocks[0]))]
    for k in range(1, levels):
        bound = Fraction(eps[k - 1]) / word_length_bound(ns[-1])
        n = max(ns[-1] + 1, min_support_n(blocks[k]))
        while not Fraction(1, 1 << (n - 2)) < bound:
            n += 1
        ns.append(n)
    s = Schedule(
        base,
        group_tuple,
        tuple(Fraction(e) for e in eps[:levels]),
        tuple(ns),
        blocks,
        depth,
    )
    s.validate()
    return s


def _factor(s: Schedule, l: int) -> LevelPerm:
    """The level-l factor 2^(l-1)-th root of the swap, at its native depth."""
    return iterated_square_root(block_swap(s.ns[l - 1]), l - 1)


def _zone_mask_ok(images: np.ndarray, group: int) -> bool:
    n = len(images)
    moved = np.nonzero(images != np.arange(n, dtype=images.dtype))[0]
    if len(moved) == 0:
        return True
    block = 1 << (group + 1)
    rem = moved % block
    return bool(np.all((rem == 0) | (rem == block - 1)))


def build_generator(s: Schedule) -> FieldElement:
    """The truncated product U = prod_l lift_{B_l}(2^(l-1)-th root of swap n_l).

    Factors are checked to have pairwise disjoint supports, and the support
    of the result is checked to lie inside the zone Z.
    """
    s.validate()
    work = max(n + l - 1 for l, n in enumerate(s.ns, start=1))
    factors = [embed(_factor(s, l), work) for l in range(1, s.levels + 1)]

    ar = np.arange(1 << work, dtype=factors[0].images.dtype)
    masks = [f.images != ar for f in factors]
    for i in range(len(masks)):
        for j in range(i + 1, len(masks)):
            if np.any(masks[i] & masks[j]):
                raise RuntimeError(
                    "internal invariant violation: factor supports overlap"
                )

    ident = LevelPerm.identity(work)
    perms = []
    for label in s.base.labels:
        p = ident
        for l in range(1, s.levels + 1):
            if label in s.blocks[l - 1]:
                p = p * factors[l - 1]
        perms.append(p)
    u = FieldElement(s.base, perms)
    for label, p in zip(s.base.labels, u.perms):
        if not _zone_mask_ok(p.images, s.group_of(label)):
            raise RuntimeError(
                f"internal invariant violation: support leaves zone on {label!r}"
            )
    return u


@dataclass(frozen=True)
class ResidualCheck:
    k: int
    distance: Fraction
    residual_bound: Fraction
    eps_bound: Fraction
    passed: bool


def check_residual(u: FieldElement, s: Schedule, k: int) -> ResidualCheck:
    """Exact distance from U^(2^(k-1)) to the lifted swap, against the
    truncated tail sum and the eps_k / kappa(n_k) requirement."""
    if not 1 <= k <= s.levels:
        raise ValueError("k out of range")
    power = u ** (1 << (k - 1))
    target = on_atoms(s.base, s.blocks[k - 1], block_swap(s.ns[k - 1]))
    dist = d_1(power, target.embed_to(power.depth))
    residual = sum(
        (Fraction(1, 1 << (s.ns[l - 1] - 1)) for l in range(k + 1, s.levels + 1)),
        Fraction(0),
    )
    eps_bound = s.eps[k - 1] / word_length_bound(s.ns[k - 1])
    passed = dist <= residual and dist <= eps_bound
    return ResidualCheck(k, dist, residual, eps_bound, passed)


# -- odd cycle recovery ------------------------------------------------------------


def _two_power_orbit_exponent(v: FieldElement) -> int:
    """Least j with v^(2^j) = id; raises if orbit sizes are not 2-powers."""
    j = 0
    cur = v
    while not cur.is_identity():
        cur = cur * cur
        j += 1
        if j > v.depth:
            raise ValueError("orbit sizes of v are not all powers of two")
    return j


def distinct_odd_orbit_sizes(c: FieldElement) -> list[int]:
    sizes = set()
    for p in c.perms:
        sizes.update(cycle_type(p))
    if any(sz % 2 == 0 for sz in sizes):
        raise ValueError("c has an even orbit")
    return sorted(sizes)


def odd_cycle_recovery(
    v: FieldElement, c: FieldElement, k_max: int
) -> list[Fraction]:
    """Distances d_u((c*v)^(m_k P_k), v) for k = 1..k_max, where P_k is the
    product of the first k distinct odd orbit sizes of c and m_k inverts P_k
    mod 2^k.  The sequence hits exactly zero once 2^k bounds every v-orbit
    and P_k covers every c-orbit size."""
    if not (v.support() & c.support()).is_empty():
        raise ValueError("supports of v and c must be disjoint")
    _two_power_orbit_exponent(v)  # validates the 2-power condition
    sizes = distinct_odd_orbit_sizes(c)
    cv = c * v
    out = []
    power_cache: dict[int, FieldElement] = {}
    for k in range(1, k_max + 1):
        P = math.prod(sizes[: min(k, len(sizes))])
        m_k = pow(P, -1, 1 << k)
        e = m_k * P
        if e not in power_cache:
            power_cache[e] = cv ** e
        out.append(d_1(power_cache[e], v))
    return out


def predicted_recovery_k(v: FieldElement, c: FieldElement) -> int:
    """First k at which the recovery distance is guaranteed to vanish."""
    j = _two_power_orbit_exponent(v)
    sizes = distinct_odd_orbit_sizes(c)
    k = 1
    while True:
        P = math.prod(sizes[: min(k, len(sizes))])
        if k >= j and all(P % s == 0 for s in sizes):
            return k
        k += 1


# -- rank construction -------------------------------------------------------------


def _block_respecting_match(
    base: BaseSpace, depth: int, block_depth: int,
    src: ProductSet, dst: ProductSet,
) -> PartialMap:
    """Sorted leaf matching src -> dst inside each (atom, block) piece, where
    blocks are the orbits of the embedded base odometer."""
    maps: dict[str, dict[int, int]] = {}
    size = 1 << block_depth
    for label in base.labels:
        a, b = src.leaves(label), dst.leaves(label)
        by_block_a: dict[int, list[int]] = {}
        by_block_b: dict[int, list[int]] = {}
        for x in a:
            by_block_a.setdefault(x // size, []).append(x)
        for x in b:
            by_block_b.setdefault(x // size, []).append(x)
        if set(by_block_a) != set(by_block_b) or any(
            len(by_block_a[k]) != len(by_block_b[k]) for k in by_block_a
        ):
            raise ResolutionError(
                f"no block-respecting matching on atom {label!r}"
            )
        m: dict[int, int] = {}
        for k in by_block_a:
            m.update(zip(sorted(by_block_a[k]), sorted(by_block_b[k])))
        maps[label] = m
    return PartialMap.from_mapping(base, depth, maps)


def rank_generators(
    base: BaseSpace,
    base_depth: int,
    depth: int,
    extra: Sequence[Graphing],
    schedule: Schedule,
) -> list[FieldElement]:
    """Generator set T, U*C_1, C_2, ..., C_n for the relation joining the
    depth-``base_depth`` odometer blocks with the extra pre-cycle graphings.

    Each extra graphing, restricted to any atom it touches, must be a
    pre-(q+1)-cycle with q odd; it is augmented by one more link into fresh
    leaves (chosen inside the same odometer block, outside every support in
    play) so that the closed-up cycle has odd length q+2.  The returned
    family generates exactly the target partition, and dropping any single
    element strictly shrinks what is generated.
    """
    if schedule.depth > base_depth:
        raise ResolutionError(
            "schedule working depth must fit inside the base odometer blocks",
            required_depth=schedule.depth,
        )
    if depth < base_depth:
        raise ValueError("working depth must be >= base depth")
    t_field = odometer_field(base, base_depth).embed_to(depth)
    u = build_generator(schedule).embed_to(depth)

    used = u.support()
    for g in extra:
        if len(g) == 0:
            raise ValueError("extra graphings must be nonempty")
        if g.base != base:
            raise ValueError("graphing base mismatch")
        for pm in g:
            used = used | pm.domain().refine(depth) | pm.range_().refine(depth)

    cycles: list[FieldElement] = []
    for g in extra:
        if g.depth != depth:
            raise ValueError("extra graphings must be declared at working depth")
        if not is_pre_cycle(g):
            raise ValueError("extra graphing is not a pre-cycle")
        q = len(g)
        if q % 2 == 0:
            raise ResolutionError(
                "parity constraint unsatisfiable: chain length must be odd"
            )
        cost = conditional_cost(g)
        for label, f in zip(base.labels, cost.values):
            if f and not Fraction(q + 2, q) * f < 1:
                raise ResolutionError(
                    f"not enough room on atom {label!r}: (q+2) f / q >= 1"
                )
        last_range = g.maps[-1].range_()
        fresh: dict[str, list[int]] = {}
        size = 1 << base_depth
        for label in base.labels:
            need: dict[int, int] = {}
            for x in last_range.leaves(label):
                need[x // size] = need.get(x // size, 0) + 1
            taken = used.leaves(label)
            chosen: list[int] = []
            for blk, cnt in sorted(need.items()):
                free = [
                    x
                    for x in range(blk * size, (blk + 1) * size)
                    if x not in taken
                ][:cnt]
                if len(free) < cnt:
                    raise ResolutionError(
                        f"no free leaves left in block {blk} on atom {label!r}"
                    )
                chosen.extend(free)
            fresh[label] = chosen
        target = ProductSet.from_mapping(base, depth, fresh)
        link = _block_respecting_match(base, depth, base_depth, last_range, target)
        used = used | target
        augmented = Graphing(tuple(g.maps) + (link,))
        cyc = cycle_extend(augmented)
        for p in cyc.perms:
            if not is_odd_cycle(p):
                raise RuntimeError("internal invariant violation: cycle not odd")
        cycles.append(cyc)

    if not cycles:
        return [t_field, u]
    result = [t_field, u * cycles[0]] + cycles[1:]

    base_graphing = graphing_of_elements([t_field])
    target_partition = generated_relation(
        Graphing(base_graphing.maps + tuple(m for g in extra for m in g.maps))
    )
    got = generated_relation(graphing_of_elements(result))
    if got != target_partition:
        raise RuntimeError(
            "internal invariant violation: generated partition mismatch"
        )
    return result


# -- cost-one perturbation -----------------------------------------------------------


@dataclass(frozen=True)
class PerturbationCertificate:
    cycle_order: int  # order of c, factored as 2^K * N
    two_exponent: int  # K
    odd_part: int  # N
    companion_order: int  # M, odd and coprime to N
    bezout: tuple[int, int]  # (a, b) with a*N + b*M = 1
    supports_disjoint: bool
    distance: Fraction
    delta: Fraction

    @property
    def passed(self) -> bool:
        a, b = self.bezout
        return (
            self.supports_disjoint
            and a * self.odd_part + b * self.companion_order == 1
            and self.distance < self.delta
        )


@dataclass(frozen=True)
class CostOnePerturbation:
    u_prime: FieldElement
    companion: FieldElement
    certificate: PerturbationCertificate


def cost_one_perturbation(
    c: FieldElement, delta: Fraction, s: Schedule, block_index: int
) -> CostOnePerturbation:
    """U' = U * c * C' with d_u(U', c) < delta.

    ``c`` must avoid the double cylinder [0^(k+1)] u [1^(k+1)] for
    k = block_index, whose mass 2^-k must be < delta; the schedule's zone
    must sit inside the next-smaller double cylinder.  The companion C' is
    an odd cycle of minimal order M >= 3 coprime to the odd part of c's
    order, built on the first M leaves of [0^(k+1) 1] per atom so that every
    orbit walks consecutive leaf blocks of that cylinder.
    """
    k = block_index
    delta = Fraction(delta)
    if not Fraction(1, 1 << k) < delta:
        raise ValueError("delta must exceed the avoided block mass 2^-k")
    depth = max(c.depth, s.depth)
    c = c.embed_to(depth)

    block = 1 << (k + 1)
    for label, p in zip(c.base.labels, c.perms):
        moved = np.nonzero(p.images != np.arange(1 << depth, dtype=p.images.dtype))[0]
        rem = moved % block
        if np.any((rem == 0) | (rem == block - 1)):
            raise ValueError(
                f"support of c meets the avoided block on atom {label!r}"
            )
    for g in s.groups:
        if g < k + 1:
            raise ValueError(
                "schedule zone must lie inside the half of the avoided block"
            )

    order = 1
    for p in c.perms:
        order = order * element_order(p) // math.gcd(order, element_order(p))
    K = (order & -order).bit_length() - 1
    N = order >> K
    if K >= s.levels:
        raise ResolutionError(
            f"schedule truncation {s.levels} cannot host exponent 2^{K}; "
            f"need levels > {K}"
        )

    M = 3
    while math.gcd(M, N) != 1:
        M += 2
    cyl_leaves = 1 << (depth - k - 2)
    if cyl_leaves < M:
        raise ResolutionError(
            f"cylinder [0^{k + 1} 1] has only {cyl_leaves} leaves at depth "
            f"{depth}; need {M}",
            required_depth=k + 2 + (M - 1).bit_length(),
        )
    first = 1 << (k + 1)
    step = 1 << (k + 2)
    orbit = [first + i * step for i in range(M)]
    companion_perm = LevelPerm.from_cycles(depth, orbit)
    companion = FieldElement.constant(c.base, companion_perm)

    u = build_generator(s).embed_to(depth)
    disjoint = (
        (u.support() & c.support()).is_empty()
        and (u.support() & companion.support()).is_empty()
        and (c.support() & companion.support()).is_empty()
    )
    if not disjoint:
        raise RuntimeError("internal invariant violation: supports overlap")

    u_prime = u * c * companion
    dist = d_1(u_prime, c)
    g, a, b = _extended_gcd(N, M)
    cert = PerturbationCertificate(
        cycle_order=order,
        two_exponent=K,
        odd_part=N,
        companion_order=M,
        bezout=(a, b),
        supports_disjoint=disjoint,
        distance=dist,
        delta=delta,
    )
    return CostOnePerturbation(u_prime, companion, cert)


def _extended_gcd(a: int, b: int) -> tuple[int, int, int]:
    old_r, r = a, b
    old_s, s = 1, 0
    old_t, t = 0, 1
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
        old_t, t = t, old_t - q * t
    return old_r, old_s, old_t

"""Reduced words in two letters, their evaluation, and freeness certificates.

Words are strings over {t, T, u, U} (capitals are inverses), written so the
rightmost letter acts first.  ``free_perturbation`` realizes the tower/grid
construction: a small tower of disjoint translates of a set A is laid out as
a grid A_{i,j} = T^(j + n + 2(n+1) i)(A); the path a reduced word traces on
the grid is injective, so gluing the horizontal moves into U makes the word
evaluate to something that shifts A off itself, hence is not the identity.
Off the tower the perturbed element runs the first-return map of the old
one, which keeps the uniform distance below any requested delta once the
tower is small enough.  All checks are exact.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import ResolutionError
from .fields import FieldElement, d_u as field_d_u
from .perms import LevelPerm
from .wordtable import freely_reduce

LETTERS = "tTuU"
INVERSE = {"t": "T", "T": "t", "u": "U", "U": "u"}


def check_reduced(word: str):
    if not word:
        raise ValueError("word must be nonempty")
    if any(c not in LETTERS for c in word):
        raise ValueError(f"invalid letter in word {word!r}")
    if any(a == INVERSE[b] for a, b in zip(word, word[1:])):
        raise ValueError(f"word {word!r} is not reduced")


def reduced_words(max_len: int) -> list[str]:
    """All nonempty reduced words of length <= max_len, by length then
    lexicographically."""
    out = []
    for n in range(1, max_len + 1):
        for tup in itertools.product(LETTERS, repeat=n):
            w = "".join(tup)
            if all(a != INVERSE[b] for a, b in zip(w, w[1:])):
                out.append(w)
    return out


def cyclic_reduce(word: str) -> str:
    while len(word) >= 2 and word[0] == INVERSE[word[-1]]:
        word = word[1:-1]
    return word


def perturbation_class(word: str) -> str:
    """Canonical conjugate of a reduced word: cyclically reduce, then, when a
    u-letter survives, rotate to end in u or U (least such rotation).  Words
    conjugate into a power of t keep that power as their class."""
    check_reduced(word)
    cw = cyclic_reduce(word)
    if not any(c in "uU" for c in cw):
        return cw
    rots = [cw[i:] + cw[:i] for i in range(len(cw))]
    return min(r for r in rots if r[-1] in "uU")


def evaluate_word(word: str, t: FieldElement, u: FieldElement) -> FieldElement:
    """Evaluate right to left; budgets accumulate per letter."""
    if word == "":
        m = max(t.depth, u.depth)
        return FieldElement.identity(t.base, m)
    check_reduced(word)
    m = max(t.depth, u.depth)
    t, u = t.embed_to(m), u.embed_to(m)
    elems = {"t": t, "T": t.inverse(), "u": u, "U": u.inverse()}
    result = elems[word[-1]]
    for c in reversed(word[:-1]):
        result = elems[c] * result
    return result


def grid_path(word: str) -> list[tuple[int, int]]:
    """Points (i_k, j_k), k = 0..n: t-letters step vertically, u-letters step
    right; injective for every reduced word."""
    check_reduced(word)
    pts = [(0, 0)]
    i, j = 0, 0
    for k in range(1, len(word) + 1):
        c = word[-k]
        if c == "t":
            j += 1
        elif c == "T":
            j -= 1
        else:
            i += 1
        pts.append((i, j))
    if len(set(pts)) != len(pts):
        raise ValueError("grid path not injective; word was not reduced")
    return pts


def _first_return(images: np.ndarray, keep: np.ndarray) -> np.ndarray:
    """First-return map induced on {x : keep[x]}, identity elsewhere."""
    out = np.arange(len(images), dtype=images.dtype)
    for x in np.nonzero(keep)[0]:
        y = int(images[x])
        while not keep[y]:
            y = int(images[y])
        out[x] = y
    return out


@dataclass(frozen=True)
class Perturbation:
    element: FieldElement
    atom: str
    base_leaf: int
    distance: Fraction
    tower_measure: Fraction


def free_perturbation(
    word: str,
    t: FieldElement,
    u: FieldElement,
    delta: Fraction,
    min_orbit: int | None = None,
    start_leaf: int = 0,
) -> Perturbation:
    """Perturb ``u`` by less than ``delta`` so that ``word`` evaluates away
    from the identity.

    The word must end in u or U (conjugate it first; see
    ``perturbation_class``).  The tower is placed on the lightest atom, at
    the first base leaf for which all exact postconditions hold; with
    ``min_orbit`` set, the completion inside the tower is additionally
    chosen so that no orbit of the result is shorter than the threshold.
    """
    check_reduced(word)
    if word[-1] not in "uU":
        raise ValueError("word must end in u or U; conjugate it first")
    delta = Fraction(delta)
    m = max(t.depth, u.depth)
    t, u = t.embed_to(m), u.embed_to(m)
    n = len(word)
    height = 2 * (n + 1) ** 2 + 1
    n_leaves = 1 << m

    label = min(t.base.atoms, key=lambda aw: (aw[1], t.base.labels.index(aw[0])))[0]
    atom_idx = t.base.labels.index(label)
    weight = t.base.weight(label)
    tower_measure = weight * Fraction(height, n_leaves)
    if not tower_measure < delta / 2:
        raise ResolutionError(
            f"tower of {height} leaves is too heavy at depth {m}",
            required_depth=m + 1,
        )

    t_img = t.perms[atom_idx].images
    u_img = u.perms[atom_idx].images
    pts = grid_path(word)

    def ext_of(pt):
        i, j = pt
        return j + n + 2 * (n + 1) * i

    long_orbit_found = False
    for base_leaf in range(start_leaf, n_leaves):
        tower = [base_leaf]
        for _ in range(height - 1):
            tower.append(int(t_img[tower[-1]]))
        if len(set(tower)) != height:
            continue
        long_orbit_found = True
        level = {e: tower[e] for e in range(height)}
        # horizontal moves: for each u-letter at position k (from the right),
        # the perturbed element must send the point-k-1 level to the point-k
        # level (or the reverse for an inverse letter)
        glue: dict[int, int] = {}
        ok = True
        for k in range(1, n + 1):
            c = word[-k]
            if c == "u":
                src, dst = level[ext_of(pts[k - 1])], level[ext_of(pts[k])]
            elif c == "U":
                src, dst = level[ext_of(pts[k])], level[ext_of(pts[k - 1])]
            else:
                continue
            if glue.get(src, dst) != dst:
                ok = False
                break
            glue[src] = dst
        if not ok or len(set(glue.values())) != len(glue):
            continue

        keep = np.ones(n_leaves, dtype=bool)
        keep[tower] = False
        new_img = _first_return(u_img, keep)
        rest_dom = sorted(set(tower) - set(glue))
        rest_rng = sorted(set(tower) - set(glue.values()))
        rotations = range(len(rest_dom) + 1) if min_orbit else (0,)
        for rot in rotations:
            img = new_img.copy()
            for s, d in glue.items():
                img[s] = d
            for idx, s in enumerate(rest_dom):
                img[s] = rest_rng[(idx + rot) % len(rest_rng)] if rest_rng else s
            perm = LevelPerm(m, img)
            perms = list(u.perms)
            perms[atom_idx] = perm
            candidate = FieldElement(u.base, perms, u.budget)
            dist = field_d_u(u, candidate)
            if dist >= delta:
                continue
            if evaluate_word(word, t, candidate).is_identity():
                continue
            if min_orbit is not None:
                from .perms import cycle_type

                if any(
                    sz < min_orbit
                    for p in candidate.perms
                    for sz in cycle_type(p)
                ):
                    continue
            return Perturbation(candidate, label, base_leaf, dist, tower_measure)
    if not long_orbit_found:
        raise ResolutionError(
            f"no orbit of length {height} at depth {m}",
            required_depth=(height - 1).bit_length(),
        )
    raise ResolutionError("no tower placement satisfies the exact checks")


def relation_search(
    t: FieldElement, u: FieldElement, max_len: int
) -> list[str]:
    """All reduced words of length <= max_len evaluating exactly to the
    identity, by length then lexicographically; an empty list certifies the
    absence of short relations at this depth."""
    m = max(t.depth, u.depth)
    t, u = t.embed_to(m), u.embed_to(m)
    arrays = {
        "t": t.perms,
        "T": t.inverse().perms,
        "u": u.perms,
        "U": u.inverse().perms,
    }
    n_atoms = len(t.base.labels)
    idents = [p.images for p in FieldElement.identity(t.base, m).perms]
    out = []
    for w in reduced_words(max_len):
        cur = [ident.copy() for ident in idents]
        for c in reversed(w):
            aps = arrays[c]
            cur = [aps[a].images[cur[a]] for a in range(n_atoms)]
        if all(np.array_equal(c, i) for c, i in zip(cur, idents)):
            out.append(w)
    return out


@dataclass(frozen=True)
class FreenessCertificate:
    words_checked: int
    classes: tuple[str, ...]
    perturbed: tuple[str, ...]  # classes that required a perturbation
    final_u: FieldElement
    distance_from_start: Fraction
    relations: tuple[str, ...]  # should be empty


def certify_free_words(
    t: FieldElement, u: FieldElement, max_len: int, delta: Fraction
) -> FreenessCertificate:
    """Greedily perturb ``u`` until no reduced word of length <= max_len is a
    relation.  Words are handled through their conjugation classes; a class
    is only perturbed when it actually evaluates to the identity, and every
    previously certified class is re-verified exactly after each step."""
    words = reduced_words(max_len)
    classes = sorted({perturbation_class(w) for w in words}, key=lambda w: (len(w), w))
    u0 = u
    perturbed = []
    certified: list[str] = []
    for cls in classes:
        if cls[-1] not in "uU":
            # conjugate of a t-power; nonzero at any depth > log2(max_len)
            if evaluate_word(cls, t, u).is_identity():
                raise ResolutionError(
                    f"odometer power {cls!r} collapses at depth {t.depth}"
                )
            certified.append(cls)
            continue
        start = 0
        while evaluate_word(cls, t, u).is_identity():
            step = free_perturbation(cls, t, u, delta, start_leaf=start)
            candidate = step.element
            if all(
                not evaluate_word(prev, t, candidate).is_identity()
                for prev in certified
                if prev[-1] in "uU"
            ):
                u = candidate
                perturbed.append(cls)
            else:
                start = step.base_leaf + 1  # try the next tower placement
        certified.append(cls)
    rels = relation_search(t, u, max_len)
    return FreenessCertificate(
        words_checked=len(words),
        classes=tuple(classes),
        perturbed=tuple(perturbed),
        final_u=u,
        distance_from_start=field_d_u(u0, u),
        relations=tuple(rels),
    )

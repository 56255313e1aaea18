"""Synthesis of depth-n permutations as words in the odometer and one swap.

Leaves in odometer order are just 0, 1, ..., 2^n - 1 (leaf encoding), and
conjugating the midpoint transposition by odometer powers walks it to every
adjacent transposition:

    T^j (swap of 2^(n-1)-1, 2^(n-1)) T^-j  =  swap of (2^(n-1)-1+j, 2^(n-1)+j)

a word of 2|j|+1 letters.  Any target is then decomposed into adjacent
transpositions by moving the largest value home first (insertion order,
deterministic, exactly inv(sigma) transpositions), and the per-transposition
words are concatenated and freely reduced.

``word_length_bound(n)`` is the exact worst case of this synthesis before
reduction, attained by the order-reversing permutation; unlike the table it
is computable in closed form for every n, which is what schedule growth
conditions need when 2^n! is out of enumeration range.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .perms import LevelPerm, d_u, embed

_INV = {"t": "T", "T": "t", "u": "U", "U": "u"}


def freely_reduce(word: str) -> str:
    out: list[str] = []
    for c in word:
        if out and out[-1] == _INV[c]:
            out.pop()
        else:
            out.append(c)
    return "".join(out)


def transposition_word(i: int, n: int) -> str:
    """Word for the adjacent transposition of leaves (i-1, i), 1 <= i < 2^n."""
    if not 1 <= i <= (1 << n) - 1:
        raise ValueError("transposition index out of range")
    j = i - (1 << (n - 1))
    if j >= 0:
        return "t" * j + "u" + "T" * j
    return "T" * (-j) + "u" + "t" * (-j)


def adjacent_decomposition(images) -> list[int]:
    """Indices a_r, ..., a_1 with sigma = s_{a_r} o ... o s_{a_1} (rightmost
    acting first), where s_i swaps leaves i-1 and i."""
    cur = list(images)
    n = len(cur)
    swaps: list[int] = []
    for value in range(n - 1, 0, -1):
        p = cur.index(value)
        while p < value:
            cur[p], cur[p + 1] = cur[p + 1], cur[p]
            swaps.append(p + 1)
            p += 1
    return list(reversed(swaps))


def element_word(images, n: int) -> str:
    """Reduced word in {t, u} evaluating to the permutation ``images``."""
    return freely_reduce(
        "".join(transposition_word(i, n) for i in adjacent_decomposition(images))
    )


def word_length_bound(n: int) -> int:
    """Exact worst-case synthesis length over all of the depth-n group
    (closed form; attained by the order-reversing permutation)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    N = 1 << n
    lens = [2 * abs(i - N // 2) + 1 for i in range(1, N)]
    return sum(l * (N - i) for i, l in zip(range(1, N), lens))


@dataclass(frozen=True)
class WordTable:
    """Words for every element of the depth-n group, keyed by image tuple."""

    n: int
    words: dict[tuple[int, ...], str]
    max_length: int
    length_bound: int

    def word_for(self, p: LevelPerm) -> str:
        if p.depth != self.n:
            raise ValueError("element depth does not match the table")
        return self.words[tuple(int(x) for x in p.images)]


def word_table(n: int) -> WordTable:
    """Enumerate the full table; feasible for n <= 3 (40320 elements)."""
    if not 2 <= n <= 3:
        raise ValueError("table enumeration is only feasible for n in {2, 3}; "
                         "use word_length_bound for larger n")
    words = {}
    max_len = 0
    for perm in itertools.permutations(range(1 << n)):
        w = element_word(perm, n)
        words[perm] = w
        max_len = max(max_len, len(w))
    return WordTable(n, words, max_len, word_length_bound(n))


def evaluate_perm_word(word: str, t: LevelPerm, u: LevelPerm) -> LevelPerm:
    """Evaluate a word over {t, T, u, U} (capitals are inverses) on a pair of
    permutations; the rightmost letter acts first."""
    depth = max(t.depth, u.depth)
    t, u = embed(t, depth), embed(u, depth)
    letters = {
        "t": t.images,
        "T": t.inverse().images,
        "u": u.images,
        "U": u.inverse().images,
    }
    cur = np.arange(1 << depth, dtype=t.images.dtype)
    for c in reversed(word):
        cur = letters[c][cur]
    return LevelPerm(depth, cur, _trusted=True)


def table_defects(table: WordTable, depth: int, t: LevelPerm, u: LevelPerm):
    """Evaluate every table word at the given depth and yield
    (images, word, defect, bound) with bound = len(word) * 2^-depth.

    The defect measures how far the word, evaluated on the depth-m odometer
    approximant, lands from the exact embedded target; it stays within the
    bound because each odometer letter costs at most 2^-depth.
    """
    m = depth
    t, u = embed(t, m), embed(u, m)
    letters = {
        "t": t.images,
        "T": t.inverse().images,
        "u": u.images,
        "U": u.inverse().images,
    }
    n_leaves = 1 << m
    reps = 1 << (m - table.n)
    blocks = np.arange(0, n_leaves, 1 << table.n, dtype=t.images.dtype)
    for images, word in table.words.items():
        cur = np.arange(n_leaves, dtype=t.images.dtype)
        for c in reversed(word):
            cur = letters[c][cur]
        target = (
            np.asarray(images, dtype=t.images.dtype)[None, :] + blocks[:, None]
        ).ravel()
        defect = Fraction(int(np.count_nonzero(cur != target)), n_leaves)
        yield images, word, defect, Fraction(len(word), n_leaves)

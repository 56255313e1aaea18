"""Breadth-first coverage probe for finite-depth generation evidence.

The probe walks reduced words in the given generators in breadth-first
order, deduplicating visited group elements by their exact image arrays,
and records for every target pattern (each depth-d permutation, lifted to
every atom) the best uniform distance achieved.  A target counts as covered
once some visited element g satisfies

    d_u(g, target)  <=  epsilon + budget(word of g),

where the budget charges each letter with the ErrorBudget of its generator
(odometer approximants cost 2^-depth per letter, exact elements cost 0).

The frontier is capped by a node budget; hitting the cap yields a report
flagged incomplete.  Expansion order is deterministic (generator order,
then first-in-first-out), so reports are reproducible bit for bit.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .fields import FieldElement


@dataclass(frozen=True)
class TargetReport:
    images: tuple[int, ...]  # the depth-d pattern
    best_distance: Fraction
    best_word: str
    covered: bool


@dataclass(frozen=True)
class CoverageReport:
    target_depth: int
    epsilon: Fraction
    max_words: int
    nodes: int
    complete: bool  # BFS exhausted all words up to max_words (no cap hit)
    stopped_on_cover: bool
    targets: tuple[TargetReport, ...]

    @property
    def covered_count(self) -> int:
        return sum(1 for t in self.targets if t.covered)

    @property
    def total(self) -> int:
        return len(self.targets)


def density_probe(
    generators: Sequence[tuple[str, FieldElement]],
    target_depth: int,
    epsilon: Fraction,
    max_words: int,
    max_nodes: int = 2_000_000,
    stop_when_covered: bool = True,
) -> CoverageReport:
    """Probe how much of the lifted depth-``target_depth`` group the words in
    ``generators`` reach.  Generator names must be single lowercase letters;
    capitals denote inverses in reported words."""
    if not generators:
        raise ValueError("need at least one generator")
    base = generators[0][1].base
    depth = max(g.depth for _, g in generators)
    if target_depth > depth:
        raise ValueError("target depth exceeds working depth")
    epsilon = Fraction(epsilon)

    letters: list[tuple[str, list[np.ndarray], Fraction]] = []
    for name, g in generators:
        if len(name) != 1 or not name.islower():
            raise ValueError("generator names must be single lowercase letters")
        if g.base != base:
            raise ValueError("generator base mismatch")
        ge = g.embed_to(depth)
        gi = ge.inverse()
        letters.append((name, [p.images for p in ge.perms], g.budget.bound))
        letters.append((name.upper(), [p.images for p in gi.perms], g.budget.bound))
    inverse_of = {}
    for name, _ in generators:
        inverse_of[name] = name.upper()
        inverse_of[name.upper()] = name

    n_leaves = 1 << depth
    n_atoms = len(base.labels)
    weight_den = math.lcm(*(w.denominator for _, w in base.atoms))
    weight_num = [int(w * weight_den) for _, w in base.atoms]
    denom = weight_den * n_leaves  # distances are (int score) / denom

    # targets: every depth-d permutation, lifted uniformly and embedded
    blocks = np.arange(0, n_leaves, 1 << target_depth, dtype=np.uint32)
    target_list = list(itertools.permutations(range(1 << target_depth)))
    target_arrays = np.stack(
        [
            (np.asarray(t, dtype=np.uint32)[None, :] + blocks[:, None]).ravel()
            for t in target_list
        ]
    )

    best_score = {t: None for t in target_list}
    best_word = {t: "" for t in target_list}
    covered = {t: False for t in target_list}

    def inspect(state: list[np.ndarray], word: str, budget: Fraction):
        score = np.zeros(len(target_list), dtype=np.int64)
        for a in range(n_atoms):
            diff = (target_arrays != state[a][None, :]).sum(axis=1)
            score += weight_num[a] * diff
        tol = epsilon + budget
        for idx, t in enumerate(target_list):
            sc = int(score[idx])
            if best_score[t] is None or sc < best_score[t]:
                best_score[t] = sc
                best_word[t] = word
            if not covered[t] and Fraction(sc, denom) <= tol:
                covered[t] = True

    ident = np.arange(n_leaves, dtype=np.uint32)
    start = [ident] * n_atoms
    visited = {b"".join(s.tobytes() for s in start)}
    inspect(start, "", Fraction(0))
    frontier: list[tuple[list[np.ndarray], str, Fraction]] = [
        (start, "", Fraction(0))
    ]
    nodes = 1
    complete = True
    stopped_on_cover = False

    level = 0
    while frontier and level < max_words:
        if stop_when_covered and all(covered.values()):
            stopped_on_cover = True
            break
        new_frontier = []
        for state, word, budget in frontier:
            last = word[0] if word else ""
            for name, arrays, letter_budget in letters:
                if last and name == inverse_of[last]:
                    continue
                if nodes >= max_nodes:
                    complete = False
                    break
                new_state = [arrays[a][state[a]] for a in range(n_atoms)]
                key = b"".join(s.tobytes() for s in new_state)
                if key in visited:
                    continue
                visited.add(key)
                nodes += 1
                new_word = name + word  # new letter acts last
                new_budget = budget + letter_budget
                inspect(new_state, new_word, new_budget)
                new_frontier.append((new_state, new_word, new_budget))
            if not complete:
                break
        frontier = new_frontier
        level += 1
        if not complete:
            break

    reports = tuple(
        TargetReport(
            images=t,
            best_distance=Fraction(best_score[t], denom),
            best_word=best_word[t],
            covered=covered[t],
        )
        for t in target_list
    )
    return CoverageReport(
        target_depth=target_depth,
        epsilon=epsilon,
        max_words=max_words,
        nodes=nodes,
        complete=complete,
        stopped_on_cover=stopped_on_cover,
        targets=reports,
    )

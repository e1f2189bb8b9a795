"""Finitely generated ideal families of subsets and the two membership
notions for operators: geometric (supported over a certified subset) and
ghostly (threshold supports certified at every scale on a grid).

A family is described by its generators; a set belongs to the family when
it fits inside a k-neighbourhood of a union of generators.  At finite scale
the union size and the neighbourhood radius must be capped, otherwise every
set is trivially covered; both caps are explicit parameters and are echoed
into every certificate.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .operator import operator_norm
from .space import neighbourhood

DEFAULT_EPS_GRID = tuple(2.0 ** -k for k in range(1, 13))
EXACT_SUBSET_SEARCH_LIMIT = 5000


class IdealError(ValueError):
    pass


@dataclass(frozen=True)
class MembershipCertificate:
    generator_indices: tuple
    k: float


@dataclass(frozen=True)
class IdealFamily:
    """Generators plus the closure caps used by the membership search.

    max_union None means unions of all generators are allowed; a finite
    value m restricts covers to unions of at most m generators, which is
    how "finite union" keeps content on a finite space.
    """

    space: object
    generators: tuple  # tuple of frozensets of point ids
    max_union: object = None  # None or int
    k_grid: tuple = (0, 1, 2, 3, 5, 8, 13, 21)

    def __post_init__(self):
        gens = tuple(frozenset(g) for g in self.generators)
        object.__setattr__(self, "generators", gens)
        for g in gens:
            if not set(g) <= set(self.space.points):
                raise IdealError("generator contains points outside the space")

    def union_cap(self):
        return len(self.generators) if self.max_union is None \
            else min(self.max_union, len(self.generators))

    def candidate_sets(self, k_cap):
        """Certified sets N_k(union of <= cap generators), deduplicated,
        yielded with their certificates."""
        seen = set()
        cap = self.union_cap()
        ks = [k for k in self.k_grid if k <= k_cap]
        for k in ks:
            hoods = [frozenset(neighbourhood(self.space, g, k))
                     for g in self.generators]
            for size in range(1, cap + 1):
                for combo in itertools.combinations(
                        range(len(self.generators)), size):
                    Y = frozenset().union(*(hoods[i] for i in combo))
                    if Y not in seen:
                        seen.add(Y)
                        yield Y, MembershipCertificate(combo, k)


def spatial_ideal(space, A):
    """Single-generator family of the subsets staying near A."""
    return IdealFamily(space, (frozenset(A),))


def finite_sets_family(space, seeds, max_union, k_grid=None):
    """Desk-scale stand-in for the family of finite subsets: singleton (or
    small) generators with a hard union cap so that the whole space is not
    trivially covered."""
    gens = tuple(frozenset(s if isinstance(s, (set, frozenset, list, tuple))
                           else (s,)) for s in seeds)
    kwargs = {} if k_grid is None else {"k_grid": tuple(k_grid)}
    return IdealFamily(space, gens, max_union=max_union, **kwargs)


def ideal_membership(family, Z, k_cap):
    """Is Z covered by N_k(union of <= cap generators) with k <= k_cap?

    Returns (bool, certificate-or-None).  Small generator pools are searched
    exhaustively (fewest generators first, then smallest k); large pools
    fall back to a greedy cover.
    """
    Z = set(Z)
    if k_cap < 0:
        raise IdealError("k_cap must be non-negative")
    if not Z:
        return True, MembershipCertificate((), 0)
    gens = family.generators
    if not gens:
        return False, None
    cap = family.union_cap()
    ks = [k for k in family.k_grid if k <= k_cap]
    n_combos = sum(1 for size in range(1, cap + 1)
                   for _ in itertools.combinations(range(len(gens)), size))
    exhaustive = n_combos * max(len(ks), 1) <= EXACT_SUBSET_SEARCH_LIMIT
    for k in ks:
        hoods = [frozenset(neighbourhood(family.space, g, k)) for g in gens]
        if exhaustive:
            for size in range(1, cap + 1):
                for combo in itertools.combinations(range(len(gens)), size):
                    if Z <= set().union(*(hoods[i] for i in combo)):
                        return True, MembershipCertificate(combo, k)
        else:
            chosen, covered = [], set()
            for _ in range(cap):
                best, best_gain = None, 0
                for i, h in enumerate(hoods):
                    if i in chosen:
                        continue
                    gain = len((Z & h) - covered)
                    if gain > best_gain:
                        best, best_gain = i, gain
                if best is None:
                    break
                chosen.append(best)
                covered |= hoods[best]
                if Z <= covered:
                    return True, MembershipCertificate(tuple(chosen), k)
    return False, None


def principal_direction_family(T, eps_grid=DEFAULT_EPS_GRID):
    """Family generated by the row projections of the threshold supports of
    T, one generator per threshold (deduplicated)."""
    if not eps_grid:
        raise IdealError("threshold grid must be nonempty")
    gens, seen = [], set()
    for eps in eps_grid:
        g = frozenset(T.epsilon_rows(eps))
        if g and g not in seen:
            seen.add(g)
            gens.append(g)
    if not gens:
        gens = [frozenset()]
    return IdealFamily(T.space, tuple(gens))


def ghostly_membership(T, family, eps_grid=DEFAULT_EPS_GRID, k_cap=None):
    """T is ghostly for the family when the row projection of its
    eps-support is covered at every threshold of the grid.

    Returns (bool, largest failing threshold or None).
    """
    if k_cap is None:
        k_cap = default_k_cap(family.space)
    failing = None
    for eps in sorted(eps_grid, reverse=True):
        Z = T.epsilon_rows(eps)
        ok, _ = ideal_membership(family, Z, k_cap)
        if not ok:
            failing = eps if failing is None else max(failing, eps)
    return failing is None, failing


def geometric_distance(T, family, tol=1e-9, k_cap=None):
    """Upper bound on the distance from T to operators supported over a
    certified set: min over certified Y of ||T - restriction of T to Y x Y||.
    `tol` is the norm-estimation tolerance."""
    if k_cap is None:
        k_cap = default_k_cap(family.space)
    best = operator_norm(T, tol) if not T.is_zero() else 0.0
    for Y, _cert in family.candidate_sets(k_cap):
        diff = T - T.window_restrict(Y, Y)
        d = 0.0 if diff.is_zero() else operator_norm(diff, tol)
        best = min(best, d)
        if best == 0.0:
            break
    return best


def block_lower_bound(T, family, blocks, tol=1e-9, k_cap=None):
    """Lower bound on the distance from T to operators supported over a
    certified set, exhibited on pairwise-disjoint probe blocks: for every
    certified Y pick a block disjoint from Y and measure the corner norm
    there.  A Y with no disjoint block contributes 0."""
    blocks = [frozenset(b) for b in blocks]
    for a, b in itertools.combinations(blocks, 2):
        if a & b:
            raise IdealError("probe blocks overlap")
    if k_cap is None:
        k_cap = default_k_cap(family.space)
    corner_norms = {}

    def corner(block):
        if block not in corner_norms:
            op = T.window_restrict(block, block)
            corner_norms[block] = 0.0 if op.is_zero() else operator_norm(op, tol)
        return corner_norms[block]

    bound = None
    for Y, _cert in family.candidate_sets(k_cap):
        disjoint = [b for b in blocks if not (b & Y)]
        value = max((corner(b) for b in disjoint), default=0.0)
        bound = value if bound is None else min(bound, value)
        if bound == 0.0:
            break
    return 0.0 if bound is None else bound


def default_k_cap(space):
    """A quarter of the diameter: large radii saturate a finite space and
    would trivialize membership."""
    return space.diameter() / 4.0

import numpy as np
import pytest

from roelab import (
    BandOperator,
    IdealError,
    IdealFamily,
    block_lower_bound,
    build_graph_space,
    build_grid_space,
    default_k_cap,
    finite_sets_family,
    geometric_distance,
    ghostly_membership,
    ideal_membership,
    principal_direction_family,
    spatial_ideal,
)
from roelab.cli import random_band_operator


def strip(space, theta, width):
    """Grid points within `width` of the line through the origin at angle
    theta."""
    out = set()
    for p in space.points:
        x, y = space.coords(p)
        if abs(-x * np.sin(theta) + y * np.cos(theta)) <= width:
            out.add(p)
    return frozenset(out)


class TestMembership:
    def test_subset_of_generator(self):
        sp = build_grid_space(1, 50, "graph")
        fam = IdealFamily(sp, (frozenset(range(10)),))
        ok, cert = ideal_membership(fam, {2, 5, 9}, k_cap=5)
        assert ok and cert.k == 0

    def test_evens_cover_window(self):
        sp = build_grid_space(1, 100, "graph")
        evens = frozenset(range(0, 100, 2))
        fam = IdealFamily(sp, (evens,))
        ok, cert = ideal_membership(fam, set(range(100)), k_cap=1)
        assert ok and cert.k == 1

    def test_oblique_strip_not_covered(self):
        L = 40
        sp = build_grid_space(2, L, "graph")
        gens = tuple(strip(sp, t, 2.0)
                     for t in (0.0, np.pi / 4, np.pi / 2))
        fam = IdealFamily(sp, gens)
        Z = strip(sp, np.pi / 8, 2.0)
        ok, _ = ideal_membership(fam, Z, k_cap=L / 10)
        assert not ok

    def test_empty_set_always_member(self):
        sp = build_grid_space(1, 10, "graph")
        fam = IdealFamily(sp, (frozenset({3}),))
        ok, _ = ideal_membership(fam, set(), k_cap=0)
        assert ok

    def test_generator_outside_space(self):
        sp = build_grid_space(1, 10, "graph")
        with pytest.raises(IdealError):
            IdealFamily(sp, (frozenset({99}),))


class TestClosureProperties:
    def setup_method(self):
        self.sp = build_grid_space(1, 60, "graph")
        self.fam = IdealFamily(self.sp, (frozenset(range(10)),
                                         frozenset(range(30, 40))))

    def test_closed_under_subsets(self):
        Z = set(range(5, 10)) | set(range(33, 37))
        ok, _ = ideal_membership(self.fam, Z, k_cap=3)
        assert ok
        ok_sub, _ = ideal_membership(self.fam, set(list(Z)[:3]), k_cap=3)
        assert ok_sub

    def test_closed_under_finite_unions(self):
        ok, cert = ideal_membership(self.fam,
                                    set(range(10)) | set(range(30, 40)),
                                    k_cap=0)
        assert ok and set(cert.generator_indices) == {0, 1}

    def test_closed_under_neighbourhoods(self):
        from roelab import neighbourhood
        Z = neighbourhood(self.sp, range(10), 3)
        ok, cert = ideal_membership(self.fam, Z, k_cap=3)
        assert ok and cert.k == 3

    def test_max_union_cap_has_content(self):
        # with a union cap the two generators cannot be combined
        capped = IdealFamily(self.sp, self.fam.generators, max_union=1)
        ok, _ = ideal_membership(capped,
                                 set(range(10)) | set(range(30, 40)),
                                 k_cap=1)
        assert not ok


class TestSpatialIdeal:
    def test_full_space_accepts_everything(self):
        sp = build_grid_space(1, 30, "graph")
        fam = spatial_ideal(sp, set(sp.points))
        ok, _ = ideal_membership(fam, {0, 29, 13}, k_cap=0)
        assert ok

    def test_empty_generator_rejects_nonempty(self):
        sp = build_grid_space(1, 30, "graph")
        fam = spatial_ideal(sp, set())
        assert ideal_membership(fam, set(), k_cap=5)[0]
        assert not ideal_membership(fam, {0}, k_cap=5)[0]

    def test_separated_column_not_member(self):
        # two far-apart components; one is no k-neighbourhood of the other
        sp = build_graph_space([(0, 1), (2, 3)], separation_schedule=[8, 8])
        fam = spatial_ideal(sp, {0, 1})
        ok, _ = ideal_membership(fam, {2, 3}, k_cap=10)
        assert not ok


class TestPrincipalFamily:
    def test_identity_generates_full_space(self):
        sp = build_grid_space(1, 25, "graph")
        fam = principal_direction_family(BandOperator.identity(sp))
        assert frozenset(sp.points) in fam.generators

    def test_block_supported(self):
        sp = build_grid_space(1, 25, "graph")
        B = range(5, 10)
        T = BandOperator.from_entries(
            sp, {(x, y): 1.0 for x in B for y in B})
        fam = principal_direction_family(T)
        assert fam.generators == (frozenset(B),)


class TestGhostlyMembership:
    def test_full_space_family_accepts_all(self):
        sp = build_grid_space(1, 40, "graph")
        fam = spatial_ideal(sp, set(sp.points))
        T = random_band_operator(sp, 2, 0.5, seed=0)
        ok, failing = ghostly_membership(T, fam)
        assert ok and failing is None

    def test_rank_one_in_finite_sets_family(self):
        sp = build_grid_space(1, 40, "graph")
        T = BandOperator.from_entries(sp, {(7, 8): 2.0})
        fam = finite_sets_family(sp, [7, 20], max_union=2)
        ok, _ = ghostly_membership(T, fam)
        assert ok

    def test_far_mass_fails_with_witness_threshold(self):
        sp = build_grid_space(1, 40, "graph")
        T = BandOperator.from_entries(sp, {(0, 0): 1.0, (35, 35): 0.3})
        fam = finite_sets_family(sp, [0], max_union=1, k_grid=(0, 1, 2))
        ok, failing = ghostly_membership(T, fam, k_cap=2)
        assert not ok
        assert failing == 0.25  # largest grid threshold at or below 0.3


class TestGeometricDistance:
    def test_supported_in_generator(self):
        sp = build_grid_space(1, 40, "graph")
        fam = spatial_ideal(sp, set(range(10)))
        T = BandOperator.from_entries(
            sp, {(x, y): 1.0 for x in range(4) for y in range(4)})
        assert geometric_distance(T, fam, k_cap=3) == 0.0

    def test_escaping_block_keeps_distance(self):
        sp = build_graph_space([(0, 1), (2, 3)],
                               separation_schedule=[30, 30])
        fam = spatial_ideal(sp, {0, 1})
        T = BandOperator.from_entries(sp, {(2, 2): 1.0, (3, 3): 1.0,
                                           (0, 0): 1.0})
        # any certified set misses the far block, whose corner has norm 1
        d = geometric_distance(T, fam, k_cap=10)
        assert d == pytest.approx(1.0, abs=1e-12)

    def test_small_tail_small_distance(self):
        sp = build_grid_space(1, 40, "graph")
        fam = spatial_ideal(sp, set(range(20)))
        entries = {(x, x): 1.0 for x in range(20)}
        entries[(30, 30)] = 1e-3
        T = BandOperator.from_entries(sp, entries)
        assert geometric_distance(T, fam, k_cap=5) <= 1e-3 + 1e-12


class TestBlockLowerBound:
    def test_zero_on_blocks(self):
        sp = build_grid_space(1, 40, "graph")
        fam = spatial_ideal(sp, set(range(10)))
        T = BandOperator.from_entries(sp, {(0, 0): 1.0})
        assert block_lower_bound(T, fam, [{30, 31}, {35, 36}], k_cap=2) == 0.0

    def test_norm_one_escaping_blocks(self):
        sp = build_graph_space([(0, 1), (2, 3), (4, 5)],
                               separation_schedule=[40, 50, 60])
        fam = spatial_ideal(sp, {0, 1})
        entries = {(p, p): 1.0 for p in (2, 3, 4, 5)}
        T = BandOperator.from_entries(sp, entries)
        bound = block_lower_bound(T, fam, [{2, 3}, {4, 5}], k_cap=10)
        assert bound == pytest.approx(1.0, abs=1e-12)

    def test_overlapping_blocks_rejected(self):
        sp = build_grid_space(1, 10, "graph")
        fam = spatial_ideal(sp, {0})
        T = BandOperator.identity(sp)
        with pytest.raises(IdealError):
            block_lower_bound(T, fam, [{1, 2}, {2, 3}])


def test_default_k_cap_quarter_diameter():
    sp = build_grid_space(1, 41, "graph")
    assert default_k_cap(sp) == 10.0

import itertools

import pytest
from hypothesis import given, strategies as st

from conftest import closure, generator_sets, images
from scalelab.limits import LimitExceeded, ParseError, using
from scalelab.perm import (
    Permutation,
    PermGroup,
    compose,
    coset_action,
    fingerprint,
    group_order,
    is_abelian,
    is_primitive,
    is_transitive,
    minimal_blocks,
    orbits,
    parse_cycles,
)

SWAP = "(0 3)(1 4)(2 5)"
ROT = "(0 1 2)(3 4 5)"


def brute_blocks(G):
    """All nontrivial block systems, by checking every partition induced by a pair."""
    n = G.degree
    found = []
    for b in range(1, n):
        sys_ = G.block_system_containing(0, b)
        if 1 < len(sys_) < n:
            found.append(sys_)
    return found


class TestParsing:
    def test_residue_generators(self):
        assert parse_cycles(SWAP, 6).images == (3, 4, 5, 0, 1, 2)
        assert parse_cycles(ROT, 6).images == (1, 2, 0, 4, 5, 3)

    def test_empty_is_identity(self):
        assert parse_cycles("", 4).is_identity()
        assert parse_cycles("()", 4).is_identity()

    @pytest.mark.parametrize("text", ["(0 1)(1 2)", "(0 0)", "(0 7)", "(0 1", "0 1)", "(a b)"])
    def test_rejects(self, text):
        with pytest.raises(ParseError):
            parse_cycles(text, 4)

    def test_rejects_bad_bijection(self):
        with pytest.raises(ValueError):
            Permutation((0, 0, 1))

    @given(images(7))
    def test_cycle_round_trip(self, imgs):
        p = Permutation(imgs)
        assert parse_cycles(p.to_cycles(), 7) == p

    @given(images(5))
    def test_json_round_trip(self, imgs):
        p = Permutation(imgs)
        assert Permutation.from_json(p.to_json()) == p


class TestCompose:
    def test_hand_expansion(self):
        g, h = parse_cycles(SWAP, 6), parse_cycles(ROT, 6)
        assert compose(g, h).images == (4, 5, 3, 1, 2, 0)
        assert compose(g, h) == compose(h, g)

    def test_identity_and_involution(self):
        h = parse_cycles("(0 2 1)", 3)
        assert compose(Permutation.identity(3), h) == h
        s = parse_cycles("(0 1)", 2)
        assert compose(s, s).is_identity()

    def test_degree_mismatch(self):
        with pytest.raises(ValueError):
            compose(Permutation.identity(2), Permutation.identity(3))

    @given(images(6), images(6), st.integers(0, 5))
    def test_left_action(self, g, h, x):
        gp, hp = Permutation(g), Permutation(h)
        assert compose(gp, hp)(x) == gp(hp(x))

    @given(images(6), images(6), images(6))
    def test_associative_with_inverses(self, a, b, c):
        a, b, c = Permutation(a), Permutation(b), Permutation(c)
        assert (a * b) * c == a * (b * c)
        assert (a * a.inverse()).is_identity()

    @given(images(7), st.integers(-6, 6))
    def test_power_matches_order(self, g, e):
        p = Permutation(g)
        assert (p ** p.order()).is_identity()
        assert p ** e * p ** (-e) == Permutation.identity(7)


class TestOrder:
    def test_residue_group(self):
        G = PermGroup(6, [parse_cycles(SWAP, 6), parse_cycles(ROT, 6)])
        assert group_order(G) == 6
        assert len(closure(6, [g.images for g in G.generators])) == 6

    def test_trivial_and_cyclic(self):
        assert group_order(PermGroup(5, [])) == 1
        assert group_order(PermGroup(4, [parse_cycles("(0 1 2 3)", 4)])) == 4

    def test_symmetric_groups(self):
        for n in range(2, 8):
            gens = [parse_cycles("(0 1)", n), Permutation(tuple(range(1, n)) + (0,))]
            assert group_order(PermGroup(n, gens)) == __import__("math").factorial(n)

    def test_degree_limit(self):
        with using(max_degree=3), pytest.raises(LimitExceeded):
            PermGroup(4, [parse_cycles("(0 1)", 4)])

    @given(generator_sets())
    def test_order_matches_closure(self, data):
        n, gens = data
        G = PermGroup(n, gens)
        assert G.order() == len(closure(n, gens))

    @given(generator_sets())
    def test_membership_matches_closure(self, data):
        n, gens = data
        G = PermGroup(n, gens)
        elems = closure(n, gens)
        for p in itertools.islice(itertools.permutations(range(n)), 200):
            assert G.contains(p) == (p in elems)

    @given(generator_sets(max_degree=6))
    def test_elements_enumeration(self, data):
        n, gens = data
        G = PermGroup(n, gens)
        assert {e.images for e in G.elements()} == closure(n, gens)

    @given(generator_sets())
    def test_orbit_sizes_divide_order(self, data):
        n, gens = data
        G = PermGroup(n, gens)
        for orb in orbits(G):
            assert G.order() % len(orb) == 0
            assert G.order() == len(orb) * G.stabilizer(orb[0]).order()


class TestOrbits:
    def test_examples(self):
        G = PermGroup(3, [parse_cycles("(0 1)", 3)])
        assert sorted(map(sorted, orbits(G))) == [[0, 1], [2]]
        assert not is_transitive(G)
        assert is_transitive(PermGroup(6, [parse_cycles("(0 1 2 3 4 5)", 6)]))
        assert is_transitive(PermGroup(6, [parse_cycles(SWAP, 6), parse_cycles(ROT, 6)]))

    @given(generator_sets())
    def test_orbits_partition(self, data):
        n, gens = data
        G = PermGroup(n, gens)
        parts = orbits(G)
        assert sorted(x for o in parts for x in o) == list(range(n))
        for o in parts:
            for g in gens:
                assert {g[x] for x in o} == set(o)


class TestBlocks:
    def test_regular_residue_group(self):
        G = PermGroup(6, [parse_cycles(SWAP, 6), parse_cycles(ROT, 6)])
        systems = [sorted(map(sorted, s)) for s in minimal_blocks(G)]
        assert not is_primitive(G)
        assert [[0, 3], [1, 4], [2, 5]] in systems

    def test_regular_sym3(self):
        G = PermGroup(6, [parse_cycles("(0 1 2)(3 5 4)", 6), parse_cycles(SWAP, 6)])
        assert G.order() == 6 and not G.is_abelian() and G.is_transitive()
        assert minimal_blocks(G) and not is_primitive(G)

    def test_prime_degree_is_primitive(self):
        G = PermGroup(3, [parse_cycles("(0 1)", 3), parse_cycles("(0 1 2)", 3)])
        assert is_primitive(G) and minimal_blocks(G) == []

    def test_cyclic_four(self):
        G = PermGroup(4, [parse_cycles("(0 1 2 3)", 4)])
        assert [sorted(map(sorted, s)) for s in minimal_blocks(G)] == [[[0, 2], [1, 3]]]

    def test_intransitive_rejected(self):
        with pytest.raises(ValueError):
            minimal_blocks(PermGroup(3, [parse_cycles("(0 1)", 3)]))

    @given(generator_sets(min_degree=3, max_degree=8))
    def test_block_systems_are_preserved(self, data):
        n, gens = data
        G = PermGroup(n, gens)
        if not G.is_transitive():
            return
        systems = minimal_blocks(G)
        assert is_primitive(G) == (not systems)
        assert bool(systems) == bool(brute_blocks(G))
        for s in systems:
            blocks = [frozenset(b) for b in s]
            for g in gens:
                assert {frozenset(g[x] for x in b) for b in blocks} == set(blocks)


class TestCosetAction:
    def test_regular_cyclic(self):
        G = PermGroup(4, [parse_cycles("(0 1 2 3)", 4)])
        ca = coset_action(G, PermGroup(4, []))
        assert ca.group.degree == 4 and ca.group.order() == 4
        assert ca.group.generators[0].to_cycles() == "(0 1 2 3)"

    def test_whole_group(self):
        G = PermGroup(4, [parse_cycles("(0 1 2 3)", 4)])
        assert coset_action(G, G).group.degree == 1

    def test_not_a_subgroup(self):
        G = PermGroup(4, [parse_cycles("(0 1 2 3)", 4)])
        with pytest.raises(ValueError):
            coset_action(G, [Permutation.identity(4), parse_cycles("(0 1)", 4)])

    def test_index_limit(self):
        G = PermGroup(6, [parse_cycles("(0 1)", 6), parse_cycles("(0 1 2 3 4 5)", 6)])
        with using(max_points=10), pytest.raises(LimitExceeded):
            coset_action(G, PermGroup(6, []))

    @given(generator_sets(min_degree=3, max_degree=7))
    def test_stabilizer_cosets_match_orbit(self, data):
        n, gens = data
        G = PermGroup(n, gens)
        x = 0
        ca = coset_action(G, x)
        pts = [r(x) for r in ca.representatives]
        assert sorted(pts) == sorted(G.orbit(x))
        for s, t in zip(G.generators, ca.group.generators):
            for i in range(ca.group.degree):
                assert pts[t(i)] == s(pts[i])


class TestFingerprint:
    def test_residue_is_cyclic_six(self):
        G = PermGroup(6, [parse_cycles(SWAP, 6), parse_cycles(ROT, 6)])
        fp = fingerprint(G)
        assert fp.order == 6 and fp.abelian and is_abelian(G)
        assert fp.histogram == {1: 1, 2: 1, 3: 2, 6: 2}

    def test_sym3_and_trivial(self):
        S3 = PermGroup(3, [parse_cycles("(0 1)", 3), parse_cycles("(0 1 2)", 3)])
        assert not is_abelian(S3)
        fp = fingerprint(PermGroup(2, []))
        assert fp.order == 1 and fp.abelian

    def test_large_group_is_order_only(self):
        n = 11
        G = PermGroup(n, [parse_cycles("(0 1)", n), Permutation(tuple(range(1, n)) + (0,))])
        with using(max_closure=1000):
            fp = fingerprint(G)
        assert fp.order_only and fp.order == 39916800

    @given(generator_sets(max_degree=6))
    def test_histogram_sums_to_order(self, data):
        n, gens = data
        G = PermGroup(n, gens)
        fp = fingerprint(G)
        assert sum(fp.histogram.values()) == fp.order == len(closure(n, gens))
        assert fp.abelian == all(
            tuple(a[b[x]] for x in range(n)) == tuple(b[a[x]] for x in range(n)) for a in gens for b in gens
        )


class TestExtendPartial:
    @given(generator_sets(min_degree=3, max_degree=6))
    def test_extension_agrees_on_prefix(self, data):
        n, gens = data
        G = PermGroup(n, gens)
        elems = sorted(closure(n, gens))
        g = elems[len(elems) // 2]
        target = {0: g[0], 1: g[1]}
        found = G.extend_partial(target)
        assert found is not None and found(0) == g[0] and found(1) == g[1]
        assert G.contains(found)

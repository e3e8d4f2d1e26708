import json

import pytest
from hypothesis import given, strategies as st

from conftest import generator_sets
from scalelab.automata import builtin, check_self_replicating
from scalelab.perm import PermGroup, parse_cycles
from scalelab.residue import coset_equivalence_check, index_check, residue, uniqueness_criterion

GRIG = builtin("grigorchuk")


def perm_group(n, *cycles):
    return PermGroup(n, [parse_cycles(c, n) for c in cycles])


class TestResidue:
    @pytest.mark.parametrize("q", [2, 3, 4])
    def test_universal_is_sym(self, q):
        rep = residue(builtin("universal", q=q), 1)
        assert rep.order == {2: 2, 3: 6, 4: 24}[q]

    @pytest.mark.parametrize("p,d", [(2, 3), (3, 2), (5, 2)])
    def test_odometer_cyclic(self, p, d):
        rep = residue(builtin("odometer", q=p), d)
        assert rep.order == p ** d and rep.fingerprint.abelian
        assert rep.group.is_transitive()
        assert rep.fingerprint.histogram[p ** d] > 0

    def test_trivial(self):
        from scalelab.automata import WreathRecursion
        assert residue(WreathRecursion(2, {}, ["1"]), 3).order == 1

    def test_json(self):
        obj = residue(builtin("odometer", q=2), 2).to_json()
        assert set(obj) >= {"d", "order", "abelian", "generators", "element_order_histogram"}
        assert obj["order"] == 4 and obj["generators"] == ["(0 2 1 3)"]
        assert obj["element_order_histogram"] == {"1": 1, "2": 1, "4": 2}
        json.dumps(obj)

    def test_rejects_other_types(self):
        with pytest.raises(TypeError):
            residue(object(), 1)

    @pytest.mark.parametrize("name", ["grigorchuk", "gupta_sidki_3", "odometer"])
    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_transitive_degree(self, name, d):
        rec = builtin(name)
        rep = residue(rec, d)
        assert rep.group.degree == rec.q ** d
        if check_self_replicating(rec, d)["ok"]:
            assert rep.group.is_transitive()


class TestCosetEquivalence:
    def test_odometer(self):
        r = coset_equivalence_check(builtin("odometer", q=2), 2, "00")
        assert r.equivalent and r.coset_count == 4
        assert sorted(r.bijection.values()) == [(0, 0), (0, 1), (1, 0), (1, 1)]

    @pytest.mark.parametrize("w", ["00", "01", "10", "11"])
    def test_grigorchuk(self, w):
        assert coset_equivalence_check(GRIG, 2, w).equivalent

    def test_depth_zero(self):
        assert coset_equivalence_check(GRIG, 0).equivalent

    def test_intransitive(self):
        with pytest.raises(ValueError):
            coset_equivalence_check(builtin("root_swap"), 2)

    def test_wrong_level(self):
        with pytest.raises(ValueError):
            coset_equivalence_check(GRIG, 2, "0")

    @given(st.sampled_from(["grigorchuk", "gupta_sidki_3", "odometer"]), st.integers(1, 3), st.data())
    def test_self_replicating_implies_equivalent(self, name, d, data):
        rec = builtin(name)
        w = "".join(str(data.draw(st.integers(0, rec.q - 1))) for _ in range(d))
        r = coset_equivalence_check(rec, d, w)
        assert r.equivalent and r.coset_count == rec.q ** d
        assert r.bijection[0] == tuple(int(c) for c in w)


class TestUniqueness:
    def test_regular_sym3(self):
        G = perm_group(6, "(0 1 2)(3 5 4)", "(0 3)(1 4)(2 5)")
        r = uniqueness_criterion(G)
        assert not r.unique_up_to_conjugacy and r.witness_blocks

    @pytest.mark.parametrize("q", [3, 4, 5])
    def test_natural_sym(self, q):
        G = perm_group(q, "(0 1)", "(" + " ".join(map(str, range(q))) + ")")
        assert uniqueness_criterion(G).unique_up_to_conjugacy

    def test_c4(self):
        r = uniqueness_criterion(perm_group(4, "(0 1 2 3)"))
        assert not r.unique_up_to_conjugacy
        assert sorted(map(sorted, r.witness_blocks)) == [[0, 2], [1, 3]]

    def test_intransitive(self):
        with pytest.raises(ValueError):
            uniqueness_criterion(perm_group(4, "(0 1)"))

    @pytest.mark.parametrize("n", range(2, 13))
    def test_regular_cyclic(self, n):
        r = uniqueness_criterion(perm_group(n, "(" + " ".join(map(str, range(n))) + ")"))
        prime = all(n % k for k in range(2, n))
        assert r.unique_up_to_conjugacy == prime

    @given(generator_sets(3, 6, 3))
    def test_blocks_are_blocks(self, data):
        n, gens = data
        G = PermGroup(n, gens)
        if not G.is_transitive():
            return
        r = uniqueness_criterion(G)
        if r.witness_blocks is None:
            assert G.is_primitive()
            return
        blocks = [frozenset(b) for b in r.witness_blocks]
        assert 1 < len(blocks[0]) < n
        for g in G.generators:
            assert {frozenset(g(x) for x in b) for b in blocks} == set(blocks)


class TestIndex:
    def test_examples(self):
        assert index_check(builtin("odometer", q=3)) == 3
        assert index_check(builtin("full_sym_level", q=4, depth=2)) == 4
        assert index_check(builtin("root_swap", q=3)) == 2

from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from scalelab.corr import check_compatible
from scalelab.padic import (
    PAdicWindow,
    PrecisionError,
    affine,
    affine_act,
    base_vertex,
    digits_of,
    format_padic,
    label_edges,
    label_of,
    odometer_extract,
    parse_padic,
    scale_generators,
    transversal,
    valuation,
    value_of,
    vertex_of,
)
from scalelab.trees import UnrootedVertex, Window, busemann, spine, standard_labelling

PRIMES = [2, 3, 5]


def window_vertices(p, R=1, D=2):
    return list(Window(p, R, D).vertices())


@st.composite
def affines(draw, p=None):
    p = p or draw(st.sampled_from(PRIMES))
    num = draw(st.integers(-50, 50))
    den_pow = draw(st.integers(0, 2))
    b = Fraction(num, p ** den_pow)
    unit = draw(st.integers(1, 200).filter(lambda u: u % p))
    k = draw(st.integers(-1, 1))
    sign = draw(st.sampled_from([1, -1]))
    return affine(p, b, sign * unit * Fraction(p) ** k)


@st.composite
def affine_pairs(draw):
    p = draw(st.sampled_from(PRIMES))
    return draw(affines(p)), draw(affines(p))


class TestArithmetic:
    def test_valuation(self):
        assert valuation(50, 5) == 2
        assert valuation(Fraction(3, 25), 5) == -2
        assert valuation(0, 5) is None

    def test_digits(self):
        assert digits_of(-1, 3, 0, 3) == [2, 2, 2, 2]
        assert digits_of(Fraction(1, 2), 5, 0, 2) == [3, 2, 2]
        with pytest.raises(PrecisionError):
            digits_of(Fraction(1, 5), 5, 0, 1)

    def test_window_json(self):
        w = PAdicWindow.from_value(Fraction(7, 5), 5, -1, 4)
        assert w.to_json() == {"p": 5, "floor": -1, "digits": [2, 1, 0, 0]}
        assert PAdicWindow.from_json(w.to_json()) == w

    def test_bad_digit(self):
        with pytest.raises(ValueError):
            PAdicWindow(5, 0, (5,))

    def test_literal(self):
        w = PAdicWindow.from_value(Fraction(7, 5), 5, -1, 4)
        assert format_padic(w) == "...0 0 1 . 2@5"
        assert parse_padic("...0 0 1 . 2@5") == w
        assert parse_padic("12.3@5").value() == Fraction(7) + Fraction(3, 5)
        with pytest.raises(ValueError):
            parse_padic("12")

    @given(st.sampled_from([2, 3, 5, 11]), st.integers(-3, 3), st.lists(st.integers(0, 100), min_size=1, max_size=6))
    def test_literal_round_trip(self, p, floor, raw):
        w = PAdicWindow(p, floor, tuple(x % p for x in raw))
        back = parse_padic(format_padic(w))
        assert back.value() == w.value() and back.known_to == w.known_to


class TestAction:
    def test_identity(self):
        for v in window_vertices(5):
            assert affine_act(0, 1, v) == v

    def test_hyperbolic(self):
        assert affine_act(0, 5, vertex_of(0, 0, 5)) == vertex_of(0, 1, 5)
        assert affine_act(0, 5, spine(5, 0)) == spine(5, 1)

    def test_translation(self):
        assert affine_act(1, 1, vertex_of(0, 0, 5)) == vertex_of(1, 0, 5)

    def test_vertex_value_round_trip(self):
        v = UnrootedVertex(5, 2, (1, 0, 3))
        assert vertex_of(value_of(v), 2, 5) == v

    def test_zero_scalar(self):
        with pytest.raises(ValueError):
            affine_act(0, 0, spine(5, 0))

    def test_precision(self):
        b = PAdicWindow.from_value(1, 5, 0, 2)
        assert affine_act(b, 1, spine(5, 1)) == vertex_of(1, 1, 5)
        with pytest.raises(PrecisionError):
            affine_act(b, 1, spine(5, 2))
        a = PAdicWindow.from_value(2, 5, 0, 1)
        with pytest.raises(PrecisionError):
            affine_act(0, a, vertex_of(1, 2, 5))

    @given(affine_pairs())
    def test_action_law(self, gh):
        g, h = gh
        for v in window_vertices(g.p):
            assert (g * h).apply(v) == g.apply(h.apply(v))

    @given(affines())
    def test_inverse(self, g):
        for v in window_vertices(g.p):
            assert g.inverse().apply(g.apply(v)) == v

    @given(affines())
    def test_busemann_shift(self, g):
        for v in window_vertices(g.p):
            assert busemann(g.apply(v)) == busemann(v) + g.k


class TestLabels:
    def test_example(self):
        assert label_of(3 * 5, 1, 5, 2) == 4

    def test_not_unit(self):
        with pytest.raises(ValueError):
            label_of(1, 0, 5, 10)

    @pytest.mark.parametrize("p", PRIMES)
    def test_b1_standard(self, p):
        W = Window(p, 1, 2)
        assert label_edges(1, W).differs_from(standard_labelling(W)) == []

    @given(st.sampled_from(PRIMES), st.integers(1, 50), st.integers(-1, 3))
    def test_zero_digit(self, p, b, n):
        if b % p == 0:
            return
        assert label_of(0, n, p, b) == 0

    @given(st.sampled_from([3, 5, 7]), st.integers(1, 60), st.integers(1, 60))
    def test_distinct_units_differ(self, p, b1, b2):
        if b1 % p == 0 or b2 % p == 0 or (b1 - b2) % p == 0:
            return
        W = Window(p, 1, 1)
        assert label_edges(b1, W).differs_from(label_edges(b2, W)) != []
        # horosphere 1 is where the first difference appears
        assert any(label_of(j * p, 1, p, b1) != label_of(j * p, 1, p, b2) for j in range(1, p))

    @given(st.sampled_from([3, 5]), st.integers(1, 30))
    def test_conditions(self, p, b):
        if b % p == 0:
            return
        L = label_edges(b, Window(p, 1, 2))
        assert L.condition1() and L.condition2()

    @pytest.mark.parametrize("b", [1, 2, 3, 4])
    def test_compatible(self, b):
        W = Window(5, 1, 2)
        assert check_compatible(label_edges(b, W), scale_generators(5, b), trials=30, window=W)["ok"]

    @pytest.mark.parametrize("p,b", [(3, 2), (5, 2), (5, 3)])
    def test_transversal_labels(self, p, b):
        # x_i carries the base vertex onto its child along the edge labelled i
        L = label_edges(b, Window(p, 1, 2))
        top = base_vertex(p)
        for i, x in enumerate(transversal(p, b)):
            c = x.apply(top)
            assert c.level == 0 and L.label(top, c) == i


class TestOdometer:
    @pytest.mark.parametrize("p,d,order", [(2, 3, 8), (3, 2, 9), (5, 2, 25)])
    def test_extract(self, p, d, order):
        r = odometer_extract(p, d)
        assert r["ok"] and r["order"] == order

    def test_depth_zero(self):
        assert odometer_extract(3, 0)["order"] == 1

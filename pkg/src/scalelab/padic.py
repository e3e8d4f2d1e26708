"""The affine group of Q_p acting on T_{p+1} at finite precision.

The vertex y + p^{n+1} Z_p sits on horosphere n and is named by the digits
(y_m)_{m <= n}; digit m of the name is the p-adic digit y_m, so the spine is
y = 0 and the vertex Z_p lies on horosphere -1.  Values are kept as exact
rationals whose denominators are a power of p times a unit, which covers
Z[1/p] and the unit groups needed here.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from .trees import EdgeLabelling, UnrootedVertex, Window, child, parent

Number = Union[int, Fraction, "PAdicWindow"]


class PrecisionError(ValueError):
    """A value is not known to enough p-adic digits for the requested result."""


def valuation(x: Fraction | int, p: int) -> int | None:
    x = Fraction(x)
    if x == 0:
        return None
    v = 0
    num, den = x.numerator, x.denominator
    while num % p == 0:
        num //= p
        v += 1
    while den % p == 0:
        den //= p
        v -= 1
    return v


def digits_of(x: Fraction | int, p: int, lo: int, hi: int) -> list[int]:
    """p-adic digits of x at positions lo..hi inclusive (x must vanish below lo)."""
    x = Fraction(x)
    if hi < lo:
        return []
    scaled = x / Fraction(p) ** lo
    num, den = scaled.numerator, scaled.denominator
    if den % p == 0:
        raise PrecisionError(f"value has digits below position {lo}")
    mod = p ** (hi - lo + 1)
    r = num * pow(den, -1, mod) % mod
    out = []
    for _ in range(hi - lo + 1):
        out.append(r % p)
        r //= p
    return out


@dataclass(frozen=True)
class PAdicWindow:
    """Digits d_m for floor <= m < floor + len(digits); known modulo p^(floor + len)."""

    p: int
    floor: int
    digits: tuple[int, ...]

    def __post_init__(self):
        if any(not 0 <= d < self.p for d in self.digits):
            raise ValueError("digit out of range")

    @classmethod
    def from_value(cls, x: Fraction | int, p: int, floor: int, precision: int) -> "PAdicWindow":
        return cls(p, floor, tuple(digits_of(x, p, floor, floor + precision - 1)))

    @property
    def known_to(self) -> int:
        return self.floor + len(self.digits)

    def value(self) -> Fraction:
        return sum((Fraction(d) * Fraction(self.p) ** (self.floor + i) for i, d in enumerate(self.digits)), Fraction(0))

    def to_json(self) -> dict:
        return {"p": self.p, "floor": self.floor, "digits": list(self.digits)}

    @classmethod
    def from_json(cls, obj: dict) -> "PAdicWindow":
        return cls(int(obj["p"]), int(obj["floor"]), tuple(int(d) for d in obj["digits"]))

    def __str__(self) -> str:
        return format_padic(self)


def format_padic(x: PAdicWindow) -> str:
    """Most significant digit first, '.' before position -1, e.g. '...3 0 . 1@5'.

    A window with positive floor is padded with exact zeros down to position 0;
    unknown positions between the precision and position 0 print as '?'."""
    top = x.known_to
    lo = min(x.floor, 0)

    def tok(m: int) -> str:
        if m < x.floor:
            return "0"
        return str(x.digits[m - x.floor]) if m < top else "?"

    whole = " ".join(tok(m) for m in range(max(top, 1) - 1, -1, -1))
    frac = " ".join(tok(m) for m in range(-1, lo - 1, -1))
    return f"...{whole}{' . ' + frac if frac else ''}@{x.p}"


def parse_padic(text: str) -> PAdicWindow:
    """Inverse of format_padic; a missing '...' prefix is accepted, and digits may run
    together ('1021.3@5') when every digit is a single character."""
    body, sep, prime = text.strip().rpartition("@")
    if not sep or not prime.strip().isdigit():
        raise ValueError(f"p-adic literal {text!r} needs a trailing '@p'")
    p = int(prime)
    body = body.strip().lstrip(".\u2026").strip()
    whole, _, frac = body.partition(".")

    def tokens(part: str) -> list[str]:
        return part.split() if " " in part.strip() else list(part.strip())

    hi = tokens(whole) or ["0"]
    lo = tokens(frac)
    # ascending positions from the floor; unknown digits may only lead
    seq = list(reversed(lo)) + list(reversed(hi))
    while seq and seq[-1] == "?":
        seq.pop()
    try:
        return PAdicWindow(p, -len(lo), tuple(int(d) for d in seq))
    except ValueError:
        raise ValueError(f"bad digits in p-adic literal {text!r}") from None


# vertices of T_{p+1} are the generic string-model vertices
PAdicVertex = UnrootedVertex


def vertex_of(y: Fraction | int, n: int, p: int) -> UnrootedVertex:
    """The vertex y + p^{n+1} Z_p."""
    y = Fraction(y)
    v = valuation(y, p)
    if v is None or v > n:
        return UnrootedVertex(p, n, ())
    return UnrootedVertex(p, n, tuple(digits_of(y, p, v, n)))


def value_of(v: UnrootedVertex) -> Fraction:
    """The canonical representative sum y_m p^m of a vertex."""
    p = v.q
    return sum((Fraction(v.digit(m)) * Fraction(p) ** m for m in range(v.lowest_position, v.level + 1)),
               Fraction(0))


def _exact(x: Number) -> tuple[Fraction, int | None]:
    if isinstance(x, PAdicWindow):
        return x.value(), x.known_to
    return Fraction(x), None


def affine_act(b: Number, a: Number, v: UnrootedVertex) -> UnrootedVertex:
    """(b, a).(y + p^{n+1} Z_p) = (b + a y) + a p^{n+1} Z_p."""
    p = v.q
    bv, bprec = _exact(b)
    av, aprec = _exact(a)
    va = valuation(av, p)
    if va is None:
        raise ValueError("a must be nonzero")
    target = v.level + va
    if bprec is not None and bprec < target + 1:
        raise PrecisionError(f"b known mod p^{bprec}, need p^{target + 1}")
    y = value_of(v)
    if aprec is not None:
        vy = valuation(y, p)
        if vy is not None and aprec + vy < target + 1:
            raise PrecisionError(f"a known mod p^{aprec}, too coarse for level {target}")
    return vertex_of(bv + av * y, target, p)


@dataclass(frozen=True)
class AffineElement:
    """y -> b + a y as a tree isometry; k is the valuation of a."""

    p: int
    b: Fraction
    a: Fraction

    @property
    def k(self) -> int:
        return valuation(self.a, self.p)

    def apply(self, v: UnrootedVertex) -> UnrootedVertex:
        return affine_act(self.b, self.a, v)

    def __mul__(self, other: "AffineElement") -> "AffineElement":
        return AffineElement(self.p, self.b + self.a * other.b, self.a * other.a)

    def inverse(self) -> "AffineElement":
        return AffineElement(self.p, -self.b / self.a, 1 / self.a)

    def __str__(self) -> str:
        return f"({self.b}, {self.a})"


def affine(p: int, b, a) -> AffineElement:
    return AffineElement(p, Fraction(b), Fraction(a))


def _check_unit(b, p: int) -> Fraction:
    b = Fraction(b)
    if valuation(b, p) != 0:
        raise ValueError(f"{b} is not a p-adic unit for p={p}")
    return b


def label_of(y: Fraction | int, n: int, p: int, b) -> int:
    """The digit e_n in y = sum e_k (b p)^k, i.e. the label of the edge into y + p^{n+1} Z_p.

    At the first nonzero position this is b^{-n} times the p-adic digit; the
    later positions absorb the carries that the powers of b introduce."""
    b = _check_unit(b, p)
    r = Fraction(y)
    lo = valuation(r, p)
    if lo is None or lo > n:
        return 0
    bp = b * p
    for k in range(lo, n + 1):
        c = digits_of(r, p, k, k)[0]
        e = c * pow(digits_of(b, p, 0, 0)[0], -k, p) % p
        if k == n:
            return e
        r -= e * bp ** k
    raise AssertionError("unreachable")


def label_edges(b, window: Window) -> EdgeLabelling:
    """Horosphere-uniform labelling attached to the transversal x_i = (i, b p)."""
    p = window.q
    b = _check_unit(b, p)
    out: dict = {}
    par: dict = {}
    lev: dict = {}
    for v in window.vertices():
        lev[v] = v.level
        labs: dict = {}
        if v != window.top:
            par[v] = parent(v)
            labs[par[v]] = p
        if v.level < window.D:
            for j in range(p):
                c = child(v, j)
                labs[c] = label_of(value_of(c), c.level, p, b)
        out[v] = labs
    return EdgeLabelling(p, window.top, par, out, lev)


def scale_generators(p: int, b, R: int = 1) -> list[AffineElement]:
    """Generators of the window group: a translation fixing the window top, unit scalings, and (0, b p)."""
    b = _check_unit(b, p)
    gens = [affine(p, Fraction(p) ** (1 - R), 1)]
    # a generator of (Z/p^2)^* generates all unit groups mod p^k for odd p
    if p > 2:
        g = next(u for u in range(2, p * p) if u % p and _order_mod(u, p * p) == p * (p - 1))
        gens.append(affine(p, 0, g))
    else:
        gens.append(affine(p, 0, -1))
        gens.append(affine(p, 0, 5))
    gens.append(affine(p, 0, b * p))
    return gens


def base_vertex(p: int) -> UnrootedVertex:
    """Z_p itself, the spine vertex on horosphere -1."""
    return UnrootedVertex(p, -1, ())


def transversal(p: int, b) -> list[AffineElement]:
    """x_i = (i, b p), moving Z_p onto its children i + p Z_p."""
    b = _check_unit(b, p)
    return [affine(p, i, b * p) for i in range(p)]


def _order_mod(u: int, m: int) -> int:
    k, x = 1, u % m
    while x != 1:
        x = x * u % m
        k += 1
    return k


def odometer_extract(p: int, d: int) -> dict:
    """Level-d action of y -> y + 1 below Z_p, compared with the odometer recursion."""
    from .automata import builtin, level_quotient
    from .perm import PermGroup

    if d == 0:
        return {"p": p, "d": 0, "order": 1, "matches_odometer": True, "regular": True, "cyclic": True, "ok": True}
    pts = []
    for idx in range(p ** d):
        s = []
        x = idx
        for _ in range(d):
            s.append(x % p)
            x //= p
        s.reverse()
        # first string symbol is the least significant digit
        pts.append(vertex_of(sum(c * p ** m for m, c in enumerate(s)), d - 1, p))
    index = {v: i for i, v in enumerate(pts)}
    img = tuple(index[affine_act(1, 1, v)] for v in pts)
    G = PermGroup(p ** d, [img])
    Q = level_quotient(builtin("odometer", q=p), d).group
    order = G.order()
    matches = G.same_group(Q) and img == Q.generators[0].images
    regular = order == p ** d and G.is_transitive()
    cyclic = order == p ** d and any(len(c) == p ** d for c in G.generators[0].cycles())
    return {"p": p, "d": d, "order": order, "matches_odometer": matches, "regular": regular, "cyclic": cyclic,
            "ok": matches and regular and cyclic}

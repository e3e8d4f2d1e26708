"""The groups G(F, A): finitely supported F-sequences with left tail in A,
extended by the coordinate shift alpha(h)_n = h_{n-1}.

Compact open subgroups are described by coordinate profiles.  A profile V
with alpha(V) <= V gives a coset tree whose level-n vertices are the cosets
g alpha^n(V); a coset is named by digits i_m with

    g alpha^n(V) = alpha^N(g_{i_N}) ... alpha^{n-1}(g_{i_{n-1}}) alpha^n(V)

and i_m is stored at string position m + 1, so that alpha acts on names as
the level shift x0.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from . import limits
from .limits import ParseError, WindowError
from .perm import PermGroup, Permutation, coset_action
from .residue import ResidueReport, make_report
from .trees import UnrootedVertex, Window, child, format_vertex


class FiniteGroup:
    """A finite group from its Cayley table; element 0 is the identity."""

    def __init__(self, table: Sequence[Sequence[int]], names: Sequence[str] | None = None, name: str = ""):
        n = len(table)
        self.table = tuple(tuple(int(x) for x in row) for row in table)
        self.order = n
        self.names = tuple(names) if names is not None else tuple(str(i) for i in range(n))
        self.name = name or f"group of order {n}"
        if any(len(row) != n for row in self.table):
            raise ValueError("Cayley table is not square")
        if any(not 0 <= x < n for row in self.table for x in row):
            raise ValueError("Cayley table entry out of range")
        if self.table[0] != tuple(range(n)) or any(row[0] != i for i, row in enumerate(self.table)):
            raise ValueError("element 0 is not the identity")
        inv = []
        for a in range(n):
            row = self.table[a]
            if sorted(row) != list(range(n)):
                raise ValueError(f"row {a} is not a permutation")
            inv.append(row.index(0))
        self._inv = tuple(inv)
        self._whole = None
        self._trivial = None
        if n <= 64:
            t = self.table
            for a in range(n):
                for b in range(n):
                    ab = t[a][b]
                    for c in range(n):
                        if t[ab][c] != t[a][t[b][c]]:
                            raise ValueError(f"table is not associative at ({a},{b},{c})")

    def mul(self, a: int, b: int) -> int:
        return self.table[a][b]

    def inv(self, a: int) -> int:
        return self._inv[a]

    def elements(self) -> range:
        return range(self.order)

    def subgroup(self, elems: Iterable[int]) -> "SubgroupSet":
        return SubgroupSet(self, frozenset(elems))

    def generated(self, gens: Iterable[int]) -> "SubgroupSet":
        seen = {0}
        frontier = [0]
        gens = list(gens)
        while frontier:
            nxt = []
            for x in frontier:
                for g in gens:
                    y = self.table[x][g]
                    if y not in seen:
                        seen.add(y)
                        nxt.append(y)
            frontier = nxt
        return SubgroupSet(self, frozenset(seen))

    def whole(self) -> "SubgroupSet":
        if self._whole is None:
            self._whole = SubgroupSet(self, frozenset(range(self.order)))
        return self._whole

    def trivial(self) -> "SubgroupSet":
        if self._trivial is None:
            self._trivial = SubgroupSet(self, frozenset({0}))
        return self._trivial

    def regular_permutation(self, a: int) -> Permutation:
        """Left-regular image x -> a x."""
        return Permutation._raw(self.table[a])

    def __repr__(self) -> str:
        return f"FiniteGroup({self.name})"


@dataclass(frozen=True)
class SubgroupSet:
    group: FiniteGroup = field(compare=False, hash=False, repr=False)
    elements: frozenset = frozenset({0})

    def __post_init__(self):
        F = self.group
        el = self.elements
        if 0 not in el:
            raise ValueError("subgroup must contain the identity")
        for a in el:
            if F.inv(a) not in el or any(F.mul(a, b) not in el for b in el):
                raise ValueError(f"{sorted(el)} is not a subgroup")

    def __contains__(self, a: int) -> bool:
        return a in self.elements

    def __len__(self) -> int:
        return len(self.elements)

    def __le__(self, other: "SubgroupSet") -> bool:
        return self.elements <= other.elements

    def __lt__(self, other: "SubgroupSet") -> bool:
        return self.elements < other.elements

    def sorted(self) -> list[int]:
        return sorted(self.elements)

    def intersect(self, other: "SubgroupSet") -> "SubgroupSet":
        return SubgroupSet(self.group, self.elements & other.elements)

    def generators(self) -> list[int]:
        gens: list[int] = []
        span = {0}
        for a in self.sorted():
            if a not in span:
                gens.append(a)
                span = set(self.group.generated(gens).elements)
        return gens

    def left_transversal(self, sub: "SubgroupSet") -> list[int]:
        """Representatives of self/sub: identity first, then ascending index."""
        F = self.group
        reps: list[int] = []
        covered: set[int] = set()
        for a in self.sorted():
            if a not in covered:
                reps.append(a)
                covered.update(F.mul(a, s) for s in sub.elements)
        return reps

    def core_in(self, ambient: "SubgroupSet") -> "SubgroupSet":
        """Largest subgroup of self normal in ambient."""
        F = self.group
        el = set(self.elements)
        for f in ambient.elements:
            fi = F.inv(f)
            el &= {F.mul(F.mul(f, a), fi) for a in self.elements}
        return SubgroupSet(F, frozenset(el))

    def product_set(self, other: "SubgroupSet") -> frozenset:
        F = self.group
        return frozenset(F.mul(a, b) for a in self.elements for b in other.elements)


def sym3() -> FiniteGroup:
    """Sym(3) with element 3i+j standing for sigma^i tau^j."""
    table = []
    for a in range(6):
        i, j = divmod(a, 3)
        row = []
        for b in range(6):
            k, l = divmod(b, 3)
            row.append(3 * ((i + k) % 2) + ((j if k == 0 else -j) + l) % 3)
        table.append(row)
    return FiniteGroup(table, ["1", "t", "t2", "s", "st", "st2"], "Sym(3)")


def c4() -> FiniteGroup:
    return FiniteGroup([[(a + b) % 4 for b in range(4)] for a in range(4)], ["0", "1", "2", "3"], "C4")


def builtin_group(name: str) -> FiniteGroup:
    key = name.lower().replace("(", "").replace(")", "")
    if key in ("sym3", "s3"):
        return sym3()
    if key in ("c4", "z4"):
        return c4()
    raise ValueError(f"unknown finite group {name!r}")


def named_subgroup(F: FiniteGroup, name: str) -> SubgroupSet:
    key = name.lower()
    if key in ("1", "trivial", "e"):
        return F.trivial()
    if key in ("f", "all", "whole"):
        return F.whole()
    if F.name == "Sym(3)":
        if key in ("a3", "alt3", "alt(3)"):
            return F.generated([1])
        if key in ("<s>", "sigma", "s"):
            return F.generated([3])
    if F.name == "C4" and key in ("2c4", "c2"):
        return F.generated([2])
    if key.startswith("{") and key.endswith("}"):
        return F.subgroup(int(x) for x in key[1:-1].split(",") if x.strip())
    raise ValueError(f"unknown subgroup {name!r} of {F.name}")


def parse_cayley_table(text: str, name: str = "") -> FiniteGroup:
    rows = []
    n = None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if n is None:
            parts = line.split()
            if len(parts) != 2 or parts[0] != "order" or not parts[1].isdigit():
                raise ParseError("expected 'order <n>'", lineno)
            n = int(parts[1])
            continue
        try:
            row = [int(x) for x in line.split()]
        except ValueError:
            raise ParseError("table entries must be integers", lineno) from None
        if len(row) != n:
            raise ParseError(f"expected {n} entries, got {len(row)}", lineno)
        rows.append(row)
    if n is None or len(rows) != n:
        raise ParseError(f"expected {n} table rows, got {len(rows)}")
    try:
        return FiniteGroup(rows, name=name)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


@dataclass(frozen=True)
class FSeqElement:
    """Finitely supported sequence m -> F, stored as sorted (m, element) pairs."""

    items: tuple = ()

    @classmethod
    def make(cls, values: Mapping[int, int]) -> "FSeqElement":
        return cls(tuple(sorted((m, e) for m, e in values.items() if e != 0)))

    @classmethod
    def single(cls, m: int, e: int) -> "FSeqElement":
        return cls(((m, e),) if e else ())

    def get(self, m: int) -> int:
        for k, e in self.items:
            if k == m:
                return e
        return 0

    def as_dict(self) -> dict[int, int]:
        return dict(self.items)

    def support(self) -> list[int]:
        return [m for m, _ in self.items]

    def shift(self, k: int) -> "FSeqElement":
        """alpha^k: the value at m moves to m + k."""
        return FSeqElement(tuple((m + k, e) for m, e in self.items))

    def is_identity(self) -> bool:
        return not self.items


def fseq_mul(F: FiniteGroup, a: FSeqElement, b: FSeqElement) -> FSeqElement:
    if not a.items:
        return b
    if not b.items:
        return a
    out = dict(a.items)
    for m, e in b.items:
        out[m] = F.table[out.get(m, 0)][e]
    return FSeqElement.make(out)


def fseq_inv(F: FiniteGroup, a: FSeqElement) -> FSeqElement:
    return FSeqElement(tuple((m, F.inv(e)) for m, e in a.items))


@dataclass
class GFA:
    F: FiniteGroup
    A: SubgroupSet
    q: int
    transversal: list[int]

    def alpha(self, h: FSeqElement, k: int = 1) -> FSeqElement:
        return h.shift(k)

    def mul(self, a: FSeqElement, b: FSeqElement) -> FSeqElement:
        return fseq_mul(self.F, a, b)

    def inv(self, a: FSeqElement) -> FSeqElement:
        return fseq_inv(self.F, a)


def make_gfa(F: FiniteGroup, A: SubgroupSet) -> GFA:
    if len(A) == F.order:
        raise ValueError("A must be a proper subgroup of F")
    trans = F.whole().left_transversal(A)
    return GFA(F, A, len(trans), trans)


def kernel_C(F: FiniteGroup, A: SubgroupSet) -> SubgroupSet:
    return A.core_in(F.whole())


@dataclass(frozen=True)
class TidyProfile:
    """Coordinate profile of a compact open subgroup: P_m = tail for m < lo,
    window[m - lo] on [lo, hi), and F for m >= hi."""

    F: FiniteGroup = field(compare=False, hash=False, repr=False)
    tail: SubgroupSet = None
    lo: int = 0
    window: tuple = ()
    name: str = ""

    def __post_init__(self):
        if self.tail is None:
            object.__setattr__(self, "tail", self.F.trivial())

    @property
    def hi(self) -> int:
        return self.lo + len(self.window)

    def at(self, m: int) -> SubgroupSet:
        if m < self.lo:
            return self.tail
        if m >= self.hi:
            return self.F.whole()
        return self.window[m - self.lo]

    def contains(self, h: FSeqElement, shift: int = 0) -> bool:
        """Membership of h in alpha^shift of this subgroup."""
        return all(e in self.at(m - shift) for m, e in h.items)


def standard_profile(ctx: GFA, kind: str = "V", r: int = 0) -> TidyProfile:
    """V0 (r = 0) or the families V^(r), W^(r) with the middle block on [-r, 0)."""
    F = ctx.F
    if r == 0 or kind.upper() == "V0":
        return TidyProfile(F, ctx.A, 0, (), "V0")
    if F.name == "Sym(3)":
        mid = named_subgroup(F, "A3" if kind.upper() == "V" else "<s>")
    elif F.name == "C4":
        if kind.upper() != "V":
            raise ValueError("only tidy=V is defined for C4")
        mid = named_subgroup(F, "2C4")
    else:
        raise ValueError(f"no standard {kind} profile for {F.name}")
    return TidyProfile(F, ctx.A, -r, (mid,) * r, f"{kind.upper()}^({r})")


def profile_tidiness(Pf: TidyProfile) -> dict:
    lo, hi = Pf.lo, Pf.hi
    rng = range(lo - 1, hi + 1)
    decrease = all(Pf.at(m - 1) <= Pf.at(m) for m in range(lo, hi + 2))
    plus = {}
    minus = {}
    for m in rng:
        acc = Pf.tail
        for k in range(lo, m + 1):
            acc = acc.intersect(Pf.at(k))
        plus[m] = acc
        acc = Pf.F.whole()
        for k in range(m, hi + 1):
            acc = acc.intersect(Pf.at(k))
        minus[m] = acc
    tidy = all(plus[m].product_set(minus[m]) == Pf.at(m).elements for m in rng)
    index = 1
    for m in range(lo - 1, hi + 1):
        up = Pf.at(m + 1)
        index *= len(up) // len(up.intersect(Pf.at(m)))
    return {
        "alpha_invariant_decrease": decrease,
        "V_plus": {m: plus[m].sorted() for m in rng},
        "V_minus": {m: minus[m].sorted() for m in rng},
        "tidy": tidy,
        "index_of_shift": index,
    }


class CosetTree:
    """Coset tree of a profile V with alpha(V) <= V, read through the digit names."""

    def __init__(self, ctx: GFA, Pf: TidyProfile, window: Window | None = None):
        if ctx.F is not Pf.F and ctx.F.name != Pf.F.name:
            raise ValueError("profile belongs to a different group")
        if not all(Pf.at(m - 1) <= Pf.at(m) for m in range(Pf.lo, Pf.hi + 2)):
            raise ValueError("profile does not satisfy alpha(V) <= V")
        self.ctx = ctx
        self.F = ctx.F
        self.profile = Pf
        self.coords = [m for m in range(Pf.lo, Pf.hi + 1) if len(Pf.at(m - 1)) < len(Pf.at(m))]
        self.coord_reps = {m: Pf.at(m).left_transversal(Pf.at(m - 1)) for m in self.coords}
        self._rep_of = {}
        for m in self.coords:
            sub = Pf.at(m - 1).elements
            table = {}
            for idx, r in enumerate(self.coord_reps[m]):
                for s in sub:
                    table[self.F.mul(r, s)] = idx
            self._rep_of[m] = table
        q = 1
        for m in self.coords:
            q *= len(self.coord_reps[m])
        self.q = q
        self.transversal = [self._rep_element(i) for i in range(q)]
        self._inv_trans = [fseq_inv(self.F, g) for g in self.transversal]
        self.window = window
        if window is not None and window.q != q:
            raise ValueError(f"window is for q={window.q}, tree has q={q}")

    def _rep_element(self, i: int) -> FSeqElement:
        vals = {}
        for m in self.coords:
            base = len(self.coord_reps[m])
            vals[m] = self.coord_reps[m][i % base]
            i //= base
        return FSeqElement.make(vals)

    def coset_index(self, x: FSeqElement, check: bool = True) -> int:
        """i with x in g_i alpha(V); x must lie in V."""
        if check and not self.profile.contains(x):
            raise ValueError("element is not in V")
        i = 0
        for m in reversed(self.coords):
            i = i * len(self.coord_reps[m]) + self._rep_of[m][x.get(m)]
        return i

    def representative(self, v: UnrootedVertex) -> FSeqElement:
        F = self.F
        g = FSeqElement()
        for p in range(v.lowest_position, v.level + 1):
            d = v.digit(p)
            if d:
                g = fseq_mul(F, g, self.transversal[d].shift(p - 1))
        return g

    def expand(self, g: FSeqElement, n: int) -> UnrootedVertex:
        """Canonical name of the coset g alpha^n(V)."""
        F = self.F
        if g.is_identity():
            return UnrootedVertex(self.q, n, ())
        # every coordinate of g sits where alpha^m(V) is all of F
        m = min(g.support()) - self.profile.hi
        digits = []
        r = g
        while m < n:
            d = self.coset_index(r.shift(-m), check=False)
            digits.append(d)
            if d:
                r = fseq_mul(F, self._inv_trans[d].shift(m), r)
            m += 1
        return UnrootedVertex(self.q, n, tuple(digits))

    def _check(self, v: UnrootedVertex) -> UnrootedVertex:
        if self.window is not None and not self.window.contains(v):
            raise WindowError(f"{format_vertex(v)} outside window [-{self.window.R}, {self.window.D}]")
        return v

    def act(self, h, v: UnrootedVertex) -> UnrootedVertex:
        """Action of an FSeqElement, a GfaElement, or ('alpha', k)."""
        self._check(v)
        if isinstance(h, tuple) and h and h[0] == "alpha":
            w = UnrootedVertex(v.q, v.level + h[1], v.digits)
        elif isinstance(h, GfaElement):
            w = UnrootedVertex(v.q, v.level + h.k, v.digits)
            w = self.expand(fseq_mul(self.F, h.h, self.representative(w)), w.level)
        else:
            w = self.expand(fseq_mul(self.F, h, self.representative(v)), v.level)
        return self._check(w)

    def local_permutation(self, h: FSeqElement, v: UnrootedVertex) -> tuple[UnrootedVertex, Permutation]:
        """Image of v under h and the induced map on child labels."""
        F = self.F
        g = self.representative(v)
        hv = self.expand(fseq_mul(F, h, g), v.level)
        u = fseq_mul(F, fseq_inv(F, self.representative(hv)), fseq_mul(F, h, g)).shift(-v.level)
        images = tuple(self.coset_index(fseq_mul(F, u, self.transversal[i]), check=False) for i in range(self.q))
        return hv, Permutation._raw(images)

    def portrait(self, h: FSeqElement, window: Window) -> dict[int, dict]:
        """Local permutations of h at every window vertex with children, by horosphere.

        Walks down from the window top carrying u = alpha^-n(rep(h.v)^-1 h rep(v)),
        which lies in V; the child labels permute as u permutes V/alpha(V)."""
        F = self.F
        top = window.top
        n = top.level
        g = self.representative(top)
        hg = fseq_mul(F, h, g)
        w = self.expand(hg, n)
        u = fseq_mul(F, fseq_inv(F, self.representative(w)), hg).shift(-n)
        layer = [(top, u)]
        out: dict[int, dict] = {}
        trans, tinv = self.transversal, self._inv_trans
        for level in range(n, window.D):
            perms: dict = {}
            nxt = []
            for v, u in layer:
                moved = [fseq_mul(F, u, trans[i]) for i in range(self.q)]
                img = tuple(self.coset_index(x, check=False) for x in moved)
                perms[v] = Permutation._raw(img)
                if level + 1 < window.D:
                    for i in range(self.q):
                        nxt.append((UnrootedVertex(v.q, level + 1, v.digits + (i,)),
                                    fseq_mul(F, tinv[img[i]], moved[i]).shift(-1)))
            out[level] = perms
            layer = nxt
        return out

    def vertices(self) -> list[UnrootedVertex]:
        if self.window is None:
            raise ValueError("tree has no window")
        limits.check_points(sum(self.q ** (n + self.window.R) for n in range(-self.window.R, self.window.D + 1)),
                            "coset tree window")
        return list(self.window.vertices())


def build_coset_tree(ctx: GFA, Pf: TidyProfile | None = None, window: Window | None = None) -> CosetTree:
    Pf = Pf or standard_profile(ctx)
    tree = CosetTree(ctx, Pf, None)
    if window is not None:
        window = Window(tree.q, window.R, window.D)
        tree.window = window
        tree.vertices()
    return tree


def act(tree: CosetTree, h, v: UnrootedVertex) -> UnrootedVertex:
    return tree.act(h, v)


def local_permutations(tree: CosetTree, h: FSeqElement, j: int, window: Window | None = None) -> dict:
    """Map each window vertex on horosphere j to the child-label permutation of h."""
    window = window or tree.window
    if window is None:
        raise ValueError("a window is required")
    if j >= window.D:
        raise WindowError(f"horosphere {j} has no children inside the window")
    if j < -window.R:
        raise WindowError(f"horosphere {j} lies above the window")
    return tree.portrait(h, Window(tree.q, window.R, j + 1))[j]


@dataclass(frozen=True)
class GfaElement:
    """h alpha^k acting on a coset tree (alpha first, then h)."""

    tree: CosetTree = field(compare=False, hash=False, repr=False)
    h: FSeqElement = FSeqElement()
    k: int = 0

    def apply(self, v: UnrootedVertex) -> UnrootedVertex:
        w = UnrootedVertex(v.q, v.level + self.k, v.digits)
        return self.tree.expand(fseq_mul(self.tree.F, self.h, self.tree.representative(w)), w.level)

    def __mul__(self, other: "GfaElement") -> "GfaElement":
        F = self.tree.F
        return GfaElement(self.tree, fseq_mul(F, self.h, other.h.shift(self.k)), self.k + other.k)

    def inverse(self) -> "GfaElement":
        return GfaElement(self.tree, fseq_inv(self.tree.F, self.h).shift(-self.k), -self.k)


def scale_generators(tree: CosetTree, d: int = 1) -> list[GfaElement]:
    """alpha together with generators of V supported on coordinates [lo, hi + d)."""
    Pf = tree.profile
    gens = [GfaElement(tree, FSeqElement(), 1)]
    for m in range(Pf.lo, Pf.hi + d):
        for e in Pf.at(m).generators():
            gens.append(GfaElement(tree, FSeqElement.single(m, e), 0))
    return gens


def coset_transversal(tree: CosetTree) -> list[GfaElement]:
    """x_i = g_i alpha, moving the root coset V onto its children."""
    root = UnrootedVertex(tree.q, 0, ())
    return [GfaElement(tree, tree.representative(child(root, i)), 1) for i in range(tree.q)]


def window_generators(tree: CosetTree, window: Window) -> list[GfaElement]:
    """alpha and generators of alpha^-R(V) that act nontrivially inside the window."""
    Pf = tree.profile
    R = window.R
    gens = [GfaElement(tree, FSeqElement(), 1)]
    for m in range(Pf.lo - R, window.D + 1):
        for e in Pf.at(m + R).generators():
            gens.append(GfaElement(tree, FSeqElement.single(m, e), 0))
    return gens


def sym3_local_closed_form(f: int, j: int, v: UnrootedVertex) -> Permutation:
    """Local permutation of f_[j] at v in the V^(1) coset tree of G(Sym(3)).

    For f = s^i t^k it is [(0 3)(1 4)(2 5)]^i on horosphere j and
    [(0 1 2)(3 4 5)]^(+-k) on horosphere j+1, the sign being + when
    h_j lies in Alt(3), i.e. when the last digit of v is below 3."""
    i, k = divmod(f, 3)
    if v.level == j:
        return _SWAP ** i
    if v.level == j + 1:
        return _ROT ** (k if v.digit(v.level) < 3 else -k)
    return Permutation.identity(6)

_SWAP = Permutation.from_cycles("(0 3)(1 4)(2 5)", 6)
_ROT = Permutation.from_cycles("(0 1 2)(3 4 5)", 6)
_NAMES = {(1, True): "C1", (2, True): "C2", (3, True): "C3", (5, True): "C5", (6, False): "Sym(3)", (6, True): "C6"}


def _factor_name(group: FiniteGroup, P: SubgroupSet, K: SubgroupSet) -> tuple[str, int]:
    """Name of P acting on its left cosets of K (the quotient by the core)."""
    core = K.core_in(P)
    order = len(P) // len(core)
    F = group
    elems = P.sorted()
    abelian = all(F.mul(F.mul(a, b), F.inv(F.mul(b, a))) in core for a in elems for b in elems)
    if order == 4:
        cyclic = any(F.mul(a, a) not in core for a in elems)
        return ("C4" if cyclic else "C2xC2"), order
    if order == 3 and F.name == "Sym(3)":
        # the only order-3 subgroup of Sym(3)
        return "Alt(3)", order
    return _NAMES.get((order, abelian), f"order{order}"), order


@dataclass
class FlattenedOracle:
    order: int
    coset_count: int
    subgroup_order: int
    window_order: int
    kernel_order: int


def flattened_coset_oracle(Pf: TidyProfile, d: int) -> FlattenedOracle:
    """Action of W on W/alpha^d(W) through a direct product of regular representations."""
    F = Pf.F
    coords = list(range(Pf.lo, Pf.hi + d))
    n = F.order
    deg = n * len(coords)

    def embed(slot: int, e: int) -> tuple:
        img = list(range(deg))
        for x in range(n):
            img[slot * n + x] = slot * n + F.mul(e, x)
        return tuple(img)

    wgens = [embed(s, e) for s, m in enumerate(coords) for e in Pf.at(m).generators()]
    kgens = [embed(s, e) for s, m in enumerate(coords) for e in Pf.at(m - d).generators()]
    W = PermGroup(deg, wgens or [tuple(range(deg))])
    K = PermGroup(deg, kgens or [tuple(range(deg))])
    ca = coset_action(W, K)
    order = ca.group.order()
    return FlattenedOracle(order, ca.group.degree, K.order(), W.order(), W.order() // order)


def profile_residue(Pf: TidyProfile, d: int, check: bool = True) -> ResidueReport:
    """Residue group at level d from the action of W on the level-d vertices below the root coset."""
    ctx = make_gfa(Pf.F, Pf.tail) if len(Pf.tail) < Pf.F.order else None
    if ctx is None:
        raise ValueError("tail subgroup must be proper")
    tree = CosetTree(ctx, Pf)
    q = tree.q
    npts = q ** d
    limits.check_points(npts, f"level {d} of the coset tree")
    points = list(Window(q, 0, d).level_slice(d))
    index = {v: i for i, v in enumerate(points)}
    perms = []
    factors = []
    for m in range(Pf.lo, Pf.hi + d):
        for e in Pf.at(m).generators():
            h = FSeqElement.single(m, e)
            img = tuple(index[tree.act(h, v)] for v in points)
            if img != tuple(range(npts)):
                perms.append(img)
        name, order = _factor_name(Pf.F, Pf.at(m), Pf.at(m - d))
        if order > 1:
            factors.append((m, name, order))
    group = PermGroup(npts, perms or [tuple(range(npts))])
    notes = []
    if check:
        oracle = flattened_coset_oracle(Pf, d)
        if oracle.order != group.order() or oracle.coset_count != npts:
            notes.append(f"oracle mismatch: coset action order {oracle.order}, cosets {oracle.coset_count}")
    report = make_report(d, group, notes=notes)
    report.factors = [(name, order) for _, name, order in factors]
    return report


def formula_flag(Pf: TidyProfile, d: int) -> str | None:
    """Warning for d <= r, where closed forms with exponent r - d disagree with coset counts."""
    r = Pf.hi - Pf.lo
    if r and d <= r:
        return f"d={d} <= r={r}: order is computed by coset action; closed forms in r-d are not asserted"
    return None


def factor_summary(report: ResidueReport) -> dict[str, int]:
    return dict(Counter(name for name, _ in report.factors or []))

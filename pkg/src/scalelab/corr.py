"""Scale groups on windows of T_{q+1} and their self-replicating groups.

Any object with an integer ``k`` (Busemann shift) and ``apply(vertex)`` can
serve as a scale-group element here: ScaleElement below, the affine maps of
the p-adic module and the G(F, A) elements all qualify.  Products are kept
as sequences of generators and applied right to left.

Elliptic computations use the generators with k = 0 and assume they fix the
window top, so that they generate the stabilizer of that vertex.
"""
from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

from . import limits
from .automata import GroupWord, WreathRecursion, check_self_replicating, evaluate, level_quotient
from .limits import WindowError
from .perm import PermGroup, Permutation
from .portraits import RootedPortrait
from .trees import (
    EdgeLabelling,
    UnrootedVertex,
    Window,
    child,
    format_vertex,
    is_below,
    parent,
    spine,
    subtree_iso,
    subtree_iso_inv,
    x0_translate,
)

# automatic self-replication verification stops at this many points
VERIFY_POINTS = 243


class Element(Protocol):
    k: int

    def apply(self, v: UnrootedVertex) -> UnrootedVertex: ...


def apply_word(word: Sequence[Element], v: UnrootedVertex) -> UnrootedVertex:
    for g in reversed(word):
        v = g.apply(v)
    return v


@dataclass(frozen=True)
class ScaleElement:
    """x0^k after a rooted-group word acting below the anchor vertex."""

    word: GroupWord
    k: int = 0
    anchor: int = 1

    def apply(self, v: UnrootedVertex) -> UnrootedVertex:
        if self.word.letters:
            top = spine(v.q, -self.anchor)
            if not is_below(v, top):
                raise WindowError(f"{format_vertex(v)} is above the anchor {format_vertex(top)}")
            s = subtree_iso(top, v).digits
            v = subtree_iso_inv(top, evaluate(self.word, s))
        return x0_translate(v, self.k)

    def __str__(self) -> str:
        w = str(self.word)
        return w if self.k == 0 else (f"{w} * t^{self.k}" if self.word.letters else f"t^{self.k}")


class ScaleGroupData:
    def __init__(self, G: WreathRecursion, R: int = 1, D: int = 4, generators: Sequence[str] | None = None,
                 verify: bool = True):
        if R < 1 or D < 1:
            raise ValueError("R and D must be at least 1")
        self.recursion = G
        self.q = G.q
        self.R = R
        self.D = D
        self.gen_names = tuple(generators) if generators is not None else G.generators
        self.window = Window(G.q, R, D)
        self.verified_depth = None
        self.self_replicating = None
        if verify:
            depth = R + D
            while depth > 1 and G.q ** (depth + 1) > VERIFY_POINTS:
                depth -= 1
            rep = check_self_replicating(G, depth, self.gen_names)
            self.verified_depth = depth
            self.self_replicating = rep["ok"]

    @property
    def translation(self) -> ScaleElement:
        return ScaleElement(GroupWord(self.recursion, ()), 1, self.R)

    def elliptic(self, word: GroupWord | str) -> ScaleElement:
        if isinstance(word, str):
            word = GroupWord.of(self.recursion, word)
        return ScaleElement(word, 0, self.R)

    def element(self, word: GroupWord | str, k: int = 0) -> ScaleElement:
        if isinstance(word, str):
            word = GroupWord.of(self.recursion, word)
        if abs(k) > self.R:
            raise WindowError(f"translation {k} exceeds anchor radius {self.R}")
        return ScaleElement(word, k, self.R)

    def generators(self) -> list[ScaleElement]:
        return [self.translation] + [self.elliptic(GroupWord(self.recursion, ((s, 1),))) for s in self.gen_names]

    def digit_transversal(self) -> list[ScaleElement]:
        """x_i = t * e_i where e_i moves the spine vertex at level 0 to its sibling with last digit i."""
        q, R = self.q, self.R
        words = _words_to_targets(self.recursion, self.gen_names, (0,) * R,
                                  [(0,) * (R - 1) + (i,) for i in range(q)])
        return [ScaleElement(words[i], 1, R) for i in range(q)]

    def report_header(self) -> dict:
        return {"anchor_radius": self.R, "window_depth": self.D, "verified_depth": self.verified_depth,
                "self_replicating": self.self_replicating}


def _words_to_targets(G: WreathRecursion, gens: Sequence[str], start: tuple, targets: list[tuple]) -> dict:
    """Shortest generator words moving ``start`` to each target string (BFS)."""
    seen = {start: GroupWord(G, ())}
    queue = deque([start])
    letters = [(s, e) for s in gens for e in (1, -1)]
    while queue and not all(t in seen for t in targets):
        s = queue.popleft()
        for st, e in letters:
            img = G.act(st, e, s)
            if img not in seen:
                seen[img] = GroupWord(G, ((st, e),)) * seen[s]
                queue.append(img)
    missing = [t for t in targets if t not in seen]
    if missing:
        raise ValueError(f"no group word reaches {missing[0]}; the level action is intransitive")
    return {i: seen[t] for i, t in enumerate(targets)}


def scale_apply(E: ScaleGroupData, g: Element, v: UnrootedVertex) -> UnrootedVertex:
    E.window.require(v)
    w = g.apply(v)
    if not E.window.contains(w):
        raise WindowError(f"image {format_vertex(w)} outside window [-{E.R}, {E.D}]")
    return w


def _index_strings(q: int, depth: int) -> list[tuple[int, ...]]:
    out = [()]
    for _ in range(depth):
        out = [s + (j,) for s in out for j in range(q)]
    return out


def _leaf_action(gens: Sequence[Element], top: UnrootedVertex, depth: int) -> tuple[list, dict, list]:
    q = top.q
    limits.check_points(q ** depth, "window leaf level")
    leaves = [subtree_iso_inv(top, s) for s in _index_strings(q, depth)]
    index = {v: i for i, v in enumerate(leaves)}
    perms = []
    for g in gens:
        img = []
        for v in leaves:
            w = g.apply(v)
            j = index.get(w)
            if j is None:
                raise WindowError(f"elliptic generator moves {format_vertex(v)} out of the window")
            img.append(j)
        perms.append(tuple(img))
    return leaves, index, perms


def elliptic_generators(gens: Iterable[Element]) -> list[Element]:
    return [g for g in gens if g.k == 0]


@dataclass
class Extraction:
    vertex: UnrootedVertex
    q: int
    depth: int
    group: PermGroup
    generators: list[Permutation]
    anchor_radius: int

    def portraits(self) -> list[RootedPortrait]:
        q = self.q
        strings = _index_strings(q, self.depth)
        index = {s: i for i, s in enumerate(strings)}
        out = []
        for g in self.generators:
            def f(u, g=g):
                pad = u + (0,) * (self.depth - len(u))
                return strings[g(index[pad])][: len(u)]
            out.append(RootedPortrait.from_function(q, self.depth, f))
        return out

    def to_json(self) -> dict:
        fp = self.group.fingerprint()
        return {"vertex": format_vertex(self.vertex), "depth": self.depth, "anchor_radius": self.anchor_radius,
                "order": fp.order, "generators": [g.to_cycles() for g in self.generators]}


def _block_section(perms: list, n: int, block: int, home: int) -> tuple[dict, list[Permutation]]:
    """Orbit transversal of the block ``home`` and the stabilizer of that block restricted to it.

    trans[b] moves block home onto block b; the restricted generators are
    Schreier generators relabelled to 0..block-1."""
    trans = {home: tuple(range(n))}
    order = [home]
    for a in order:
        for g in perms:
            b = g[a * block] // block
            if b not in trans:
                trans[b] = tuple(g[x] for x in trans[a])
                order.append(b)
    tinv = {b: Permutation._raw(u).inverse().images for b, u in trans.items()}
    off = home * block
    restricted = {}
    for b in order:
        ub = trans[b]
        for g in perms:
            sb = g[b * block] // block
            h = tuple(tinv[sb][g[x]] for x in ub)
            restricted[tuple(h[off + t] - off for t in range(block))] = None
    ident = tuple(range(block))
    return trans, [Permutation._raw(r) for r in restricted if r != ident]


def extract_selfreplicating(gens: Sequence[Element], v: UnrootedVertex, depth: int, R: int = 1) -> Extraction:
    """Sections at v of the stabilizer of v, truncated to ``depth`` levels below v.

    The elliptic generators act on the leaves ``depth`` levels below v's
    horosphere inside T at the spine vertex -R; Schreier generators of the
    stabilizer of v are restricted to the leaves below v."""
    q = v.q
    top = spine(q, -R)
    if not is_below(v, top):
        raise WindowError(f"{format_vertex(v)} is above the anchor")
    ell = elliptic_generators(gens)
    rel = v.level + R
    total = rel + depth
    leaves, index, perms = _leaf_action(ell, top, total)
    block = q ** depth
    nblocks = q ** rel
    home = index[subtree_iso_inv(v, (0,) * depth)] // block
    trans, rgens = _block_section(perms, len(leaves), block, home)
    if len(trans) < nblocks:
        raise ValueError(f"elliptic generators are not transitive on horosphere {v.level} below "
                         f"{format_vertex(top)} (orbit {len(trans)} of {nblocks})")
    return Extraction(v, q, depth, PermGroup(block, rgens), rgens, R)


def roundtrip_check(E: ScaleGroupData, depth: int) -> dict:
    """Extract at the level-0 spine vertex and compare with G's level quotient."""
    ext = extract_selfreplicating(E.generators(), spine(E.q, 0), depth, E.R)
    Q = level_quotient(E.recursion, depth, E.gen_names).group
    same_order = ext.group.order() == Q.order()
    same_fp = same_order and ext.group.fingerprint() == Q.fingerprint()
    pointwise = all(ext.group.contains(g) for g in Q.generators) and all(Q.contains(g) for g in ext.generators)
    out = dict(E.report_header())
    out.update({"depth": depth, "order": ext.group.order(), "expected_order": Q.order(),
                "fingerprint_match": same_fp, "generators_match": pointwise})
    out["ok"] = bool(same_order and same_fp and pointwise)
    return out


@dataclass
class CompatibleLabelling:
    labelling: EdgeLabelling
    transversal: list
    window: Window
    v0: UnrootedVertex
    witnesses: dict = field(default_factory=dict)

    def label(self, a, b) -> int:
        return self.labelling.label(a, b)


def _label_below(v0: UnrootedVertex, transversal: Sequence[Element], depth: int):
    """Labels on T_{v0} down to ``depth`` levels, with the word reaching each vertex."""
    q = v0.q
    kids = [x.apply(v0) for x in transversal]
    expected = {child(v0, j) for j in range(q)}
    if len(transversal) != q or set(kids) != expected:
        raise ValueError("transversal does not map v0 bijectively onto its children")
    labels: dict = {}
    words = {v0: ()}
    layer = [v0]
    for _ in range(depth):
        nxt = []
        for u in layer:
            w = words[u]
            for i, x in enumerate(transversal):
                word = w + (x,)
                c = apply_word(word, v0)
                if parent(c) != u or c in words:
                    raise ValueError(f"labelling does not close at {format_vertex(u)}")
                words[c] = word
                labels[(u, c)] = i
                nxt.append(c)
        layer = nxt
    return labels, words


def build_labelling(gens: Sequence[Element], v0: UnrootedVertex, transversal: Sequence[Element],
                    window: Window) -> CompatibleLabelling:
    """Label the window edges from the words x_{i1}...x_{id}.v0, pulled back along x_0 above v0."""
    q = v0.q
    R, D = window.R, window.D
    if not v0.is_spine() or not window.contains(v0):
        raise ValueError("v0 must be a spine vertex inside the window")
    lift = v0.level + R
    below, words = _label_below(v0, transversal, D + R)
    x0 = transversal[0]
    out: dict = {}
    par: dict = {}
    lev: dict = {}
    for v in window.vertices():
        lev[v] = v.level
        labs: dict = {}
        if v != window.top:
            par[v] = parent(v)
            labs[par[v]] = q
        if v.level < D:
            for c in (child(v, j) for j in range(q)):
                if is_below(v, v0):
                    labs[c] = below[(v, c)]
                    continue
                a, b = v, c
                for _ in range(lift):
                    a, b = x0.apply(a), x0.apply(b)
                    if is_below(a, v0):
                        labs[c] = below[(a, b)]
                        break
                else:
                    raise ValueError(f"x0 does not carry {format_vertex(v)} below v0")
        out[v] = labs
    L = EdgeLabelling(q, window.top, par, out, lev)
    if not L.condition1() or not L.condition2():
        raise ValueError("constructed labelling violates the labelling conditions")
    witnesses = {format_vertex(u): [str(x) for x in w] for u, w in words.items() if window.contains(u) and len(w) <= 2}
    return CompatibleLabelling(L, list(transversal), window, v0, witnesses)


def _label_map(L: EdgeLabelling, u1: UnrootedVertex, u2: UnrootedVertex, depth: int) -> dict:
    """The label-preserving correspondence T_{u1} -> T_{u2} on ``depth`` levels."""
    out = {u1: u2}
    layer = [(u1, u2)]
    for _ in range(depth):
        nxt = []
        for a, b in layer:
            for c in L.children(a):
                lab = L.label(a, c)
                d = L.child_with_label(b, lab)
                if d is None:
                    raise WindowError(f"label {lab} missing below {format_vertex(b)}")
                out[c] = d
                nxt.append((c, d))
        layer = nxt
    return out


def _matches_labels(lab: EdgeLabelling, u1: UnrootedVertex, u2: UnrootedVertex, m: int, t, window: Window,
                    index: dict, perms: list, sections: dict) -> bool:
    """Is there an elliptic e with e t^m carrying u1 onto u2 and preserving labels below it?

    Any such element is s e0 t^m with e0 a fixed transversal element and s in
    the stabilizer of u2, so the question is one membership test in the
    section group at u2."""
    depth = window.D - u2.level
    block = window.q ** depth
    n = len(index)
    home = index[subtree_iso_inv(u2, (0,) * depth)] // block
    if (depth, home) not in sections:
        trans, rgens = _block_section(perms, n, block, home)
        sections[depth, home] = (trans, PermGroup(block, rgens))
    trans, sec = sections[depth, home]
    corr = _label_map(lab, u1, u2, depth)
    off = home * block
    need = [None] * block
    e0 = None
    for a, b in corr.items():
        if a.level != u1.level + depth:
            continue
        ta = a
        for _ in range(m):
            ta = t.apply(ta)
        if ta not in index or b not in index:
            return False
        if e0 is None:
            src = index[ta] // block
            if src not in trans:
                return False
            e0 = Permutation._raw(trans[src]).inverse().images
        x, y = e0[index[ta]] - off, index[b] - off
        if not (0 <= x < block and 0 <= y < block) or need[x] is not None:
            return False
        need[x] = y
    if e0 is None or None in need:
        return False
    return sec.contains(Permutation._raw(tuple(need)))


def check_compatible(L: CompatibleLabelling | EdgeLabelling, gens: Sequence[Element], trials: int = 20,
                     seed: int = 0, window: Window | None = None) -> dict:
    """Look for label-preserving elements between sampled vertex pairs.

    For a pair (u1, u2) with level(u2) >= level(u1) the candidate is e t^m,
    with t a translation generator and e elliptic, found by extending the
    required leaf map inside the elliptic group."""
    lab = L.labelling if isinstance(L, CompatibleLabelling) else L
    window = window or (L.window if isinstance(L, CompatibleLabelling) else None)
    if window is None:
        raise ValueError("a window is required")
    top = window.top
    ell = elliptic_generators(gens)
    t = next((g for g in gens if g.k == 1), None)
    total = window.D + window.R
    leaves, index, perms = _leaf_action(ell, top, total)
    sections: dict = {}
    verts = [v for v in window.vertices() if v.level < window.D]
    rng = random.Random(seed)
    report = {"trials": 0, "passed": 0, "counterexample": None, "anchor_radius": window.R}
    for _ in range(trials):
        u1, u2 = rng.choice(verts), rng.choice(verts)
        if u2.level < u1.level:
            u1, u2 = u2, u1
        m = u2.level - u1.level
        report["trials"] += 1
        ok = not (m and t is None)
        if ok:
            ok = _matches_labels(lab, u1, u2, m, t, window, index, perms, sections)
        if ok:
            report["passed"] += 1
        elif report["counterexample"] is None:
            report["counterexample"] = [format_vertex(u1), format_vertex(u2)]
    report["ok"] = report["passed"] == report["trials"]
    return report


def relabel_to_standard(L: CompatibleLabelling | EdgeLabelling, top_level: int | None = None) -> dict:
    """Vertex map reading each label word from the window top; the top goes to the spine."""
    lab = L.labelling if isinstance(L, CompatibleLabelling) else L
    if not lab.condition1() or not lab.condition2():
        raise ValueError("labelling violates the labelling conditions")
    if top_level is None:
        root = lab.root
        top_level = root.level if isinstance(root, UnrootedVertex) else 0
    q = lab.q
    out = {lab.root: spine(q, top_level)}
    layer = [lab.root]
    while layer:
        nxt = []
        for a in layer:
            for c in lab.children(a):
                out[c] = child(out[a], lab.label(a, c))
                nxt.append(c)
        layer = nxt
    return out


def horosphere_transitivity_check(gens: Sequence[Element], n: int, window: Window,
                                  below: UnrootedVertex | None = None) -> bool:
    """Elliptic generators transitive on the window slice of horosphere n.

    With ``below`` set, the stabilizer of that vertex must be transitive on
    the horosphere-n vertices beneath it."""
    if not -window.R <= n <= window.D:
        raise WindowError(f"horosphere {n} outside window [-{window.R}, {window.D}]")
    ell = elliptic_generators(gens)
    top = window.top
    leaves, index, perms = _leaf_action(ell, top, n + window.R)
    group = PermGroup(len(leaves), perms or [tuple(range(len(leaves)))])
    if below is None:
        return group.is_transitive()
    if not is_below(below, top) or below.level > n:
        raise WindowError(f"{format_vertex(below)} is not above horosphere {n} in the window")
    under = [i for i, v in enumerate(leaves) if is_below(v, below)]
    depth = n - below.level
    j = index[subtree_iso_inv(below, (0,) * depth)]
    stab = _block_stabilizer(group, perms, j, window.q ** depth)
    return set(under) <= set(stab.orbit(j))


def _block_stabilizer(group: PermGroup, perms: list, point: int, q_depth: int) -> PermGroup:
    home = point // q_depth
    ident = tuple(range(group.degree))
    trans = {home: ident}
    order = [home]
    for a in order:
        for g in perms:
            b = g[a * q_depth] // q_depth
            if b not in trans:
                trans[b] = tuple(g[x] for x in trans[a])
                order.append(b)
    tinv = {b: Permutation._raw(u).inverse().images for b, u in trans.items()}
    sg = []
    for b in order:
        for g in perms:
            sb = g[b * q_depth] // q_depth
            sg.append(tuple(tinv[sb][g[x]] for x in trans[b]))
    return PermGroup(group.degree, sg or [ident])

"""Finite permutations and a small permutation-group engine.

Permutations act on the left: ``compose(g, h)(x) == g(h(x))``.  Group order
and membership use a deterministic Schreier-Sims stabilizer chain whose base
points are taken in increasing order (0, 1, 2, ...) unless a base prefix is
requested explicitly.
"""
from __future__ import annotations

import re
import threading
from collections import Counter, deque
from dataclasses import dataclass
from math import lcm
from operator import itemgetter
from typing import Iterable, Mapping, Sequence

from . import limits
from .limits import LimitExceeded, ParseError

Images = tuple[int, ...]


_IDENT_CACHE: dict[int, Images] = {}


def _ident(n: int) -> Images:
    t = _IDENT_CACHE.get(n)
    if t is None:
        t = _IDENT_CACHE[n] = tuple(range(n))
    return t


def _mul(g: Images, h: Images) -> Images:
    if len(h) == 1:
        return (g[h[0]],)
    return itemgetter(*h)(g)


def _inv(g: Images) -> Images:
    r = [0] * len(g)
    for i, x in enumerate(g):
        r[x] = i
    return tuple(r)


def _is_id(g: Images) -> bool:
    return g == _ident(len(g))


def _element_order(g: Images) -> int:
    # powering is fast for the small orders that dominate; long cycles fall back
    ident = _ident(len(g))
    p = g
    for k in range(1, 33):
        if p == ident:
            return k
        p = _mul(g, p)
    return Permutation._raw(g).order()


@dataclass(frozen=True)
class Permutation:
    images: Images

    def __post_init__(self):
        imgs = tuple(int(x) for x in self.images)
        if sorted(imgs) != list(range(len(imgs))):
            raise ValueError(f"not a bijection on 0..{len(imgs) - 1}: {imgs}")
        if len(imgs) == 0:
            raise ValueError("degree must be positive")
        object.__setattr__(self, "images", imgs)

    @classmethod
    def _raw(cls, images: Images) -> "Permutation":
        p = object.__new__(cls)
        object.__setattr__(p, "images", images)
        return p

    @classmethod
    def identity(cls, degree: int) -> "Permutation":
        return cls._raw(tuple(range(degree)))

    @classmethod
    def from_cycles(cls, text: str, degree: int) -> "Permutation":
        return parse_cycles(text, degree)

    @property
    def degree(self) -> int:
        return len(self.images)

    def __call__(self, x: int) -> int:
        return self.images[x]

    def __mul__(self, other: "Permutation") -> "Permutation":
        return compose(self, other)

    def __pow__(self, e: int) -> "Permutation":
        base = self if e >= 0 else self.inverse()
        result = Permutation.identity(self.degree)
        for _ in range(abs(e)):
            result = compose(base, result)
        return result

    def inverse(self) -> "Permutation":
        return Permutation._raw(_inv(self.images))

    def is_identity(self) -> bool:
        return _is_id(self.images)

    def cycles(self) -> list[tuple[int, ...]]:
        seen = [False] * self.degree
        out = []
        for start in range(self.degree):
            if seen[start]:
                continue
            cyc = [start]
            seen[start] = True
            x = self.images[start]
            while x != start:
                cyc.append(x)
                seen[x] = True
                x = self.images[x]
            if len(cyc) > 1:
                out.append(tuple(cyc))
        return out

    def order(self) -> int:
        return lcm(1, *(len(c) for c in self.cycles()))

    def to_cycles(self) -> str:
        cyc = self.cycles()
        if not cyc:
            return "()"
        return "".join("(" + " ".join(map(str, c)) + ")" for c in cyc)

    def __str__(self) -> str:
        return self.to_cycles()

    def to_json(self) -> dict:
        return {"degree": self.degree, "images": list(self.images)}

    @classmethod
    def from_json(cls, obj: Mapping) -> "Permutation":
        p = cls(tuple(obj["images"]))
        if p.degree != obj["degree"]:
            raise ValueError("degree does not match images length")
        return p


_CYCLE_RE = re.compile(r"\(([^()]*)\)")


def parse_cycles(text: str, degree: int) -> Permutation:
    """Parse disjoint cycles such as ``"(0 3)(1 4)(2 5)"``; ``""`` and ``"()"`` give the identity."""
    if degree < 1:
        raise ParseError("degree must be positive")
    s = text.strip()
    images = list(range(degree))
    seen: set[int] = set()
    pos = 0
    while pos < len(s):
        if s[pos].isspace():
            pos += 1
            continue
        m = _CYCLE_RE.match(s, pos)
        if not m:
            raise ParseError(f"malformed cycle notation at offset {pos}: {text!r}")
        body = m.group(1).split()
        pos = m.end()
        if not body:
            continue
        try:
            pts = [int(t) for t in body]
        except ValueError:
            raise ParseError(f"non-integer point in {m.group(0)!r}") from None
        for p in pts:
            if p < 0 or p >= degree:
                raise ParseError(f"point {p} out of range for degree {degree}")
            if p in seen:
                raise ParseError(f"point {p} repeated")
            seen.add(p)
        for a, b in zip(pts, pts[1:] + pts[:1]):
            images[a] = b
    return Permutation._raw(tuple(images))


def compose(g: Permutation, h: Permutation) -> Permutation:
    """Return g∘h, applying h first."""
    if g.degree != h.degree:
        raise ValueError(f"degree mismatch: {g.degree} vs {h.degree}")
    return Permutation._raw(_mul(g.images, h.images))


def _as_images(g, degree: int) -> Images:
    imgs = g.images if isinstance(g, Permutation) else tuple(g)
    if len(imgs) != degree:
        raise ValueError(f"generator degree {len(imgs)} != {degree}")
    return imgs


class _Chain:
    """Stabilizer chain built by deterministic Schreier-Sims."""

    def __init__(self, n: int, gens: Sequence[Images], base_prefix: Sequence[int] = ()):
        self.n = n
        self.ident = tuple(range(n))
        self.prefix = list(base_prefix)
        self.base: list[int] = []
        self.gens: list[list[Images]] = []
        self.trans: list[dict[int, Images]] = []
        self.tinv: list[dict[int, Images]] = []
        self._checked: list[set] = []
        for p in dict.fromkeys(self.prefix):
            self._add_level(p)
        self._build([g for g in dict.fromkeys(gens) if not _is_id(g)])

    def _new_point(self, g: Images) -> int:
        used = set(self.base)
        for p in range(self.n):
            if p not in used and g[p] != p:
                return p
        raise AssertionError("identity has no moved point")

    def _add_level(self, point: int) -> None:
        self.base.append(point)
        self.gens.append([])
        self.trans.append({point: self.ident})
        self.tinv.append({point: self.ident})
        self._checked.append(set())

    def _extend_orbit(self, i: int) -> None:
        trans, gens = self.trans[i], self.gens[i]
        queue = deque(trans)
        while queue:
            a = queue.popleft()
            ua = trans[a]
            for s in gens:
                b = s[a]
                if b not in trans:
                    ub = _mul(s, ua)
                    trans[b] = ub
                    queue.append(b)

    def _tinv(self, i: int, b: int) -> Images:
        cache = self.tinv[i]
        u = cache.get(b)
        if u is None:
            u = cache[b] = _inv(self.trans[i][b])
        return u

    def sift(self, g: Images, start: int = 0) -> tuple[Images, int]:
        for i in range(start, len(self.base)):
            b = g[self.base[i]]
            if b == self.base[i]:
                continue
            if b not in self.trans[i]:
                return g, i
            u = self._tinv(i, b)
            g = _mul(u, g)
        return g, len(self.base)

    def _build(self, gens: list[Images]) -> None:
        for g in gens:
            if all(g[b] == b for b in self.base):
                self._add_level(self._new_point(g))
        for i in range(len(self.base)):
            fixed = self.base[:i]
            self.gens[i] = [g for g in gens if all(g[b] == b for b in fixed)]
            self._extend_orbit(i)
        i = len(self.base) - 1
        while i >= 0:
            restart = None
            checked = self._checked[i]
            for b in list(self.trans[i]):
                ub = self.trans[i][b]
                for si, s in enumerate(self.gens[i]):
                    key = (b, si)
                    if key in checked:
                        continue
                    checked.add(key)
                    sb = s[b]
                    h = _mul(self._tinv(i, sb), _mul(s, ub))
                    if _is_id(h):
                        continue
                    h2, j = self.sift(h, i + 1)
                    if j == len(self.base) and _is_id(h2):
                        continue
                    if j == len(self.base):
                        self._add_level(self._new_point(h2))
                    for lv in range(i + 1, j + 1):
                        self.gens[lv].append(h2)
                        self._extend_orbit(lv)
                    restart = j
                    break
                if restart is not None:
                    break
            if restart is not None:
                i = restart
            else:
                i -= 1

    def order(self) -> int:
        out = 1
        for t in self.trans:
            out *= len(t)
        return out

    def contains(self, g: Images) -> bool:
        h, j = self.sift(g)
        return j == len(self.base) and _is_id(h)

    def extend_partial(self, target: Mapping[int, int]) -> Images | None:
        """Find an element agreeing with ``target`` on its keys.

        The keys must form a prefix of the base (build the chain with
        ``base_prefix`` containing them)."""
        want = dict(target)
        result = self.ident
        for i, b in enumerate(self.base):
            if b not in want:
                break
            img = want[b]
            if img == b:
                continue
            u = self.trans[i].get(img)
            if u is None:
                return None
            uinv = self._tinv(i, img)
            want = {k: uinv[v] for k, v in want.items()}
            result = _mul(result, u)
        if any(k != v for k, v in want.items()):
            return None
        return result


@dataclass(frozen=True)
class GroupFingerprint:
    order: int
    abelian: bool
    histogram: dict[int, int] | None = None
    derived_length: int | None = None
    order_only: bool = False

    def to_json(self) -> dict:
        return {
            "order": self.order,
            "abelian": self.abelian,
            "element_order_histogram": {str(k): v for k, v in sorted((self.histogram or {}).items())},
            "derived_length": self.derived_length,
            "order_only": self.order_only,
        }


@dataclass(frozen=True)
class CosetAction:
    group: "PermGroup"
    representatives: tuple[Permutation, ...]


class PermGroup:
    """Permutation group given by generators, with compute-once caches."""

    def __init__(self, degree: int, generators: Iterable = ()):
        if degree < 1:
            raise ValueError("degree must be positive")
        lim = limits.current()
        if degree > lim.max_degree:
            raise LimitExceeded(f"degree {degree} exceeds max_degree={lim.max_degree}")
        self.degree = degree
        gens = [_as_images(g, degree) for g in generators]
        for g in gens:
            if sorted(g) != list(range(degree)):
                raise ValueError("generator is not a permutation")
        self._gens: tuple[Images, ...] = tuple(gens)
        self._lock = threading.RLock()
        self._chain: _Chain | None = None
        self._elements: list[Images] | None = None

    @property
    def generators(self) -> list[Permutation]:
        return [Permutation._raw(g) for g in self._gens]

    def chain(self) -> _Chain:
        with self._lock:
            if self._chain is None:
                self._chain = _Chain(self.degree, self._gens)
            return self._chain

    def order(self) -> int:
        return self.chain().order()

    def base(self) -> list[int]:
        return list(self.chain().base)

    def contains(self, g) -> bool:
        return self.chain().contains(_as_images(g, self.degree))

    __contains__ = contains

    def elements(self, limit: int | None = None) -> list[Permutation]:
        """Explicit BFS closure over the generators."""
        with self._lock:
            if self._elements is None:
                cap = limits.current().max_closure if limit is None else limit
                ident = tuple(range(self.degree))
                seen = {ident}
                out = [ident]
                queue = deque([ident])
                while queue:
                    x = queue.popleft()
                    for s in self._gens:
                        y = _mul(s, x)
                        if y not in seen:
                            seen.add(y)
                            out.append(y)
                            if len(out) > cap:
                                raise LimitExceeded(f"closure exceeds {cap} elements")
                            queue.append(y)
                self._elements = out
            return [Permutation._raw(e) for e in self._elements]

    def orbits(self) -> list[list[int]]:
        parent = list(range(self.degree))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for g in self._gens:
            for x, y in enumerate(g):
                rx, ry = find(x), find(y)
                if rx != ry:
                    parent[max(rx, ry)] = min(rx, ry)
        groups: dict[int, list[int]] = {}
        for x in range(self.degree):
            groups.setdefault(find(x), []).append(x)
        return sorted(groups.values())

    def orbit(self, x: int) -> list[int]:
        seen = {x}
        queue = deque([x])
        while queue:
            a = queue.popleft()
            for g in self._gens:
                b = g[a]
                if b not in seen:
                    seen.add(b)
                    queue.append(b)
        return sorted(seen)

    def is_transitive(self) -> bool:
        return len(self.orbits()) == 1

    def orbit_transversal(self, x: int) -> dict[int, Images]:
        """Map each point y of the orbit of x to an element sending x to y (BFS order)."""
        trans = {x: tuple(range(self.degree))}
        queue = deque([x])
        while queue:
            a = queue.popleft()
            for g in self._gens:
                b = g[a]
                if b not in trans:
                    trans[b] = _mul(g, trans[a])
                    queue.append(b)
        return trans

    def stabilizer_generators(self, x: int) -> list[Permutation]:
        """Schreier generators of the stabilizer of x (duplicates and identities removed)."""
        trans = self.orbit_transversal(x)
        tinv = {b: _inv(u) for b, u in trans.items()}
        out: dict[Images, None] = {}
        for b, ub in trans.items():
            for s in self._gens:
                h = _mul(tinv[s[b]], _mul(s, ub))
                if not _is_id(h):
                    out[h] = None
        return [Permutation._raw(h) for h in out]

    def stabilizer(self, x: int) -> "PermGroup":
        return PermGroup(self.degree, self.stabilizer_generators(x))

    def is_abelian(self) -> bool:
        gs = self._gens
        return all(_mul(a, b) == _mul(b, a) for i, a in enumerate(gs) for b in gs[i + 1:])

    def is_subgroup_of(self, other: "PermGroup") -> bool:
        return self.degree == other.degree and all(other.contains(g) for g in self._gens)

    def same_group(self, other: "PermGroup") -> bool:
        return self.is_subgroup_of(other) and other.is_subgroup_of(self)

    def extend_partial(self, target: Mapping[int, int]) -> Permutation | None:
        """An element g with g(k) == target[k] for every key, or None."""
        chain = _Chain(self.degree, self._gens, base_prefix=list(target))
        res = chain.extend_partial(target)
        if res is None or any(res[k] != v for k, v in target.items()):
            return None
        return Permutation._raw(res)

    def block_system_containing(self, a: int, b: int) -> list[list[int]]:
        """Finest block system in which a and b share a block."""
        parent = list(range(self.degree))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        def union(x: int, y: int) -> bool:
            rx, ry = find(x), find(y)
            if rx == ry:
                return False
            parent[max(rx, ry)] = min(rx, ry)
            return True

        union(a, b)
        queue = deque([(a, b)])
        while queue:
            x, y = queue.popleft()
            for g in self._gens:
                gx, gy = g[x], g[y]
                if union(gx, gy):
                    queue.append((gx, gy))
        blocks: dict[int, list[int]] = {}
        for x in range(self.degree):
            blocks.setdefault(find(x), []).append(x)
        return sorted(blocks.values())

    def minimal_blocks(self) -> list[list[list[int]]]:
        if not self.is_transitive():
            raise ValueError("minimal_blocks needs a transitive group")
        systems: dict[tuple, list[list[int]]] = {}
        for b in range(1, self.degree):
            sys_ = self.block_system_containing(0, b)
            if len(sys_) > 1:
                systems[tuple(map(tuple, sys_))] = sys_
        zero_blocks = {k: frozenset(next(bl for bl in v if 0 in bl)) for k, v in systems.items()}
        minimal = [
            systems[k]
            for k, blk in zero_blocks.items()
            if not any(other < blk for other in zero_blocks.values())
        ]
        return sorted(minimal, key=lambda s: (len(s[0]), s))

    def is_primitive(self) -> bool:
        return not self.minimal_blocks()

    def normal_closure(self, gens: Iterable[Images]) -> "PermGroup":
        cur = [g for g in gens if not _is_id(g)]
        sub = PermGroup(self.degree, cur)
        changed = True
        while changed:
            changed = False
            for n in list(sub._gens):
                for s in self._gens:
                    c = _mul(_mul(s, n), _inv(s))
                    if not sub.contains(c):
                        cur.append(c)
                        sub = PermGroup(self.degree, cur)
                        changed = True
        return sub

    def derived_subgroup(self) -> "PermGroup":
        comms = []
        gs = self._gens
        for i, a in enumerate(gs):
            for b in gs[i + 1:]:
                c = _mul(_mul(_inv(a), _inv(b)), _mul(a, b))
                if not _is_id(c):
                    comms.append(c)
        return self.normal_closure(comms)

    def derived_length(self) -> int | None:
        """Length of the derived series, or None if the group is not solvable."""
        g: PermGroup = self
        n = 0
        while g.order() > 1:
            d = g.derived_subgroup()
            if d.order() == g.order():
                return None
            g = d
            n += 1
        return n

    def fingerprint(self) -> GroupFingerprint:
        order = self.order()
        abelian = self.is_abelian()
        if order > limits.current().max_closure:
            return GroupFingerprint(order, abelian, None, None, order_only=True)
        hist = Counter(_element_order(x.images) for x in self.elements())
        return GroupFingerprint(order, abelian, dict(sorted(hist.items())), self.derived_length())

    def __repr__(self) -> str:
        gens = ", ".join(str(g) for g in self.generators)
        return f"PermGroup({self.degree}, <{gens}>)"


def group_order(G: PermGroup) -> int:
    return G.order()


def orbits(G: PermGroup) -> list[list[int]]:
    return G.orbits()


def is_transitive(G: PermGroup) -> bool:
    return G.is_transitive()


def minimal_blocks(G: PermGroup) -> list[list[list[int]]]:
    return G.minimal_blocks()


def is_primitive(G: PermGroup) -> bool:
    return G.is_primitive()


def fingerprint(G: PermGroup) -> GroupFingerprint:
    return G.fingerprint()


def is_abelian(G: PermGroup) -> bool:
    return G.is_abelian()


def coset_action(G: PermGroup, H) -> CosetAction:
    """Action of G on the left cosets of H.

    ``H`` may be an int (the stabilizer of that point), a PermGroup, or an
    iterable of permutations forming a subgroup.  Cosets are enumerated by BFS
    over G's generators starting from H itself."""
    n = G.degree
    if isinstance(H, int):
        point = H

        def key(g: Images):
            return g[point]
    else:
        if isinstance(H, PermGroup):
            hgens = list(H._gens)
            helems = [e.images for e in H.elements()]
        else:
            helems = [_as_images(h, n) for h in H]
            hgens = helems
            closed = set(helems)
            if any(_mul(a, b) not in closed for a in helems for b in helems):
                raise ValueError("element set is not closed under products")
        if not all(G.contains(h) for h in hgens):
            raise ValueError("H is not a subgroup of G")

        def key(g: Images):
            return min(_mul(g, h) for h in helems)

    cap = limits.current().max_points
    ident = tuple(range(n))
    reps = [ident]
    index = {key(ident): 0}
    queue = deque([0])
    edges: dict[tuple[int, int], int] = {}
    while queue:
        c = queue.popleft()
        for gi, s in enumerate(G._gens):
            r = _mul(s, reps[c])
            k = key(r)
            if k not in index:
                if len(reps) >= cap:
                    raise LimitExceeded(f"coset index exceeds max_points={cap}")
                index[k] = len(reps)
                reps.append(r)
                queue.append(index[k])
            edges[(gi, c)] = index[k]
    m = len(reps)
    gens = [tuple(edges[(gi, c)] for c in range(m)) for gi in range(len(G._gens))]
    return CosetAction(PermGroup(m, gens), tuple(Permutation._raw(r) for r in reps))

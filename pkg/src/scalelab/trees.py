"""Vertex addressing for the rooted tree T_{q,q} and the string model of T_{q+1}.

A vertex of T_{q+1} on horosphere ``n`` is a left-infinite string
``(w_i)_{i <= n}`` with finitely many nonzero symbols.  It is stored as the
level together with the shortest suffix that starts with a nonzero digit;
the last stored digit sits at position ``n``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterator

from .limits import ParseError, WindowError

_ALPHABET = "0123456789abcdefghijklmnopqrstuvwxyz"


def _canon(digits: tuple[int, ...]) -> tuple[int, ...]:
    i = 0
    while i < len(digits) and digits[i] == 0:
        i += 1
    return digits[i:]


@dataclass(frozen=True, order=True)
class RootedVertex:
    q: int
    digits: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "digits", tuple(self.digits))
        if any(not 0 <= d < self.q for d in self.digits):
            raise ValueError(f"digit out of range for q={self.q}: {self.digits}")

    @property
    def depth(self) -> int:
        return len(self.digits)

    def child(self, j: int) -> "RootedVertex":
        return RootedVertex(self.q, self.digits + (j,))

    def __str__(self) -> str:
        return "".join(_ALPHABET[d] for d in self.digits) or "ε"


@dataclass(frozen=True, order=True)
class UnrootedVertex:
    q: int
    level: int
    digits: tuple[int, ...] = ()

    def __post_init__(self):
        if self.q < 2:
            raise ValueError("q must be at least 2")
        d = tuple(self.digits)
        if any(not 0 <= x < self.q for x in d):
            raise ValueError(f"digit out of range for q={self.q}: {d}")
        object.__setattr__(self, "digits", _canon(d))

    def digit(self, position: int) -> int:
        """The symbol w_position (0 for positions left of the stored suffix)."""
        if position > self.level:
            raise ValueError(f"position {position} beyond level {self.level}")
        idx = len(self.digits) - 1 - (self.level - position)
        return self.digits[idx] if idx >= 0 else 0

    @property
    def lowest_position(self) -> int:
        """Position of the first stored digit (level + 1 when the vertex is on the spine)."""
        return self.level - len(self.digits) + 1

    def is_spine(self) -> bool:
        return not self.digits

    def __str__(self) -> str:
        return format_vertex(self)


def spine(q: int, n: int) -> UnrootedVertex:
    return UnrootedVertex(q, n, ())


def parent(v: UnrootedVertex) -> UnrootedVertex:
    return UnrootedVertex(v.q, v.level - 1, v.digits[:-1])


def child(v: UnrootedVertex, j: int) -> UnrootedVertex:
    if not 0 <= j < v.q:
        raise ValueError(f"child index {j} out of range for q={v.q}")
    return UnrootedVertex(v.q, v.level + 1, v.digits + (j,))


def children(v: UnrootedVertex) -> list[UnrootedVertex]:
    return [child(v, j) for j in range(v.q)]


def ancestor(v: UnrootedVertex, level: int) -> UnrootedVertex:
    if level > v.level:
        raise ValueError("ancestor level below the vertex")
    drop = v.level - level
    return UnrootedVertex(v.q, level, v.digits[: max(0, len(v.digits) - drop)])


def busemann(v: UnrootedVertex) -> int:
    return v.level


def is_below(w: UnrootedVertex, v: UnrootedVertex) -> bool:
    """True when w lies in the subtree T_v (w == v counts)."""
    return w.q == v.q and w.level >= v.level and ancestor(w, v.level) == v


def subtree_iso(v: UnrootedVertex, w: UnrootedVertex) -> RootedVertex:
    """The rooted address of w inside T_v."""
    if not is_below(w, v):
        raise ValueError(f"{format_vertex(w)} is not below {format_vertex(v)}")
    return RootedVertex(v.q, tuple(w.digit(p) for p in range(v.level + 1, w.level + 1)))


def subtree_iso_inv(v: UnrootedVertex, s: RootedVertex | tuple[int, ...]) -> UnrootedVertex:
    digits = s.digits if isinstance(s, RootedVertex) else tuple(s)
    full = tuple(v.digit(p) for p in range(v.lowest_position, v.level + 1)) + digits
    return UnrootedVertex(v.q, v.level + len(digits), full)


def x0_translate(v: UnrootedVertex, k: int) -> UnrootedVertex:
    return UnrootedVertex(v.q, v.level + k, v.digits)


def standard_label(v: UnrootedVertex, neighbor: UnrootedVertex) -> int:
    if neighbor == parent(v):
        return v.q
    if neighbor.level == v.level + 1 and parent(neighbor) == v:
        return neighbor.digit(neighbor.level)
    raise ValueError(f"{format_vertex(neighbor)} is not adjacent to {format_vertex(v)}")


def format_vertex(v: UnrootedVertex) -> str:
    return f"{v.level}:" + "".join(_ALPHABET[d] for d in v.digits)


def parse_vertex(text: str, q: int) -> UnrootedVertex:
    head, sep, tail = text.strip().partition(":")
    if not sep:
        raise ParseError(f"vertex must look like 'n:digits', got {text!r}")
    try:
        level = int(head)
        digits = tuple(_ALPHABET.index(c) for c in tail.strip().lower())
    except ValueError:
        raise ParseError(f"bad vertex literal {text!r}") from None
    if any(d >= q for d in digits):
        raise ParseError(f"digit out of range for q={q} in {text!r}")
    if digits and digits[0] == 0:
        raise ParseError(f"vertex literal {text!r} is not canonical (leading 0)")
    return UnrootedVertex(q, level, digits)


@dataclass(frozen=True)
class Window:
    """The subtree below the spine vertex at level -R, cut off at level D."""

    q: int
    R: int
    D: int

    @property
    def top(self) -> UnrootedVertex:
        return spine(self.q, -self.R)

    def contains(self, v: UnrootedVertex) -> bool:
        return v.level <= self.D and is_below(v, self.top)

    def require(self, v: UnrootedVertex) -> UnrootedVertex:
        if not self.contains(v):
            raise WindowError(f"{format_vertex(v)} outside window [-{self.R}, {self.D}]")
        return v

    def vertices(self, max_level: int | None = None) -> Iterator[UnrootedVertex]:
        """Vertices level by level, each level in lexicographic order."""
        last = self.D if max_level is None else min(self.D, max_level)
        layer = [self.top]
        while layer and layer[0].level <= last:
            yield from layer
            layer = [c for v in layer for c in children(v)]

    def level_slice(self, n: int) -> list[UnrootedVertex]:
        if not -self.R <= n <= self.D:
            raise WindowError(f"level {n} outside window [-{self.R}, {self.D}]")
        top = self.top
        out = []
        for s in range(self.q ** (n + self.R)):
            digs = []
            x = s
            for _ in range(n + self.R):
                digs.append(x % self.q)
                x //= self.q
            out.append(subtree_iso_inv(top, tuple(reversed(digs))))
        return out


class EdgeLabelling:
    """Out-edge labels on a finite labelled rooted window.

    Vertices may be any hashable objects; ``parent`` maps each non-root vertex
    to its neighbour toward the fixed end and ``out[v]`` maps neighbours of v
    to labels in 0..q.  The edge from the root toward the end lies outside the
    window and is taken to carry label q."""

    def __init__(self, q: int, root: Hashable, parent: dict, out: dict, level: dict):
        self.q = q
        self.root = root
        self.parent = parent
        self.out = out
        self.level = level

    def label(self, v, w) -> int:
        return self.out[v][w]

    def children(self, v) -> list:
        return [w for w in self.out[v] if self.parent.get(w) == v]

    def child_with_label(self, v, label: int):
        for w, lab in self.out[v].items():
            if lab == label and self.parent.get(w) == v:
                return w
        return None

    def vertices(self) -> list:
        return list(self.out)

    def condition1(self) -> bool:
        for v, labs in self.out.items():
            kids = self.children(v)
            if not kids:
                continue
            if v != self.root and labs.get(self.parent[v]) != self.q:
                return False
            if sorted(labs[w] for w in kids) != list(range(self.q)):
                return False
        return True

    def zero_path(self) -> list:
        path = [self.root]
        while True:
            nxt = self.child_with_label(path[-1], 0)
            if nxt is None:
                return path
            path.append(nxt)

    def condition2(self) -> bool:
        path = self.zero_path()
        for a, b in zip(path, path[1:]):
            if self.out[a].get(b) != 0:
                return False
            if b in self.out and self.out[b] and self.out[b].get(a) != self.q:
                return False
        max_level = max(self.level[v] for v in self.out)
        return self.level[path[-1]] == max_level

    def differs_from(self, other: "EdgeLabelling") -> list:
        return [v for v in self.out if self.out[v] != other.out.get(v)]


def standard_labelling(window: Window) -> EdgeLabelling:
    out: dict = {}
    par: dict = {}
    lev: dict = {}
    for v in window.vertices():
        lev[v] = v.level
        labs: dict = {}
        if v != window.top:
            par[v] = parent(v)
            labs[par[v]] = window.q
        if v.level < window.D:
            for j, c in enumerate(children(v)):
                labs[c] = j
        out[v] = labs
    return EdgeLabelling(window.q, window.top, par, out, lev)

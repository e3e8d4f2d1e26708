"""End-fixing isometries of T_{q+1} as a translation power plus a finite portrait.

An element ``(k, {w: pi_w})`` acts as ``h ∘ x0^k``: first the level shift by
k, then the elliptic part h, which rewrites the digit below each vertex w by
its local permutation pi_w, working from the top of the string down.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Mapping

from .limits import WindowError
from .perm import Permutation, parse_cycles
from .trees import (
    UnrootedVertex,
    Window,
    ancestor,
    format_vertex,
    is_below,
    parse_vertex,
    subtree_iso,
    x0_translate,
)


def _clean(q: int, portrait: Mapping[UnrootedVertex, Permutation]) -> tuple:
    items = []
    for v, p in portrait.items():
        if v.q != q or p.degree != q:
            raise ValueError("portrait entry does not match q")
        if not p.is_identity():
            items.append((v, p))
    return tuple(sorted(items, key=lambda kv: (kv[0].level, kv[0].digits)))


@dataclass(frozen=True)
class PortraitElement:
    q: int
    k: int = 0
    entries: tuple = field(default=())

    @classmethod
    def make(cls, q: int, k: int = 0, portrait: Mapping[UnrootedVertex, Permutation] | None = None):
        return cls(q, k, _clean(q, portrait or {}))

    @classmethod
    def identity(cls, q: int) -> "PortraitElement":
        return cls(q, 0, ())

    @classmethod
    def translation(cls, q: int, k: int) -> "PortraitElement":
        return cls(q, k, ())

    @property
    def portrait(self) -> dict[UnrootedVertex, Permutation]:
        return dict(self.entries)

    def support(self) -> list[UnrootedVertex]:
        return [v for v, _ in self.entries]

    def local(self, v: UnrootedVertex) -> Permutation:
        return self.portrait.get(v) or Permutation.identity(self.q)

    def is_elliptic(self) -> bool:
        return self.k == 0

    def to_json(self) -> dict:
        return {
            "q": self.q,
            "k": self.k,
            "portrait": [{"vertex": format_vertex(v), "perm": p.to_cycles()} for v, p in self.entries],
        }

    @classmethod
    def from_json(cls, obj) -> "PortraitElement":
        if isinstance(obj, str):
            obj = json.loads(obj)
        q = int(obj["q"])
        port = {parse_vertex(e["vertex"], q): parse_cycles(e["perm"], q) for e in obj.get("portrait", [])}
        return cls.make(q, int(obj.get("k", 0)), port)


def _check_support(g: PortraitElement, window: Window | None) -> None:
    if window is None:
        return
    for v in g.support():
        if not window.contains(v):
            raise WindowError(f"portrait vertex {format_vertex(v)} outside window")


def _apply_elliptic(entries: dict, q: int, v: UnrootedVertex) -> UnrootedVertex:
    if not entries:
        return v
    lo = min(v.lowest_position, min(u.level for u in entries) + 1)
    out = []
    for i in range(lo, v.level + 1):
        pi = entries.get(ancestor(v, i - 1))
        d = v.digit(i)
        out.append(pi.images[d] if pi is not None else d)
    return UnrootedVertex(q, v.level, tuple(out))


def apply(g: PortraitElement, v: UnrootedVertex, window: Window | None = None) -> UnrootedVertex:
    if v.q != g.q:
        raise ValueError("q mismatch")
    if window is not None:
        window.require(v)
        _check_support(g, window)
    w = _apply_elliptic(g.portrait, g.q, x0_translate(v, g.k))
    if window is not None and not window.contains(w):
        raise WindowError(f"image {format_vertex(w)} outside window")
    return w


def _shift(entries: dict, m: int) -> dict:
    return {x0_translate(v, m): p for v, p in entries.items()}


def _invert_elliptic(entries: dict, q: int) -> dict:
    return {_apply_elliptic(entries, q, w): p.inverse() for w, p in entries.items()}


def _compose_elliptic(e1: dict, e2: dict, q: int) -> dict:
    """Portrait of e1 ∘ e2."""
    inv2 = _invert_elliptic(e2, q)
    ident = Permutation.identity(q)
    verts = set(e2) | {_apply_elliptic(inv2, q, u) for u in e1}
    out = {}
    for w in verts:
        p = e1.get(_apply_elliptic(e2, q, w), ident) * e2.get(w, ident)
        if not p.is_identity():
            out[w] = p
    return out


def compose_elements(g: PortraitElement, h: PortraitElement, window: Window | None = None) -> PortraitElement:
    """The element acting as g after h."""
    if g.q != h.q:
        raise ValueError("q mismatch")
    _check_support(g, window)
    _check_support(h, window)
    ell = _compose_elliptic(g.portrait, _shift(h.portrait, g.k), g.q)
    out = PortraitElement.make(g.q, g.k + h.k, ell)
    _check_support(out, window)
    return out


def invert(g: PortraitElement, window: Window | None = None) -> PortraitElement:
    _check_support(g, window)
    out = PortraitElement.make(g.q, -g.k, _shift(_invert_elliptic(g.portrait, g.q), -g.k))
    _check_support(out, window)
    return out


def decompose(g: PortraitElement) -> tuple[int, PortraitElement]:
    """Split g as h ∘ x0^k with h elliptic; returns (k, h)."""
    return g.k, PortraitElement(g.q, 0, g.entries)


@dataclass(frozen=True)
class RootedPortrait:
    """Automorphism of T_{q,q} given by local permutations at finitely many vertices."""

    q: int
    entries: tuple = ()

    @classmethod
    def make(cls, q: int, portrait: Mapping[tuple, Permutation]) -> "RootedPortrait":
        items = sorted(((tuple(k), p) for k, p in portrait.items() if not p.is_identity()),
                       key=lambda kv: (len(kv[0]), kv[0]))
        return cls(q, tuple(items))

    @classmethod
    def from_function(cls, q: int, depth: int, f: Callable[[tuple], tuple]) -> "RootedPortrait":
        """Truncated portrait of a string map f, read off levels 0..depth-1."""
        port = {}
        layer = [()]
        for _ in range(depth):
            nxt = []
            for u in layer:
                port[u] = Permutation(tuple(f(u + (j,))[-1] for j in range(q)))
                nxt.extend(u + (j,) for j in range(q))
            layer = nxt
        return cls.make(q, port)

    @property
    def portrait(self) -> dict:
        return dict(self.entries)

    def apply(self, s) -> tuple:
        s = tuple(s)
        port = self.portrait
        out = []
        for i, d in enumerate(s):
            p = port.get(s[:i])
            out.append(p.images[d] if p is not None else d)
        return tuple(out)

    def level_permutation(self, depth: int) -> Permutation:
        q = self.q
        imgs = []
        for idx in range(q ** depth):
            s = []
            x = idx
            for _ in range(depth):
                s.append(x % q)
                x //= q
            t = self.apply(tuple(reversed(s)))
            val = 0
            for d in t:
                val = val * q + d
            imgs.append(val)
        return Permutation(tuple(imgs))

    def is_identity(self) -> bool:
        return not self.entries


def apply_rooted(a: RootedPortrait, s) -> tuple:
    return a.apply(s)


def section(g: PortraitElement, v: UnrootedVertex) -> RootedPortrait:
    """Restriction of an elliptic g fixing v to T_v, addressed from v."""
    if g.k != 0:
        raise ValueError("section needs an elliptic element")
    if apply(g, v) != v:
        raise ValueError(f"element does not fix {format_vertex(v)}")
    port = {subtree_iso(v, w).digits: p for w, p in g.entries if is_below(w, v)}
    return RootedPortrait.make(g.q, port)

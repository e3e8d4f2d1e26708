"""Finite-state self-similar groups given by wreath recursion.

A state s has a root permutation sigma_s and one transition per digit; it
acts on a string by ``s(x w) = sigma_s(x) t_s[x](w)``.  Words are products of
states and their inverses, read as ``g1 g2 ... gk`` acting on the left, so the
rightmost letter acts first.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from . import limits
from .limits import ParseError
from .perm import Permutation, PermGroup, parse_cycles

IDENTITY = "1"


@dataclass(frozen=True)
class State:
    sigma: Permutation
    transitions: tuple[str, ...]


class WreathRecursion:
    def __init__(self, q: int, states: dict[str, State], generators: Sequence[str] = (), name: str = ""):
        if q < 2:
            raise ValueError("alphabet size must be at least 2")
        self.q = q
        self.name = name
        self.states: dict[str, State] = dict(states)
        self.states[IDENTITY] = State(Permutation.identity(q), (IDENTITY,) * q)
        for s, st in self.states.items():
            if st.sigma.degree != q:
                raise ValueError(f"state {s}: permutation degree {st.sigma.degree} != {q}")
            if len(st.transitions) != q:
                raise ValueError(f"state {s}: expected {q} transitions, got {len(st.transitions)}")
            for t in st.transitions:
                if t not in self.states:
                    raise ValueError(f"state {s}: undeclared transition target {t}")
        for g in generators:
            if g not in self.states:
                raise ValueError(f"undeclared generator {g}")
        self.generators: tuple[str, ...] = tuple(generators)
        self._lock = threading.Lock()
        self._level_cache: dict[tuple[str, int], tuple[int, ...]] = {}

    def __repr__(self) -> str:
        return f"WreathRecursion({self.name or '?'}, q={self.q}, states={sorted(self.states)})"

    def state_names(self) -> list[str]:
        return sorted(self.states)

    def act(self, state: str, sign: int, s: Sequence[int]) -> tuple[int, ...]:
        s = tuple(s)
        out = []
        st = state
        for x in s:
            if st == IDENTITY:
                break
            rec = self.states[st]
            if sign > 0:
                y = rec.sigma.images[x]
                st = rec.transitions[x]
            else:
                y = rec.sigma.inverse().images[x]
                st = rec.transitions[y]
            out.append(y)
        return tuple(out) + s[len(out):]

    def letter_section(self, state: str, sign: int, v: Sequence[int]) -> tuple[tuple[int, ...], str]:
        """Image of v and the state of the section at v (same sign)."""
        out = []
        st = state
        for x in v:
            rec = self.states[st]
            if sign > 0:
                y = rec.sigma.images[x]
                st = rec.transitions[x]
            else:
                y = rec.sigma.inverse().images[x]
                st = rec.transitions[y]
            out.append(y)
        return tuple(out), st

    def level_images(self, state: str, depth: int) -> tuple[int, ...]:
        """Action of a state on the q**depth strings of that length (lexicographic order)."""
        key = (state, depth)
        with self._lock:
            hit = self._level_cache.get(key)
        if hit is not None:
            return hit
        q = self.q
        if depth == 0:
            res: tuple[int, ...] = (0,)
        elif state == IDENTITY:
            res = tuple(range(q ** depth))
        else:
            rec = self.states[state]
            block = q ** (depth - 1)
            out = [0] * (q * block)
            for x in range(q):
                sub = self.level_images(rec.transitions[x], depth - 1)
                off_in = x * block
                off_out = rec.sigma.images[x] * block
                for r in range(block):
                    out[off_in + r] = off_out + sub[r]
            res = tuple(out)
        with self._lock:
            self._level_cache[key] = res
        return res

    def with_inverses(self) -> "WreathRecursion":
        """Add states named ``s^-1`` for every state, closed under transitions."""
        states = {k: v for k, v in self.states.items() if k != IDENTITY}
        for s in list(states):
            if s.endswith("^-1"):
                continue
            inv_name = s + "^-1"
            if inv_name in states:
                continue
            rec = states[s]
            sinv = rec.sigma.inverse()
            trans = tuple(_inv_name(rec.transitions[sinv.images[x]]) for x in range(self.q))
            states[inv_name] = State(sinv, trans)
        return WreathRecursion(self.q, states, self.generators, self.name)


@dataclass(frozen=True)
class GroupWord:
    recursion: WreathRecursion = field(compare=False, hash=False)
    letters: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        for s, e in self.letters:
            if e not in (1, -1):
                raise ValueError("exponents must be +1 or -1")
            if s not in self.recursion.states:
                raise ValueError(f"unknown state {s}")
        object.__setattr__(self, "letters", tuple((s, e) for s, e in self.letters if s != IDENTITY))

    @classmethod
    def of(cls, rec: WreathRecursion, spec: str | Iterable) -> "GroupWord":
        """Build from ``"a b^-1 c"`` or an iterable of (state, exp) pairs / names."""
        if isinstance(spec, str):
            letters = []
            for tok in spec.split():
                if tok.endswith("^-1") and tok[:-3] in rec.states:
                    letters.append((tok[:-3], -1))
                else:
                    letters.append((tok, 1))
            return cls(rec, tuple(letters))
        return cls(rec, tuple((x, 1) if isinstance(x, str) else tuple(x) for x in spec))

    def __mul__(self, other: "GroupWord") -> "GroupWord":
        return GroupWord(self.recursion, self.letters + other.letters)

    def inverse(self) -> "GroupWord":
        return GroupWord(self.recursion, tuple((s, -e) for s, e in reversed(self.letters)))

    def __str__(self) -> str:
        if not self.letters:
            return IDENTITY
        return " ".join(s if e > 0 else f"{s}^-1" for s, e in self.letters)


def evaluate(w: GroupWord, s: Sequence[int]) -> tuple[int, ...]:
    out = tuple(s)
    rec = w.recursion
    for st, e in reversed(w.letters):
        out = rec.act(st, e, out)
    return out


def section_word(w: GroupWord, v: Sequence[int]) -> tuple[tuple[int, ...], GroupWord]:
    """Return (w.v, w|_v) so that w(v s) = (w.v) (w|_v)(s)."""
    rec = w.recursion
    cur = tuple(v)
    secs = []
    for st, e in reversed(w.letters):
        cur, sec = rec.letter_section(st, e, cur)
        secs.append((sec, e))
    return cur, GroupWord(rec, tuple(reversed(secs)))


def word_level_permutation(w: GroupWord, depth: int) -> Permutation:
    rec = w.recursion
    n = rec.q ** depth
    cur = tuple(range(n))
    for st, e in reversed(w.letters):
        p = rec.level_images(st, depth)
        if e < 0:
            p = Permutation(p).inverse().images
        cur = tuple(p[i] for i in cur)
    return Permutation._raw(cur)


@dataclass
class LevelQuotient:
    depth: int
    group: PermGroup
    recursion: WreathRecursion
    generators: tuple[str, ...]

    def image(self, w: GroupWord) -> Permutation:
        return word_level_permutation(w, self.depth)


def level_quotient(G: WreathRecursion, d: int, generators: Sequence[str] | None = None) -> LevelQuotient:
    gens = tuple(generators) if generators is not None else G.generators
    limits.check_points(G.q ** d, f"level {d} of a {G.q}-ary tree")
    perms = [Permutation._raw(G.level_images(g, d)) for g in gens]
    return LevelQuotient(d, PermGroup(G.q ** d, perms), G, gens)


def string_index(s: Sequence[int], q: int) -> int:
    v = 0
    for d in s:
        v = v * q + d
    return v


def index_string(idx: int, q: int, depth: int) -> tuple[int, ...]:
    out = []
    for _ in range(depth):
        out.append(idx % q)
        idx //= q
    return tuple(reversed(out))


def restricted_stabilizer(group: PermGroup, q: int, depth: int, i: int) -> PermGroup:
    """Stabilizer of level-1 vertex i in a group on level ``depth``, restricted to the subtree below i."""
    block = q ** (depth - 1)
    gens = [g.images for g in group.generators]
    ident = tuple(range(q ** depth))
    trans = {i: ident}
    order = [i]
    for a in order:
        for g in gens:
            b = g[a * block] // block
            if b not in trans:
                trans[b] = tuple(g[x] for x in trans[a])
                order.append(b)
    tinv = {b: Permutation._raw(u).inverse().images for b, u in trans.items()}
    out = {}
    for b in order:
        ub = trans[b]
        for g in gens:
            sb = g[b * block] // block
            h = tuple(tinv[sb][g[x]] for x in ub)
            r = tuple(h[i * block + t] - i * block for t in range(block))
            out[r] = None
    return PermGroup(block, list(out) or [tuple(range(block))])


def check_self_replicating(G: WreathRecursion, d: int, generators: Sequence[str] | None = None) -> dict:
    """Exact finite-depth self-replication check on the closure of G."""
    q = G.q
    limits.check_points(q ** (d + 1), f"level {d + 1} of a {q}-ary tree")
    upper = level_quotient(G, d + 1, generators)
    lower = level_quotient(G, d, generators)
    top = level_quotient(G, 1, generators)
    report = {
        "depth": d,
        "level1_transitive": top.group.is_transitive(),
        "surjective_at": {},
        "orders": {"level": lower.group.order(), "level_plus_one": upper.group.order()},
        "counterexample": None,
    }
    for i in range(q):
        r = restricted_stabilizer(upper.group, q, d + 1, i)
        ok = r.same_group(lower.group)
        report["surjective_at"][str(i)] = ok
        if not ok and report["counterexample"] is None:
            report["counterexample"] = str(i)
    report["ok"] = report["level1_transitive"] and all(report["surjective_at"].values())
    return report


def _st(q: int, cycles: str, trans: Sequence[str]) -> State:
    return State(parse_cycles(cycles, q), tuple(trans))


def _cycle_all(q: int) -> str:
    return "(" + " ".join(map(str, range(q))) + ")"


def builtin(name: str, q: int | None = None, depth: int = 6) -> WreathRecursion:
    """Standard recursions: odometer, grigorchuk, gupta_sidki_3, full_sym_level, universal, root_swap.

    ``full_sym_level`` and ``universal`` need one generator per level to have
    full level quotients, so they carry generators down to ``depth`` levels."""
    key = name.replace("-", "_").lower()
    if key.startswith("odometer"):
        q = q or int(key.partition("(")[2].rstrip(")") or 2)
        trans = [IDENTITY] * (q - 1) + ["a"]
        return WreathRecursion(q, {"a": _st(q, _cycle_all(q), trans)}, ["a"], f"odometer({q})")
    if key == "grigorchuk":
        states = {
            "a": _st(2, "(0 1)", ["1", "1"]),
            "b": _st(2, "", ["a", "c"]),
            "c": _st(2, "", ["a", "d"]),
            "d": _st(2, "", ["1", "b"]),
        }
        return WreathRecursion(2, states, ["a", "b", "c", "d"], "grigorchuk")
    if key in ("gupta_sidki_3", "gupta_sidki"):
        states = {
            "a": _st(3, "(0 1 2)", ["1", "1", "1"]),
            "a^-1": _st(3, "(0 2 1)", ["1", "1", "1"]),
            "t": _st(3, "", ["a", "a^-1", "t"]),
        }
        return WreathRecursion(3, states, ["a", "t"], "gupta_sidki_3")
    if key.startswith("root_swap"):
        q = q or 2
        return WreathRecursion(q, {"s": _st(q, "(0 1)", [IDENTITY] * q)}, ["s"], f"root_swap({q})")
    if key.startswith("full_sym_level") or key.startswith("universal"):
        q = q or int(key.partition("(")[2].rstrip(")") or 2)
        sym_gens = ["(0 1)"] if q == 2 else ["(0 1)", _cycle_all(q)]
        states: dict[str, State] = {}
        gens = []
        universal = key.startswith("universal")
        for si, cyc in enumerate(sym_gens):
            prev = f"L0_{si}"
            states[prev] = _st(q, cyc, [IDENTITY] * q)
            gens.append(prev)
            for k in range(1, depth):
                nm = f"L{k}_{si}"
                trans = [prev] + [IDENTITY] * (q - 1) if universal else [prev] * q
                states[nm] = _st(q, "", trans)
                gens.append(nm)
                prev = nm
            if not universal:
                const = f"c_{si}"
                states[const] = _st(q, cyc, [const] * q)
                gens.append(const)
        label = "universal" if universal else "full_sym_level"
        return WreathRecursion(q, states, gens, f"{label}({q})")
    raise ValueError(f"unknown builtin recursion {name!r}")


def parse_automaton(text: str) -> WreathRecursion:
    """Parse the line-based automaton format (``alphabet``/``state``/``generators``)."""
    q = None
    raw: list[tuple[int, str, str, list[str]]] = []
    gens: list[str] = []
    gens_line = None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "alphabet":
            if len(parts) != 2 or not parts[1].isdigit():
                raise ParseError("expected 'alphabet <q>'", lineno)
            q = int(parts[1])
        elif parts[0] == "state":
            if q is None:
                raise ParseError("'alphabet' must precede states", lineno)
            if "->" not in line:
                raise ParseError("expected 'state <name> perm <cycles> -> <targets>'", lineno)
            head, tail = line.split("->", 1)
            hp = head.split(None, 3)
            if len(hp) < 3 or hp[2] != "perm":
                raise ParseError("expected 'state <name> perm <cycles>'", lineno)
            name = hp[1]
            if name == IDENTITY:
                raise ParseError("state name '1' is reserved for the identity", lineno)
            cyc = hp[3] if len(hp) > 3 else ""
            raw.append((lineno, name, cyc, tail.split()))
        elif parts[0] == "generators":
            gens = parts[1:]
            gens_line = lineno
        else:
            raise ParseError(f"unknown directive {parts[0]!r}", lineno)
    if q is None:
        raise ParseError("missing 'alphabet' line")
    declared = {name for _, name, _, _ in raw} | {IDENTITY}
    states = {}
    for lineno, name, cyc, targets in raw:
        if len(targets) != q:
            raise ParseError(f"state {name}: expected {q} transitions, got {len(targets)}", lineno)
        for t in targets:
            if t not in declared and not (t.endswith("^-1") and t[:-3] in declared):
                raise ParseError(f"state {name}: undeclared state {t!r}", lineno)
        try:
            sigma = parse_cycles(cyc, q)
        except ParseError as exc:
            raise ParseError(str(exc), lineno) from None
        states[name] = State(sigma, tuple(targets))
    for g in gens:
        if g not in declared:
            raise ParseError(f"undeclared generator {g!r}", gens_line)
    if any(t.endswith("^-1") for st in states.values() for t in st.transitions):
        # a transition to s^-1 needs the inverse automaton alongside
        for k, v in list(states.items()):
            sinv = v.sigma.inverse()
            states[k + "^-1"] = State(sinv, tuple(_inv_name(v.transitions[sinv.images[x]]) for x in range(q)))
    return WreathRecursion(q, states, gens)


def _inv_name(t: str) -> str:
    if t == IDENTITY:
        return t
    return t[:-3] if t.endswith("^-1") else t + "^-1"

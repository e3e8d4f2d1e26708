"""Residue groups of a scale group and the checks around them."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .automata import WreathRecursion, index_string, level_quotient, string_index
from .perm import GroupFingerprint, PermGroup, coset_action


@dataclass
class ResidueReport:
    d: int
    group: PermGroup
    fingerprint: GroupFingerprint
    factors: list[tuple[str, int]] | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def order(self) -> int:
        return self.fingerprint.order

    def to_json(self) -> dict:
        fp = self.fingerprint
        out = {
            "d": self.d,
            "degree": self.group.degree,
            "order": fp.order,
            "abelian": fp.abelian,
            "generators": [g.to_cycles() for g in self.group.generators if not g.is_identity()],
            "element_order_histogram": fp.to_json()["element_order_histogram"],
        }
        if self.factors is not None:
            out["factors"] = [name for name, _ in self.factors]
        if self.notes:
            out["notes"] = list(self.notes)
        return out


def make_report(d: int, group: PermGroup, factors=None, notes: Sequence[str] = ()) -> ResidueReport:
    return ResidueReport(d, group, group.fingerprint(), factors, list(notes))


def _recursion(G) -> WreathRecursion:
    rec = getattr(G, "recursion", G)
    if not isinstance(rec, WreathRecursion):
        raise TypeError(f"expected self-replicating group data, got {type(G).__name__}")
    return rec


def residue(G, d: int = 1) -> ResidueReport:
    """The level-d residue group; ``G`` is a WreathRecursion or anything carrying one as ``.recursion``."""
    rec = _recursion(G)
    return make_report(d, level_quotient(rec, d).group)


@dataclass
class CosetEquivalence:
    equivalent: bool
    bijection: dict[int, tuple[int, ...]]
    coset_count: int

    def to_json(self) -> dict:
        return {
            "equivalent": self.equivalent,
            "coset_count": self.coset_count,
            "bijection": {str(k): "".join(map(str, v)) for k, v in sorted(self.bijection.items())},
        }


def coset_equivalence_check(G, d: int, w: Sequence[int] | str | None = None) -> CosetEquivalence:
    """Compare the level-d action with the action on cosets of the stabilizer of w.

    The bijection sends coset number i (BFS order) to the vertex rep_i.w."""
    rec = _recursion(G)
    q = rec.q
    if d == 0:
        return CosetEquivalence(True, {0: ()}, 1)
    if w is None:
        w = (0,) * d
    if isinstance(w, str):
        w = tuple(int(c, 36) for c in w)
    w = tuple(w)
    if len(w) != d:
        raise ValueError(f"vertex {w} is not on level {d}")
    Q = level_quotient(rec, d).group
    if not Q.is_transitive():
        raise ValueError(f"level {d} action is intransitive; the group is not self-replicating")
    x = string_index(w, q)
    ca = coset_action(Q, x)
    point_of = [r(x) for r in ca.representatives]
    ok = len(set(point_of)) == Q.degree == ca.group.degree
    if ok:
        for s, t in zip(Q.generators, ca.group.generators):
            if any(point_of[t(i)] != s(point_of[i]) for i in range(ca.group.degree)):
                ok = False
                break
    bij = {i: index_string(p, q, d) for i, p in enumerate(point_of)}
    return CosetEquivalence(ok, bij, ca.group.degree)


@dataclass
class UniquenessResult:
    unique_up_to_conjugacy: bool
    witness_blocks: list[list[int]] | None

    def to_json(self) -> dict:
        return {"unique_up_to_conjugacy": self.unique_up_to_conjugacy, "witness_blocks": self.witness_blocks}


def uniqueness_criterion(level1_action: PermGroup) -> UniquenessResult:
    """Unique tidy representation iff the level-1 action is primitive."""
    if not level1_action.is_transitive():
        raise ValueError("level-1 action must be transitive")
    systems = level1_action.minimal_blocks()
    if not systems:
        return UniquenessResult(True, None)
    return UniquenessResult(False, systems[0])


def index_check(G) -> int:
    """Size of the level-1 orbit of vertex 0; equals q exactly for a scale group."""
    rec = _recursion(G)
    return len(level_quotient(rec, 1).group.orbit(0))

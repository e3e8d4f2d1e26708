"""Command-line frontend: scenario files, JSON-lines reports and DOT export.

A scenario is a line-based file.  Directives:

    anchor <descriptive name>         row label used by repro-all
    tags <tag> ...                    extra selectors for repro-all --only
    group builtin <name> [q=N]
    group automaton <file>            path relative to the scenario file
    group gfa F=sym3|c4|<file> A=1 tidy=V|W|V0 r=N
    gfa F=... A=... tidy=... r=...    same as ``group gfa``
    group padic p=5 b=2
    group perm degree=6 gens="(0 1 2)(3 4 5); (0 3)(1 5)(2 4)"
    window -1..4                      horospheres -R..D (or ``window R=1 D=4``)

Every other line is a task followed by key=value parameters.  Parameters
named ``expect.<field>`` compare against the task's report; ``expect=fail``
means the check itself is expected to fail.  A range such as ``d=1..3``
expands into one task per value.  A later ``group`` line switches the
subject for the tasks after it.
"""
from __future__ import annotations

import argparse
import contextvars
import hashlib
import json
import shlex
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable

from . import gfa, limits, padic
from .automata import WreathRecursion, builtin, check_self_replicating, level_quotient, parse_automaton
from .corr import ScaleGroupData, build_labelling, check_compatible, horosphere_transitivity_check, roundtrip_check
from .limits import LimitExceeded, ParseError
from .perm import PermGroup, parse_cycles
from .residue import coset_equivalence_check, index_check, make_report, residue, uniqueness_criterion
from .trees import EdgeLabelling, Window, format_vertex, spine, standard_labelling

DEFAULT_WINDOW = (1, 4)

# task name -> (allowed parameters, parameter that may be a range)
TASKS: dict[str, tuple[frozenset, str | None]] = {
    "residue": (frozenset({"d"}), "d"),
    "check-sr": (frozenset({"depth"}), "depth"),
    "coset-equivalence": (frozenset({"d", "w"}), "d"),
    "index": (frozenset(), None),
    "uniqueness": (frozenset(), None),
    "roundtrip": (frozenset({"d"}), "d"),
    "labelling": (frozenset({"trials", "seed"}), None),
    "local-perms": (frozenset({"f", "j"}), "j"),
    "tidiness": (frozenset(), None),
    "odometer": (frozenset({"d"}), "d"),
    "transitivity": (frozenset({"n"}), "n"),
    "tree": (frozenset({"window", "dot"}), None),
}
TASK_ALIASES = {"residues": "residue", "check_sr": "check-sr", "local_perms": "local-perms"}
GROUP_MODULE = {"builtin": "automata", "automaton": "automata", "gfa": "gfa", "padic": "padic", "perm": "perm"}


@dataclass
class GroupSpec:
    kind: str
    params: dict[str, str]
    line: int
    base: Path

    def describe(self) -> str:
        return " ".join([self.kind] + [f"{k}={v}" if v else k for k, v in self.params.items()])


@dataclass
class Task:
    kind: str
    params: dict[str, str]
    expect: dict[str, str]
    line: int
    group: GroupSpec | None
    window: tuple[int, int] | None

    def label(self) -> str:
        return " ".join([self.kind] + [f"{k}={v}" for k, v in self.params.items()])


@dataclass
class Scenario:
    name: str
    anchor: str | None = None
    tags: set[str] = field(default_factory=set)
    tasks: list[Task] = field(default_factory=list)

    def modules(self) -> set[str]:
        out = set(self.tags)
        for t in self.tasks:
            if t.group is not None:
                out.add(GROUP_MODULE[t.group.kind])
        return out


def parse_range(text: str, line: int | None = None) -> list[int]:
    """``3``, ``1..4``, ``-2..2`` or ``2,3``."""
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            return list(range(int(a), int(b) + 1))
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise ParseError(f"bad integer range {text!r}", line) from None


def parse_window(tokens: list[str], line: int | None = None) -> tuple[int, int]:
    """``-1..4`` or ``R=1 D=4``; returns (R, D)."""
    if len(tokens) == 1 and ".." in tokens[0]:
        a, _, b = tokens[0].partition("..")
        try:
            R, D = -int(a), int(b)
        except ValueError:
            raise ParseError(f"bad window {tokens[0]!r}", line) from None
    else:
        kv = _key_values(tokens, line)
        try:
            R, D = int(kv.pop("R")), int(kv.pop("D"))
        except (KeyError, ValueError):
            raise ParseError("window needs 'top..bottom' or R=.. D=..", line) from None
    if R < 0:
        raise ParseError("window top must lie on horosphere 0 or above", line)
    return R, D


def _key_values(tokens: list[str], line: int | None) -> dict[str, str]:
    out = {}
    for tok in tokens:
        key, sep, val = tok.partition("=")
        if not sep or not key:
            raise ParseError(f"expected key=value, got {tok!r}", line)
        out[key] = val
    return out


def parse_scenario(text: str, name: str = "<scenario>", base: Path | None = None) -> Scenario:
    base = base or Path.cwd()
    sc = Scenario(name)
    group: GroupSpec | None = None
    window: tuple[int, int] | None = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        try:
            tokens = shlex.split(raw, comments=True)
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        if not tokens:
            continue
        head, rest = tokens[0], tokens[1:]
        if head == "anchor":
            sc.anchor = " ".join(rest)
        elif head == "tags":
            sc.tags.update(rest)
        elif head in ("group", "gfa"):
            if head == "gfa":
                rest = ["gfa"] + rest
            group = _parse_group(rest, lineno, base)
        elif head == "window":
            window = parse_window(rest, lineno)
        else:
            kind = TASK_ALIASES.get(head, head)
            if kind not in TASKS:
                raise ParseError(f"unknown directive or task {head!r}", lineno)
            if group is None:
                raise ParseError(f"task {head!r} before any group line", lineno)
            sc.tasks.extend(_parse_task(kind, rest, lineno, group, window))
    return sc


def _parse_group(tokens: list[str], line: int, base: Path) -> GroupSpec:
    if not tokens or tokens[0] not in GROUP_MODULE:
        raise ParseError(f"group kind must be one of {', '.join(GROUP_MODULE)}", line)
    kind, rest = tokens[0], tokens[1:]
    params: dict[str, str] = {}
    if kind in ("builtin", "automaton"):
        if not rest:
            raise ParseError(f"group {kind} needs a {'name' if kind == 'builtin' else 'file'}", line)
        params["name" if kind == "builtin" else "file"] = rest[0]
        rest = rest[1:]
    params.update(_key_values(rest, line))
    required = {"gfa": ("F",), "padic": ("p", "b"), "perm": ("degree", "gens")}.get(kind, ())
    for key in required:
        if key not in params:
            raise ParseError(f"group {kind} needs {key}=", line)
    return GroupSpec(kind, params, line, base)


def _parse_task(kind: str, tokens: list[str], line: int, group: GroupSpec,
                window: tuple[int, int] | None) -> list[Task]:
    allowed, ranged = TASKS[kind]
    params: dict[str, str] = {}
    expect: dict[str, str] = {}
    for key, val in _key_values(tokens, line).items():
        if key == "expect":
            if val not in ("fail", "pass"):
                raise ParseError("expect= takes 'pass' or 'fail'", line)
            expect["ok"] = "false" if val == "fail" else "true"
        elif key.startswith("expect."):
            expect[key[len("expect."):]] = val
        elif key in allowed:
            params[key] = val
        else:
            raise ParseError(f"task {kind} does not take {key}=", line)
    if ranged and ranged in params:
        values = parse_range(params[ranged], line)
        return [Task(kind, {**params, ranged: str(v)}, dict(expect), line, group, window) for v in values]
    return [Task(kind, params, expect, line, group, window)]


# -- subjects -----------------------------------------------------------------


class Subject:
    """A loaded group plus per-window caches."""

    def __init__(self, spec: GroupSpec):
        self.spec = spec
        self.kind = spec.kind
        p = spec.params
        self.rec: WreathRecursion | None = None
        self._scale: dict = {}
        self._trees: dict = {}
        if self.kind == "builtin":
            self.rec = builtin(p["name"], q=int(p["q"]) if "q" in p else None)
            self.q = self.rec.q
        elif self.kind == "automaton":
            self.rec = parse_automaton((spec.base / p["file"]).read_text())
            self.q = self.rec.q
        elif self.kind == "gfa":
            fname = p["F"]
            if fname.lower() in ("sym3", "c4"):
                F = gfa.builtin_group(fname)
            else:
                F = gfa.parse_cayley_table((spec.base / fname).read_text(), Path(fname).stem)
            self.F = F
            self.ctx = gfa.make_gfa(F, gfa.named_subgroup(F, p.get("A", "1")))
            self.profile = gfa.standard_profile(self.ctx, p.get("tidy", "V0"), int(p.get("r", 0)))
            self.q = self.ctx.q
        elif self.kind == "padic":
            self.p = int(p["p"])
            self.b = int(p["b"])
            self.q = self.p
        elif self.kind == "perm":
            deg = int(p["degree"])
            gens = [parse_cycles(g, deg) for g in p["gens"].split(";") if g.strip()]
            self.group = PermGroup(deg, gens or [tuple(range(deg))])
            self.q = deg

    def need_rec(self, task: str) -> WreathRecursion:
        if self.rec is None:
            raise ValueError(f"{task} needs a self-replicating group (builtin or automaton), not {self.kind}")
        return self.rec

    def need(self, kind: str, task: str) -> None:
        if self.kind != kind:
            raise ValueError(f"{task} needs a {kind} group, not {self.kind}")

    def scale_data(self, R: int, D: int) -> ScaleGroupData:
        if (R, D) not in self._scale:
            self._scale[R, D] = ScaleGroupData(self.need_rec("scale group"), R, D)
        return self._scale[R, D]

    def coset_tree(self, window: Window) -> gfa.CosetTree:
        key = (window.R, window.D)
        if key not in self._trees:
            self._trees[key] = gfa.build_coset_tree(self.ctx, self.profile, window)
        return self._trees[key]

    def level1_group(self) -> PermGroup:
        if self.rec is not None:
            return level_quotient(self.rec, 1).group
        if self.kind == "gfa":
            return gfa.profile_residue(self.profile, 1, check=False).group
        if self.kind == "perm":
            return self.group
        raise ValueError(f"no level-1 action for a {self.kind} group")


def _window(task: Task, override: str | None = None) -> tuple[int, int]:
    R, D = parse_window([override], task.line) if override else (task.window or DEFAULT_WINDOW)
    lim = limits.current()
    if R > lim.window_R or D > lim.window_D:
        raise LimitExceeded(f"window [-{R}, {D}] exceeds the window limit [-{lim.window_R}, {lim.window_D}]")
    return R, D


# -- tasks ----------------------------------------------------------------------


def _t_residue(s: Subject, t: Task) -> tuple[dict, bool]:
    d = int(t.params.get("d", 1))
    if s.rec is not None:
        return residue(s.rec, d).to_json(), True
    if s.kind == "gfa":
        rep = gfa.profile_residue(s.profile, d)
        out = rep.to_json()
        out["factor_counts"] = gfa.factor_summary(rep)
        flag = gfa.formula_flag(s.profile, d)
        if flag:
            out["flag"] = flag
        return out, not rep.notes
    if s.kind == "perm":
        if d != 1:
            raise ValueError("a bare permutation group only has a level-1 residue")
        return make_report(1, s.group).to_json(), True
    raise ValueError(f"residue is not defined for a {s.kind} group")


def _t_check_sr(s: Subject, t: Task) -> tuple[dict, bool]:
    depth = int(t.params.get("depth", limits.current().search_depth))
    out = check_self_replicating(s.need_rec("check-sr"), depth)
    return out, out["ok"]


def _t_coset_equivalence(s: Subject, t: Task) -> tuple[dict, bool]:
    res = coset_equivalence_check(s.need_rec("coset-equivalence"), int(t.params.get("d", 1)), t.params.get("w"))
    return res.to_json(), res.equivalent


def _t_index(s: Subject, t: Task) -> tuple[dict, bool]:
    n = index_check(s.rec) if s.rec is not None else len(s.level1_group().orbit(0))
    return {"index": n, "q": s.q}, n == s.q


def _t_uniqueness(s: Subject, t: Task) -> tuple[dict, bool]:
    G = s.level1_group()
    res = uniqueness_criterion(G)
    out = {"degree": G.degree, "order": G.order()}
    out.update({"unique": res.unique_up_to_conjugacy, "witness_blocks": res.witness_blocks})
    return out, True


def _t_roundtrip(s: Subject, t: Task) -> tuple[dict, bool]:
    R, D = _window(t)
    out = roundtrip_check(s.scale_data(R, D), int(t.params.get("d", 1)))
    return out, out["ok"]


def _t_labelling(s: Subject, t: Task) -> tuple[dict, bool]:
    R, D = _window(t)
    trials = int(t.params.get("trials", 20))
    seed = int(t.params.get("seed", 0))
    out: dict = {}
    if s.rec is not None:
        E = s.scale_data(R, D)
        L = build_labelling(E.generators(), spine(s.q, 0), E.digit_transversal(), E.window)
        lab, gens, W = L.labelling, E.generators(), E.window
    elif s.kind == "padic":
        W = Window(s.p, R, D)
        lab = padic.label_edges(s.b, W)
        gens = padic.scale_generators(s.p, s.b, R)
        built = build_labelling(gens, padic.base_vertex(s.p), padic.transversal(s.p, s.b), W)
        out["matches_transversal_labelling"] = not built.labelling.differs_from(lab)
    elif s.kind == "gfa":
        W = Window(s.q, R, D)
        tree = s.coset_tree(W)
        L = build_labelling([], spine(s.q, 0), gfa.coset_transversal(tree), W)
        lab, gens = L.labelling, gfa.window_generators(tree, W)
    else:
        raise ValueError(f"labelling is not defined for a {s.kind} group")
    out["condition1"] = lab.condition1()
    out["condition2"] = lab.condition2()
    out["standard"] = not lab.differs_from(standard_labelling(W))
    out["compatible"] = check_compatible(lab, gens, trials=trials, seed=seed, window=W)
    ok = out["condition1"] and out["condition2"] and out["compatible"]["ok"]
    return out, ok and out.get("matches_transversal_labelling", True)


def _t_local_perms(s: Subject, t: Task) -> tuple[dict, bool]:
    s.need("gfa", "local-perms")
    F = s.F
    fname = t.params.get("f", "s")
    if fname in F.names:
        f = F.names.index(fname)
    else:
        try:
            f = int(fname)
        except ValueError:
            raise ValueError(f"unknown element {fname!r} of {F.name}") from None
    j = int(t.params.get("j", 0))
    R, D = _window(t)
    if not -R <= j < D:
        raise limits.WindowError(f"coordinate {j} outside window [-{R}, {D})")
    W = Window(s.q, R, D)
    tree = s.coset_tree(W)
    port = tree.portrait(gfa.FSeqElement.single(j, f), Window(s.q, R, min(j + 2, D)))
    closed = F.name == "Sym(3)" and s.profile.name == "V^(1)" and len(s.ctx.A) == 1
    counts: dict[str, dict[str, int]] = {}
    matches = True
    for n in sorted(port):
        c: dict[str, int] = {}
        for v, perm in port[n].items():
            key = perm.to_cycles()
            c[key] = c.get(key, 0) + 1
            if closed and perm != gfa.sym3_local_closed_form(f, j, v):
                matches = False
        counts[str(n)] = dict(sorted(c.items()))
    out = {"f": F.names[f], "j": j, "horospheres": counts, "closed_form": matches if closed else None}
    return out, matches


def _t_tidiness(s: Subject, t: Task) -> tuple[dict, bool]:
    s.need("gfa", "tidiness")
    out = gfa.profile_tidiness(s.profile)
    return out, bool(out["tidy"])


def _t_odometer(s: Subject, t: Task) -> tuple[dict, bool]:
    s.need("padic", "odometer")
    out = padic.odometer_extract(s.p, int(t.params.get("d", 1)))
    return out, out["ok"]


def _t_transitivity(s: Subject, t: Task) -> tuple[dict, bool]:
    R, D = _window(t)
    n = int(t.params.get("n", 0))
    W = Window(s.q, R, D)
    if s.rec is not None:
        gens = s.scale_data(R, D).generators()
    elif s.kind == "padic":
        gens = padic.scale_generators(s.p, s.b, R)
    elif s.kind == "gfa":
        gens = gfa.window_generators(s.coset_tree(W), W)
    else:
        raise ValueError(f"transitivity is not defined for a {s.kind} group")
    ok = horosphere_transitivity_check(gens, n, W)
    return {"n": n, "transitive": ok}, ok


def _t_tree(s: Subject, t: Task) -> tuple[dict, bool]:
    R, D = _window(t, t.params.get("window"))
    W = Window(s.q, R, D)
    lab = padic.label_edges(s.b, W) if s.kind == "padic" else standard_labelling(W)
    text = dot_source(lab)
    out = {"nodes": len(lab.out), "edges": sum(len(lab.children(v)) for v in lab.out),
           "sha256": hashlib.sha256(text.encode()).hexdigest()}
    if "dot" in t.params:
        path = Path(t.params["dot"])
        path.write_text(text)
        out["dot"] = str(path)
    return out, True


RUNNERS: dict[str, Callable[[Subject, Task], tuple[dict, bool]]] = {
    "residue": _t_residue,
    "check-sr": _t_check_sr,
    "coset-equivalence": _t_coset_equivalence,
    "index": _t_index,
    "uniqueness": _t_uniqueness,
    "roundtrip": _t_roundtrip,
    "labelling": _t_labelling,
    "local-perms": _t_local_perms,
    "tidiness": _t_tidiness,
    "odometer": _t_odometer,
    "transitivity": _t_transitivity,
    "tree": _t_tree,
}


# -- expectations -------------------------------------------------------------


def _coerce(key: str, text: str):
    if key == "generators":
        return sorted(g.strip() for g in text.split(";") if g.strip())
    if key == "factor_counts":
        out = {}
        for part in text.split("*"):
            name, _, exp = part.strip().rpartition("^")
            if not name:
                name, exp = exp, "1"
            out[name] = out.get(name, 0) + int(exp)
        return out
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _lookup(result: dict, key: str):
    cur = result
    for part in key.split("."):
        if not isinstance(cur, dict) or part not in cur:
            return None
        cur = cur[part]
    return cur


def check_expectations(result: dict, expect: dict[str, str]) -> list[str]:
    out = []
    for key, text in expect.items():
        if key == "ok":
            continue
        want = _coerce(key.rpartition(".")[2], text)
        got = _lookup(result, key)
        if key == "generators" and isinstance(got, list):
            got = sorted(got)
        if isinstance(got, str):
            want = text
        if got != want:
            out.append(f"{key}: expected {json.dumps(want)}, got {json.dumps(got)}")
    return out


# -- running --------------------------------------------------------------------


def run_task(task: Task, subjects: dict[int, Subject | Exception], scenario: str) -> dict:
    report: dict = {"scenario": scenario, "line": task.line, "task": task.kind, "params": dict(task.params),
                    "ok": False}
    try:
        subject = subjects[id(task.group)]
        if isinstance(subject, Exception):
            raise subject
        result, natural = RUNNERS[task.kind](subject, task)
    except Exception as exc:  # reported per task, never fatal for the run
        report["error"] = f"{type(exc).__name__}: {exc}"
        return report
    report.update(result)
    want_ok = _coerce("ok", task.expect.get("ok", "true"))
    mismatches = check_expectations(result, task.expect)
    if mismatches:
        report["mismatches"] = mismatches
    report["ok"] = bool(natural) == want_ok and not mismatches
    return report


def _load_subjects(sc: Scenario) -> dict[int, Subject | Exception]:
    out: dict[int, Subject | Exception] = {}
    for t in sc.tasks:
        if t.group is not None and id(t.group) not in out:
            try:
                out[id(t.group)] = Subject(t.group)
            except Exception as exc:
                out[id(t.group)] = exc
    return out


def run_scenario(sc: Scenario, parallel: bool = False) -> list[dict]:
    subjects = _load_subjects(sc)
    if not parallel or len(sc.tasks) < 2:
        return [run_task(t, subjects, sc.name) for t in sc.tasks]
    # threads do not inherit context variables, so carry the active limits along
    with ThreadPoolExecutor() as pool:
        futures = [pool.submit(contextvars.copy_context().run, run_task, t, subjects, sc.name) for t in sc.tasks]
        return [f.result() for f in futures]


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(), path.stem, path.parent)


def emit(reports: list[dict], out=None) -> None:
    out = out or sys.stdout
    for r in reports:
        out.write(json.dumps(r) + "\n")


def summarize(reports: list[dict], err=None) -> None:
    err = err or sys.stderr
    for r in reports:
        status = "ok  " if r["ok"] else "FAIL"
        extra = f"  ({r['error']})" if "error" in r else ""
        err.write(f"{status} {r['scenario']}:{r['line']} {_task_label(r)}{extra}\n")
    passed = sum(r["ok"] for r in reports)
    err.write(f"{passed}/{len(reports)} tasks ok\n")


def _task_label(r: dict) -> str:
    return " ".join([r["task"]] + [f"{k}={v}" for k, v in r["params"].items()])


# -- DOT export -----------------------------------------------------------------


def _as_labelling(tree) -> EdgeLabelling:
    if isinstance(tree, EdgeLabelling):
        return tree
    if isinstance(tree, Window):
        return standard_labelling(tree)
    if isinstance(tree, gfa.CosetTree):
        if tree.window is None:
            raise ValueError("coset tree has no window")
        # coset names are digit strings, so the coset tree carries the standard labels
        return standard_labelling(tree.window)
    raise TypeError(f"cannot render {type(tree).__name__} as a tree")


def dot_source(tree) -> str:
    """DOT digraph with nodes named ``n:digits`` and child edges labelled 0..q-1."""
    lab = _as_labelling(tree)
    lines = ["digraph window {"]
    verts = lab.vertices()
    if verts:
        lines.append("  node [shape=ellipse];")
    for v in verts:
        style = " [color=red, penwidth=2]" if getattr(v, "is_spine", lambda: False)() else ""
        lines.append(f'  "{format_vertex(v)}"{style};')
    for v in verts:
        for c in lab.children(v):
            lines.append(f'  "{format_vertex(v)}" -> "{format_vertex(c)}" [label="{lab.label(v, c)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_dot(tree, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(dot_source(tree))
    return path


# -- bundled scenarios ------------------------------------------------------------


def bundled_scenarios() -> list[Path]:
    root = resources.files("scalelab") / "scenarios"
    return sorted(Path(str(p)) for p in root.iterdir() if p.name.endswith(".scn"))


@dataclass
class ReproRow:
    anchor: str
    task: str
    ok: bool
    detail: str = ""


def repro_all(only: list[str] | None = None, parallel: bool = False) -> list[ReproRow]:
    """Run every bundled scenario that has an anchor; one row per task."""
    rows = []
    for path in bundled_scenarios():
        try:
            sc = load_scenario(path)
        except Exception as exc:
            rows.append(ReproRow(path.stem, "parse", False, f"{type(exc).__name__}: {exc}"))
            continue
        if sc.anchor is None:
            continue
        if only and not (set(only) & sc.modules()):
            continue
        for r in run_scenario(sc, parallel):
            detail = r.get("error") or "; ".join(r.get("mismatches", []))
            rows.append(ReproRow(sc.anchor, _task_label(r), r["ok"], detail))
    return rows


def format_rows(rows: list[ReproRow]) -> str:
    if not rows:
        return "no scenarios selected\n"
    w1 = max(len(r.anchor) for r in rows)
    w2 = max(len(r.task) for r in rows)
    out = []
    for r in rows:
        line = f"{'pass' if r.ok else 'FAIL'}  {r.anchor:<{w1}}  {r.task:<{w2}}"
        if r.detail and not r.ok:
            line += f"  {r.detail}"
        out.append(line.rstrip())
    return "\n".join(out) + "\n"


# -- argument parsing -------------------------------------------------------------


def _common(sub: bool = False) -> argparse.ArgumentParser:
    # subcommand copies must not reset flags given before the subcommand
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS if sub else None)
    p.add_argument("--max-points", type=int, help="largest point set any action may use "
                   "(default 100000, or SCALELAB_MAX_POINTS)")
    p.add_argument("--window", help="largest window as top..bottom, e.g. --window=-6..6")
    p.add_argument("--search-depth", type=int, help="default depth for self-replication checks (default 4)")
    p.add_argument("--parallel", action="store_true", help="run independent tasks concurrently")
    return p


def _group_args(p: argparse.ArgumentParser, kinds: tuple[str, ...]) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    if "builtin" in kinds:
        g.add_argument("--builtin", metavar="NAME", help="builtin recursion, e.g. grigorchuk or odometer")
    if "automaton" in kinds:
        g.add_argument("--automaton", metavar="FILE", help="automaton description file")
    if "gfa" in kinds:
        g.add_argument("--gfa", metavar="SPEC", help='G(F,A) spec, e.g. "F=sym3 A=1 tidy=V r=1"')
    if "padic" in kinds:
        g.add_argument("--padic", metavar="SPEC", help='affine group spec, e.g. "p=5 b=2"')
    p.add_argument("--q", type=int, help="alphabet size for parametrized builtins")


def build_parser() -> argparse.ArgumentParser:
    common = _common(sub=True)
    parser = argparse.ArgumentParser(prog="scalelab", description="Scale groups on regular trees: scenarios and checks.",
                                     parents=[_common()])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run scenario files")
    p.add_argument("files", nargs="+")

    p = sub.add_parser("residue", parents=[common], help="residue groups of a group")
    _group_args(p, ("builtin", "automaton", "gfa"))
    p.add_argument("--d", default="1", help="level or range, e.g. 1..3")

    p = sub.add_parser("check-sr", parents=[common], help="finite-depth self-replication check")
    _group_args(p, ("builtin", "automaton"))
    p.add_argument("--depth", help="depth or range (default: --search-depth)")

    p = sub.add_parser("gfa", parents=[common], help="G(F,A) residues, tidiness and local permutations")
    p.add_argument("spec", nargs="+", help="F=sym3 A=1 tidy=V r=1")
    p.add_argument("--d", default="1", help="residue levels, e.g. 1..3")
    p.add_argument("--local", metavar="F", help="also report local permutations of this element")
    p.add_argument("--j", default="0", help="coordinates for --local")
    p.add_argument("--area", metavar="TOP..BOTTOM", help="window for --local, e.g. --area=-2..3")

    p = sub.add_parser("padic", parents=[common], help="affine group labellings and the odometer")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--b", type=int, default=1)
    p.add_argument("--area", metavar="TOP..BOTTOM", default="-1..3", help="labelling window")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--odometer", metavar="D", help="also compare the odometer at these depths")

    p = sub.add_parser("tree", parents=[common], help="DOT rendering of a labelled window")
    _group_args(p, ("builtin", "automaton", "gfa", "padic"))
    p.add_argument("--area", metavar="TOP..BOTTOM", default="-1..1", help="window to draw, e.g. --area=-1..1")
    p.add_argument("--dot", help="output file (default: standard output)")

    p = sub.add_parser("repro-all", parents=[common], help="run every bundled scenario")
    p.add_argument("--only", action="append", help="restrict to a module tag (automata, corr, gfa, padic, perm, ...)")
    return parser


def _limit_overrides(args) -> dict:
    out = {}
    if args.max_points is not None:
        out["max_points"] = args.max_points
    if args.window is not None:
        R, D = parse_window([args.window])
        out["window_R"], out["window_D"] = R, D
    if args.search_depth is not None:
        out["search_depth"] = args.search_depth
    return out


def _group_line(args) -> str:
    if getattr(args, "builtin", None):
        return f"group builtin {shlex.quote(args.builtin)}" + (f" q={args.q}" if args.q else "")
    if getattr(args, "automaton", None):
        return f"group automaton {shlex.quote(str(Path(args.automaton).resolve()))}"
    if getattr(args, "gfa", None):
        return f"group gfa {args.gfa}"
    return f"group padic {args.padic}"


def _synthesize(args) -> str:
    """Translate a direct subcommand into scenario text."""
    cmd = args.command
    if cmd == "residue":
        return f"{_group_line(args)}\nresidue d={args.d}\n"
    if cmd == "check-sr":
        depth = f" depth={args.depth}" if args.depth else ""
        return f"{_group_line(args)}\ncheck-sr{depth}\n"
    if cmd == "gfa":
        lines = ["group gfa " + " ".join(args.spec)]
        if args.area:
            lines.append(f"window {args.area}")
        lines += ["tidiness", f"residue d={args.d}"]
        if args.local:
            lines.append(f"local-perms f={args.local} j={args.j}")
        return "\n".join(lines) + "\n"
    if cmd == "padic":
        lines = [f"group padic p={args.p} b={args.b}", f"window {args.area}", f"labelling trials={args.trials}"]
        if args.odometer:
            lines.append(f"odometer d={args.odometer}")
        return "\n".join(lines) + "\n"
    raise AssertionError(cmd)


def _run_text(text: str, name: str, parallel: bool, out, err) -> int:
    sc = parse_scenario(text, name)
    reports = run_scenario(sc, parallel)
    emit(reports, out)
    summarize(reports, err)
    return 0 if all(r["ok"] for r in reports) else 1


def main(argv: list[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        overrides = _limit_overrides(args)
    except ParseError as exc:
        err.write(f"scalelab: {exc}\n")
        return 2
    with limits.using(**overrides):
        try:
            return _dispatch(args, out, err)
        except ParseError as exc:
            err.write(f"scalelab: {exc}\n")
            return 2


def _dispatch(args, out, err) -> int:
    cmd = args.command
    if cmd == "run":
        code = 0
        for f in args.files:
            path = Path(f)
            try:
                sc = load_scenario(path)
            except ParseError as exc:
                err.write(f"{path}: {exc}\n")
                return 2
            except OSError as exc:
                err.write(f"scalelab: {exc}\n")
                return 2
            reports = run_scenario(sc, args.parallel)
            emit(reports, out)
            summarize(reports, err)
            if not all(r["ok"] for r in reports):
                code = 1
        return code
    if cmd == "tree":
        R, D = parse_window([args.area])
        try:
            _window(Task("tree", {}, {}, 0, None, (R, D)))
            subject = Subject(_parse_group(shlex.split(_group_line(args))[1:], 1, Path.cwd()))
        except (ValueError, OSError) as exc:
            err.write(f"scalelab: {exc}\n")
            return 2
        W = Window(subject.q, R, D)
        lab = padic.label_edges(subject.b, W) if subject.kind == "padic" else standard_labelling(W)
        if args.dot:
            export_dot(lab, args.dot)
            err.write(f"wrote {args.dot}: {len(lab.out)} nodes\n")
        else:
            out.write(dot_source(lab))
        return 0
    if cmd == "repro-all":
        rows = repro_all(args.only, args.parallel)
        out.write(format_rows(rows))
        passed = sum(r.ok for r in rows)
        err.write(f"{passed}/{len(rows)} rows pass\n")
        return 0 if passed == len(rows) else 1
    return _run_text(_synthesize(args), cmd, args.parallel, out, err)


if __name__ == "__main__":
    sys.exit(main())

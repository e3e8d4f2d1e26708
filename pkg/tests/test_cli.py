import io
import json
import subprocess
import sys
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from scalelab import cli, gfa
from scalelab.limits import ParseError
from scalelab.trees import Window

SCN = Path(cli.__file__).parent / "scenarios"


def run(argv, env=None):
    out, err = io.StringIO(), io.StringIO()
    code = cli.main(argv, out, err)
    return code, out.getvalue(), err.getvalue()


def reports(text):
    return [json.loads(line) for line in text.splitlines() if line.strip()]


class TestParsing:
    def test_ranges(self):
        assert cli.parse_range("1..3") == [1, 2, 3]
        assert cli.parse_range("-2..1") == [-2, -1, 0, 1]
        assert cli.parse_range("2,5") == [2, 5]
        assert cli.parse_range("4") == [4]

    def test_windows(self):
        assert cli.parse_window(["-1..4"]) == (1, 4)
        assert cli.parse_window(["R=2", "D=3"]) == (2, 3)

    def test_range_expansion(self):
        sc = cli.parse_scenario("group builtin odometer\nresidue d=1..3\n")
        assert [t.params["d"] for t in sc.tasks] == ["1", "2", "3"]

    def test_anchor_and_tags(self):
        sc = cli.parse_scenario("anchor Some row\ntags corr extra\ngroup builtin grigorchuk\nindex\n")
        assert sc.anchor == "Some row" and {"corr", "extra", "automata"} <= sc.modules()

    @pytest.mark.parametrize("text,line", [
        ("residue d=1\n", 1),
        ("group builtin odometer\nfrobnicate\n", 2),
        ("group builtin odometer\n\nresidue q=3\n", 3),
        ("group builtin odometer\nresidue d=x..y\n", 2),
        ("group nonsense\n", 1),
        ("group builtin odometer\nwindow 3..1\n", 2),
    ])
    def test_errors_with_line(self, text, line):
        with pytest.raises(ParseError) as exc:
            cli.parse_scenario(text)
        assert exc.value.line == line

    @given(st.integers(-5, 5), st.integers(0, 5))
    def test_range_round_trip(self, a, n):
        assert cli.parse_range(f"{a}..{a + n}") == list(range(a, a + n + 1))


class TestRun:
    def test_level1_residue(self):
        code, out, _ = run(["run", str(SCN / "sym3_v1_level1_residue.scn")])
        rep = [r for r in reports(out) if r["task"] == "residue"][0]
        assert code == 0
        assert sorted(rep["generators"]) == ["(0 1 2)(3 4 5)", "(0 3)(1 4)(2 5)"]
        assert rep["abelian"] and rep["order"] == 6

    def test_empty(self):
        code, out, _ = run(["run", str(SCN / "empty_task_list.scn")])
        assert code == 0 and out == ""

    def test_root_swap(self):
        code, out, _ = run(["run", str(SCN / "root_swap_failure.scn")])
        rep = reports(out)[0]
        assert code == 1 and not rep["ok"]
        assert rep["counterexample"] == "0"

    def test_parse_error_exit(self, tmp_path):
        f = tmp_path / "bad.scn"
        f.write_text("group builtin odometer\nresidue d=1\nbogus\n")
        code, _, err = run(["run", str(f)])
        assert code == 2 and "line 3" in err

    def test_missing_file(self, tmp_path):
        assert run(["run", str(tmp_path / "none.scn")])[0] == 2

    def test_limit_named_per_task(self, tmp_path):
        f = tmp_path / "big.scn"
        f.write_text("group builtin grigorchuk\nresidue d=1\nresidue d=12\n")
        code, out, _ = run(["--max-points", "1000", "run", str(f)])
        small, big = reports(out)
        assert code == 1 and small["ok"] and not big["ok"]
        assert big["error"].startswith("LimitExceeded")

    def test_env_limit(self, tmp_path, monkeypatch):
        f = tmp_path / "big.scn"
        f.write_text("group builtin grigorchuk\nresidue d=11\n")
        monkeypatch.setenv("SCALELAB_MAX_POINTS", "100")
        code, out, _ = run(["run", str(f)])
        assert code == 1 and "LimitExceeded" in reports(out)[0]["error"]

    def test_window_cap(self, tmp_path):
        f = tmp_path / "w.scn"
        f.write_text("group builtin odometer\nwindow -1..4\nroundtrip d=1\n")
        code, out, _ = run(["--window=-1..2", "run", str(f)])
        assert code == 1 and "LimitExceeded" in reports(out)[0]["error"]

    def test_expect_mismatch(self, tmp_path):
        f = tmp_path / "m.scn"
        f.write_text("group builtin odometer q=3\nresidue d=2 expect.order=8\n")
        code, out, _ = run(["run", str(f)])
        assert code == 1 and reports(out)[0]["mismatches"]

    def test_deterministic_and_parallel(self):
        files = [str(SCN / n) for n in ("sym3_v_residue_table.scn", "self_replicating_builtins.scn")]
        a = run(["run"] + files)[1]
        b = run(["run"] + files)[1]
        c = run(["--parallel", "run"] + files)[1]
        assert a == b == c


class TestSubcommands:
    def test_residue(self):
        code, out, _ = run(["residue", "--builtin", "odometer", "--q", "3", "--d", "1..2"])
        assert code == 0 and [r["order"] for r in reports(out)] == [3, 9]

    def test_check_sr(self):
        code, out, _ = run(["check-sr", "--builtin", "root_swap", "--depth", "2"])
        assert code == 1 and reports(out)[0]["counterexample"] == "0"

    def test_automaton(self):
        code, out, _ = run(["residue", "--automaton", str(SCN / "grigorchuk.aut"), "--d", "3"])
        assert code == 0 and reports(out)[0]["order"] == 128

    def test_gfa(self):
        code, out, _ = run(["gfa", "F=sym3", "A=1", "tidy=V", "r=1", "--d", "2"])
        rs = reports(out)
        assert code == 0 and rs[-1]["order"] == 36

    def test_padic(self):
        code, out, _ = run(["padic", "--p", "5", "--b", "2", "--area=-1..2", "--odometer", "2"])
        assert code == 0 and all(r["ok"] for r in reports(out))


class TestDot:
    def test_binary_window(self):
        src = cli.dot_source(Window(2, 1, 1))
        assert src.count("->") == 6
        assert src.count('";') + src.count("penwidth=2];") == 7

    def test_gfa_window(self):
        tree = gfa.build_coset_tree(gfa.make_gfa(gfa.sym3(), gfa.sym3().trivial()), None, Window(6, 1, 1))
        src = cli.dot_source(tree)
        assert src.count("->") == 42

    def test_empty_window(self):
        assert cli.dot_source(Window(2, 1, -2)) == "digraph window {\n}\n"

    def test_byte_stable(self, tmp_path):
        a = cli.export_dot(Window(3, 1, 1), tmp_path / "a.dot").read_bytes()
        b = cli.export_dot(Window(3, 1, 1), tmp_path / "b.dot").read_bytes()
        assert a == b

    def test_tree_subcommand(self, tmp_path):
        code, out, _ = run(["tree", "--builtin", "odometer", "--area=-1..1"])
        assert code == 0 and out == cli.dot_source(Window(2, 1, 1))
        path = tmp_path / "t.dot"
        assert run(["tree", "--padic", "p=3 b=2", "--area=-1..1", "--dot", str(path)])[0] == 0
        assert path.read_text().startswith("digraph window {")

    @given(st.sampled_from([2, 3]), st.integers(0, 2), st.integers(-1, 2))
    def test_counts(self, q, R, D):
        src = cli.dot_source(Window(q, R, D))
        nodes = sum(q ** (n + R) for n in range(-R, D + 1))
        assert src.count("->") == max(nodes - 1, 0)


class TestRepro:
    def test_all_pass(self):
        rows = cli.repro_all()
        assert rows and all(r.ok for r in rows)

    def test_only_padic(self):
        rows = cli.repro_all(["padic"])
        assert rows and all("p-adic" in r.anchor.lower() or "odometer" in r.anchor.lower() for r in rows)
        anchors = {cli.load_scenario(f).anchor for f in cli.bundled_scenarios()} - {None}
        assert {r.anchor for r in rows} < anchors

    def test_stubbed_gfa(self, monkeypatch):
        gfa_rows = {r.anchor for r in cli.repro_all(["gfa"])}

        def broken(*a, **k):
            raise RuntimeError("stubbed")

        monkeypatch.setattr(gfa, "profile_residue", broken)
        monkeypatch.setattr(gfa, "build_coset_tree", broken)
        monkeypatch.setattr(gfa, "make_gfa", broken)
        rows = cli.repro_all()
        assert any(not r.ok for r in rows)
        assert all(r.ok for r in rows if r.anchor not in gfa_rows)
        # mixed scenarios keep their permutation-group rows
        assert {r.anchor for r in rows if not r.ok} == gfa_rows

    def test_module_entry(self):
        proc = subprocess.run([sys.executable, "-m", "scalelab", "repro-all", "--only", "padic"],
                              capture_output=True, text=True, timeout=120)
        assert proc.returncode == 0 and "pass" in proc.stdout

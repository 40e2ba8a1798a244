"""Tests for app.py: the command-line entry point and its reports."""

import json

import pytest

from app import build_parser, run
from core.data_loader import EXAMPLES_DIR
from core.documents import parse_document


def invoke(capsys, *argv):
    """Run a command and return (exit code, parsed JSON report)."""
    code = run(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip() else None


class TestExitCodes:
    """0 for ok, 1 for violations, 2 for usage and parse errors."""

    def test_arnold_demo_rp2(self, capsys):
        code, report = invoke(capsys, "arnold-demo", "rp2", "--format", "json")
        assert code == 0
        assert report["status"] == "ok"
        assert (report["result"]["critical"], report["result"]["min_rank"], report["result"]["holds"]) == (3, 3, True)

    def test_d2_failure_has_witness(self, capsys):
        code, report = invoke(capsys, "d2", "d2_failing")
        assert code == 1
        assert report["status"] == "violation"
        assert report["result"]["d_squared_zero"] is False
        assert report["findings"][0]["code"] == "DSquaredNonzero"
        assert report["findings"][0]["witness"] == ["x", "y"]

    def test_assemble_rejects_failing_category(self, capsys):
        code, _ = invoke(capsys, "assemble", "d2_failing")
        assert code == 1

    def test_unknown_subcommand(self, capsys):
        assert run(["frobnicate"]) == 2

    def test_no_subcommand(self, capsys):
        assert run([]) == 2

    def test_unknown_space(self, capsys):
        assert run(["homology", "moebius"]) == 2

    def test_missing_document(self, capsys):
        code, report = invoke(capsys, "d2", "no_such_example")
        assert code == 2
        assert report["status"] == "error"

    def test_parse_error(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"fmt": 1,\n "kind": ', encoding="utf-8")
        code, report = invoke(capsys, "d2", str(bad))
        assert code == 2
        assert report["findings"][0]["code"] == "ParseError"

    def test_wrong_kind(self, capsys):
        code, report = invoke(capsys, "snf", "two_cells")
        assert code == 2
        assert report["findings"][0]["code"] == "SchemaError"

    def test_bad_truncation(self, capsys):
        code, _ = invoke(capsys, "assemble", "two_cells", "--truncation", "-1")
        assert code == 2

    def test_bad_period(self, capsys):
        code, _ = invoke(capsys, "minrank", "circle_complex", "--period", "-1")
        assert code == 2

    def test_energy_violation(self, capsys):
        code, report = invoke(capsys, "descend", "energy_violating")
        assert code == 1
        assert report["findings"][0]["code"] == "NegativeValuationEntry"
        assert report["findings"][0]["witness"] == ["x", "y"]

    @pytest.mark.parametrize("argv", [
        ["assemble", "two_cells"],
        ["d2", "two_cells"],
        ["cone", "two_cells", "--c1", "x"],
        ["descend", "two_cells"],
        ["arnold", "two_cells"],
        ["bifurcate", "two_cells"],
        ["snf", "diagonal_matrix"],
        ["minrank", "circle_complex"],
        ["minrank", "two_cells"],
        ["euler", "interval_space"],
        ["double", "square"],
        ["collar", "interval"],
        ["product", "interval", "interval_space"],
        ["extend", "two_edges"],
        ["transversal", "single_zero"],
        ["count", "single_zero"],
        ["boundary", "wall_curve"],
        ["triangulate", "klein"],
        ["morse", "torus"],
    ])
    def test_bundled_examples_pass(self, capsys, argv):
        code, report = invoke(capsys, *argv)
        assert code == 0, report["findings"]
        assert report["findings"] == []


class TestFlowCommands:
    """Reports of the flow-category commands."""

    def test_assemble_returns_complex(self, capsys):
        _, report = invoke(capsys, "assemble", "two_cells", "--truncation", "exact")
        complex_ = report["result"]["complex"]
        assert {g["id"] for g in complex_["generators"]} == {"x", "y"}
        assert complex_["entries"][0]["value"] == "2 exact"

    def test_cone_blocks(self, capsys):
        _, report = invoke(capsys, "cone", "two_cells", "--c1", "x")
        assert report["result"]["c1"] == ["x"]
        assert report["result"]["c2"] == ["y"]
        assert report["result"]["chain_map"] and report["result"]["reassembles"]

    def test_cone_needs_a_part(self, capsys):
        code, _ = invoke(capsys, "cone", "two_cells")
        assert code == 2

    def test_cone_wrong_direction(self, capsys):
        code, report = invoke(capsys, "cone", "two_cells", "--c1", "y")
        assert code == 1
        assert report["findings"][0]["code"] == "SplitInvalid"

    def test_square(self, capsys):
        code, report = invoke(
            capsys, "square", "square",
            "--part", "a=1", "--part", "b=2", "--part", "c=3", "--part", "d=4",
        )
        assert code == 0
        assert report["result"]["verified"] is True
        assert report["result"]["parts"] == {"1": ["a"], "2": ["b"], "3": ["c"], "4": ["d"]}

    def test_descend_is_over_lambda0(self, capsys):
        _, report = invoke(capsys, "descend", "two_cells", "--truncation", "exact")
        assert report["result"]["complex"]["entries"][0]["value"] == "2*T^(1) exact"

    def test_bifurcate_explicit_move(self, capsys):
        code, report = invoke(capsys, "bifurcate", "two_cells", "--move", "d:x,T^(1/2)")
        assert code == 0
        assert report["result"]["invariant"] is True
        assert report["result"]["moves"] == ["d:x,T^(1/2)"]

    def test_bifurcate_bad_move(self, capsys):
        code, _ = invoke(capsys, "bifurcate", "two_cells", "--move", "z:x")
        assert code == 2

    def test_bifurcate_nonpositive_valuation(self, capsys):
        code, report = invoke(capsys, "bifurcate", "two_cells", "--move", "d:x,1")
        assert code == 1
        assert report["findings"][0]["code"] == "ValuationNotPositive"

    def test_arnold(self, capsys):
        _, report = invoke(capsys, "arnold", "two_cells")
        assert report["result"]["min_rank"] == 2
        assert report["result"]["generators"] == 2
        assert report["result"]["cohomology"]["1"]["torsion"] == [2]


class TestOtherCommands:
    """Algebra, strata, section and Morse reports."""

    def test_snf(self, capsys):
        _, report = invoke(capsys, "snf", "diagonal_matrix")
        assert report["result"]["rank"] == 2
        assert len(report["result"]["invariant_factors"]) == 2

    def test_minrank(self, capsys):
        _, report = invoke(capsys, "minrank", "circle_complex")
        assert report["result"]["min_rank"] == 2
        assert report["result"]["verified"] is True

    def test_double_interval(self, capsys):
        _, report = invoke(capsys, "double", "interval")
        assert report["result"]["euler"] == 0
        assert report["result"]["copies"] == {"e": 2, "v0": 1, "v1": 1}

    def test_double_square_is_a_torus(self, capsys):
        _, report = invoke(capsys, "double", "square")
        assert report["result"]["euler"] == 0

    def test_collar_preserves_euler(self, capsys):
        _, report = invoke(capsys, "collar", "square")
        assert report["result"]["euler_before"] == report["result"]["euler_after"] == 1

    def test_product(self, capsys):
        _, report = invoke(capsys, "product", "interval", "interval")
        assert report["result"]["k"] == 2
        assert report["result"]["euler"] == 1

    def test_euler_document(self, capsys):
        _, report = invoke(capsys, "euler", "interval_space")
        assert report["result"]["euler"] == 1

    def test_count(self, capsys):
        _, report = invoke(capsys, "count", "single_zero")
        assert report["result"]["count"] == 1

    def test_count_symmetric_section(self, capsys):
        _, report = invoke(capsys, "count", "swap_symmetric")
        assert report["result"]["count"] == 1

    def test_boundary(self, capsys):
        _, report = invoke(capsys, "boundary", "wall_curve")
        assert report["result"]["consistent"] is True
        assert report["result"]["walls"]["1"] == {"count": -1, "endpoint_sum": 1, "expected": 1}

    def test_boundary_needs_a_curve(self, capsys):
        code, _ = invoke(capsys, "boundary", "single_zero")
        assert code == 2

    def test_homology(self, capsys):
        _, report = invoke(capsys, "homology", "klein")
        assert report["result"]["homology"]["1"] == {"free_rank": 1, "torsion": [2]}

    def test_triangulate(self, capsys):
        _, report = invoke(capsys, "triangulate", "rp2")
        assert report["result"]["f_vector"] == [6, 15, 10]
        assert report["result"]["euler"] == 1

    def test_morse(self, capsys):
        _, report = invoke(capsys, "morse", "torus")
        assert report["result"]["morse_numbers"] == {"0": 1, "1": 2, "2": 1}
        assert report["result"]["oracle_agrees"] is True

    def test_morse_export(self, capsys, tmp_path):
        target = tmp_path / "rp2.json"
        invoke(capsys, "morse", "rp2", "--export", str(target))
        doc = parse_document(target.read_text(encoding="utf-8"))
        assert doc.kind == "flow_category"
        code, report = invoke(capsys, "arnold", str(target))
        assert code == 0
        assert report["result"]["min_rank"] == 3


class TestReports:
    """Output formats and determinism."""

    def test_text_format(self, capsys):
        code = run(["arnold-demo", "sphere2", "--format", "text"])
        out = capsys.readouterr().out
        assert code == 0
        assert out.splitlines()[0] == "arnold-demo: ok"

    def test_text_format_shows_witness(self, capsys):
        run(["d2", "d2_failing", "--format", "text"])
        out = capsys.readouterr().out
        assert "[DSquaredNonzero]" in out
        assert 'witness: ["x", "y"]' in out

    @pytest.mark.parametrize("argv", [
        ["arnold-demo", "klein"],
        ["bifurcate", "two_cells", "--seed", "7"],
        ["boundary", "wall_curve"],
    ])
    def test_deterministic_apart_from_timing(self, capsys, argv):
        _, first = invoke(capsys, *argv)
        _, second = invoke(capsys, *argv)
        first.pop("timing")
        second.pop("timing")
        assert first == second

    def test_reports_go_to_stdout_only(self, capsys):
        run(["d2", "two_cells", "--verbose"])
        captured = capsys.readouterr()
        assert json.loads(captured.out)["command"] == "d2"
        assert "\"command\"" not in captured.err

    def test_every_example_parses(self):
        for path in sorted(EXAMPLES_DIR.glob("*.json")):
            doc = parse_document(path.read_text(encoding="utf-8"))
            doc.build()

    def test_every_subcommand_registered(self):
        parser = build_parser()
        commands = set(parser._subparsers._group_actions[0].choices)
        assert commands == {
            "assemble", "d2", "cone", "square", "descend", "bifurcate", "arnold",
            "snf", "minrank", "double", "collar", "product", "euler", "extend",
            "transversal", "count", "boundary", "triangulate", "homology", "morse",
            "arnold-demo",
        }

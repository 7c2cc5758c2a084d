"""Tests for the psh-lab command line, run configuration and report files."""

import json
import re

import pytest

from psh_extension_lab.cli.main import main
from psh_extension_lab.cli.reports import abp_csv_path, _cell
from psh_extension_lab.cli.run_config import ConfigError, build_set, parse_config


def _report(path):
    return json.loads(path.read_text(encoding="utf-8"))


class TestParser:
    def test_unknown_command(self):
        with pytest.raises(SystemExit):
            main(["bogus"])

    def test_summary_on_stdout(self, capsys):
        assert main(["certify", "--target", "norm-squared", "--n", "1"]) == 0
        summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert summary == {"command": "certify", "status": "Pass", "exit_code": 0}


class TestCertify:
    @pytest.mark.parametrize(
        "target, code",
        [
            ("norm-squared", 0),
            ("neg-norm-squared", 1),
            ("intro-counterexample", 1),
            ("x1**2 + y1**2", 0),
        ],
    )
    def test_exit_codes(self, target, code):
        assert main(["certify", "--target", target, "--n", "1"]) == code

    def test_rejected_expression(self, capsys):
        assert main(["certify", "--target", "import os", "--n", "1"]) == 3
        assert "target" in capsys.readouterr().err

    def test_entry_needs_higher_dimension(self):
        assert main(["certify", "--target", "sh-not-psh", "--n", "1"]) == 3

    def test_json_report(self, tmp_path):
        out = tmp_path / "certify.json"
        assert main(["certify", "--target", "intro-counterexample", "--n", "1", "--out-json", str(out)]) == 1
        report = _report(out)
        assert set(report) == {"command", "version", "inputs", "status", "exit_code", "result", "timing_seconds"}
        assert report["status"] == "Fail"
        verdicts = report["result"]["verdicts"]
        assert verdicts["subharmonic"]["status"] == "Fail"
        assert verdicts["psh_off_E"]["status"] == "Pass"
        assert report["inputs"]["grid"]["n"] == 1

    def test_deterministic(self, tmp_path):
        results = []
        for name in ("a.json", "b.json"):
            out = tmp_path / name
            main(["certify", "--target", "neg-abs-re-z1", "--n", "1", "--seed", "7", "--out-json", str(out)])
            results.append(_report(out)["result"])
        assert results[0] == results[1]

    def test_exclusion_from_config(self, tmp_path):
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"exclude": {"kind": "hyperplane"}}), encoding="utf-8")
        out = tmp_path / "out.json"
        code = main(["certify", "--config", str(config), "--target=-abs(x1)", "--n", "1", "--out-json", str(out)])
        assert code == 1
        report = _report(out)
        assert report["result"]["exclude"]["kind"] == "level_set"
        assert report["result"]["verdicts"]["psh_off_E"]["status"] == "Pass"


class TestConfigErrors:
    def test_malformed_json(self, tmp_path):
        config = tmp_path / "bad.json"
        config.write_text("{not json", encoding="utf-8")
        assert main(["certify", "--config", str(config), "--target", "norm-squared"]) == 3

    def test_missing_file(self, tmp_path):
        assert main(["certify", "--config", str(tmp_path / "absent.json")]) == 3

    def test_unknown_key(self, tmp_path):
        config = tmp_path / "extra.json"
        config.write_text(json.dumps({"bogus": 1}), encoding="utf-8")
        assert main(["certify", "--config", str(config), "--target", "norm-squared"]) == 3

    def test_even_points_per_axis(self, capsys):
        assert main(["certify", "--target", "norm-squared", "--n", "1", "--ppa", "16"]) == 3
        assert "grid.points_per_axis" in capsys.readouterr().err

    def test_bad_delta_list(self):
        assert main(["abp", "--delta", "0.2,abc"]) == 3

    @pytest.mark.parametrize(
        "document, path",
        [
            ({"command": "certify", "exclude": {"kind": "sphere", "radius": -1}}, "exclude.radius"),
            ({"command": "certify", "exclude": {"kind": "torus"}}, "exclude"),
            ({}, "command"),
            ({"command": "certify", "grid": {"n": 1, "center": [0, 0, 0]}}, "grid"),
        ],
    )
    def test_field_paths(self, document, path):
        with pytest.raises(ConfigError) as info:
            parse_config(json.dumps(document))
        assert info.value.field_path == path
        assert info.value.exit_code == 3

    def test_not_an_object(self):
        with pytest.raises(ConfigError, match="JSON object"):
            parse_config("[1, 2]")

    def test_output_aliases(self):
        config = parse_config(json.dumps({"command": "abp", "output": {"json": "r.json", "csv": "r.csv"}}))
        assert config.output.json_path == "r.json"
        assert config.output.csv_path == "r.csv"


class TestSetConfigs:
    def test_points(self):
        config = parse_config(json.dumps({"command": "certify", "exclude": {"kind": "points", "points": [[0.5, 0.0]]}}))
        E = build_set(config.exclude, 1)
        assert E.contains([0.5, 0.1], 0.1 + 1e-12)
        assert not E.contains([0.0, 0.0], 0.4)
        assert E.describe() == {"kind": "points", "points": [[0.5, 0.0]]}

    def test_points_wrong_dimension(self):
        config = parse_config(json.dumps({"command": "certify", "exclude": {"kind": "points", "points": [[0.5, 0.0]]}}))
        with pytest.raises(ConfigError) as info:
            build_set(config.exclude, 2)
        assert info.value.field_path == "exclude.points.0"

    def test_nested_union(self):
        document = {
            "command": "certify",
            "exclude": {
                "kind": "union",
                "members": [
                    {"kind": "hyperplane"},
                    {"kind": "union", "members": [{"kind": "sphere", "radius": 0.5}]},
                ],
            },
        }
        E = build_set(parse_config(json.dumps(document)).exclude, 1)
        assert E.describe()["kind"] == "union"
        assert E.contains([0.0, 0.9], 0.0)
        assert E.contains([0.3, 0.4], 1e-12)
        assert not E.contains([0.8, 0.0], 0.1)

    def test_union_member_field_path(self):
        document = {"command": "certify", "exclude": {"kind": "union", "members": [{"kind": "sphere", "radius": -1}]}}
        with pytest.raises(ConfigError) as info:
            parse_config(json.dumps(document))
        assert info.value.field_path == "exclude.members.0.radius"

    def test_empty_union_rejected(self):
        with pytest.raises(ConfigError):
            parse_config(json.dumps({"command": "certify", "exclude": {"kind": "union", "members": []}}))

    def test_certify_with_union(self, tmp_path):
        config = tmp_path / "run.json"
        exclude = {"kind": "union", "members": [{"kind": "hyperplane"}, {"kind": "points", "points": [[0.5, 0.5]]}]}
        config.write_text(json.dumps({"exclude": exclude}), encoding="utf-8")
        out = tmp_path / "out.json"
        code = main(["certify", "--config", str(config), "--target=-abs(x1)", "--n", "1", "--out-json", str(out)])
        assert code == 1
        result = _report(out)["result"]
        assert result["exclude"]["kind"] == "union"
        assert result["verdicts"]["psh_off_E"]["status"] == "Pass"


class TestEnvelopeAndAbp:
    def test_envelope_with_oracle(self, tmp_path, c0):
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"params": {"oracle": True}}), encoding="utf-8")
        out = tmp_path / "envelope.json"
        argv = ["envelope", "--config", str(config), "--target", "trivial", "--n", "1", "--delta", "0.2",
                "--out-json", str(out)]
        assert main(argv) == 0
        result = _report(out)["result"]
        assert result["gamma_at_z0"] == pytest.approx(-0.008, abs=1e-10)
        assert result["nonvoid_witness"] == pytest.approx(-0.008)
        assert result["contact_count"] > 0
        assert result["oracle_nodes"] > 0
        assert result["oracle_max_gap"] <= c0["trivial"] * (result["h"] + result["final_residual"])

    def test_abp_csv(self, tmp_path):
        csv_path = tmp_path / "abp.csv"
        argv = ["abp", "--target", "trivial", "--n", "1", "--delta", "0.2,0.1", "--out-csv", str(csv_path)]
        assert main(argv) == 0
        raw = csv_path.read_bytes()
        assert raw.count(b"\r\n") == 3
        header = raw.decode("utf-8").split("\r\n")[0]
        assert header == "n,delta,sup_abs,contact_integral,implied_C,lower_bound_ok,empty_contact,contact_count"
        assert raw.decode("utf-8").split("\r\n")[1].startswith("1,0.2,")


class TestExtend:
    def test_smooth_psh_writes_tables(self, tmp_path):
        csv_path = tmp_path / "run.csv"
        assert main(["extend", "--target", "smooth-psh", "--n", "1", "--out-csv", str(csv_path)]) == 0
        assert csv_path.read_text(encoding="utf-8").startswith("delta,r,T_index,u_gap,gamma_gap,phi_bound")
        assert (tmp_path / "run_abp.csv").exists()

    def test_json_is_reproducible(self, tmp_path):
        texts = []
        for name in ("a.json", "b.json"):
            out = tmp_path / name
            assert main(["extend", "--target", "smooth-psh", "--n", "1", "--seed", "7", "--out-json", str(out)]) == 0
            texts.append(re.sub(r'"timing_seconds": [0-9.eE+-]+', '"timing_seconds": 0', out.read_text("utf-8")))
        assert texts[0] == texts[1]
        result = _report(tmp_path / "a.json")["result"]
        assert result["verdict_exit_code"] == 0
        assert result["verdict_note"].startswith("all per-delta bounds")

    def test_negative_control(self):
        assert main(["extend", "--target", "negative-control", "--n", "1"]) == 2

    def test_unknown_scenario(self):
        assert main(["extend", "--target", "no-such-scenario", "--n", "1"]) == 3


class TestCatalogAndDemo:
    def test_demo(self):
        assert main(["demo-counterexample", "--n", "1"]) == 2

    def test_catalog(self, tmp_path):
        out = tmp_path / "catalog.json"
        assert main(["catalog", "--n", "1", "--out-json", str(out)]) == 0
        result = _report(out)["result"]
        assert result["mismatches"] == []
        assert all(row["matches"] for row in result["entries"])
        assert "sh-not-psh" not in [row["name"] for row in result["entries"]]


class TestReportHelpers:
    def test_abp_csv_path(self, tmp_path):
        assert abp_csv_path(tmp_path / "run.csv") == tmp_path / "run_abp.csv"
        assert abp_csv_path("run").name == "run_abp.csv"

    @pytest.mark.parametrize(
        "value, text",
        [(None, ""), (True, "true"), (False, "false"), (0.1, "0.1"), (3, "3")],
    )
    def test_cell(self, value, text):
        assert _cell(value) == text

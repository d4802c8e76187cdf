import csv
import json
import math
from pathlib import Path

import pytest

from slowtube.cli import (
    ConfigError,
    load_config,
    main,
    presets,
    spec_from_config,
)


def small_fhn_config(tmp_path, **over):
    cfg = json.loads(json.dumps(presets()["fhn"]))  # deep copy
    cfg["Y"] = [[-0.0002, 0.0028]]
    cfg["subdivisions"] = [30]
    cfg["samples"] = [0.0]
    cfg["branches"] = [cfg["branches"][0]]
    cfg.update(over)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path, cfg


class TestPresets:
    def test_three_presets(self):
        p = presets()
        assert set(p) == {"cylinder", "fhn", "predprey"}

    def test_fhn_parameter_echo(self):
        params = presets()["fhn"]["system"]["params"]
        assert params["a"] == 0.3
        assert params["gamma"] == 10.0
        assert params["delta"] == 9.0
        assert params["c"] == [0.799, 0.801]

    def test_predprey_parameters(self):
        cfg = presets()["predprey"]
        assert cfg["system"]["params"] == {"a": 1.65, "b": 0.25, "theta": -0.25}
        assert cfg["Y"] == [[0.2, 0.8], [-0.6, 0.2]]
        etas = {b["name"]: (b["eta_u"], b["eta_s"]) for b in cfg["branches"]}
        assert etas["u0"] == (1.3e-4, 1.3e-4)
        assert etas["u1"] == (1.5e-4, 1.5e-4)

    def test_cylinder_slow_field_trivial(self):
        cfg = presets()["cylinder"]
        assert cfg["system"]["g"] == ["1"]
        assert cfg["Y"][0][1] == pytest.approx(2 * math.pi)

    def test_all_presets_validate_as_configs(self):
        for cfg in presets().values():
            spec = spec_from_config(cfg)
            assert spec.build_system() is not None


class TestConfigValidation:
    def test_negative_eps0_rejected(self, tmp_path):
        path, _ = small_fhn_config(tmp_path)
        cfg = json.loads(path.read_text())
        cfg["system"]["eps0"] = -1.0
        path.write_text(json.dumps(cfg))
        assert main(["tube", "--config", str(path), "--out", str(tmp_path / "o")]) == 2

    def test_bad_expression_rejected(self, tmp_path):
        path, _ = small_fhn_config(tmp_path)
        cfg = json.loads(path.read_text())
        cfg["system"]["f"][0] = "v*("
        path.write_text(json.dumps(cfg))
        assert main(["tube", "--config", str(path), "--out", str(tmp_path / "o")]) == 2

    def test_missing_file(self, tmp_path):
        assert (
            main(["tube", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)])
            == 2
        )

    def test_dimension_mismatch(self, tmp_path):
        path, _ = small_fhn_config(tmp_path)
        cfg = json.loads(path.read_text())
        cfg["Y"] = [[0, 1], [0, 1]]
        path.write_text(json.dumps(cfg))
        assert main(["tube", "--config", str(path), "--out", str(tmp_path / "o")]) == 2

    def test_undeclared_symbol(self, tmp_path):
        path, _ = small_fhn_config(tmp_path)
        cfg = json.loads(path.read_text())
        cfg["system"]["f"][0] = "v + qq"
        path.write_text(json.dumps(cfg))
        assert main(["tube", "--config", str(path), "--out", str(tmp_path / "o")]) == 2

    def test_preset_and_config_conflict(self, tmp_path):
        path, _ = small_fhn_config(tmp_path)
        assert (
            main(
                ["tube", "--config", str(path), "--preset", "fhn", "--out", str(tmp_path)]
            )
            == 2
        )


class TestRunAndReports:
    def test_tube_run_writes_reports(self, tmp_path):
        path, _ = small_fhn_config(tmp_path)
        out = tmp_path / "out"
        rc = main(["tube", "--config", str(path), "--out", str(out), "--jobs", "2"])
        assert rc == 0
        report = json.loads((out / "report.json").read_text())
        assert report["schema"] == "slowtube-report/1"
        assert report["summary"]["ok"] is True
        branch = report["branches"][0]
        assert branch["cells_certified"] == branch["cells_total"] == 30
        assert branch["glue"]["connected"] and branch["glue"]["consistent"]
        cell = branch["cells"][0]
        lam = cell["eigenpairs"][0]["lambda_re"]
        assert float(lam[0]) < float(lam[1])
        # 17-significant-digit decimal strings round-trip
        assert float(lam[0]) == float(f"{float(lam[0]):.17g}")
        assert (out / "cells.csv").exists()
        assert (out / "eigenpairs.csv").exists()

    def test_smoothness_subcommand_emits_csv(self, tmp_path):
        path, _ = small_fhn_config(tmp_path)
        out = tmp_path / "out"
        rc = main(["smoothness", "--config", str(path), "--out", str(out)])
        assert rc == 0
        rows = list(csv.DictReader(open(out / "smoothness.csv")))
        assert len(rows) == 30
        assert all(int(r["k"]) >= 1 for r in rows)

    def test_failure_exit_code(self, tmp_path):
        path, cfg = small_fhn_config(tmp_path)
        cfg = json.loads(path.read_text())
        cfg["branches"][0]["eta_u"] = 1e-9
        cfg["branches"][0]["eta_s"] = 1e-9
        cfg["refine_depth"] = 0
        cfg["samples"] = []
        path.write_text(json.dumps(cfg))
        out = tmp_path / "out"
        rc = main(["tube", "--config", str(path), "--out", str(out)])
        assert rc == 1
        report = json.loads((out / "report.json").read_text())
        assert report["summary"]["ok"] is False
        assert report["branches"][0]["failures"]

    def test_deterministic_reports_modulo_meta(self, tmp_path):
        path, _ = small_fhn_config(tmp_path)
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        assert main(["tube", "--config", str(path), "--out", str(out1), "--jobs", "1"]) == 0
        assert main(["tube", "--config", str(path), "--out", str(out2), "--jobs", "3"]) == 0
        r1 = json.loads((out1 / "report.json").read_text())
        r2 = json.loads((out2 / "report.json").read_text())
        r1.pop("meta")
        r2.pop("meta")
        # jobs is echoed inside config too; normalize it
        r1["config"].pop("jobs", None)
        r2["config"].pop("jobs", None)
        assert json.dumps(r1, sort_keys=True) == json.dumps(r2, sort_keys=True)
        # everything except meta/jobs is byte-stable
        assert (out1 / "cells.csv").read_text() == (out2 / "cells.csv").read_text()
        assert (out1 / "eigenpairs.csv").read_text() == (out2 / "eigenpairs.csv").read_text()

    def test_preset_list_command(self, capsys):
        assert main(["preset-list"]) == 0
        seen = capsys.readouterr().out
        assert "cylinder" in seen and "fhn" in seen and "predprey" in seen

    def test_bundle_mode_has_no_targets(self, tmp_path):
        path, _ = small_fhn_config(tmp_path)
        out = tmp_path / "out"
        assert main(["bundle", "--config", str(path), "--out", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        cell = report["branches"][0]["cells"][0]
        assert "target_box" not in cell
        assert "seed_box" in cell

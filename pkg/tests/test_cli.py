import json
import os

import numpy as np
import pytest

from riskgen.cli import main


def _read_csv(path):
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:]]
    return header, rows


class TestRiskCommand:
    def test_profile_csv(self, fixture_path, tmp_path):
        out = tmp_path / "profile.csv"
        rc = main(["risk", fixture_path, "--out", str(out)])
        assert rc == 0
        header, rows = _read_csv(out)
        assert header == ["frame", "risk", "top_agent_id", "top_agent_risk"]
        assert len(rows) == 16
        assert all(float(r[1]) >= 0.0 for r in rows)

    def test_max_agg_bounded_by_sum(self, fixture_path, tmp_path):
        out_sum = tmp_path / "sum.csv"
        out_max = tmp_path / "max.csv"
        assert main(["risk", fixture_path, "--agg", "sum", "--out", str(out_sum)]) == 0
        assert main(["risk", fixture_path, "--agg", "max", "--out", str(out_max)]) == 0
        _, rows_sum = _read_csv(out_sum)
        _, rows_max = _read_csv(out_max)
        for rs, rm in zip(rows_sum, rows_max):
            assert float(rm[1]) <= float(rs[1]) + 1e-12

    def test_breakdown_json(self, fixture_path, tmp_path):
        out = tmp_path / "p.csv"
        bd = tmp_path / "b.json"
        rc = main(["risk", fixture_path, "--out", str(out), "--breakdown", str(bd)])
        assert rc == 0
        doc = json.loads(bd.read_text())
        assert len(doc["frames"]) == 16

    def test_missing_file_is_io_error(self, tmp_path):
        rc = main(["risk", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")])
        assert rc == 4

    def test_malformed_scenario_is_input_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"meta": {"id": "x"}}')
        rc = main(["risk", str(bad), "--out", str(tmp_path / "o.csv")])
        assert rc == 2


class TestQuantilesCommand:
    def test_pool_95(self, tmp_path, capsys):
        pool = tmp_path / "pool.json"
        pool.write_text(json.dumps(list(range(1, 101))))
        rc = main(["quantiles", str(pool), "--quantiles", "0.95"])
        assert rc == 0
        assert capsys.readouterr().out.strip() == "0.95,95.05"

    def test_empty_pool_is_input_error(self, tmp_path):
        pool = tmp_path / "pool.json"
        pool.write_text("[]")
        assert main(["quantiles", str(pool)]) == 2


class TestMineCommand:
    def test_report(self, fixture_path, tmp_path, capsys):
        d = tmp_path / "scenarios"
        d.mkdir()
        (d / "a.json").write_bytes(open(fixture_path, "rb").read())
        out = tmp_path / "report.json"
        rc = main(["mine", str(d), "--threshold", "0.5", "--out", str(out)])
        assert rc == 0
        doc = json.loads(out.read_text())
        assert "pool" in doc and "scenarios" in doc
        assert set(doc["pool"]["quantiles"]) == {"0.2", "0.8", "0.95"}

    def test_empty_dir_is_input_error(self, tmp_path):
        d = tmp_path / "empty"
        d.mkdir()
        assert main(["mine", str(d), "--out", str(tmp_path / "r.json")]) == 2


_SYNTH_ARGS = ["--iterations", "8", "--population", "12", "--modes", "2"]


class TestSynthCommand:
    def test_synth_and_determinism(self, fixture_path, tmp_path):
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        rc = main(["synth", fixture_path, "--target-risk", "1.0", "--seed", "9",
                   "--out", str(a)] + _SYNTH_ARGS)
        assert rc == 0
        rc = main(["synth", fixture_path, "--target-risk", "1.0", "--seed", "9",
                   "--out", str(b)] + _SYNTH_ARGS)
        assert rc == 0
        assert a.read_bytes() == b.read_bytes()

    def test_env_seed_fallback(self, fixture_path, tmp_path, monkeypatch):
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        monkeypatch.setenv("RFG_SEED", "77")
        assert main(["synth", fixture_path, "--target-risk", "1.0",
                     "--out", str(a)] + _SYNTH_ARGS) == 0
        assert main(["synth", fixture_path, "--target-risk", "1.0",
                     "--out", str(b)] + _SYNTH_ARGS) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_invalid_tau_is_input_error(self, fixture_path, tmp_path):
        rc = main(["synth", fixture_path, "--target-risk", "1.0", "--tau", "0.5",
                   "--out", str(tmp_path / "m.json")] + _SYNTH_ARGS)
        assert rc == 2


@pytest.fixture(scope="module")
def motions_file(fixture_path, tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    out = d / "motions.json"
    rc = main(["synth", fixture_path, "--target-risk", "1.0", "--seed", "3",
               "--out", str(out)] + _SYNTH_ARGS)
    assert rc == 0
    return str(out)


class TestMaskCommand:
    def test_masks_manifest_and_verify(self, fixture_path, motions_file, tmp_path):
        out_dir = tmp_path / "masks"
        rc = main(["mask", fixture_path, motions_file, "--out-dir", str(out_dir),
                   "--latent-width", "20", "--latent-height", "12"])
        assert rc == 0
        manifest = json.loads((out_dir / "manifest.json").read_text())
        assert len(manifest["files"]) == 3 * 16  # cameras x frames
        for name in manifest["files"]:
            assert (out_dir / name).read_bytes().startswith(b"P5\n20 12\n255\n")
        rc = main(["mask", fixture_path, motions_file, "--out-dir", str(out_dir),
                   "--latent-width", "20", "--latent-height", "12", "--verify"])
        assert rc == 0

    def test_verify_detects_parameter_drift(self, fixture_path, motions_file,
                                            tmp_path):
        out_dir = tmp_path / "masks"
        assert main(["mask", fixture_path, motions_file, "--out-dir", str(out_dir),
                     "--latent-width", "20", "--latent-height", "12"]) == 0
        rc = main(["mask", fixture_path, motions_file, "--out-dir", str(out_dir),
                   "--latent-width", "20", "--latent-height", "12",
                   "--sigma-w", "3.0", "--verify"])
        assert rc == 2

    def test_mode_out_of_range(self, fixture_path, motions_file, tmp_path):
        rc = main(["mask", fixture_path, motions_file, "--mode", "99",
                   "--out-dir", str(tmp_path / "m")])
        assert rc == 2


class TestSelfcheck:
    def test_passes(self, capsys):
        assert main(["selfcheck"]) == 0
        out = capsys.readouterr().out
        assert out.count("[ok]") == 7
        assert "selfcheck passed" in out

    def test_fault_injection_detected(self, monkeypatch, capsys):
        monkeypatch.setenv("RISKGEN_FAULT", "grad")
        assert main(["selfcheck"]) == 1
        out = capsys.readouterr().out
        assert "[FAIL] alignment_gradients" in out

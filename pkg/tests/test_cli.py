import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from softgate import idx
from softgate.cli import run


def read_csv(out):
    return list(csv.DictReader(io.StringIO(out)))


def invoke(capsys, *argv):
    code = run(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture()
def workspace(tmp_path, capsys):
    train = tmp_path / "train.smx"
    bundle = tmp_path / "bundle.sgb1"
    code, _, _ = invoke(
        capsys, "synth", "--out", str(train),
        "--per-class-n", "150", "--error-rate", "0.05", "--seed", "7",
    )
    assert code == 0
    code, _, _ = invoke(capsys, "calibrate", "--in", str(train), "--out", str(bundle))
    assert code == 0
    return train, bundle


class TestValidateCommand:
    def test_clean_matrix_exits_zero(self, workspace, capsys):
        train, _ = workspace
        code, out, err = invoke(capsys, "validate", "--in", str(train))
        assert code == 0
        assert "ok" in err

    def test_broken_matrix_exits_one(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("p0,p1,true,pred\n0.5,0.4,0,0\n")
        code, out, err = invoke(capsys, "validate", "--in", str(bad))
        assert code == 1
        assert "0.9" in out


class TestCalibrateThenGate:
    def test_no_accepted_incorrect_rows(self, workspace, capsys):
        train, bundle = workspace
        code, out, _ = invoke(capsys, "gate", "--bundle", str(bundle), "--in", str(train))
        assert code == 0
        rows = read_csv(out)
        assert len(rows) == 1500
        from softgate.matrix import read_matrix_smx

        m = read_matrix_smx(train)
        wrong = m.true_labels != m.pred_labels
        for r in rows:
            if r["verdict"] == "accept":
                assert not wrong[int(r["row"])]

    def test_single_vector_gate(self, workspace, capsys):
        _, bundle = workspace
        probs = ",".join(["0.91"] + ["0.01"] * 9)
        code, out, _ = invoke(capsys, "gate", "--bundle", str(bundle), "--probs", probs)
        assert code == 0
        row = read_csv(out)[0]
        assert row["pred"] == "0"

    def test_gate_requires_input(self, workspace, capsys):
        _, bundle = workspace
        code, _, err = invoke(capsys, "gate", "--bundle", str(bundle))
        assert code == 1
        assert "error" in err


class TestAnalysisCommands:
    def test_overlap_totals(self, workspace, capsys):
        train, bundle = workspace
        code, out, _ = invoke(capsys, "overlap", "--in", str(train), "--bundle", str(bundle))
        assert code == 0
        rows = read_csv(out)
        assert rows[-1]["class"] == "total"

    def test_sweep_coverage_non_increasing(self, workspace, capsys):
        train, bundle = workspace
        code, out, _ = invoke(capsys, "sweep", "--in", str(train), "--bundle", str(bundle))
        assert code == 0
        rows = [r for r in read_csv(out) if r["metric"] == "coverage"]
        by_class = {}
        for r in rows:
            by_class.setdefault(r["class"], []).append((float(r["factor"]), float(r["value"])))
        for series in by_class.values():
            series.sort()
            values = [v for _, v in series]
            assert all(b <= a + 1e-15 for a, b in zip(values, values[1:]))

    def test_stats_and_confusion(self, workspace, capsys):
        train, bundle = workspace
        code, out, _ = invoke(capsys, "stats", "--in", str(train), "--bundle", str(bundle))
        assert code == 0
        assert read_csv(out)[0]["side"] == "correct"
        code, out, _ = invoke(capsys, "confusion", "--in", str(train))
        assert code == 0
        assert len(read_csv(out)) == 10

    def test_likelihood_and_fit(self, workspace, capsys):
        train, bundle = workspace
        code, out, _ = invoke(
            capsys, "likelihood", "--in", str(train), "--bundle", str(bundle), "--kind", "L"
        )
        assert code == 0
        rows = read_csv(out)
        assert len(rows) == 90
        code, out, _ = invoke(capsys, "fit", "--in", str(train), "--bundle", str(bundle))
        assert code == 0
        assert "slope" in out.splitlines()[0]

    def test_trend_command(self, workspace, capsys):
        train, bundle = workspace
        code, out, err = invoke(
            capsys, "trend", "--bundle", str(bundle),
            "--level", f"0={train}", "--level", f"1={train}",
        )
        assert code == 0
        assert "trend signs" in err

    def test_json_envelope(self, workspace, capsys):
        train, bundle = workspace
        code, out, _ = invoke(
            capsys, "overlap", "--in", str(train), "--bundle", str(bundle), "--json"
        )
        doc = json.loads(out)
        assert doc["columns"][0] == "class"


class TestIdxCommands:
    def test_inspect_good_file(self, tmp_path, capsys):
        p = tmp_path / "imgs"
        idx.write_idx_images(
            idx.IdxImages(np.zeros((10, 28, 28), dtype=np.uint8)), p
        )
        code, out, _ = invoke(capsys, "idx", "inspect", str(p))
        assert code == 0
        assert "2051" in out and "47040016" not in out

    def test_inspect_garbage_exits_one(self, tmp_path, capsys):
        p = tmp_path / "junk"
        p.write_bytes(b"garbage bytes here")
        code, out, _ = invoke(capsys, "idx", "inspect", str(p))
        assert code == 1
        assert "bad magic" in out

    def test_inspect_canonical_training_file(self, tmp_path, capsys):
        p = tmp_path / "train-images-idx3-ubyte"
        idx.write_idx_images(
            idx.IdxImages(np.zeros((60000, 28, 28), dtype=np.uint8)), p
        )
        code, out, _ = invoke(capsys, "idx", "inspect", str(p))
        assert code == 0
        for token in ("2051", "60000", "28", "47040016"):
            assert token in out


class TestPerturbCommand:
    def test_paired_generation(self, tmp_path, capsys):
        rng = np.random.default_rng(1)
        imgs = tmp_path / "imgs"
        labels = tmp_path / "labels"
        idx.write_idx_images(
            idx.IdxImages(rng.integers(0, 256, (5, 28, 28)).astype(np.uint8)), imgs
        )
        idx.write_idx_labels(idx.IdxLabels(np.arange(5, dtype=np.uint8)), labels)
        out_dir = tmp_path / "out"
        code, out, err = invoke(
            capsys, "perturb", "--images", str(imgs), "--labels", str(labels),
            "--mode", "paired", "--seed", "3", "--out-dir", str(out_dir),
        )
        assert code == 0
        assert "10 output images" in err
        assert (out_dir / "perturbed-train-images-idx3-ubyte").exists()

    def test_out_dir_env_fallback(self, tmp_path, capsys, monkeypatch):
        rng = np.random.default_rng(1)
        imgs = tmp_path / "imgs"
        labels = tmp_path / "labels"
        idx.write_idx_images(
            idx.IdxImages(rng.integers(0, 256, (2, 8, 8)).astype(np.uint8)), imgs
        )
        idx.write_idx_labels(idx.IdxLabels(np.zeros(2, dtype=np.uint8)), labels)
        env_dir = tmp_path / "envout"
        monkeypatch.setenv("SOFTGATE_OUT_DIR", str(env_dir))
        code, *_ = invoke(
            capsys, "perturb", "--images", str(imgs), "--labels", str(labels),
            "--mode", "paired", "--types", "0", "--levels", "1",
        )
        assert code == 0
        assert (env_dir / "perturbed-train-images-idx3-ubyte").exists()


class TestReportCommand:
    def test_report_writes_everything(self, workspace, tmp_path, capsys):
        train, bundle = workspace
        out_dir = tmp_path / "rep"
        code, out, err = invoke(
            capsys, "report", "--in", str(train), "--bundle", str(bundle),
            "--out-dir", str(out_dir),
        )
        assert code == 0
        assert (out_dir / "report.md").exists()
        assert (out_dir / "overlap.csv").exists()
        assert (out_dir / "confusion_matrix.png").exists()

    def test_no_figures_flag(self, workspace, tmp_path, capsys):
        train, bundle = workspace
        out_dir = tmp_path / "rep2"
        code, *_ = invoke(
            capsys, "report", "--in", str(train), "--bundle", str(bundle),
            "--out-dir", str(out_dir), "--no-figures",
        )
        assert code == 0
        assert not (out_dir / "confusion_matrix.png").exists()


class TestDeterminism:
    def test_synth_idempotent(self, tmp_path, capsys):
        a, b = tmp_path / "a.smx", tmp_path / "b.smx"
        for p in (a, b):
            code, *_ = invoke(
                capsys, "synth", "--out", str(p), "--per-class-n", "20", "--seed", "5"
            )
            assert code == 0
        assert a.read_bytes() == b.read_bytes()

    def test_calibrate_idempotent(self, workspace, tmp_path, capsys):
        train, _ = workspace
        b1, b2 = tmp_path / "x.sgb1", tmp_path / "y.sgb1"
        for p in (b1, b2):
            code, *_ = invoke(capsys, "calibrate", "--in", str(train), "--out", str(p))
            assert code == 0
        assert b1.read_bytes() == b2.read_bytes()


class TestUsageErrors:
    def test_unknown_flag_exits_two(self):
        proc = subprocess.run(
            [sys.executable, "-m", "softgate.cli", "validate", "--nonsense"],
            capture_output=True,
        )
        assert proc.returncode == 2

    def test_unknown_command_exits_two(self):
        proc = subprocess.run(
            [sys.executable, "-m", "softgate.cli", "frobnicate"],
            capture_output=True,
        )
        assert proc.returncode == 2

    def test_help_lists_subcommands(self):
        proc = subprocess.run(
            [sys.executable, "-m", "softgate.cli", "--help"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        for name in ("validate", "calibrate", "gate", "sweep", "perturb", "report"):
            assert name in proc.stdout

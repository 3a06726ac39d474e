"""End-to-end tests for the command-line pipeline."""

import csv
import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from topovox.betti_features import BettiFeatureVector, threshold_grid, write_features_csv
from topovox.cli import main
from topovox.volume_io import read_manifest


def _sha(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@pytest.fixture(scope="session")
def pipeline(tmp_path_factory):
    """One synth + extract run shared by the read-only CLI tests."""
    root = tmp_path_factory.mktemp("cli_pipeline")
    vols = root / "vols"
    assert main(["synth", "two-class-mix", "--count", "16", "--size", "16",
                 "--out", str(vols), "--seed", "0"]) == 0
    features = root / "features.csv"
    assert main(["extract", "--manifest", str(vols / "manifest.csv"),
                 "--raw-dims", "16,16,16", "--out", str(features)]) == 0
    return root


class TestSynth:
    def test_balanced_mix_manifest(self, pipeline):
        manifest = read_manifest(pipeline / "vols" / "manifest.csv")
        counts = manifest.class_counts()
        assert counts == {"LGG": 8, "HGG": 8}
        assert all(e.path.exists() for e in manifest.entries)

    def test_same_seed_same_bytes(self, tmp_path):
        assert main(["synth", "blob", "--count", "3", "--size", "8", "--out", str(tmp_path / "a")]) == 0
        assert main(["synth", "blob", "--count", "3", "--size", "8", "--out", str(tmp_path / "b")]) == 0
        for name in ("blob_0000.raw", "blob_0001.raw", "blob_0002.raw", "manifest.csv"):
            assert _sha(tmp_path / "a" / name) == _sha(tmp_path / "b" / name)

    def test_unknown_kind_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["synth", "doughnut", "--out", "x"])
        assert exc.value.code == 1


class TestExtract:
    def test_shape_contract(self, pipeline):
        with open(pipeline / "features.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 17
        assert rows[0][0] == "label" and len(rows[0]) == 301
        assert {r[0] for r in rows[1:]} == {"LGG", "HGG"}

    def test_rerun_is_byte_identical_and_cached(self, pipeline, capsys):
        features = pipeline / "features.csv"
        before = _sha(features), _sha(str(features) + ".meta.json")
        assert main(["extract", "--manifest", str(pipeline / "vols" / "manifest.csv"),
                     "--raw-dims", "16,16,16", "--out", str(features)]) == 0
        assert (_sha(features), _sha(str(features) + ".meta.json")) == before
        assert capsys.readouterr().err.count("cached") == 16

    def test_worker_count_never_changes_bytes(self, pipeline, tmp_path):
        manifest = str(pipeline / "vols" / "manifest.csv")
        out = tmp_path / "w2.csv"
        assert main(["extract", "--manifest", manifest, "--raw-dims", "16,16,16",
                     "--out", str(out), "--workers", "2", "--force"]) == 0
        assert _sha(out) == _sha(pipeline / "features.csv")

    def test_workers_env_override(self, pipeline, tmp_path, monkeypatch):
        monkeypatch.setenv("TOPOVOX_WORKERS", "2")
        out = tmp_path / "env.csv"
        assert main(["extract", "--manifest", str(pipeline / "vols" / "manifest.csv"),
                     "--raw-dims", "16,16,16", "--out", str(out), "--force"]) == 0
        assert _sha(out) == _sha(pipeline / "features.csv")
        monkeypatch.setenv("TOPOVOX_WORKERS", "zero")
        assert main(["extract", "--manifest", str(pipeline / "vols" / "manifest.csv"),
                     "--raw-dims", "16,16,16", "--out", str(out)]) == 1

    def test_corrupted_file_exits_2_with_other_rows_intact(self, tmp_path):
        vols = tmp_path / "vols"
        assert main(["synth", "two-class-mix", "--count", "6", "--size", "16",
                     "--out", str(vols), "--seed", "3"]) == 0
        (vols / "two-class-mix_0002.raw").write_bytes(b"\x00" * 100)
        out = tmp_path / "features.csv"
        assert main(["extract", "--manifest", str(vols / "manifest.csv"),
                     "--raw-dims", "16,16,16", "--out", str(out)]) == 2
        with open(out, newline="") as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 6  # header + 5 surviving volumes

    def test_invert_changes_features(self, pipeline, tmp_path):
        out = tmp_path / "inv.csv"
        assert main(["extract", "--manifest", str(pipeline / "vols" / "manifest.csv"),
                     "--raw-dims", "16,16,16", "--out", str(out), "--invert"]) == 0
        assert _sha(out) != _sha(pipeline / "features.csv")

    def test_missing_manifest_is_config_error(self, tmp_path):
        assert main(["extract", "--manifest", str(tmp_path / "nope.csv"),
                     "--out", str(tmp_path / "x.csv")]) == 1

    def test_half_open_slab_window_is_config_error(self, pipeline, tmp_path):
        assert main(["extract", "--manifest", str(pipeline / "vols" / "manifest.csv"),
                     "--raw-dims", "16,16,16", "--out", str(tmp_path / "x.csv"),
                     "--slab-lo", "2"]) == 1


class TestTrainEval:
    def test_summary_layout(self, pipeline, tmp_path):
        out_dir = tmp_path / "run"
        assert main(["train-eval", "--features", str(pipeline / "features.csv"),
                     "--out-dir", str(out_dir)]) == 0
        lines = (out_dir / "summary.txt").read_text().splitlines()
        names = ["B0", "B1", "B2", "B1+B2", "B0+B1+B2"]
        raw_at = lines.index("--- Without Feature Selection ---")
        sel_at = lines.index("--- With Feature Selection ---")
        raw_rows = lines[raw_at + 1 : sel_at]
        sel_rows = lines[sel_at + 1 :]
        assert [r.split()[0] for r in raw_rows] == names
        assert [r.split()[0] for r in sel_rows] == names
        assert [int(r.split()[1]) for r in raw_rows] == [100, 100, 100, 200, 300]
        with open(out_dir / "summary.csv", newline="") as fh:
            records = list(csv.DictReader(fh))
        assert len(records) == 10

    def test_selection_never_grows_the_feature_count(self, pipeline, tmp_path):
        out_dir = tmp_path / "run"
        assert main(["train-eval", "--features", str(pipeline / "features.csv"),
                     "--out-dir", str(out_dir)]) == 0
        with open(out_dir / "summary.csv", newline="") as fh:
            records = list(csv.DictReader(fh))
        raw = {r["feature_set"]: int(r["n_features"]) for r in records if r["selection"] == "raw"}
        sel = {r["feature_set"]: int(r["n_features"]) for r in records if r["selection"] == "selected"}
        assert all(sel[name] <= raw[name] for name in raw)

    def test_tau_zero_rows_coincide(self, pipeline, tmp_path):
        out_dir = tmp_path / "run"
        assert main(["train-eval", "--features", str(pipeline / "features.csv"),
                     "--out-dir", str(out_dir), "--tau", "0"]) == 0
        with open(out_dir / "summary.csv", newline="") as fh:
            records = list(csv.DictReader(fh))
        raw = {r["feature_set"]: r for r in records if r["selection"] == "raw"}
        sel = {r["feature_set"]: r for r in records if r["selection"] == "selected"}
        for name in raw:
            assert raw[name]["n_features"] == sel[name]["n_features"]
            for key in ("accuracy", "precision", "recall", "f1", "auc"):
                assert raw[name][key] == sel[name][key]

    def test_per_configuration_artifacts(self, pipeline, tmp_path):
        out_dir = tmp_path / "run"
        assert main(["train-eval", "--features", str(pipeline / "features.csv"),
                     "--out-dir", str(out_dir)]) == 0
        slugs = ["b0", "b1", "b2", "b1b2", "b0b1b2"]
        for slug in slugs:
            for variant in ("raw", "sel"):
                assert (out_dir / f"report_{slug}_{variant}.txt").exists()
                assert (out_dir / f"confusion_{slug}_{variant}.csv").exists()
                assert (out_dir / f"model_{slug}_{variant}.cbt").exists()
            assert (out_dir / f"sweep_{slug}.csv").exists()

    def test_rerun_is_deterministic(self, pipeline, tmp_path):
        args = ["train-eval", "--features", str(pipeline / "features.csv")]
        assert main(args + ["--out-dir", str(tmp_path / "a")]) == 0
        assert main(args + ["--out-dir", str(tmp_path / "b")]) == 0
        assert _sha(tmp_path / "a" / "summary.csv") == _sha(tmp_path / "b" / "summary.csv")
        assert _sha(tmp_path / "a" / "model_b0b1b2_sel.cbt") == _sha(tmp_path / "b" / "model_b0b1b2_sel.cbt")

    def test_boosted_model_via_config(self, pipeline, tmp_path):
        from topovox.learn import BoostedParams, write_config

        cfg = tmp_path / "boost.cfg"
        write_config(BoostedParams(n_estimators=40), cfg)
        out_dir = tmp_path / "run"
        assert main(["train-eval", "--features", str(pipeline / "features.csv"),
                     "--out-dir", str(out_dir), "--config", str(cfg),
                     "--taus", "0.0,0.005"]) == 0
        assert (out_dir / "summary.txt").exists()

    def test_model_flag_conflicting_with_config(self, pipeline, tmp_path):
        from topovox.learn import BoostedParams, write_config

        cfg = tmp_path / "boost.cfg"
        write_config(BoostedParams(), cfg)
        assert main(["train-eval", "--features", str(pipeline / "features.csv"),
                     "--out-dir", str(tmp_path / "run"), "--config", str(cfg),
                     "--model", "forest"]) == 1

    def test_overgrown_tau_is_config_error(self, pipeline, tmp_path):
        assert main(["train-eval", "--features", str(pipeline / "features.csv"),
                     "--out-dir", str(tmp_path / "run"), "--tau", "99"]) == 1

    def test_fold_loop_mode(self, pipeline, tmp_path):
        out_dir = tmp_path / "run"
        assert main(["train-eval", "--features", str(pipeline / "features.csv"),
                     "--out-dir", str(out_dir), "--folds", "3", "--tau", "0.002"]) == 0
        for fold in range(3):
            assert (out_dir / f"report_b0b1b2_raw_fold{fold}.txt").exists()
            assert (out_dir / f"report_b0b1b2_sel_fold{fold}.txt").exists()
        lines = (out_dir / "summary.txt").read_text().splitlines()
        assert "folds: 3" in lines[0]
        assert lines.count("--- Without Feature Selection ---") == 1
        with open(out_dir / "summary.csv", newline="") as fh:
            assert len(list(csv.DictReader(fh))) == 10  # fold means, same layout


class TestCurves:
    def test_row_count_and_grid(self, pipeline, tmp_path):
        out = tmp_path / "curves.csv"
        assert main(["curves", "--features", str(pipeline / "features.csv"), "--out", str(out)]) == 0
        with open(out, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 600  # 2 classes x 3 dims x 100 thresholds
        grid = threshold_grid()
        b1_lgg = [r for r in rows if r["dim"] == "1" and r["class"] == "LGG"]
        assert [float(r["t_value"]) for r in b1_lgg] == [float(t) for t in grid]

    def test_single_sample_band_collapses(self, tmp_path):
        rng = np.random.default_rng(5)
        vectors = [BettiFeatureVector(rng.integers(0, 9, size=300).astype(float)) for _ in range(2)]
        features = tmp_path / "features.csv"
        write_features_csv(["LGG", "HGG"], vectors, features)
        out = tmp_path / "curves.csv"
        assert main(["curves", "--features", str(features), "--out", str(out)]) == 0
        with open(out, newline="") as fh:
            for row in csv.DictReader(fh):
                assert row["lower"] == row["median"] == row["upper"]

    def test_bad_band_is_config_error(self, pipeline, tmp_path):
        assert main(["curves", "--features", str(pipeline / "features.csv"),
                     "--out", str(tmp_path / "c.csv"), "--band", "1.0"]) == 1


class TestPca:
    def test_three_block_files(self, pipeline, tmp_path):
        out_dir = tmp_path / "pca"
        assert main(["pca", "--features", str(pipeline / "features.csv"),
                     "--out-dir", str(out_dir)]) == 0
        for block in ("b0", "b1", "b2"):
            path = out_dir / f"pca_{block}.csv"
            lines = path.read_text().splitlines()
            head = lines[0].split(",")
            assert head[0] == "# explained_variance_ratio"
            r1, r2 = float(head[1]), float(head[2])
            assert r1 >= r2 >= 0.0
            assert lines[1] == "sample,label,pc1,pc2"
            assert len(lines) == 18  # comment + header + 16 samples

    def test_block_filter_and_determinism(self, pipeline, tmp_path):
        base = ["pca", "--features", str(pipeline / "features.csv")]
        assert main(base + ["--out-dir", str(tmp_path / "a"), "--blocks", "b1"]) == 0
        assert (tmp_path / "a" / "pca_b1.csv").exists()
        assert not (tmp_path / "a" / "pca_b0.csv").exists()
        assert main(base + ["--out-dir", str(tmp_path / "b"), "--blocks", "b1"]) == 0
        assert _sha(tmp_path / "a" / "pca_b1.csv") == _sha(tmp_path / "b" / "pca_b1.csv")


class TestOracleCheck:
    def test_small_suite_passes(self, capsys):
        assert main(["oracle-check", "--count", "6", "--max-side", "4", "--seed", "2"]) == 0
        out = capsys.readouterr().out
        assert "0 mismatches" in out
        assert out.count("ok") == 9  # 6 random + 3 phantoms


class TestMeta:
    def test_unknown_subcommand_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["transmogrify"])
        assert exc.value.code == 1

    def test_help_exits_zero(self):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0

    def test_meta_sidecar_records_fingerprint(self, pipeline):
        meta = json.loads((pipeline / "features.csv.meta.json").read_text())
        assert meta["fingerprint"]["invert"] is False
        assert meta["fingerprint"]["raw_dims"] == [16, 16, 16]
        assert len(meta["rows"]) == 16
        assert all(len(values) == 300 for values in meta["rows"].values())

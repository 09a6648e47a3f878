import json

import numpy as np
import pytest

from conftest import build_dataset, build_synthetic_manifest
from synthfall.cli import main
from synthfall.errors import ConfigError, DataError
from synthfall.harness import (
    AlignmentOptions,
    ExperimentConfig,
    ExperimentReport,
    derive_seed,
    emit_report,
    run_ablation_quantity,
    run_alignment,
    run_experiment,
    run_training,
)
from synthfall.windowing import MixSpec

FAST_TRAIN = {"max_epochs": 6, "patience": 6, "batch_size": 64}


def fast_config(real, synthetic=(), seed=11, **overrides):
    base = dict(
        real_manifest=str(real),
        synthetic_manifests=tuple(str(s) for s in synthetic),
        window=64,
        stride=16,
        iterations=2,
        hidden_size=8,
        dense_units=8,
        seed=seed,
        train=FAST_TRAIN,
        mix=(0.6, 0.2, 0.2) if synthetic else (0.7, 0.3, 0.0),
    )
    base.update(overrides)
    return ExperimentConfig.from_dict(base)


class TestAlignment:
    def test_self_comparison(self, tmp_path):
        real = build_dataset(tmp_path, subjects=6, series_len=200, seed=0)
        options = AlignmentOptions(window=64, stride=16, bins=40, k=3)
        report = run_alignment(real, real, options)
        assert report.jsd <= 1e-9
        assert report.coverage == 1.0
        assert report.ks_x.statistic == 0.0
        assert report.ks_y.statistic == 0.0
        assert report.ks_z.statistic == 0.0
        assert report.ks_x.p_value == 1.0

    def test_large_shift_zero_coverage(self, tmp_path):
        real = build_dataset(tmp_path, subjects=6, series_len=200, seed=0)
        shifted = build_synthetic_manifest(
            tmp_path, source="far", series=6, series_len=200, seed=1, value_shift=50.0,
        )
        report = run_alignment(real, shifted, AlignmentOptions(window=64, stride=16, bins=40, k=3))
        assert report.coverage == 0.0
        assert report.ks_x.statistic == 1.0
        assert report.ks_y.statistic == 1.0
        assert report.ks_z.statistic == 1.0

    def test_jsd_recomputable_from_exported_curves(self, tmp_path):
        real = build_dataset(tmp_path, subjects=6, series_len=200, seed=0)
        offset = build_synthetic_manifest(
            tmp_path, source="near", series=6, series_len=200, seed=2, value_shift=0.8,
        )
        report = run_alignment(real, offset, AlignmentOptions(window=64, stride=16, bins=40, k=3))
        paths = emit_report(report, "json", tmp_path / "out")
        curves = {}
        for path in paths:
            if path.name.startswith("density_"):
                kind = path.name.split("_")[1]
                rows = [line.split(";") for line in path.read_text().splitlines()[1:] if line]
                centers = np.array([float(c) for c, _ in rows])
                dens = np.array([float(d) for _, d in rows])
                curves[kind] = (centers, dens)
        width = curves["real"][0][1] - curves["real"][0][0]
        pm = curves["real"][1] * width
        qm = curves["synthetic"][1] * width
        mm = 0.5 * (pm + qm)
        recomputed = 0.0
        for masses in (pm, qm):
            mask = masses > 0
            recomputed += 0.5 * float(np.sum(masses[mask] * np.log2(masses[mask] / mm[mask])))
        assert recomputed == pytest.approx(report.jsd, abs=1e-9)

    def test_per_axis_mode(self, tmp_path):
        real = build_dataset(tmp_path, subjects=6, series_len=200, seed=0)
        report = run_alignment(real, real, AlignmentOptions(window=64, stride=16, bins=20, k=2, per_axis=True))
        assert set(report.jsd_per_axis) == {"x", "y", "z"}
        assert all(v <= 1e-9 for v in report.jsd_per_axis.values())

    def test_no_falls_rejected(self, tmp_path):
        real = build_dataset(tmp_path, subjects=4, series_len=200, falls_per_subject=0, name="nofall")
        other = build_synthetic_manifest(tmp_path, source="gen", series=4, series_len=200)
        with pytest.raises(DataError, match="fall"):
            run_alignment(real, other, AlignmentOptions(window=64, stride=16))


class TestExperimentConfig:
    def test_roundtrip(self, fixture_dataset):
        real, syn = fixture_dataset
        config = fast_config(real, [syn])
        again = ExperimentConfig.from_dict(config.to_dict())
        assert again == config

    def test_fingerprint_stable(self, fixture_dataset):
        real, syn = fixture_dataset
        assert fast_config(real, [syn]).fingerprint() == fast_config(real, [syn]).fingerprint()

    def test_fingerprint_changes_on_any_field(self, fixture_dataset):
        real, syn = fixture_dataset
        base = fast_config(real, [syn])
        fp = base.fingerprint()
        mutations = dict(
            real_manifest=str(real) + ".other",
            synthetic_manifests=(),
            window=65,
            stride=17,
            mix=(0.5, 0.3, 0.2),
            split_sizes=(7, 3, 2),
            iterations=3,
            seed=12,
            hidden_size=9,
            dense_units=10,
            train={"max_epochs": 7, "patience": 7, "batch_size": 64},
            bins=99,
            k=4,
            threshold=0.4,
            baseline_report="somewhere.json",
        )
        for name, value in mutations.items():
            mutated = fast_config(real, [syn], **{name: value})
            assert mutated.fingerprint() != fp, name

    def test_unknown_field_rejected(self, fixture_dataset):
        real, _ = fixture_dataset
        with pytest.raises(ConfigError, match="unknown"):
            ExperimentConfig.from_dict({"real_manifest": str(real), "seed": 1, "mystery": 2})

    def test_requires_seed(self, fixture_dataset):
        real, _ = fixture_dataset
        with pytest.raises(ConfigError, match="seed"):
            ExperimentConfig.from_dict({"real_manifest": str(real)})

    def test_derive_seed_stable(self):
        assert derive_seed(1, 0, "split") == derive_seed(1, 0, "split")
        assert derive_seed(1, 0, "split") != derive_seed(1, 1, "split")
        assert derive_seed(1, 0, "split") != derive_seed(1, 0, "mix")
        assert derive_seed(2, 0, "split") != derive_seed(1, 0, "split")


class TestExperiment:
    def test_report_shape_and_mean(self, fixture_dataset):
        real, syn = fixture_dataset
        report = run_experiment(fast_config(real, [syn]))
        assert len(report.iterations) == 2
        mean = sum(r.f1 for r in report.iterations) / 2
        assert abs(report.mean_f1 - mean) < 1e-12
        for it in report.iterations:
            assert len(it.val_subjects) == 2
            assert len(it.test_subjects) == 2
            assert not set(it.val_subjects) & set(it.test_subjects)

    def test_iteration_splits_differ(self, fixture_dataset):
        real, syn = fixture_dataset
        report = run_experiment(fast_config(real, [syn]))
        assert report.iterations[0].test_subjects != report.iterations[1].test_subjects or \
            report.iterations[0].val_subjects != report.iterations[1].val_subjects

    def test_same_seed_reproduces_report(self, fixture_dataset):
        real, syn = fixture_dataset
        a = run_experiment(fast_config(real, [syn]))
        b = run_experiment(fast_config(real, [syn]))
        assert a.to_json() == b.to_json()

    def test_baseline_and_augmented_share_splits(self, fixture_dataset):
        real, syn = fixture_dataset
        baseline = run_experiment(fast_config(real, (), mix=(0.7, 0.3, 0.0)))
        augmented = run_experiment(fast_config(real, [syn], mix=(0.6, 0.2, 0.2)))
        for b, a in zip(baseline.iterations, augmented.iterations):
            assert b.test_subjects == a.test_subjects
            assert b.val_subjects == a.val_subjects

    def test_baseline_delta(self, tmp_path, fixture_dataset):
        real, syn = fixture_dataset
        baseline = run_experiment(fast_config(real, ()))
        (paths,) = [emit_report(baseline, "json", tmp_path / "base")]
        base_path = paths[0]
        augmented = run_experiment(fast_config(real, [syn], baseline_report=str(base_path)))
        assert augmented.baseline_mean_f1 == pytest.approx(baseline.mean_f1)
        expected = 100.0 * (augmented.mean_f1 - baseline.mean_f1) / baseline.mean_f1
        assert augmented.delta_percent == pytest.approx(expected)

    def test_too_few_subjects(self, tmp_path):
        real = build_dataset(tmp_path, subjects=4, series_len=200)
        with pytest.raises(DataError, match="subjects"):
            run_experiment(fast_config(real, (), split_sizes=(8, 2, 2)))

    def test_empty_synthetic_pool_with_positive_fraction(self, tmp_path):
        real = build_dataset(tmp_path, subjects=12, series_len=200)
        with pytest.raises(DataError, match="infeasible"):
            run_experiment(fast_config(real, (), mix=(0.6, 0.2, 0.2)))


class TestAblation:
    def test_mix_forced_to_ablation_ratio(self, fixture_dataset):
        real, syn = fixture_dataset
        config = fast_config(real, [syn], mix=(0.6, 0.2, 0.2))
        report = run_ablation_quantity(config)
        assert report.config["mix"] == [0.5, 0.1, 0.4]

    def test_pooled_sources_sampled(self, tmp_path):
        real = build_dataset(tmp_path, subjects=12, series_len=200, seed=0)
        sources = [
            build_synthetic_manifest(tmp_path, source=f"gen{j}", series=4, series_len=200, seed=50 + j)
            for j in range(3)
        ]
        config = fast_config(real, sources, mix=(0.5, 0.1, 0.4), iterations=1)
        from synthfall.harness import _load_pools
        from synthfall.windowing import compose_training_mix

        subjects, real_windows, synthetic_pool = _load_pools(config)
        prefixes = set()
        for seed in range(100):
            mix = compose_training_mix(
                [w for w in real_windows if int(w.label) == 0],
                [w for w in real_windows if int(w.label) == 1],
                synthetic_pool,
                MixSpec(0.5, 0.1, 0.4),
                seed=seed,
            )
            drawn = {w.subject_id[:4] for w in mix if w.provenance.value == "synthetic"}
            prefixes |= drawn
            if seed >= 3 and len(prefixes) >= 2:
                break
        assert len(prefixes) >= 2

    def test_ablation_runs_with_forced_mix(self, fixture_dataset):
        real, syn = fixture_dataset
        report = run_ablation_quantity(fast_config(real, [syn], iterations=1))
        total = report.iterations[0].train_size
        assert total > 0


class TestRunTraining:
    def test_returns_model_and_history(self, fixture_dataset):
        real, syn = fixture_dataset
        model, history, result = run_training(fast_config(real, [syn], iterations=1))
        assert history.epochs() >= 1
        assert 0.0 <= result.f1 <= 1.0
        assert model.hidden_size == 8


class TestEmitReport:
    def test_json_roundtrip(self, tmp_path, fixture_dataset):
        real, syn = fixture_dataset
        report = run_experiment(fast_config(real, [syn], iterations=1))
        (path,) = emit_report(report, "json", tmp_path / "out")
        parsed = ExperimentReport.from_dict(json.loads(path.read_text()))
        assert parsed.to_dict() == report.to_dict()
        assert report.fingerprint[:12] in path.name

    def test_csv_contains_iterations(self, tmp_path, fixture_dataset):
        real, syn = fixture_dataset
        report = run_experiment(fast_config(real, [syn], iterations=1))
        (path,) = emit_report(report, "csv", tmp_path / "out")
        lines = path.read_text().splitlines()
        assert lines[0].startswith("iteration;")
        assert lines[-1].startswith("mean;")

    def test_bad_format(self, fixture_dataset):
        real, syn = fixture_dataset
        report = run_experiment(fast_config(real, [syn], iterations=1))
        with pytest.raises(ConfigError):
            emit_report(report, "xml", ".")


class TestCli:
    def test_exit_code_mapping(self):
        from synthfall.errors import ConfigError, DataError, NumericError, ToolkitError

        assert ToolkitError.exit_code == 1
        assert ConfigError.exit_code == 2
        assert DataError.exit_code == 3
        assert NumericError.exit_code == 4

    def test_ingest_ok(self, capsys, fixture_dataset):
        real, _ = fixture_dataset
        assert main(["ingest", str(real)]) == 0
        out = capsys.readouterr().out
        assert "subjects: 12" in out

    def test_ingest_missing_manifest_exit_3(self, tmp_path, capsys):
        assert main(["ingest", str(tmp_path / "nope.json")]) == 3

    def test_kinematics_roundtrip(self, tmp_path, capsys):
        motion = np.zeros((50, 22, 3))
        motion[:, 20, 0] = np.arange(50) * 0.1
        npy = tmp_path / "motion.npy"
        np.save(npy, motion)
        out_csv = tmp_path / "accel.csv"
        code = main([
            "kinematics", str(npy), str(out_csv),
            "--placement", "left_wrist",
        ])
        assert code == 0
        from synthfall.ingest import read_accel_csv

        series = read_accel_csv(out_csv.read_bytes())
        assert series.samples[0, 0] == pytest.approx(0.1 * 46.0**2, rel=1e-6)

    def test_windows_cache(self, tmp_path, capsys, fixture_dataset):
        real, _ = fixture_dataset
        cache = tmp_path / "w.bin"
        assert main(["windows", str(real), str(cache), "--window", "64", "--stride", "32"]) == 0
        from synthfall.windowing import load_window_cache

        assert len(load_window_cache(cache)) > 0

    def test_align_command(self, tmp_path, capsys, fixture_dataset):
        real, syn = fixture_dataset
        out = tmp_path / "align_out"
        code = main([
            "align", str(real), str(syn), "--window", "64", "--stride", "32",
            "--bins", "30", "--k", "3", "--out", str(out),
        ])
        assert code == 0
        assert list(out.glob("alignment_*.json"))
        assert list(out.glob("density_real_*.csv"))

    def test_experiment_requires_seed(self, capsys, fixture_dataset):
        real, _ = fixture_dataset
        with pytest.raises(SystemExit) as exc:
            main(["experiment", "--real-manifest", str(real)])
        assert exc.value.code == 2

    def test_experiment_and_report_roundtrip(self, tmp_path, capsys, fixture_dataset):
        real, syn = fixture_dataset
        out = tmp_path / "exp"
        code = main([
            "experiment", "--real-manifest", str(real),
            "--synthetic-manifest", str(syn),
            "--seed", "3", "--iterations", "1", "--window", "64", "--stride", "16",
            "--hidden-size", "8", "--dense-units", "8", "--max-epochs", "4",
            "--patience", "4", "--mix", "0.6,0.2,0.2", "--out", str(out),
        ])
        assert code == 0
        (report_path,) = out.glob("report_*.json")
        out2 = tmp_path / "re"
        assert main(["report", str(report_path), "--format", "csv", "--out", str(out2)]) == 0
        assert list(out2.glob("report_*.csv"))

    def test_train_command_writes_checkpoint(self, tmp_path, capsys, fixture_dataset):
        real, syn = fixture_dataset
        out = tmp_path / "train_out"
        code = main([
            "train", "--real-manifest", str(real), "--synthetic-manifest", str(syn),
            "--seed", "5", "--window", "64", "--stride", "16",
            "--hidden-size", "8", "--dense-units", "8", "--max-epochs", "3",
            "--patience", "3", "--mix", "0.6,0.2,0.2", "--out", str(out),
        ])
        assert code == 0
        (ckpt,) = out.glob("model_*.ckpt")
        from synthfall.classifier import load_checkpoint

        model, window_len = load_checkpoint(ckpt)
        assert window_len == 64
        assert model.hidden_size == 8

    def test_prompts_command(self, tmp_path, capsys):
        out = tmp_path / "prompts.txt"
        assert main(["prompts", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 350

    def test_config_file_with_overrides(self, tmp_path, capsys, fixture_dataset):
        real, syn = fixture_dataset
        config = {
            "real_manifest": str(real),
            "synthetic_manifests": [str(syn)],
            "window": 64, "stride": 16, "iterations": 1,
            "hidden_size": 8, "dense_units": 8,
            "train": {"max_epochs": 3, "patience": 3},
            "mix": [0.6, 0.2, 0.2],
            "seed": 0,
        }
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps(config))
        out = tmp_path / "exp2"
        code = main([
            "experiment", "--config", str(cfg_path), "--seed", "9",
            "--iterations", "1", "--out", str(out),
        ])
        assert code == 0
        (report_path,) = out.glob("report_*.json")
        payload = json.loads(report_path.read_text())
        assert payload["config"]["seed"] == 9

    def test_bad_mix_flag_exit_2(self, capsys, fixture_dataset):
        real, _ = fixture_dataset
        code = main([
            "experiment", "--real-manifest", str(real), "--seed", "1", "--mix", "0.5,0.5",
        ])
        assert code == 2

import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from sgthermo.cli import main
from sgthermo.config import default_config
from sgthermo.experiments import (
    run_doublewell_experiment,
    run_logreg_experiment,
    run_mlp_experiment,
    run_order_check,
)


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def tiny_doublewell(out_dir, seed=1, figures=False, h_values=(0.1, 0.2)):
    cfg = default_config("doublewell")
    cfg.kinds = ["msgnht-euler", "msgnht-split"]
    cfg.h_values = list(h_values)
    cfg.total_steps = 4000
    cfg.model["xi_subsample"] = 1000
    cfg.seed = seed
    cfg.out_dir = str(out_dir)
    cfg.figures = figures
    return cfg


class TestDoubleWellDriver:
    def test_csv_schema_and_row_count(self, tmp_path):
        result = run_doublewell_experiment(tiny_doublewell(tmp_path))
        rows = read_csv(tmp_path / "kl_vs_h.csv")
        assert rows[0] == ["kind", "h", "kl", "overflow_fraction", "diverged"]
        assert len(rows) == 1 + 4  # 2 kinds x 2 h
        assert all(not r.diverged for r in result.runs)
        th = read_csv(tmp_path / "thermostat.csv")
        assert th[0] == ["kind", "h", "step", "xi_mean"]
        assert len(th) == 1 + 4 * 4  # 4 runs x (4000/1000) subsamples

    def test_byte_identical_rerun(self, tmp_path):
        run_doublewell_experiment(tiny_doublewell(tmp_path / "a"))
        run_doublewell_experiment(tiny_doublewell(tmp_path / "b"))
        for name in ("kl_vs_h.csv", "thermostat.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_different_seed_changes_output(self, tmp_path):
        run_doublewell_experiment(tiny_doublewell(tmp_path / "a", seed=1))
        run_doublewell_experiment(tiny_doublewell(tmp_path / "b", seed=2))
        assert (tmp_path / "a/kl_vs_h.csv").read_bytes() != (tmp_path / "b/kl_vs_h.csv").read_bytes()

    def test_divergent_run_is_flagged_and_others_continue(self, tmp_path):
        cfg = tiny_doublewell(tmp_path, h_values=(0.1, 80.0))
        result = run_doublewell_experiment(cfg)
        # the Euler kernel blows up at h = 80 (the split kernel may instead
        # saturate finitely outside the support, reported as kl = nan too)
        flagged = [r for r in result.runs if r.diverged]
        assert any(r.kind == "msgnht-euler" for r in flagged)
        assert all(math.isnan(r.kl) and r.diverged_step >= 1 for r in flagged)
        fine = [r for r in result.runs if r.h == 0.1]
        assert len(fine) == 2 and all(math.isfinite(r.kl) for r in fine)
        rows = read_csv(tmp_path / "kl_vs_h.csv")
        assert any(row[2] == "nan" and row[4] == "1" for row in rows[1:])

    def test_figures_rendered(self, tmp_path):
        cfg = tiny_doublewell(tmp_path, figures=True)
        run_doublewell_experiment(cfg)
        for name in ("kl_vs_h.png", "thermostat.png", "densities.png"):
            assert (tmp_path / name).stat().st_size > 0


@pytest.mark.xfail(
    strict=True,
    reason="with no simulated gradient noise and no injected noise the chain is the "
    "deterministic 1-D thermostat flow, which is not ergodic for this target: "
    "measured KL stays near 1 (and one initial condition never leaves the left "
    "well), far above the stated 0.01 floor",
)
def test_noise_free_doublewell_reaches_kl_floor(tmp_path):
    cfg = tiny_doublewell(tmp_path, h_values=(0.05,))
    cfg.kinds = ["msgnht-split", "msgnht-euler"]
    cfg.total_steps = 400_000
    cfg.model["noise_scale"] = 0.0
    result = run_doublewell_experiment(cfg)
    assert all(r.kl < 0.01 for r in result.runs)


class TestOrderCheckDriver:
    def test_csv_and_summary(self, tmp_path):
        cfg = default_config("order-check")
        cfg.h_values = [0.1, 0.2, 0.4]
        cfg.total_steps = 4000
        cfg.burn_in = 400
        cfg.model["replicates"] = 2
        cfg.model["dim"] = 3
        cfg.out_dir = str(tmp_path)
        cfg.figures = True
        result = run_order_check(cfg)
        assert (tmp_path / "order.png").stat().st_size > 0
        rows = read_csv(tmp_path / "order.csv")
        assert rows[0] == ["kind", "h", "bias", "mse", "stderr"]
        assert len(rows) == 1 + 2 * 3
        summary = read_csv(tmp_path / "order_summary.csv")
        assert summary[0] == ["kind", "bias_slope", "bias_slope_stderr", "mse_slope", "points_in_fit"]
        assert set(result.sweeps) == {"msgnht-euler", "msgnht-split"}


def tiny_logreg(out_dir, seed=3, kinds=("msgnht-split",)):
    cfg = default_config("logreg")
    cfg.kinds = list(kinds)
    cfg.total_steps = 800
    cfg.burn_in = 300
    cfg.thinning = 50
    cfg.batch_size = 20
    cfg.seed = seed
    cfg.out_dir = str(out_dir)
    cfg.figures = False
    cfg.model["synthetic_n_train"] = 400
    cfg.model["synthetic_n_test"] = 200
    cfg.model["synthetic_h_values"] = [0.05]
    cfg.model["synthetic_d_values"] = [1.0]
    return cfg


class TestLogRegDriver:
    def test_synthetic_fallback_accuracy_and_curves(self, tmp_path):
        cfg = tiny_logreg(tmp_path)
        cfg.figures = True
        result = run_logreg_experiment(cfg)
        assert result.synthetic
        assert (tmp_path / "learning_curve.png").stat().st_size > 0
        rows = read_csv(tmp_path / "accuracy.csv")
        assert rows[0] == ["kind", "h", "D", "test_accuracy", "diverged"]
        assert len(rows) == 2
        acc = float(rows[1][3])
        assert acc > 0.9  # two-gaussians is nearly separable
        curve = read_csv(tmp_path / "learning_curve.csv")
        assert curve[0] == ["kind", "iteration", "test_error", "train_loglik"]
        assert len(curve) == 1 + (800 - 300) // 50
        iterations = [int(r[1]) for r in curve[1:]]
        assert iterations[0] == 350 and iterations[-1] == 800

    def test_byte_identical_rerun(self, tmp_path):
        run_logreg_experiment(tiny_logreg(tmp_path / "a"))
        run_logreg_experiment(tiny_logreg(tmp_path / "b"))
        for name in ("accuracy.csv", "learning_curve.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_libsvm_paths_are_used(self, tmp_path):
        train = tmp_path / "train.libsvm"
        test = tmp_path / "test.libsvm"
        gen = np.random.Generator(np.random.Philox(5))
        for path, n in ((train, 120), (test, 60)):
            lines = []
            for _ in range(n):
                x = gen.normal(size=2)
                y = 1 if x.sum() + 0.2 * gen.normal() > 0 else -1
                lines.append(f"{'+1' if y > 0 else '-1'} 1:{x[0]:.6f} 2:{x[1]:.6f}")
            path.write_text("\n".join(lines) + "\n")
        cfg = tiny_logreg(tmp_path / "out")
        cfg.model.update(train_path=str(train), test_path=str(test), expected_dim=2)
        cfg.h_values = [0.05]
        cfg.d_values = [1.0]
        result = run_logreg_experiment(cfg)
        assert not result.synthetic
        assert result.best["msgnht-split"].test_accuracy > 0.8


def tiny_mlp(out_dir, seed=4, h_values=(0.05,), epochs=3, halve_at=2):
    cfg = default_config("mlp")
    cfg.kinds = ["msgnht-split"]
    cfg.h_values = list(h_values)
    cfg.d_values = [2.0]
    cfg.batch_size = 32
    cfg.seed = seed
    cfg.out_dir = str(out_dir)
    cfg.figures = False
    cfg.model.update(
        dataset="two-gaussians", layer_sizes=[2, 4, 2], n_train=256, n_test=128,
        epochs=epochs, halve_at_epoch=halve_at, thin_per_epoch=2,
    )
    return cfg


class TestMlpDriver:
    def test_stepsize_halves_exactly_once(self, tmp_path):
        cfg = tiny_mlp(tmp_path, epochs=4, halve_at=3)
        cfg.figures = True
        run_mlp_experiment(cfg)
        assert (tmp_path / "learning_curve.png").stat().st_size > 0
        rows = read_csv(tmp_path / "learning_curve.csv")
        assert rows[0] == ["kind", "h_base", "epoch", "h", "test_accuracy", "train_nll", "diverged"]
        h_by_epoch = {int(r[2]): float(r[3]) for r in rows[1:]}
        assert h_by_epoch[1] == h_by_epoch[2] == 0.05
        assert h_by_epoch[3] == h_by_epoch[4] == 0.025

    def test_byte_identical_rerun(self, tmp_path):
        run_mlp_experiment(tiny_mlp(tmp_path / "a"))
        run_mlp_experiment(tiny_mlp(tmp_path / "b"))
        assert (tmp_path / "a/learning_curve.csv").read_bytes() == (
            tmp_path / "b/learning_curve.csv"
        ).read_bytes()

    def test_single_hidden_layer_separates_two_gaussians(self, tmp_path):
        cfg = tiny_mlp(tmp_path, epochs=6)
        cfg.kinds = ["msgnht-euler", "msgnht-split"]
        cfg.model["layer_sizes"] = [2, 8, 2]
        result = run_mlp_experiment(cfg)
        assert all(not r.diverged and r.final_accuracy >= 0.95 for r in result.runs)

    def test_divergence_recorded_with_epoch(self, tmp_path):
        cfg = tiny_mlp(tmp_path, h_values=(80.0, 0.05), epochs=3, halve_at=99)
        result = run_mlp_experiment(cfg)
        bad = [r for r in result.runs if r.h_base == 80.0]
        good = [r for r in result.runs if r.h_base == 0.05]
        assert bad[0].diverged and bad[0].diverged_epoch >= 1
        assert good[0].diverged is False
        assert math.isfinite(good[0].final_accuracy)
        rows = read_csv(tmp_path / "learning_curve.csv")
        assert any(r[6] == "1" for r in rows[1:])


class TestCli:
    def test_doublewell_subcommand(self, tmp_path, capsys):
        code = main([
            "doublewell", "--out", str(tmp_path), "--seed", "2", "--no-figures",
            "--set", "total_steps=2000",
            "--set", "h_values=[0.1]",
            "--set", 'kinds=["msgnht-split"]',
        ])
        assert code == 0
        assert (tmp_path / "kl_vs_h.csv").exists()
        config = json.loads((tmp_path / "config.json").read_text())
        assert config["seed"] == 2 and config["total_steps"] == 2000

    def test_config_error_exit_code_and_json_line(self, tmp_path, capsys):
        code = main(["doublewell", "--out", str(tmp_path), "--set", "h_values=[]"])
        assert code == 2
        err = capsys.readouterr().err.strip().splitlines()[-1]
        payload = json.loads(err)
        assert payload["error"] == "ConfigError"

    def test_config_file_subcommand(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({
            "kinds": ["msgnht-split"], "h_values": [0.1], "total_steps": 1500,
            "model": {"xi_subsample": 500},
        }))
        code = main(["doublewell", "--config", str(cfg_path), "--out", str(tmp_path / "out"),
                     "--no-figures"])
        assert code == 0
        rows = read_csv(tmp_path / "out" / "thermostat.csv")
        assert len(rows) == 1 + 3  # 1500 steps / 500 subsample

    def test_console_script_entry_point(self, tmp_path):
        import subprocess

        proc = subprocess.run(
            ["sgthermo", "order-check", "--out", str(tmp_path), "--no-figures",
             "--set", "h_values=[0.1,0.2]", "--set", "total_steps=2000",
             "--set", "burn_in=200", "--set", "model.replicates=2", "--set", "model.dim=2"],
            capture_output=True, text=True, timeout=300,
        )
        assert proc.returncode == 0, proc.stderr
        assert (tmp_path / "order_summary.csv").exists()

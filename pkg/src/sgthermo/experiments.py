"""Experiment drivers: double-well accuracy, convergence-order check, logistic regression, MLP.

Every driver is a pure function of its ExperimentConfig: streams are derived
from (seed, cell indices), rows are emitted in configuration order, and floats
are serialized with 9 significant digits, so a rerun with the same config and
seed reproduces the CSV output byte for byte.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .core import DivergenceError, SamplerState, make_minibatch_schedule
from .datasets import load_idx_images, load_idx_labels, load_libsvm, synth_classification
from .diagnostics import (
    DensityEstimate,
    EmptyEstimateError,
    SweepResult,
    double_well_true_density,
    histogram_density,
    kl_divergence,
    order_sweep,
    thermostat_summary,
)
from .integrators import IntegratorConfig, run_chain
from .models import DoubleWellModel, GaussianModel, LogisticRegressionModel, MlpModel
from .rng import RngStream


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return "nan" if math.isnan(value) else f"{value:.9g}"
    return str(value)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def _prepare_out(config: ExperimentConfig) -> Path:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(config.to_json())
    return out


# ---------------------------------------------------------------------------
# double well


@dataclass
class DoubleWellRun:
    kind: str
    h: float
    kl: float
    overflow_fraction: float
    diverged: bool
    diverged_step: int | None = None
    density: DensityEstimate | None = field(default=None, repr=False)
    xi_tail_mean: float = float("nan")


@dataclass
class DoubleWellResult:
    runs: list
    true_density: DensityEstimate
    thermostat_rows: list
    csv_paths: dict


def run_doublewell_experiment(config: ExperimentConfig) -> DoubleWellResult:
    """KL against the analytic double-well density per (kind, h), plus thermostat traces."""
    out = _prepare_out(config)
    m = config.model
    lo, hi = m["range"]
    bins = int(m["bins"])
    xi_sub = int(m["xi_subsample"])
    d_value = config.d_values[0]
    base = RngStream(config.seed)
    truth = double_well_true_density(lo, hi, bins)
    model = DoubleWellModel(noise_scale=m["noise_scale"])
    theta0, p0, xi0 = m["init"]

    runs: list[DoubleWellRun] = []
    thermostat_rows: list[tuple] = []
    for ki, kind in enumerate(config.kinds):
        for hi_, h in enumerate(config.h_values):
            icfg = IntegratorConfig(h=h, D=d_value, kind=kind)
            init = SamplerState(np.array([theta0]), np.array([p0]), np.array([xi0]))
            try:
                trace = run_chain(
                    model, init, icfg, None, config.total_steps, config.burn_in,
                    config.thinning, rng=base.derive(ki, hi_), record_potential=False,
                )
            except DivergenceError as err:
                runs.append(DoubleWellRun(kind, h, float("nan"), float("nan"),
                                          diverged=True, diverged_step=err.step))
                continue
            try:
                est = histogram_density(trace.thetas[:, 0], lo, hi, bins)
            except EmptyEstimateError:
                # finite chain that left the support entirely; KL is undefined
                runs.append(DoubleWellRun(kind, h, float("nan"), 1.0, diverged=False,
                                          xi_tail_mean=thermostat_summary(trace, 0.2)))
                continue
            runs.append(DoubleWellRun(
                kind, h,
                kl=kl_divergence(truth, est),
                overflow_fraction=est.overflow / len(trace),
                diverged=False,
                density=est,
                xi_tail_mean=thermostat_summary(trace, 0.2),
            ))
            for i in range(xi_sub - 1, len(trace), xi_sub):
                thermostat_rows.append((kind, h, config.burn_in + (i + 1) * config.thinning,
                                        trace.xi_means[i]))

    kl_path = write_csv(
        out / "kl_vs_h.csv",
        ["kind", "h", "kl", "overflow_fraction", "diverged"],
        [(r.kind, r.h, r.kl, r.overflow_fraction, r.diverged) for r in runs],
    )
    th_path = write_csv(out / "thermostat.csv", ["kind", "h", "step", "xi_mean"], thermostat_rows)

    result = DoubleWellResult(runs, truth, thermostat_rows,
                              {"kl_vs_h": kl_path, "thermostat": th_path})
    if config.figures:
        from . import figures

        figures.doublewell_figures(result, out)
    return result


# ---------------------------------------------------------------------------
# convergence-order check


@dataclass
class OrderCheckResult:
    sweeps: dict
    csv_paths: dict


def run_order_check(config: ExperimentConfig) -> OrderCheckResult:
    """Bias/MSE stepsize sweep on the Gaussian oracle with log-log slope fits."""
    out = _prepare_out(config)
    m = config.model
    model = GaussianModel(int(m.get("dim", 10)))

    def phi(theta):
        return float(np.mean(theta * theta))

    sweeps = order_sweep(
        model,
        config.kinds,
        config.h_values,
        config.total_steps,
        phi,
        true_average=1.0,
        replicates=int(m["replicates"]),
        rng=RngStream(config.seed),
        D=config.d_values[0],
        burn_in_fraction=config.burn_in / config.total_steps,
        thinning=config.thinning,
    )

    rows = []
    for kind in config.kinds:
        sw: SweepResult = sweeps[kind]
        for i, h in enumerate(sw.h_values):
            rows.append((kind, float(h), sw.bias_values[i], sw.mse_values[i], sw.stderr_values[i]))
    order_path = write_csv(out / "order.csv", ["kind", "h", "bias", "mse", "stderr"], rows)

    summary_rows = []
    for kind in config.kinds:
        sw = sweeps[kind]
        summary_rows.append((kind, sw.fitted_slope, sw.slope_stderr, sw.mse_slope,
                             int(sw.fit_mask.sum())))
        print(f"{kind}: bias slope {sw.fitted_slope:.3f} (stderr {sw.slope_stderr:.3f}), "
              f"mse slope {sw.mse_slope:.3f}, {int(sw.fit_mask.sum())} stepsizes in fit")
    summary_path = write_csv(
        out / "order_summary.csv",
        ["kind", "bias_slope", "bias_slope_stderr", "mse_slope", "points_in_fit"],
        summary_rows,
    )

    result = OrderCheckResult(sweeps, {"order": order_path, "summary": summary_path})
    if config.figures:
        from . import figures

        figures.order_figures(result, out)
    return result


# ---------------------------------------------------------------------------
# logistic regression


@dataclass
class LogRegCell:
    kind: str
    h: float
    D: float
    test_accuracy: float
    diverged: bool
    diverged_step: int | None = None
    curve_iterations: np.ndarray | None = field(default=None, repr=False)
    curve_test_error: np.ndarray | None = field(default=None, repr=False)
    curve_train_loglik: np.ndarray | None = field(default=None, repr=False)


@dataclass
class LogRegResult:
    cells: list
    best: dict
    synthetic: bool
    csv_paths: dict


def _logreg_data(config: ExperimentConfig):
    m = config.model
    if m.get("train_path"):
        expected = m.get("expected_dim")
        train = load_libsvm(m["train_path"], expected_dim=expected)
        test = load_libsvm(m["test_path"], expected_dim=expected)
        return train.features, train.labels, test.features, test.labels, False
    n_train = int(m["synthetic_n_train"])
    n_test = int(m["synthetic_n_test"])
    features, labels = synth_classification(n_train + n_test, m["synthetic_kind"], config.seed)
    return (features[:n_train], labels[:n_train].astype(float),
            features[n_train:], labels[n_train:].astype(float), True)


def run_logreg_experiment(config: ExperimentConfig) -> LogRegResult:
    """Posterior-predictive test accuracy over an (h, D) grid, per integrator kind.

    Prediction averages the predictive probabilities over the thinned
    post-burn-in samples. Without dataset paths the driver falls back to the
    synthetic task and the grid given by model.synthetic_h_values/d_values.
    """
    out = _prepare_out(config)
    Xtr, ytr, Xte, yte, synthetic = _logreg_data(config)
    model = LogisticRegressionModel(Xtr, ytr, prior_variance=config.model["prior_variance"])
    h_values = config.model["synthetic_h_values"] if synthetic else config.h_values
    d_values = config.model["synthetic_d_values"] if synthetic else config.d_values
    base = RngStream(config.seed)

    n_samples = (config.total_steps - config.burn_in) // config.thinning
    cells: list[LogRegCell] = []
    for ki, kind in enumerate(config.kinds):
        for hi, h in enumerate(h_values):
            for di, d in enumerate(d_values):
                icfg = IntegratorConfig(h=h, D=d, kind=kind)
                stream = base.derive(ki, hi, di)
                schedule = make_minibatch_schedule(
                    model.data_size, config.batch_size, "shuffled-epochs", stream.derive(1)
                )
                init = SamplerState(np.zeros(model.dim), np.ones(model.dim), np.full(model.dim, d))
                try:
                    trace = run_chain(
                        model, init, icfg, schedule, config.total_steps, config.burn_in,
                        config.thinning, rng=stream.derive(2), record_potential=False,
                    )
                except DivergenceError as err:
                    cells.append(LogRegCell(kind, h, d, float("nan"), True, err.step))
                    continue

                # test probabilities for every recorded sample: (n_test, n_samples)
                probs = np.column_stack(
                    [model.predict_proba(trace.thetas[i], Xte) for i in range(len(trace))]
                )
                running = np.cumsum(probs, axis=1) / np.arange(1, n_samples + 1)
                running_acc = np.mean((running >= 0.5) == (yte[:, None] == 1.0), axis=0)
                loglik = np.array(
                    [-model.neg_log_likelihood(trace.thetas[i]) for i in range(len(trace))]
                )
                iters = config.burn_in + config.thinning * np.arange(1, n_samples + 1)
                cells.append(LogRegCell(
                    kind, h, d,
                    test_accuracy=float(running_acc[-1]),
                    diverged=False,
                    curve_iterations=iters,
                    curve_test_error=1.0 - running_acc,
                    curve_train_loglik=loglik,
                ))

    acc_path = write_csv(
        out / "accuracy.csv",
        ["kind", "h", "D", "test_accuracy", "diverged"],
        [(c.kind, c.h, c.D, c.test_accuracy, c.diverged) for c in cells],
    )

    best: dict[str, LogRegCell] = {}
    for cell in cells:
        if cell.diverged:
            continue
        cur = best.get(cell.kind)
        if cur is None or cell.test_accuracy > cur.test_accuracy:
            best[cell.kind] = cell
    curve_rows = []
    for kind in config.kinds:
        cell = best.get(kind)
        if cell is None:
            continue
        for i, it in enumerate(cell.curve_iterations):
            curve_rows.append((kind, int(it), cell.curve_test_error[i], cell.curve_train_loglik[i]))
    curve_path = write_csv(
        out / "learning_curve.csv",
        ["kind", "iteration", "test_error", "train_loglik"],
        curve_rows,
    )

    result = LogRegResult(cells, best, synthetic,
                          {"accuracy": acc_path, "learning_curve": curve_path})
    if config.figures:
        from . import figures

        figures.logreg_figures(result, out)
    return result


# ---------------------------------------------------------------------------
# MLP


@dataclass
class MlpRun:
    kind: str
    h_base: float
    epochs: np.ndarray
    h_used: np.ndarray
    test_accuracy: np.ndarray
    train_nll: np.ndarray
    final_accuracy: float
    diverged: bool
    diverged_epoch: int | None = None


@dataclass
class MlpResult:
    runs: list
    csv_paths: dict


def _mlp_data(config: ExperimentConfig):
    m = config.model
    paths = m.get("image_paths")
    if paths:
        raw_tr = load_idx_images(paths["train_images"])
        raw_te = load_idx_images(paths["test_images"])
        Xtr = raw_tr.reshape(raw_tr.shape[0], -1) / 255.0
        Xte = raw_te.reshape(raw_te.shape[0], -1) / 255.0
        ytr = load_idx_labels(paths["train_labels"]).astype(np.int64)
        yte = load_idx_labels(paths["test_labels"]).astype(np.int64)
        return Xtr, ytr, Xte, yte
    n_train, n_test = int(m["n_train"]), int(m["n_test"])
    features, labels = synth_classification(n_train + n_test, m["dataset"], config.seed)
    return features[:n_train], labels[:n_train], features[n_train:], labels[n_train:]


def run_mlp_experiment(config: ExperimentConfig) -> MlpResult:
    """Epoch-wise posterior sampling of a small classifier net, per kind and base stepsize.

    The stepsize halves exactly once at model.halve_at_epoch. Test accuracy is
    the running posterior-predictive accuracy over all samples recorded so
    far; train_nll is the negative log-likelihood at the current state. A
    diverged kind is recorded with its epoch and the remaining runs continue.
    """
    out = _prepare_out(config)
    m = config.model
    Xtr, ytr, Xte, yte = _mlp_data(config)
    model = MlpModel(m["layer_sizes"], Xtr, ytr, activation=m["activation"],
                     prior_variance=m["prior_variance"])
    epochs = int(m["epochs"])
    halve_at = int(m["halve_at_epoch"])
    thin_per_epoch = max(1, int(m.get("thin_per_epoch", 4)))
    d_value = config.d_values[0]
    base = RngStream(config.seed)
    steps_per_epoch = math.ceil(model.data_size / config.batch_size)
    thinning = max(1, steps_per_epoch // thin_per_epoch)

    runs: list[MlpRun] = []
    for ki, kind in enumerate(config.kinds):
        for hi, h_base in enumerate(config.h_values):
            stream = base.derive(ki, hi)
            theta0 = model.initial_theta(stream.derive(0).generator(),
                                         scale=float(m.get("init_scale", 0.1)))
            state = SamplerState(theta0, np.ones(model.dim), np.full(model.dim, d_value))
            schedule = make_minibatch_schedule(
                model.data_size, config.batch_size, "shuffled-epochs", stream.derive(1)
            )
            batch_iter = schedule.batches()
            chain_rng = stream.derive(2).generator()

            prob_sum = np.zeros((len(yte), model.n_classes))
            n_collected = 0
            ep_numbers, ep_h, ep_acc, ep_nll = [], [], [], []
            diverged, diverged_epoch = False, None
            h = h_base
            for epoch in range(1, epochs + 1):
                if epoch == halve_at:
                    h = h / 2.0
                icfg = IntegratorConfig(h=h, D=d_value, kind=kind)
                try:
                    trace = run_chain(
                        model, state, icfg, batch_iter, steps_per_epoch, 0, thinning,
                        rng=chain_rng, record_potential=False,
                    )
                except DivergenceError:
                    diverged, diverged_epoch = True, epoch
                    ep_numbers.append(epoch)
                    ep_h.append(h)
                    ep_acc.append(float("nan"))
                    ep_nll.append(float("nan"))
                    break
                state = trace.final_state
                for i in range(len(trace)):
                    prob_sum += model.forward(trace.thetas[i], Xte)
                    n_collected += 1
                acc = float(np.mean(np.argmax(prob_sum, axis=1) == yte))
                ep_numbers.append(epoch)
                ep_h.append(h)
                ep_acc.append(acc)
                ep_nll.append(model.neg_log_likelihood(state.theta))
            final_acc = float("nan")
            for a in reversed(ep_acc):
                if not math.isnan(a):
                    final_acc = a
                    break
            runs.append(MlpRun(
                kind, h_base,
                epochs=np.array(ep_numbers),
                h_used=np.array(ep_h),
                test_accuracy=np.array(ep_acc),
                train_nll=np.array(ep_nll),
                final_accuracy=final_acc,
                diverged=diverged,
                diverged_epoch=diverged_epoch,
            ))

    rows = []
    for run in runs:
        for i, epoch in enumerate(run.epochs):
            flag = run.diverged and run.diverged_epoch == int(epoch)
            rows.append((run.kind, run.h_base, int(epoch), run.h_used[i],
                         run.test_accuracy[i], run.train_nll[i], flag))
    curve_path = write_csv(
        out / "learning_curve.csv",
        ["kind", "h_base", "epoch", "h", "test_accuracy", "train_nll", "diverged"],
        rows,
    )

    result = MlpResult(runs, {"learning_curve": curve_path})
    if config.figures:
        from . import figures

        figures.mlp_figures(result, out)
    return result


RUNNERS = {
    "doublewell": run_doublewell_experiment,
    "order-check": run_order_check,
    "logreg": run_logreg_experiment,
    "mlp": run_mlp_experiment,
}

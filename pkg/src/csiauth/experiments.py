"""Monte Carlo experiment driver and the table/figure reproduction matrix.

One trial = one fresh draw of average gains plus all datasets around
them; the method under test is fit on the trial's training split and
scored on its test split.  Trial seeds derive from (master_seed, index),
so trials can run serially or in parallel with bitwise-identical output;
trial bodies are pinned to one BLAS thread for the same reason.
"""

import csv
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from threadpoolctl import threadpool_limits

from . import baselines
from .chansim import SimConfig, flatten_samples, generate_trial, labels_of
from .metrics import MetricsReport, authenticate_batch, compute_metrics
from .models import ZOO, infer_shapes, named_config, network_input, build_network
from .nn.train import TrainSchedule, sgd_train
from .rng import derive_seed, substream
from .semisup import SemiSupSpec, run_pipeline

TABLE_SIM_METHODS = ("np", "knn", "logistic", "svm", "RNN-4", "CNN-4", "CRNN-4")
TABLE_SEMI_METHODS = ("CNN-4", "RNN-4", "CRNN-4")
FIG_FALSEMISS_METHODS = ("CRNN-4", "CNN-4", "RNN-4", "CRNN-3", "CNN-3", "RNN-3")
FIG_SAMPLES_METHODS = ("CRNN-4", "CNN-4", "RNN-4")
FIG_SAMPLES_SIZES = (50, 100, 200, 300, 400, 500)
FALSEMISS_EPOCHS = tuple(range(1, 11)) + tuple(range(15, 101, 5))

REPRODUCE_TARGETS = ("table-sim", "table-semi", "fig-falsemiss", "fig-samples")

CSV_FIELDS = ("method", "trial", "n_train_per_class", "accuracy", "far", "mdr",
              "wall_time_s", "epochs", "seed")

# substream roles on the trial seed reserved for training-time randomness
# (dataset generation uses roles < 100, see chansim)
_R_SHUFFLE = 100
_R_LOGISTIC = 101


@dataclass(frozen=True)
class ExperimentPlan:
    method: str
    semi: bool = False
    trials: int = 10
    master_seed: int = 0
    sim: SimConfig = SimConfig()
    schedule: TrainSchedule = TrainSchedule()
    semispec: SemiSupSpec = SemiSupSpec()
    knn_k: int = 5
    epoch_eval: tuple = ()    # 1-based epochs at which test FAR/MDR is recorded

    def validate(self):
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.method not in ("np", "knn", "logistic", "svm") and self.method not in ZOO:
            raise ValueError(f"unknown method {self.method!r}")

    @property
    def label(self):
        return f"{self.method} (semi)" if self.semi else self.method


@dataclass
class TrialResult:
    trial: int
    seed: int
    report: MetricsReport
    epoch_metrics: list = field(default_factory=list)  # (epoch, far, mdr, accuracy)


@dataclass
class ExperimentResult:
    plan: ExperimentPlan
    trials: list
    mean_accuracy: float
    mean_far: float
    mean_mdr: float

    @property
    def accuracies(self):
        return [t.report.accuracy for t in self.trials]


def predict_network(net, samples, chunk=256):
    """Hard labels for a sample list, evaluated in memory-bounded chunks."""
    preds = []
    for start in range(0, len(samples), chunk):
        x = network_input(net, samples[start:start + chunk])
        preds.append(authenticate_batch(net.forward(x)))
    return np.concatenate(preds) if preds else np.empty(0, dtype=np.int64)


def _dnn_config(name, sim):
    return infer_shapes(named_config(name), sim.m_b, sim.m_a, sim.n_tones)


def _fit_eval_dnn(plan, ds, seed):
    config = _dnn_config(plan.method, plan.sim)
    net = build_network(config, seed)
    train_x = network_input(net, ds.train)
    train_y = labels_of(ds.train)
    val_x = network_input(net, ds.validation) if ds.validation else None
    val_y = labels_of(ds.validation) if ds.validation else None

    epoch_metrics = []
    hook = None
    if plan.epoch_eval:
        wanted = set(plan.epoch_eval)
        test_y = labels_of(ds.test)

        def hook(epoch, network):
            if epoch + 1 in wanted:
                rep = compute_metrics(predict_network(network, ds.test), test_y)
                epoch_metrics.append((epoch + 1, rep.false_alarm_rate,
                                      rep.miss_detection_rate, rep.accuracy))

    log = sgd_train(net, train_x, train_y, plan.schedule, substream(seed, _R_SHUFFLE),
                    val_inputs=val_x, val_labels=val_y, epoch_hook=hook)
    preds = predict_network(net, ds.test)
    losses = {"train": log.train_losses, "validation": log.val_losses}
    return preds, losses, epoch_metrics


def _fit_eval_semi(plan, ds, seed):
    config = _dnn_config(plan.method, plan.sim)
    _, dnn2, _, (log1, log2) = run_pipeline(
        config, ds.train, ds.unlabeled, plan.semispec, seed,
        val_samples=ds.validation or None)
    preds = predict_network(dnn2, ds.test)
    losses = {"pretrain": log1.train_losses, "finetune": log2.train_losses}
    return preds, losses, []


def _fit_eval_baseline(plan, ds):
    train_x = flatten_samples(ds.train)
    train_y = labels_of(ds.train)
    test_x = flatten_samples(ds.test)
    losses = {}
    if plan.method == "np":
        model = baselines.np_fit(ds.train, ds.mean_alice)
        preds = model.predict_samples(ds.test)
    elif plan.method == "knn":
        preds = baselines.knn_predict(train_x, train_y, test_x, plan.knn_k)
    elif plan.method == "logistic":
        model, log = baselines.logistic_train(train_x, train_y, plan.schedule,
                                              seed=ds.config.seed)
        preds = model.predict(test_x)
        losses = {"train": log.train_losses}
    else:
        val_x = flatten_samples(ds.validation) if ds.validation else None
        val_y = labels_of(ds.validation) if ds.validation else None
        model = baselines.svm_train(train_x, train_y, val_x, val_y)
        preds = model.predict(test_x)
    return preds, losses


def run_single_trial(plan, index):
    """Generate trial `index`, fit the plan's method, score the test split."""
    plan.validate()
    seed = derive_seed(plan.master_seed, index)
    config = replace(plan.sim, seed=seed)
    with threadpool_limits(limits=1):
        ds = generate_trial(config)
        test_y = labels_of(ds.test)
        t0 = time.perf_counter()
        epoch_metrics = []
        if plan.method in ZOO:
            if plan.semi:
                preds, losses, epoch_metrics = _fit_eval_semi(plan, ds, seed)
            else:
                preds, losses, epoch_metrics = _fit_eval_dnn(plan, ds, seed)
        else:
            preds, losses = _fit_eval_baseline(plan, ds)
        wall = time.perf_counter() - t0
    report = compute_metrics(preds, test_y)
    report.wall_time_s = wall
    report.per_epoch_losses = losses
    return TrialResult(trial=index, seed=seed, report=report,
                       epoch_metrics=epoch_metrics)


def _trial_worker(args):
    plan, index = args
    return run_single_trial(plan, index)


def run_experiment(plan, jobs=1):
    """All trials of a plan; results identical for any `jobs`."""
    plan.validate()
    indices = list(range(plan.trials))
    if jobs > 1 and plan.trials > 1:
        import multiprocessing as mp
        ctx = mp.get_context("spawn")
        with ProcessPoolExecutor(max_workers=min(jobs, plan.trials),
                                 mp_context=ctx) as pool:
            results = list(pool.map(_trial_worker, [(plan, i) for i in indices]))
    else:
        results = [run_single_trial(plan, i) for i in indices]
    results.sort(key=lambda r: r.trial)
    return ExperimentResult(
        plan=plan,
        trials=results,
        mean_accuracy=float(np.mean([r.report.accuracy for r in results])),
        mean_far=float(np.mean([r.report.false_alarm_rate for r in results])),
        mean_mdr=float(np.mean([r.report.miss_detection_rate for r in results])),
    )


# ---------------------------------------------------------------------------
# reproduction targets
# ---------------------------------------------------------------------------

def trial_csv_row(label, trial_result, n_train_per_class, epochs, wall=""):
    r = trial_result.report
    return {
        "method": label,
        "trial": trial_result.trial,
        "n_train_per_class": n_train_per_class,
        "accuracy": f"{r.accuracy:.6f}",
        "far": f"{r.false_alarm_rate:.6f}",
        "mdr": f"{r.miss_detection_rate:.6f}",
        "wall_time_s": wall,
        "epochs": epochs,
        "seed": trial_result.seed,
    }


def _write_csv(path, fields, rows):
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=fields)
        w.writeheader()
        w.writerows(rows)


def _plan_epochs(plan):
    if plan.method in ("np", "knn", "svm"):
        return 0
    if plan.semi:
        return plan.semispec.pretrain.epochs + plan.semispec.finetune.epochs
    return plan.schedule.epochs


def _run_plans(plans, jobs, timing_lines):
    """Run plans serially (each may parallelize trials); collect rows."""
    out = []
    for plan in plans:
        res = run_experiment(plan, jobs=jobs)
        for tr in res.trials:
            timing_lines.append(f"{plan.label}\ttrial={tr.trial}\t"
                                f"wall_time_s={tr.report.wall_time_s:.3f}")
        out.append(res)
    return out


def reproduce(target, trials, out_dir, master_seed=0, jobs=1, sim=None,
              schedule=None, semispec=None):
    """Run one reproduction target and write CSVs plus figures to out_dir.

    All CSV output is byte-deterministic for a given master seed; wall
    times go to a separate .log sidecar (and the per-trial CSV keeps an
    empty wall_time_s column so the schema stays fixed).
    Returns the list of files written.
    """
    if target not in REPRODUCE_TARGETS:
        raise ValueError(f"unknown target {target!r}; known: "
                         f"{', '.join(REPRODUCE_TARGETS)}")
    os.makedirs(out_dir, exist_ok=True)
    stem = target.replace("-", "_")
    base_sim = sim if sim is not None else SimConfig()
    overrides = {}
    if schedule is not None:
        overrides["schedule"] = schedule
    if semispec is not None:
        overrides["semispec"] = semispec
    timing_lines = []
    written = []

    def path(suffix):
        p = os.path.join(out_dir, f"{stem}{suffix}")
        written.append(p)
        return p

    from . import plots

    if target == "table-sim":
        plans = [ExperimentPlan(method=m, trials=trials, master_seed=master_seed,
                                sim=base_sim, **overrides)
                 for m in TABLE_SIM_METHODS]
        results = _run_plans(plans, jobs, timing_lines)
        agg_rows, trial_rows = [], []
        for plan, res in zip(plans, results):
            agg_rows.append({
                "method": plan.label,
                "accuracy_pct": f"{100 * res.mean_accuracy:.4f}",
                "far": f"{res.mean_far:.6f}",
                "mdr": f"{res.mean_mdr:.6f}",
                "trials": trials,
                "n_train_per_class": base_sim.n_train_per_class,
                "seed": master_seed,
            })
            trial_rows += [trial_csv_row(plan.label, t, base_sim.n_train_per_class,
                                         _plan_epochs(plan)) for t in res.trials]
        _write_csv(path(".csv"), ("method", "accuracy_pct", "far", "mdr", "trials",
                                  "n_train_per_class", "seed"), agg_rows)
        _write_csv(path("_trials.csv"), CSV_FIELDS, trial_rows)
        plots.plot_method_table(agg_rows, path(".png"),
                                title="Authentication accuracy, simulation dataset")

    elif target == "table-semi":
        semi_sim = replace(base_sim,
                           n_train_per_class=base_sim.n_labeled_per_class,
                           n_unlabeled=1000)
        plans = []
        for m in TABLE_SEMI_METHODS:
            plans.append(ExperimentPlan(method=m, semi=True, trials=trials,
                                        master_seed=master_seed, sim=semi_sim,
                                        **overrides))
            plans.append(ExperimentPlan(method=m, semi=False, trials=trials,
                                        master_seed=master_seed, sim=semi_sim,
                                        **overrides))
        results = _run_plans(plans, jobs, timing_lines)
        agg_rows, trial_rows = [], []
        for plan, res in zip(plans, results):
            agg_rows.append({
                "method": plan.label,
                "accuracy_pct": f"{100 * res.mean_accuracy:.4f}",
                "far": f"{res.mean_far:.6f}",
                "mdr": f"{res.mean_mdr:.6f}",
                "n_labeled_per_class": semi_sim.n_train_per_class,
                "n_unlabeled": semi_sim.n_unlabeled,
                "trials": trials,
                "seed": master_seed,
            })
            trial_rows += [trial_csv_row(plan.label, t, semi_sim.n_train_per_class,
                                         _plan_epochs(plan)) for t in res.trials]
        _write_csv(path(".csv"), ("method", "accuracy_pct", "far", "mdr",
                                  "n_labeled_per_class", "n_unlabeled", "trials",
                                  "seed"), agg_rows)
        _write_csv(path("_trials.csv"), CSV_FIELDS, trial_rows)
        plots.plot_semi_table(agg_rows, path(".png"))

    elif target == "fig-falsemiss":
        plans = [ExperimentPlan(method=m, trials=trials, master_seed=master_seed,
                                sim=base_sim, epoch_eval=FALSEMISS_EPOCHS,
                                **overrides)
                 for m in FIG_FALSEMISS_METHODS]
        results = _run_plans(plans, jobs, timing_lines)
        curve_rows, trial_rows = [], []
        for plan, res in zip(plans, results):
            by_epoch = {}
            for tr in res.trials:
                for epoch, far, mdr, acc in tr.epoch_metrics:
                    by_epoch.setdefault(epoch, []).append((far, mdr, acc))
            for epoch in sorted(by_epoch):
                vals = np.array(by_epoch[epoch])
                curve_rows.append({
                    "method": plan.label,
                    "epoch": epoch,
                    "far": f"{vals[:, 0].mean():.6f}",
                    "mdr": f"{vals[:, 1].mean():.6f}",
                    "accuracy": f"{vals[:, 2].mean():.6f}",
                })
            trial_rows += [trial_csv_row(plan.label, t, base_sim.n_train_per_class,
                                         _plan_epochs(plan)) for t in res.trials]
        _write_csv(path(".csv"), ("method", "epoch", "far", "mdr", "accuracy"),
                   curve_rows)
        _write_csv(path("_trials.csv"), CSV_FIELDS, trial_rows)
        plots.plot_falsemiss(curve_rows, path(".png"))

    else:   # fig-samples
        agg_rows, trial_rows = [], []
        for method in FIG_SAMPLES_METHODS:
            for size in FIG_SAMPLES_SIZES:
                plan = ExperimentPlan(method=method, trials=trials,
                                      master_seed=master_seed,
                                      sim=replace(base_sim, n_train_per_class=size),
                                      **overrides)
                (res,) = _run_plans([plan], jobs, timing_lines)
                agg_rows.append({
                    "method": plan.label,
                    "n_train_per_class": size,
                    "accuracy_pct": f"{100 * res.mean_accuracy:.4f}",
                    "far": f"{res.mean_far:.6f}",
                    "mdr": f"{res.mean_mdr:.6f}",
                    "trials": trials,
                    "seed": master_seed,
                })
                trial_rows += [trial_csv_row(plan.label, t, size, _plan_epochs(plan))
                               for t in res.trials]
        _write_csv(path(".csv"), ("method", "n_train_per_class", "accuracy_pct",
                                  "far", "mdr", "trials", "seed"), agg_rows)
        _write_csv(path("_trials.csv"), CSV_FIELDS, trial_rows)
        plots.plot_samples(agg_rows, path(".png"))

    with open(path("_timings.log"), "w") as f:
        f.write("\n".join(timing_lines))
        if timing_lines:
            f.write("\n")
    return written

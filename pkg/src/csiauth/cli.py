"""Command-line interface.

Subcommands: gen, train, eval, pseudolabel, semitrain, baseline, reproduce.
Exit codes: 0 success, 2 usage error, 3 data-format error, 4 numeric
failure (non-finite loss).
"""

import argparse
import json
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import baselines, datafile
from .chansim import SimConfig, flatten_samples, generate_trial, labels_of
from .datafile import DataFormatError
from .experiments import (CSV_FIELDS, REPRODUCE_TARGETS, predict_network,
                          reproduce, trial_csv_row, TrialResult)
from .metrics import compute_metrics
from .models import (ZOO, ConfigParseError, ShapeError, infer_shapes,
                     load_network, named_config, network_input, parse_config,
                     build_network, save_checkpoint)
from .nn.train import NumericError, TrainSchedule, sgd_train
from .rng import substream
from .semisup import SemiSupSpec, run_pipeline, semi_kmeans

EXIT_USAGE = 2
EXIT_FORMAT = 3
EXIT_NUMERIC = 4


def _load_sim_config(path, seed=None):
    if path is None:
        cfg = SimConfig()
    else:
        with open(path) as f:
            try:
                cfg = SimConfig(**json.load(f))
            except (TypeError, json.JSONDecodeError) as e:
                raise DataFormatError(f"{path}: bad simulation config ({e})") from None
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    cfg.validate()
    return cfg


def _resolve_model(spec_str):
    if spec_str in ZOO:
        return named_config(spec_str)
    if os.path.isfile(spec_str):
        with open(spec_str) as f:
            return parse_config(f.read(), name=os.path.basename(spec_str))
    raise ValueError(f"model {spec_str!r} is neither a built-in name "
                     f"({', '.join(sorted(ZOO))}) nor a config file")


def _schedule_from_args(args, defaults=TrainSchedule()):
    return TrainSchedule(
        epochs=args.epochs if args.epochs is not None else defaults.epochs,
        batch_size=args.batch if args.batch is not None else defaults.batch_size,
        initial_lr=args.lr if args.lr is not None else defaults.initial_lr,
        halving_period=defaults.halving_period,
    )


def _write_single_row_csv(path, row):
    import csv
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=CSV_FIELDS)
        w.writeheader()
        w.writerow(row)


def cmd_gen(args):
    cfg = _load_sim_config(args.config, args.seed)
    ds = generate_trial(cfg)
    datafile.write_dataset(args.out, ds)
    print(f"wrote trial dataset to {args.out} "
          f"(train={len(ds.train)}, validation={len(ds.validation)}, "
          f"test={len(ds.test)}, unlabeled={len(ds.unlabeled)})")


def cmd_train(args):
    ds = datafile.read_dataset(args.dataset)
    seed = args.seed if args.seed is not None else ds.config.seed
    config = infer_shapes(_resolve_model(args.model),
                          ds.config.m_b, ds.config.m_a, ds.config.n_tones)
    net = build_network(config, seed)
    schedule = _schedule_from_args(args)
    x = network_input(net, ds.train)
    y = labels_of(ds.train)
    val_x = network_input(net, ds.validation) if ds.validation else None
    val_y = labels_of(ds.validation) if ds.validation else None
    log = sgd_train(net, x, y, schedule, substream(seed, 100),
                    val_inputs=val_x, val_labels=val_y)
    save_checkpoint(args.out, config, net.store)
    final_val = f", val loss {log.val_losses[-1]:.4f}" if log.val_losses else ""
    print(f"trained {config.name} for {schedule.epochs} epochs "
          f"(final train loss {log.train_losses[-1]:.4f}{final_val}); "
          f"checkpoint: {args.out}")


def cmd_eval(args):
    ds = datafile.read_dataset(args.dataset)
    net = load_network(args.ckpt)
    t0 = time.perf_counter()
    preds = predict_network(net, ds.test)
    wall = time.perf_counter() - t0
    report = compute_metrics(preds, labels_of(ds.test))
    report.wall_time_s = wall
    row = trial_csv_row(net.config.name,
                        TrialResult(trial=0, seed=ds.config.seed, report=report),
                        ds.config.n_train_per_class, epochs=0,
                        wall=f"{wall:.3f}")
    _write_single_row_csv(args.out, row)
    print(f"accuracy={report.accuracy:.4f} far={report.false_alarm_rate:.4f} "
          f"mdr={report.miss_detection_rate:.4f} (n={report.n_test}) -> {args.out}")


def cmd_pseudolabel(args):
    labeled = datafile.read_records(args.labeled)
    unlabeled = datafile.read_records(args.unlabeled)
    if (labeled.m_b, labeled.m_a, labeled.n_tones) != \
            (unlabeled.m_b, unlabeled.m_a, unlabeled.n_tones):
        raise DataFormatError("labeled and unlabeled files have different dimensions")
    lab_x = flatten_samples(labeled.samples)
    lab_y = labels_of(labeled.samples)
    unl_x = flatten_samples(unlabeled.samples)
    result = semi_kmeans(lab_x, lab_y, unl_x)
    pseudo_samples = [replace_label(s, int(l))
                      for s, l in zip(unlabeled.samples, result.pseudo_labels)]
    n_pairs = labeled.m_b * labeled.m_a
    centers = [_unflatten(c, n_pairs, labeled.n_tones) for c in result.final_centers]
    datafile.write_records(args.out, labeled.m_b, labeled.m_a, labeled.n_tones,
                           pseudo_samples, mean_alice=centers[0],
                           mean_eve=centers[1], pseudo=True)
    n_eve = int(result.pseudo_labels.sum())
    print(f"pseudo-labeled {len(pseudo_samples)} samples "
          f"({len(pseudo_samples) - n_eve} Alice / {n_eve} Eve, "
          f"{result.iterations} k-means passes) -> {args.out}")


def replace_label(sample, label):
    from .chansim import ChannelSample
    return ChannelSample(values=sample.values, label=label)


def _unflatten(flat, n_pairs, n_tones):
    arr = np.asarray(flat).reshape(n_pairs, n_tones, 2)
    return arr[..., 0] + 1j * arr[..., 1]


def cmd_semitrain(args):
    labeled = datafile.read_records(args.labeled)
    unlabeled = datafile.read_records(args.unlabeled)
    if (labeled.m_b, labeled.m_a, labeled.n_tones) != \
            (unlabeled.m_b, unlabeled.m_a, unlabeled.n_tones):
        raise DataFormatError("labeled and unlabeled files have different dimensions")
    config = infer_shapes(_resolve_model(args.model),
                          labeled.m_b, labeled.m_a, labeled.n_tones)
    spec = SemiSupSpec()
    dnn1, dnn2, pseudo, _ = run_pipeline(config, labeled.samples,
                                         unlabeled.samples, spec, args.seed)
    save_checkpoint(args.out, config, dnn2.store)
    if args.pretrain_out:
        save_checkpoint(args.pretrain_out, config, dnn1.store)
    print(f"semi-supervised {config.name}: {len(labeled.samples)} labeled + "
          f"{len(unlabeled.samples)} pseudo-labeled; checkpoint: {args.out}")


def cmd_baseline(args):
    ds = datafile.read_dataset(args.dataset)
    train_x = flatten_samples(ds.train)
    train_y = labels_of(ds.train)
    test_x = flatten_samples(ds.test)
    test_y = labels_of(ds.test)
    t0 = time.perf_counter()
    epochs = 0
    if args.method == "np":
        model = baselines.np_fit(ds.train, ds.mean_alice)
        preds = model.predict_samples(ds.test)
    elif args.method == "knn":
        preds = baselines.knn_predict(train_x, train_y, test_x, args.k)
    elif args.method == "logistic":
        schedule = TrainSchedule()
        model, _ = baselines.logistic_train(train_x, train_y, schedule,
                                            seed=ds.config.seed)
        preds = model.predict(test_x)
        epochs = schedule.epochs
    else:
        val_x = flatten_samples(ds.validation) if ds.validation else None
        val_y = labels_of(ds.validation) if ds.validation else None
        model = baselines.svm_train(train_x, train_y, val_x, val_y)
        preds = model.predict(test_x)
    wall = time.perf_counter() - t0
    report = compute_metrics(preds, test_y)
    report.wall_time_s = wall
    row = trial_csv_row(args.method,
                        TrialResult(trial=0, seed=ds.config.seed, report=report),
                        ds.config.n_train_per_class, epochs=epochs,
                        wall=f"{wall:.3f}")
    _write_single_row_csv(args.out, row)
    print(f"{args.method}: accuracy={report.accuracy:.4f} "
          f"far={report.false_alarm_rate:.4f} mdr={report.miss_detection_rate:.4f} "
          f"-> {args.out}")


def cmd_reproduce(args):
    sim = _load_sim_config(args.config) if args.config else None
    files = reproduce(args.target, args.trials, args.out,
                      master_seed=args.seed, jobs=args.jobs, sim=sim)
    for f in files:
        print(f"wrote {f}")


def build_parser():
    p = argparse.ArgumentParser(
        prog="csiauth",
        description="CSI-based physical-layer authentication toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a simulated trial dataset")
    g.add_argument("--config", help="simulation config JSON (defaults: paper setup)")
    g.add_argument("--seed", type=int, default=None, help="trial seed")
    g.add_argument("--out", required=True, help="output dataset directory")
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train a network on a dataset")
    t.add_argument("--dataset", required=True, help="dataset directory")
    t.add_argument("--model", required=True,
                   help="built-in name (e.g. CRNN-4) or config file")
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--epochs", type=int, default=None)
    t.add_argument("--batch", type=int, default=None)
    t.add_argument("--lr", type=float, default=None)
    t.add_argument("--seed", type=int, default=None,
                   help="init/shuffle seed (default: dataset seed)")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint on a dataset's test split")
    e.add_argument("--dataset", required=True)
    e.add_argument("--ckpt", required=True)
    e.add_argument("--out", required=True, help="output CSV")
    e.set_defaults(func=cmd_eval)

    pl = sub.add_parser("pseudolabel", help="assign k-means pseudo labels")
    pl.add_argument("--labeled", required=True, help="labeled .csia file")
    pl.add_argument("--unlabeled", required=True, help="unlabeled .csia file")
    pl.add_argument("--out", required=True, help="output .csia file")
    pl.set_defaults(func=cmd_pseudolabel)

    st = sub.add_parser("semitrain", help="pseudo-label, pre-train, fine-tune")
    st.add_argument("--labeled", required=True, help="labeled .csia file")
    st.add_argument("--unlabeled", required=True, help="unlabeled .csia file")
    st.add_argument("--model", required=True)
    st.add_argument("--out", required=True, help="checkpoint path (DNN2)")
    st.add_argument("--pretrain-out", default=None, help="optional DNN1 checkpoint")
    st.add_argument("--seed", type=int, default=0)
    st.set_defaults(func=cmd_semitrain)

    b = sub.add_parser("baseline", help="run a classical baseline")
    b.add_argument("--method", required=True, choices=("np", "knn", "logistic", "svm"))
    b.add_argument("--dataset", required=True)
    b.add_argument("--out", required=True, help="output CSV")
    b.add_argument("--k", type=int, default=5, help="neighbors for knn")
    b.set_defaults(func=cmd_baseline)

    r = sub.add_parser("reproduce", help="reproduce a paper table or figure")
    r.add_argument("--target", required=True, choices=REPRODUCE_TARGETS)
    r.add_argument("--trials", type=int, default=10)
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--seed", type=int, default=0, help="master seed")
    r.add_argument("--jobs", type=int, default=1, help="parallel trial workers")
    r.add_argument("--config", help="simulation config JSON override")
    r.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (DataFormatError, ConfigParseError, ShapeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FORMAT
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())

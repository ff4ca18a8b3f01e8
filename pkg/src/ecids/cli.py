"""Command-line workbench: simulate, attack, train, detect, evaluate.

Every command writes a manifest JSON next to its outputs (resolved
configuration, seeds, file paths, version, wall-clock duration) so runs
can be audited and replayed.  Outputs are deterministic for fixed seeds;
manifests are the only files carrying timestamps.

Exit codes: 0 success, 1 validation or usage error, 2 I/O error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .attacks import SCENARIO_PRESETS, AttackSpec, preset
from .detection import (
    Threshold,
    classify_batch,
    error_histogram,
    fit_threshold,
    write_histogram_csv,
    write_report_csv,
    write_report_json,
)
from .federated import FederationConfig, mean_round_losses, run_federation
from .model import (
    CheckpointError,
    ModelConfig,
    init,
    load_checkpoint,
    reconstruction_errors,
    save_checkpoint,
)
from .pipeline import fit_normalizer, split_train_val, window
from .scoring import LoadedModel, compare_models, detect_series, evaluate_matrix, score_series
from .simulator import (
    CsvFormatError,
    SimulationConfig,
    SimulationError,
    read_csv,
    simulate,
    write_csv,
)
from .training import TrainingConfig, TrainingError, train

log = logging.getLogger("ecids")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_NUMERICAL = 3

_DTYPES = {"float32": np.float32, "float64": np.float64}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 on usage errors (stable CI contract)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# ── Manifest ─────────────────────────────────────────────────────────────


def _write_manifest(path: Path, command: str, args: dict, outputs: list, started: float) -> None:
    manifest = {
        "tool": "ecids",
        "version": __version__,
        "command": command,
        "arguments": args,
        "outputs": [str(o) for o in outputs],
        "duration_s": round(time.time() - started, 3),
        "created_unix": round(started, 3),
    }
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, default=str)


def _load_sim_config(path: str | None, seed: int | None, duration_h: float | None) -> SimulationConfig:
    if path:
        with open(path) as fh:
            config = SimulationConfig.from_dict(json.load(fh))
    else:
        config = SimulationConfig()
    if seed is not None:
        config = config.with_seed(seed)
    if duration_h is not None:
        config = SimulationConfig.from_dict({**config.to_dict(), "duration_h": duration_h})
    return config


def _parse_attack(value: str) -> AttackSpec:
    if value in SCENARIO_PRESETS:
        return preset(value)
    if os.path.exists(value):
        with open(value) as fh:
            return AttackSpec.from_dict(json.load(fh))
    raise ValueError(
        f"unknown scenario {value!r} and no such spec file; valid presets: "
        + ", ".join(SCENARIO_PRESETS)
    )


def _load_model(path: str) -> LoadedModel:
    params, stats, extra = load_checkpoint(path)
    raw = extra.get("threshold")
    if raw is None:
        sidecar = Path(str(path) + ".threshold.json")
        if not sidecar.exists():
            raise CheckpointError(f"no detection threshold stored with {path}")
        with open(sidecar) as fh:
            raw = json.load(fh)
    return LoadedModel(
        name=Path(path).stem, params=params, stats=stats, threshold=Threshold.from_dict(raw)
    )


# ── Commands ─────────────────────────────────────────────────────────────


def cmd_simulate(args) -> int:
    started = time.time()
    config = _load_sim_config(args.config, args.seed, args.duration_h)
    attack = None
    if args.attack:
        attack = _parse_attack(args.attack)
        if args.attack_start is not None or args.attack_duration is not None:
            attack = attack.with_window(
                args.attack_start if args.attack_start is not None else attack.start_s,
                args.attack_duration if args.attack_duration is not None else attack.duration_s,
            )
    series = simulate(config, attack=attack)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(series, out)
    log.info("wrote %d frames to %s", len(series), out)
    _write_manifest(
        out.with_suffix(out.suffix + ".manifest.json"),
        "simulate",
        {"config": config.to_dict(), "attack": attack.to_dict() if attack else None},
        [out],
        started,
    )
    return EXIT_OK


def _train_on_series(series, args):
    """Shared fit path for cmd_train: returns (params, report, stats, threshold)."""
    stats = fit_normalizer(series)
    dataset = window(series, stats, T=args.window)
    train_ds, val_ds = split_train_val(dataset, fraction=args.val_split)
    model_config = ModelConfig(d=dataset.d, T=args.window)
    params = init(model_config, seed=args.seed, dtype=_DTYPES[args.dtype])
    tcfg = TrainingConfig(
        max_epochs=args.epochs,
        batch_size=args.batch,
        learning_rate=args.lr,
        patience=min(args.patience, args.epochs),
        seed=args.seed,
    )
    params, report = train(params, train_ds, val_ds, tcfg, log=log.info)
    errors = reconstruction_errors(params, train_ds.tensor)
    threshold = fit_threshold(errors)
    return params, report, stats, threshold, errors


def cmd_train(args) -> int:
    started = time.time()
    series = read_csv(args.data)
    params, report, stats, threshold, _ = _train_on_series(series, args)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(params, stats, out, extra={"threshold": threshold.to_dict()})
    with open(str(out) + ".threshold.json", "w") as fh:
        json.dump(threshold.to_dict(), fh, indent=2)
    report_path = out.with_suffix(".training.csv")
    with open(report_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss"])
        for epoch, tr_loss, val_loss in report.rows():
            writer.writerow([epoch, repr(tr_loss), repr(val_loss)])
    log.info(
        "stopped at epoch %d (best %d), threshold %.6g",
        report.stopped_epoch,
        report.best_epoch,
        threshold.tau,
    )
    _write_manifest(
        out.with_suffix(out.suffix + ".manifest.json"),
        "train",
        {
            "data": args.data,
            "epochs": args.epochs,
            "batch": args.batch,
            "patience": args.patience,
            "seed": args.seed,
            "dtype": args.dtype,
            "threshold": threshold.to_dict(),
        },
        [out, report_path],
        started,
    )
    return EXIT_OK


def cmd_detect(args) -> int:
    started = time.time()
    model = _load_model(args.model)
    series = read_csv(args.data)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    scenario = args.scenario or Path(args.data).stem
    report = detect_series(model, series, scenario)

    errors_path = out_dir / "window_errors.csv"
    t0 = series.timestamps_s[0]
    with open(errors_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["window_start_index", "timestamp_s", "error", "flag", "label"])
        for i, (err, flag, label) in enumerate(zip(report.errors, report.flags, report.labels)):
            writer.writerow([i, repr(float(t0 + i * series.step_s)), repr(float(err)), int(flag), int(label)])

    report_csv = out_dir / "report.csv"
    write_report_csv([report], report_csv)
    write_report_json([report], out_dir / "report.json")
    hist = error_histogram(report.errors, model.threshold, bins=args.bins)
    write_histogram_csv(hist, out_dir / "histogram.csv")

    log.info(
        "%s: precision %.4f recall %.4f f1 %.4f (flagged %d/%d)",
        scenario,
        report.precision,
        report.recall,
        report.f1,
        int(report.flags.sum()),
        len(report.flags),
    )
    _write_manifest(
        out_dir / "manifest.json",
        "detect",
        {"model": args.model, "data": args.data, "scenario": scenario},
        [errors_path, report_csv],
        started,
    )
    return EXIT_OK


def cmd_fedtrain(args) -> int:
    started = time.time()
    if args.config:
        with open(args.config) as fh:
            fcfg = FederationConfig.from_dict(json.load(fh))
    else:
        fcfg = FederationConfig()
    params, rounds_log, stats, threshold = run_federation(fcfg, log=log.info)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(params, stats, out, extra={"threshold": threshold.to_dict()})
    with open(str(out) + ".threshold.json", "w") as fh:
        json.dump(threshold.to_dict(), fh, indent=2)
    rounds_path = out.with_suffix(".rounds.csv")
    with open(rounds_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["round", "client_id", "local_loss", "sample_count"])
        for entry in rounds_log:
            writer.writerow(
                [entry["round"], entry["client_id"], repr(entry["local_loss"]), entry["sample_count"]]
            )
    log.info("federation finished: %s", mean_round_losses(rounds_log))
    _write_manifest(
        out.with_suffix(out.suffix + ".manifest.json"),
        "fedtrain",
        {"federation": fcfg.to_dict()},
        [out, rounds_path],
        started,
    )
    return EXIT_OK


def cmd_evaluate(args) -> int:
    started = time.time()
    models = [_load_model(p) for p in args.model]
    scenario_names = list(SCENARIO_PRESETS) if args.scenarios == ["all"] else args.scenarios
    for name in scenario_names:
        preset(name)  # validate early
    sim_config = _load_sim_config(args.config, None, None)
    results, failures = evaluate_matrix(models, scenario_names, sim_config, args.test_seed)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    multi = len(models) > 1
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["scenario", "precision", "recall", "f1"]
        writer.writerow((["model"] + header) if multi else header)
        for model_name, report in results:
            row = [report.scenario, f"{report.precision:.6f}", f"{report.recall:.6f}", f"{report.f1:.6f}"]
            writer.writerow(([model_name] + row) if multi else row)
    for model_name, scenario, message in failures:
        log.error("pair (%s, %s) failed: %s", model_name, scenario, message)
    _write_manifest(
        out.with_suffix(out.suffix + ".manifest.json"),
        "evaluate",
        {"models": list(args.model), "scenarios": scenario_names, "test_seed": args.test_seed},
        [out],
        started,
    )
    return EXIT_OK if not failures else EXIT_NUMERICAL


def cmd_report(args) -> int:
    started = time.time()
    model = _load_model(args.model)
    series = read_csv(args.data)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    errors, labels = score_series(model.params, model.stats, series)
    flags = classify_batch(errors, model.threshold)

    hist = error_histogram(errors, model.threshold, bins=args.bins)
    write_histogram_csv(hist, out_dir / "histogram.csv")
    overlay_path = out_dir / "overlay.csv"
    t0 = series.timestamps_s[0]
    with open(overlay_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp_s", "error", "threshold", "flag", "label"])
        for i, (err, flag, label) in enumerate(zip(errors, flags, labels)):
            writer.writerow(
                [repr(float(t0 + i * series.step_s)), repr(float(err)), repr(model.threshold.tau), int(flag), int(label)]
            )
    _write_manifest(
        out_dir / "manifest.json",
        "report",
        {"model": args.model, "data": args.data},
        [overlay_path],
        started,
    )
    return EXIT_OK


def cmd_reproduce(args) -> int:
    """Full pipeline with fixed seeds: simulate, train, attack, evaluate,
    federate, compare.  See the README for the output layout."""
    started = time.time()
    out_dir = Path(args.out_dir)
    datasets = out_dir / "datasets"
    models_dir = out_dir / "models"
    reports = out_dir / "reports"
    for d in (datasets, models_dir, reports):
        d.mkdir(parents=True, exist_ok=True)

    base = args.seed
    train_seed = base
    heldout_seed = base + 1
    test_seed = base + 2
    client_seeds = [base + 101 * (k + 1) for k in range(args.clients)]
    dtype = _DTYPES[args.dtype]

    sim24 = SimulationConfig(seed=train_seed)
    log.info("[1/6] simulating training series (%.0f h) and heldout day", args.train_hours)
    train_series = simulate(_load_sim_config(None, train_seed, args.train_hours))
    write_csv(train_series, datasets / "normal_train.csv")
    heldout_series = simulate(sim24.with_seed(heldout_seed))
    write_csv(heldout_series, datasets / "normal_heldout.csv")

    log.info("[2/6] training centralized model")
    stats = fit_normalizer(train_series)
    dataset = window(train_series, stats)
    train_ds, val_ds = split_train_val(dataset)
    tcfg = TrainingConfig(max_epochs=args.epochs, patience=5, seed=train_seed)
    params = init(ModelConfig(), seed=train_seed, dtype=dtype)
    params, report = train(params, train_ds, val_ds, tcfg, log=log.info)
    train_errors = reconstruction_errors(params, train_ds.tensor)
    threshold = fit_threshold(train_errors)
    central_path = models_dir / "central.json"
    save_checkpoint(params, stats, central_path, extra={"threshold": threshold.to_dict()})
    with open(str(central_path) + ".threshold.json", "w") as fh:
        json.dump(threshold.to_dict(), fh, indent=2)
    with open(models_dir / "central_training.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss"])
        for epoch, tr_loss, val_loss in report.rows():
            writer.writerow([epoch, repr(tr_loss), repr(val_loss)])
    central = LoadedModel("central", params, stats, threshold)
    write_histogram_csv(
        error_histogram(train_errors, threshold, bins=60), reports / "histogram_train.csv"
    )

    log.info("[3/6] scoring heldout normal day")
    heldout_errors, _ = score_series(params, stats, heldout_series)
    heldout_flagged = float(np.mean(classify_batch(heldout_errors, threshold)))
    with open(reports / "heldout.json", "w") as fh:
        json.dump(
            {
                "flagged_fraction": heldout_flagged,
                "threshold": threshold.tau,
                "n_windows": len(heldout_errors),
            },
            fh,
            indent=2,
        )
    log.info("heldout flagged fraction: %.4f", heldout_flagged)

    log.info("[4/6] simulating and evaluating the ten attack scenarios")
    scenario_rows = []
    for name, spec in SCENARIO_PRESETS.items():
        attacked = simulate(sim24.with_seed(test_seed), attack=spec)
        write_csv(attacked, datasets / f"attack_{name.replace('.', '_')}.csv")
        scenario_rows.append(detect_series(central, attacked, name))
        log.info(
            "  %-7s precision %.4f recall %.4f f1 %.4f",
            name,
            scenario_rows[-1].precision,
            scenario_rows[-1].recall,
            scenario_rows[-1].f1,
        )
    write_report_csv(scenario_rows, reports / "summary.csv")
    write_report_json(scenario_rows, reports / "summary.json")

    log.info("[5/6] federated training (%d clients, %d rounds)", args.clients, args.rounds)
    fcfg = FederationConfig(
        num_clients=args.clients,
        num_rounds=args.rounds,
        local_epochs_per_round=args.local_epochs,
        client_seeds=tuple(client_seeds),
        training=TrainingConfig(max_epochs=args.epochs, patience=5, seed=train_seed),
        simulation=sim24,
        dtype=args.dtype,
    )
    fed_params, rounds_log, fed_stats, fed_threshold = run_federation(fcfg, log=log.info)
    fed_path = models_dir / "federated.json"
    save_checkpoint(fed_params, fed_stats, fed_path, extra={"threshold": fed_threshold.to_dict()})
    with open(str(fed_path) + ".threshold.json", "w") as fh:
        json.dump(fed_threshold.to_dict(), fh, indent=2)
    with open(models_dir / "federated_rounds.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["round", "client_id", "local_loss", "sample_count"])
        for entry in rounds_log:
            writer.writerow(
                [entry["round"], entry["client_id"], repr(entry["local_loss"]), entry["sample_count"]]
            )

    log.info("[6/6] comparing centralized vs federated models")
    federated = LoadedModel("federated", fed_params, fed_stats, fed_threshold)
    comparison = compare_models(central, federated, list(SCENARIO_PRESETS), sim24, test_seed)
    with open(reports / "fed_compare.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(comparison[0].keys()))
        writer.writeheader()
        for row in comparison:
            writer.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in row.items()})

    summary = {
        "seed": base,
        "heldout_flagged_fraction": heldout_flagged,
        "threshold": threshold.tau,
        "federated_threshold": fed_threshold.tau,
        "recalls": {r.scenario: r.recall for r in scenario_rows},
        "mean_attack_errors": {
            r.scenario: float(r.errors[r.labels == 1].mean()) for r in scenario_rows
        },
        "fed_recall_deltas": {row["scenario"]: row["delta_recall"] for row in comparison},
        "round_mean_losses": mean_round_losses(rounds_log),
        "best_epoch": report.best_epoch,
        "stopped_epoch": report.stopped_epoch,
    }
    with open(out_dir / "reproduce_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    _write_manifest(
        out_dir / "manifest.json",
        "reproduce",
        {
            "seed": base,
            "epochs": args.epochs,
            "rounds": args.rounds,
            "clients": args.clients,
            "local_epochs": args.local_epochs,
            "train_hours": args.train_hours,
            "dtype": args.dtype,
        },
        [out_dir / "reproduce_summary.json"],
        started,
    )
    log.info("reproduce finished in %.1f min", (time.time() - started) / 60)
    return EXIT_OK


# ── Parser ───────────────────────────────────────────────────────────────


def _build_parser() -> _Parser:
    parser = _Parser(prog="ecids", description=__doc__)
    parser.add_argument("--version", action="version", version=f"ecids {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a community day, optionally under attack")
    p.add_argument("--out", required=True, help="output dataset CSV")
    p.add_argument("--config", help="simulation config JSON")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--duration-h", type=float, dest="duration_h", help="override duration in hours")
    p.add_argument("--attack", help="scenario preset name or attack spec JSON path")
    p.add_argument("--attack-start", type=float, dest="attack_start", help="window start (s)")
    p.add_argument("--attack-duration", type=float, dest="attack_duration", help="window length (s)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train the detector on a normal-operation dataset")
    p.add_argument("--data", required=True, help="training dataset CSV")
    p.add_argument("--out", required=True, help="output checkpoint path")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch", type=int, default=128)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--val-split", type=float, default=0.9, dest="val_split")
    p.add_argument("--dtype", choices=sorted(_DTYPES), default="float32")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="score a dataset with a trained model")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--data", required=True, help="dataset CSV to score")
    p.add_argument("--out-dir", required=True, dest="out_dir")
    p.add_argument("--scenario", help="scenario name for the report (defaults to file stem)")
    p.add_argument("--bins", type=int, default=50)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("fedtrain", help="train via federated averaging over simulated clients")
    p.add_argument("--config", help="federation config JSON (defaults: 3 clients, 3 rounds)")
    p.add_argument("--out", required=True, help="output checkpoint path")
    p.set_defaults(func=cmd_fedtrain)

    p = sub.add_parser("evaluate", help="run models against scenario presets")
    p.add_argument("--model", action="append", required=True, help="checkpoint path (repeatable)")
    p.add_argument("--scenarios", nargs="+", default=["all"])
    p.add_argument("--out", required=True, help="summary CSV path")
    p.add_argument("--test-seed", type=int, default=99, dest="test_seed")
    p.add_argument("--config", help="simulation config JSON for test days")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="emit plot-ready error data for a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out-dir", required=True, dest="out_dir")
    p.add_argument("--bins", type=int, default=50)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("reproduce", help="run the whole pipeline with fixed seeds")
    p.add_argument("--out-dir", required=True, dest="out_dir")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--rounds", type=int, default=3)
    p.add_argument("--clients", type=int, default=3)
    p.add_argument("--local-epochs", type=int, default=5, dest="local_epochs")
    p.add_argument("--train-hours", type=float, default=36.0, dest="train_hours")
    p.add_argument("--dtype", choices=sorted(_DTYPES), default="float32")
    p.set_defaults(func=cmd_reproduce)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("ECIDS_LOG", "INFO").upper(),
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    except (CsvFormatError, CheckpointError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO
    except (TrainingError, SimulationError, FloatingPointError, ArithmeticError) as exc:
        log.error("%s", exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

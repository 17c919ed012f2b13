"""Command line: ``softfail {simulate,dataset,train,evaluate,compare}``.

Every command reads the same config (preset plus optional ``--config`` file)
and works inside ``--out``; default file names chain the stages together.
Exit codes: 0 ok, 1 other error, 2 config, 3 calibration, 4 training
divergence, 5 I/O.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import aging, pipeline
from .config import load_config, save_config
from .dataset import load_dataset, save_dataset
from .errors import CalibrationError, ConfigError, DatasetError, SoftFailError, TrainingDivergence
from .forecaster import Trainer, TrainHistory, evaluate, load_model, save_model

log = logging.getLogger("softfail")

EXIT_OK, EXIT_OTHER, EXIT_CONFIG, EXIT_CALIBRATION, EXIT_DIVERGENCE, EXIT_IO = 0, 1, 2, 3, 4, 5

TRACE = "trace.csv"
DATASET = "dataset.csv"
MODEL = "model.json"
CHECKPOINT = "checkpoint.json"
HISTORY = "history.csv"


def _config(args):
    cfg = load_config(args.config, args.preset)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.out is not None:
        changes["out_dir"] = args.out
    if args.samples is not None:
        changes["weibull"] = dataclasses.replace(cfg.weibull, horizon_samples=args.samples)
    cfg = dataclasses.replace(cfg, **changes)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_config(out / f"config.{args.command}.json", cfg)
    return cfg, out


def _path(value, out: Path, default: str) -> Path:
    return Path(value) if value else out / default


def cmd_simulate(args) -> int:
    cfg, out = _config(args)
    result = pipeline.simulate(cfg)
    aging.write_trace(out / TRACE, result.trace)
    summary = result.summary()
    (out / "simulation.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    idx = summary["crossing_index"]
    if idx is None:
        print(f"{summary['samples']} samples, BER never exceeds "
              f"{cfg.hard_failure.ber_threshold:g}")
    else:
        print(f"{summary['samples']} samples; BER > {cfg.hard_failure.ber_threshold:g} first at "
              f"sample {idx} ({summary['crossing_fraction']:.4f} of horizon, gain drop "
              f"{summary['gain_drop_at_crossing_db']:.3f} dB)")
    print(f"SNR penalty {summary['snr_penalty_db']:.4f} dB, "
          f"{summary['drop_per_event_db']:.6g} dB per event -> {out / TRACE}")
    return EXIT_OK


def cmd_dataset(args) -> int:
    cfg, out = _config(args)
    if args.stride is not None:
        cfg = dataclasses.replace(cfg, window=dataclasses.replace(cfg.window, stride=args.stride))
    trace = aging.read_trace(_path(args.trace, out, TRACE))
    ds = pipeline.make_dataset(cfg, trace)
    save_dataset(_path(args.output, out, DATASET), ds)
    sp = ds.split
    print(f"{len(ds)} sequences of {cfg.window.length} samples "
          f"(train {sp.train[1] - sp.train[0]}, val {sp.val[1] - sp.val[0]}, "
          f"test {sp.test[1] - sp.test[0]})")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg, out = _config(args)
    ds = load_dataset(_path(args.dataset, out, DATASET))
    if args.epochs is not None:
        cfg = dataclasses.replace(cfg, train=dataclasses.replace(cfg.train, epochs=args.epochs))
    if args.learning_rate is not None:
        cfg = dataclasses.replace(cfg, train=dataclasses.replace(cfg.train,
                                                                 learning_rate=args.learning_rate))
    ckpt = out / CHECKPOINT
    if args.resume:
        trainer = Trainer.load_checkpoint(ckpt, ds)
        trainer.config = dataclasses.replace(trainer.config, epochs=cfg.train.epochs)
    else:
        trainer = pipeline.make_trainer(cfg, ds)
    try:
        best, history = trainer.run()
    finally:
        trainer.save_checkpoint(ckpt)
        trainer.history.to_csv(out / HISTORY)
    save_model(out / MODEL, best)
    print(f"{len(history.val_mse)} epochs; val MSE {history.val_mse[0]:.4e} -> "
          f"{history.val_mse[-1]:.4e}; best epoch {history.best_epoch}; "
          f"{sum(s for s in history.seconds if s == s):.1f} s")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg, out = _config(args)
    ds = load_dataset(_path(args.dataset, out, DATASET))
    if args.oracle:
        model, predictor = None, (lambda X: ds.part("test")[1])
    else:
        model, predictor = load_model(_path(args.model, out, MODEL)), None
    test = evaluate(model, ds, "test", predictor)
    test.to_csv(out / "per_pattern.csv")
    rows = ["range,mse_normalized,mse_ber"]
    rows.append(f"test,{test.aggregate_normalized!r},{test.aggregate_ber!r}")
    if not args.oracle:
        val = evaluate(model, ds, "val")
        rows.append(f"val,{val.aggregate_normalized!r},{val.aggregate_ber!r}")
    (out / "metrics.csv").write_text("\n".join(rows) + "\n")
    hist_path = out / HISTORY
    if hist_path.exists():
        TrainHistory.from_csv(hist_path).to_csv(out / "training_curve.csv")
    print(f"test MSE {test.aggregate_normalized:.4e} (normalised), "
          f"{test.aggregate_ber:.4e} (BER units) over {len(test.mse_normalized)} patterns")
    return EXIT_OK


def _policies(value: str | None):
    if value is None:
        return None, None
    thresholds, prediction = [], "none"
    for token in filter(None, (t.strip() for t in value.split(","))):
        if token in ("prediction", "model"):
            prediction = "model"
        elif token == "oracle":
            prediction = "oracle"
        else:
            try:
                thresholds.append(float(token.removesuffix("dB").strip()))
            except ValueError as exc:
                raise ConfigError(f"unknown policy {token!r}") from exc
    return tuple(thresholds), prediction


def cmd_compare(args) -> int:
    cfg, out = _config(args)
    trace = aging.read_trace(_path(args.trace, out, TRACE))
    thresholds, prediction = _policies(args.policies)
    prediction = prediction or cfg.policy.prediction
    model = load_model(_path(args.model, out, MODEL)) if prediction == "model" else None
    report = pipeline.compare(cfg, trace, model, thresholds, prediction)
    report.to_csv(out / "report.csv")
    text = report.to_text()
    (out / "report.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML/JSON config overriding the preset")
    common.add_argument("--preset", choices=("paper", "desk"), default="paper")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory (default from config)")
    common.add_argument("--samples", type=int, help="raw trace length")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="softfail", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="generate a calibrated BER trace")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("dataset", parents=[common], help="window a trace into sequences")
    p.add_argument("--trace")
    p.add_argument("--output")
    p.add_argument("--stride", type=int)
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("train", parents=[common], help="train the ED-LSTM")
    p.add_argument("--dataset")
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--resume", action="store_true", help="continue from checkpoint.json")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="test-set MSE and plot data")
    p.add_argument("--dataset")
    p.add_argument("--model")
    p.add_argument("--oracle", action="store_true", help="score the true targets instead")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", parents=[common], help="trigger-policy comparison table")
    p.add_argument("--trace")
    p.add_argument("--model")
    p.add_argument("--policies", help="comma list, e.g. '5,7,10,prediction' or '5,oracle'")
    p.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DatasetError as exc:
        print(f"dataset error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CalibrationError as exc:
        print(f"calibration failed: {exc}", file=sys.stderr)
        for k, v in exc.diagnostics.items():
            print(f"  {k}: {v}", file=sys.stderr)
        return EXIT_CALIBRATION
    except TrainingDivergence as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SoftFailError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())

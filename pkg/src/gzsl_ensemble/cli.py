"""Batch command-line front end.

Subcommands: ``synth`` (write a synthetic dataset directory), ``train``
(fit both modalities and cache score matrices), ``calibrate`` (grid-search
alpha/beta), ``eval`` (report at an operating point), ``sweep`` (beta sweep
plus AUSUC).  Every run is deterministic given ``--seed``; the thread count
defaults to the GZSL_ENSEMBLE_THREADS environment variable and never
changes results.

Exit codes: 0 success, 2 usage or invalid configuration, 3 data/validation
error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .attribute_regressor import TrainConfig, TrainingDivergedError
from .dataset import DatasetError, SynthSpec, generate_synthetic, save_dataset
from .pipeline import (
    RunConfig,
    default_threads,
    run_calibrate,
    run_eval,
    run_sweep,
    run_train,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gzsl-ensemble",
        description="Seen/unseen ensemble pipeline: synthesize, train, calibrate, evaluate, sweep.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset directory")
    p_synth.add_argument("--seen", type=int, required=True, help="number of seen classes")
    p_synth.add_argument("--unseen", type=int, required=True, help="number of unseen classes")
    p_synth.add_argument("--k", type=int, required=True, help="visual feature dimension")
    p_synth.add_argument("--l", type=int, required=True, help="attribute dimension")
    p_synth.add_argument("--samples", type=int, default=50, help="samples per class")
    p_synth.add_argument("--sigma-vis", type=float, default=0.01, help="visual noise std")
    p_synth.add_argument("--sigma-attr", type=float, default=1.0, help="prototype spread")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", required=True, help="output dataset directory")

    p_train = sub.add_parser("train", help="fit both modalities and cache score matrices")
    p_train.add_argument("--data", help="dataset directory")
    p_train.add_argument("--out", help="run directory for models and caches")
    p_train.add_argument("--config", help="JSON config file; flags override its fields")
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--dropout", type=float, help="input dropout rate (default 0.2)")
    p_train.add_argument("--t-passes", type=int, help="MC forward passes (default 100)")
    p_train.add_argument("--grid-step", type=float, help="alpha/beta grid step (default 0.01)")
    p_train.add_argument("--holdout", type=float, help="validation holdout fraction (default 0.2)")
    p_train.add_argument("--pseudo-unseen", type=int, help="re-draw the calibration split with this many pseudo-unseen classes")
    p_train.add_argument("--no-final-retrain", action="store_true", help="reuse calibration-phase models for the final test scores")
    p_train.add_argument("--threads", type=int, help="worker threads (default: GZSL_ENSEMBLE_THREADS env var or 1)")
    p_train.add_argument("--generated-dir", help="directory with generated_features.csv/generated_labels.csv to use instead of the hallucinator")
    p_train.add_argument("--dap-epochs", type=int)
    p_train.add_argument("--dap-batch", type=int)
    p_train.add_argument("--dap-lr", type=float)
    p_train.add_argument("--vis-epochs", type=int)
    p_train.add_argument("--vis-batch", type=int)
    p_train.add_argument("--vis-lr", type=float)

    p_cal = sub.add_parser("calibrate", help="grid-search alpha/beta on cached validation scores")
    p_cal.add_argument("--run", required=True, help="run directory written by train")
    p_cal.add_argument("--grid-step", type=float)

    p_eval = sub.add_parser("eval", help="evaluate cached test scores at an operating point")
    p_eval.add_argument("--run", required=True)
    p_eval.add_argument("--alpha", type=float, help="override the calibrated alpha")
    p_eval.add_argument("--beta", type=float, help="override the calibrated beta")

    p_sweep = sub.add_parser("sweep", help="beta sweep and AUSUC on cached test scores")
    p_sweep.add_argument("--run", required=True)
    p_sweep.add_argument("--alpha", type=float, help="override the calibrated alpha")
    p_sweep.add_argument("--grid-step", type=float)

    return parser


_CONFIG_FIELDS = {
    "data_dir", "out_dir", "seed", "dropout_rate", "t_passes", "grid_step",
    "holdout_frac", "pseudo_unseen", "final_retrain", "threads", "ridge",
    "generated_dir", "dap_train", "visual_train",
}


def _train_config_from(obj: dict, field: str) -> TrainConfig:
    known = {"epochs", "batch_size", "learning_rate", "seed"}
    extra = set(obj) - known
    if extra:
        raise ValueError(f"{field}.{sorted(extra)[0]}: unknown field")
    try:
        return TrainConfig(**obj)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{field}: {exc}") from exc


def _resolve_run_config(args: argparse.Namespace) -> RunConfig:
    raw: dict = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise DatasetError(f"config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ValueError(f"config: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
        extra = set(raw) - _CONFIG_FIELDS
        if extra:
            raise ValueError(f"config field '{sorted(extra)[0]}': unknown field")

    def pick(flag_value, key: str, default):
        if flag_value is not None:
            return flag_value
        return raw.get(key, default)

    dap_raw = dict(raw.get("dap_train", {}))
    vis_raw = dict(raw.get("visual_train", {}))
    for key, flag in (("epochs", args.dap_epochs), ("batch_size", args.dap_batch), ("learning_rate", args.dap_lr)):
        if flag is not None:
            dap_raw[key] = flag
    for key, flag in (("epochs", args.vis_epochs), ("batch_size", args.vis_batch), ("learning_rate", args.vis_lr)):
        if flag is not None:
            vis_raw[key] = flag

    data_dir = pick(args.data, "data_dir", None)
    out_dir = pick(args.out, "out_dir", None)
    if not data_dir:
        raise ValueError("data_dir: required (pass --data or set it in the config)")
    if not out_dir:
        raise ValueError("out_dir: required (pass --out or set it in the config)")

    try:
        return RunConfig(
            data_dir=data_dir,
            out_dir=out_dir,
            seed=int(pick(args.seed, "seed", 0)),
            dropout_rate=float(pick(args.dropout, "dropout_rate", 0.2)),
            t_passes=int(pick(args.t_passes, "t_passes", 100)),
            grid_step=float(pick(args.grid_step, "grid_step", 0.01)),
            holdout_frac=float(pick(args.holdout, "holdout_frac", 0.2)),
            pseudo_unseen=pick(args.pseudo_unseen, "pseudo_unseen", None),
            final_retrain=not args.no_final_retrain and bool(raw.get("final_retrain", True)),
            threads=int(pick(args.threads, "threads", default_threads())),
            ridge=float(raw.get("ridge", 1e-6)),
            generated_dir=pick(args.generated_dir, "generated_dir", None),
            dap_train=_train_config_from(dap_raw, "dap_train"),
            visual_train=_train_config_from(vis_raw, "visual_train"),
        )
    except ValueError as exc:
        raise ValueError(f"config: {exc}") from exc


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK

    try:
        if args.command == "synth":
            try:
                spec = SynthSpec(
                    seen=args.seen, unseen=args.unseen, k=args.k, l=args.l,
                    samples_per_class=args.samples, sigma_vis=args.sigma_vis,
                    sigma_attr=args.sigma_attr, seed=args.seed,
                )
            except ValueError as exc:
                print(f"error: {exc}", file=sys.stderr)
                return EXIT_USAGE
            ds, _ = generate_synthetic(spec)
            save_dataset(ds, args.out)
            print(f"wrote dataset '{ds.name}' to {args.out}")
            return EXIT_OK

        if args.command == "train":
            try:
                cfg = _resolve_run_config(args)
            except DatasetError:
                raise
            except ValueError as exc:
                print(f"error: {exc}", file=sys.stderr)
                return EXIT_USAGE
            ds = run_train(cfg)
            print(f"trained on '{ds.name}' ({ds.n_seen} seen / {ds.n_unseen} unseen classes); caches in {cfg.out_dir}")
            return EXIT_OK

        if args.command == "calibrate":
            out = run_calibrate(args.run, args.grid_step)
            print(f"alpha*={out['alpha_star']} beta*={out['beta_star']} val_hmean={out['val_hmean']:.4f}")
            return EXIT_OK

        if args.command == "eval":
            out = run_eval(args.run, args.alpha, args.beta)
            print(
                f"acc_seen={out['acc_seen']:.4f} acc_unseen={out['acc_unseen']:.4f} "
                f"hmean={out['hmean']:.4f} zsl={out['zsl']:.4f} "
                f"(alpha={out['alpha']}, beta={out['beta']})"
            )
            return EXIT_OK

        if args.command == "sweep":
            out = run_sweep(args.run, args.alpha, args.grid_step)
            print(f"swept {out['n_points']} points at alpha={out['alpha']}: ausuc={out['ausuc']:.4f}")
            return EXIT_OK
    except DatasetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA

    # subcommands are required, so every dispatch branch above returns
    raise AssertionError(f"unhandled command {args.command!r}")


def entrypoint() -> None:
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    entrypoint()

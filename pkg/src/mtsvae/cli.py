"""Command-line front end.

Commands
--------
``synth``           write a synthetic dataset directory
``train-features``  fit one extractor on the unlabeled train split and persist it
``benchmark``       run the labeled-fraction sweep and write ``records.csv`` / ``summary.csv``
``inspect``         print the metadata of a persisted extractor or estimator

Every command that takes ``--seed`` falls back to the ``MTS_SEED``
environment variable, then to 0. ``--config FILE`` reads ``key = value``
lines whose keys are flag names (``repeats``, ``batch-size``, ...); flags on
the command line win.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .estimators import load_estimator
from .estimators.svm import ConvergenceError
from .extractors import METHODS, VAE, canonical_method, load_extractor, make_extractor, read_manifest, save_extractor
from .nn import NumericalError
from .pipeline import DEFAULT_FRACTIONS, ExperimentConfig, emit_results, format_summary, run_experiment
from .timeseries import CLASSIFICATION, TASKS, DataError, SynthSpec, load_dataset, save_dataset, synthesize_dataset
from .vae import VaeHyper

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# argument types


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _nonneg_float(text: str) -> float:
    value = float(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _method_list(text: str) -> tuple[str, ...]:
    try:
        return tuple(canonical_method(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _gamma(text: str) -> float | str:
    return "scale" if text == "scale" else _positive_float(text)


# --------------------------------------------------------------------------
# parser


def _add_common(p: argparse.ArgumentParser, seed: bool = True):
    if seed:
        p.add_argument("--seed", type=int, default=None, help="master seed (fallback: $MTS_SEED, then 0)")
    p.add_argument("--config", type=Path, default=None, help="key = value file with flag defaults")


def _add_extractor_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("extractor hyperparameters")
    g.add_argument("--kappa", type=_positive_float, default=25.0, help="compression ratio: window / latent dim")
    g.add_argument("--kernels", type=_positive_int, default=1000, help="Rocket kernels per channel")
    g.add_argument("--epochs", type=_positive_int, default=1000, help="VAE max epochs")
    g.add_argument("--lr", type=_positive_float, default=1e-4, help="VAE Adam learning rate")
    g.add_argument("--batch-size", type=_positive_int, default=None,
                   help="VAE mini-batch size (default: power of two near n_train/100 in [64, 512])")
    g.add_argument("--weight-decay", type=_nonneg_float, default=1e-5, help="VAE decoupled L2 weight decay")
    g.add_argument("--beta-kl", type=_nonneg_float, default=1.0, help="VAE KL weight")
    g.add_argument("--patience", type=_positive_int, default=20, help="VAE early-stopping patience (epochs)")
    g.add_argument("--val-fraction", type=_positive_float, default=0.1, help="VAE validation share")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="mtsvae", formatter_class=fmt,
                                     description="Per-channel VAE features for multivariate time series.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", formatter_class=fmt, help="write a synthetic dataset")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--channels", type=int, default=2, help="number of channels")
    p.add_argument("--classes", type=int, default=3, help="number of classes (classification)")
    p.add_argument("--train", type=int, default=100, help="training windows")
    p.add_argument("--test", type=int, default=50, help="test windows")
    p.add_argument("--task", choices=sorted(TASKS), default=CLASSIFICATION, help="prediction task")
    p.add_argument("--rates", type=_float_list, default=None,
                   help="comma-separated sampling rates in Hz (default: 100, 50, 25, ... floored at 8)")
    p.add_argument("--duration", type=_positive_float, default=1.0, help="window duration in seconds")
    p.add_argument("--noise", type=_nonneg_float, default=0.1, help="white-noise std")
    p.add_argument("--components", type=_positive_int, default=2, help="sinusoids per template")
    p.add_argument("--phase-jitter", type=_nonneg_float, default=2 * np.pi, help="max random phase shift")
    p.add_argument("--gain-spread", type=_nonneg_float, default=0.0, help="log-gain half range per sample")
    p.add_argument("--offset-std", type=_nonneg_float, default=0.0, help="random DC offset std per sample")
    p.add_argument("--force", action="store_true", help="write into a non-empty directory")
    _add_common(p)

    p = sub.add_parser("train-features", formatter_class=fmt, help="fit and persist one extractor")
    p.add_argument("--dataset", type=Path, required=True, help="dataset directory or manifest")
    p.add_argument("--method", type=canonical_method, required=True, help="vae, pca, stat or rocket")
    p.add_argument("--out", type=Path, required=True, help="output directory for the extractor")
    p.add_argument("--jobs", type=_positive_int, default=1, help="channels trained in parallel")
    p.add_argument("--force", action="store_true", help="write into a non-empty directory")
    _add_extractor_flags(p)
    _add_common(p)

    p = sub.add_parser("benchmark", formatter_class=fmt, help="run the labeled-fraction sweep")
    p.add_argument("--dataset", type=Path, required=True, help="dataset directory or manifest")
    p.add_argument("--out", type=Path, required=True, help="output directory for records.csv/summary.csv")
    p.add_argument("--methods", type=_method_list, default=METHODS,
                   help="comma-separated subset of vae,pca,stat,rocket")
    p.add_argument("--fractions", type=_float_list, default=DEFAULT_FRACTIONS,
                   help="comma-separated labeled fractions in (0, 1], ascending")
    p.add_argument("--repeats", type=_positive_int, default=10, help="replicates per fraction")
    p.add_argument("--jobs", type=_positive_int, default=os.cpu_count() or 1, help="parallel workers")
    p.add_argument("--pretrained", action="append", default=[], metavar="METHOD=PATH",
                   help="use a persisted extractor instead of training one (repeatable)")
    p.add_argument("--svm-c", type=_positive_float, default=1.0, help="SVM/SVR box constraint C")
    p.add_argument("--svm-gamma", type=_gamma, default="scale", help="RBF gamma or 'scale'")
    p.add_argument("--svr-epsilon", type=_nonneg_float, default=0.1, help="SVR tube width (standardized target)")
    p.add_argument("--stat-q", type=_positive_float, default=0.05, help="FDR level for statistical features")
    p.add_argument("--no-timing", action="store_true", help="write wall_time_s as 0 (byte-stable outputs)")
    _add_extractor_flags(p)
    _add_common(p)

    p = sub.add_parser("inspect", formatter_class=fmt, help="print a persisted model's metadata")
    p.add_argument("path", type=Path, help="extractor directory/manifest or estimator .npz")
    _add_common(p, seed=False)
    return parser


# --------------------------------------------------------------------------
# config file and seed handling


def _read_config(path: Path) -> dict[str, str]:
    if not path.is_file():
        raise UsageError(f"config file {path} not found")
    out = {}
    for n, line in enumerate(path.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("_", "-")] = value
    return out


def _parse(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    entries = _read_config(args.config)
    # Turn the file into flags placed before the real ones, so command-line flags win.
    sub = parser._subparsers._group_actions[0].choices[args.command]  # noqa: SLF001
    known = {opt.lstrip("-"): a for a in sub._actions for opt in a.option_strings}  # noqa: SLF001
    extra = []
    for key, value in entries.items():
        action = known.get(key)
        if action is None or key in ("config", "help"):
            raise UsageError(f"unknown config key {key!r}")
        if action.nargs == 0:
            if value.lower() in ("1", "true", "yes", "on"):
                extra.append(f"--{key}")
        else:
            extra += [f"--{key}", value]
    return parser.parse_args([argv[0]] + extra + argv[1:])


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("MTS_SEED")
    if env is None or env == "":
        return 0
    try:
        return int(env)
    except ValueError as exc:
        raise UsageError(f"MTS_SEED must be an integer, got {env!r}") from exc


def _vae_hyper(args, seed: int) -> VaeHyper:
    try:
        return VaeHyper(kappa=args.kappa, lr=args.lr, max_epochs=args.epochs, batch_size=args.batch_size,
                        weight_decay=args.weight_decay, beta_kl=args.beta_kl, patience=args.patience,
                        val_fraction=args.val_fraction, seed=seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _check_out_dir(path: Path, force: bool):
    if path.exists() and not path.is_dir():
        raise UsageError(f"{path} exists and is not a directory")
    if path.is_dir() and any(path.iterdir()) and not force:
        raise UsageError(f"{path} is not empty; pass --force to overwrite")


# --------------------------------------------------------------------------
# commands


def cmd_synth(args) -> int:
    for name in ("channels", "train", "test"):
        if getattr(args, name) < 1:
            raise UsageError(f"--{name} must be >= 1")
    if args.task == CLASSIFICATION and args.classes < 2:
        raise UsageError("--classes must be >= 2")
    if args.rates is not None and len(args.rates) != args.channels:
        raise UsageError("--rates needs one entry per channel")
    _check_out_dir(args.out, args.force)
    spec = SynthSpec(n_sig=args.channels, n_train=args.train, n_test=args.test, task=args.task,
                     n_classes=args.classes, rates_hz=args.rates, duration_s=args.duration, noise_std=args.noise,
                     n_components=args.components, phase_jitter=args.phase_jitter, gain_spread=args.gain_spread,
                     offset_std=args.offset_std)
    ds = synthesize_dataset(spec, _seed(args))
    save_dataset(ds, args.out)
    windows = ", ".join(f"{ch.name}:{ch.window_len}" for ch in ds.channels)
    print(f"wrote {ds.task} dataset to {args.out}: {ds.n_train} train / {ds.n_test} test, windows [{windows}]")
    return EXIT_OK


def cmd_train_features(args) -> int:
    seed = _seed(args)
    hyper = _vae_hyper(args, seed)
    _check_out_dir(args.out, args.force)
    ds = load_dataset(args.dataset)
    ex = make_extractor(args.method, seed=seed, vae_hyper=hyper, n_kernels=args.kernels, kappa=args.kappa,
                        n_jobs=args.jobs)
    ex.fit(ds.channels, ds.train)
    save_extractor(ex, args.out)
    n_features = ex.transform([m[:1] for m in ds.train]).shape[1]
    print(f"{args.method}: {n_features} features from {ds.n_sig} channels, saved to {args.out}")
    if args.method == VAE:
        for m, h in zip(ex.bank.models, ex.bank.histories):
            print(f"  {m.channel.name}: window {m.window_len} -> latent {m.latent_dim}, "
                  f"best epoch {h.best_epoch} of {h.n_epochs}")
    return EXIT_OK


def _pretrained(entries: list[str]) -> dict:
    out = {}
    for entry in entries:
        if "=" not in entry:
            raise UsageError(f"--pretrained expects METHOD=PATH, got {entry!r}")
        method, path = entry.split("=", 1)
        try:
            method = canonical_method(method)
            ex = load_extractor(path)
        except (OSError, KeyError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot load pretrained extractor {path!r}: {exc}") from exc
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        if ex.method != method:
            raise UsageError(f"{path} holds a {ex.method} extractor, not {method}")
        out[method] = ex
    return out


def cmd_benchmark(args) -> int:
    seed = _seed(args)
    hyper = _vae_hyper(args, seed)
    pretrained = _pretrained(args.pretrained)
    ds = load_dataset(args.dataset)
    try:
        cfg = ExperimentConfig(ds, methods=args.methods, fractions=args.fractions, n_repeat=args.repeats,
                               seed=seed, vae_hyper=hyper, n_kernels=args.kernels, kappa=args.kappa,
                               stat_q=args.stat_q, svm_C=args.svm_c, svm_gamma=args.svm_gamma,
                               svr_epsilon=args.svr_epsilon, n_jobs=args.jobs,
                               record_wall_time=not args.no_timing, pretrained=pretrained)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    for method, ex in pretrained.items():
        if tuple(ex.channels) != ds.channels:
            raise DataError(f"pretrained {method} extractor was fitted on different channels")
    table = run_experiment(cfg)
    rec, summ = emit_results(table, args.out)
    print(format_summary(table))
    failed = [r for r in table.records if not r.ok]
    n_ok = len(table.records) - len(failed)
    print(f"{n_ok}/{len(table.records)} cells succeeded; wrote {rec} and {summ}")
    for status in sorted({r.status for r in failed}):
        print(f"  failure: {status}", file=sys.stderr)
    return EXIT_OK if n_ok else EXIT_NUMERIC


def cmd_inspect(args) -> int:
    path = args.path
    if path.suffix == ".npz" and path.is_file():
        model = load_estimator(path)
        meta = {"kind": type(model).__name__, "task": model.task}
        if hasattr(model, "lam"):
            meta.update(lam=model.lam, n_features=int(model.weights.shape[1]), n_outputs=int(model.weights.shape[0]))
        else:
            meta.update(C=model.C, gamma=model.gamma, epsilon=model.epsilon,
                        n_support=int(len(model.support_index)), n_machines=int(model.dual_coef.shape[0]))
        print(json.dumps(meta, indent=2, sort_keys=True))
        return EXIT_OK
    try:
        manifest = read_manifest(path)
    except FileNotFoundError as exc:
        raise DataError(f"no persisted model at {path}") from exc
    print(json.dumps(manifest, indent=2, sort_keys=True))
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "train-features": cmd_train_features, "benchmark": cmd_benchmark,
            "inspect": cmd_inspect}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _parse(parser, argv)
        return COMMANDS[args.command](args)
    except SystemExit as exc:  # argparse reports usage errors this way
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as exc:
        print(f"mtsvae: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"mtsvae: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, ConvergenceError, FloatingPointError) as exc:
        print(f"mtsvae: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"mtsvae: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: ``petqst <command> [options]``.

Options can also come from a ``key = value`` file given with ``--config``
(keys are option names, dashes or underscores); explicit flags win. The
environment variable ``TQST_DATA_DIR`` sets the default data directory.

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import baseline
from .datagen import Dataset, DatasetSpec, build_dataset, export_csv, import_csv, load_dataset, save_dataset, split
from .errors import NumericalError, ValidationError
from .penet import TrainHyper, build_model, default_config, load_checkpoint, predict, save_checkpoint, train
from .penet.models import ModelConfig
from .qstate import NoiseSpec, bell_phi_minus, fidelity, maximally_mixed, purity
from .reconstruct import clamp_purity, reconstruct_state
from .report import (
    purity_report,
    state_document,
    state_from_document,
    summary_line,
    tomography_report,
    tomography_report_from_outputs,
    write_report,
)

log = logging.getLogger("petqst")

DEFAULT_STRENGTHS = (0.01, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0)
ABLATION_WIDTHS = {"mlp": (64, 128, 256, 512, 1024), "pemlp": (8, 16, 32, 64, 128)}
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def data_dir() -> Path:
    return Path(os.environ.get("TQST_DATA_DIR", "data"))


def resolve_data(path: str) -> Path:
    p = Path(path)
    if p.exists() or p.is_absolute():
        return p
    return data_dir() / p


def read_config(path: str | Path) -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValidationError(f"{path}:{lineno}: expected key = value")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in str(text).split(",") if v.strip())


def float_list(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in str(text).split(",") if v.strip())


def _hyper(args) -> TrainHyper:
    return TrainHyper(epochs=args.epochs, batch_size=args.batch, lr=args.lr, seed=args.seed)


def _model_config(args, n_qubits: int) -> ModelConfig:
    cfg = default_config(args.task, args.family, n_qubits)
    changes = {}
    if args.hidden:
        changes["hidden"] = int_list(args.hidden)
    if args.dense:
        changes["dense"] = int_list(args.dense)
    if args.dropout is not None:
        changes["dropout"] = float(args.dropout)
    if changes:
        cfg = ModelConfig.from_dict({**cfg.to_dict(), **changes})
        cfg.validate()
    return cfg


def _train_on(ds: Dataset, cfg: ModelConfig, hyper: TrainHyper, split_seed: int, progress: bool = False):
    tr, va, te = split(ds, seed=split_seed)
    model = build_model(cfg, seed=hyper.seed)

    def on_epoch(row):
        if progress:
            print(f"epoch {row['epoch']:4d}  train {row['train_loss']:.6g}  val {row['val_loss']:.6g}", flush=True)

    y = ds.task_targets(cfg.task)
    result = train(model, ds.inputs[tr], y[tr], ds.inputs[va], y[va], hyper, on_epoch=on_epoch)
    return result, (tr, va, te)


def _evaluate_model(model, ds: Dataset, label: str = "") -> dict:
    out = predict(model, ds.inputs)
    if model.config.task == "tomography":
        return tomography_report_from_outputs(ds, out, label)
    return purity_report(ds, out[:, 0], label)


def _print_report(report: dict) -> None:
    print(summary_line(report))
    for row in report["stratified"]:
        mean = "n/a" if row["mean"] is None else f"{row['mean']:.4f}"
        print(f"  zeros {row['zeros']:>5}: n={row['count']:5d}  mean {mean}")


# -- commands -----------------------------------------------------------------


def cmd_gen(args) -> int:
    spec = DatasetSpec(args.qubits, args.per_pair, NoiseSpec.parse(args.noise), args.seed, args.threshold)
    spec.validate()
    out = Path(args.out) if args.out else data_dir() / f"n{spec.n_qubits}_m{spec.per_pair}_{spec.noise.label().replace(':', '')}_s{spec.seed}"
    ds = build_dataset(spec)
    save_dataset(ds, out)
    if args.csv:
        export_csv(ds, args.csv)
    print(f"wrote {out}")
    print(f"samples: {len(ds)} (mixed {int((~ds.pure).sum())}, pure {int(ds.pure.sum())})")
    print(f"noise: {spec.noise.label()}")
    print(f"measurements performed: mean {ds.measurements.mean():.3f} of {4**spec.n_qubits}")
    for z in np.unique(ds.zeros):
        sel = ds.zeros == z
        print(f"  zeros {z:2d}: n={int(sel.sum()):6d}  mean measurements {ds.measurements[sel].mean():.3f}")
    return 0


def cmd_train(args) -> int:
    ds = load_dataset(resolve_data(args.data))
    if args.qubits is not None and args.qubits != ds.n_qubits:
        raise ValidationError(f"--qubits {args.qubits} does not match the {ds.n_qubits}-qubit dataset")
    cfg = _model_config(args, ds.n_qubits)
    hyper = _hyper(args)
    print(f"model: {cfg.family} / {cfg.task} / {ds.n_qubits} qubits, {build_model(cfg).n_params()} parameters")
    result, _ = _train_on(ds, cfg, hyper, args.split_seed, progress=args.progress)
    model = result.model
    model.meta = {
        "dataset": str(args.data),
        "split_seed": args.split_seed,
        "epochs": hyper.epochs,
        "batch_size": hyper.batch_size,
        "lr": hyper.lr,
        "final_train_loss": result.history[-1]["train_loss"],
        "final_val_loss": result.history[-1]["val_loss"],
    }
    save_checkpoint(model, args.out)
    loss_csv = args.loss_csv or str(Path(args.out).with_suffix(".loss.csv"))
    with open(loss_csv, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["epoch", "train_loss", "val_loss"])
        w.writeheader()
        for row in result.history:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    print(f"parameters: {model.n_params()}")
    print(f"final losses: train {result.history[-1]['train_loss']:.6g}  val {result.history[-1]['val_loss']:.6g}")
    print(f"wrote {args.out} and {loss_csv}")
    return 0


def _split_part(ds: Dataset, which: str, split_seed: int) -> Dataset:
    if which == "all":
        return ds
    tr, va, te = split(ds, seed=split_seed)
    return ds.subset({"train": tr, "val": va, "test": te}[which])


def cmd_eval(args) -> int:
    model = load_checkpoint(args.model)
    ds = load_dataset(resolve_data(args.data))
    split_seed = args.split_seed if args.split_seed is not None else int(model.meta.get("split_seed", 0))
    part = _split_part(ds, args.split, split_seed)
    report = _evaluate_model(model, part, label=f"{model.config.family}:{args.split}")
    write_report(report, args.json, args.csv)
    _print_report(report)
    return 0


def _classical(values: np.ndarray, method: str) -> np.ndarray:
    if method == "direct":
        return baseline.direct_invert(values)
    return baseline.mle_refine(values)


def cmd_baseline(args) -> int:
    ds = load_dataset(resolve_data(args.data))
    part = _split_part(ds, args.split, args.split_seed)
    states = _classical(part.inputs, args.method)
    if args.task == "tomography":
        report = tomography_report(part, states, label=f"baseline-{args.method}")
    else:
        report = purity_report(part, purity(states), label=f"baseline-{args.method}")
    write_report(report, args.json, args.csv)
    _print_report(report)
    return 0


def _reference_state(text: str) -> np.ndarray:
    named = {"bell-phi-minus": bell_phi_minus}
    if text in named:
        return named[text]()
    if text.startswith("maximally-mixed:"):
        return maximally_mixed(int(text.split(":", 1)[1]))
    doc = json.loads(Path(text).read_text())
    if "states" in doc:
        doc = doc["states"][0]
    return state_from_document(doc)


def cmd_reconstruct(args) -> int:
    records = import_csv(args.records)
    if args.model:
        model = load_checkpoint(args.model)
        if model.config.task != "tomography":
            raise ValidationError("reconstruct needs a tomography model")
        states = reconstruct_state(predict(model, records.inputs))
        method = f"model:{model.config.family}"
    else:
        states = _classical(records.inputs, args.method)
        method = f"baseline:{args.method}"
    states = np.atleast_3d(states).reshape(len(records), *states.shape[-2:])
    reference = _reference_state(args.reference) if args.reference else None
    docs = []
    for k, rho in enumerate(states):
        extra = {"method": method, "measurements": int(records.measurements[k])}
        if reference is not None:
            extra["fidelity"] = float(fidelity(reference, rho))
        docs.append(state_document(rho, **extra))
    out = {"states": docs}
    if args.out:
        Path(args.out).write_text(json.dumps(out, indent=2) + "\n")
    for k, doc in enumerate(docs):
        print(f"record {k}: {doc['measurements']} measurements, method {method}")
        print(doc["magnitude_phase"])
        if "fidelity" in doc:
            print(f"fidelity with reference: {doc['fidelity']:.6f}")
    return 0


def cmd_purity(args) -> int:
    records = import_csv(args.records)
    model = load_checkpoint(args.model)
    if model.config.task != "purity":
        raise ValidationError("purity needs a purity model")
    est = clamp_purity(predict(model, records.inputs)[:, 0], records.n_qubits)
    est = np.atleast_1d(est)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["record", "purity"])
            for k, p in enumerate(est):
                w.writerow([k, repr(float(p))])
    for k, p in enumerate(est):
        print(f"record {k}: purity {p:.6f}")
    return 0


def _sweep_row(channel: str, strength: float, report: dict, ds: Dataset) -> dict:
    agg = report["aggregate"]
    full = float(np.mean(ds.measurements == 4**ds.n_qubits))
    if report["task"] == "tomography":
        mean, std, metric = agg["fidelity_mean"], agg["fidelity_std"], "fidelity"
    else:
        err = np.array([r["squared_error"] for r in report["rows"]])
        mean, std, metric = agg["r2"], float(err.std()), "r2"
    return {
        "channel": channel,
        "strength": strength,
        "mean": mean,
        "std": std,
        "metric": metric,
        "mean_measurements": agg["mean_measurements"],
        "full_measurement_fraction": full,
        "n_test": report["n_samples"],
    }


def cmd_noise_sweep(args) -> int:
    channels = [c.strip() for c in args.channels.split(",") if c.strip()]
    strengths = float_list(args.strengths) if args.strengths else DEFAULT_STRENGTHS
    if args.include_zero:
        strengths = (0.0, *strengths)
    hyper = _hyper(args)
    rows = []
    for channel in channels:
        for strength in strengths:
            noise = NoiseSpec.parse(f"{channel}:{strength}") if strength > 0 else NoiseSpec()
            ds = build_dataset(DatasetSpec(args.qubits, args.per_pair, noise, args.data_seed))
            if args.method == "model":
                cfg = _model_config(args, ds.n_qubits)
                result, (_, _, te) = _train_on(ds, cfg, hyper, args.split_seed)
                test = ds.subset(te)
                report = _evaluate_model(result.model, test)
            else:
                test = _split_part(ds, "test", args.split_seed)
                states = _classical(test.inputs, args.method)
                report = (
                    tomography_report(test, states)
                    if args.task == "tomography"
                    else purity_report(test, purity(states))
                )
            row = _sweep_row(channel, strength, report, test)
            rows.append(row)
            print(f"{channel:>6} {strength:5.2f}  {row['metric']} {row['mean']:.4f} +/- {row['std']:.4f}  "
                  f"measurements {row['mean_measurements']:.1f}", flush=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    print(f"wrote {args.out}")
    return 0


def cmd_ablate(args) -> int:
    ds = load_dataset(resolve_data(args.data))
    layers = int_list(args.layers)
    widths = int_list(args.widths) if args.widths else ABLATION_WIDTHS[args.family]
    hyper = _hyper(args)
    rows = []
    for n_layers in layers:
        for width in widths:
            cfg = ModelConfig(args.task, ds.n_qubits, args.family, hidden=(width,) * n_layers)
            result, (_, _, te) = _train_on(ds, cfg, hyper, args.split_seed)
            report = _evaluate_model(result.model, ds.subset(te))
            agg = report["aggregate"]
            mean, std = (agg["fidelity_mean"], agg["fidelity_std"]) if cfg.task == "tomography" else (agg["r2"], float("nan"))
            rows.append({"family": args.family, "layers": n_layers, "width": width,
                         "params": result.model.n_params(), "mean": mean, "std": std})
            print(f"{args.family} layers={n_layers} width={width}: {mean:.4f} +/- {std:.4f}", flush=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    print(f"wrote {args.out}")
    return 0


# -- parser -------------------------------------------------------------------


def _add_model_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--family", choices=("mlp", "pemlp", "combined"), default="mlp")
    p.add_argument("--task", choices=("tomography", "purity"), default="tomography")
    p.add_argument("--hidden", help="comma-separated hidden sizes (overrides the family default)")
    p.add_argument("--dense", help="comma-separated dense widths after the PE stack (combined)")
    p.add_argument("--dropout", type=float)


def _add_train_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0, help="initialisation / shuffling seed")
    p.add_argument("--split-seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="petqst", description=__doc__.split("\n\n")[0])
    parser.add_argument("--config", help="key = value file with option defaults")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a dataset")
    p.add_argument("--qubits", type=int, required=True)
    p.add_argument("--per-pair", type=int, required=True, help="samples per (zeros, rank) pair")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", default="none", help="none | depol:P | exp:EPS")
    p.add_argument("--threshold", type=float, help="manual threshold (default: Gini rule)")
    p.add_argument("--out", help="dataset directory")
    p.add_argument("--csv", help="also export the dataset as CSV")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a model on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--qubits", type=int)
    _add_model_opts(p)
    _add_train_opts(p)
    p.add_argument("--out", default="model.tqm")
    p.add_argument("--loss-csv")
    p.add_argument("--progress", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=("train", "val", "test", "all"), default="test")
    p.add_argument("--split-seed", type=int)
    p.add_argument("--json")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("baseline", help="evaluate the classical reconstruction")
    p.add_argument("--data", required=True)
    p.add_argument("--method", choices=("direct", "mle"), default="direct")
    p.add_argument("--task", choices=("tomography", "purity"), default="tomography")
    p.add_argument("--split", choices=("train", "val", "test", "all"), default="test")
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--json")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("reconstruct", help="reconstruct states from a record CSV")
    p.add_argument("--records", required=True)
    p.add_argument("--model")
    p.add_argument("--method", choices=("direct", "mle"), default="direct")
    p.add_argument("--reference", help="bell-phi-minus | maximally-mixed:N | state JSON file")
    p.add_argument("--out")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("purity", help="estimate purities from a record CSV")
    p.add_argument("--records", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_purity)

    p = sub.add_parser("noise-sweep", help="metric versus noise strength")
    p.add_argument("--qubits", type=int, default=2)
    p.add_argument("--per-pair", type=int, default=2000)
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--channels", default="depol,exp")
    p.add_argument("--strengths", help="comma-separated strengths (default 0.01 ... 1.0)")
    p.add_argument("--include-zero", action="store_true")
    p.add_argument("--method", choices=("model", "direct", "mle"), default="model")
    _add_model_opts(p)
    _add_train_opts(p)
    p.add_argument("--out", default="noise_sweep.csv")
    p.set_defaults(func=cmd_noise_sweep)

    p = sub.add_parser("ablate", help="grid over hidden layers and widths")
    p.add_argument("--data", required=True)
    p.add_argument("--family", choices=("mlp", "pemlp"), default="mlp")
    p.add_argument("--task", choices=("tomography", "purity"), default="tomography")
    p.add_argument("--layers", default="1,2,3")
    p.add_argument("--widths")
    _add_train_opts(p)
    p.add_argument("--out", default="ablation.csv")
    p.set_defaults(func=cmd_ablate)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    values = read_config(args.config)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in values.items():
        if key not in known:
            raise ValidationError(f"unknown config key {key!r} for {args.command}")
        action = known[key]
        defaults[key] = action.type(raw) if action.type else (raw.lower() in ("1", "true", "yes") if action.nargs == 0 else raw)
        action.required = False
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

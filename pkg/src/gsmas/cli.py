"""Command line entry point.

Exit codes: 0 on success, 1 for configuration errors, 2 for runtime or
numeric failures.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

from . import __version__
from . import config as cfgmod
from .errors import ConfigError, DatasetFormatError, NumericError, TrainingError
from .features import load_dataset, save_dataset
from .harness import (ALL_METHODS, MethodId, classifier_report, emit_results, fit_models, model_key,
                      point_configs, read_results, run_sweep, train_all, train_datasets, write_figures)
from .learners import load_model, save_model

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _global_flags(parser, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--config", type=Path, default=d(None), help="key = value config file")
    parser.add_argument("--preset", default=d(None), help="desk, testbed12 or testbed16")
    parser.add_argument("--set", dest="overrides", action="append", default=d([]), metavar="KEY=VALUE",
                        help="override one config field (repeatable)")
    parser.add_argument("--seed", type=int, default=d(None), help="master seed")
    parser.add_argument("--out-dir", type=Path, default=d(Path("out")), help="output directory")
    parser.add_argument("--workers", type=int, default=d(1), help="worker processes")


def build_parser():
    parser = _Parser(prog="gsmas", description="GSM antenna-subset selection link simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    common = _Parser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-data", parents=[common], help="write train/test datasets per grid point")
    p.add_argument("--snr-db", type=float, action="append", help="restrict to these SNRs")

    p = sub.add_parser("train", parents=[common], help="fit DT and MLP models per grid point")
    p.add_argument("--snr-db", type=float, action="append")
    p.add_argument("--data-dir", type=Path, help="train from gen-data files instead of regenerating")

    p = sub.add_parser("evaluate", parents=[common], help="classifier accuracy on held-out data")
    p.add_argument("--snr-db", type=float, action="append")
    p.add_argument("--models-dir", type=Path)
    p.add_argument("--data-dir", type=Path)

    p = sub.add_parser("sweep", parents=[common], help="BER grid over methods, SNR and impairments")
    p.add_argument("--n-blocks", type=int, help="blocks per grid point")
    p.add_argument("--methods", nargs="+", choices=[m.value for m in ALL_METHODS])
    p.add_argument("--models-dir", type=Path, help="reuse trained models (default: train on the fly)")

    p = sub.add_parser("report", parents=[common], help="re-render figure tables from results.csv")
    p.add_argument("--results", type=Path, help="results file (default: OUT_DIR/results.csv)")
    return parser


def resolve_config(args):
    values = {}
    if args.config is not None:
        text = _read(args.config)
        values.update(cfgmod.parse_kv_lines(text.splitlines()))
    if args.preset is not None:
        values["preset"] = args.preset
    for item in args.overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        values[k.strip()] = v.strip()
    if args.seed is not None:
        values["seed"] = str(args.seed)
    if args.workers < 1:
        raise ConfigError("--workers must be >= 1")
    return cfgmod.from_dict(values)


def _read(path):
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _points(config, snrs):
    """(point index, config, snr) for the grid, optionally filtered by SNR."""
    out = []
    for ai, pc in point_configs(config):
        for si, snr in enumerate(config.snr_grid_db):
            if snrs and snr not in snrs:
                continue
            out.append(((ai, si), pc, snr))
    if not out:
        raise ConfigError(f"none of the requested SNRs {snrs} are on the grid {config.snr_grid_db}")
    return out


def _key(pc, snr):
    return model_key(pc.impairments.alpha, pc.impairments.beta, snr)


def _datasets(pc, snr, point, data_dir):
    if data_dir is None:
        return train_datasets(pc, snr, point)
    key = _key(pc, snr)
    return load_dataset(Path(data_dir) / f"train_{key}.csv"), load_dataset(Path(data_dir) / f"test_{key}.csv")


def _report_lines(key, reports):
    lines = []
    for name, rep in reports.items():
        lines.append(f"{key} {name} accuracy={rep.accuracy:.4f} chance={rep.chance:.4f} "
                     f"n_train={rep.n_train} n_test={rep.n_test}")
    return lines


def _load_models(models_dir, config):
    models = {}
    for _, pc, snr in _points(config, None):
        key = _key(pc, snr)
        paths = {k: Path(models_dir) / f"{key}_{k}.json" for k in ("dt", "mlp")}
        if all(p.exists() for p in paths.values()):
            models[key] = {k: load_model(p) for k, p in paths.items()}
    return models


def cmd_gen_data(args, config):
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    for point, pc, snr in _points(config, args.snr_db):
        train, test = train_datasets(pc, snr, point)
        key = _key(pc, snr)
        for name, ds in (("train", train), ("test", test)):
            path = out / f"{name}_{key}.csv"
            save_dataset(path, ds)
            print(f"wrote {path} ({ds.n_instances} x {ds.n_features})")
    return EXIT_OK


def cmd_train(args, config):
    mdir = args.out_dir / "models"
    mdir.mkdir(parents=True, exist_ok=True)
    lines = []
    for point, pc, snr in _points(config, args.snr_db):
        train, test = _datasets(pc, snr, point, args.data_dir)
        models = fit_models(pc, train, pc.n_subsets, point)
        key = _key(pc, snr)
        reports = {n: classifier_report(n, m.predict(test.x), test.labels, pc.n_subsets, train.n_instances)
                   for n, m in models.items()}
        for name, m in models.items():
            save_model(mdir / f"{key}_{name}.json", m)
        lines += _report_lines(key, reports)
        print("\n".join(lines[-2:]))
    (args.out_dir / "training_report.txt").write_text("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_evaluate(args, config):
    mdir = args.models_dir or args.out_dir / "models"
    lines, doc = [], {}
    for point, pc, snr in _points(config, args.snr_db):
        key = _key(pc, snr)
        _, test = _datasets(pc, snr, point, args.data_dir)
        reports = {}
        for name in ("dt", "mlp"):
            path = Path(mdir) / f"{key}_{name}.json"
            if not path.exists():
                raise ConfigError(f"missing model {path}; run 'gsmas train' first")
            m = load_model(path)
            reports[name] = classifier_report(name, m.predict(test.x), test.labels, pc.n_subsets,
                                              m.metadata.get("n_train", 0))
        lines += _report_lines(key, reports)
        doc[key] = {n: dataclasses.asdict(r) for n, r in reports.items()}
    args.out_dir.mkdir(parents=True, exist_ok=True)
    (args.out_dir / "evaluation.json").write_text(json.dumps(doc, indent=1))
    print("\n".join(lines))
    return EXIT_OK


def cmd_sweep(args, config):
    methods = [MethodId(m) for m in args.methods] if args.methods else list(ALL_METHODS)
    n_blocks = config.n_blocks if args.n_blocks is None else args.n_blocks
    if n_blocks < 1:
        raise ConfigError("--n-blocks must be >= 1")
    t0 = time.perf_counter()
    models = None
    if any(m in (MethodId.DT, MethodId.MLP) for m in methods):
        if args.models_dir is not None:
            models = _load_models(args.models_dir, config)
        else:
            models = train_all(config, args.workers)
    t_train = time.perf_counter() - t0
    results = run_sweep(config, methods, n_blocks, models or {}, args.workers)
    extra = {"n_blocks": n_blocks, "train_seconds": repr(t_train),
             "sweep_seconds": repr(time.perf_counter() - t0 - t_train)}
    for path in emit_results(results, args.out_dir, config, extra):
        print(f"wrote {path}")
    _print_table(results)
    return EXIT_OK


def cmd_report(args, config):
    path = args.results or args.out_dir / "results.csv"
    _, results = read_results(path)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for p in write_figures(args.out_dir, results):
        print(f"wrote {p}")
    _print_table(results)
    return EXIT_OK


def _print_table(results):
    for r in results:
        flag = " (under-sampled)" if r.under_sampled else ""
        print(f"alpha={r.alpha:g} beta={r.beta:g} snr={r.snr_db:5.1f} {r.method.value:16s} "
              f"ber={r.ber:.3e} +/-{r.ci_half_width:.1e} match={r.subset_match_rate:.3f}{flag}")


COMMANDS = {"gen-data": cmd_gen_data, "train": cmd_train, "evaluate": cmd_evaluate,
            "sweep": cmd_sweep, "report": cmd_report}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
        return COMMANDS[args.command](args, config)
    except ConfigError as exc:
        print(f"gsmas: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, TrainingError, DatasetFormatError, OSError, FloatingPointError, ValueError) as exc:
        print(f"gsmas: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

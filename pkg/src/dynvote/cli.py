"""Command line interface.

Subcommands: ``evaluate``, ``sweep-a``, ``train`` and ``predict``.  Every
numeric option can also be set through an environment variable named
``DYNVOTE_<OPTION>`` (for example ``DYNVOTE_TREES=100``); an explicit flag
wins over the environment.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""
from __future__ import annotations

import argparse
import csv
import os
import secrets
import sys
from pathlib import Path

import numpy as np

from .data_io import (
    SynthSpec,
    _parse_float,
    generate_synthetic,
    load_dataset,
    load_model,
    read_manifest,
    read_table,
    save_model,
)
from .evaluation import EvalReport, SplitPlan, format_sign_tests, run_protocol
from .exceptions import IngestionError, InvalidInputError, ModelFormatError
from .forest import ForestConfig
from .multiview import MultiViewDataset, train_multiview
from .voting import Combiner, score_views, vote_batch

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
ENV_PREFIX = "DYNVOTE_"
DEFAULT_METHODS = "MV,WRF,GDV,LDV,GLDV"
DEFAULT_A_GRID = ",".join(f"{a / 10:g}" for a in range(11))


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _env(name, default):
    return os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"), default)


def _add_data_args(p):
    p.add_argument("--data", action="append", default=[], metavar="TABLE",
                   help="feature table; repeat together with --manifest for several datasets")
    p.add_argument("--manifest", action="append", default=[], metavar="FILE",
                   help="view manifest for the matching --data")
    p.add_argument("--synth", action="append", default=[], metavar="JSON",
                   help="synthetic dataset spec (JSON with SynthSpec fields)")


def _add_forest_args(p):
    p.add_argument("--trees", type=int, default=_env("trees", "500"))
    p.add_argument("--seed", type=int, default=_env("seed", None),
                   help="master seed (random and reported when omitted)")
    p.add_argument("--jobs", type=int, default=_env("jobs", "1"),
                   help="worker threads for tree training")


def _add_protocol_args(p):
    _add_data_args(p)
    _add_forest_args(p)
    p.add_argument("--neighbors", type=int, default=_env("neighbors", "7"))
    p.add_argument("--repeats", type=int, default=_env("repeats", "10"))
    p.add_argument("--fraction", type=float, default=_env("fraction", "0.5"))
    p.add_argument("--out", default=_env("out", "results"), help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dynvote", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("evaluate", help="repeated hold-out comparison of combiners")
    _add_protocol_args(p)
    p.add_argument("--methods", default=_env("methods", DEFAULT_METHODS),
                   help=f"comma-separated combiners (default {DEFAULT_METHODS})")
    p.add_argument("--baseline", action="append", default=[], metavar="CSV",
                   help="external per-repeat results (dataset,method,repeat,accuracy)")
    p.add_argument("--reference", default=None,
                   help="method the sign test compares against")

    p = sub.add_parser("sweep-a", help="accuracy of GLnew(a) over a grid of a")
    _add_protocol_args(p)
    p.add_argument("--a-grid", default=_env("a_grid", DEFAULT_A_GRID))

    p = sub.add_parser("train", help="train and save a multi-view model")
    _add_data_args(p)
    _add_forest_args(p)
    p.add_argument("--out", default=_env("out", "model.npz"), help="model file")

    p = sub.add_parser("predict", help="score a table with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, metavar="TABLE")
    p.add_argument("--manifest", default=None,
                   help="view manifest (defaults to the columns stored in the model)")
    p.add_argument("--combiner", default=_env("combiner", "GLDV"))
    p.add_argument("--neighbors", type=int, default=_env("neighbors", "7"))
    p.add_argument("--out", default=None, help="output CSV (stdout when omitted)")
    return parser


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _datasets(args):
    if len(args.data) != len(args.manifest):
        raise UsageError("--data and --manifest must be given the same number of times")
    out = []
    for table, manifest in zip(args.data, args.manifest):
        out.append((load_dataset(table, manifest), read_manifest(manifest)))
    for spec_path in args.synth:
        data = generate_synthetic(SynthSpec.from_json(spec_path))
        out.append((_renamed(data, Path(spec_path).stem), None))
    if not out:
        raise UsageError("no dataset given; use --data/--manifest or --synth")
    names = [d.name for d, _ in out]
    if len(set(names)) != len(names):
        raise UsageError(f"dataset names must be unique, got {names}")
    return out


def _renamed(data, name):
    return MultiViewDataset(data.views, data.labels, data.n_classes, data.view_names,
                            data.class_names, name)


def _seed(args) -> int:
    if args.seed is None:
        args.seed = secrets.randbits(63)
        print(f"dynvote: using generated seed {args.seed}", file=sys.stderr)
    return int(args.seed)


def _methods(text):
    try:
        combiners = [Combiner.parse(m) for m in text.split(",") if m.strip()]
    except InvalidInputError as exc:
        raise UsageError(str(exc)) from None
    if not combiners:
        raise UsageError("no methods given")
    return combiners


def _protocol(args, methods):
    seed = _seed(args)
    plan = SplitPlan(args.repeats, args.fraction, seed)
    config = ForestConfig(n_trees=args.trees, seed=seed)
    report = EvalReport()
    for data, _ in _datasets(args):
        report = report.merge(run_protocol(data, methods, plan, config,
                                           n_neighbor=args.neighbors, n_jobs=args.jobs))
    return report


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_evaluate(args) -> int:
    methods = _methods(args.methods)
    report = _protocol(args, methods)
    ours = [c.name for c in methods]
    external = []
    for path in args.baseline:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise IngestionError(f"cannot read baseline {path}: {exc}") from None
        base = EvalReport.from_csv(text)
        for d in base.datasets:
            if d not in report.accuracies:
                raise IngestionError(f"baseline {path} covers unknown dataset {d!r}")
        external += [m for m in base.methods if m not in external]
        report = EvalReport(
            {d: {**base.accuracies.get(d, {}), **per} for d, per in report.accuracies.items()},
            report.settings)
    columns = external + [m for m in ours if m not in external]
    reference = args.reference or (external[0] if external else columns[0])
    if reference not in columns:
        raise UsageError(f"reference {reference!r} is not among the methods {columns}")

    out = Path(args.out)
    _write(out / "results.csv", report.to_csv())
    _write(out / "summary.md", report.to_markdown(columns, reference))
    _write(out / "sign_test.md", format_sign_tests(
        report.sign_tests(reference, columns), reference, len(report.datasets)) + "\n")
    print((out / "summary.md").read_text(encoding="utf-8"), end="")
    return EXIT_OK


def cmd_sweep_a(args) -> int:
    try:
        grid = [float(a) for a in args.a_grid.split(",") if a.strip()]
    except ValueError:
        raise UsageError(f"cannot parse --a-grid {args.a_grid!r}") from None
    if not grid:
        raise UsageError("empty --a-grid")
    methods = [Combiner("GLNEW", a) for a in grid]
    report = _protocol(args, methods)
    names = [c.name for c in methods]
    out = Path(args.out)
    _write(out / "sweep.csv", report.to_csv())
    lines = []
    settings = " ".join(f"{k}={v}" for k, v in report.settings.items())
    lines += [f"<!-- {settings} -->", ""]
    lines.append("| Dataset | " + " | ".join(f"a={a:g}" for a in grid) + " |")
    lines.append("|---|" + "---|" * len(grid))
    for d in report.datasets:
        cells = [f"{100 * report.mean(d, m):.2f}% ± {100 * report.std(d, m):.2f}" for m in names]
        lines.append(f"| {d} | " + " | ".join(cells) + " |")
    lines += ["", "a=0 uses only the global weight (GDV), a=1 only the local weight (LDV)"]
    text = "\n".join(lines) + "\n"
    _write(out / "sweep.md", text)
    print(text, end="")
    return EXIT_OK


def cmd_train(args) -> int:
    datasets = _datasets(args)
    if len(datasets) != 1:
        raise UsageError("train takes exactly one dataset")
    data, manifest = datasets[0]
    seed = _seed(args)
    ens = train_multiview(data, ForestConfig(n_trees=args.trees, seed=seed), n_jobs=args.jobs)
    if manifest is not None:
        header, _ = read_table(args.data[0], manifest.delimiter)
        cols = [[header[c] for c in cols] for cols in manifest.resolve(header)]
        ens.metadata = {"view_columns": cols, "label_column": manifest.label_column}
    else:
        ens.metadata = {"view_columns": [[f"{vn}_{j}" for j in range(d)]
                                         for vn, d in zip(data.view_names, data.view_dims)],
                        "label_column": "label"}
    ens.metadata["seed"] = seed
    save_model(ens, args.out)
    print(f"saved {data.n_views}-view model ({args.trees} trees per view, seed {seed}) "
          f"to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_predict(args) -> int:
    ens = load_model(args.model)
    combiner = Combiner.parse(args.combiner)
    if args.manifest is not None:
        manifest = read_manifest(args.manifest)
        header, rows = read_table(args.data, manifest.delimiter)
        view_cols = manifest.resolve(header)
    else:
        cols = ens.metadata.get("view_columns")
        if cols is None:
            raise UsageError("model stores no column names; pass --manifest")
        header, rows = read_table(args.data)
        pos = {h: i for i, h in enumerate(header)}
        view_cols = []
        for q, names in enumerate(cols):
            missing = [c for c in names if c not in pos]
            if missing:
                raise IngestionError(
                    f"view {ens.data.view_names[q]!r} needs column {missing[0]!r}, "
                    "absent from the table")
            view_cols.append([pos[c] for c in names])
    if not rows:
        raise IngestionError(f"table {args.data} has no data rows")
    X_views = [np.array([[_parse_float(row[c], line, header[c]) for c in vc]
                         for line, row in rows]) for vc in view_cols]
    scores = score_views(ens, X_views, args.neighbors, need_local=combiner.needs_local)
    final, weights, fallback = vote_batch(ens, X_views, [combiner], scores=scores)[combiner.name]
    labels = scores.labels
    names = ens.data.class_names
    fh = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        head = ["row", "label"]
        for vn in ens.data.view_names:
            head += [f"{vn}_label", f"{vn}_weight"]
        w.writerow(head + ["fallback", "combiner"])
        for i, (line, _) in enumerate(rows):
            cells = [line, names[final[i]]]
            for q in range(ens.n_views):
                cells += [names[labels[q, i]], repr(float(weights[q, i]))]
            w.writerow(cells + [int(fallback[i]), combiner.name])
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


COMMANDS = {"evaluate": cmd_evaluate, "sweep-a": cmd_sweep_a, "train": cmd_train,
            "predict": cmd_predict}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"dynvote: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IngestionError, InvalidInputError, ModelFormatError, FileNotFoundError) as exc:
        print(f"dynvote: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"dynvote: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

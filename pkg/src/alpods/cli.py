"""Command line interface: ``alpods <command> [options]``.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 acceptance failure
(``bench-iris`` only).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import fields

from .dag import GrowthParams
from .data import Schema, generate_jittered_iris, load_csv, write_csv
from .errors import AlpodsError, EmptyDataError, InputError
from .evaluation import cross_validate
from .pipeline import Model, TrainConfig, train
from .vispanel import PanelSpec, probdiff, render_panel, score_pairs, select_panel, write_manifest

log = logging.getLogger("alpods")

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_ACCEPTANCE = 0, 1, 2, 3

# acceptance thresholds of the jittered-Iris benchmark
IRIS_MIN_ACCURACY = 0.94
IRIS_MAX_MEAN_CLUSTERS = 5.0
IRIS_MAX_CLUSTERS = 9
IRIS_MAX_MEAN_CONDITIONS = 4.0
IRIS_MAX_SECONDS = 60.0


def _dump(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


def _schema(args) -> Schema | None:
    return Schema.from_json(args.schema) if getattr(args, "schema", None) else None


def run_config(args) -> TrainConfig:
    """Config file values, overridden by explicit flags."""
    raw = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise InputError("config file must hold a JSON object")
    for name in [f.name for f in fields(GrowthParams)] + ["per_class_events", "max_overlap", "seed"]:
        value = getattr(args, name, None)
        if value is not None:
            raw[name] = value
    return TrainConfig.from_dict(raw)


def _threads(args) -> int:
    return args.threads if args.threads else (os.cpu_count() or 1)


# -- commands ----------------------------------------------------------------

def cmd_gen_iris(args) -> int:
    table, split = generate_jittered_iris(args.seed, args.repetitions, args.noise_variance_fraction)
    os.makedirs(args.out, exist_ok=True)
    write_csv(split.train, os.path.join(args.out, "iris_train.csv"))
    write_csv(split.test, os.path.join(args.out, "iris_test.csv"))
    print(f"wrote {split.train.n} training and {split.test.n} test cases to {args.out}")
    return EXIT_OK


def _sidecar(bundle_path: str, suffix: str) -> str:
    stem = bundle_path[:-5] if bundle_path.endswith(".json") else bundle_path
    return f"{stem}{suffix}"


def cmd_train(args) -> int:
    config = run_config(args)
    table = load_csv(args.data, _schema(args))
    if len(table.classes) < 2:
        raise InputError("need >= 2 classes in the training data")
    model = train(table, config)
    model.save(args.out)
    sheet = model.rule_sheet()
    with open(_sidecar(args.out, ".rules.txt"), "w", encoding="utf-8") as fh:
        fh.write(sheet)
    _dump([p.to_dict(model.markers) for p in model.populations], _sidecar(args.out, ".descriptions.json"))
    print(sheet, end="")
    print(f"{len(model.populations)} populations selected from {model.num_candidates} candidates")
    return EXIT_OK


def cmd_classify(args) -> int:
    model = Model.load(args.bundle)
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        try:
            table = load_csv(args.data, _schema(args))
        except EmptyDataError:
            return EXIT_OK
        for exp in model.explain(table):
            record = exp.to_dict() if args.explain else {"case_id": exp.case_id, "predicted": exp.predicted}
            if args.explain and args.text:
                out.write(exp.to_text())
            else:
                out.write(json.dumps(record) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def _parse_pairs(specs, markers) -> list[tuple[int, int]]:
    pairs = []
    for spec in specs:
        names = [s.strip() for s in spec.split(",")]
        if len(names) != 2:
            raise InputError(f"--pairs expects X,Y, got {spec!r}")
        missing = [n for n in names if n not in markers]
        if missing:
            raise InputError(f"unknown markers in --pairs: {missing}")
        i, j = (markers.index(n) for n in names)
        if i == j:
            raise InputError(f"--pairs needs two different markers, got {spec!r}")
        pairs.append((i, j))
    return pairs


def cmd_vispanel(args) -> int:
    model = Model.load(args.bundle)
    by_id = {p.id: p for p in model.populations}
    if args.population not in by_id:
        raise InputError(f"unknown population {args.population}; known ids: {sorted(by_id)}")
    pop = by_id[args.population]
    table = load_csv(args.data, _schema(args))
    events = model.align(table)
    members = pop.mask(events)
    if args.pairs:
        pairs = _parse_pairs(args.pairs, list(table.markers))
        mask = members if 0 < members.sum() < members.size else None
        scores = [probdiff(table, mask, p).score if mask is not None else 0.0 for p in pairs]
        spec = PanelSpec(pairs, scores, pop.id, len(pairs))
    else:
        mask = members
        if not 0 < mask.sum() < mask.size:
            # fall back to the population's class when the population is empty or everything
            mask = table.case_classes[table.case_codes] == pop.asserted
        if not 0 < mask.sum() < mask.size:
            raise InputError("cannot score pairs: the data has no contrast for this population")
        spec = select_panel(score_pairs(table, mask, threads=_threads(args)), args.max_plots, pop.id)
    files = render_panel(table, members, spec, args.out, label=f"{pop.name} ({pop.asserted})", seed=args.seed)
    write_manifest(spec, table, files, os.path.join(args.out, "manifest.json"),
                   {"name": pop.name, "class": pop.asserted, "rule": pop.rule()})
    for f in files:
        print(f)
    return EXIT_OK


def iris_gate(summary: dict, seconds: float) -> list[tuple[str, bool, str]]:
    return [
        ("mean accuracy >= 0.94", summary["mean_accuracy"] >= IRIS_MIN_ACCURACY, f"{summary['mean_accuracy']:.4f}"),
        ("mean clusters <= 5", summary["mean_clusters"] <= IRIS_MAX_MEAN_CLUSTERS, f"{summary['mean_clusters']:.2f}"),
        ("max clusters <= 9", summary["max_clusters"] <= IRIS_MAX_CLUSTERS, str(summary["max_clusters"])),
        ("mean conditions <= 4", summary["mean_conditions"] <= IRIS_MAX_MEAN_CONDITIONS,
         f"{summary['mean_conditions']:.2f}"),
        ("wall clock < 60 s", seconds < IRIS_MAX_SECONDS, f"{seconds:.1f} s"),
    ]


def cmd_bench_iris(args) -> int:
    config = run_config(args)
    table, _ = generate_jittered_iris(args.seed)
    report = cross_validate(table, config, rounds=args.rounds, mode="repeated-split",
                            seed=args.seed, threads=_threads(args))
    print(report.to_text(), end="")
    if args.json:
        _dump(report.to_dict(), args.json)
    gate = iris_gate(report.summary(), report.wall_clock_seconds)
    for name, ok, value in gate:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  ({value})")
    return EXIT_OK if all(ok for _, ok, _ in gate) else EXIT_ACCEPTANCE


def cmd_evaluate(args) -> int:
    config = run_config(args)
    table = load_csv(args.data, _schema(args))
    report = cross_validate(table, config, rounds=args.rounds, mode=args.mode, seed=args.seed,
                            threads=_threads(args))
    print(report.to_text(), end="")
    if args.json:
        _dump(report.to_dict(), args.json)
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def _add_growth_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--min-size-fraction", dest="min_size_fraction", type=float)
    p.add_argument("--max-depth", dest="max_depth", type=int)
    p.add_argument("--si-threshold", dest="si_threshold", type=float)
    p.add_argument("--max-nodes", dest="max_nodes", type=int)
    p.add_argument("--max-children-per-variable", dest="max_children_per_variable", type=int)
    p.add_argument("--min-region-support", dest="min_region_support", type=float)
    p.add_argument("--si-complement", dest="si_complement", action="store_const", const=True)
    p.add_argument("--grid-points", dest="grid_points", type=int)
    p.add_argument("--per-class-events", dest="per_class_events", type=int)
    p.add_argument("--max-overlap", dest="max_overlap", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="alpods", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-iris", help="write jittered Iris train/test CSVs")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--repetitions", type=int, default=10)
    p.add_argument("--noise-variance-fraction", type=float, default=0.10)
    p.set_defaults(func=cmd_gen_iris)

    p = sub.add_parser("train", help="grow the DAG, select populations, write a bundle")
    p.add_argument("--data", required=True)
    p.add_argument("--schema")
    p.add_argument("--out", required=True, help="bundle path (JSON)")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, default=0)
    _add_growth_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="classify the cases of a CSV with a bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--schema")
    p.add_argument("--explain", action="store_true")
    p.add_argument("--text", action="store_true", help="human-readable explanations")
    p.add_argument("--out")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("vispanel", help="render the visualisation panel of one population")
    p.add_argument("--bundle", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--schema")
    p.add_argument("--population", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--pairs", action="append", help="X,Y marker pair; repeatable; overrides scoring")
    p.add_argument("--max-plots", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=0)
    p.set_defaults(func=cmd_vispanel)

    p = sub.add_parser("bench-iris", help="jittered-Iris cross-validation benchmark")
    p.add_argument("--rounds", type=int, default=50)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--json")
    p.add_argument("--threads", type=int, default=0)
    _add_growth_flags(p)
    p.set_defaults(func=cmd_bench_iris)

    p = sub.add_parser("evaluate", help="cross-validate on a CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--schema")
    p.add_argument("--rounds", type=int, default=50)
    p.add_argument("--mode", choices=["auto", "repeated-split", "leave-one-out"], default="auto")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json")
    p.add_argument("--threads", type=int, default=0)
    _add_growth_flags(p)
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (AlpodsError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except BrokenPipeError:
        # downstream reader closed early (e.g. piped into head)
        sys.stderr.close()
        return EXIT_OK
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ingest, eval, break, vet, report."""
from __future__ import annotations

import argparse
import json
import sys
import traceback
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import breaklab, vetting
from .core import TabTextError, Table
from .embed import make_embedder
from .evaluate import (
    EvalResult,
    ExperimentSpec,
    emit_report,
    format_rows_text,
    parse_results_csv,
    run_experiment,
)
from .ingest import (
    DatasetManifest,
    ingest_dataset,
    load_manifest,
    manifest_from_dict,
    write_table_cache,
)
from .models import Gbdt, make_model
from .select import applicable

EXIT_INGEST = 2
EXIT_EVAL = 3
EXIT_BREAK = 4
EXIT_VET = 5


def _load_manifests(entries) -> list[DatasetManifest]:
    return [
        load_manifest(entry) if isinstance(entry, str) else manifest_from_dict(entry)
        for entry in entries
    ]


def cmd_ingest(args) -> int:
    try:
        manifest = load_manifest(args.manifest)
        table, report = ingest_dataset(manifest)
    except (TabTextError, FileNotFoundError, OSError, ValueError, KeyError) as exc:
        print(f"ingest failed: {exc}", file=sys.stderr)
        return EXIT_INGEST
    print(report.to_text(), end="")
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    cache = out / f"{manifest.name}.clean.csv"
    write_table_cache(table, cache)
    (out / f"{manifest.name}.report.json").write_text(
        json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8"
    )
    print(f"cached cleaned table: {cache}")
    return 0


def _build_grid(config: dict, manifests: list[DatasetManifest], seed: int) -> list[ExperimentSpec]:
    embedders = [make_embedder(e) for e in config["embedders"]]
    models = [make_model(m) for m in config["models"]]
    selectors = config.get("selectors", [None])
    with_text_values = config.get("with_text", [True, False])

    # a selector nobody can use is a config mistake, not a skippable cell
    for sel in selectors:
        if sel is None:
            continue
        if not any(applicable(sel, m.task) for m in manifests):
            raise TabTextError(f"selector {sel!r} is not applicable to any configured dataset")

    specs = []
    for manifest in manifests:
        for model in models:
            for embedder in embedders:
                for sel in selectors:
                    if sel is not None and not applicable(sel, manifest.task):
                        continue
                    for with_text in with_text_values:
                        specs.append(
                            ExperimentSpec(
                                manifest=manifest,
                                embedder=embedder,
                                selector=sel,
                                model=model,
                                with_text=bool(with_text),
                                k_folds=int(config.get("k_folds", 5)),
                                feature_cap=int(config.get("feature_cap", 300)),
                                row_cap=int(config.get("row_cap", 3000)),
                                seed=seed,
                            )
                        )
    return specs


def cmd_eval(args) -> int:
    try:
        config = json.loads(Path(args.config).read_text(encoding="utf-8"))
        manifests = _load_manifests(config["manifests"])
        seed = args.seed if args.seed is not None else int(config.get("seed", 0))
        specs = _build_grid(config, manifests, seed)
        tables: dict[str, Table] = {}
        for manifest in manifests:
            tables[manifest.name], _ = ingest_dataset(manifest)
    except (TabTextError, FileNotFoundError, OSError, ValueError, KeyError) as exc:
        print(f"eval setup failed: {exc}", file=sys.stderr)
        return EXIT_EVAL

    results: list[EvalResult] = []
    failures: list[str] = []

    def one(spec: ExperimentSpec):
        try:
            return run_experiment(spec, tables.get(spec.dataset_name))
        except Exception as exc:  # noqa: BLE001 - cell failures are reported, not fatal
            return f"{spec.dataset_name}/{spec.condition()}: {exc}"

    jobs = max(1, args.jobs)
    if jobs == 1:
        outcomes = [one(s) for s in specs]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(one, specs))
    for outcome in outcomes:
        if isinstance(outcome, EvalResult):
            results.append(outcome)
        else:
            failures.append(outcome)

    out_dir = args.out or config.get("out", "run")
    paths = emit_report(results, out_dir)
    if failures:
        with open(paths["txt"], "a", encoding="utf-8") as fh:
            fh.write("\nfailures:\n")
            fh.writelines(f"  {line}\n" for line in failures)
        print(f"{len(failures)} experiment(s) failed; see {paths['txt']}", file=sys.stderr)
        return EXIT_EVAL
    print(f"wrote {paths['csv']}")
    return 0


def _default_break_embedders():
    return [
        make_embedder({"kind": "tfidf"}),
        make_embedder({"kind": "wordvec", "vector_file": str(breaklab.toy_vector_file())}),
        make_embedder({"kind": "hashed"}),
    ]


def cmd_break(args) -> int:
    try:
        config = {}
        if args.config:
            config = json.loads(Path(args.config).read_text(encoding="utf-8"))
        seed = args.seed if args.seed is not None else int(config.get("seed", 0))
        if "manifests" in config:
            tables = []
            for manifest in _load_manifests(config["manifests"]):
                table, _ = ingest_dataset(manifest)
                tables.append(table)
        else:
            tables = [breaklab.make_break_table(seed=seed)]
        if "embedders" in config:
            embedders = [make_embedder(e) for e in config["embedders"]]
        else:
            embedders = _default_break_embedders()
        # compact booster keeps the default run at desk scale
        model = make_model(config["model"]) if "model" in config else Gbdt(4, 0.3, 30)
        matrix = breaklab.run_break_suite(tables, embedders, model, seed)
    except (TabTextError, FileNotFoundError, OSError, ValueError, KeyError) as exc:
        traceback.print_exc()
        print(f"break suite failed: {exc}", file=sys.stderr)
        return EXIT_BREAK
    print(matrix.to_text(), end="")
    out = Path(args.out or "break-run")
    out.mkdir(parents=True, exist_ok=True)
    (out / "break_matrix.csv").write_text(matrix.to_csv(), encoding="utf-8")
    (out / "break_matrix.txt").write_text(matrix.to_text(), encoding="utf-8")
    print(f"wrote {out / 'break_matrix.csv'}")
    return 0


def cmd_vet(args) -> int:
    try:
        tables = []
        for path in args.manifests:
            table, _ = ingest_dataset(load_manifest(path))
            tables.append(table)
        out = Path(args.out or "vet-run")
        out.mkdir(parents=True, exist_ok=True)
        all_checks = {}
        for table in tables:
            checks = vetting.run_curation_checks(table, seed=args.seed or 0)
            all_checks[table.name] = [
                {"rule": c.rule, "verdict": c.verdict, "detail": c.detail} for c in checks
            ]
            print(f"{table.name}:")
            for c in checks:
                print(f"  {c.rule}: {c.verdict} ({c.detail})")
        (out / "checks.json").write_text(
            json.dumps(all_checks, indent=2) + "\n", encoding="utf-8"
        )
        if args.pair:
            a_name, b_name = args.pair
            by_name = {t.name: t for t in tables}
            if a_name not in by_name or b_name not in by_name:
                raise TabTextError("--pair names must match manifest dataset names")
            if args.live:
                client = vetting.HttpChatLlmClient(args.endpoint, args.model_name)
                print("note: live LLM responses are outside --seed determinism")
            else:
                client = vetting.ReplayLlmClient(args.fixtures)
            pair_tables = [by_name[a_name], by_name[b_name]]
            matrix = vetting.coverage_matrix(pair_tables, client)
            paths = vetting.export_coverage(matrix, out)
            a_to_b = matrix.coverage[0, 1]
            print(f"coverage {a_name} -> {b_name}: {a_to_b:.3f} (binary {matrix.binary[0, 1]})")
            print(f"coverage {b_name} -> {a_name}: {matrix.coverage[1, 0]:.3f}"
                  f" (binary {matrix.binary[1, 0]})")
            print(f"wrote {paths['coverage']}")
    except (TabTextError, FileNotFoundError, OSError, ValueError, KeyError) as exc:
        print(f"vet failed: {exc}", file=sys.stderr)
        return EXIT_VET
    return 0


def cmd_report(args) -> int:
    try:
        rows = parse_results_csv(Path(args.results).read_text(encoding="utf-8"))
        text = format_rows_text(rows)
    except (TabTextError, FileNotFoundError, OSError, ValueError) as exc:
        print(f"report failed: {exc}", file=sys.stderr)
        return 1
    print(text, end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "results.txt").write_text(text, encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tabtext",
        description="Benchmark harness for tabular prediction tasks with text columns",
    )
    parser.add_argument("--seed", type=int, default=None, help="global seed (overrides config)")
    parser.add_argument("--jobs", type=int, default=1, help="worker count for grid cells")
    parser.add_argument("--out", default=None, help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load, clean and type-classify one dataset")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("eval", help="run a with/without-text experiment grid")
    p.add_argument("config")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("break", help="run the synthetic embedding-failure suite")
    p.add_argument("config", nargs="?", default=None)
    p.set_defaults(func=cmd_break)

    p = sub.add_parser("vet", help="curation rule checks and schema coverage")
    p.add_argument("manifests", nargs="+")
    p.add_argument("--pair", nargs=2, metavar=("A", "B"), default=None)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--mock", action="store_true", default=True,
                       help="use canned LLM responses (default)")
    group.add_argument("--live", action="store_true", default=False,
                       help="use the HTTP chat-completion client")
    p.add_argument("--fixtures", default=str(vetting.default_fixture_dir()),
                   help="canned-response directory for --mock")
    p.add_argument("--endpoint", default="https://api.openai.com/v1/chat/completions")
    p.add_argument("--model-name", default="gpt-4o")
    p.set_defaults(func=cmd_vet)

    p = sub.add_parser("report", help="re-render the text report from a results.csv")
    p.add_argument("results")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point.

Stage commands run against a single JSON config (content-addressed outputs,
cache hits are no-ops); a few commands also work standalone on explicit files
(emit --parts, evaluate score, prompts). Exit codes: 0 ok, 1 user error,
2 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from landmarkpipe.config import STAGES, PipelineConfig
from landmarkpipe.errors import UserError


def _feature_spec(value: str) -> dict:
    """--features tfidf:<max> | embedding"""
    if value == "embedding":
        return {"kind": "embedding"}
    if value.startswith("tfidf:"):
        try:
            return {"kind": "tfidf", "max_features": int(value.split(":", 1)[1])}
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad tfidf spec {value!r}") from None
    raise argparse.ArgumentTypeError(f"features must be tfidf:<max> or embedding, got {value!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="landmarkpipe", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run pipeline stages from a config file")
    run.add_argument("--config", required=True)
    group = run.add_mutually_exclusive_group()
    group.add_argument("--stage", choices=STAGES, help="run exactly this stage")
    group.add_argument("--through", choices=STAGES, help="run every stage up to and including this one")
    run.add_argument("--force", action="store_true", help="ignore stage caches")
    run.add_argument("--features", type=_feature_spec, default=None)

    cluster = sub.add_parser("cluster", help="clustering commands")
    cluster_sub = cluster.add_subparsers(dest="subcommand", required=True)
    fit = cluster_sub.add_parser("fit", help="fit the configured clustering stage")
    fit.add_argument("--config", required=True)
    fit.add_argument("--algo", choices=["gmm", "hierarchical", "birch", "bisecting_kmeans", "random"])
    fit.add_argument("--k", type=int)
    fit.add_argument("--seed", type=int)
    fit.add_argument("--force", action="store_true")

    metrics = sub.add_parser("metrics", help="cluster-quality sweep")
    metrics_sub = metrics.add_subparsers(dest="subcommand", required=True)
    sweep = metrics_sub.add_parser("sweep")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--k-list", help="comma-separated cluster counts")
    sweep.add_argument("--features", type=_feature_spec, default=None)
    sweep.add_argument("--force", action="store_true")

    landmark = sub.add_parser("landmark", help="landmark selection and annotation")
    landmark_sub = landmark.add_subparsers(dest="subcommand", required=True)
    select = landmark_sub.add_parser("select")
    select.add_argument("--config", required=True)
    select.add_argument("--strategy", choices=["centroid", "llm", "llm_choice", "random"])
    select.add_argument("--seed", type=int)
    select.add_argument("--force", action="store_true")
    annotate = landmark_sub.add_parser("annotate")
    annotate.add_argument("--config", required=True)
    mode = annotate.add_mutually_exclusive_group()
    mode.add_argument("--interactive", action="store_true")
    mode.add_argument("--import", dest="import_file", metavar="LABELS_JSONL")
    mode.add_argument("--reveal-gold", action="store_true", help="simulation: copy hidden gold labels")
    annotate.add_argument("--force", action="store_true")

    augment = sub.add_parser("augment", help="generate augmented samples")
    augment.add_argument("method", choices=["wordnet", "rewrite", "rag", "all"])
    augment.add_argument("--config", required=True)
    augment.add_argument("--variants", type=int, default=None)
    augment.add_argument("--force", action="store_true")

    diagnose = sub.add_parser("diagnose", help="diversity / label / length reports")
    diagnose.add_argument("--config", required=True)
    diagnose.add_argument("--force", action="store_true")

    emit = sub.add_parser("emit", help="build or combine fine-tuning JSONL")
    emit.add_argument("--config")
    emit.add_argument("--scheme", choices=["multi_label", "hierarchical_2"])
    emit.add_argument("--subject")
    emit.add_argument("--parts", help="comma-separated JSONL parts to combine (standalone mode)")
    emit.add_argument("--out", help="combined output path (standalone mode)")
    emit.add_argument("--seed", type=int, default=0)
    emit.add_argument("--force", action="store_true")

    evaluate = sub.add_parser("evaluate", help="score predictions")
    evaluate_sub = evaluate.add_subparsers(dest="subcommand", required=True)
    score = evaluate_sub.add_parser("score")
    score.add_argument("--predictions")
    score.add_argument("--config")
    score.add_argument("--corpus", help="standalone mode: split corpus JSONL")
    score.add_argument("--scheme", choices=["multi_label", "hierarchical_2"], default="multi_label")
    score.add_argument("--split", default="test")
    score.add_argument("--out", help="standalone mode: report JSON path")
    score.add_argument("--force", action="store_true")

    prompts = sub.add_parser("prompts", help="emit prediction prompts for a split")
    prompts.add_argument("--corpus", required=True)
    prompts.add_argument("--split", default="test")
    prompts.add_argument("--subject", required=True)
    prompts.add_argument("--out", required=True)

    serve = sub.add_parser("mock-serve", help="run the deterministic mock endpoint")
    serve.add_argument("--port", type=int, default=8099)
    serve.add_argument("--fixtures", help="transcript dir served verbatim on hash match")
    serve.add_argument("--embed-dim", type=int, default=32)

    return parser


def _load_config(path: str, overrides: dict) -> PipelineConfig:
    if not Path(path).exists():
        raise UserError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UserError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    for dotted, value in overrides.items():
        if value is None:
            continue
        cursor = data
        keys = dotted.split(".")
        for key in keys[:-1]:
            cursor = cursor.setdefault(key, {})
        cursor[keys[-1]] = value
    return PipelineConfig(data, base_dir=Path(path).parent.resolve())


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except UserError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 1
    except Exception as exc:  # internal failure
        logging.getLogger(__name__).exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    from landmarkpipe import pipeline

    if args.command == "run":
        overrides = {}
        if args.features:
            overrides["features.kind"] = args.features["kind"]
            if "max_features" in args.features:
                overrides["features.max_features"] = args.features["max_features"]
        cfg = _load_config(args.config, overrides)
        if args.stage:
            pipeline.run_stage(args.stage, cfg, force=args.force)
        else:
            pipeline.run_all(cfg, through=args.through, force=args.force)
        return 0

    if args.command == "cluster":
        cfg = _load_config(
            args.config,
            {"cluster.algorithm": args.algo, "cluster.k": args.k, "cluster.seed": args.seed},
        )
        pipeline.run_stage("cluster", cfg, force=args.force)
        return 0

    if args.command == "metrics":
        overrides = {}
        if args.k_list:
            overrides["metrics.k_list"] = [int(k) for k in args.k_list.split(",")]
        if args.features:
            overrides["features.kind"] = args.features["kind"]
            if "max_features" in args.features:
                overrides["features.max_features"] = args.features["max_features"]
        cfg = _load_config(args.config, overrides)
        pipeline.run_stage("metrics", cfg, force=args.force)
        return 0

    if args.command == "landmark":
        if args.subcommand == "select":
            strategy = {"llm": "llm_choice"}.get(args.strategy, args.strategy)
            cfg = _load_config(args.config, {"landmarks.strategy": strategy, "landmarks.seed": args.seed})
            pipeline.run_stage("landmarks", cfg, force=args.force)
            return 0
        overrides = {}
        if args.interactive:
            overrides["annotate.mode"] = "interactive"
        elif args.import_file:
            overrides["annotate.mode"] = "import"
            overrides["annotate.labels_file"] = args.import_file
        elif args.reveal_gold:
            overrides["annotate.mode"] = "reveal_gold"
        cfg = _load_config(args.config, overrides)
        pipeline.run_stage("annotate", cfg, force=args.force)
        return 0

    if args.command == "augment":
        overrides = {}
        methods = ("wordnet", "rewrite", "rag") if args.method == "all" else (args.method,)
        for m in ("wordnet", "rewrite", "rag"):
            if m not in methods:
                overrides[f"augment.{m}.variants"] = 0
            elif args.variants is not None:
                overrides[f"augment.{m}.variants"] = args.variants
        cfg = _load_config(args.config, overrides)
        pipeline.run_stage("augment", cfg, force=args.force)
        return 0

    if args.command == "diagnose":
        cfg = _load_config(args.config, {})
        pipeline.run_stage("diagnose", cfg, force=args.force)
        return 0

    if args.command == "emit":
        if args.parts:
            from landmarkpipe.emit import combine_datasets

            if not args.out:
                raise UserError("emit --parts needs --out")
            manifest = combine_datasets(
                [p for p in args.parts.split(",") if p],
                args.out,
                seed=args.seed,
                scheme=args.scheme,
                subject=args.subject or "",
            )
            print(json.dumps(manifest.to_json(), indent=2))
            return 0
        if not args.config:
            raise UserError("emit needs --config or --parts")
        cfg = _load_config(args.config, {"emit.scheme": args.scheme, "emit.subject": args.subject})
        pipeline.run_stage("emit", cfg, force=args.force)
        return 0

    if args.command == "evaluate":
        if args.corpus:
            from landmarkpipe.corpus import load_split_corpus
            from landmarkpipe.evaluate import score_run

            if not args.predictions:
                raise UserError("evaluate score needs --predictions")
            corpus = load_split_corpus(args.corpus)
            report = score_run(args.predictions, corpus, args.scheme, split=args.split)
            payload = json.dumps(report.to_json(), indent=2)
            if args.out:
                Path(args.out).write_text(payload + "\n", encoding="utf-8")
            print(payload)
            return 0
        if not args.config:
            raise UserError("evaluate score needs --config or --corpus")
        cfg = _load_config(args.config, {"evaluate.predictions": args.predictions})
        pipeline.run_stage("evaluate", cfg, force=args.force)
        return 0

    if args.command == "prompts":
        from landmarkpipe.corpus import load_split_corpus
        from landmarkpipe.emit import build_predict_prompt

        corpus = load_split_corpus(args.corpus)
        docs = corpus.docs_in_split(args.split)
        if not docs:
            raise UserError(f"no documents in split {args.split!r}")
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            for doc in docs:
                rec = {"id": doc.id, "prompt": build_predict_prompt(doc.text, args.subject)}
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
        print(f"wrote {len(docs)} prompts to {args.out}")
        return 0

    if args.command == "mock-serve":
        from landmarkpipe.mockserver import MockLlmServer

        server = MockLlmServer(port=args.port, fixture_dir=args.fixtures, embed_dim=args.embed_dim)
        print(f"mock endpoint listening on {server.base_url}")
        server.serve_forever()
        return 0

    raise UserError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())

"""Stage orchestration: content-addressed runs of the full workflow.

Each stage writes into out_dir/<stage>/<config-hash>/ together with the
resolved config snapshot and a _SUCCESS marker; re-running a completed stage
is a no-op cache hit. Changing a config key invalidates exactly the stages
whose inputs it feeds (and everything downstream of them).
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from landmarkpipe import metrics as cmetrics
from landmarkpipe.augment import (
    AugmentStats,
    SynonymDb,
    filter_labels,
    llm_rewrite,
    load_samples,
    rag_generate,
    save_samples,
    wordnet_replace,
)
from landmarkpipe.config import STAGE_PARENTS, STAGES, PipelineConfig
from landmarkpipe.corpus import LabelCatalog, load_corpus, load_split_corpus, save_corpus_jsonl, split_corpus
from landmarkpipe.diagnostics import (
    diversity_report,
    diversity_to_csv,
    diversity_to_markdown,
    label_distribution_report,
    length_report,
)
from landmarkpipe.emit import build_train_record, combine_datasets, emit_jsonl
from landmarkpipe.errors import LandmarkPipeError, UserError
from landmarkpipe.evaluate import cot_rag_label, score_run
from landmarkpipe.landmark import LandmarkSet, SelectionStrategy, annotate, select_landmarks
from landmarkpipe.vectorize import FeatureMatrix, TfidfModel, embed_corpus, tfidf_fit_transform

log = logging.getLogger(__name__)


def run_stage(stage: str, cfg: PipelineConfig, force: bool = False) -> Path:
    """Run one stage (parents must have completed); returns its output dir."""
    if stage not in STAGES:
        raise UserError(f"unknown stage {stage!r} (stages: {', '.join(STAGES)})")
    for parent in STAGE_PARENTS[stage]:
        if not _done(cfg.stage_dir(parent)):
            raise UserError(f"stage {stage!r} needs {parent!r} to run first (missing {cfg.stage_dir(parent)})")
    out = cfg.stage_dir(stage)
    if _done(out) and not force:
        log.info("stage %s: cache hit at %s", stage, out)
        print(f"[{stage}] cache hit: {out}")
        return out
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "config.json", "w", encoding="utf-8") as fh:
        json.dump(cfg.resolved(), fh, indent=2, sort_keys=True)
    _RUNNERS[stage](cfg, out)
    (out / "_SUCCESS").touch()
    print(f"[{stage}] done: {out}")
    return out


def run_all(cfg: PipelineConfig, through: str | None = None, force: bool = False) -> Path:
    last = None
    for stage in STAGES:
        last = run_stage(stage, cfg, force=force)
        if stage == through:
            break
    return last


def _done(path: Path) -> bool:
    return (path / "_SUCCESS").exists()


# -- artifact helpers ---------------------------------------------------------


def load_stage_corpus(cfg: PipelineConfig):
    return load_split_corpus(cfg.stage_dir("ingest") / "corpus.jsonl", name=cfg["corpus"].get("path"))


def load_catalog(cfg: PipelineConfig) -> LabelCatalog:
    return LabelCatalog.from_file(cfg.stage_dir("ingest") / "catalog.json")


def save_features(features: FeatureMatrix, out: Path) -> None:
    if sp.issparse(features.rows):
        sp.save_npz(out / "features.npz", features.rows.tocsr())
    else:
        np.savez(out / "features.npz", dense=features.rows)
    with open(out / "doc_ids.json", "w", encoding="utf-8") as fh:
        json.dump({"doc_ids": features.doc_ids, "kind": features.kind}, fh)


def load_features(stage_dir: Path) -> FeatureMatrix:
    with open(stage_dir / "doc_ids.json", encoding="utf-8") as fh:
        meta = json.load(fh)
    path = stage_dir / "features.npz"
    try:
        rows = sp.load_npz(path)
    except ValueError:
        rows = np.load(path)["dense"]
    return FeatureMatrix(rows, meta["doc_ids"], meta["kind"])


def load_stage_landmarks(cfg: PipelineConfig, stage: str = "annotate") -> LandmarkSet:
    return LandmarkSet.load(cfg.stage_dir(stage) / "landmarks.jsonl")


# -- stage runners -------------------------------------------------------------


def _stage_ingest(cfg: PipelineConfig, out: Path) -> None:
    corpus_cfg = cfg["corpus"]
    corpus = load_corpus(cfg.path(corpus_cfg["path"]), format=corpus_cfg["format"])
    corpus.label_scheme = corpus_cfg["label_scheme"]
    if any(d.split is None for d in corpus.documents):
        corpus = split_corpus(corpus, tuple(cfg["split"]["ratios"]), cfg["split"]["seed"])
    else:
        for d in corpus.documents:
            d.labels_hidden = d.split == "train"
    save_corpus_jsonl(corpus, out / "corpus.jsonl")

    catalog_path = cfg.path(corpus_cfg["catalog"])
    if catalog_path is None:
        # derive a catalog from the visible gold labels when none is supplied
        labels = sorted({lab for d in corpus.documents for lab in d.gold_labels})
        if not labels:
            raise UserError("no catalog configured and the corpus carries no labels")
        payload = {"labels": labels}
    else:
        with open(catalog_path, encoding="utf-8") as fh:
            payload = json.load(fh)
    with open(out / "catalog.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, indent=2)


def _feature_matrix_for(cfg: PipelineConfig, corpus, docs, out: Path | None):
    kind = cfg["features"]["kind"]
    from landmarkpipe.corpus import Corpus

    sub = Corpus(documents=list(docs), name=corpus.name, label_scheme=corpus.label_scheme)
    if kind == "tfidf":
        model, features = tfidf_fit_transform(sub, cfg["features"]["max_features"])
        if out is not None:
            with open(out / "tfidf_model.json", "w", encoding="utf-8") as fh:
                json.dump(model.to_json(), fh)
    else:
        gateway = cfg.make_gateway()
        cache_dir = cfg.path(cfg["features"]["cache_dir"])
        features = embed_corpus(sub, gateway, cache_dir=cache_dir)
    return features


def _stage_features(cfg: PipelineConfig, out: Path) -> None:
    corpus = load_stage_corpus(cfg)
    docs = corpus.docs_in_split(cfg["features"]["split"])
    if not docs:
        raise UserError(f"no documents in features.split={cfg['features']['split']!r}")
    features = _feature_matrix_for(cfg, corpus, docs, out)
    save_features(features, out)


def _stage_cluster(cfg: PipelineConfig, out: Path) -> None:
    from landmarkpipe.clustering import fit_birch, fit_bisecting_kmeans, fit_gmm, fit_hierarchical, random_assignment

    features = load_features(cfg.stage_dir("features"))
    c = cfg["cluster"]
    algo, k, seed = c["algorithm"], c["k"], c["seed"]
    if algo == "gmm":
        model = fit_gmm(features, k, seed=seed)
    elif algo == "hierarchical":
        model = fit_hierarchical(features, k)
    elif algo == "birch":
        model = fit_birch(features, k, branching=c["branching"], threshold=c["threshold"])
    elif algo == "bisecting_kmeans":
        model = fit_bisecting_kmeans(features, k, seed=seed)
    else:
        model = random_assignment(features.n_docs, k, seed=seed, features=features)
    model.doc_ids = features.doc_ids
    model.save(out / "model.json")


def _stage_metrics(cfg: PipelineConfig, out: Path) -> None:
    corpus = load_stage_corpus(cfg)
    m = cfg["metrics"]
    docs = corpus.docs_in_split(m["split"])
    if not docs:
        raise UserError(f"no documents in metrics.split={m['split']!r}")
    features = _feature_matrix_for(cfg, corpus, docs, None)
    class_labels = cmetrics.first_class_labels(corpus, split=m["split"])
    reports = cmetrics.sweep(features, class_labels, m["algorithms"], m["k_list"], m["seeds"])
    cmetrics.sweep_to_csv(reports, out / "sweep.csv")
    (out / "sweep.md").write_text(cmetrics.sweep_to_markdown(reports), encoding="utf-8")


def _stage_landmarks(cfg: PipelineConfig, out: Path) -> None:
    from landmarkpipe.clustering.model import ClusterModel

    corpus = load_stage_corpus(cfg)
    strategy = SelectionStrategy(cfg["landmarks"]["strategy"], seed=cfg["landmarks"]["seed"])
    model = ClusterModel.load(cfg.stage_dir("cluster") / "model.json")
    features = load_features(cfg.stage_dir("features"))
    gateway = cfg.make_gateway() if strategy.kind == "llm_choice" else None
    landmarks = select_landmarks(corpus, strategy, model=model, features=features, gateway=gateway)
    landmarks.save(out / "landmarks.jsonl")


def _stage_annotate(cfg: PipelineConfig, out: Path) -> None:
    corpus = load_stage_corpus(cfg)
    catalog = load_catalog(cfg)
    landmarks = LandmarkSet.load(cfg.stage_dir("landmarks") / "landmarks.jsonl")
    a = cfg["annotate"]
    if a["mode"] == "reveal_gold" or a["reveal_gold"]:
        annotate(landmarks, corpus, catalog, reveal_gold=True, state_path=out / "landmarks.jsonl")
    else:
        annotate(
            landmarks,
            corpus,
            catalog,
            mode=a["mode"],
            labels_file=cfg.path(a["labels_file"]),
            state_path=out / "landmarks.jsonl",
        )
    landmarks.save(out / "landmarks.jsonl")


def _stage_augment(cfg: PipelineConfig, out: Path) -> None:
    from landmarkpipe.clustering.model import ClusterModel

    corpus = load_stage_corpus(cfg)
    catalog = load_catalog(cfg)
    landmarks = load_stage_landmarks(cfg)
    model = ClusterModel.load(cfg.stage_dir("cluster") / "model.json")
    gateway = cfg.make_gateway()
    a = cfg["augment"]

    labeled = landmarks.labeled()
    wordnet_samples = []
    rewrite_samples = []
    if a["wordnet"]["variants"] > 0 and labeled:
        db = SynonymDb.from_tsv(cfg.path(a["wordnet"]["synonyms"]))
        for entry in labeled.values():
            wordnet_samples.extend(
                wordnet_replace(
                    corpus[entry.doc_id],
                    db,
                    labels=entry.labels,
                    replace_prob=a["wordnet"]["replace_prob"],
                    top_k=a["wordnet"]["top_k"],
                    seed=a["wordnet"]["seed"],
                    n_variants=a["wordnet"]["variants"],
                )
            )
    if a["rewrite"]["variants"] > 0 and labeled:
        for entry in labeled.values():
            rewrite_samples.extend(
                llm_rewrite(
                    corpus[entry.doc_id],
                    gateway,
                    labels=entry.labels,
                    n_variants=a["rewrite"]["variants"],
                    temperature=a["rewrite"]["temperature"],
                )
            )

    rag_raw = []
    doc_ids = model.doc_ids or [d.id for d in corpus.docs_in_split("train")]
    aligned_docs = [corpus[doc_id] for doc_id in doc_ids]
    docs_by_id = {d.id: d for d in aligned_docs}
    if a["rag"]["variants"] > 0:
        for doc_index in range(len(aligned_docs)):
            rag_raw.extend(
                rag_generate(
                    doc_index,
                    aligned_docs,
                    model,
                    landmarks,
                    catalog,
                    gateway,
                    seed=a["rag"]["seed"],
                    n_variants=a["rag"]["variants"],
                    docs_by_id=docs_by_id,
                )
            )
    rag_samples = [filter_labels(s, catalog, policy=a["rag"]["policy"]) for s in rag_raw]

    save_samples(wordnet_samples, out / "wordnet.jsonl")
    save_samples(rewrite_samples, out / "rewrite.jsonl")
    save_samples(rag_raw, out / "rag_raw.jsonl")
    save_samples(rag_samples, out / "rag.jsonl")

    stats = {
        "wordnet": AugmentStats.from_samples(wordnet_samples).to_json(),
        "rewrite": AugmentStats.from_samples(rewrite_samples).to_json(),
        "rag": AugmentStats.from_samples(rag_samples).to_json(),
    }
    for method, bucket in stats.items():
        total = bucket["ok"] + bucket["regex_fail"] + bucket["label_filtered"] + bucket["gateway_failed"]
        if bucket["attempted"] != total:
            raise LandmarkPipeError(f"{method} accounting identity violated: {bucket}")
    with open(out / "stats.json", "w", encoding="utf-8") as fh:
        json.dump(stats, fh, indent=2)


def _stage_diagnose(cfg: PipelineConfig, out: Path) -> None:
    corpus = load_stage_corpus(cfg)
    catalog = load_catalog(cfg)
    augment_dir = cfg.stage_dir("augment")
    samples = []
    for name in ("wordnet.jsonl", "rewrite.jsonl", "rag.jsonl"):
        samples.extend(load_samples(augment_dir / name))

    import os

    has_embed = bool(cfg["gateway"]["embed_base_url"] or os.environ.get("EMBED_BASE_URL") or cfg["gateway"]["mode"] == "replay")
    gateway = cfg.make_gateway() if has_embed else None
    reports = diversity_report(samples, corpus, gateway=gateway)
    diversity_to_csv(reports, out / "diversity.csv")
    (out / "diversity.md").write_text(diversity_to_markdown(reports), encoding="utf-8")

    rag_raw = load_samples(augment_dir / "rag_raw.jsonl")
    dist = label_distribution_report(corpus, rag_raw, catalog)
    with open(out / "label_distribution.json", "w", encoding="utf-8") as fh:
        json.dump(
            {
                "before": dist.before,
                "after": dist.after,
                "generated_outside_catalog": dist.generated_outside_catalog,
                "share_with_catalog_label": dist.share_with_catalog_label,
                "shrunk_labels": dist.shrunk_labels,
            },
            fh,
            indent=2,
            ensure_ascii=False,
        )
    import csv as _csv

    with open(out / "label_distribution.csv", "w", encoding="utf-8", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["label", "before", "after"])
        for label in sorted(set(dist.before) | set(dist.after)):
            writer.writerow([label, dist.before.get(label, 0), dist.after.get(label, 0)])

    originals = [d.text for d in corpus.docs_in_split("train")]
    generated = [s.text for s in samples if s.method == "rag" and s.status == "ok"]
    lr = length_report(originals, generated)
    with open(out / "length.json", "w", encoding="utf-8") as fh:
        json.dump(lr.__dict__, fh, indent=2)
    (out / "length.md").write_text(
        "| group | mean words | chars/word |\n| --- | --- | --- |\n"
        f"| original | {lr.mean_words_original:.1f} | {lr.chars_per_word_original:.3f} |\n"
        f"| generated | {lr.mean_words_generated:.1f} | {lr.chars_per_word_generated:.3f} |\n"
        f"\nchars/word delta: {lr.chars_per_word_delta_pct:+.2f}% (SE {lr.delta_standard_error:.4f})\n",
        encoding="utf-8",
    )


def _stage_emit(cfg: PipelineConfig, out: Path) -> None:
    corpus = load_stage_corpus(cfg)
    catalog = load_catalog(cfg)
    landmarks = load_stage_landmarks(cfg)
    augment_dir = cfg.stage_dir("augment")
    e = cfg["emit"]
    scheme, subject = e["scheme"], e["subject"]

    parts = []
    if e["include_landmarks"]:
        records = [
            build_train_record(corpus[entry.doc_id].text, entry.labels, subject, scheme, catalog)
            for entry in landmarks.labeled().values()
        ]
        emit_jsonl(records, out / "landmarks.jsonl", scheme=scheme, subject=subject)
        parts.append(out / "landmarks.jsonl")

    # under keep_all, rag labels may fall outside the catalog on purpose, so
    # records are emitted without catalog validation/casing for that source
    rag_catalog = catalog if cfg["augment"]["rag"]["policy"] == "drop_unknown" else None
    for name in ("wordnet", "rewrite", "rag"):
        samples = [s for s in load_samples(augment_dir / f"{name}.jsonl") if s.status == "ok" and s.labels]
        source_catalog = rag_catalog if name == "rag" else catalog
        records = [build_train_record(s.text, s.labels, subject, scheme, source_catalog) for s in samples]
        emit_jsonl(records, out / f"{name}.jsonl", scheme=scheme, subject=subject)
        parts.append(out / f"{name}.jsonl")

    combine_datasets(parts, out / "combined.jsonl", seed=e["seed"], scheme=scheme, subject=subject)


def _stage_evaluate(cfg: PipelineConfig, out: Path) -> None:
    corpus = load_stage_corpus(cfg)
    ev = cfg["evaluate"]
    scheme = cfg["emit"]["scheme"]
    if ev["mode"] == "external":
        predictions_path = cfg.path(ev["predictions"])
        if predictions_path is None:
            raise UserError("evaluate.mode=external needs evaluate.predictions")
    else:
        predictions_path = out / "predictions.jsonl"
        _run_cot_rag(cfg, corpus, predictions_path)
    report = score_run(predictions_path, corpus, scheme, split=ev["split"])
    report.save(out / "report.json")
    (out / "report.md").write_text(report.to_markdown(), encoding="utf-8")


def _run_cot_rag(cfg: PipelineConfig, corpus, predictions_path: Path) -> None:
    from landmarkpipe.clustering.model import ClusterModel
    from landmarkpipe.corpus import Corpus

    catalog = load_catalog(cfg)
    landmarks = load_stage_landmarks(cfg)
    model = ClusterModel.load(cfg.stage_dir("cluster") / "model.json")
    gateway = cfg.make_gateway()
    split = cfg["evaluate"]["split"]
    docs = corpus.docs_in_split(split)

    if cfg["features"]["kind"] == "tfidf":
        with open(cfg.stage_dir("features") / "tfidf_model.json", encoding="utf-8") as fh:
            tfidf = TfidfModel.from_json(json.load(fh))
        vectors = _tfidf_transform(tfidf, [d.text for d in docs])
    else:
        sub = Corpus(documents=list(docs), name=corpus.name, label_scheme=corpus.label_scheme)
        vectors = embed_corpus(sub, gateway, cache_dir=cfg.path(cfg["features"]["cache_dir"])).rows

    docs_by_id = {d.id: d for d in corpus.documents}
    temperature = cfg["gateway"]["cot_temperature"]
    with open(predictions_path, "w", encoding="utf-8", newline="\n") as fh:
        for i, doc in enumerate(docs):
            pred = cot_rag_label(doc, np.asarray(vectors[i]).ravel(), docs_by_id, model, landmarks, catalog, gateway, temperature)
            fh.write(json.dumps({"id": doc.id, "output": pred.raw}, ensure_ascii=False) + "\n")


def _tfidf_transform(model: TfidfModel, texts: list[str]) -> np.ndarray:
    from landmarkpipe.vectorize import tokenize

    out = np.zeros((len(texts), len(model.vocabulary)), dtype=np.float64)
    for i, text in enumerate(texts):
        for token in tokenize(text):
            col = model.vocabulary.get(token)
            if col is not None:
                out[i, col] += 1.0
        out[i] *= model.idf
        norm = np.linalg.norm(out[i])
        if norm > 0:
            out[i] /= norm
    return out


_RUNNERS = {
    "ingest": _stage_ingest,
    "features": _stage_features,
    "cluster": _stage_cluster,
    "metrics": _stage_metrics,
    "landmarks": _stage_landmarks,
    "annotate": _stage_annotate,
    "augment": _stage_augment,
    "diagnose": _stage_diagnose,
    "emit": _stage_emit,
    "evaluate": _stage_evaluate,
}

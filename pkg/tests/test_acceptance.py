"""Acceptance suite: one test per criterion, one printed PASS/FAIL line each.

Run with `python3 -m pytest tests/test_acceptance.py -v -s`.
"""

from __future__ import annotations

import functools
import itertools
import json
import time
from pathlib import Path

import numpy as np
import pytest

from landmarkpipe.augment import extract_content_label, format_generated
from landmarkpipe.clustering import fit_birch, fit_bisecting_kmeans, fit_gmm, fit_hierarchical, random_assignment
from landmarkpipe.config import PipelineConfig, resolve_builtin
from landmarkpipe.corpus import LabelCatalog
from landmarkpipe.diagnostics import jaccard
from landmarkpipe.emit import OUTPUT_PATTERN, build_train_record, read_jsonl_records
from landmarkpipe.evaluate import all_match, domain_area_match, in_right_order, parse_prediction, part_match
from landmarkpipe.metrics import homogeneity, nmi, silhouette
from landmarkpipe import pipeline
from landmarkpipe.mockserver import MockLlmServer

from .conftest import make_blobs
from .oracles import homogeneity_oracle, jaccard_oracle, nmi_oracle, silhouette_oracle

README = Path(__file__).resolve().parents[1] / "README.md"


def criterion(name):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                out = fn(*args, **kwargs)
            except BaseException:
                print(f"\n[ACCEPTANCE] {name}: FAIL")
                raise
            print(f"\n[ACCEPTANCE] {name}: PASS")
            return out

        return wrapper

    return deco


@pytest.fixture(scope="module")
def e2e_run(tmp_path_factory):
    """One full mock pipeline run shared by the end-to-end criteria."""
    out_root = tmp_path_factory.mktemp("e2e")
    started = time.perf_counter()
    with MockLlmServer() as server:
        cfg = PipelineConfig(
            {
                "out_dir": str(out_root / "runs"),
                "corpus": {"path": "builtin:fixture200", "catalog": "builtin:reuters"},
                "split": {"ratios": [0.5, 0.3, 0.2], "seed": 7},
                "features": {"kind": "embedding"},
                "cluster": {"algorithm": "gmm", "k": 20, "seed": 42},
                "landmarks": {"strategy": "llm_choice"},
                "annotate": {"mode": "reveal_gold"},
                "emit": {"scheme": "multi_label", "subject": "Reuters news"},
                "gateway": {"mode": "mock", "chat_base_url": server.base_url, "embed_base_url": server.base_url},
            },
            base_dir=out_root,
        )
        pipeline.run_all(cfg, through="emit")
    return cfg, time.perf_counter() - started


@criterion("metric-oracle equivalence (1000 instances, |delta| <= 1e-9, < 10 s)")
def test_metric_oracle_equivalence():
    rng = np.random.default_rng(2024)
    started = time.perf_counter()
    universe = [f"tok{i}" for i in range(24)]
    for _ in range(1000):
        n = int(rng.integers(4, 65))
        k = int(rng.integers(2, min(8, n) + 1))
        true = rng.integers(0, k, size=n).tolist()
        pred = rng.integers(0, k, size=n).tolist()
        assert abs(homogeneity(true, pred) - homogeneity_oracle(true, pred)) <= 1e-9
        assert abs(nmi(true, pred) - nmi_oracle(true, pred)) <= 1e-9

        X = rng.normal(size=(n, int(rng.integers(1, 6))))
        labels = rng.integers(0, k, size=n)
        labels[:k] = np.arange(k)  # every cluster populated
        assert abs(silhouette(X, labels) - silhouette_oracle(X.tolist(), labels.tolist())) <= 1e-9

        a = set(rng.choice(universe, size=rng.integers(0, 12), replace=False))
        b = set(rng.choice(universe, size=rng.integers(0, 12), replace=False))
        assert abs(jaccard(a, b) - jaccard_oracle(a, b)) <= 1e-9
    elapsed = time.perf_counter() - started
    assert elapsed < 10.0, f"took {elapsed:.1f}s"


@criterion("clustering recovery on the seeded 6-blob set (< 30 s)")
def test_clustering_recovery():
    started = time.perf_counter()
    X, y = make_blobs(n=600, d=16, k=6, seed=42)
    scores = {
        "gmm": homogeneity(y, fit_gmm(X, 6, seed=42).assignments),
        "hierarchical": homogeneity(y, fit_hierarchical(X, 6).assignments),
        "bisecting_kmeans": homogeneity(y, fit_bisecting_kmeans(X, 6, seed=42).assignments),
        "birch": homogeneity(y, fit_birch(X, 6).assignments),
    }
    random_score = homogeneity(y, random_assignment(600, 6, seed=42, features=X).assignments)
    assert scores["gmm"] >= 0.95, scores
    assert scores["hierarchical"] >= 0.95, scores
    assert scores["bisecting_kmeans"] >= 0.90, scores
    for name, score in scores.items():
        assert score - random_score >= 0.5, (name, score, random_score)
    elapsed = time.perf_counter() - started
    assert elapsed < 30.0, f"took {elapsed:.1f}s"


@criterion("homogeneity non-decreasing in k (mean over 5 seeds, k in {4, 8, 16})")
def test_monotonic_k_trend():
    X, y = make_blobs(n=600, d=16, k=6, seed=42)
    means = []
    for k in (4, 8, 16):
        scores = [homogeneity(y, fit_gmm(X, k, seed=seed).assignments) for seed in range(5)]
        means.append(float(np.mean(scores)))
    assert means[0] <= means[1] + 1e-12 and means[1] <= means[2] + 1e-12, means


@criterion("GMM EM log-likelihood non-decreasing (100 fixtures, tol 1e-8)")
def test_gmm_ll_monotone_fixtures():
    rng = np.random.default_rng(77)
    for trial in range(100):
        n = int(rng.integers(20, 81))
        d = int(rng.integers(2, 9))
        k = int(rng.integers(2, 5))
        X = rng.normal(size=(n, d)) * rng.uniform(0.5, 3.0)
        model = fit_gmm(X, k, seed=trial)
        assert model.reseeds == 0, f"trial {trial} reseeded"
        trace = model.ll_trace
        assert trace is not None and len(trace) >= 1
        assert np.all(np.diff(trace) >= -1e-8), f"trial {trial}: {np.diff(trace).min()}"


@criterion("match-metric implication ladder (10,000 fuzzed pairs + worked examples)")
def test_match_metric_logic():
    # worked examples
    assert all_match(["wheat", "corn"], ["corn", "wheat"]) is True
    assert in_right_order(["wheat", "corn"], ["corn", "wheat"]) is False
    assert part_match(["corn"], ["corn", "wheat"]) is True
    assert part_match(["oat"], ["corn"]) is False
    assert domain_area_match(["cs", "computer vision"], ["cs", "machine learning"]) == (True, False)

    rng = np.random.default_rng(31)
    pool = [f"lab{i}" for i in range(6)]
    violations = 0
    for _ in range(10_000):
        pred = list(rng.choice(pool, size=rng.integers(0, 5), replace=False))
        true = list(rng.choice(pool, size=rng.integers(1, 5), replace=False))
        order = in_right_order(pred, true)
        full = all_match(pred, true)
        part = part_match(pred, true)
        if order and not full:
            violations += 1
        if full and not part:
            violations += 1
        domain, area = domain_area_match(pred, true)
        if area and not domain:
            violations += 1
    assert violations == 0


@criterion("round trips: emit->parse over both catalogs (<=3 labels) and extraction inversion")
def test_round_trips():
    for builtin in ("builtin:reuters", "builtin:wos"):
        catalog = LabelCatalog.from_file(resolve_builtin(builtin))
        labels = sorted(catalog.labels)
        checked = 0
        for size in (1, 2, 3):
            for combo in itertools.combinations(labels, size):
                rec = build_train_record("txt", list(combo), "subject", catalog=catalog)
                pred = parse_prediction(rec.output)
                assert pred.parse_ok and pred.labels == list(combo), combo
                checked += 1
        assert checked == len(labels) + len(labels) * (len(labels) - 1) // 2 + (
            len(labels) * (len(labels) - 1) * (len(labels) - 2) // 6
        )

    rng = np.random.default_rng(55)
    alphabet = list("abcdefghijklmnopqrstuvwxyz0123456789 ")
    label_pool = ["corn", "wheat", "machine learning", "solar energy", "hiv/aids"]
    for _ in range(1000):
        content = "".join(rng.choice(alphabet, size=rng.integers(1, 80))).strip()
        if not content:
            content = "body"
        labels = list(rng.choice(label_pool, size=rng.integers(1, 4), replace=False))
        assert extract_content_label(format_generated(content, labels)) == (content, labels)


@criterion("end-to-end mock run: exact variant counts, accounting identity, < 2 min")
def test_end_to_end_mock_run(e2e_run):
    cfg, elapsed = e2e_run
    assert elapsed < 120.0, f"pipeline took {elapsed:.1f}s"

    corpus = pipeline.load_stage_corpus(cfg)
    n_train = len(corpus.docs_in_split("train"))
    landmarks = pipeline.load_stage_landmarks(cfg)
    n_labeled = len(landmarks.labeled())
    assert n_labeled == 20  # one labeled landmark per cluster via reveal_gold

    augment_dir = cfg.stage_dir("augment")
    stats = json.loads((augment_dir / "stats.json").read_text())
    assert stats["wordnet"]["attempted"] == 10 * n_labeled
    assert stats["rewrite"]["attempted"] == 10 * n_labeled
    assert stats["rag"]["attempted"] == 3 * n_train

    from landmarkpipe.augment import load_samples

    rag = load_samples(augment_dir / "rag.jsonl")
    per_doc: dict[str, int] = {}
    for s in rag:
        per_doc[s.source_id] = per_doc.get(s.source_id, 0) + 1
    assert set(per_doc.values()) == {3}
    assert len(per_doc) == n_train

    for bucket in stats.values():
        assert bucket["attempted"] == bucket["ok"] + bucket["regex_fail"] + bucket["label_filtered"] + bucket["gateway_failed"]
    assert stats["rag"]["regex_fail"] > 0 and stats["rag"]["label_filtered"] > 0  # injected failures exercised

    combined = cfg.stage_dir("emit") / "combined.jsonl"
    records = read_jsonl_records(combined)
    expected = n_labeled + stats["wordnet"]["ok"] + stats["rewrite"]["ok"] + stats["rag"]["ok"]
    assert len(records) == expected
    for rec in records:
        assert rec.input == ""
        assert OUTPUT_PATTERN.match(rec.output), rec.output
        assert parse_prediction(rec.output).parse_ok


@criterion("extraction robustness: adversarial fixture matched exactly")
def test_extraction_robustness_fixture():
    with open(resolve_builtin("builtin:adversarial"), encoding="utf-8") as fh:
        cases = json.load(fh)["cases"]
    assert len(cases) >= 12
    for case in cases:
        got = extract_content_label(case["response"])
        if case["status"] == "ok":
            assert got == (case["content"], case["labels"]), case["name"]
        else:
            assert got is None, case["name"]
    # the live extraction yield is a documented reference, not a CI gate
    assert "15,473" in README.read_text(encoding="utf-8")


@criterion("diversity ordering wordnet > rewrite > rag (mock CI); live targets documented")
def test_diversity_ordering(e2e_run):
    cfg, _ = e2e_run
    import csv

    with open(cfg.stage_dir("diagnose") / "diversity.csv", encoding="utf-8") as fh:
        rows = {row["method"]: float(row["mean_pairwise_jaccard"]) for row in csv.DictReader(fh)}
    assert rows["wordnet"] > rows["rewrite"] > rows["rag"], rows
    readme = README.read_text(encoding="utf-8")
    for live_target in ("94.57", "78.36", "49.12"):
        assert live_target in readme


@criterion("full-scale headline results documented as live-run references only")
def test_headline_results_documented_not_asserted():
    readme = README.read_text(encoding="utf-8")
    assert "not reproducible at desk scale" in readme.lower()
    for value in ("95.41", "82.43", "21,773"):
        assert value in readme

from __future__ import annotations

import json

import numpy as np
import pytest

from landmarkpipe.clustering import fit_hierarchical
from landmarkpipe.corpus import LabelCatalog
from landmarkpipe.errors import ParseError, UserError
from landmarkpipe.evaluate import (
    all_match,
    cot_rag_label,
    domain_area_match,
    extract_cot_label,
    in_right_order,
    load_predictions,
    parse_prediction,
    part_match,
    score_run,
)
from landmarkpipe.landmark import LandmarkEntry, LandmarkSet
from landmarkpipe.vectorize import FeatureMatrix

from .conftest import FakeGateway, tiny_corpus


def test_parse_prediction_examples():
    assert parse_prediction("[corn, wheat]").labels == ["corn", "wheat"]
    assert parse_prediction("Answer: [earn] extra [junk]").labels == ["earn"]
    assert not parse_prediction("no brackets").parse_ok
    assert not parse_prediction("[]").parse_ok
    assert not parse_prediction("[ , ]").parse_ok
    assert parse_prediction("[ Corn , WHEAT ]").labels == ["corn", "wheat"]


def test_part_match_examples():
    assert part_match(["corn"], ["corn", "wheat"])
    assert not part_match(["oat"], ["corn"])
    assert not part_match([], ["corn"])


def test_all_match_examples():
    assert all_match(["wheat", "corn"], ["corn", "wheat"])
    assert not all_match(["corn"], ["corn", "wheat"])
    assert all_match(["corn", "wheat"], ["corn", "wheat"])
    assert not all_match([], [])


def test_in_right_order_examples():
    assert in_right_order(["corn", "wheat"], ["corn", "wheat"])
    assert not in_right_order(["wheat", "corn"], ["corn", "wheat"])
    # the canonical worked example: set equality holds, order does not
    assert all_match(["wheat", "corn"], ["corn", "wheat"]) and not in_right_order(["wheat", "corn"], ["corn", "wheat"])


def test_order_implies_all_implies_part_fuzz():
    rng = np.random.default_rng(9)
    labels = ["a", "b", "c", "d"]
    for _ in range(500):
        pred = list(rng.choice(labels, size=rng.integers(0, 4), replace=False))
        true = list(rng.choice(labels, size=rng.integers(1, 4), replace=False))
        if in_right_order(pred, true):
            assert all_match(pred, true)
        if all_match(pred, true):
            assert part_match(pred, true)


def test_domain_area_examples():
    assert domain_area_match(["cs", "machine learning"], ["cs", "machine learning"]) == (True, True)
    assert domain_area_match(["cs", "computer vision"], ["cs", "machine learning"]) == (True, False)
    assert domain_area_match(["medical", "cancer"], ["cs", "machine learning"]) == (False, False)
    assert domain_area_match(["cs"], ["cs", "machine learning"]) == (True, False)
    assert domain_area_match([], ["cs", "machine learning"]) == (False, False)


def _test_corpus():
    corpus = tiny_corpus(
        [("one text", ["corn", "wheat"]), ("two text", ["earn"]), ("three text", ["gold"])],
        split="test",
    )
    return corpus


def _write_predictions(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def test_score_run_all_correct(tmp_path):
    corpus = _test_corpus()
    path = tmp_path / "p.jsonl"
    _write_predictions(path, [
        {"id": "t0", "output": "[corn, wheat]"},
        {"id": "t1", "output": "[earn]"},
        {"id": "t2", "output": "[gold]"},
    ])
    report = score_run(path, corpus, "multi_label")
    assert report.n == 3
    assert report.scores == {"part_match": 1.0, "all_match": 1.0, "in_right_order": 1.0}


def test_score_run_counts_misses_and_parse_failures(tmp_path):
    corpus = _test_corpus()
    path = tmp_path / "p.jsonl"
    _write_predictions(path, [
        {"id": "t0", "output": "[wheat, corn]"},   # all but not order
        {"id": "t1", "output": "no brackets"},      # parse failure -> miss
    ])                                               # t2 missing -> miss
    report = score_run(path, corpus, "multi_label")
    assert report.scores["part_match"] == pytest.approx(1 / 3)
    assert report.scores["all_match"] == pytest.approx(1 / 3)
    assert report.scores["in_right_order"] == pytest.approx(0.0)


def test_score_run_order_chain_holds(tmp_path):
    corpus = _test_corpus()
    path = tmp_path / "p.jsonl"
    _write_predictions(path, [{"id": "t0", "output": "[corn]"}, {"id": "t1", "output": "[earn]"}])
    report = score_run(path, corpus, "multi_label")
    assert report.scores["in_right_order"] <= report.scores["all_match"] <= report.scores["part_match"]


def test_score_run_permutation_invariance(tmp_path):
    corpus = _test_corpus()
    rows = [
        {"id": "t2", "output": "[gold]"},
        {"id": "t0", "output": "[corn, wheat]"},
        {"id": "t1", "output": "[oat]"},
    ]
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    _write_predictions(a, rows)
    _write_predictions(b, rows[::-1])
    assert score_run(a, corpus, "multi_label").scores == score_run(b, corpus, "multi_label").scores


def test_score_run_rejects_unknown_and_duplicate_ids(tmp_path):
    corpus = _test_corpus()
    path = tmp_path / "p.jsonl"
    _write_predictions(path, [{"id": "ghost", "output": "[corn]"}])
    with pytest.raises(UserError, match="unknown doc ids"):
        score_run(path, corpus, "multi_label")
    _write_predictions(path, [{"id": "t0", "output": "[corn]"}, {"id": "t0", "output": "[corn]"}])
    with pytest.raises(ParseError, match="duplicate"):
        load_predictions(path)


def test_score_run_hierarchical(tmp_path):
    corpus = tiny_corpus(
        [("one text", ["cs", "machine learning"]), ("two text", ["medical", "cancer"])],
        scheme="hierarchical_2",
        split="test",
    )
    path = tmp_path / "p.jsonl"
    _write_predictions(path, [
        {"id": "t0", "output": "[CS, Machine learning]"},
        {"id": "t1", "output": "[Medical, Diabetes]"},
    ])
    report = score_run(path, corpus, "hierarchical_2")
    assert report.scores == {"domain_match": 1.0, "area_match": 0.5}
    assert report.scores["area_match"] <= report.scores["domain_match"]


def test_extract_cot_label():
    pred = extract_cot_label("Thought: clearly corn-adjacent\nLabel: [earn]")
    assert pred.parse_ok and pred.labels == ["earn"]
    assert not extract_cot_label("no marker at all").parse_ok
    pred = extract_cot_label("Label: [draft]\nLabel: [final]")
    assert pred.labels == ["final"]


def test_cot_rag_label_prompt_and_parse():
    texts = [f"document number {i}" for i in range(8)]
    corpus = tiny_corpus([(t, []) for t in texts])
    X = np.array([[float(i % 2), float(i)] for i in range(8)])
    features = FeatureMatrix(X, [d.id for d in corpus.documents], "embedding")
    model = fit_hierarchical(features, 2)
    landmarks = LandmarkSet()
    for c in range(2):
        member = int(model.members(c)[0])
        landmarks.add(LandmarkEntry(cluster=c, doc_id=features.doc_ids[member], labels=["corn"], status="labeled"))
    catalog = LabelCatalog(["corn", "wheat"])
    gateway = FakeGateway(responses=["Thought: resembles the first reference.\nLabel: [corn]"])
    docs_by_id = {d.id: d for d in corpus.documents}
    target = corpus.documents[5]
    pred = cot_rag_label(target, X[5], docs_by_id, model, landmarks, catalog, gateway)
    assert pred.parse_ok and pred.labels == ["corn"] and pred.doc_id == "t5"
    prompt = gateway.prompts[0]
    assert target.text in prompt
    assert "*Target Document for Prediction:" in prompt
    assert "corn, wheat" in prompt  # the available-label listing
    assert prompt.count("Label: [") >= 2  # labeled references carry tags


def test_metrics_report_markdown(tmp_path):
    corpus = _test_corpus()
    path = tmp_path / "p.jsonl"
    _write_predictions(path, [{"id": "t0", "output": "[corn, wheat]"}])
    report = score_run(path, corpus, "multi_label")
    md = report.to_markdown()
    assert "part_match" in md and md.count("|") > 6
    report.save(tmp_path / "r.json")
    assert json.loads((tmp_path / "r.json").read_text())["n"] == 3

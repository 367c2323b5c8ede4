from __future__ import annotations

import json

import numpy as np
import pytest

from landmarkpipe.corpus import (
    LabelCatalog,
    load_corpus,
    load_split_corpus,
    normalize_label,
    normalize_text,
    save_corpus_jsonl,
    split_corpus,
)
from landmarkpipe.errors import ParseError, UserError

from .conftest import tiny_corpus


def _write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def test_load_single_record(tmp_path):
    path = tmp_path / "one.jsonl"
    _write_jsonl(path, [{"id": "a", "text": "hi", "labels": ["earn"]}])
    corpus = load_corpus(path)
    assert len(corpus) == 1
    assert corpus["a"].text == "hi"
    assert corpus["a"].gold_labels == ["earn"]


def test_load_normalizes_whitespace(tmp_path):
    path = tmp_path / "ws.jsonl"
    _write_jsonl(path, [{"id": "a", "text": "line one\n\nline  two\tend "}])
    assert load_corpus(path)["a"].text == "line one line two end"


def test_duplicate_id_reports_line(tmp_path):
    path = tmp_path / "dup.jsonl"
    _write_jsonl(path, [{"id": "a", "text": "x"}, {"id": "a", "text": "y"}])
    with pytest.raises(ParseError, match="line 2"):
        load_corpus(path)


def test_empty_text_rejected(tmp_path):
    path = tmp_path / "empty.jsonl"
    _write_jsonl(path, [{"id": "a", "text": "   \n "}])
    with pytest.raises(ParseError, match="empty text"):
        load_corpus(path)


def test_bad_json_reports_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"id": "a", "text": "x"}\n{oops\n', encoding="utf-8")
    with pytest.raises(ParseError, match="line 2"):
        load_corpus(path)


def test_csv_ingestion(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text('id,text,labels\n1,"text, with comma",earn;acq\n2,plain,\n', encoding="utf-8")
    corpus = load_corpus(path)
    assert corpus["1"].text == "text, with comma"
    assert corpus["1"].gold_labels == ["earn", "acq"]
    assert corpus["2"].gold_labels == []


def test_missing_file():
    with pytest.raises(UserError, match="not found"):
        load_corpus("/nonexistent/nope.jsonl")


def test_split_exact_fractions():
    corpus = tiny_corpus([(f"doc number {i}", []) for i in range(10)])
    out = split_corpus(corpus, (0.5, 0.3, 0.2), seed=7)
    assert out.split_sizes() == {"train": 5, "validation": 3, "test": 2}


def test_split_is_partition_and_deterministic():
    corpus = tiny_corpus([(f"doc number {i}", []) for i in range(37)])
    a = split_corpus(corpus, (0.5, 0.3, 0.2), seed=11)
    b = split_corpus(corpus, (0.5, 0.3, 0.2), seed=11)
    assert [d.split for d in a.documents] == [d.split for d in b.documents]
    assert all(d.split in ("train", "validation", "test") for d in a.documents)
    assert sum(a.split_sizes().values()) == 37


def test_split_sizes_at_corpus_scale():
    # with the published 50/30/20 ratios the sizes follow from arithmetic
    corpus = tiny_corpus([(f"doc {i}", []) for i in range(10788)])
    sizes = split_corpus(corpus, (0.5, 0.3, 0.2), seed=0).split_sizes()
    assert sizes == {"train": 5394, "validation": 3236, "test": 2158}

    corpus = tiny_corpus([(f"doc {i}", []) for i in range(46985)])
    sizes = split_corpus(corpus, (0.5, 0.3, 0.2), seed=0).split_sizes()
    assert abs(sizes["train"] - 23492) <= 1
    assert abs(sizes["validation"] - 14095) <= 1
    assert abs(sizes["test"] - 9398) <= 1


def test_split_hides_train_gold_labels():
    corpus = tiny_corpus([(f"doc {i}", ["earn"]) for i in range(10)])
    out = split_corpus(corpus, (0.5, 0.3, 0.2), seed=3)
    for d in out.documents:
        if d.split == "train":
            assert d.visible_labels() == []
            assert d.visible_labels(reveal_gold=True) == ["earn"]
        else:
            assert d.visible_labels() == ["earn"]


def test_split_rejects_bad_inputs():
    corpus = tiny_corpus([("a b", []), ("c d", [])])
    with pytest.raises(UserError):
        split_corpus(corpus, (0.5, 0.3, 0.2), seed=0)
    big = tiny_corpus([(f"doc {i}", []) for i in range(5)])
    with pytest.raises(UserError):
        split_corpus(big, (0.6, 0.3, 0.2), seed=0)
    with pytest.raises(UserError):
        split_corpus(big, (0.5, 0.5, -0.0), seed=0)


def test_normalize_label_examples():
    assert normalize_label(" Corn ") == "corn"
    assert normalize_label("Polycythemia  Vera") == "polycythemia vera"
    assert normalize_label("corn") == "corn"


def test_normalize_label_idempotent_fuzz():
    rng = np.random.default_rng(0)
    alphabet = list("aB c\tD\n-/'")
    for _ in range(200):
        raw = "".join(rng.choice(alphabet, size=rng.integers(0, 12)))
        once = normalize_label(raw)
        assert normalize_label(once) == once


def test_roundtrip_byte_identical_text(tmp_path, fixture_corpus):
    path = tmp_path / "rt.jsonl"
    save_corpus_jsonl(fixture_corpus, path)
    back = load_split_corpus(path)
    assert len(back) == len(fixture_corpus)
    for d in fixture_corpus.documents:
        assert back[d.id].text == d.text
        assert back[d.id].split == d.split
        assert back[d.id].labels_hidden == d.labels_hidden


def test_normalize_text_idempotent():
    assert normalize_text("a  b\nc") == "a b c"
    assert normalize_text(normalize_text("a  b\nc")) == "a b c"


def test_catalog_membership_and_casing():
    catalog = LabelCatalog(["CS", "Machine learning"], hierarchy={"CS": ["Machine learning"]})
    assert "machine  LEARNING " in catalog
    assert catalog.canonical_display("machine learning") == "Machine learning"
    assert "corn" not in catalog
    assert "Domain: CS" in catalog.prompt_listing()


def test_catalog_flat_listing_is_comma_separated():
    catalog = LabelCatalog(["corn", "wheat", "earn"])
    assert catalog.prompt_listing() == "corn, earn, wheat"


def test_bundled_catalogs(reuters_catalog, wos_catalog):
    assert len(reuters_catalog) == 90
    assert "wheat" in reuters_catalog and "oat" in reuters_catalog and "lei" in reuters_catalog
    assert wos_catalog.hierarchy is not None
    assert len(wos_catalog.hierarchy) == 7
    assert "polycythemia vera" in wos_catalog
    assert wos_catalog.canonical_display("cs") == "CS"

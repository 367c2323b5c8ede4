"""Generated-data analyses: variant diversity, label drift, length drift.

Diversity aggregates macro style: pairwise Jaccard is averaged over variant
pairs within each source document first, then across sources, matching how
per-landmark variant groups are compared. Reports are pure functions of their
inputs.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path

from landmarkpipe.augment import STATUS_OK, AugmentedSample
from landmarkpipe.corpus import Corpus, LabelCatalog
from landmarkpipe.vectorize import cosine_similarity

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")


def token_set(text: str) -> frozenset[str]:
    """Diversity tokenization: lowercase, split on non-alphanumeric."""
    return frozenset(t for t in _TOKEN_SPLIT.split(text.lower()) if t)


def jaccard(a, b) -> float:
    """|A ∩ B| / |A ∪ B|; two empty sets count as identical (1.0)."""
    a, b = set(a), set(b)
    union = a | b
    if not union:
        return 1.0
    return len(a & b) / len(union)


@dataclass
class DiversityReport:
    method: str
    mean_pairwise_jaccard: float
    mean_cosine_to_original: float | None
    n_sources: int
    n_variants: int


def diversity_report(
    samples: list[AugmentedSample],
    corpus: Corpus,
    gateway=None,
) -> list[DiversityReport]:
    """One report per method over the ok-status samples.

    The Jaccard column needs >= 2 variants per source; the cosine column runs
    original-vs-variant through the gateway's embeddings and is omitted (None)
    without one.
    """
    groups: dict[tuple[str, str], list[AugmentedSample]] = {}
    for s in samples:
        if s.status == STATUS_OK:
            groups.setdefault((s.method, s.source_id), []).append(s)

    methods = sorted({m for m, _ in groups})
    reports = []
    for method in methods:
        jaccard_means = []
        cosine_means = []
        n_variants = 0
        sources = [(src, grp) for (m, src), grp in sorted(groups.items()) if m == method]
        for source_id, grp in sources:
            n_variants += len(grp)
            if len(grp) >= 2:
                sets = [token_set(s.text) for s in grp]
                pair_scores = [
                    jaccard(sets[i], sets[j]) for i in range(len(sets)) for j in range(i + 1, len(sets))
                ]
                jaccard_means.append(sum(pair_scores) / len(pair_scores))
            if gateway is not None and source_id in corpus:
                texts = [corpus[source_id].text] + [s.text for s in grp]
                matrix = gateway.embed(texts)
                sims = [cosine_similarity(matrix[0], matrix[i]) for i in range(1, len(texts))]
                cosine_means.append(sum(sims) / len(sims))
        reports.append(
            DiversityReport(
                method=method,
                mean_pairwise_jaccard=sum(jaccard_means) / len(jaccard_means) if jaccard_means else float("nan"),
                mean_cosine_to_original=(sum(cosine_means) / len(cosine_means)) if cosine_means else None,
                n_sources=len(sources),
                n_variants=n_variants,
            )
        )
    return reports


@dataclass
class LabelDistributionReport:
    before: dict[str, int]
    after: dict[str, int]
    generated_outside_catalog: int
    share_with_catalog_label: float
    shrunk_labels: list[str] = field(default_factory=list)


def label_distribution_report(
    corpus: Corpus,
    samples: list[AugmentedSample],
    catalog: LabelCatalog,
    reveal_gold: bool = True,
    split: str | None = "train",
) -> LabelDistributionReport:
    """Per-label counts before/after augmentation plus hallucination stats."""
    docs = corpus.docs_in_split(split) if split else corpus.documents
    before: dict[str, int] = {}
    for d in docs:
        for lab in d.visible_labels(reveal_gold=reveal_gold):
            before[lab] = before.get(lab, 0) + 1

    after: dict[str, int] = {}
    outside: set[str] = set()
    with_catalog = 0
    ok_samples = [s for s in samples if s.status == STATUS_OK]
    for s in ok_samples:
        hit = False
        for lab in s.labels:
            after[lab] = after.get(lab, 0) + 1
            if lab in catalog:
                hit = True
            else:
                outside.add(lab)
        if hit:
            with_catalog += 1

    shrunk = sorted(lab for lab, count in before.items() if after.get(lab, 0) < count)
    return LabelDistributionReport(
        before=before,
        after=after,
        generated_outside_catalog=len(outside),
        share_with_catalog_label=(with_catalog / len(ok_samples)) if ok_samples else 0.0,
        shrunk_labels=shrunk,
    )


@dataclass
class LengthReport:
    mean_words_original: float
    mean_words_generated: float
    chars_per_word_original: float
    chars_per_word_generated: float
    chars_per_word_delta_pct: float
    delta_standard_error: float


def _word_stats(texts: list[str]) -> tuple[list[int], list[float]]:
    word_counts = []
    cpw = []
    for t in texts:
        words = [w for w in t.split(" ") if w]
        if not words:
            continue
        word_counts.append(len(words))
        cpw.append(sum(len(w) for w in words) / len(words))
    return word_counts, cpw


def length_report(original_texts: list[str], generated_texts: list[str]) -> LengthReport:
    """Word-count means and the characters-per-word shift with its SE."""
    import math

    ow, ocpw = _word_stats(original_texts)
    gw, gcpw = _word_stats(generated_texts)

    def mean(xs):
        return sum(xs) / len(xs) if xs else 0.0

    def se(xs):
        if len(xs) < 2:
            return 0.0
        m = mean(xs)
        var = sum((x - m) ** 2 for x in xs) / (len(xs) - 1)
        return math.sqrt(var / len(xs))

    o_mean, g_mean = mean(ocpw), mean(gcpw)
    delta_pct = 100.0 * (g_mean - o_mean) / o_mean if o_mean else 0.0
    return LengthReport(
        mean_words_original=mean(ow),
        mean_words_generated=mean(gw),
        chars_per_word_original=o_mean,
        chars_per_word_generated=g_mean,
        chars_per_word_delta_pct=delta_pct,
        delta_standard_error=math.sqrt(se(ocpw) ** 2 + se(gcpw) ** 2),
    )


def diversity_to_csv(reports: list[DiversityReport], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "mean_pairwise_jaccard", "mean_cosine_to_original", "n_sources", "n_variants"])
        for r in reports:
            writer.writerow([r.method, r.mean_pairwise_jaccard, r.mean_cosine_to_original, r.n_sources, r.n_variants])


def diversity_to_markdown(reports: list[DiversityReport]) -> str:
    lines = ["| method | pairwise Jaccard | cosine to original |", "| --- | --- | --- |"]
    for r in reports:
        cosine = f"{r.mean_cosine_to_original:.4f}" if r.mean_cosine_to_original is not None else "-"
        lines.append(f"| {r.method} | {r.mean_pairwise_jaccard:.4f} | {cosine} |")
    return "\n".join(lines) + "\n"

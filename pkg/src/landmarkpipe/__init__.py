"""Turn a large unlabeled corpus plus a small labeling budget into synthetic
instruction-tuning data: cluster, pick one landmark per cluster, have humans
label the landmarks, then augment them (synonym replacement, LLM rewrite,
retrieval-grounded generation) and score downstream predictions."""

__version__ = "0.1.0"

from landmarkpipe.corpus import Corpus, Document, LabelCatalog, load_corpus, normalize_label, split_corpus

__all__ = [
    "Corpus",
    "Document",
    "LabelCatalog",
    "load_corpus",
    "normalize_label",
    "split_corpus",
    "__version__",
]

"""Prompt templates shared by the generation, selection, and labeling steps.

The wording (including its quirks) is load-bearing: fine-tuned models and the
extraction regexes both key off these exact markers, so edit with care.
"""

from __future__ import annotations

TRAIN_TEMPLATE = "Assign tags for the following {subject} Document:\n\n{document}\n\nAnswer:"

REWRITE_TEMPLATE = (
    "*Task Description: Rewrite the following text in English, maintaing the original meaning "
    "but using different words and sentence structures. The new version should be clear and "
    "concise, and it should not alter the core message of the original text.\n"
    "\n"
    "*Original Text:\n"
    "{document}\n"
    "\n"
    "Rewritten Text:"
)

RAG_GENERATE_TEMPLATE = (
    "*Task Description:\n"
    "You are provided with a set of similar documents, some of which are labeled and others "
    "are not. Your task is to generate a sample document based on the primary document, using "
    "both the labeled and unlabeled documents as references.\n"
    "\n"
    "*List of  Available Labels:\n"
    "{labels}\n"
    "\n"
    "*Reference Labeled Documents:\n"
    "{labeled}\n"
    "\n"
    "*Reference Unlabeled Documents:\n"
    "{unlabeled}\n"
    "\n"
    "*Primary Document for Augmentation:\n"
    "{document}\n"
    "\n"
    "*Task:\n"
    "Using the labeled and unlabeled documents as a guide, create a new document based on the "
    "primary document and assign it the appropriate labels from the available list.\n"
    "\n"
    "*Document Format:\n"
    "Content:\n"
    "Label: [Your assigned label]\n"
    "\n"
    "*Generated Example:"
)

PICK_REPRESENTATIVE_TEMPLATE = (
    "You have been provided with a set of similar documents, each indexed by a number. Your "
    "task is to identify the most representative example from this cluster of documents. "
    "Please carefully analyze the given documents and select one document that best captures "
    "the common essence and characteristics of the samples. The selection should emphasize "
    "the representativeness and relevance of the chosen sample to the category, so that it "
    "can serve as a reference for labeling the entire cluster.\n"
    "\n"
    "Documents in the cluster:\n"
    "\n"
    "{documents}\n"
    "\n"
    "Please choose one document that could best serve as a reference for labeling the entire "
    "cluster, and return only the index number of your selection, in format such as [0], [1], "
    "etc.\n"
    "\n"
    "Answer:"
)

COT_LABEL_TEMPLATE = (
    "*Task Description: You are provided with a set of similar documents. Your task is to "
    "predict the label for the target document, using the labeled document examples as "
    "references.\n"
    "\n"
    "*List of  Available Labels:\n"
    "{labels}\n"
    "\n"
    "*Reference Labeled Documents:\n"
    "{labeled}\n"
    "*Target Document for Prediction:\n"
    "{document}\n"
    "\n"
    "*Task:\n"
    "Predict the label for the target document. Please provide your reasoning before "
    "asssigning the label.\n"
    "\n"
    "*Format:\n"
    "Thought: [Your thoughts]\n"
    "Label: [Your assigned label]\n"
    "\n"
    "Answer:"
)


def format_labeled_reference(text: str, labels: list[str]) -> str:
    """One labeled reference block: the document followed by its tag line."""
    return f"{text}\nLabel: [{', '.join(labels)}]"


def numbered_documents(texts: list[str]) -> str:
    """1-based numbered listing used by the representative-pick prompt."""
    return "\n\n".join(f"{i}-. {t}" for i, t in enumerate(texts, start=1))


def truncate_words(text: str, max_words: int) -> str:
    words = text.split(" ")
    if len(words) <= max_words:
        return text
    return " ".join(words[:max_words])

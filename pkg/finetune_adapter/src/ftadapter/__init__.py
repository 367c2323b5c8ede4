"""Thin glue around an external instruction-tuning trainer: validate the
dataset, launch the trainer, then run batched inference whose outputs always
come back as one bracketed label list per prompt."""

__version__ = "0.1.0"


class AdapterError(Exception):
    """User-facing failure: bad dataset, trainer exit, unloadable model."""

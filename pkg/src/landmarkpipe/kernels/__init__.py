"""Hot numeric kernels: compiled ward linkage with a pure-numpy fallback.

The compiled extension is optional; selection happens once at import. Set
LANDMARKPIPE_KERNELS=py to force the fallback or =c to require the extension
(useful for the benchmark and for debugging numeric differences — there
should be none, the two paths follow identical tie-break rules and produce
bit-identical merge structures).
"""

from __future__ import annotations

import os

from landmarkpipe.kernels import _numpy

_choice = os.environ.get("LANDMARKPIPE_KERNELS", "auto")
_fast = None
if _choice in ("auto", "c"):
    try:
        import importlib

        _fast = importlib.import_module("landmarkpipe.kernels._fast")
    except ImportError:
        if _choice == "c":
            raise
        _fast = None
elif _choice != "py":
    raise RuntimeError(f"LANDMARKPIPE_KERNELS must be auto|c|py, got {_choice!r}")

BACKEND = "c" if _fast is not None else "python"

ward_linkage = _fast.ward_linkage if _fast is not None else _numpy.ward_linkage
# the numpy distance-sums kernel is BLAS-backed and has no compiled twin
cluster_distance_sums = _numpy.cluster_distance_sums

__all__ = ["BACKEND", "ward_linkage", "cluster_distance_sums"]

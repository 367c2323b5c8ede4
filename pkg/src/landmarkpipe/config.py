"""Pipeline configuration: one JSON file drives every stage.

Validation happens before any stage runs; each run directory receives the
resolved config snapshot so artifacts are self-describing. `builtin:` paths
resolve to the bundled fixtures (catalogs, 200-doc corpus, synonym table).
"""

from __future__ import annotations

import hashlib
import json
from copy import deepcopy
from importlib import resources
from pathlib import Path

from landmarkpipe.errors import UserError

BUILTIN_FILES = {
    "builtin:reuters": "reuters_topics.json",
    "builtin:wos": "wos_catalog.json",
    "builtin:fixture200": "fixture_corpus.jsonl",
    "builtin:synonyms": "synonyms.tsv",
    "builtin:adversarial": "adversarial_extractions.json",
}

DEFAULTS: dict = {
    "name": "run",
    "out_dir": "runs/out",
    "corpus": {"path": None, "format": None, "label_scheme": "multi_label", "catalog": None},
    "split": {"ratios": [0.5, 0.3, 0.2], "seed": 0},
    "features": {"kind": "embedding", "max_features": 1024, "cache_dir": None, "split": "train"},
    "cluster": {"algorithm": "gmm", "k": 20, "seed": 42, "branching": 50, "threshold": 0.5},
    "metrics": {"algorithms": ["gmm", "hierarchical", "birch", "bisecting_kmeans"], "k_list": [8], "seeds": [0], "split": "validation"},
    "landmarks": {"strategy": "llm_choice", "seed": 0},
    "annotate": {"mode": "import", "labels_file": None, "reveal_gold": False},
    "augment": {
        "wordnet": {"variants": 10, "replace_prob": 0.15, "top_k": 3, "seed": 0, "synonyms": "builtin:synonyms"},
        "rewrite": {"variants": 10, "temperature": 0.3},
        "rag": {"variants": 3, "seed": 0, "policy": "drop_unknown"},
    },
    "emit": {"scheme": "multi_label", "subject": "Reuters news", "seed": 0, "include_landmarks": True},
    "evaluate": {"mode": "external", "predictions": None, "split": "test"},
    "gateway": {
        "mode": "live",
        "chat_base_url": None,
        "chat_api_key": None,
        "chat_model": "default-model",
        "embed_base_url": None,
        "embed_api_key": None,
        "embed_model": "default-embed",
        "transcript_dir": None,
        "max_inflight": 1,
        "max_retries": 5,
        "backoff_base": 0.5,
        "rag_temperature": 0.7,
        "cot_temperature": 0.0,
        "embed_batch_cap": 64,
    },
}

STAGES = ["ingest", "features", "cluster", "metrics", "landmarks", "annotate", "augment", "diagnose", "emit", "evaluate"]

# config sections whose values feed each stage's content hash
STAGE_KEYS: dict[str, list[str]] = {
    "ingest": ["corpus", "split"],
    "features": ["features", "gateway"],
    "cluster": ["cluster"],
    "metrics": ["metrics", "features", "gateway"],
    "landmarks": ["landmarks", "gateway"],
    "annotate": ["annotate"],
    "augment": ["augment", "gateway"],
    "diagnose": [],
    "emit": ["emit"],
    "evaluate": ["evaluate", "gateway"],
}

STAGE_PARENTS: dict[str, list[str]] = {
    "ingest": [],
    "features": ["ingest"],
    "cluster": ["features"],
    "metrics": ["ingest"],
    "landmarks": ["cluster"],
    "annotate": ["landmarks"],
    "augment": ["annotate"],
    "diagnose": ["augment"],
    "emit": ["augment"],
    "evaluate": ["emit"],
}


def resolve_builtin(path: str | None) -> str | None:
    if path is None or not str(path).startswith("builtin:"):
        return path
    try:
        name = BUILTIN_FILES[str(path)]
    except KeyError:
        raise UserError(f"unknown builtin resource {path!r} (have: {sorted(BUILTIN_FILES)})") from None
    return str(resources.files("landmarkpipe").joinpath("data", name))


def _merge(base: dict, override: dict, context: str = "") -> dict:
    out = deepcopy(base)
    for key, value in override.items():
        if key not in base:
            raise UserError(f"unknown config key {context + key!r}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, context + key + ".")
        else:
            out[key] = value
    return out


class PipelineConfig:
    def __init__(self, data: dict, base_dir: Path | None = None):
        self.data = _merge(DEFAULTS, data)
        self.base_dir = base_dir or Path.cwd()
        self.validate()

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        if not path.exists():
            raise UserError(f"config file not found: {path}")
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise UserError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
        return cls(data, base_dir=path.parent.resolve())

    def __getitem__(self, key: str) -> dict:
        return self.data[key]

    def path(self, value: str | None) -> str | None:
        """Resolve builtin: refs and make relative paths config-file-relative."""
        value = resolve_builtin(value)
        if value is None:
            return None
        p = Path(value)
        return str(p if p.is_absolute() else (self.base_dir / p))

    def validate(self) -> None:
        d = self.data
        if d["corpus"]["path"] is None:
            raise UserError("config needs corpus.path")
        ratios = d["split"]["ratios"]
        if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1) > 1e-9:
            raise UserError("split.ratios must be three positive fractions summing to 1")
        if d["features"]["kind"] not in ("tfidf", "embedding"):
            raise UserError("features.kind must be tfidf or embedding")
        if d["cluster"]["algorithm"] not in ("gmm", "hierarchical", "birch", "bisecting_kmeans", "random"):
            raise UserError(f"unknown cluster.algorithm {d['cluster']['algorithm']!r}")
        if d["cluster"]["k"] < 2:
            raise UserError("cluster.k must be at least 2")
        if d["landmarks"]["strategy"] not in ("centroid", "llm_choice", "random"):
            raise UserError(f"unknown landmarks.strategy {d['landmarks']['strategy']!r}")
        if d["annotate"]["mode"] not in ("import", "interactive", "reveal_gold"):
            raise UserError(f"unknown annotate.mode {d['annotate']['mode']!r}")
        if d["augment"]["rag"]["policy"] not in ("drop_unknown", "keep_all"):
            raise UserError("augment.rag.policy must be drop_unknown or keep_all")
        if d["emit"]["scheme"] not in ("multi_label", "hierarchical_2"):
            raise UserError("emit.scheme must be multi_label or hierarchical_2")
        if d["evaluate"]["mode"] not in ("external", "cot_rag"):
            raise UserError("evaluate.mode must be external or cot_rag")
        if d["gateway"]["mode"] not in ("live", "record", "replay", "mock"):
            raise UserError("gateway.mode must be live, record, replay, or mock")

    def resolved(self) -> dict:
        return deepcopy(self.data)

    def stage_hash(self, stage: str) -> str:
        """Content address: this stage's config subset chained with parents'."""
        if stage not in STAGES:
            raise UserError(f"unknown stage {stage!r}")
        parent_hashes = [self.stage_hash(p) for p in STAGE_PARENTS[stage]]
        subset = {key: self.data[key] for key in STAGE_KEYS[stage]}
        canonical = json.dumps(
            {"stage": stage, "config": subset, "parents": parent_hashes},
            sort_keys=True,
            separators=(",", ":"),
        )
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]

    def stage_dir(self, stage: str) -> Path:
        out_dir = Path(self.path(self.data["out_dir"]))
        return out_dir / stage / self.stage_hash(stage)

    def make_gateway(self):
        from landmarkpipe.llmgate import Gateway, GatewayConfig

        g = self.data["gateway"]
        mode = "live" if g["mode"] == "mock" else g["mode"]
        cfg = GatewayConfig.from_env(
            mode=mode,
            chat_model=g["chat_model"],
            embed_model=g["embed_model"],
            max_inflight=g["max_inflight"],
            max_retries=g["max_retries"],
            backoff_base=g["backoff_base"],
            embed_batch_cap=g["embed_batch_cap"],
        )
        if g["chat_base_url"]:
            cfg.chat_base_url = g["chat_base_url"]
        if g["chat_api_key"]:
            cfg.chat_api_key = g["chat_api_key"]
        if g["embed_base_url"]:
            cfg.embed_base_url = g["embed_base_url"]
        if g["embed_api_key"]:
            cfg.embed_api_key = g["embed_api_key"]
        if g["transcript_dir"]:
            cfg.transcript_dir = self.path(g["transcript_dir"])
        gateway = Gateway(cfg)
        gateway.config.rag_temperature = g["rag_temperature"]  # type: ignore[attr-defined]
        gateway.config.cot_temperature = g["cot_temperature"]  # type: ignore[attr-defined]
        return gateway

"""Launch an external trainer on a validated dataset.

The trainer is an arbitrary command template; the adapter writes it a job
config, captures its logs, surfaces its exit status, and records the dataset
hash in a manifest. Tuning knobs have no defaults on purpose: runs must state
them explicitly.
"""

from __future__ import annotations

import json
import shlex
import subprocess
from dataclasses import dataclass
from pathlib import Path

from ftadapter import AdapterError
from ftadapter.dataset import dataset_sha256, validate_dataset


@dataclass
class TrainJobSpec:
    dataset_path: str
    base_model: str
    epochs: int
    learning_rate: float
    adapter_rank: int
    output_dir: str
    trainer_cmd: str  # template; {config}, {dataset}, {output_dir} are filled in

    def __post_init__(self):
        if self.epochs <= 0:
            raise AdapterError("epochs must be positive")
        if self.learning_rate <= 0:
            raise AdapterError("learning_rate must be positive")
        if self.adapter_rank <= 0:
            raise AdapterError("adapter_rank must be positive")
        if not self.trainer_cmd.strip():
            raise AdapterError("trainer_cmd must not be empty")

    def job_config(self) -> dict:
        return {
            "dataset": str(self.dataset_path),
            "base_model": self.base_model,
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "adapter_rank": self.adapter_rank,
            "output_dir": str(self.output_dir),
        }


def launch_train(spec: TrainJobSpec) -> Path:
    """Validate, run the trainer, write the job manifest.

    Returns the trained-model directory ({output_dir}/model by convention;
    the trainer owns its contents). The input dataset is never modified.
    """
    n_records = validate_dataset(spec.dataset_path)
    out_dir = Path(spec.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    config_path = out_dir / "job_config.json"
    with open(config_path, "w", encoding="utf-8") as fh:
        json.dump(spec.job_config(), fh, indent=2)

    command = spec.trainer_cmd.format(
        config=str(config_path), dataset=str(spec.dataset_path), output_dir=str(out_dir)
    )
    log_path = out_dir / "train.log"
    with open(log_path, "w", encoding="utf-8") as log:
        result = subprocess.run(shlex.split(command), stdout=log, stderr=subprocess.STDOUT)
    if result.returncode != 0:
        tail = log_path.read_text(encoding="utf-8").splitlines()[-10:]
        raise AdapterError(
            f"trainer exited with {result.returncode}; last log lines:\n" + "\n".join(tail)
        )

    manifest = {
        "dataset_sha256": dataset_sha256(spec.dataset_path),
        "n_records": n_records,
        "job_config": spec.job_config(),
        "trainer_cmd": command,
        "trainer_exit": result.returncode,
    }
    with open(out_dir / "job_manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)

    model_dir = out_dir / "model"
    if not model_dir.exists():
        raise AdapterError(f"trainer succeeded but produced no model directory at {model_dir}")
    return model_dir

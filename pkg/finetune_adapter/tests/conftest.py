from __future__ import annotations

import json
import textwrap

import pytest

STUB_TRAINER = textwrap.dedent(
    """
    import json, sys
    from pathlib import Path

    config = json.loads(Path(sys.argv[1]).read_text())
    labels = set()
    with open(config["dataset"], encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                inner = rec["output"].strip()[1:-1]
                labels.update(p.strip() for p in inner.split(",") if p.strip())
    model_dir = Path(config["output_dir"]) / "model"
    model_dir.mkdir(parents=True, exist_ok=True)
    (model_dir / "stub_model.json").write_text(json.dumps({"labels": sorted(labels)}))
    print("stub trainer finished:", len(labels), "labels")
    """
).strip()


@pytest.fixture()
def stub_trainer(tmp_path):
    script = tmp_path / "stub_trainer.py"
    script.write_text(STUB_TRAINER + "\n", encoding="utf-8")
    return f"python3 {script} {{config}}"


@pytest.fixture()
def dataset_file(tmp_path):
    path = tmp_path / "train.jsonl"
    rows = [
        {"instruction": f"Assign tags for the following Reuters news Document:\n\ndoc {i}\n\nAnswer:", "input": "", "output": "[earn]"}
        for i in range(6)
    ]
    rows.append({"instruction": "Assign tags ... multi", "input": "", "output": "[corn, wheat]"})
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    return path

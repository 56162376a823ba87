import json
from pathlib import Path

import pytest


def build_corpus_dir(root: Path, sets: list[dict]) -> Path:
    """Write a corpus fixture directory from a compact spec.

    ``sets``: [{"set_id", "source"?, "tasks": [{"task_id", "description",
    "answer": {...}, "data_files"?: {rel: content}, "reference_code"?,
    "category"?}]}]
    """
    root.mkdir(parents=True, exist_ok=True)
    manifest_sets = []
    for set_spec in sets:
        set_id = set_spec["set_id"]
        (root / set_id).mkdir(exist_ok=True)
        task_entries = []
        for task_spec in set_spec["tasks"]:
            task_id = task_spec["task_id"]
            desc_rel = f"{set_id}/{task_id}.md"
            (root / desc_rel).write_text(task_spec["description"], encoding="utf-8")
            entry = {
                "task_id": task_id,
                "description_file": desc_rel,
                "data_files": [],
                "answer": task_spec["answer"],
            }
            for rel, content in (task_spec.get("data_files") or {}).items():
                path = root / rel
                path.parent.mkdir(parents=True, exist_ok=True)
                path.write_text(content, encoding="utf-8")
                entry["data_files"].append(rel)
            if "reference_code" in task_spec:
                ref_rel = f"{set_id}/{task_id}.ref.py"
                (root / ref_rel).write_text(task_spec["reference_code"], encoding="utf-8")
                entry["reference_code_file"] = ref_rel
            if "category" in task_spec:
                entry["category"] = task_spec["category"]
            task_entries.append(entry)
        manifest_sets.append(
            {
                "set_id": set_id,
                "source": set_spec.get("source", "exercise-like"),
                "tasks": task_entries,
            }
        )
    (root / "manifest.json").write_text(
        json.dumps({"problem_sets": manifest_sets}, indent=2), encoding="utf-8"
    )
    return root


def single_turn_set(set_id: str, description: str, answer: dict, **task_extra) -> dict:
    return {
        "set_id": set_id,
        "tasks": [
            {"task_id": f"{set_id}-q0", "description": description, "answer": answer,
             **task_extra}
        ],
    }


@pytest.fixture
def corpus_builder(tmp_path):
    def build(sets, name="corpus"):
        return build_corpus_dir(tmp_path / name, sets)

    return build

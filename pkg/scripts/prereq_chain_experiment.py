#!/usr/bin/env python3
"""Synthetic prerequisite-chain experiment.

Builds a 10-problem corpus where problem j is solvable only when the
solution token of problem j-1 appears in the prompt (i.e. was retrieved
from memory). A scripted student and mentor make the whole thing
deterministic and offline. Expected pass rates:

    easy_to_hard, K=1  -> 1.00   (every prerequisite is in memory in time)
    easy_to_hard, K=0  -> 0.10   (no memory: only the root is solvable)
    hard_to_easy, K=1  -> 0.10   (prerequisites are never solved first)
"""

import argparse
import json
import re
import tempfile
from pathlib import Path

from dsagent.gateway import MockChatGateway, MockEmbedder
from dsagent.runner import RunConfig, run
from dsagent.sandbox import StubSandbox

CHAIN_LENGTH = 10
_PROBLEM_RE = re.compile(r"Problem to solve now:\nalpha(\d+) ")


def token(j: int) -> str:
    return f"#SOLUTION_TOKEN_{j}#"


def build_chain_corpus(root: Path) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    sets = []
    for j in range(CHAIN_LENGTH):
        set_id = f"c{j}"
        (root / set_id).mkdir(exist_ok=True)
        desc_rel = f"{set_id}/{set_id}-q0.md"
        (root / desc_rel).write_text(f"alpha{j} alpha{j + 1}", encoding="utf-8")
        sets.append({
            "set_id": set_id,
            "source": "synthetic-chain",
            "tasks": [{
                "task_id": f"{set_id}-q0",
                "description_file": desc_rel,
                "data_files": [],
                "answer": {"kind": "value_literal", "expected": f"answer{j}"},
            }],
        })
    (root / "manifest.json").write_text(
        json.dumps({"problem_sets": sets}, indent=2), encoding="utf-8"
    )
    return root


def student_response(request) -> str:
    text = request.messages[0][1]
    j = int(_PROBLEM_RE.search(text).group(1))
    if j == 0 or token(j - 1) in text:
        return f"```python\n# {token(j)}\nprint('answer{j}')\n```"
    return "```python\nprint('wrong')\n```"


def mentor_response(request) -> str:
    j = int(re.search(r"alpha(\d+) ", request.messages[0][1]).group(1))
    return f"Difficulty: {j + 1} - position in the chain"


def run_cell(corpus_root: Path, strategy: str, k: int) -> float:
    report = run(
        RunConfig(corpus_path=str(corpus_root), strategy=strategy, k=k, repeats=1),
        MockChatGateway(respond=student_response),
        MockEmbedder(),
        StubSandbox(),
        mentor_gateway=MockChatGateway(respond=mentor_response),
    )
    return report.mean_pass_rate


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--corpus-dir", default=None,
                        help="where to write the synthetic corpus (default: temp dir)")
    args = parser.parse_args()

    if args.corpus_dir:
        root = build_chain_corpus(Path(args.corpus_dir))
        print(f"corpus written to {root}")
        cells = [("easy_to_hard", 1), ("easy_to_hard", 0), ("hard_to_easy", 1)]
        for strategy, k in cells:
            print(f"{strategy:>12s}  K={k}  pass_rate={run_cell(root, strategy, k):.2f}")
        return 0

    with tempfile.TemporaryDirectory() as tmp:
        root = build_chain_corpus(Path(tmp) / "chain")
        for strategy, k in [("easy_to_hard", 1), ("easy_to_hard", 0), ("hard_to_easy", 1)]:
            print(f"{strategy:>12s}  K={k}  pass_rate={run_cell(root, strategy, k):.2f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

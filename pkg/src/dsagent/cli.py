"""Command-line entry points.

Subcommands: ``assess`` (stage 1 only), ``curriculum`` (order from saved
assessments), ``run`` (full campaign), ``sweep`` (ablation grid),
``report`` (summarize a finished run), ``correlate`` (rank correlation
between two difficulty metrics). Credentials are taken from environment
variables only; everything else is flags or a JSON config file.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from . import runner
from .corpus import load_corpus
from .curriculum import generate as generate_curriculum
from .difficulty import DifficultyAssessment
from .gateway import (
    CachingChatGateway,
    CachingEmbedder,
    GatewayConfig,
    HttpChatGateway,
    HttpEmbedder,
    MockChatGateway,
    MockEmbedder,
)
from .sandbox import ProcessSandboxClient, StubSandbox


def _mock_mentor_response(request) -> str:
    # Deterministic stand-in: difficulty grows with description length.
    text = request.messages[0][1]
    level = 1 + (len(text) % 10)
    return f"Difficulty: {level} - length-proxy mock judgment"


def _mock_student_response(request) -> str:
    return '```python\nprint("mock-answer")\n```'


def _build_gateways(args):
    if args.provider == "mock":
        mentor = MockChatGateway(respond=_mock_mentor_response, model_id="mock-mentor")
        student = MockChatGateway(respond=_mock_student_response, model_id="mock-student")
        weak = MockChatGateway(respond=_mock_student_response, model_id="mock-weak")
        embedder = MockEmbedder()
    else:
        config = GatewayConfig(
            endpoint=args.endpoint,
            credential_env=args.credential_env,
            cache_dir=Path(args.cache_dir) if args.cache_dir else None,
        )
        mentor = HttpChatGateway(config, args.mentor_model)
        student = HttpChatGateway(config, args.student_model)
        weak = HttpChatGateway(config, args.weak_model)
        embedder = HttpEmbedder(config, args.embed_model)
    if args.cache_dir:
        cache_dir = Path(args.cache_dir)
        mentor = CachingChatGateway(mentor, cache_dir)
        student = CachingChatGateway(student, cache_dir)
        weak = CachingChatGateway(weak, cache_dir)
        embedder = CachingEmbedder(embedder, cache_dir)
    return mentor, student, weak, embedder


def _build_sandbox(args):
    if args.stub_sandbox:
        return StubSandbox()
    argv = args.sandbox_cmd.split() if args.sandbox_cmd else None
    return ProcessSandboxClient(argv=argv, workdir=args.corpus or ".")


def _add_provider_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--provider", choices=["mock", "http"], default="mock")
    parser.add_argument("--endpoint", default="")
    parser.add_argument("--credential-env", default="DSAGENT_API_KEY")
    parser.add_argument("--mentor-model", default="default")
    parser.add_argument("--student-model", default="default")
    parser.add_argument("--weak-model", default="weak")
    parser.add_argument("--embed-model", default="default")
    parser.add_argument("--cache-dir", default=None, help="response cache directory")
    parser.add_argument("--sandbox-cmd", default=None,
                        help="argv for the sandbox child (default: python -m codebox)")
    parser.add_argument("--stub-sandbox", action="store_true",
                        help="use the scripted stub sandbox (offline demos)")


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--corpus", required=True)
    parser.add_argument("--config", default=None, help="JSON file of RunConfig fields")
    parser.add_argument("--metric", dest="difficulty_metric", default=None,
                        choices=["problem_based", "reference_code", "pass_rate", "manual"])
    parser.add_argument("--strategy", default=None,
                        choices=["easy_to_hard", "hard_to_easy", "random"])
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("-k", "--examples", dest="k", type=int, default=None)
    parser.add_argument("--order", dest="presentation_order", default=None,
                        choices=["increasing_similarity", "increasing_difficulty"])
    parser.add_argument("--no-incorrect", dest="include_incorrect",
                        action="store_false", default=None)
    parser.add_argument("--repeats", type=int, default=None)
    parser.add_argument("--temperature", type=float, default=None)
    parser.add_argument("--timeout", dest="timeout_s", type=float, default=None)
    parser.add_argument("--manual-labels", dest="manual_labels_path", default=None)
    parser.add_argument("--out", dest="output_dir", default=None)


def _config_from_args(args) -> runner.RunConfig:
    values: dict = {}
    if args.config:
        values.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
    values["corpus_path"] = args.corpus
    field_names = {f.name for f in fields(runner.RunConfig)}
    for name in field_names:
        flag_value = getattr(args, name, None)
        if flag_value is not None:
            values[name] = flag_value
    values.setdefault("mentor_model_id", args.mentor_model)
    values.setdefault("student_model_id", args.student_model)
    values.setdefault("weak_model_id", args.weak_model)
    values.setdefault("embed_model_id", args.embed_model)
    return runner.RunConfig(**{k: v for k, v in values.items() if k in field_names})


def _load_assessments(path: str) -> list[DifficultyAssessment]:
    records = json.loads(Path(path).read_text(encoding="utf-8"))
    return [DifficultyAssessment.from_record(r) for r in records]


def _save_assessments(assessments, path: str) -> None:
    Path(path).write_text(
        json.dumps([a.to_record() for a in assessments], indent=2) + "\n",
        encoding="utf-8",
    )


def cmd_assess(args) -> int:
    config = _config_from_args(args)
    mentor, _, weak, _ = _build_gateways(args)
    sandbox = _build_sandbox(args)
    try:
        corpus = load_corpus(args.corpus)
        assessments = runner.assess_corpus(
            corpus, config, mentor_gateway=mentor, weak_gateway=weak, sandbox=sandbox
        )
    finally:
        sandbox.close()
    _save_assessments(assessments, args.assessments_out)
    print(f"wrote {len(assessments)} assessments to {args.assessments_out}")
    return 0


def cmd_curriculum(args) -> int:
    assessments = _load_assessments(args.assessments)
    curriculum = generate_curriculum(assessments, args.strategy, seed=args.seed)
    output = json.dumps(curriculum.to_record(), indent=2)
    if args.out:
        Path(args.out).write_text(output + "\n", encoding="utf-8")
    else:
        print(output)
    return 0


def cmd_run(args) -> int:
    config = _config_from_args(args)
    mentor, student, weak, embedder = _build_gateways(args)
    sandbox = _build_sandbox(args)
    assessments = _load_assessments(args.assessments) if args.assessments else None
    try:
        report = runner.run(
            config, student, embedder, sandbox,
            mentor_gateway=mentor, weak_gateway=weak, assessments=assessments,
        )
    finally:
        sandbox.close()
    print(runner.format_summary(report), end="")
    return 0


def cmd_sweep(args) -> int:
    config = _config_from_args(args)
    axes: dict[str, list] = {}
    for spec in args.axis:
        name, _, raw = spec.partition("=")
        if not raw:
            print(f"bad --axis {spec!r}; expected name=v1,v2", file=sys.stderr)
            return 2
        values: list = []
        for token in raw.split(","):
            if name == "k":
                values.append(int(token))
            elif name == "include_incorrect":
                values.append(token.lower() in ("1", "true", "yes"))
            else:
                values.append(token)
        axes[name] = values
    mentor, student, weak, embedder = _build_gateways(args)
    sandbox = _build_sandbox(args)
    try:
        _, table = runner.sweep(
            config, axes, student, embedder, sandbox,
            mentor_gateway=mentor, weak_gateway=weak,
        )
    finally:
        sandbox.close()
    print(table, end="")
    if config.output_dir:
        Path(config.output_dir, "sweep_table.txt").write_text(table, encoding="utf-8")
    return 0


def cmd_report(args) -> int:
    report_path = Path(args.run_dir) / "report.json"
    if not report_path.is_file():
        print(f"no completed report under {args.run_dir}", file=sys.stderr)
        return 1
    record = json.loads(report_path.read_text(encoding="utf-8"))
    print(f"mean_pass_rate={record['mean_pass_rate']:.3f} over {len(record['repeats'])} repeats")
    for i, repeat in enumerate(record["repeats"]):
        pr = repeat["pass_report"]
        print(f"  repeat {i}: overall={pr['overall']:.3f}")
        for cell, (num, den) in sorted(pr["counts"].items()):
            print(f"    {cell}: {num}/{den}")
    return 0


def cmd_correlate(args) -> int:
    a = _load_assessments(args.assessments_a)
    b = _load_assessments(args.assessments_b)
    coefficient = runner.correlate_difficulty(a, b)
    print(f"spearman={coefficient:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dsagent")
    sub = parser.add_subparsers(dest="command", required=True)

    p_assess = sub.add_parser("assess", help="assess difficulty for a corpus")
    _add_run_flags(p_assess)
    _add_provider_flags(p_assess)
    p_assess.add_argument("--assessments-out", required=True)
    p_assess.set_defaults(func=cmd_assess)

    p_curriculum = sub.add_parser("curriculum", help="order sets from saved assessments")
    p_curriculum.add_argument("--assessments", required=True)
    p_curriculum.add_argument("--strategy", required=True,
                              choices=["easy_to_hard", "hard_to_easy", "random"])
    p_curriculum.add_argument("--seed", type=int, default=0)
    p_curriculum.add_argument("--out", default=None)
    p_curriculum.set_defaults(func=cmd_curriculum)

    p_run = sub.add_parser("run", help="full two-stage campaign")
    _add_run_flags(p_run)
    _add_provider_flags(p_run)
    p_run.add_argument("--assessments", default=None,
                       help="reuse saved assessments instead of re-assessing")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="ablation grid over config axes")
    _add_run_flags(p_sweep)
    _add_provider_flags(p_sweep)
    p_sweep.add_argument("--axis", action="append", default=[],
                         help="axis values, e.g. --axis k=0,1,5 --axis strategy=easy_to_hard,random")
    p_sweep.set_defaults(func=cmd_sweep)

    p_report = sub.add_parser("report", help="summarize a finished run directory")
    p_report.add_argument("--run-dir", required=True)
    p_report.set_defaults(func=cmd_report)

    p_correlate = sub.add_parser("correlate", help="rank correlation of two metrics")
    p_correlate.add_argument("assessments_a")
    p_correlate.add_argument("assessments_b")
    p_correlate.set_defaults(func=cmd_correlate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())

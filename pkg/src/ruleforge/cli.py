"""Command-line entry point.

Subcommands: train, augment, generate, evaluate, direct, inspect, stats.
Configuration comes from a JSON file (--config) with flag overrides; every
command runs offline with the replay transport (--transport replay
--fixture ...), which is also how the test suite drives it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from collections import Counter
from pathlib import Path

from . import evalx, trainer
from .core import (
    FormatError,
    RuleBase,
    Triple,
    key_of_predicates,
    load_dataset,
    load_rulebase,
    save_rulebase,
)
from .llm import (
    EndpointError,
    HttpTransport,
    LlmClient,
    LlmConfig,
    ProtocolError,
    ReplayTransport,
    TranscriptLog,
)
from .ruledsl import Limits, canonical_print, parse
from .selector import generate as run_generate
from .trainer import TrainAborted, TrainConfig

API_KEY_ENV = "RULEFORGE_API_KEY"
DEFAULT_ENDPOINT = "http://localhost:11434/v1/chat/completions"
DEFAULT_MODEL = "llama3:70b"


class CliError(RuntimeError):
    pass


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


def dispatch(argv: list[str]) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse prints its own usage diagnostics
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except (CliError, FormatError, TrainAborted, EndpointError, ProtocolError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ruleforge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--rules", help="rulebase file")
        p.add_argument("--data", help="dataset file (JSON lines)")
        p.add_argument("--out", help="output path")
        p.add_argument("--transport", choices=("http", "replay"), help="LLM transport")
        p.add_argument("--fixture", help="replay fixture file")
        p.add_argument("--endpoint", help="chat-completions endpoint URL")
        p.add_argument("--model", help="model id")
        p.add_argument("--threshold", type=int, help="Levenshtein acceptance threshold")
        p.add_argument("--jobs", type=int, default=1, help="parallel workers where supported")
        p.add_argument("--trace", action="store_true", help="emit generation traces to stderr")

    p_train = sub.add_parser("train", help="synthesize rules from a dataset")
    common(p_train)
    p_train.set_defaults(func=_cmd_train)

    p_augment = sub.add_parser("augment", help="add rules for co-occurring predicate combos")
    common(p_augment)
    p_augment.set_defaults(func=_cmd_augment)

    p_generate = sub.add_parser("generate", help="verbalize triples with a rulebase")
    common(p_generate)
    p_generate.add_argument("--triple", action="append", default=[], help='inline triple "subj|pred|obj" (repeatable)')
    p_generate.set_defaults(func=_cmd_generate)

    p_eval = sub.add_parser("evaluate", help="score a rulebase against a test set")
    common(p_eval)
    p_eval.set_defaults(func=_cmd_evaluate)

    p_direct = sub.add_parser("direct", help="prompted-LLM direct baseline")
    common(p_direct)
    p_direct.set_defaults(func=_cmd_direct)

    p_inspect = sub.add_parser("inspect", help="show rules by id or predicate list")
    common(p_inspect)
    p_inspect.add_argument("--id", dest="rule_id", help="rule id to show")
    p_inspect.add_argument("--predicates", help='comma-separated predicate list, e.g. "birth place,birth year"')
    p_inspect.set_defaults(func=_cmd_inspect)

    p_stats = sub.add_parser("stats", help="rulebase composition statistics")
    common(p_stats)
    p_stats.set_defaults(func=_cmd_stats)

    return parser


# -- configuration -----------------------------------------------------------


def _load_config(args) -> dict:
    if not args.config:
        return {}
    path = Path(args.config)
    try:
        config = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise CliError(f"{path}: config must be a JSON object")
    return config


def _paths(config: dict) -> dict:
    paths = config.get("paths", {})
    if not isinstance(paths, dict):
        raise CliError("config 'paths' must be an object")
    return paths


def _llm_config(args, config: dict) -> LlmConfig:
    section = config.get("llm", {})
    return LlmConfig(
        endpoint=args.endpoint or section.get("endpoint") or DEFAULT_ENDPOINT,
        model=args.model or section.get("model") or DEFAULT_MODEL,
        temperature=float(section.get("temperature", 0.0)),
        timeout_s=float(section.get("timeout_s", 120.0)),
        max_retries=int(section.get("max_retries", 2)),
    )


def _train_config(args, config: dict, checkpoint: str | None) -> TrainConfig:
    section = dict(config.get("train", {}))
    limits = Limits(**section.pop("limits", {}))
    prompt_overrides = {}
    for name in ("rule_prompt", "repair_prompt", "sample_prompt"):
        path = section.pop(f"{name}_path", None)
        if path is not None:
            if not Path(path).is_file():
                raise CliError(f"template file not found: {path}")
            prompt_overrides[name] = Path(path).read_text(encoding="utf-8")
    if args.threshold is not None:
        section["levenshtein_threshold"] = args.threshold
    try:
        return TrainConfig(limits=limits, checkpoint_path=checkpoint, **prompt_overrides, **section)
    except TypeError as exc:
        raise CliError(f"bad train config: {exc}") from exc


def _client(args, config: dict) -> LlmClient:
    transport_kind = args.transport or config.get("transport") or "http"
    paths = _paths(config)
    if transport_kind == "replay":
        fixture = args.fixture or paths.get("fixture")
        if not fixture:
            raise CliError("replay transport needs --fixture (or paths.fixture in the config)")
        transport = ReplayTransport.from_fixture(fixture)
    else:
        transport = HttpTransport(api_key=os.environ.get(API_KEY_ENV))
    transcript = TranscriptLog(paths["transcript"]) if paths.get("transcript") else None
    return LlmClient(cfg=_llm_config(args, config), transport=transport, transcript=transcript)


def _require(value: str | None, flag: str) -> str:
    if not value:
        raise CliError(f"missing {flag}")
    return value


def _load_rules(path: str | None) -> RuleBase:
    if path and Path(path).is_file():
        return load_rulebase(path)
    return RuleBase()


# -- commands ----------------------------------------------------------------


def _cmd_train(args) -> int:
    config = _load_config(args)
    paths = _paths(config)
    data_path = _require(args.data or paths.get("dataset"), "--data")
    out_path = _require(args.out or args.rules or paths.get("rulebase"), "--out")
    report_path = paths.get("report") or f"{out_path}.report.jsonl"

    dataset = load_dataset(data_path)
    rb = _load_rules(args.rules or (out_path if Path(out_path).is_file() else None))
    client = _client(args, config)
    cfg = _train_config(args, config, checkpoint=out_path)
    try:
        rb, reports = trainer.train(dataset, rb, client, cfg)
    except TrainAborted as exc:
        save_rulebase(rb, out_path)
        trainer.save_reports(exc.reports, report_path)
        raise
    save_rulebase(rb, out_path)
    trainer.save_reports(reports, report_path)
    added = sum(1 for r in reports if r.outcome == trainer.RULE_ADDED)
    skipped = sum(1 for r in reports if r.outcome == trainer.COVERED_SKIP)
    failed = sum(1 for r in reports if r.outcome == trainer.SKIPPED_AFTER_FAILURES)
    print(f"trained {added} rules ({skipped} covered, {failed} failed) -> {out_path}")
    return 0


def _cmd_augment(args) -> int:
    config = _load_config(args)
    paths = _paths(config)
    data_path = _require(args.data or paths.get("dataset"), "--data")
    rules_path = _require(args.rules or paths.get("rulebase"), "--rules")
    out_path = args.out or rules_path
    report_path = paths.get("report") or f"{out_path}.augment.jsonl"

    dataset = load_dataset(data_path)
    rb = load_rulebase(rules_path)
    client = _client(args, config)
    cfg = _train_config(args, config, checkpoint=out_path)
    try:
        rb, reports = trainer.augment(rb, dataset, client, cfg)
    except TrainAborted as exc:
        save_rulebase(rb, out_path)
        trainer.save_reports(exc.reports, report_path)
        raise
    save_rulebase(rb, out_path)
    trainer.save_reports(reports, report_path)
    added = sum(1 for r in reports if r.outcome == trainer.RULE_ADDED)
    print(f"augmented with {added} synthetic rules -> {out_path}")
    return 0


def _parse_inline_triple(text: str) -> Triple:
    parts = []
    current = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\" and i + 1 < len(text) and text[i + 1] == "|":
            current.append("|")
            i += 2
            continue
        if ch == "|":
            parts.append("".join(current))
            current = []
            i += 1
            continue
        current.append(ch)
        i += 1
    parts.append("".join(current))
    if len(parts) != 3:
        raise CliError(f'inline triple must be "subj|pred|obj", got {text!r}')
    try:
        return Triple(*parts)
    except ValueError as exc:
        raise CliError(f"bad inline triple {text!r}: {exc}") from exc


def _cmd_generate(args) -> int:
    config = _load_config(args)
    paths = _paths(config)
    rules_path = _require(args.rules or paths.get("rulebase"), "--rules")
    rb = load_rulebase(rules_path) if Path(rules_path).is_file() else RuleBase()

    inputs: list[tuple[str, list[Triple]]] = []
    if args.triple:
        inputs.append(("inline", [_parse_inline_triple(t) for t in args.triple]))
    if args.data:
        for inst in load_dataset(args.data):
            inputs.append((inst.id, list(inst.triples)))
    if not inputs:
        raise CliError("nothing to generate: pass --triple or --data")

    limits = Limits(**config.get("train", {}).get("limits", {}))
    out_lines = []
    for name, triples in inputs:
        text, trace = run_generate(rb, triples, limits)
        out_lines.append(text)
        print(text)
        if args.trace:
            print(json.dumps({"id": name, **trace.to_dict()}, ensure_ascii=False), file=sys.stderr)
    if args.out:
        Path(args.out).write_text("\n".join(out_lines) + "\n", encoding="utf-8")
    return 0


def _cmd_evaluate(args) -> int:
    config = _load_config(args)
    paths = _paths(config)
    rules_path = _require(args.rules or paths.get("rulebase"), "--rules")
    data_path = _require(args.data or paths.get("dataset"), "--data")
    rb = load_rulebase(rules_path)
    testset = load_dataset(data_path)
    limits = Limits(**config.get("train", {}).get("limits", {}))
    report = evalx.evaluate(rb, testset, limits, jobs=max(args.jobs, 1))
    if args.out:
        evalx.save_eval_report(report, args.out)
    print(f"BLEU: {report.bleu:.2f}")
    print(
        f"traces: {report.exact_traces} exact, {report.split_traces} split, "
        f"{report.default_traces} with defaults (of {report.instance_count})"
    )
    print(f"timing: mean {report.mean_seconds * 1000:.2f} ms, p95 {report.p95_seconds * 1000:.2f} ms")
    return 0


def _cmd_direct(args) -> int:
    config = _load_config(args)
    data_path = _require(args.data or _paths(config).get("dataset"), "--data")
    testset = load_dataset(data_path)
    client = _client(args, config)
    hypotheses = []
    for inst in testset:
        text = evalx.direct_generate(inst.triples, client)
        hypotheses.append(text)
        print(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            for inst, text in zip(testset, hypotheses):
                fh.write(json.dumps({"id": inst.id, "hypothesis": text}, ensure_ascii=False) + "\n")
    bleu = evalx.corpus_bleu(hypotheses, [list(i.references) for i in testset])
    print(f"BLEU: {bleu:.2f}", file=sys.stderr)
    return 0


def _cmd_inspect(args) -> int:
    rules_path = _require(args.rules or _paths(_load_config(args)).get("rulebase"), "--rules")
    rb = load_rulebase(rules_path)
    if args.rule_id:
        rule = rb.get(args.rule_id)
    elif args.predicates:
        preds = [p.strip() for p in args.predicates.split(",") if p.strip()]
        if not preds:
            raise CliError("empty --predicates")
        rule = rb.rule_for_key(key_of_predicates(preds))
    else:
        for rule in rb:
            print(f"{rule.id}  [{', '.join(rule.spec_predicates)}]  origin={rule.origin}")
        return 0
    if rule is None:
        print("no rule", file=sys.stderr)
        return 1
    print(f"id: {rule.id}")
    print(f"predicates: {', '.join(rule.spec_predicates)}")
    print(f"origin: {rule.origin}")
    if rule.provenance:
        print(f"provenance: {rule.provenance}")
    print("body:")
    print(canonical_print(parse(rule.body)))
    return 0


def _cmd_stats(args) -> int:
    rules_path = _require(args.rules or _paths(_load_config(args)).get("rulebase"), "--rules")
    rb = load_rulebase(rules_path)
    by_origin = Counter(rule.origin for rule in rb)
    by_size = Counter(len(rule.spec_predicates) for rule in rb)
    print(f"rules: {len(rb)}")
    for origin in sorted(by_origin):
        print(f"  origin {origin}: {by_origin[origin]}")
    print(f"indexed keys: {len(rb.index)}")
    print("key sizes:")
    for size in sorted(by_size):
        print(f"  {size}: {by_size[size]}")
    return 0


if __name__ == "__main__":
    main()

"""Training pipeline: one pass over the dataset synthesizing rules through
an LLM write/execute/repair loop, then cluster-driven synthetic augmentation.

A rule passes the gate when its body executes cleanly on the training
triples and the output lies within the Levenshtein threshold of the first
reference.  Instances whose predicate key is already indexed are skipped,
so the effective training set shrinks as rules accumulate.
"""

from __future__ import annotations

import hashlib
import json
import re
import textwrap
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .cluster import build_cooccurrence_graph, components_capped, enumerate_predicate_combos
from .core import Instance, Rule, RuleBase, Triple, normalize_predicate, save_rulebase
from .evalx import levenshtein
from .llm import Conversation, EndpointError, LlmClient, ProtocolError
from .ruledsl import GRAMMAR, ExecOutcome, Limits, ParseError, canonical_print, execute, parse
from .selector import DEFAULT_RULE_ID, greedy_cover

COVERED_SKIP = "covered_skip"
RULE_ADDED = "rule_added"
SKIPPED_AFTER_FAILURES = "skipped_after_failures"


class ExtractionError(ValueError):
    """No usable code could be extracted from an assistant reply."""


class TrainAborted(RuntimeError):
    """Endpoint failure mid-pass; the rulebase stays valid and checkpointed,
    and the reports gathered so far ride along for resumption."""

    def __init__(self, reports: list["SynthesisReport"], cause: Exception):
        super().__init__(f"training aborted: {cause}")
        self.reports = reports
        self.cause = cause


def _default_prompt(name: str) -> str:
    return resources.files("ruleforge").joinpath(f"prompts/{name}").read_text(encoding="utf-8")


@dataclass
class TrainConfig:
    levenshtein_threshold: int = 5
    repair_attempts: int = 2
    restart_attempts: int = 1
    limits: Limits = field(default_factory=Limits)
    component_cap: int = 20
    synthetic_per_component_cap: int | None = None
    synthetic_global_cap: int | None = 5000
    rule_prompt: str = field(default_factory=lambda: _default_prompt("rule_prompt.txt"))
    repair_prompt: str = field(default_factory=lambda: _default_prompt("repair_prompt.txt"))
    sample_prompt: str = field(default_factory=lambda: _default_prompt("sample_prompt.txt"))
    checkpoint_path: str | Path | None = None

    def __post_init__(self) -> None:
        if self.levenshtein_threshold < 0 or self.repair_attempts < 0 or self.restart_attempts < 0:
            raise ValueError("threshold and attempt counts must be >= 0")


@dataclass
class SynthesisReport:
    instance_id: str
    outcome: str  # covered_skip | rule_added | skipped_after_failures
    attempts: int = 0  # completions consumed
    final_distance: int | None = None
    rule_id: str | None = None
    diagnostics: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "instance": self.instance_id,
            "outcome": self.outcome,
            "attempts": self.attempts,
            "final_distance": self.final_distance,
            "rule_id": self.rule_id,
            "diagnostics": self.diagnostics,
        }


def save_reports(reports: list[SynthesisReport], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for report in reports:
            fh.write(json.dumps(report.to_dict(), ensure_ascii=False) + "\n")


@dataclass
class SynthesisResult:
    """What a synthesis attempt produced; ``body`` is canonical source on success."""

    spec_predicates: tuple[str, ...]
    body: str | None
    final_distance: int | None
    completions: int
    diagnostics: list[str]

    @property
    def ok(self) -> bool:
        return self.body is not None


def render_template(template: str, mapping: dict[str, str]) -> str:
    """Replace ``{name}`` placeholders present in ``mapping``; leave every
    other brace alone (templates and code fragments are full of them)."""
    return re.sub(r"\{(\w+)\}", lambda m: mapping.get(m.group(1), m.group(0)), template)


def render_triples_inline(triples: tuple[Triple, ...] | list[Triple]) -> str:
    return ", ".join(f"({t.subj} | {t.pred} | {t.obj})" for t in triples)


def extract_code(reply: str) -> str:
    """Pull the rule body out of an assistant reply.

    Order of preference: first <code></code> span, first fenced block, the
    whole reply.  Then scaffold-echo lines are dropped, blank edges trimmed
    and any uniform leading indent removed.
    """
    match = re.search(r"<code>(.*?)</code>", reply, re.DOTALL | re.IGNORECASE)
    if match:
        text = match.group(1)
    else:
        match = re.search(r"```[^\n]*\n(.*?)```", reply, re.DOTALL)
        text = match.group(1) if match else reply

    kept: list[str] = []
    dropped_if = False
    for line in text.splitlines():
        stripped = line.strip()
        if re.match(r"^(triples|relations)\s*=", stripped):
            continue
        if re.match(r"^if\s*\(?\s*relations\s*==", stripped):
            dropped_if = True
            continue
        if stripped.startswith("//"):
            continue
        kept.append(line)
    if dropped_if:
        for i in range(len(kept) - 1, -1, -1):
            if kept[i].strip() == "}":
                kept.pop(i)
                break
    body = textwrap.dedent("\n".join(kept).strip("\n"))
    if not body.strip():
        raise ExtractionError("reply contains no code")
    return body


def render_rule_prompt(template: str, instance: Instance) -> str:
    relations = [t.norm_pred for t in instance.triples]
    return render_template(
        template,
        {
            "grammar": GRAMMAR,
            "triples": render_triples_inline(instance.triples),
            "relations": json.dumps(relations, ensure_ascii=False),
            "output": instance.references[0],
        },
    )


def synthesize_rule(instance: Instance, client: LlmClient, cfg: TrainConfig) -> SynthesisResult:
    """Run the write/execute/repair state machine for one instance.

    One conversation gets the rule-writing prompt plus up to
    ``repair_attempts`` repair rounds; if it never passes, a fresh
    conversation restarts from the prompt, up to ``restart_attempts`` times.
    """
    reference = instance.references[0]
    spec_predicates = tuple(t.norm_pred for t in instance.triples)
    prompt = render_rule_prompt(cfg.rule_prompt, instance)
    diagnostics: list[str] = []
    completions = 0
    last_distance: int | None = None

    for _restart in range(cfg.restart_attempts + 1):
        conv = Conversation()
        reply = client.ask(conv, prompt)
        completions += 1
        for attempt in range(cfg.repair_attempts + 1):
            body, produced, distance = _check_reply(reply, instance, reference, cfg)
            if body is not None:
                return SynthesisResult(spec_predicates, body, distance, completions, diagnostics)
            if distance is not None:
                last_distance = distance
            diagnostics.append(produced if distance is None else f"distance {distance}: {produced}")
            if attempt == cfg.repair_attempts:
                break
            repair = render_template(cfg.repair_prompt, {"desired": reference, "produced": produced})
            reply = client.ask(conv, repair)
            completions += 1
    return SynthesisResult(spec_predicates, None, last_distance, completions, diagnostics)


def _check_reply(
    reply: str, instance: Instance, reference: str, cfg: TrainConfig
) -> tuple[str | None, str, int | None]:
    """Gate one reply.  Returns (canonical body | None, produced-or-error text,
    distance | None).  Training executes on the instance's own triple order,
    which is by construction the rule's spec order."""
    try:
        body = extract_code(reply)
    except ExtractionError as exc:
        return None, f"error: {exc}", None
    try:
        program = parse(body)
    except ParseError as exc:
        return None, f"error: parse error at {exc}", None
    outcome: ExecOutcome = execute(program, instance.triples, cfg.limits)
    if not outcome.ok:
        return None, f"error: {outcome.describe()}", None
    distance = levenshtein(outcome.text, reference)
    if distance <= cfg.levenshtein_threshold:
        return canonical_print(program), outcome.text, distance
    return None, outcome.text, distance


def next_rule_id(rb: RuleBase) -> str:
    n = len(rb.rules) + 1
    while rb.get(f"r{n:04d}") is not None:
        n += 1
    return f"r{n:04d}"


def _admit(rb: RuleBase, instance: Instance, result: SynthesisResult, cfg: TrainConfig) -> Rule:
    rule = Rule(
        id=next_rule_id(rb),
        spec_predicates=result.spec_predicates,
        body=result.body,
        origin="synthetic" if instance.origin == "synthetic" else "trained",
        provenance=instance.id,
    )
    rb.add(rule)
    if cfg.checkpoint_path:
        save_rulebase(rb, cfg.checkpoint_path)
    return rule


def train(
    dataset: list[Instance],
    rb: RuleBase,
    client: LlmClient,
    cfg: TrainConfig | None = None,
) -> tuple[RuleBase, list[SynthesisReport]]:
    """Single pass over the dataset, appending one rule per uncovered instance.

    An instance is skipped iff an exact-key rule is already indexed, so
    accepted rules immediately shrink the remaining work.  Endpoint errors
    abort with :class:`TrainAborted`; the rulebase is valid at every instant.
    """
    cfg = cfg or TrainConfig()
    reports: list[SynthesisReport] = []
    for instance in dataset:
        if rb.rule_for_key(instance.key) is not None:
            reports.append(SynthesisReport(instance.id, COVERED_SKIP))
            continue
        try:
            result = synthesize_rule(instance, client, cfg)
        except (EndpointError, ProtocolError) as exc:
            raise TrainAborted(reports, exc) from exc
        if result.ok:
            rule = _admit(rb, instance, result, cfg)
            reports.append(
                SynthesisReport(
                    instance.id,
                    RULE_ADDED,
                    attempts=result.completions,
                    final_distance=result.final_distance,
                    rule_id=rule.id,
                    diagnostics=result.diagnostics,
                )
            )
        else:
            reports.append(
                SynthesisReport(
                    instance.id,
                    SKIPPED_AFTER_FAILURES,
                    attempts=result.completions,
                    final_distance=result.final_distance,
                    diagnostics=result.diagnostics,
                )
            )
    return rb, reports


# -- synthetic augmentation --------------------------------------------------


def synthetic_id(predicates: list[str] | tuple[str, ...]) -> str:
    digest = hashlib.sha256("|".join(sorted(predicates)).encode("utf-8")).hexdigest()[:12]
    return f"syn-{digest}"


def select_fewshot(predicates: list[str], dataset: list[Instance], rb: RuleBase) -> list[Instance]:
    """Pick dataset instances covering the requested predicates.

    The greedy splitter divides the predicates along trained-rule lines;
    each rule part picks the first instance whose key contains the part's
    key.  Default parts contribute nothing.
    """
    pseudo = [Triple(subj="s", pred=p, obj="o") for p in predicates]
    trace = greedy_cover(rb, pseudo)
    picks: list[Instance] = []
    seen: set[str] = set()
    for part in trace.parts:
        if part.rule_id == DEFAULT_RULE_ID:
            continue
        rule = rb.get(part.rule_id)
        for inst in dataset:
            if _contains_key(inst, rule.key):
                if inst.id not in seen:
                    seen.add(inst.id)
                    picks.append(inst)
                break
    return picks


def _contains_key(instance: Instance, key: tuple[str, ...]) -> bool:
    have: dict[str, int] = {}
    for t in instance.triples:
        have[t.norm_pred] = have.get(t.norm_pred, 0) + 1
    for p in key:
        if have.get(p, 0) <= 0:
            return False
        have[p] -= 1
    return True


def render_sample_prompt(template: str, predicates: list[str], fewshot: list[Instance]) -> str:
    blocks = []
    for inst in fewshot:
        relations = ", ".join(t.norm_pred for t in inst.triples)
        blocks.append(
            "\n#### Example\n"
            f"relations: {relations}\n"
            "<sample>\n"
            f"in: {render_triples_inline(inst.triples)}\n"
            f"out: {inst.references[0]}\n"
            "</sample>\n"
        )
    return render_template(
        template,
        {
            "examples": "".join(blocks),
            "relations": ", ".join(normalize_predicate(p) for p in predicates),
        },
    )


def parse_sample_reply(reply: str, predicates: list[str]) -> Instance | None:
    """Parse a ``<sample>`` block into a synthetic instance.

    Returns None when the block is missing, malformed, or its predicates do
    not match the requested ones (the caller re-asks once).
    """
    match = re.search(r"<sample>(.*?)(?:</sample>|$)", reply, re.DOTALL | re.IGNORECASE)
    if not match:
        return None
    in_line = out_line = None
    for line in match.group(1).splitlines():
        stripped = line.strip()
        if in_line is None and stripped.lower().startswith("in:"):
            in_line = stripped[3:].strip()
        elif out_line is None and stripped.lower().startswith("out:"):
            out_line = stripped[4:].strip()
    if not in_line or not out_line:
        return None
    triples = []
    for raw in re.findall(r"\(([^()]*)\)", in_line):
        fields = [f.strip() for f in raw.split("|")]
        if len(fields) != 3 or not all(fields):
            return None
        triples.append(Triple(*fields))
    if not triples:
        return None
    wanted = sorted(normalize_predicate(p) for p in predicates)
    if sorted(t.norm_pred for t in triples) != wanted:
        return None
    return Instance(id=synthetic_id(wanted), triples=tuple(triples), references=(out_line,), origin="synthetic")


def make_synthetic_instance(
    predicates: list[str],
    dataset: list[Instance],
    rb: RuleBase,
    client: LlmClient,
    cfg: TrainConfig,
) -> Instance | None:
    """Ask the endpoint to invent a (triples, reference) pair for the
    predicates; one re-ask with the same prompt, then give up on the combo."""
    fewshot = select_fewshot(predicates, dataset, rb)
    prompt = render_sample_prompt(cfg.sample_prompt, predicates, fewshot)
    for _attempt in range(2):
        conv = Conversation()
        reply = client.ask(conv, prompt)
        instance = parse_sample_reply(reply, predicates)
        if instance is not None:
            return instance
    return None


def augment(
    rb: RuleBase,
    dataset: list[Instance],
    client: LlmClient,
    cfg: TrainConfig | None = None,
) -> tuple[RuleBase, list[SynthesisReport]]:
    """Manufacture rules for predicate combos likely to co-occur.

    Components come from the co-occurrence graph (capped), combos are
    processed in (component, size, lexicographic) order, and combos whose
    key is already indexed cost nothing.  The global cap bounds how many
    uncovered combos are attempted.
    """
    cfg = cfg or TrainConfig()
    reports: list[SynthesisReport] = []
    graph = build_cooccurrence_graph(dataset)
    attempted = 0
    for component in components_capped(graph, cfg.component_cap):
        if len(component) < 2:
            continue
        for combo in enumerate_predicate_combos(component, cfg.synthetic_per_component_cap):
            key = tuple(sorted(combo))
            combo_id = synthetic_id(key)
            if rb.rule_for_key(key) is not None:
                reports.append(SynthesisReport(combo_id, COVERED_SKIP))
                continue
            if cfg.synthetic_global_cap is not None and attempted >= cfg.synthetic_global_cap:
                return rb, reports
            attempted += 1
            try:
                instance = make_synthetic_instance(combo, dataset, rb, client, cfg)
                if instance is None:
                    reports.append(
                        SynthesisReport(
                            combo_id, SKIPPED_AFTER_FAILURES, attempts=2,
                            diagnostics=["no parseable sample for combo: " + ", ".join(key)],
                        )
                    )
                    continue
                result = synthesize_rule(instance, client, cfg)
            except (EndpointError, ProtocolError) as exc:
                raise TrainAborted(reports, exc) from exc
            if result.ok:
                rule = _admit(rb, instance, result, cfg)
                reports.append(
                    SynthesisReport(
                        instance.id,
                        RULE_ADDED,
                        attempts=result.completions,
                        final_distance=result.final_distance,
                        rule_id=rule.id,
                        diagnostics=result.diagnostics,
                    )
                )
            else:
                reports.append(
                    SynthesisReport(
                        instance.id,
                        SKIPPED_AFTER_FAILURES,
                        attempts=result.completions,
                        final_distance=result.final_distance,
                        diagnostics=result.diagnostics,
                    )
                )
    return rb, reports

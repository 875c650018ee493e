"""Metrics (Levenshtein, corpus BLEU), system evaluation, and the
prompted-LLM direct baseline."""

from __future__ import annotations

import json
import math
import re
import statistics
import time
import unicodedata
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .core import Instance, RuleBase, Triple
from .llm import LlmClient
from .ruledsl import Limits
from .selector import GenerationTrace, generate


def levenshtein(a: str, b: str) -> int:
    """Minimal single-character insertions, deletions and substitutions.

    Case-sensitive, no normalization; operates on Unicode scalar values.
    """
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        current = [i]
        append = current.append
        for j, cb in enumerate(b, 1):
            append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (ca != cb)))
        previous = current
    return previous[-1]


def tokenize(text: str) -> list[str]:
    """Whitespace-split after isolating punctuation characters as their own
    tokens (any Unicode P* category character)."""
    pieces = []
    for ch in text:
        if unicodedata.category(ch).startswith("P"):
            pieces.append(f" {ch} ")
        else:
            pieces.append(ch)
    return "".join(pieces).split()


_MAX_ORDER = 4


def corpus_bleu(hypotheses: list[str], reference_sets: list[list[str]]) -> float:
    """Corpus-level BLEU on a 0-100 scale.

    Case-sensitive; modified n-gram precision up to 4-grams, geometric mean,
    brevity penalty with the closest-reference length (ties to the shorter
    reference).  No smoothing: a zero clipped count at any usable order gives
    0.  Orders with no n-grams anywhere in the hypotheses (shorter corpora)
    are excluded from the mean.
    """
    if len(hypotheses) != len(reference_sets):
        raise ValueError(
            f"hypotheses ({len(hypotheses)}) and reference sets ({len(reference_sets)}) differ in length"
        )
    if not hypotheses:
        raise ValueError("empty corpus")

    numerators = [0] * _MAX_ORDER
    denominators = [0] * _MAX_ORDER
    hyp_length = 0
    ref_length = 0
    for hypothesis, references in zip(hypotheses, reference_sets):
        if not references:
            raise ValueError("an instance has no references")
        hyp_tokens = tokenize(hypothesis)
        ref_token_lists = [tokenize(r) for r in references]
        hyp_length += len(hyp_tokens)
        ref_length += _closest_length(len(hyp_tokens), [len(r) for r in ref_token_lists])
        for n in range(1, _MAX_ORDER + 1):
            hyp_counts = Counter(_ngrams(hyp_tokens, n))
            if not hyp_counts:
                continue
            max_ref: Counter = Counter()
            for ref_tokens in ref_token_lists:
                for gram, count in Counter(_ngrams(ref_tokens, n)).items():
                    if count > max_ref[gram]:
                        max_ref[gram] = count
            denominators[n - 1] += sum(hyp_counts.values())
            numerators[n - 1] += sum(min(c, max_ref[g]) for g, c in hyp_counts.items())

    if hyp_length == 0:
        return 0.0
    orders = [(num, den) for num, den in zip(numerators, denominators) if den > 0]
    if any(num == 0 for num, _ in orders):
        return 0.0
    log_precision = sum(math.log(num / den) for num, den in orders) / len(orders)
    brevity = 1.0 if hyp_length > ref_length else math.exp(1.0 - ref_length / hyp_length)
    return 100.0 * brevity * math.exp(log_precision)


def _ngrams(tokens: list[str], n: int) -> list[tuple[str, ...]]:
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def _closest_length(hyp_len: int, ref_lens: list[int]) -> int:
    return min(ref_lens, key=lambda r: (abs(r - hyp_len), r))


@dataclass
class EvalRecord:
    id: str
    hypothesis: str
    references: tuple[str, ...]
    trace: GenerationTrace
    seconds: float

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "hypothesis": self.hypothesis,
            "references": list(self.references),
            "trace": self.trace.to_dict(),
            "seconds": self.seconds,
        }


@dataclass
class EvalReport:
    bleu: float
    instance_count: int
    exact_traces: int
    split_traces: int
    default_traces: int
    mean_seconds: float
    p50_seconds: float
    p95_seconds: float
    total_seconds: float
    records: list[EvalRecord] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "bleu": self.bleu,
            "instances": self.instance_count,
            "traces": {
                "exact": self.exact_traces,
                "split": self.split_traces,
                "default": self.default_traces,
            },
            "timing": {
                "mean_seconds": self.mean_seconds,
                "p50_seconds": self.p50_seconds,
                "p95_seconds": self.p95_seconds,
                "total_seconds": self.total_seconds,
            },
        }


def evaluate(
    rb: RuleBase,
    testset: list[Instance],
    limits: Limits | None = None,
    jobs: int = 1,
) -> EvalReport:
    """Generate for every instance, score corpus BLEU against all references
    and classify each trace as exact, split or default-containing.

    Timing covers generation only; load the rulebase before calling.
    """
    if not testset:
        raise ValueError("empty test set")
    limits = limits or Limits()

    def run(instance: Instance) -> EvalRecord:
        started = time.perf_counter()
        text, trace = generate(rb, instance.triples, limits)
        elapsed = time.perf_counter() - started
        return EvalRecord(instance.id, text, instance.references, trace, elapsed)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(run, testset))
    else:
        records = [run(inst) for inst in testset]

    exact = split = default = 0
    for record in records:
        trace = record.trace
        if not trace.default_free:
            default += 1
        elif trace.split_count > 0:
            split += 1
        else:
            exact += 1
    timings = [r.seconds for r in records]
    bleu = corpus_bleu([r.hypothesis for r in records], [list(r.references) for r in records])
    return EvalReport(
        bleu=bleu,
        instance_count=len(records),
        exact_traces=exact,
        split_traces=split,
        default_traces=default,
        mean_seconds=statistics.fmean(timings),
        p50_seconds=statistics.median(timings),
        p95_seconds=_percentile(timings, 0.95),
        total_seconds=sum(timings),
        records=records,
    )


def _percentile(values: list[float], q: float) -> float:
    ordered = sorted(values)
    if len(ordered) == 1:
        return ordered[0]
    position = q * (len(ordered) - 1)
    low = int(position)
    high = min(low + 1, len(ordered) - 1)
    return ordered[low] + (ordered[high] - ordered[low]) * (position - low)


def save_eval_report(report: EvalReport, path: str | Path, records_path: str | Path | None = None) -> None:
    """Write the report as one JSON document plus per-instance JSON lines."""
    path = Path(path)
    path.write_text(json.dumps(report.to_dict(), ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    records_path = Path(records_path) if records_path else path.with_suffix(".records.jsonl")
    with open(records_path, "w", encoding="utf-8") as fh:
        for record in report.records:
            fh.write(json.dumps(record.to_dict(), ensure_ascii=False) + "\n")


DIRECT_PROMPT = """\
You are given the following list of RDF triples.
{triples}
Write a plain text description of this data. Output only the text of the description.
"""

_CHATTER_LEAD = re.compile(r"^(here\b|sure\b|certainly\b|of course\b|okay\b|ok\b)", re.IGNORECASE)
_CHATTER_TAIL = re.compile(r"(let me know|hope this helps|feel free|would you like)", re.IGNORECASE)


def direct_generate(triples: list[Triple] | tuple[Triple, ...], client: LlmClient) -> str:
    """One-shot prompted baseline: ask the endpoint to describe the triples
    directly, then strip superfluous chatter around the description."""
    from .llm import Conversation

    prompt = DIRECT_PROMPT.replace(
        "{triples}", "\n".join(f"({t.subj} | {t.pred} | {t.obj})" for t in triples)
    )
    conv = Conversation()
    reply = client.ask(conv, prompt)
    return postprocess_direct(reply)


def postprocess_direct(reply: str) -> str:
    """Trim quoting and leading/trailing chatter lines from a direct reply."""
    lines = [line.strip() for line in reply.strip().splitlines() if line.strip()]
    while lines and (lines[0].endswith(":") or (_CHATTER_LEAD.match(lines[0]) and len(lines) > 1)):
        lines.pop(0)
    while len(lines) > 1 and _CHATTER_TAIL.search(lines[-1]):
        lines.pop()
    text = " ".join(lines).strip()
    if len(text) >= 2 and text[0] in "\"'" and text[-1] == text[0]:
        text = text[1:-1].strip()
    return text

"""Runtime engine: match triples to rules, sort to spec order, split
unmatched inputs greedily, fall back to the default rendering.

Generation is total: rule failures at inference degrade to the default
``subject predicate object`` rendering and are recorded in the trace rather
than surfaced as errors.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field
from functools import lru_cache

from .core import PredicateKey, Rule, RuleBase, Triple, predicate_key
from .ruledsl import ExecOutcome, Limits, Program, execute, parse

DEFAULT_RULE_ID = "default"


class KeyMismatchError(ValueError):
    """Triples handed to sort_to_spec do not carry the rule's predicate key."""


@dataclass(frozen=True)
class TracePart:
    """One emitted segment: which rule ran, on which input positions."""

    rule_id: str
    indices: tuple[int, ...]
    text: str
    fallback: bool = False
    failure: str | None = None


@dataclass
class GenerationTrace:
    parts: list[TracePart] = field(default_factory=list)

    @property
    def split_count(self) -> int:
        return max(len(self.parts) - 1, 0)

    @property
    def used_default(self) -> bool:
        return any(p.rule_id == DEFAULT_RULE_ID for p in self.parts)

    @property
    def fallback_count(self) -> int:
        return sum(1 for p in self.parts if p.fallback)

    @property
    def default_free(self) -> bool:
        """True when no part was rendered by the default template."""
        return not self.used_default and self.fallback_count == 0

    def to_dict(self) -> dict:
        return {
            "parts": [
                {
                    "rule": p.rule_id,
                    "indices": list(p.indices),
                    "fallback": p.fallback,
                    **({"failure": p.failure} if p.failure else {}),
                }
                for p in self.parts
            ],
            "split_count": self.split_count,
            "used_default": self.used_default,
        }


@lru_cache(maxsize=None)
def _compile(body: str) -> Program:
    return parse(body)


def compile_rule(rule: Rule) -> Program:
    """Parse (and cache) a rule body."""
    return _compile(rule.body)


def sort_to_spec(triples: list[Triple] | tuple[Triple, ...], rule: Rule) -> list[Triple]:
    """Reorder ``triples`` so position i matches rule.spec_predicates[i].

    Duplicate predicates are assigned in original input order (stable).
    """
    if predicate_key(triples) != rule.key:
        raise KeyMismatchError(
            f"rule {rule.id!r} expects predicates {list(rule.key)}, got {sorted(t.norm_pred for t in triples)}"
        )
    pools: dict[str, deque[Triple]] = {}
    for t in triples:
        pools.setdefault(t.norm_pred, deque()).append(t)
    return [pools[p].popleft() for p in rule.spec_predicates]


def lookup_exact(rb: RuleBase, triples: list[Triple] | tuple[Triple, ...]) -> Rule | None:
    """The indexed rule whose key equals the input's predicate key, else None."""
    return rb.rule_for_key(predicate_key(triples))


def greedy_cover(rb: RuleBase, triples: list[Triple] | tuple[Triple, ...]) -> GenerationTrace:
    """Cover the input with rules by repeatedly taking the rule whose key is
    the largest sub-multiset of the remaining predicates.

    Ties on key size break toward the earliest-inserted rule.  Leftover
    triples each become one default part, in input order.  The returned
    trace is a skeleton: parts carry assignments but no text yet.
    """
    remaining: list[tuple[int, Triple]] = list(enumerate(triples))
    # Indexed rules in insertion order; (key, rule) pairs scanned each round.
    candidates = [(key, rb.get(rule_id)) for key, rule_id in rb.index.items()]
    order = {rule_id: pos for pos, rule_id in enumerate(rb.index.values())}
    trace = GenerationTrace()

    while remaining:
        counts = Counter(t.norm_pred for _, t in remaining)
        best: tuple[int, int] | None = None  # (-key size, insertion position)
        best_rule: Rule | None = None
        for key, rule in candidates:
            if len(key) > len(remaining):
                continue
            if _is_submultiset(key, counts):
                rank = (-len(key), order[rule.id])
                if best is None or rank < best:
                    best = rank
                    best_rule = rule
        if best_rule is None:
            break
        taken = _take(remaining, best_rule.key)
        trace.parts.append(
            TracePart(rule_id=best_rule.id, indices=tuple(i for i, _ in taken), text="")
        )
    for i, _ in remaining:
        trace.parts.append(TracePart(rule_id=DEFAULT_RULE_ID, indices=(i,), text=""))
    return trace


def _is_submultiset(key: PredicateKey, counts: Counter) -> bool:
    need = Counter(key)
    return all(counts.get(p, 0) >= n for p, n in need.items())


def _take(remaining: list[tuple[int, Triple]], key: PredicateKey) -> list[tuple[int, Triple]]:
    """Remove and return the first triple (input order) for each key entry."""
    need = Counter(key)
    taken = []
    kept = []
    for item in remaining:
        pred = item[1].norm_pred
        if need.get(pred, 0) > 0:
            need[pred] -= 1
            taken.append(item)
        else:
            kept.append(item)
    remaining[:] = kept
    return taken


def render_default(triple: Triple) -> str:
    """Fallback rendering: subject, raw predicate and object, space-joined."""
    return f"{triple.subj} {triple.pred} {triple.obj}"


def generate(
    rb: RuleBase,
    triples: list[Triple] | tuple[Triple, ...],
    limits: Limits | None = None,
) -> tuple[str, GenerationTrace]:
    """Verbalize ``triples`` against ``rb``; never fails for non-empty input.

    Exact key match runs that single rule; otherwise the greedy cover runs
    each part's rule on its sorted triples.  Part texts are joined with a
    single space, defaults last.
    """
    if not triples:
        raise ValueError("generate needs at least one triple")
    triples = list(triples)
    limits = limits or Limits()

    exact = lookup_exact(rb, triples)
    if exact is not None:
        trace = GenerationTrace(parts=[TracePart(exact.id, tuple(range(len(triples))), "")])
    else:
        trace = greedy_cover(rb, triples)

    texts: list[str] = []
    finished: list[TracePart] = []
    for part in trace.parts:
        assigned = [triples[i] for i in part.indices]
        if part.rule_id == DEFAULT_RULE_ID:
            text = " ".join(render_default(t) for t in assigned)
            finished.append(TracePart(part.rule_id, part.indices, text))
        else:
            rule = rb.get(part.rule_id)
            outcome = _run_rule(rule, assigned, limits)
            if outcome.ok:
                text = outcome.text
                finished.append(TracePart(part.rule_id, part.indices, text))
            else:
                text = " ".join(render_default(t) for t in assigned)
                finished.append(
                    TracePart(part.rule_id, part.indices, text, fallback=True, failure=outcome.describe())
                )
        texts.append(text)
    trace.parts = finished
    return " ".join(texts), trace


def _run_rule(rule: Rule, triples: list[Triple], limits: Limits) -> ExecOutcome:
    try:
        program = compile_rule(rule)
        ordered = sort_to_spec(triples, rule)
    except Exception as exc:  # degraded, not fatal: trace carries the reason
        return ExecOutcome.runtime(None, "rule-error", str(exc))
    return execute(program, ordered, limits)

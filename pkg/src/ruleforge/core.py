"""Domain types, predicate normalization, and persistence.

A :class:`Triple` is one (subject, predicate, object) fact.  Rules are keyed
by the multiset of *normalized* predicates they expect; triples keep their
raw predicate text so prompts and the default rendering can show the data
verbatim.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator

RULEBASE_VERSION = 1

#: Rule origins that may appear in a persisted rulebase.
RULE_ORIGINS = ("trained", "synthetic", "manual")

#: Sorted tuple of normalized predicate texts.  Equal keys <=> equal multisets.
PredicateKey = tuple[str, ...]


class FormatError(ValueError):
    """A persisted file (dataset, rulebase, fixture) is malformed."""


class NormalizationError(ValueError):
    """Predicate text is empty after trimming."""


_CAMEL_BOUNDARY = re.compile(r"(?<=[a-z0-9])(?=[A-Z])")
_WS_RUN = re.compile(r"\s+")


@lru_cache(maxsize=65536)
def normalize_predicate(raw: str) -> str:
    """Map a raw predicate surface form to its canonical matching form.

    Trims, splits camelCase, replaces underscores with spaces, collapses
    whitespace runs and lowercases.  Idempotent.
    """
    text = raw.strip()
    if not text:
        raise NormalizationError("predicate is empty after trimming")
    text = text.replace("_", " ")
    text = _CAMEL_BOUNDARY.sub(" ", text)
    text = _WS_RUN.sub(" ", text).strip()
    return text.lower()


@dataclass(frozen=True)
class Triple:
    """One (subject, predicate, object) fact.  Fields are trimmed and non-empty."""

    subj: str
    pred: str
    obj: str

    def __post_init__(self) -> None:
        for name in ("subj", "pred", "obj"):
            value = getattr(self, name).strip()
            if not value:
                raise ValueError(f"triple {name} is empty")
            object.__setattr__(self, name, value)

    @property
    def norm_pred(self) -> str:
        return normalize_predicate(self.pred)


@dataclass(frozen=True)
class Instance:
    """Triples plus one or more reference texts; the training/eval unit."""

    id: str
    triples: tuple[Triple, ...]
    references: tuple[str, ...]
    origin: str = "dataset"  # "dataset" | "synthetic"

    def __post_init__(self) -> None:
        object.__setattr__(self, "triples", tuple(self.triples))
        object.__setattr__(self, "references", tuple(self.references))
        if not self.id:
            raise ValueError("instance id is empty")
        if not self.triples:
            raise ValueError(f"instance {self.id}: no triples")
        if not self.references:
            raise ValueError(f"instance {self.id}: no references")
        if self.origin not in ("dataset", "synthetic"):
            raise ValueError(f"instance {self.id}: bad origin {self.origin!r}")

    @property
    def key(self) -> PredicateKey:
        return predicate_key(self.triples)


def predicate_key(triples: Iterable[Triple]) -> PredicateKey:
    """Sorted multiset of normalized predicates.  Permutation-invariant."""
    key = tuple(sorted(t.norm_pred for t in triples))
    if not key:
        raise ValueError("predicate_key of an empty triple list")
    return key


def key_of_predicates(predicates: Iterable[str]) -> PredicateKey:
    """Key for raw predicate texts (normalizes, then sorts)."""
    key = tuple(sorted(normalize_predicate(p) for p in predicates))
    if not key:
        raise ValueError("key of an empty predicate list")
    return key


@dataclass(frozen=True)
class Rule:
    """An ordered predicate specification plus rule-language source.

    ``spec_predicates`` holds normalized predicate texts in the order the
    rule body expects its triples; the body source must parse under the rule
    language grammar (validated where rules are constructed or loaded).
    """

    id: str
    spec_predicates: tuple[str, ...]
    body: str
    origin: str = "manual"
    provenance: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "spec_predicates", tuple(self.spec_predicates))
        if not self.id:
            raise ValueError("rule id is empty")
        if not self.spec_predicates:
            raise ValueError(f"rule {self.id}: spec_predicates is empty")
        if self.origin not in RULE_ORIGINS:
            raise ValueError(f"rule {self.id}: bad origin {self.origin!r}")

    @property
    def key(self) -> PredicateKey:
        return tuple(sorted(self.spec_predicates))


class RuleBase:
    """Ordered rule collection with a first-wins predicate-multiset index.

    Iteration order equals insertion order.  Duplicate keys are stored but
    only the earliest-inserted rule per key is indexed.  Construction is
    single-writer; a populated rulebase is safe to share across readers.
    """

    def __init__(self, rules: Iterable[Rule] = ()) -> None:
        self.rules: list[Rule] = []
        self.index: dict[PredicateKey, str] = {}
        self._by_id: dict[str, Rule] = {}
        for rule in rules:
            self.add(rule)

    def add(self, rule: Rule) -> None:
        if rule.id in self._by_id:
            raise ValueError(f"duplicate rule id {rule.id!r}")
        self.rules.append(rule)
        self._by_id[rule.id] = rule
        self.index.setdefault(rule.key, rule.id)

    def get(self, rule_id: str) -> Rule | None:
        return self._by_id.get(rule_id)

    def rule_for_key(self, key: PredicateKey) -> Rule | None:
        rule_id = self.index.get(key)
        return self._by_id[rule_id] if rule_id is not None else None

    def __iter__(self) -> Iterator[Rule]:
        return iter(self.rules)

    def __len__(self) -> int:
        return len(self.rules)


def save_rulebase(rb: RuleBase, path: str | Path) -> None:
    """Write ``rb`` as a single JSON document.  Array order is insertion order."""
    rules = []
    for rule in rb:
        entry: dict = {
            "id": rule.id,
            "predicates": list(rule.spec_predicates),
            "body": rule.body,
            "origin": rule.origin,
        }
        if rule.provenance is not None:
            entry["provenance"] = rule.provenance
        rules.append(entry)
    doc = {"version": RULEBASE_VERSION, "rules": rules}
    Path(path).write_text(json.dumps(doc, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


def load_rulebase(path: str | Path) -> RuleBase:
    """Load a rulebase file, validating structure and that every body parses."""
    from .ruledsl import ParseError, parse

    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("rules"), list):
        raise FormatError(f"{path}: expected an object with a 'rules' array")
    if doc.get("version") != RULEBASE_VERSION:
        raise FormatError(f"{path}: unsupported version {doc.get('version')!r}")

    rb = RuleBase()
    for i, entry in enumerate(doc["rules"]):
        if not isinstance(entry, dict):
            raise FormatError(f"{path}: rule {i}: not an object")
        try:
            rule = Rule(
                id=_req_str(entry, "id"),
                spec_predicates=tuple(_req_str_list(entry, "predicates")),
                body=_req_str(entry, "body"),
                origin=entry.get("origin", "manual"),
                provenance=entry.get("provenance"),
            )
        except ValueError as exc:
            raise FormatError(f"{path}: rule {i}: {exc}") from exc
        try:
            parse(rule.body)
        except ParseError as exc:
            raise FormatError(f"{path}: rule {rule.id!r}: body does not parse: {exc}") from exc
        try:
            rb.add(rule)
        except ValueError as exc:
            raise FormatError(f"{path}: rule {i}: {exc}") from exc
    return rb


def _req_str(entry: dict, field_name: str) -> str:
    value = entry.get(field_name)
    if not isinstance(value, str):
        raise FormatError(f"missing or non-text field {field_name!r}")
    return value


def _req_str_list(entry: dict, field_name: str) -> list[str]:
    value = entry.get(field_name)
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise FormatError(f"field {field_name!r} must be a list of text")
    return value


def load_dataset(path: str | Path) -> list[Instance]:
    """Load line-delimited instance records, in file order.

    Predicates are NOT normalized here; raw text is preserved for prompts.
    """
    instances: list[Instance] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
            instances.append(_parse_instance(record, f"{path}:{lineno}"))
    return instances


def _parse_instance(record: object, where: str) -> Instance:
    if not isinstance(record, dict):
        raise FormatError(f"{where}: record is not an object")
    inst_id = record.get("id")
    triples = record.get("triples")
    references = record.get("references")
    if not isinstance(inst_id, str) or not inst_id:
        raise FormatError(f"{where}: missing or empty 'id'")
    if not isinstance(triples, list) or not triples:
        raise FormatError(f"{where}: missing or empty 'triples'")
    if not isinstance(references, list) or not references:
        raise FormatError(f"{where}: missing or empty 'references'")
    parsed: list[Triple] = []
    for j, item in enumerate(triples):
        if not (isinstance(item, list) and len(item) == 3 and all(isinstance(v, str) for v in item)):
            raise FormatError(f"{where}: triple {j} must be [subj, pred, obj] text")
        try:
            parsed.append(Triple(*item))
        except ValueError as exc:
            raise FormatError(f"{where}: triple {j}: {exc}") from exc
    if not all(isinstance(r, str) and r for r in references):
        raise FormatError(f"{where}: references must be non-empty text")
    try:
        return Instance(id=inst_id, triples=tuple(parsed), references=tuple(references))
    except ValueError as exc:
        raise FormatError(f"{where}: {exc}") from exc


def save_dataset(instances: Iterable[Instance], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            record = {
                "id": inst.id,
                "triples": [[t.subj, t.pred, t.obj] for t in inst.triples],
                "references": list(inst.references),
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")

import pytest

from ruleforge.core import Rule, RuleBase, Triple


@pytest.fixture
def mk():
    def make(subj="A", pred="p", obj="B"):
        return Triple(subj, pred, obj)

    return make


def rule(rule_id, preds, body='output = "x";', origin="manual", provenance=None):
    return Rule(id=rule_id, spec_predicates=tuple(preds), body=body, origin=origin, provenance=provenance)


def rulebase(*rules):
    rb = RuleBase()
    for r in rules:
        rb.add(r)
    return rb

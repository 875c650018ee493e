"""ruleforge: interpretable rule-based verbalization of RDF triples.

The runtime turns triples into text through an ordered rulebase written in
a small sandboxed rule language; the training pipeline has an LLM write,
test and repair those rules against reference texts.
"""

__version__ = "0.1.0"

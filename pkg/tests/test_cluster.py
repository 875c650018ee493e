import random
import string
from math import comb

import pytest

from ruleforge.cluster import (
    PredicateGraph,
    build_cooccurrence_graph,
    components_capped,
    connected_components,
    enumerate_predicate_combos,
)
from ruleforge.core import Instance, Triple


def inst(iid, preds):
    return Instance(
        id=iid,
        triples=tuple(Triple(f"s{i}", p, f"o{i}") for i, p in enumerate(preds)),
        references=("ref",),
    )


def graph_of(edges, nodes=()):
    g = PredicateGraph()
    for n in nodes:
        g.add_node(n)
    for a, b in edges:
        g.add_edge(a, b)
    return g


class TestCooccurrenceGraph:
    def test_edges_from_shared_instances(self):
        g = build_cooccurrence_graph([inst("1", ["a", "b"]), inst("2", ["b", "c"]), inst("3", ["d"])])
        assert g.nodes == {"a", "b", "c", "d"}
        assert g.edges == {frozenset("ab"), frozenset("bc")}

    def test_single_triple_instances_edgeless(self):
        g = build_cooccurrence_graph([inst("1", ["a"]), inst("2", ["b"])])
        assert g.edges == set()

    def test_triangle(self):
        g = build_cooccurrence_graph([inst("1", ["a", "b", "c"])])
        assert g.edges == {frozenset("ab"), frozenset("ac"), frozenset("bc")}

    def test_predicates_normalized(self):
        g = build_cooccurrence_graph([inst("1", ["birthPlace", "birth_year"])])
        assert g.nodes == {"birth place", "birth year"}

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            build_cooccurrence_graph([])


class TestConnectedComponents:
    def test_matches_reachability_oracle_on_small_graphs(self):
        rng = random.Random(11)
        labels = list(string.ascii_lowercase[:8])
        for _ in range(200):
            nodes = labels[: rng.randint(1, 8)]
            edges = [
                (a, b)
                for i, a in enumerate(nodes)
                for b in nodes[i + 1 :]
                if rng.random() < 0.3
            ]
            g = graph_of(edges, nodes)
            comps = connected_components(g)
            # oracle: transitive closure by repeated expansion
            closure = {n: {n} for n in nodes}
            changed = True
            while changed:
                changed = False
                for a, b in edges:
                    merged = closure[a] | closure[b]
                    for n in merged:
                        if closure[n] != merged:
                            closure[n] = merged
                            changed = True
            expected = {frozenset(s) for s in closure.values()}
            assert {frozenset(c) for c in comps} == expected


class TestComponentsCapped:
    def test_under_cap_unchanged(self):
        g = graph_of([("a", "b"), ("b", "c")], nodes=["d"])
        assert components_capped(g, cap=20) == [{"a", "b", "c"}, {"d"}]

    def test_hub_removal_splits_chains(self):
        # hub h adjacent to everything; two chains that touch only h
        chain1 = [f"a{i:02d}" for i in range(10)]
        chain2 = [f"b{i:02d}" for i in range(11)]
        edges = list(zip(chain1, chain1[1:])) + list(zip(chain2, chain2[1:]))
        edges += [("h", n) for n in chain1 + chain2]
        g = graph_of(edges)
        comps = components_capped(g, cap=20)
        assert sorted(len(c) for c in comps) == [10, 11]
        assert all("h" not in c for c in comps)

    def test_complete_graph_takes_lexicographic_removals(self):
        nodes = [f"n{i:02d}" for i in range(25)]
        g = graph_of([(a, b) for i, a in enumerate(nodes) for b in nodes[i + 1 :]])
        comps = components_capped(g, cap=20)
        assert len(comps) == 1
        assert len(comps[0]) == 20
        # the five lexicographically smallest hubs went first
        assert comps[0] == set(nodes[5:])

    def test_all_results_within_cap_and_disjoint(self):
        rng = random.Random(3)
        nodes = [f"p{i:02d}" for i in range(40)]
        edges = [(a, b) for i, a in enumerate(nodes) for b in nodes[i + 1 :] if rng.random() < 0.2]
        g = graph_of(edges, nodes)
        comps = components_capped(g, cap=5)
        assert all(len(c) <= 5 for c in comps)
        seen = [n for c in comps for n in c]
        assert len(seen) == len(set(seen))

    def test_cap_validation(self):
        with pytest.raises(ValueError):
            components_capped(PredicateGraph(), cap=1)


class TestCombos:
    def test_counts_follow_binomials(self):
        combos = enumerate_predicate_combos(set("abcde"))
        assert len(combos) == comb(5, 2) + comb(5, 3) + comb(5, 4)

    def test_pair_only(self):
        assert enumerate_predicate_combos({"a", "b"}) == [["a", "b"]]

    def test_three_nodes(self):
        combos = enumerate_predicate_combos({"a", "b", "c"})
        assert combos == [["a", "b"], ["a", "c"], ["b", "c"], ["a", "b", "c"]]

    def test_deterministic_order_and_sorted(self):
        combos = enumerate_predicate_combos(set("dcba"))
        assert combos == enumerate_predicate_combos(set("abcd"))
        assert all(combo == sorted(combo) for combo in combos)
        sizes = [len(c) for c in combos]
        assert sizes == sorted(sizes)

    def test_no_duplicates(self):
        combos = enumerate_predicate_combos(set("abcdef"))
        assert len({tuple(c) for c in combos}) == len(combos)

    def test_cap_truncates(self):
        assert len(enumerate_predicate_combos(set("abcdef"), cap_per_component=7)) == 7

    def test_small_component_rejected(self):
        with pytest.raises(ValueError):
            enumerate_predicate_combos({"a"})

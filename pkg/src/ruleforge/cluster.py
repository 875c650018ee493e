"""Predicate co-occurrence clustering.

Predicates that appear together in at least one training instance are
connected; connected components are the candidate clusters, shrunk to a
size cap by repeatedly removing hub nodes.  Combos of sizes 2-4 drawn from
each component drive synthetic rule generation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

from .core import Instance


@dataclass
class PredicateGraph:
    nodes: set[str] = field(default_factory=set)
    adjacency: dict[str, set[str]] = field(default_factory=dict)

    def add_node(self, node: str) -> None:
        self.nodes.add(node)
        self.adjacency.setdefault(node, set())

    def add_edge(self, a: str, b: str) -> None:
        if a == b:
            return
        self.add_node(a)
        self.add_node(b)
        self.adjacency[a].add(b)
        self.adjacency[b].add(a)

    @property
    def edges(self) -> set[frozenset[str]]:
        return {frozenset((a, b)) for a, nbrs in self.adjacency.items() for b in nbrs}

    def neighbors_in(self, node: str, members: set[str]) -> set[str]:
        return self.adjacency.get(node, set()) & members


def build_cooccurrence_graph(instances: list[Instance]) -> PredicateGraph:
    """Nodes are all normalized predicates; edges join predicates sharing
    at least one instance."""
    if not instances:
        raise ValueError("no instances to build a graph from")
    graph = PredicateGraph()
    for inst in instances:
        preds = sorted({t.norm_pred for t in inst.triples})
        for p in preds:
            graph.add_node(p)
        for a, b in combinations(preds, 2):
            graph.add_edge(a, b)
    return graph


def connected_components(graph: PredicateGraph, within: set[str] | None = None) -> list[set[str]]:
    """Components (BFS), each returned as a node set, ordered by smallest member."""
    members = graph.nodes if within is None else within
    seen: set[str] = set()
    components = []
    for start in sorted(members):
        if start in seen:
            continue
        component = {start}
        frontier = [start]
        seen.add(start)
        while frontier:
            node = frontier.pop()
            for nbr in graph.neighbors_in(node, members):
                if nbr not in seen:
                    seen.add(nbr)
                    component.add(nbr)
                    frontier.append(nbr)
        components.append(component)
    return sorted(components, key=min)


def components_capped(graph: PredicateGraph, cap: int = 20) -> list[set[str]]:
    """Connected components shrunk to at most ``cap`` nodes each.

    An oversized component loses, one at a time, the node adjacent to all
    of its other nodes (ties: lexicographically smallest); if no such
    universal node exists, the highest-degree node within the component
    goes instead.  Removed nodes are dropped from the result; the pieces
    are re-decomposed and processed again.
    """
    if cap < 2:
        raise ValueError("cap must be at least 2")
    queue = connected_components(graph)
    done: list[set[str]] = []
    while queue:
        component = queue.pop(0)
        if len(component) <= cap:
            done.append(component)
            continue
        victim = _pick_removal(graph, component)
        survivors = component - {victim}
        queue = connected_components(graph, within=survivors) + queue
    return sorted(done, key=min)


def _pick_removal(graph: PredicateGraph, component: set[str]) -> str:
    full = len(component) - 1
    universal = sorted(n for n in component if len(graph.neighbors_in(n, component)) == full)
    if universal:
        return universal[0]
    return max(sorted(component), key=lambda n: len(graph.neighbors_in(n, component)))


def enumerate_predicate_combos(component: set[str], cap_per_component: int | None = None) -> list[list[str]]:
    """All size-2..4 subsets of ``component`` as sorted lists, ordered by
    (size, lexicographic), truncated to ``cap_per_component`` when given."""
    if len(component) < 2:
        raise ValueError("component must have at least 2 predicates")
    ordered = sorted(component)
    combos: list[list[str]] = []
    for size in (2, 3, 4):
        if size > len(ordered):
            break
        for combo in combinations(ordered, size):
            combos.append(list(combo))
            if cap_per_component is not None and len(combos) >= cap_per_component:
                return combos
    return combos

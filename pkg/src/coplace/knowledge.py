"""Per-player knowledge: a labeled graph over objects and bins plus negatives.

Positive edges carry one of the four relations; the four destination bins are
implicitly interconnected by geometry.  Because the relations form a group
acting regularly on the bins, every connected component can be summarized by
one offset per node, which makes the transitive closure and exact candidate
computation cheap.  Negative evidence (rejected placements) filters the
allowed placements of a whole component, not just the guessed object.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache

from .domain import (
    Bin,
    Constraint,
    CoplaceError,
    DESTINATION_BINS,
    Grounding,
    PairRule,
    Player,
    Relation,
    compose,
    pair_rule,
    relation_between,
    shift_bin,
)


class InconsistentKnowledge(CoplaceError):
    pass


# Provenance tags for positive edges.
OWN = "own"
COMMUNICATED = "communicated"
OBSERVED = "observed"
GEOMETRY = "geometry"
DERIVED = "derived"


@dataclass(frozen=True)
class ConstraintShared:
    constraint: Constraint


@dataclass(frozen=True)
class MoveAccepted:
    obj: str
    bin: Bin


@dataclass(frozen=True)
class MoveRejected:
    obj: str
    bin: Bin


Event = ConstraintShared | MoveAccepted | MoveRejected

Node = str | Bin
_EdgeKey = frozenset


def _key(x: Node, y: Node) -> frozenset:
    return frozenset((x, y))


@dataclass(frozen=True)
class KnowledgeGraph:
    """One player's knowledge state.  Immutable; updates return a new graph."""

    objects: tuple[str, ...]
    edges: tuple[tuple[Node, Node, Relation, str], ...] = ()
    negatives: tuple[tuple[str, Bin], ...] = ()
    inconsistent: bool = False

    def edge_map(self) -> dict[frozenset, Relation]:
        return {_key(x, y): r for x, y, r, _ in self.edges}

    def negative_map(self) -> dict[str, set[Bin]]:
        out: dict[str, set[Bin]] = {o: set() for o in self.objects}
        for obj, b in self.negatives:
            out.setdefault(obj, set()).add(b)
        return out

    def with_edge(self, x: Node, y: Node, r: Relation, provenance: str) -> "KnowledgeGraph":
        existing = self.edge_map().get(_key(x, y))
        if existing is not None:
            if existing is r:
                return self
            return replace(self, inconsistent=True)
        return replace(self, edges=self.edges + ((x, y, r, provenance),))

    def with_negative(self, obj: str, b: Bin) -> "KnowledgeGraph":
        if (obj, b) in self.negatives:
            return self
        return replace(self, negatives=self.negatives + ((obj, b),))


@dataclass(frozen=True)
class ClosureResult:
    edges: tuple[tuple[Node, Node, Relation], ...]
    consistent: bool
    candidates: dict[str, frozenset[Bin]] = field(compare=False)

    def dump(self) -> str:
        """Canonical text form for golden-file comparisons."""
        lines = [f"consistent: {str(self.consistent).lower()}"]
        for x, y, r in sorted(self.edges, key=lambda e: (str(e[0]), str(e[1]), str(e[2]))):
            lines.append(f"edge: {r.value}({x},{y})")
        for obj in sorted(self.candidates):
            bins = ",".join(b.value for b in sorted(self.candidates[obj], key=str))
            lines.append(f"candidates({obj}): {{{bins}}}")
        return "\n".join(lines)


def _constraint_edge(c: Constraint) -> tuple[Node, Node, Relation]:
    if isinstance(c, PairRule):
        return c.a, c.b, c.relation
    return c.obj, c.bin, Relation.SAME_BIN


def init_knowledge(
    own_constraints: tuple[Constraint, ...] | list[Constraint],
    objects: tuple[str, ...] | list[str],
    player: Player,
) -> KnowledgeGraph:
    """Seed a graph with the player's own constraints; no negatives yet."""
    kg = KnowledgeGraph(objects=tuple(objects))
    for c in own_constraints:
        x, y, r = _constraint_edge(c)
        kg = kg.with_edge(x, y, r, OWN)
    return kg


def assimilate(kg: KnowledgeGraph, event: Event) -> KnowledgeGraph:
    """Fold one public event (or received share) into the graph."""
    if isinstance(event, ConstraintShared):
        x, y, r = _constraint_edge(event.constraint)
        return kg.with_edge(x, y, r, COMMUNICATED)
    if isinstance(event, MoveAccepted):
        if event.bin in DESTINATION_BINS:
            return kg.with_edge(event.obj, event.bin, Relation.SAME_BIN, OBSERVED)
        return kg  # area/common moves are board bookkeeping only
    if isinstance(event, MoveRejected):
        return kg.with_negative(event.obj, event.bin)
    raise TypeError(f"unknown event: {event!r}")


@lru_cache(maxsize=65536)
def _components(kg: KnowledgeGraph) -> tuple[list[dict[Node, Relation]], bool]:
    """Connected components with per-node offsets relative to a root.

    The four bins are pre-linked by geometry, so they always share one
    component.  Returns (components, consistent); a path conflict makes the
    whole graph inconsistent.
    """
    adjacency: dict[Node, list[tuple[Node, Relation]]] = {}

    def add(x: Node, y: Node, r: Relation) -> None:
        adjacency.setdefault(x, []).append((y, r))
        adjacency.setdefault(y, []).append((x, r))

    for obj in kg.objects:
        adjacency.setdefault(obj, [])
    for a in DESTINATION_BINS:
        adjacency.setdefault(a, [])
    for i, a in enumerate(DESTINATION_BINS):
        for b in DESTINATION_BINS[i + 1 :]:
            add(a, b, relation_between(a, b))
    for x, y, r, _ in kg.edges:
        add(x, y, r)

    consistent = True
    seen: set[Node] = set()
    components: list[dict[Node, Relation]] = []
    for start in adjacency:
        if start in seen:
            continue
        offsets: dict[Node, Relation] = {start: Relation.SAME_BIN}
        queue = [start]
        seen.add(start)
        while queue:
            node = queue.pop()
            for nbr, rel in adjacency[node]:
                derived = compose(offsets[node], rel)
                if nbr in offsets:
                    if offsets[nbr] is not derived:
                        consistent = False
                else:
                    offsets[nbr] = derived
                    seen.add(nbr)
                    queue.append(nbr)
        components.append(offsets)
    return components, consistent


@lru_cache(maxsize=65536)
def expand(kg: KnowledgeGraph) -> ClosureResult:
    """Transitive fixpoint of the relation graph plus exact candidate sets.

    Candidate sets equal the brute-force projection of all assignments
    satisfying the positive edges and avoiding the negatives.
    """
    components, consistent = _components(kg)
    consistent = consistent and not kg.inconsistent
    negatives = kg.negative_map()

    candidates: dict[str, frozenset[Bin]] = {}
    for comp in components:
        anchor = next((n for n in comp if isinstance(n, Bin)), None)
        comp_objects = [n for n in comp if not isinstance(n, Bin)]
        if not comp_objects:
            continue
        if anchor is not None:
            # relation(o, anchor) = off(o) o off(anchor); bins are regular,
            # so each object's bin is pinned.
            for obj in comp_objects:
                rel = compose(comp[obj], comp[anchor])
                b = shift_bin(anchor, rel)
                if b in negatives.get(obj, set()):
                    consistent = False
                    candidates[obj] = frozenset()
                else:
                    candidates[obj] = frozenset({b})
        else:
            root = next(iter(comp))
            allowed = []
            for g in DESTINATION_BINS:
                ok = all(
                    shift_bin(g, comp[obj]) not in negatives.get(obj, set())
                    for obj in comp_objects
                )
                if ok:
                    allowed.append(g)
            if not allowed:
                consistent = False
            for obj in comp_objects:
                candidates[obj] = frozenset(shift_bin(g, comp[obj]) for g in allowed)

    if not consistent:
        # No satisfying configuration: every projection is empty.
        candidates = {o: frozenset() for o in kg.objects}

    closed: list[tuple[Node, Node, Relation]] = []
    for comp in components:
        nodes = sorted(comp, key=str)
        for i, x in enumerate(nodes):
            for y in nodes[i + 1 :]:
                if isinstance(x, Bin) and isinstance(y, Bin):
                    continue  # geometry edges are implicit and never reported
                closed.append((x, y, compose(comp[x], comp[y])))
    return ClosureResult(edges=tuple(closed), consistent=consistent, candidates=candidates)


def goal_of(kg: KnowledgeGraph, obj: str, closure: ClosureResult | None = None) -> Bin | None:
    """The object's bin if knowledge pins it uniquely, else None."""
    closure = closure if closure is not None else expand(kg)
    if not closure.consistent:
        raise InconsistentKnowledge("knowledge graph is contradictory")
    cands = closure.candidates.get(obj, frozenset(DESTINATION_BINS))
    if len(cands) == 1:
        return next(iter(cands))
    return None


@lru_cache(maxsize=65536)
def entails(kg: KnowledgeGraph, constraint: Constraint) -> bool:
    """True iff the constraint holds in every satisfying configuration."""
    closure = expand(kg)
    if not closure.consistent:
        return True  # vacuous: no satisfying configuration
    components, _ = _components(kg)

    def comp_of(node: Node) -> dict[Node, Relation] | None:
        for comp in components:
            if node in comp:
                return comp
        return None

    if isinstance(constraint, Grounding):
        cands = closure.candidates.get(constraint.obj)
        return cands is not None and cands == frozenset({constraint.bin})

    comp_a = comp_of(constraint.a)
    comp_b = comp_of(constraint.b)
    if comp_a is None or comp_b is None:
        return False
    if comp_a is comp_b:
        return compose(comp_a[constraint.a], comp_a[constraint.b]) is constraint.relation
    # Different components: the relation holds universally only if every
    # combination of allowed placements satisfies it.
    cands_a = closure.candidates.get(constraint.a, frozenset())
    cands_b = closure.candidates.get(constraint.b, frozenset())
    if len(cands_a) == 1 and len(cands_b) == 1:
        (ba,), (bb,) = cands_a, cands_b
        return relation_between(ba, bb) is constraint.relation
    return False

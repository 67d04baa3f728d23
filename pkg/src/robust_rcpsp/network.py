"""Precedence-graph algebra: closures, minimal forbidden sets, selections.

A selection is a set of extra precedence arcs resolving resource conflicts.
It is sufficient when the extended graph is acyclic and every minimal
forbidden set contains two activities that became precedence-related.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

from ._graph import add_arc_to_closure, closure_bitsets, reaches
from .errors import CapExceeded, CyclicGraphError
from .instance import ProjectInstance


@dataclass(frozen=True)
class Selection:
    """Extra precedence arcs added on top of the instance arcs."""

    added_arcs: frozenset[tuple[int, int]] = frozenset()

    @classmethod
    def from_pairs(cls, pairs):
        return cls(frozenset((int(i), int(j)) for i, j in pairs))

    def sorted_arcs(self):
        return tuple(sorted(self.added_arcs))


@dataclass(frozen=True)
class ForbiddenSetCatalog:
    """Inclusion-minimal resource-conflict sets, lexicographically ordered."""

    sets: tuple[tuple[int, ...], ...]

    def __len__(self):
        return len(self.sets)


@dataclass(frozen=True)
class SelectionVerdict:
    sufficient: bool
    violated_set: tuple[int, ...] | None = None
    cycle: tuple[int, ...] | None = None


def transitive_closure(n_nodes: int, arcs) -> list[list[bool]]:
    """Boolean matrix M with M[i][j] true iff j is reachable from i."""
    reach = closure_bitsets(n_nodes, arcs)
    return [[bool((reach[i] >> j) & 1) for j in range(n_nodes)] for i in range(n_nodes)]


def extended_arcs(inst: ProjectInstance, sel: Selection) -> tuple[tuple[int, int], ...]:
    """Instance arcs plus selection arcs, validated and sorted.

    Self-loops are kept: they surface as cycles wherever acyclicity is
    checked, which is the verdict verify_selection is meant to deliver.
    """
    base = set(inst.precedence)
    for i, j in sel.added_arcs:
        if not (0 <= i < inst.n_nodes and 0 <= j < inst.n_nodes):
            raise ValueError(f"selection arc ({i}, {j}) references an unknown activity")
        if (i, j) in base:
            raise ValueError(f"selection arc ({i}, {j}) duplicates an instance arc")
    return tuple(sorted(base | sel.added_arcs))


def minimal_forbidden_sets(inst: ProjectInstance, max_sets: int = 10**6) -> ForbiddenSetCatalog:
    """Enumerate all minimal forbidden sets by depth-first antichain growth.

    Only activities with a positive requirement can appear in a minimal set,
    and supersets of a forbidden set are never explored.  A hard cap guards
    pathological inputs.
    """
    n_nodes = inst.n_nodes
    reach = closure_bitsets(n_nodes, inst.precedence)
    req = inst.requirement
    cap = inst.capacity
    k_range = inst.resource_types
    cands = [i for i in range(1, inst.sink) if any(req[i][k] > 0 for k in k_range)]

    related = [0] * n_nodes
    for i in cands:
        for j in cands:
            if i != j and (reaches(reach, i, j) or reaches(reach, j, i)):
                related[i] |= 1 << j

    results = []

    def is_minimal(members, sums):
        for m in members:
            if any(sums[k] - req[m][k] > cap[k] for k in k_range):
                return False
        return True

    def grow(start_idx, members, sums, blocked):
        for idx in range(start_idx, len(cands)):
            c = cands[idx]
            if (blocked >> c) & 1:
                continue
            new_sums = [sums[k] + req[c][k] for k in k_range]
            members.append(c)
            if any(new_sums[k] > cap[k] for k in k_range):
                if is_minimal(members, new_sums):
                    results.append(tuple(members))
                    if len(results) > max_sets:
                        raise CapExceeded(
                            f"more than {max_sets} minimal forbidden sets; raise max_sets"
                        )
            else:
                grow(idx + 1, members, new_sums, blocked | related[c])
            members.pop()

    grow(0, [], [0] * len(cap), 0)
    return ForbiddenSetCatalog(tuple(sorted(results)))


def verify_selection(inst: ProjectInstance, sel: Selection,
                     catalog: ForbiddenSetCatalog) -> SelectionVerdict:
    """Check sufficiency: acyclic extension and every catalog set resolved."""
    arcs = extended_arcs(inst, sel)
    try:
        reach = closure_bitsets(inst.n_nodes, arcs)
    except CyclicGraphError as exc:
        return SelectionVerdict(sufficient=False, cycle=exc.cycle)
    for fset in catalog.sets:
        if not _resolved(reach, fset):
            return SelectionVerdict(sufficient=False, violated_set=fset)
    return SelectionVerdict(sufficient=True)


def _resolved(reach, fset):
    return any(reaches(reach, i, j) for i, j in permutations(fset, 2))


def selection_from_schedule(inst: ProjectInstance, start, dur) -> Selection:
    """Arcs implied by a schedule: i before j whenever j starts after i ends.

    Mutually qualifying pairs (possible only between zero-duration
    activities starting together) keep the arc out of the smaller id, which
    keeps the result acyclic.
    """
    base = set(inst.precedence)
    added = set()
    for i in range(inst.n_nodes):
        for j in range(inst.n_nodes):
            if i == j or (i, j) in base:
                continue
            if start[j] < start[i] + dur[i]:
                continue
            mutual = start[i] >= start[j] + dur[j]
            if mutual and j < i:
                continue
            added.add((i, j))
    return Selection(frozenset(added))


def enumerate_sufficient_selections(inst: ProjectInstance, catalog: ForbiddenSetCatalog,
                                    max_non_dummies: int = 8):
    """Yield one selection per closure-minimal sufficient extension.

    Exhaustive oracle for tiny instances: branches over ordered pairs of the
    first unresolved forbidden set, de-duplicates extensions by transitive
    closure, then keeps only closures not strictly containing another
    sufficient closure.  Deterministic order: sorted added-arc tuples.
    """
    if inst.n_activities > max_non_dummies:
        raise CapExceeded(
            f"{inst.n_activities} non-dummy activities exceed the cap of {max_non_dummies}"
        )
    n_nodes = inst.n_nodes
    root_reach = closure_bitsets(n_nodes, inst.precedence)
    leaves = {}
    seen = set()

    def visit(reach, added):
        key = tuple(reach)
        if key in seen:
            return
        seen.add(key)
        unresolved = next((f for f in catalog.sets if not _resolved(reach, f)), None)
        if unresolved is None:
            leaves.setdefault(key, tuple(sorted(added)))
            return
        for i, j in permutations(unresolved, 2):
            if reaches(reach, j, i):
                continue
            child = list(reach)
            add_arc_to_closure(child, i, j)
            visit(child, added | {(i, j)})

    visit(root_reach, frozenset())

    relation_sets = {
        key: frozenset((i, j) for i in range(n_nodes) for j in range(n_nodes)
                       if (key[i] >> j) & 1)
        for key in leaves
    }
    minimal = []
    for key, arcs in leaves.items():
        rel = relation_sets[key]
        if not any(other < rel for other in relation_sets.values()):
            minimal.append(arcs)
    for arcs in sorted(minimal):
        yield Selection(frozenset(arcs))


def catalog_to_jsonable(catalog: ForbiddenSetCatalog):
    return {"sets": [list(s) for s in catalog.sets]}


def selection_to_jsonable(sel: Selection):
    return [list(arc) for arc in sel.sorted_arcs()]

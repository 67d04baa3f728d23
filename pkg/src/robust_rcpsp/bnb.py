"""Self-contained exact solver: branch-and-bound over conflict resolutions.

Search nodes carry a partial selection.  Branching picks the first
unresolved minimal forbidden set and adds one ordered precedence pair from
it per child; the worst-case makespan of the partial extension is a valid
lower bound because adding arcs never shortens the adversary's longest
path.  Extensions reaching an already-seen transitive closure are merged.
"""
from __future__ import annotations

import heapq
import time
from dataclasses import dataclass
from itertools import permutations

from ._graph import add_arc_to_closure, closure_bitsets, reaches
from .adversary import worst_case_makespan_dp
from .heuristics import warm_start
from .instance import ProjectInstance
from .network import ForbiddenSetCatalog, Selection, minimal_forbidden_sets


@dataclass(frozen=True)
class SearchNode:
    added_arcs: frozenset[tuple[int, int]]
    closure: tuple[int, ...]
    unresolved: tuple[int, ...]
    bound: int


@dataclass(frozen=True)
class OptResult:
    selection: Selection | None
    value: int | None
    status: str  # "optimal" | "incumbent"
    nodes: int
    time_s: float
    best_bound: int | None


def solve_exact(inst: ProjectInstance, gamma: int, *,
                time_limit_s: float | None = None,
                node_cap: int | None = None,
                ub_hint: int | None = None,
                catalog: ForbiddenSetCatalog | None = None) -> OptResult:
    """Best-first search for the minimum worst-case makespan.

    The incumbent starts from ``ub_hint`` (which must be achievable) or the
    LFT warm start.  Nodes whose bound reaches the incumbent are pruned;
    when the best open bound reaches the incumbent the incumbent is optimal.
    """
    t0 = time.perf_counter()
    if catalog is None:
        catalog = minimal_forbidden_sets(inst)
    if ub_hint is not None:
        incumbent_value, incumbent_sel = ub_hint, None
    else:
        warm = warm_start(inst, gamma)
        incumbent_value, incumbent_sel = warm.upper_bound, warm.selection

    root_closure = list(closure_bitsets(inst.n_nodes, inst.precedence))
    root_unresolved = tuple(
        idx for idx, fset in enumerate(catalog.sets)
        if not _resolved(root_closure, fset)
    )
    root_bound = worst_case_makespan_dp(inst, Selection(), gamma).value
    heap = []
    counter = 0
    seen = {tuple(root_closure)}
    heapq.heappush(heap, (root_bound, counter, SearchNode(
        added_arcs=frozenset(), closure=tuple(root_closure),
        unresolved=root_unresolved, bound=root_bound)))
    nodes_explored = 0

    def result(status, best_bound):
        return OptResult(
            selection=incumbent_sel, value=incumbent_value, status=status,
            nodes=nodes_explored, time_s=time.perf_counter() - t0,
            best_bound=best_bound,
        )

    while heap:
        if time_limit_s is not None and time.perf_counter() - t0 > time_limit_s:
            return result("incumbent", heap[0][0])
        if node_cap is not None and nodes_explored >= node_cap:
            return result("incumbent", heap[0][0])
        bound, _, node = heapq.heappop(heap)
        nodes_explored += 1
        if bound >= incumbent_value:
            return result("optimal", incumbent_value)
        if not node.unresolved:
            incumbent_value = bound
            incumbent_sel = Selection(node.added_arcs)
            continue
        fset = catalog.sets[node.unresolved[0]]
        for i, j in permutations(fset, 2):
            if reaches(node.closure, j, i):
                continue
            child_closure = list(node.closure)
            add_arc_to_closure(child_closure, i, j)
            key = tuple(child_closure)
            if key in seen:
                continue
            seen.add(key)
            child_arcs = node.added_arcs | {(i, j)}
            child_bound = worst_case_makespan_dp(inst, Selection(child_arcs), gamma).value
            if child_bound >= incumbent_value:
                continue
            child_unresolved = tuple(
                idx for idx in node.unresolved
                if not _resolved(child_closure, catalog.sets[idx])
            )
            counter += 1
            heapq.heappush(heap, (child_bound, counter, SearchNode(
                added_arcs=child_arcs, closure=key,
                unresolved=child_unresolved, bound=child_bound)))
    return result("optimal", incumbent_value)


def _resolved(closure, fset):
    return any(reaches(closure, i, j) for i, j in permutations(fset, 2))


def optimality_gap(result: OptResult, best_bound: int | None = None) -> float | None:
    """Relative gap in percent: 100 * (incumbent - bound) / incumbent.

    Returns None when the incumbent is missing or not positive.
    """
    incumbent = result.value
    if incumbent is None or incumbent <= 0:
        return None
    if result.status == "optimal":
        return 0.0
    bound = best_bound if best_bound is not None else result.best_bound
    if bound is None:
        return None
    return max(0.0, 100.0 * (incumbent - bound) / incumbent)

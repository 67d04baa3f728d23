"""Worst-case makespan evaluation for a fixed selection.

The adversary distributes up to ``gamma`` unit delays over activities to
maximise the minimum makespan.  For integer budgets this is a longest-path
problem on an augmented network of gamma+1 stacked copies of the extended
project network: same-level arcs carry nominal durations, level-crossing
arcs carry worst-case durations (the tail activity is delayed), and
zero-weight sink self-arcs connect consecutive levels so the top level is
always reachable.

Also houses the fractional-certificate checker for the single-level
linearized adversary model and the Ghouila-Houri refutation of its total
unimodularity, including the three-activity diamond example on which a
fractional flow strictly beats every integral delay choice.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product

from ._graph import predecessors, topological_order
from .errors import CapExceeded
from .instance import InstanceMeta, ProjectInstance
from .network import Selection, extended_arcs


# ---------------------------------------------------------------------------
# Augmented network


@dataclass(frozen=True)
class AugmentedNetwork:
    """Layered copy stack of the extended network.

    ``alpha_arcs`` are (i, j, level, weight) within a level, ``beta_arcs``
    are (i, j, level, weight) from ``level`` to ``level + 1``, and
    ``sink_self_arcs`` are (level, 0) entries linking the sink to itself one
    level up.
    """

    gamma: int
    sink: int
    alpha_arcs: tuple[tuple[int, int, int, int], ...]
    beta_arcs: tuple[tuple[int, int, int, int], ...]
    sink_self_arcs: tuple[tuple[int, int], ...]

    def state_arcs(self):
        """All arcs as ((node, level), (node, level), weight) triples."""
        for i, j, g, w in self.alpha_arcs:
            yield (i, g), (j, g), w
        for i, j, g, w in self.beta_arcs:
            yield (i, g), (j, g + 1), w
        for g, w in self.sink_self_arcs:
            yield (self.sink, g), (self.sink, g + 1), w


def build_augmented_network(inst: ProjectInstance, sel: Selection, gamma: int) -> AugmentedNetwork:
    arcs = extended_arcs(inst, sel)
    topological_order(inst.n_nodes, arcs)  # reject cyclic extensions early
    nominal = inst.nominal_duration
    alpha = tuple((i, j, g, nominal[i]) for g in range(gamma + 1) for i, j in arcs)
    beta = tuple(
        (i, j, g, nominal[i] + inst.max_deviation[i])
        for g in range(gamma) for i, j in arcs
    )
    sink_self = tuple((g, 0) for g in range(gamma))
    return AugmentedNetwork(gamma=gamma, sink=inst.sink, alpha_arcs=alpha,
                            beta_arcs=beta, sink_self_arcs=sink_self)


# ---------------------------------------------------------------------------
# Dynamic program


@dataclass(frozen=True)
class DpTable:
    """State values indexed [node][level]; None marks unreachable states."""

    values: tuple[tuple[int | None, ...], ...]
    gamma: int


@dataclass(frozen=True)
class DpResult:
    value: int
    delayed: frozenset[int]
    path: tuple[int, ...]
    table: DpTable


def worst_case_makespan_dp(inst: ProjectInstance, sel: Selection, gamma: int) -> DpResult:
    """Longest path through the augmented network, with delay backtracking.

    State value recursion over predecessors i of node j:
    V(j, g) = max( V(i, g) + nominal_i,  V(i, g-1) + nominal_i + deviation_i )
    with V(0, 0) = 0, plus a zero-cost sink self-arc lifting V(sink, g-1) to
    level g.  The returned value is V(sink, gamma), which by the self-arcs
    equals the maximum over all levels up to gamma.
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    arcs = extended_arcs(inst, sel)
    n_nodes = inst.n_nodes
    sink = inst.sink
    order = topological_order(n_nodes, arcs)
    pred = predecessors(n_nodes, arcs)
    nominal = inst.nominal_duration
    dev = inst.max_deviation

    values = [[None] * (gamma + 1) for _ in range(n_nodes)]
    values[0][0] = 0
    for g in range(gamma + 1):
        for j in order:
            if j == 0:
                continue
            best = values[j][g]  # stays None unless some branch applies
            for i in pred[j]:
                vi = values[i][g]
                if vi is not None:
                    cand = vi + nominal[i]
                    if best is None or cand > best:
                        best = cand
                if g > 0:
                    vi_prev = values[i][g - 1]
                    if vi_prev is not None:
                        cand = vi_prev + nominal[i] + dev[i]
                        if best is None or cand > best:
                            best = cand
            if j == sink and g > 0 and values[sink][g - 1] is not None:
                cand = values[sink][g - 1]
                if best is None or cand > best:
                    best = cand
            values[j][g] = best

    value = values[sink][gamma]
    delayed, path = _backtrack(values, pred, nominal, dev, sink, gamma)
    table = DpTable(values=tuple(tuple(v) for v in values), gamma=gamma)
    return DpResult(value=value, delayed=frozenset(delayed), path=tuple(path), table=table)


def _backtrack(values, pred, nominal, dev, sink, gamma):
    """Recover one optimal delay set; prefers sink self-arcs, then
    non-delayed predecessors, so vacuous delays are never reported."""
    delayed = []
    path = [sink]
    j, g = sink, gamma
    while (j, g) != (0, 0):
        target = values[j][g]
        if j == sink and g > 0 and values[sink][g - 1] == target:
            g -= 1
            continue
        step = None
        for i in sorted(pred[j]):
            vi = values[i][g]
            if vi is not None and vi + nominal[i] == target:
                step = (i, g, False)
                break
        if step is None:
            for i in sorted(pred[j]):
                if g > 0:
                    vi = values[i][g - 1]
                    if vi is not None and vi + nominal[i] + dev[i] == target:
                        step = (i, g - 1, True)
                        break
        if step is None:  # pragma: no cover - recursion and backtrack disagree
            raise AssertionError("backtracking failed to reproduce the DP value")
        i, g, was_delayed = step
        if was_delayed:
            delayed.append(i)
        path.append(i)
        j = i
    path.reverse()
    return delayed, path


def worst_case_makespan_bruteforce(inst: ProjectInstance, sel: Selection, gamma: int,
                                   max_activities: int = 20, max_budget: int = 3) -> int:
    """Independent oracle: enumerate every delay subset of size <= gamma.

    Valid because the worst case of a longest-path value, convex in the
    durations, is attained at a 0/1 vertex of the budget polytope when the
    budget is integer.  Refuses oversized inputs.
    """
    if inst.n_activities > max_activities:
        raise CapExceeded(
            f"{inst.n_activities} non-dummy activities exceed the cap of {max_activities}"
        )
    if gamma > max_budget:
        raise CapExceeded(f"budget {gamma} exceeds the cap of {max_budget}")
    arcs = extended_arcs(inst, sel)
    n_nodes = inst.n_nodes
    order = topological_order(n_nodes, arcs)
    pred = predecessors(n_nodes, arcs)
    candidates = [i for i in range(n_nodes) if inst.max_deviation[i] > 0]

    def critical_path(delayed):
        dist = [None] * n_nodes
        dist[0] = 0
        for v in order:
            if v == 0:
                continue
            best = None
            for p in pred[v]:
                if dist[p] is None:
                    continue
                w = inst.nominal_duration[p]
                if p in delayed:
                    w += inst.max_deviation[p]
                cand = dist[p] + w
                if best is None or cand > best:
                    best = cand
            dist[v] = best
        return dist[inst.sink]

    best = critical_path(frozenset())
    for size in range(1, min(gamma, len(candidates)) + 1):
        for combo in combinations(candidates, size):
            best = max(best, critical_path(frozenset(combo)))
    return best


# ---------------------------------------------------------------------------
# Fractional certificates for the single-level linearized adversary


@dataclass
class FractionalCertificate:
    """Candidate solution of the linearized adversary: flows alpha, delay
    picks delta, and linearization terms w, all exact rationals."""

    alpha: dict
    w: dict
    delta: dict

    def __post_init__(self):
        self.alpha = {(int(i), int(j)): Fraction(v) for (i, j), v in self.alpha.items()}
        self.w = {(int(i), int(j)): Fraction(v) for (i, j), v in self.w.items()}
        self.delta = {int(i): Fraction(v) for i, v in self.delta.items()}


@dataclass(frozen=True)
class CertificateCheck:
    feasible: bool
    objective: Fraction
    violations: tuple[str, ...] = ()


def check_fractional_certificate(inst: ProjectInstance, sel: Selection, gamma: int,
                                 cert: FractionalCertificate) -> CertificateCheck:
    """Exact feasibility check of a certificate over the extension arcs.

    Flows on absent arcs are fixed to zero by the precondition, so the
    certificate may only index arcs of the extended network.
    """
    arcs = set(extended_arcs(inst, sel))
    for key in list(cert.alpha) + list(cert.w):
        if key not in arcs:
            raise ValueError(f"certificate indexes arc {key} outside the extended network")
    for i in cert.delta:
        if not 0 <= i < inst.n_nodes:
            raise ValueError(f"certificate indexes unknown activity {i}")

    alpha = {a: cert.alpha.get(a, Fraction(0)) for a in arcs}
    w = {a: cert.w.get(a, Fraction(0)) for a in arcs}
    delta = {i: cert.delta.get(i, Fraction(0)) for i in range(inst.n_nodes)}
    sink = inst.sink
    violations = []

    for (i, j), v in alpha.items():
        if not 0 <= v <= 1:
            violations.append(f"alpha[{i},{j}]={v} outside [0, 1]")
    for (i, j), v in w.items():
        if v < 0:
            violations.append(f"w[{i},{j}]={v} negative")
    for i, v in delta.items():
        if not 0 <= v <= 1:
            violations.append(f"delta[{i}]={v} outside [0, 1]")

    for node in range(1, sink):
        inflow = sum(v for (i, j), v in alpha.items() if j == node)
        outflow = sum(v for (i, j), v in alpha.items() if i == node)
        if inflow != outflow:
            violations.append(f"flow not conserved at activity {node}: {inflow} in, {outflow} out")
    source_out = sum(v for (i, _), v in alpha.items() if i == 0)
    if source_out != 1:
        violations.append(f"source outflow {source_out} != 1")
    sink_in = sum(v for (_, j), v in alpha.items() if j == sink)
    if sink_in != 1:
        violations.append(f"sink inflow {sink_in} != 1")
    for (i, j), v in w.items():
        if v > delta[i]:
            violations.append(f"w[{i},{j}]={v} exceeds delta[{i}]={delta[i]}")
        if v > alpha[(i, j)]:
            violations.append(f"w[{i},{j}]={v} exceeds alpha[{i},{j}]={alpha[(i, j)]}")
    total_delay = sum(delta.values())
    if total_delay > gamma:
        violations.append(f"total delay {total_delay} exceeds budget {gamma}")

    objective = sum(
        (inst.nominal_duration[i] * alpha[(i, j)] + inst.max_deviation[i] * w[(i, j)]
         for (i, j) in arcs),
        Fraction(0),
    )
    return CertificateCheck(feasible=not violations, objective=objective,
                            violations=tuple(violations))


def path_certificate(inst: ProjectInstance, sel: Selection, path, delayed) -> FractionalCertificate:
    """Integral certificate routing the unit flow along one path."""
    alpha = {}
    for i, j in zip(path, path[1:]):
        if i != j:
            alpha[(i, j)] = Fraction(1)
    delta = {i: Fraction(1) for i in delayed}
    w = {a: min(delta.get(a[0], Fraction(0)), v) for a, v in alpha.items()}
    return FractionalCertificate(alpha=alpha, w=w, delta=delta)


# ---------------------------------------------------------------------------
# The three-activity diamond example


def counterexample_instance() -> ProjectInstance:
    """Diamond project: 0 -> 1 -> {2, 3} -> 4, unit durations and deviations.

    With a budget of one delay the integral adversary reaches makespan 3,
    while splitting the flow across both branches reaches 7/2.
    """
    return ProjectInstance(
        nominal_duration=(0, 1, 1, 1, 0),
        max_deviation=(0, 1, 1, 1, 0),
        requirement=((), (), (), (), ()),
        capacity=(),
        precedence=((0, 1), (1, 2), (1, 3), (2, 4), (3, 4)),
        meta=InstanceMeta(name="counterexample"),
        robustified=True,
    )


def counterexample_certificate() -> FractionalCertificate:
    """The fractional split beating the integral optimum on the diamond."""
    half = Fraction(1, 2)
    quarter = Fraction(1, 4)
    alpha = {(0, 1): Fraction(1), (1, 2): half, (1, 3): half,
             (2, 4): half, (3, 4): half}
    delta = {0: Fraction(0), 1: half, 2: quarter, 3: quarter, 4: Fraction(0)}
    w = {arc: min(delta[arc[0]], flow) for arc, flow in alpha.items()}
    return FractionalCertificate(alpha=alpha, w=w, delta=delta)


# ---------------------------------------------------------------------------
# Constraint matrix and Ghouila-Houri refutation


@dataclass(frozen=True)
class AdversaryMatrix:
    """Single-level adversary constraint matrix with labelled row groups.

    Row order: flow conservation at internal activities (by id), source,
    sink; then per-arc w <= delta rows; per-arc w <= alpha rows; the budget
    row; and per-activity delta upper bounds.  Columns: alpha block, w
    block, delta block, each lexicographic.
    """

    entries: tuple[tuple[int, ...], ...]
    row_labels: tuple[str, ...]
    column_labels: tuple[str, ...]
    groups: dict = field(hash=False)
    arcs: tuple[tuple[int, int], ...]
    n_nodes: int


@dataclass(frozen=True)
class TuVerdict:
    """Outcome of a Ghouila-Houri row-subset check.

    ``refuted`` means no +/-1 signing keeps every column sum in {-1, 0, 1},
    certifying that the matrix is not totally unimodular.
    """

    refuted: bool
    assignment: tuple[int, ...] | None = None


def build_adversary_constraint_matrix(inst: ProjectInstance, sel: Selection,
                                      gamma: int) -> AdversaryMatrix:
    arcs = extended_arcs(inst, sel)
    topological_order(inst.n_nodes, arcs)
    n_nodes = inst.n_nodes
    sink = inst.sink
    n_arcs = len(arcs)
    arc_index = {a: idx for idx, a in enumerate(arcs)}
    n_cols = 2 * n_arcs + n_nodes
    col_w = n_arcs
    col_d = 2 * n_arcs

    rows = []
    labels = []

    def blank():
        return [0] * n_cols

    for node in range(1, sink):
        row = blank()
        for (i, j), idx in arc_index.items():
            if j == node:
                row[idx] += 1
            if i == node:
                row[idx] -= 1
        rows.append(row)
        labels.append(f"flow_{node}")
    row = blank()
    for (i, _), idx in arc_index.items():
        if i == 0:
            row[idx] = 1
    rows.append(row)
    labels.append("source")
    row = blank()
    for (_, j), idx in arc_index.items():
        if j == sink:
            row[idx] = 1
    rows.append(row)
    labels.append("sink")
    group1 = (0, len(rows))

    for (i, j), idx in arc_index.items():
        row = blank()
        row[col_w + idx] = 1
        row[col_d + i] = -1
        rows.append(row)
        labels.append(f"wle_d_{i}_{j}")
    group2 = (group1[1], len(rows))

    for (i, j), idx in arc_index.items():
        row = blank()
        row[idx] = -1
        row[col_w + idx] = 1
        rows.append(row)
        labels.append(f"wle_a_{i}_{j}")
    group3 = (group2[1], len(rows))

    row = blank()
    for node in range(n_nodes):
        row[col_d + node] = 1
    rows.append(row)
    labels.append("budget")
    group4 = (group3[1], len(rows))

    for node in range(n_nodes):
        row = blank()
        row[col_d + node] = 1
        rows.append(row)
        labels.append(f"dub_{node}")
    group5 = (group4[1], len(rows))

    columns = (
        [f"a_{i}_{j}" for i, j in arcs]
        + [f"w_{i}_{j}" for i, j in arcs]
        + [f"d_{v}" for v in range(n_nodes)]
    )
    return AdversaryMatrix(
        entries=tuple(tuple(r) for r in rows),
        row_labels=tuple(labels),
        column_labels=tuple(columns),
        groups={"group1": group1, "group2": group2, "group3": group3,
                "group4": group4, "group5": group5},
        arcs=arcs,
        n_nodes=n_nodes,
    )


def refutation_row_subset(matrix: AdversaryMatrix) -> tuple[int, ...]:
    """Five rows witnessing non-total-unimodularity.

    Takes the balance row of the smallest node with two outgoing arcs plus
    the w <= delta and w <= alpha rows of its first two out-arcs; the shared
    delta column then forces an unsatisfiable sign pattern.
    """
    out = {}
    for i, j in matrix.arcs:
        out.setdefault(i, []).append((i, j))
    branch = next((v for v in sorted(out) if len(out[v]) >= 2), None)
    if branch is None:
        raise ValueError("no activity with two outgoing arcs; witness unavailable")
    arc_a, arc_b = sorted(out[branch])[:2]
    sink = matrix.n_nodes - 1
    if branch == 0:
        g1_row = matrix.row_labels.index("source")
    elif branch == sink:  # pragma: no cover - sink has no outgoing arcs
        g1_row = matrix.row_labels.index("sink")
    else:
        g1_row = matrix.row_labels.index(f"flow_{branch}")
    rows = [
        g1_row,
        matrix.row_labels.index(f"wle_d_{arc_a[0]}_{arc_a[1]}"),
        matrix.row_labels.index(f"wle_d_{arc_b[0]}_{arc_b[1]}"),
        matrix.row_labels.index(f"wle_a_{arc_a[0]}_{arc_a[1]}"),
        matrix.row_labels.index(f"wle_a_{arc_b[0]}_{arc_b[1]}"),
    ]
    return tuple(rows)


def matrix_to_csv(matrix: AdversaryMatrix) -> str:
    """Labelled CSV rendering of the constraint matrix for inspection."""
    import csv
    import io

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["row", "group"] + list(matrix.column_labels))
    group_of = {}
    for name, (lo, hi) in matrix.groups.items():
        for idx in range(lo, hi):
            group_of[idx] = name
    for idx, (label, row) in enumerate(zip(matrix.row_labels, matrix.entries)):
        writer.writerow([label, group_of[idx]] + list(row))
    return buf.getvalue()


def ghouila_houri_refute(matrix, rows) -> TuVerdict:
    """Exhaust all sign assignments of the selected rows.

    Accepts an AdversaryMatrix or any sequence of equal-length integer rows.
    Refuses more than 25 rows (2^25 assignments).
    """
    entries = matrix.entries if isinstance(matrix, AdversaryMatrix) else [tuple(r) for r in matrix]
    rows = tuple(rows)
    if len(rows) > 25:
        raise CapExceeded(f"{len(rows)} rows exceed the exhaustive-search cap of 25")
    if not rows:
        return TuVerdict(refuted=False, assignment=())
    selected = [entries[r] for r in rows]
    n_cols = len(selected[0])
    active_cols = [c for c in range(n_cols) if any(row[c] for row in selected)]
    for signs in product((1, -1), repeat=len(rows)):
        ok = True
        for c in active_cols:
            total = sum(s * row[c] for s, row in zip(signs, selected))
            if total < -1 or total > 1:
                ok = False
                break
        if ok:
            return TuVerdict(refuted=False, assignment=signs)
    return TuVerdict(refuted=True, assignment=None)

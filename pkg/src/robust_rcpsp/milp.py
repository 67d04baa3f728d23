"""Solver-neutral compact model of the two-stage robust RCPSP.

Variables: leveled start times S_i_g, precedence binaries y_i_j, and
resource flows f_i_j_k.  The big-M precedence rows replicate the extended
network across gamma+1 levels (one extra level shift per delayed
predecessor), the flow rows route each resource from the source through the
activities to the sink, and optional extensions add transitivity rows,
per-arc tightened big-Ms from time windows, and integer start variables.

The model is exported in the standard LP text format; ``solve_external``
bridges to any solver process that accepts an LP file and writes back a
status line plus ``name value`` pairs.
"""
from __future__ import annotations

import shlex
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from ._graph import topological_order, predecessors
from .errors import BridgeError, InvalidHorizonError
from .heuristics import TimeWindows, WarmStart
from .instance import ProjectInstance
from .network import extended_arcs


def start_name(i, g):
    return f"S_{i}_{g}"


def arc_name(i, j):
    return f"y_{i}_{j}"


def flow_name(i, j, k):
    return f"f_{i}_{j}_{k}"


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str  # "continuous" | "integer" | "binary"
    lb: int | Fraction = 0
    ub: int | Fraction | None = None


@dataclass(frozen=True)
class LinearConstraint:
    name: str
    coeffs: tuple[tuple[str, int], ...]
    sense: str  # "<=", ">=", "="
    rhs: int


@dataclass
class MilpModel:
    variables: tuple[Variable, ...]
    constraints: tuple[LinearConstraint, ...]
    objective: tuple[tuple[str, int], ...]
    objective_sense: str = "min"
    roles: dict = field(default_factory=dict)

    def variable(self, name):
        return self._by_name()[name]

    def _by_name(self):
        if not hasattr(self, "_name_map"):
            self._name_map = {v.name: v for v in self.variables}
        return self._name_map

    def fixed_value(self, name):
        v = self._by_name()[name]
        return v.lb if v.ub is not None and v.lb == v.ub else None


def default_big_m(inst: ProjectInstance) -> int:
    """Total worst-case work: a safe bound on any minimum makespan."""
    return sum(inst.nominal_duration) + sum(inst.max_deviation)


def nominal_critical_path(inst: ProjectInstance) -> int:
    order = topological_order(inst.n_nodes, inst.precedence)
    pred = predecessors(inst.n_nodes, inst.precedence)
    dist = [0] * inst.n_nodes
    for j in order:
        for i in pred[j]:
            dist[j] = max(dist[j], dist[i] + inst.nominal_duration[i])
    return dist[inst.sink]


def build_compact(inst: ProjectInstance, gamma: int, *,
                  transitivity: bool = False,
                  tighten: TimeWindows | None = None,
                  integral_starts: bool = False,
                  big_m: int | None = None,
                  classical_source_flow: bool = True) -> MilpModel:
    """Build the compact reformulation as a solver-neutral model.

    ``tighten`` replaces the global big-M by per-arc values derived from the
    window bounds: lf[i] - es[j] on same-level rows and additionally the
    deviation of i on level-crossing rows, both clamped at zero.

    ``classical_source_flow`` routes the full capacity out of the source and
    into the sink; switching it off keeps the dummy requirements of zero in
    the balance rows, which leaves the flow block vacuous.
    """
    n_nodes = inst.n_nodes
    sink = inst.sink
    nominal = inst.nominal_duration
    dev = inst.max_deviation
    m_global = default_big_m(inst) if big_m is None else int(big_m)
    if tighten is not None and tighten.horizon < nominal_critical_path(inst):
        raise InvalidHorizonError(
            f"tightening horizon {tighten.horizon} is below the nominal critical path"
        )

    def m_same(i, j):
        if tighten is None:
            return m_global
        return max(0, tighten.lf[i] - tighten.es[j])

    def m_cross(i, j):
        if tighten is None:
            return m_global
        return max(0, tighten.lf[i] + dev[i] - tighten.es[j])

    base_arcs = set(inst.precedence)
    variables = []
    roles = {}
    start_kind = "integer" if integral_starts else "continuous"
    for i in range(n_nodes):
        for g in range(gamma + 1):
            name = start_name(i, g)
            ub = 0 if (i, g) == (0, 0) else None
            variables.append(Variable(name=name, kind=start_kind, lb=0, ub=ub))
            roles[name] = "start"
    for i in range(n_nodes):
        for j in range(n_nodes):
            name = arc_name(i, j)
            if (i, j) in base_arcs or (i, j) == (sink, sink):
                lb = ub = 1
            elif i == j:
                lb = ub = 0  # self-arcs are meaningless and poison big-M rows
            else:
                lb, ub = 0, 1
            variables.append(Variable(name=name, kind="binary", lb=lb, ub=ub))
            roles[name] = "arc"
    for i in range(n_nodes):
        for j in range(n_nodes):
            for k in inst.resource_types:
                name = flow_name(i, j, k)
                variables.append(Variable(name=name, kind="continuous", lb=0, ub=None))
                roles[name] = "flow"

    constraints = []
    for i in range(n_nodes):
        for j in range(n_nodes):
            y = arc_name(i, j)
            for g in range(gamma + 1):
                m = m_same(i, j)
                if i == j:
                    coeffs = [(y, -m)]  # start terms cancel on the diagonal
                else:
                    coeffs = [(start_name(j, g), 1), (start_name(i, g), -1), (y, -m)]
                constraints.append(LinearConstraint(
                    name=f"nom_{i}_{j}_{g}",
                    coeffs=tuple((n_, c) for n_, c in coeffs if c != 0),
                    sense=">=", rhs=nominal[i] - m))
            for g in range(gamma):
                m = m_cross(i, j)
                coeffs = [(start_name(j, g + 1), 1), (start_name(i, g), -1), (y, -m)]
                constraints.append(LinearConstraint(
                    name=f"dev_{i}_{j}_{g}",
                    coeffs=tuple((n_, c) for n_, c in coeffs if c != 0),
                    sense=">=", rhs=nominal[i] + dev[i] - m))
    for i in range(n_nodes):
        for j in range(n_nodes):
            for k in inst.resource_types:
                constraints.append(LinearConstraint(
                    name=f"cap_{i}_{j}_{k}",
                    coeffs=((flow_name(i, j, k), 1), (arc_name(i, j), -inst.capacity[k])),
                    sense="<=", rhs=0))
    for j in range(n_nodes):
        for k in inst.resource_types:
            rhs = _balance_rhs(inst, j, k, inbound=True, classical=classical_source_flow)
            constraints.append(LinearConstraint(
                name=f"fin_{j}_{k}",
                coeffs=tuple((flow_name(i, j, k), 1) for i in range(n_nodes)),
                sense="=", rhs=rhs))
    for i in range(n_nodes):
        for k in inst.resource_types:
            rhs = _balance_rhs(inst, i, k, inbound=False, classical=classical_source_flow)
            constraints.append(LinearConstraint(
                name=f"fout_{i}_{k}",
                coeffs=tuple((flow_name(i, j, k), 1) for j in range(n_nodes)),
                sense="=", rhs=rhs))
    if transitivity:
        for i in range(n_nodes):
            for j in range(n_nodes):
                if (i, j) == (sink, sink):
                    continue
                if i == j:
                    coeffs = ((arc_name(i, i), 2),)
                else:
                    coeffs = ((arc_name(i, j), 1), (arc_name(j, i), 1))
                constraints.append(LinearConstraint(
                    name=f"pair_{i}_{j}", coeffs=coeffs, sense="<=", rhs=1))
        for i in range(n_nodes):
            for l in range(n_nodes):
                for j in range(n_nodes):
                    terms = {}
                    for name, c in ((arc_name(i, l), 1), (arc_name(l, j), 1),
                                    (arc_name(i, j), -1)):
                        terms[name] = terms.get(name, 0) + c
                    coeffs = tuple((n, c) for n, c in terms.items() if c != 0)
                    constraints.append(LinearConstraint(
                        name=f"tri_{i}_{l}_{j}", coeffs=coeffs, sense="<=", rhs=1))

    return MilpModel(
        variables=tuple(variables),
        constraints=tuple(constraints),
        objective=((start_name(sink, gamma), 1),),
        objective_sense="min",
        roles=roles,
    )


def _balance_rhs(inst, node, k, *, inbound, classical):
    if not classical:
        return inst.requirement[node][k]
    if node == 0:
        return 0 if inbound else inst.capacity[k]
    if node == inst.sink:
        return inst.capacity[k] if inbound else 0
    return inst.requirement[node][k]


# ---------------------------------------------------------------------------
# Warm-start assignments


def warm_start_assignment(inst: ProjectInstance, gamma: int, warm: WarmStart,
                          classical_source_flow: bool = True) -> dict[str, int]:
    """Full variable assignment feasible for every build_compact variant.

    Arc binaries follow the schedule-derived selection (which is closed
    under transitivity), start values are the leveled recursion, and flows
    are routed greedily through the schedule in start order.
    """
    n_nodes = inst.n_nodes
    sink = inst.sink
    values: dict[str, int] = {}
    for i in range(n_nodes):
        for g in range(gamma + 1):
            values[start_name(i, g)] = warm.leveled_starts[i][g]
    active = set(extended_arcs(inst, warm.selection)) | {(sink, sink)}
    for i in range(n_nodes):
        for j in range(n_nodes):
            values[arc_name(i, j)] = 1 if (i, j) in active else 0
    flows = _greedy_flows(inst, warm, classical_source_flow)
    for i in range(n_nodes):
        for j in range(n_nodes):
            for k in inst.resource_types:
                values[flow_name(i, j, k)] = flows.get((i, j, k), 0)
    return values


def _greedy_flows(inst, warm, classical):
    """Hand resources from finished activities to starting ones.

    Eligibility (finish of the holder at or before the consumer's start) is
    exactly the schedule-derived arc relation, and schedule feasibility
    guarantees the finished pool always covers the next demand.
    """
    if not classical:
        return {}
    start = warm.schedule.start
    dur = warm.schedule.durations_used
    order = sorted(range(1, inst.n_nodes), key=lambda a: (start[a], a))
    flows = {}
    for k in inst.resource_types:
        parcels = [[0, inst.capacity[k]]]  # [holder, remaining], source first
        for j in order:
            need = inst.capacity[k] if j == inst.sink else inst.requirement[j][k]
            for parcel in parcels:
                if need == 0:
                    break
                holder, remaining = parcel
                if remaining == 0:
                    continue
                if holder != 0 and start[j] < start[holder] + dur[holder]:
                    continue
                take = min(need, remaining)
                parcel[1] -= take
                need -= take
                flows[(holder, j, k)] = flows.get((holder, j, k), 0) + take
            if need:  # pragma: no cover - schedule feasibility rules this out
                raise AssertionError(f"flow routing starved activity {j}")
            if j != inst.sink and inst.requirement[j][k]:
                parcels.append([j, inst.requirement[j][k]])
    return flows


def check_assignment(model: MilpModel, values, tol: float | Fraction = 0) -> list[str]:
    """Violated bounds/rows of the model under ``values`` (empty if feasible).

    With the default zero tolerance the check is exact over the rationals.
    """
    tol = Fraction(tol) if not isinstance(tol, float) else tol
    exact = not isinstance(tol, float)
    violations = []

    def num(x):
        return Fraction(x) if exact else float(x)

    for v in model.variables:
        val = num(values.get(v.name, 0))
        if val < num(v.lb) - tol:
            violations.append(f"{v.name}={val} below lower bound {v.lb}")
        if v.ub is not None and val > num(v.ub) + tol:
            violations.append(f"{v.name}={val} above upper bound {v.ub}")
        if v.kind in ("integer", "binary"):
            nearest = round(float(val))
            if abs(float(val) - nearest) > (tol if isinstance(tol, float) else 0):
                violations.append(f"{v.name}={val} not integral")
    for c in model.constraints:
        lhs = sum(num(values.get(name, 0)) * coef for name, coef in c.coeffs)
        rhs = num(c.rhs)
        if c.sense == "<=" and lhs > rhs + tol:
            violations.append(f"{c.name}: {lhs} <= {rhs} violated")
        elif c.sense == ">=" and lhs < rhs - tol:
            violations.append(f"{c.name}: {lhs} >= {rhs} violated")
        elif c.sense == "=" and abs(lhs - rhs) > tol:
            violations.append(f"{c.name}: {lhs} = {rhs} violated")
    return violations


def evaluate_objective(model: MilpModel, values):
    return sum(Fraction(values.get(name, 0)) * coef for name, coef in model.objective)


# ---------------------------------------------------------------------------
# LP text format


def export_lp(model: MilpModel) -> str:
    """Standard LP format with deterministic row and variable order."""
    out = []
    sense = "Minimize" if model.objective_sense == "min" else "Maximize"
    out.append(sense)
    out.append(f" obj: {_render_terms(model.objective)}")
    out.append("Subject To")
    for c in model.constraints:
        body = _render_terms(c.coeffs) if c.coeffs else f"0 {model.variables[0].name}"
        out.append(f" {c.name}: {body} {c.sense} {_num(c.rhs)}")
    out.append("Bounds")
    for v in model.variables:
        if v.kind == "binary" and v.lb == 0 and v.ub == 1:
            continue
        if v.ub is not None and v.lb == v.ub:
            out.append(f" {v.name} = {_num(v.lb)}")
        else:
            if v.lb != 0:
                out.append(f" {v.name} >= {_num(v.lb)}")
            if v.ub is not None:
                out.append(f" {v.name} <= {_num(v.ub)}")
    generals = [v.name for v in model.variables if v.kind == "integer"]
    if generals:
        out.append("Generals")
        out.extend(f" {name}" for name in generals)
    binaries = [v.name for v in model.variables if v.kind == "binary"]
    if binaries:
        out.append("Binaries")
        out.extend(f" {name}" for name in binaries)
    out.append("End")
    return "\n".join(out) + "\n"


def _render_terms(coeffs):
    parts = []
    for idx, (name, coef) in enumerate(coeffs):
        mag = abs(coef)
        term = name if mag == 1 else f"{_num(mag)} {name}"
        if idx == 0:
            parts.append(term if coef >= 0 else f"- {term}")
        else:
            parts.append(f"+ {term}" if coef >= 0 else f"- {term}")
    return " ".join(parts) if parts else "0"


def _num(x):
    if isinstance(x, Fraction) and x.denominator == 1:
        x = int(x)
    if isinstance(x, float) and x.is_integer():
        x = int(x)
    return str(x)


def read_lp(text: str) -> MilpModel:
    """Parse the dialect written by :func:`export_lp` back into a model.

    Used for round-trip checks and by the reference bridge; it is not a
    general LP reader.
    """
    lines = [ln.rstrip() for ln in text.splitlines()]
    section = None
    objective = []
    objective_sense = "min"
    constraints = []
    bounds = {}
    generals = set()
    binaries = set()
    names_seen = []
    names_set = set()

    def note(name):
        if name not in names_set:
            names_set.add(name)
            names_seen.append(name)

    for ln in lines:
        stripped = ln.strip()
        if not stripped or stripped.startswith("\\"):
            continue
        lowered = stripped.lower()
        if lowered in ("minimize", "maximize"):
            section = "objective"
            objective_sense = "min" if lowered == "minimize" else "max"
            continue
        if lowered == "subject to":
            section = "constraints"
            continue
        if lowered == "bounds":
            section = "bounds"
            continue
        if lowered == "generals":
            section = "generals"
            continue
        if lowered == "binaries":
            section = "binaries"
            continue
        if lowered == "end":
            break
        if section == "objective":
            label, terms = _split_labelled(stripped)
            del label
            objective = _parse_terms(terms, note)
        elif section == "constraints":
            label, rest = _split_labelled(stripped)
            terms, op, rhs = _split_relation(rest)
            constraints.append(LinearConstraint(
                name=label, coeffs=tuple(_parse_terms(terms, note)), sense=op,
                rhs=_parse_num(rhs)))
        elif section == "bounds":
            tokens = stripped.split()
            name = tokens[0]
            note(name)
            op, value = tokens[1], _parse_num(tokens[2])
            lo, hi = bounds.get(name, (0, None))
            if op == "=":
                lo = hi = value
            elif op == ">=":
                lo = value
            elif op == "<=":
                hi = value
            bounds[name] = (lo, hi)
        elif section == "generals":
            generals.add(stripped)
            note(stripped)
        elif section == "binaries":
            binaries.add(stripped)
            note(stripped)

    variables = []
    for name in names_seen:
        lo, hi = bounds.get(name, (0, None))
        if name in binaries:
            kind = "binary"
            if name not in bounds:
                lo, hi = 0, 1
        elif name in generals:
            kind = "integer"
        else:
            kind = "continuous"
        variables.append(Variable(name=name, kind=kind, lb=lo, ub=hi))
    return MilpModel(
        variables=tuple(variables),
        constraints=tuple(constraints),
        objective=tuple(objective),
        objective_sense=objective_sense,
    )


def _split_labelled(line):
    if ":" not in line:
        raise BridgeError(f"missing label in LP line {line!r}")
    label, rest = line.split(":", 1)
    return label.strip(), rest.strip()


def _split_relation(text):
    for op in ("<=", ">=", "="):
        if f" {op} " in text:
            lhs, rhs = text.rsplit(f" {op} ", 1)
            return lhs.strip(), op, rhs.strip()
    raise BridgeError(f"missing relation in LP constraint {text!r}")


def _parse_terms(text, note):
    tokens = text.split()
    terms = []
    sign = 1
    pending = None
    for tok in tokens:
        if tok == "+":
            sign = 1
        elif tok == "-":
            sign = -1
        elif _is_number(tok):
            pending = _parse_num(tok)
        else:
            coef = sign * (pending if pending is not None else 1)
            if coef != 0:
                terms.append((tok, coef))
            note(tok)
            sign = 1
            pending = None
    merged = {}
    order = []
    for name, coef in terms:
        if name not in merged:
            order.append(name)
            merged[name] = 0
        merged[name] += coef
    return [(name, merged[name]) for name in order if merged[name] != 0]


def _is_number(tok):
    try:
        float(tok)
        return True
    except ValueError:
        return False


def _parse_num(tok):
    f = float(tok)
    return int(f) if f.is_integer() else f


def coefficient_matrix(model: MilpModel):
    """Canonical (constraints, bounds) view for matrix-identity comparisons."""
    rows = {
        c.name: (frozenset((n, v) for n, v in c.coeffs if v != 0), c.sense, c.rhs)
        for c in model.constraints
    }
    cols = {v.name: (v.kind, v.lb, v.ub) for v in model.variables}
    return rows, cols


# ---------------------------------------------------------------------------
# Warm-start files and the external bridge


def export_warm_start(assignment, model: MilpModel | None = None) -> str:
    """MST-style lines ``<name> <value>``, one per variable, name order.

    When a model is given, its declaration order is used; otherwise names
    are sorted.
    """
    if model is not None:
        names = [v.name for v in model.variables if v.name in assignment]
    else:
        names = sorted(assignment)
    return "\n".join(f"{name} {_num(assignment[name])}" for name in names) + "\n"


@dataclass(frozen=True)
class SolveOutcome:
    status: str  # optimal | feasible | infeasible | timeout | error
    objective: float | None = None
    bound: float | None = None
    values: dict = field(default_factory=dict, hash=False)
    time_s: float = 0.0
    message: str = ""


def solve_external(model: MilpModel, warm=None, *, command: str,
                   time_limit_s: float | None = None,
                   workdir: str | None = None) -> SolveOutcome:
    """Run a solver process over the exported LP file.

    ``command`` is a template with ``{lp}``, ``{mst}``, ``{sol}`` and
    ``{time_s}`` placeholders.  The solver must exit 0 and write a solution
    file starting with a status word (optionally followed by a best bound)
    and one ``name value`` line per variable.  Reported solutions are
    re-validated against the model within 1e-6.
    """
    t0 = time.perf_counter()
    base = Path(workdir) if workdir else Path(tempfile.mkdtemp(prefix="robust_rcpsp_"))
    base.mkdir(parents=True, exist_ok=True)
    lp_path = base / "model.lp"
    mst_path = base / "warm.mst"
    sol_path = base / "solution.sol"
    lp_path.write_text(export_lp(model))
    if warm is not None:
        mst_path.write_text(export_warm_start(warm, model))
    cmd = command.format(lp=lp_path, mst=mst_path if warm is not None else "",
                         sol=sol_path, time_s=time_limit_s if time_limit_s else 0)
    try:
        proc = subprocess.run(
            shlex.split(cmd), capture_output=True, text=True,
            timeout=(time_limit_s + 60) if time_limit_s else None,
        )
    except subprocess.TimeoutExpired:
        return SolveOutcome(status="timeout", time_s=time.perf_counter() - t0,
                            message="solver process exceeded its grace period")
    except OSError as exc:
        return SolveOutcome(status="error", time_s=time.perf_counter() - t0,
                            message=f"failed to launch solver: {exc}")
    elapsed = time.perf_counter() - t0
    if proc.returncode != 0:
        return SolveOutcome(status="error", time_s=elapsed,
                            message=f"solver exited {proc.returncode}: {proc.stderr.strip()}")
    try:
        status, bound, values = _read_solution(sol_path)
    except BridgeError as exc:
        return SolveOutcome(status="error", time_s=elapsed, message=str(exc))
    if status in ("optimal", "feasible"):
        violations = check_assignment(model, values, tol=1e-6)
        if violations:
            return SolveOutcome(status="error", time_s=elapsed, values=values,
                                message="solution violates the model: "
                                        + "; ".join(violations[:5]))
        objective = float(evaluate_objective(model, values))
        return SolveOutcome(status=status, objective=objective, bound=bound,
                            values=values, time_s=elapsed)
    return SolveOutcome(status=status, bound=bound, values=values, time_s=elapsed,
                        message=proc.stderr.strip())


def _read_solution(path: Path):
    if not path.exists():
        raise BridgeError(f"solver wrote no solution file at {path}")
    lines = [ln.strip() for ln in path.read_text().splitlines() if ln.strip()]
    if not lines:
        raise BridgeError("solution file is empty")
    head = lines[0].split()
    status = head[0].lower()
    if status not in ("optimal", "feasible", "infeasible", "timeout", "error"):
        raise BridgeError(f"unknown solver status {status!r}")
    bound = float(head[1]) if len(head) > 1 else None
    values = {}
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise BridgeError(f"malformed solution line {ln!r}")
        try:
            values[parts[0]] = float(parts[1])
        except ValueError as exc:
            raise BridgeError(f"non-numeric value in line {ln!r}") from exc
    return status, bound, values

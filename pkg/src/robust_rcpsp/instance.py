"""Project instances with budgeted duration uncertainty.

Parses single-mode PSPLIB ``.sm`` files, attaches per-activity duration
deviations, and provides the canonical JSON serialization used by the CLI.
Activity ids are 0-based: PSPLIB job 1 becomes the dummy source 0 and job
n+2 the dummy sink n+1, so index conventions match the rest of the library.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace
from fractions import Fraction

from ._graph import closure_bitsets, topological_order
from .errors import ParseError


@dataclass(frozen=True)
class InstanceMeta:
    """Optional instance descriptors (PSPLIB difficulty parameters)."""

    name: str = ""
    network_complexity: float | None = None
    resource_factor: float | None = None
    resource_strength: float | None = None
    source_path: str = ""


@dataclass(frozen=True)
class Budget:
    """Uncertainty budget: how many activities may hit their worst case."""

    gamma: int

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError(f"budget must be nonnegative, got {self.gamma}")


@dataclass(frozen=True)
class ProjectInstance:
    """Immutable project: durations, deviations, resources, precedence.

    Activities are 0..n+1 where 0 and n+1 are zero-duration dummies with no
    resource usage.  Every activity is reachable from the source and reaches
    the sink; the precedence graph is acyclic.  Violations raise ValueError
    at construction time.
    """

    nominal_duration: tuple[int, ...]
    max_deviation: tuple[int, ...]
    requirement: tuple[tuple[int, ...], ...]
    capacity: tuple[int, ...]
    precedence: tuple[tuple[int, int], ...]
    meta: InstanceMeta = InstanceMeta()
    robustified: bool = False

    def __post_init__(self):
        object.__setattr__(self, "nominal_duration", tuple(int(d) for d in self.nominal_duration))
        object.__setattr__(self, "max_deviation", tuple(int(d) for d in self.max_deviation))
        object.__setattr__(self, "requirement", tuple(tuple(int(r) for r in row) for row in self.requirement))
        object.__setattr__(self, "capacity", tuple(int(c) for c in self.capacity))
        object.__setattr__(
            self, "precedence", tuple(sorted({(int(i), int(j)) for i, j in self.precedence}))
        )
        _validate(self)

    @property
    def n_nodes(self):
        return len(self.nominal_duration)

    @property
    def n_activities(self):
        """Number of non-dummy activities."""
        return self.n_nodes - 2

    @property
    def activities(self):
        return range(self.n_nodes)

    @property
    def resource_types(self):
        return range(len(self.capacity))

    @property
    def sink(self):
        return self.n_nodes - 1

    def worst_case_duration(self, i):
        return self.nominal_duration[i] + self.max_deviation[i]


def _validate(inst: ProjectInstance):
    n_nodes = inst.n_nodes
    if n_nodes < 2:
        raise ValueError("an instance needs at least the two dummy activities")
    for name, vec in (("nominal_duration", inst.nominal_duration),
                      ("max_deviation", inst.max_deviation)):
        if len(vec) != n_nodes:
            raise ValueError(f"{name} must have one entry per activity")
        if any(v < 0 for v in vec):
            raise ValueError(f"{name} entries must be nonnegative")
    if len(inst.requirement) != n_nodes:
        raise ValueError("requirement must have one row per activity")
    k = len(inst.capacity)
    for i, row in enumerate(inst.requirement):
        if len(row) != k:
            raise ValueError(f"requirement row {i} must have {k} entries")
        if any(r < 0 for r in row):
            raise ValueError(f"requirement row {i} has a negative entry")
        for kk, r in enumerate(row):
            if r > inst.capacity[kk]:
                raise ValueError(
                    f"activity {i} needs {r} of resource {kk} but only "
                    f"{inst.capacity[kk]} is available"
                )
    if any(c <= 0 for c in inst.capacity):
        raise ValueError("resource capacities must be positive")
    sink = inst.sink
    for dummy in (0, sink):
        if inst.nominal_duration[dummy] != 0 or inst.max_deviation[dummy] != 0:
            raise ValueError(f"dummy activity {dummy} must have zero duration")
        if any(inst.requirement[dummy]):
            raise ValueError(f"dummy activity {dummy} must not use resources")
    for i, j in inst.precedence:
        if not (0 <= i < n_nodes and 0 <= j < n_nodes):
            raise ValueError(f"arc ({i}, {j}) references an unknown activity")
    reach = closure_bitsets(n_nodes, inst.precedence)  # raises on cycles
    for v in range(1, n_nodes):
        if not (reach[0] >> v) & 1:
            raise ValueError(f"activity {v} is not reachable from the source")
    for v in range(n_nodes - 1):
        if not (reach[v] >> sink) & 1:
            raise ValueError(f"activity {v} does not reach the sink")


def robustify(inst: ProjectInstance) -> ProjectInstance:
    """Attach duration deviations: half the nominal duration, rounded up.

    Dummies keep a zero deviation.  May be applied only once per instance.
    """
    if inst.robustified:
        raise ValueError("instance already robustified")
    dev = [0] * inst.n_nodes
    for i in range(1, inst.sink):
        dev[i] = -(-inst.nominal_duration[i] // 2)
    return replace(inst, max_deviation=tuple(dev), robustified=True)


def scenario_durations(inst: ProjectInstance, delta) -> tuple[Fraction, ...]:
    """Durations for a delay scenario: nominal + delta * deviation, exact."""
    delta = [Fraction(d) for d in delta]
    if len(delta) != inst.n_nodes:
        raise ValueError(f"delta must have {inst.n_nodes} entries")
    if any(d < 0 or d > 1 for d in delta):
        raise ValueError("delta entries must lie in [0, 1]")
    return tuple(
        Fraction(inst.nominal_duration[i]) + delta[i] * inst.max_deviation[i]
        for i in range(inst.n_nodes)
    )


# ---------------------------------------------------------------------------
# PSPLIB .sm parsing


def parse_psplib(text: str, *, name: str = "", source_path: str = "") -> ProjectInstance:
    """Parse a single-mode PSPLIB ``.sm`` file into a ProjectInstance.

    PSPLIB job numbers are 1-based; they are shifted down by one so the
    dummy source is activity 0.  Deviations are left at zero (see
    :func:`robustify`).  Raises ParseError naming the offending line and
    section for malformed input.
    """
    lines = text.splitlines()
    n_jobs = _header_int(lines, "jobs", "header")
    n_res = _header_int(lines, "- renewable", "header")
    if n_jobs < 2:
        raise ParseError(f"need at least 2 jobs, got {n_jobs}", section="header")

    prec_rows = _table_rows(lines, "PRECEDENCE RELATIONS", n_jobs)
    req_rows = _table_rows(lines, "REQUESTS/DURATIONS", n_jobs)
    avail = _availability_row(lines, n_res)

    successors = {}
    for lineno, ints in prec_rows:
        if len(ints) < 3:
            raise ParseError("expected jobnr, #modes, #successors",
                             line=lineno, section="PRECEDENCE RELATIONS")
        job, modes, n_succ = ints[0], ints[1], ints[2]
        succ = ints[3:]
        if modes != 1:
            raise ParseError(f"job {job} has {modes} modes; only single-mode files are supported",
                             line=lineno, section="PRECEDENCE RELATIONS")
        if len(succ) != n_succ:
            raise ParseError(f"job {job} announces {n_succ} successors but lists {len(succ)}",
                             line=lineno, section="PRECEDENCE RELATIONS")
        if not 1 <= job <= n_jobs or job in successors:
            raise ParseError(f"unexpected job number {job}",
                             line=lineno, section="PRECEDENCE RELATIONS")
        for s in succ:
            if not 1 <= s <= n_jobs:
                raise ParseError(f"job {job} references unknown successor {s}",
                                 line=lineno, section="PRECEDENCE RELATIONS")
        successors[job] = succ
    if len(successors) != n_jobs:
        raise ParseError(f"precedence table lists {len(successors)} of {n_jobs} jobs",
                         section="PRECEDENCE RELATIONS")

    durations = [None] * n_jobs
    requirements = [None] * n_jobs
    for lineno, ints in req_rows:
        if len(ints) != 3 + n_res:
            raise ParseError(f"expected jobnr, mode, duration and {n_res} requests",
                             line=lineno, section="REQUESTS/DURATIONS")
        job, mode, dur = ints[0], ints[1], ints[2]
        if not 1 <= job <= n_jobs or durations[job - 1] is not None:
            raise ParseError(f"unexpected job number {job}",
                             line=lineno, section="REQUESTS/DURATIONS")
        if mode != 1:
            raise ParseError(f"job {job} uses mode {mode}; only single-mode files are supported",
                             line=lineno, section="REQUESTS/DURATIONS")
        durations[job - 1] = dur
        requirements[job - 1] = tuple(ints[3:])
    if any(d is None for d in durations):
        raise ParseError("requests/durations table is incomplete",
                         section="REQUESTS/DURATIONS")

    arcs = []
    for job, succ in successors.items():
        for s in succ:
            arcs.append((job - 1, s - 1))
    try:
        topological_order(n_jobs, arcs)
    except Exception as exc:
        raise ParseError(f"cyclic precedence relations: {exc}",
                         section="PRECEDENCE RELATIONS") from exc

    meta = InstanceMeta(
        name=name or (os.path.splitext(os.path.basename(source_path))[0] if source_path else ""),
        source_path=source_path,
    )
    try:
        return ProjectInstance(
            nominal_duration=tuple(durations),
            max_deviation=(0,) * n_jobs,
            requirement=tuple(requirements),
            capacity=tuple(avail),
            precedence=tuple(arcs),
            meta=meta,
        )
    except ValueError as exc:
        raise ParseError(str(exc), section="validation") from exc


def _header_int(lines, key, section):
    for idx, line in enumerate(lines):
        if key in line and ":" in line:
            value = line.split(":", 1)[1].split()
            if not value:
                raise ParseError(f"missing value after {key!r}", line=idx + 1, section=section)
            try:
                return int(value[0])
            except ValueError:
                raise ParseError(f"non-integer value for {key!r}: {value[0]!r}",
                                 line=idx + 1, section=section) from None
    raise ParseError(f"missing header entry {key!r}", section=section)


def _section_start(lines, title):
    for idx, line in enumerate(lines):
        if line.strip().startswith(title):
            return idx
    raise ParseError(f"missing section header {title!r}", section=title)


def _table_rows(lines, title, n_rows):
    """Integer rows of a PSPLIB table, skipping column headers and rules."""
    start = _section_start(lines, title)
    rows = []
    idx = start + 1
    while idx < len(lines) and len(rows) < n_rows:
        line = lines[idx]
        stripped = line.strip()
        idx += 1
        if not stripped or stripped.startswith("*") or stripped.startswith("-"):
            if stripped.startswith("*") and rows:
                break
            continue
        tokens = stripped.split()
        if not tokens[0].lstrip("-").isdigit():
            continue  # column header line
        ints = []
        for tok in tokens:
            try:
                ints.append(int(tok))
            except ValueError:
                raise ParseError(f"non-integer field {tok!r}", line=idx, section=title) from None
        rows.append((idx, ints))
    if len(rows) < n_rows:
        raise ParseError(f"expected {n_rows} rows, found {len(rows)}", section=title)
    return rows


def _availability_row(lines, n_res):
    title = "RESOURCEAVAILABILITIES"
    start = _section_start(lines, title)
    for idx in range(start + 1, len(lines)):
        stripped = lines[idx].strip()
        if not stripped or stripped.startswith("*"):
            continue
        tokens = stripped.split()
        if all(tok.lstrip("-").isdigit() for tok in tokens):
            if len(tokens) != n_res:
                raise ParseError(f"expected {n_res} capacities, found {len(tokens)}",
                                 line=idx + 1, section=title)
            return [int(t) for t in tokens]
    raise ParseError("missing capacity row", section=title)


# ---------------------------------------------------------------------------
# Canonical JSON serialization


def to_json(inst: ProjectInstance) -> str:
    """Canonical JSON form; integers only except the meta decimals."""
    meta = {
        "name": inst.meta.name,
        "network_complexity": inst.meta.network_complexity,
        "resource_factor": inst.meta.resource_factor,
        "resource_strength": inst.meta.resource_strength,
        "source_path": inst.meta.source_path,
    }
    payload = {
        "activities": list(inst.activities),
        "nominal": list(inst.nominal_duration),
        "deviation": list(inst.max_deviation),
        "requirements": [list(row) for row in inst.requirement],
        "capacities": list(inst.capacity),
        "arcs": [list(arc) for arc in inst.precedence],
        "meta": meta,
    }
    return json.dumps(payload, separators=(", ", ": "))


def from_json(text: str) -> ProjectInstance:
    """Inverse of :func:`to_json`.

    The robustified flag is not serialized; it is inferred from the presence
    of nonzero deviations, which is faithful for any instance with at least
    one positive nominal duration.
    """
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}", section="json") from exc
    try:
        meta_raw = payload.get("meta", {})
        meta = InstanceMeta(
            name=meta_raw.get("name", ""),
            network_complexity=meta_raw.get("network_complexity"),
            resource_factor=meta_raw.get("resource_factor"),
            resource_strength=meta_raw.get("resource_strength"),
            source_path=meta_raw.get("source_path", ""),
        )
        deviation = tuple(payload["deviation"])
        return ProjectInstance(
            nominal_duration=tuple(payload["nominal"]),
            max_deviation=deviation,
            requirement=tuple(tuple(row) for row in payload["requirements"]),
            capacity=tuple(payload["capacities"]),
            precedence=tuple((i, j) for i, j in payload["arcs"]),
            meta=meta,
            robustified=any(d > 0 for d in deviation),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"invalid instance payload: {exc}", section="json") from exc

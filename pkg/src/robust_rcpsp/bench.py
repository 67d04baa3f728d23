"""Batch experiment harness: solve variants over an instance directory and
derive Dolan-More performance profiles and per-set summary tables.

Variants: ``bnb`` (self-contained exact solver) and the four compact-model
variants ``basic``, ``trans``, ``warm``, ``warm+trans``; the model variants
need an external solver bridge and are recorded as skipped without one.
The ``warm`` variants supply the heuristic solution as an MST file and use
it to tighten the big-M values; all model variants use integer starts.
"""
from __future__ import annotations

import csv
import io
import json
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import bnb as bnb_mod
from . import milp
from .errors import RobustRcpspError
from .heuristics import time_windows, warm_start
from .instance import parse_psplib, robustify

MILP_VARIANTS = ("basic", "trans", "warm", "warm+trans")
ALL_VARIANTS = MILP_VARIANTS + ("bnb",)
RESULTS_HEADER = ("instance", "gamma", "variant", "status", "objective",
                  "bound", "gap_percent", "time_s")


@dataclass(frozen=True)
class BenchConfig:
    instances_dir: str
    gammas: tuple[int, ...] = (3, 5, 7)
    variants: tuple[str, ...] = ("bnb",)
    time_limit_s: float | None = None
    bridge_cmd: str | None = None
    workers: int = 1

    @classmethod
    def from_json(cls, text: str) -> "BenchConfig":
        raw = json.loads(text)
        return cls(
            instances_dir=raw["instances_dir"],
            gammas=tuple(int(g) for g in raw.get("gammas", (3, 5, 7))),
            variants=tuple(raw.get("variants", ("bnb",))),
            time_limit_s=raw.get("time_limit_s"),
            bridge_cmd=raw.get("bridge_cmd"),
            workers=int(raw.get("workers", 1)),
        )


@dataclass(frozen=True)
class ResultRecord:
    instance: str
    gamma: int
    variant: str
    status: str
    objective: float | None
    bound: float | None
    gap_percent: float | None
    time_s: float


@dataclass(frozen=True)
class PerformanceProfile:
    taus: tuple[float, ...]
    rho: dict  # variant -> tuple of fractions, aligned with taus
    failure_ratio: float


def run_experiment(config: BenchConfig) -> list[ResultRecord]:
    """Solve every (instance, gamma, variant) combination of the config."""
    for v in config.variants:
        if v not in ALL_VARIANTS:
            raise ValueError(f"unknown variant {v!r}; expected one of {ALL_VARIANTS}")
    files = sorted(Path(config.instances_dir).glob("*.sm"))
    tasks = [(path, gamma, variant)
             for path in files for gamma in config.gammas for variant in config.variants]
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(lambda t: _solve_one(config, *t), tasks))
    else:
        records = [_solve_one(config, *t) for t in tasks]
    records.sort(key=lambda r: (r.instance, r.gamma, r.variant))
    return records


def _solve_one(config: BenchConfig, path: Path, gamma: int, variant: str) -> ResultRecord:
    name = path.stem
    t0 = time.perf_counter()
    try:
        inst = robustify(parse_psplib(path.read_text(), source_path=str(path)))
    except (OSError, RobustRcpspError, ValueError):
        return ResultRecord(name, gamma, variant, "error", None, None, None,
                            time.perf_counter() - t0)
    if variant == "bnb":
        res = bnb_mod.solve_exact(inst, gamma, time_limit_s=config.time_limit_s)
        status = "optimal" if res.status == "optimal" else "feasible"
        gap = bnb_mod.optimality_gap(res)
        return ResultRecord(name, gamma, variant, status, float(res.value),
                            float(res.best_bound) if res.best_bound is not None else None,
                            gap, res.time_s)
    if config.bridge_cmd is None:
        return ResultRecord(name, gamma, variant, "skipped", None, None, None, 0.0)
    try:
        model, assignment = _build_variant(inst, gamma, variant)
    except RobustRcpspError:
        return ResultRecord(name, gamma, variant, "error", None, None, None,
                            time.perf_counter() - t0)
    outcome = milp.solve_external(model, assignment, command=config.bridge_cmd,
                                  time_limit_s=config.time_limit_s)
    gap = None
    if outcome.status == "optimal":
        gap = 0.0
    elif outcome.objective is not None and outcome.bound is not None and outcome.objective > 0:
        gap = max(0.0, 100.0 * (outcome.objective - outcome.bound) / outcome.objective)
    return ResultRecord(name, gamma, variant, outcome.status, outcome.objective,
                        outcome.bound, gap, outcome.time_s)


def _build_variant(inst, gamma, variant):
    transitivity = variant in ("trans", "warm+trans")
    warm_started = variant in ("warm", "warm+trans")
    tighten = None
    assignment = None
    if warm_started:
        warm = warm_start(inst, gamma)
        tighten = time_windows(inst, warm.selection, gamma, warm.upper_bound)
        model = milp.build_compact(inst, gamma, transitivity=transitivity,
                                   tighten=tighten, integral_starts=True)
        assignment = milp.warm_start_assignment(inst, gamma, warm)
    else:
        model = milp.build_compact(inst, gamma, transitivity=transitivity,
                                   integral_starts=True)
    return model, assignment


# ---------------------------------------------------------------------------
# Performance profiles


def performance_profile(records, variants) -> PerformanceProfile:
    """Dolan-More profile over solve-to-optimality times.

    The performance ratio of a variant on an instance is its time divided by
    the best time over the compared variants; unsolved pairs get the failure
    ratio P, set to twice the largest finite ratio.
    """
    keys = sorted({(r.instance, r.gamma) for r in records if r.variant in variants})
    table = {}
    for r in records:
        if r.variant not in variants:
            continue
        slot = ((r.instance, r.gamma), r.variant)
        if slot in table:
            raise ValueError(f"duplicate record for {slot}")
        table[slot] = r
    times = {}
    for key in keys:
        solved = {
            v: table[(key, v)].time_s for v in variants
            if (key, v) in table and table[(key, v)].status == "optimal"
        }
        times[key] = solved
    ratios = {}
    finite = []
    for key in keys:
        solved = times[key]
        best = min(solved.values()) if solved else None
        for v in variants:
            if v in solved:
                ratio = solved[v] / max(best, 1e-9)
                ratios[(key, v)] = max(1.0, ratio)
                finite.append(ratios[(key, v)])
            else:
                ratios[(key, v)] = None
    failure_ratio = 2.0 * max(finite) if finite else 2.0
    for slot, value in ratios.items():
        if value is None:
            ratios[slot] = failure_ratio
    taus = tuple(sorted({v for v in finite}))
    n = len(keys)
    rho = {
        v: tuple(sum(1 for key in keys if ratios[(key, v)] <= tau) / n for tau in taus)
        for v in variants
    }
    return PerformanceProfile(taus=taus, rho=rho, failure_ratio=failure_ratio)


def instance_set_label(name: str) -> str:
    """PSPLIB set label (J301..J3048) from a file stem like j3012_7."""
    m = re.match(r"[jJ]30(\d+)_\d+$", name)
    return f"J30{m.group(1)}" if m else name


def summarize(records) -> list[dict]:
    """Per (set, variant): mean time over solved, mean gap over
    unsolved-but-feasible, and the solved count."""
    groups = {}
    for r in records:
        groups.setdefault((instance_set_label(r.instance), r.variant), []).append(r)
    rows = []
    for (label, variant), recs in sorted(groups.items(), key=lambda kv: (_set_key(kv[0][0]), kv[0][1])):
        solved = [r for r in recs if r.status == "optimal"]
        feas = [r for r in recs if r.status != "optimal" and r.gap_percent is not None]
        rows.append({
            "set": label,
            "variant": variant,
            "time": round(sum(r.time_s for r in solved) / len(solved), 4) if solved else None,
            "gap": round(sum(r.gap_percent for r in feas) / len(feas), 4) if feas else None,
            "solved": len(solved),
        })
    return rows


def _set_key(label):
    m = re.match(r"J30(\d+)$", label)
    return (0, int(m.group(1))) if m else (1, label)


# ---------------------------------------------------------------------------
# CSV / SVG output


def results_to_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(RESULTS_HEADER)
    for r in records:
        writer.writerow([
            r.instance, r.gamma, r.variant, r.status,
            _fmt(r.objective), _fmt(r.bound), _fmt(r.gap_percent), f"{r.time_s:.6f}",
        ])
    return buf.getvalue()


def records_from_csv(text: str) -> list[ResultRecord]:
    reader = csv.DictReader(io.StringIO(text))
    records = []
    for row in reader:
        records.append(ResultRecord(
            instance=row["instance"], gamma=int(row["gamma"]), variant=row["variant"],
            status=row["status"],
            objective=float(row["objective"]) if row["objective"] else None,
            bound=float(row["bound"]) if row["bound"] else None,
            gap_percent=float(row["gap_percent"]) if row["gap_percent"] else None,
            time_s=float(row["time_s"]),
        ))
    return records


def profile_to_csv(profile: PerformanceProfile, variants=None) -> str:
    variants = list(variants) if variants else sorted(profile.rho)
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["tau"] + [f"rho_{v}" for v in variants])
    for idx, tau in enumerate(profile.taus):
        writer.writerow([f"{tau:.6f}"] + [f"{profile.rho[v][idx]:.6f}" for v in variants])
    return buf.getvalue()


def summary_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["set", "variant", "time", "gap", "solved"])
    for row in rows:
        writer.writerow([row["set"], row["variant"], _fmt(row["time"]),
                         _fmt(row["gap"]), row["solved"]])
    return buf.getvalue()


def _fmt(value):
    if value is None:
        return ""
    return f"{value:.6g}"


_COLORS = ("#1b6ca8", "#c0392b", "#1e8449", "#8e44ad", "#b7950b")


def profile_svg(profile: PerformanceProfile, variants=None,
                width: int = 640, height: int = 420) -> str:
    """Step-function line chart of the profile, no plotting dependency."""
    variants = list(variants) if variants else sorted(profile.rho)
    left, right, top, bottom = 60, 20, 30, 50
    plot_w = width - left - right
    plot_h = height - top - bottom
    taus = profile.taus or (1.0,)
    t_min, t_max = 1.0, max(taus[-1], 1.0 + 1e-9)

    def x(tau):
        if t_max == t_min:
            return left
        return left + plot_w * (tau - t_min) / (t_max - t_min)

    def y(frac):
        return top + plot_h * (1.0 - frac)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" stroke="black"/>',
        f'<line x1="{left}" y1="{top + plot_h}" x2="{left + plot_w}" y2="{top + plot_h}" '
        f'stroke="black"/>',
        f'<text x="{left + plot_w / 2:.1f}" y="{height - 12}" text-anchor="middle" '
        f'font-size="13">performance ratio tau</text>',
        f'<text x="16" y="{top + plot_h / 2:.1f}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 16 {top + plot_h / 2:.1f})">fraction solved</text>',
    ]
    for frac in (0.0, 0.5, 1.0):
        parts.append(f'<text x="{left - 8}" y="{y(frac) + 4:.1f}" text-anchor="end" '
                     f'font-size="11">{frac:.1f}</text>')
    for idx, variant in enumerate(variants):
        color = _COLORS[idx % len(_COLORS)]
        pts = []
        prev = 0.0
        for tau, frac in zip(profile.taus, profile.rho[variant]):
            pts.append((x(tau), y(prev)))
            pts.append((x(tau), y(frac)))
            prev = frac
        pts.append((left + plot_w, y(prev)))
        path = " ".join(f"{px:.1f},{py:.1f}" for px, py in pts)
        parts.append(f'<polyline points="{path}" fill="none" stroke="{color}" '
                     f'stroke-width="1.6"/>')
        parts.append(f'<text x="{left + 10}" y="{top + 14 + 14 * idx}" font-size="12" '
                     f'fill="{color}">{variant}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_outputs(records, out_dir, variants=None) -> dict:
    """Write results.csv, profile.csv, profile.svg and summary.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    variants = list(variants) if variants else sorted({r.variant for r in records})
    paths = {
        "results": out / "results.csv",
        "profile": out / "profile.csv",
        "svg": out / "profile.svg",
        "summary": out / "summary.csv",
    }
    paths["results"].write_text(results_to_csv(records))
    profiled = [r for r in records if r.status != "skipped"]
    profile = performance_profile(profiled, variants) if profiled else PerformanceProfile((), {}, 2.0)
    paths["profile"].write_text(profile_to_csv(profile, variants))
    paths["svg"].write_text(profile_svg(profile, variants))
    paths["summary"].write_text(summary_to_csv(summarize(records)))
    return paths

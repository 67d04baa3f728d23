"""Reference external-solver bridge backed by scipy's HiGHS MILP.

Usage: ``python -m robust_rcpsp.highs_bridge MODEL.lp OUT.sol [TIME_S] [WARM.mst]``

Reads the LP dialect written by :mod:`robust_rcpsp.milp`, solves it with
``scipy.optimize.milp``, and writes the solution-file contract expected by
``solve_external``: a status line (status word plus optional best bound)
followed by one ``name value`` line per variable.  A warm-start file is
accepted for interface compatibility but HiGHS via scipy cannot consume it.
"""
from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, milp as scipy_milp

from .milp import read_lp

_KIND_INTEGRALITY = {"continuous": 0, "integer": 1, "binary": 1}


def solve_lp_file(lp_path, sol_path, time_limit_s=None):
    model = read_lp(Path(lp_path).read_text())
    names = [v.name for v in model.variables]
    index = {name: i for i, name in enumerate(names)}
    n = len(names)

    c = np.zeros(n)
    for name, coef in model.objective:
        c[index[name]] += coef
    if model.objective_sense == "max":
        c = -c

    lb = np.array([-np.inf if v.lb is None else float(v.lb) for v in model.variables])
    ub = np.array([np.inf if v.ub is None else float(v.ub) for v in model.variables])
    integrality = np.array([_KIND_INTEGRALITY[v.kind] for v in model.variables])

    rows, cols, vals = [], [], []
    c_lb, c_ub = [], []
    for r, constraint in enumerate(model.constraints):
        for name, coef in constraint.coeffs:
            rows.append(r)
            cols.append(index[name])
            vals.append(float(coef))
        rhs = float(constraint.rhs)
        if constraint.sense == "<=":
            c_lb.append(-np.inf)
            c_ub.append(rhs)
        elif constraint.sense == ">=":
            c_lb.append(rhs)
            c_ub.append(np.inf)
        else:
            c_lb.append(rhs)
            c_ub.append(rhs)
    a = sparse.csr_matrix((vals, (rows, cols)), shape=(len(model.constraints), n))

    options = {}
    if time_limit_s:
        options["time_limit"] = float(time_limit_s)
    res = scipy_milp(
        c=c,
        constraints=LinearConstraint(a, np.array(c_lb), np.array(c_ub)),
        integrality=integrality,
        bounds=Bounds(lb, ub),
        options=options,
    )

    if res.status == 0:
        status = "optimal"
    elif res.status == 1 and res.x is not None:
        status = "feasible"
    elif res.status == 1:
        status = "timeout"
    elif res.status == 2:
        status = "infeasible"
    else:
        status = "error"

    lines = []
    bound = getattr(res, "mip_dual_bound", None)
    lines.append(f"{status} {bound}" if bound is not None else status)
    if res.x is not None:
        for name, value in zip(names, res.x):
            lines.append(f"{name} {_clean(value)}")
    Path(sol_path).write_text("\n".join(lines) + "\n")
    return status


def _clean(value):
    rounded = round(value)
    if abs(value - rounded) < 1e-9:
        return str(int(rounded))
    return f"{value:.12g}"


def main(argv):
    if len(argv) < 2:
        print(__doc__, file=sys.stderr)
        return 2
    lp_path, sol_path = argv[0], argv[1]
    time_limit = float(argv[2]) if len(argv) > 2 and float(argv[2]) > 0 else None
    solve_lp_file(lp_path, sol_path, time_limit)
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))

"""MTZ mixed-integer models of the NC and MC route problems in LP file format.

Node ``1`` is the entry; nodes ``2..n`` follow ``RouteInstance.nodes``.
Variable names are fixed: ``x_i_j``, ``u_i``, ``t_i``, ``y_i_k`` (NC),
``z_i_k``, ``delta_i_k``, ``s_i_k`` (MC), with ``k`` counting node ``i``'s
blocked windows from 1.

Time-linking constraints are written for arcs into nodes ``2..n`` only: the
arc back into the entry would otherwise force ``t_1 = t_last + ...``, which
contradicts ``t_1 = t0``.  The absolute value ``z = |t - d| / Eb`` of the MC
model is linearised with one sign binary ``s`` per window.
"""

from __future__ import annotations

import os
import tempfile

from .exact import RouteInstance, Variant


def _num(v: float) -> str:
    v = float(v)
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _expr(terms) -> str:
    parts = []
    for coef, var in terms:
        if coef == 0:
            continue
        mag = abs(coef)
        body = var if mag == 1 else f"{_num(mag)} {var}"
        if parts:
            parts.append(("- " if coef < 0 else "+ ") + body)
        else:
            parts.append(("- " if coef < 0 else "") + body)
    return " ".join(parts) if parts else "0"


def default_big_m(inst: RouteInstance, horizon: float = 180.0) -> float:
    return 10.0 * horizon


def required_big_m(inst: RouteInstance) -> float:
    """Smallest M that keeps every big-M constraint of the model non-binding when switched off."""
    C = inst.local_matrix()
    n = len(C)
    longest = sum(max(row) for row in C)
    t_max = inst.t0 + n * inst.Eb + longest / inst.Ev
    d_max = max((d for node in inst.nodes[1:] for d in inst.windows.at(node)), default=inst.t0)
    d_min = min((d for node in inst.nodes[1:] for d in inst.windows.at(node)), default=inst.t0)
    span = max(t_max, d_max + inst.Eb) - min(inst.t0, d_min)
    return max(t_max, d_max + inst.Eb, span + inst.Eb + longest / inst.Ev,
               2 * span / inst.Eb + 1) + 1.0


def export_milp(inst: RouteInstance, variant: Variant | str, big_m: float | None = None) -> str:
    variant = Variant(variant)
    if variant is Variant.TSP:
        raise ValueError("LP export covers the NC and MC models")
    M = big_m if big_m is not None else (inst.big_m if inst.big_m is not None else default_big_m(inst))
    need = required_big_m(inst)
    if M < need:
        raise ValueError(f"big-M {M} too small for this instance; need at least {need:.6g}")

    C = inst.local_matrix()
    n = len(C)
    Eb, Ev = inst.Eb, inst.Ev
    ids = range(1, n + 1)
    arcs = [(i, j) for i in ids for j in ids if i != j]
    windows = {i: inst.windows.at(inst.nodes[i - 1]) for i in range(2, n + 1)}
    pairs = [(i, k, d) for i, ds in windows.items() for k, d in enumerate(ds, start=1)]

    lines = [f"\\ {variant.value.upper()} route model, {n - 1} nodes plus entry",
             f"\\ t0 = {_num(inst.t0)}, E[v] = {_num(Ev)}, E[b] = {_num(Eb)}, M = {_num(M)}"]
    obj = [(C[i - 1][j - 1], f"x_{i}_{j}") for i, j in arcs]
    if variant is Variant.MC:
        obj += [(inst.penalty, f"delta_{i}_{k}") for i, k, _ in pairs]
    lines += ["Minimize", f" obj: {_expr(obj)}", "Subject To"]

    rows = []
    for j in ids:
        rows.append((f"in_{j}", [(1, f"x_{i}_{j}") for i in ids if i != j], "=", 1))
    for i in ids:
        rows.append((f"out_{i}", [(1, f"x_{i}_{j}") for j in ids if j != i], "=", 1))
    for i, j in arcs:
        if j >= 2:
            rows.append((f"mtz_{i}_{j}", [(1, f"u_{i}"), (-1, f"u_{j}"), (n, f"x_{i}_{j}")], "<=", n - 1))
    for i, j in arcs:
        if j < 2:
            continue
        lag = Eb + C[i - 1][j - 1] / Ev
        rows.append((f"tup_{i}_{j}", [(1, f"t_{j}"), (-1, f"t_{i}"), (M, f"x_{i}_{j}")], "<=", M + lag))
        rows.append((f"tlo_{i}_{j}", [(1, f"t_{j}"), (-1, f"t_{i}"), (-M, f"x_{i}_{j}")], ">=", lag - M))
    if variant is Variant.NC:
        for i, k, d in pairs:
            rows.append((f"before_{i}_{k}", [(1, f"t_{i}"), (-M, f"y_{i}_{k}")], "<=", d - Eb))
            rows.append((f"after_{i}_{k}", [(1, f"t_{i}"), (-M, f"y_{i}_{k}")], ">=", d + Eb - M))
    else:
        for i, k, d in pairs:
            z, s, dl = f"z_{i}_{k}", f"s_{i}_{k}", f"delta_{i}_{k}"
            rows.append((f"absp_{i}_{k}", [(1, z), (-1 / Eb, f"t_{i}")], ">=", -d / Eb))
            rows.append((f"absn_{i}_{k}", [(1, z), (1 / Eb, f"t_{i}")], ">=", d / Eb))
            rows.append((f"absup_{i}_{k}", [(1, z), (-1 / Eb, f"t_{i}"), (-M, s)], "<=", -d / Eb))
            rows.append((f"absun_{i}_{k}", [(1, z), (1 / Eb, f"t_{i}"), (M, s)], "<=", d / Eb + M))
            rows.append((f"hit_{i}_{k}", [(M, dl), (1, z)], ">=", 1))
            rows.append((f"miss_{i}_{k}", [(1, z), (M, dl)], "<=", 1 + M))
    for name, terms, sense, rhs in rows:
        lines.append(f" {name}: {_expr(terms)} {sense} {_num(rhs)}")

    lines.append("Bounds")
    lines.append(" u_1 = 1")
    for i in range(2, n + 1):
        lines.append(f" 2 <= u_{i} <= {n}")
    lines.append(f" t_1 = {_num(inst.t0)}")
    for i in range(2, n + 1):
        lines.append(f" t_{i} >= 0")
    if variant is Variant.MC:
        for i, k, _ in pairs:
            lines.append(f" z_{i}_{k} >= 0")

    lines.append("General")
    lines.append(" " + " ".join(f"u_{i}" for i in ids))
    binaries = [f"x_{i}_{j}" for i, j in arcs]
    if variant is Variant.NC:
        binaries += [f"y_{i}_{k}" for i, k, _ in pairs]
    else:
        binaries += [f"delta_{i}_{k}" for i, k, _ in pairs] + [f"s_{i}_{k}" for i, k, _ in pairs]
    lines.append("Binary")
    for start in range(0, len(binaries), 8):
        lines.append(" " + " ".join(binaries[start:start + 8]))
    lines.append("End")
    return "\n".join(lines) + "\n"


def solve_lp_text(text: str, time_limit: float = 60.0) -> tuple[str, float | None]:
    """Solve an LP-format model with HiGHS; returns (status, objective or None)."""
    import highspy

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("time_limit", float(time_limit))
    h.setOptionValue("mip_rel_gap", 0.0)
    h.setOptionValue("mip_feasibility_tolerance", 1e-9)
    h.setOptionValue("primal_feasibility_tolerance", 1e-9)
    fd, path = tempfile.mkstemp(suffix=".lp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        h.readModel(path)
        h.run()
    finally:
        os.unlink(path)
    status = h.modelStatusToString(h.getModelStatus())
    if h.getModelStatus() == highspy.HighsModelStatus.kOptimal:
        return status, h.getInfo().objective_function_value
    return status, None

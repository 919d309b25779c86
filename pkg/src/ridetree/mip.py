"""Mixed-integer model of one rescheduling instance.

Nodes: 0 is the vehicle, ``1..k`` the dropoffs of onboard trips, ``k+1..k+n``
the pickups of waiting trips and ``k+n+1..k+2n`` their dropoffs, so pickup
``i`` matches dropoff ``i+n``. Variables are binary successors ``y_i_j``,
arrival times ``B_i`` and ride times ``L_i``. Timing rows use the
linearization ``B_j >= B_i + d_ij - M_ij (1 - y_ij)`` with the tightest valid
``M_ij = max(0, l_i + d_ij - e_j)``.

No solver is bundled. ``solve_exhaustive`` walks every successor assignment
that forms a path from node 0 and keeps the cheapest one the rows accept.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .roadnet import INF
from .trips import Distance, Kind, ReschedulingInstance, Waypoint

SELF_COST = 1  # positive d_ii so y_ii = 1 breaks its own timing row


class ModelError(ValueError):
    pass


@dataclass
class Row:
    name: str
    coeffs: dict[str, int]
    sense: str  # "<=", ">=" or "="
    rhs: int

    def holds(self, lhs: float, tol: float = 1e-6) -> bool:
        if self.sense == "<=":
            return lhs <= self.rhs + tol
        if self.sense == ">=":
            return lhs >= self.rhs - tol
        return abs(lhs - self.rhs) <= tol


@dataclass
class LinearProgram:
    objective: dict[str, int] = field(default_factory=dict)
    rows: list[Row] = field(default_factory=list)
    bounds: dict[str, tuple[int, int]] = field(default_factory=dict)
    binaries: list[str] = field(default_factory=list)

    @property
    def variables(self) -> list[str]:
        seen = dict.fromkeys(self.binaries)
        seen.update(dict.fromkeys(self.bounds))
        for r in self.rows:
            seen.update(dict.fromkeys(r.coeffs))
        seen.update(dict.fromkeys(self.objective))
        return list(seen)

    def matrix(self) -> tuple[np.ndarray, list[str]]:
        names = self.variables
        col = {v: i for i, v in enumerate(names)}
        a = np.zeros((len(self.rows), len(names)))
        for r_i, r in enumerate(self.rows):
            for v, c in r.coeffs.items():
                a[r_i, col[v]] = c
        return a, names


@dataclass
class MipModel:
    inst: ReschedulingInstance
    nodes: list[Waypoint | None]
    k: int
    n: int
    d: list[list[int]]
    windows: list[tuple[int, int]]
    M: list[list[int]]
    ride: dict[int, int]  # dropoff node -> ride limit
    lp: LinearProgram
    infeasible: bool = False
    _cache: tuple | None = field(default=None, repr=False, compare=False)

    @property
    def size(self) -> int:
        return len(self.nodes)

    def y(self, i: int, j: int) -> str:
        return f"y_{i}_{j}"

    def route(self, order: list[int]) -> tuple[Waypoint, ...]:
        return tuple(self.nodes[i] for i in order)


def build_model(dist: Distance, inst: ReschedulingInstance) -> MipModel:
    onboard = sorted(inst.onboard, key=lambda t: t.trip)
    waiting = sorted(inst.all_waiting, key=lambda t: t.trip)
    k, n = len(onboard), len(waiting)
    nodes: list[Waypoint | None] = [None]
    nodes += [Waypoint(Kind.DROPOFF, t.trip, t.dropoff) for t in onboard]
    nodes += [Waypoint(Kind.PICKUP, t.trip, t.pickup) for t in waiting]
    nodes += [Waypoint(Kind.DROPOFF, t.trip, t.dropoff) for t in waiting]
    size = len(nodes)
    verts = [inst.start] + [p.vertex for p in nodes[1:]]
    raw = [[dist(a, b) for b in verts] for a in verts]
    infeasible = any(x == INF for row in raw for x in row)

    # finite stand-in for unreachable pairs and unlimited budgets: no path costs more
    horizon = sum(max((x for x in row if x != INF), default=0) for row in raw) + 1
    d = [
        [SELF_COST if i == j else (horizon if raw[i][j] == INF else raw[i][j]) for j in range(size)]
        for i in range(size)
    ]

    def cap(x) -> int:
        return horizon if x == INF else min(int(x), horizon)

    windows = [(0, 0)]
    for t in onboard:
        i = len(windows)
        windows.append((d[0][i], cap(t.ride_budget)))
    for t in waiting:
        i = len(windows)
        windows.append((d[0][i], cap(t.wait_budget)))
    ride: dict[int, int] = {}
    for idx, t in enumerate(waiting):
        p, e = k + 1 + idx, k + n + 1 + idx
        ride[e] = cap(t.ride_limit)
        windows.append((d[0][p] + d[p][e], cap(windows[p][1] + ride[e])))
    M = [[max(0, windows[i][1] + d[i][j] - windows[j][0]) for j in range(size)] for i in range(size)]
    for i in range(size):
        lo, hi = windows[i]
        if lo > hi:
            infeasible = True

    lp = LinearProgram()
    y = lambda i, j: f"y_{i}_{j}"  # noqa: E731
    for i in range(size):
        for j in range(size):
            lp.binaries.append(y(i, j))
            if d[i][j]:
                lp.objective[y(i, j)] = d[i][j]
    for i in range(size):
        lp.bounds[f"B_{i}"] = windows[i]
    for e in range(k + n + 1, size):
        lp.bounds[f"L_{e}"] = (0, ride[e])

    rows = lp.rows
    for j in range(1, size):
        rows.append(Row(f"in_{j}", {y(i, j): 1 for i in range(size)}, "=", 1))
    rows.append(Row("out_0", {y(0, j): 1 for j in range(size)}, "=", 1))
    for i in range(1, size):
        rows.append(Row(f"out_{i}", {y(i, j): 1 for j in range(size)}, "<=", 1))
    rows.append(Row("start", {"B_0": 1}, "=", 0))
    for i in range(size):
        for j in range(size):
            coeffs = {} if i == j else {f"B_{j}": 1, f"B_{i}": -1}
            if M[i][j]:
                coeffs[y(i, j)] = -M[i][j]
            rows.append(Row(f"time_{i}_{j}", coeffs, ">=", d[i][j] - M[i][j]))
    for e in range(k + n + 1, size):
        p = e - n
        rows.append(Row(f"ride_{e}", {f"L_{e}": 1, f"B_{e}": -1, f"B_{p}": 1}, "=", 0))
    for p in range(k + 1, k + n + 1):
        rows.append(Row(f"wait_{p}", {f"B_{p}": 1}, "<=", windows[p][1]))
    for i in range(1, k + 1):
        rows.append(Row(f"onboard_{i}", {f"B_{i}": 1}, "<=", windows[i][1]))
    for e in range(k + n + 1, size):
        p = e - n
        rows.append(Row(f"ridemin_{e}", {f"L_{e}": 1}, ">=", d[p][e]))
        rows.append(Row(f"ridemax_{e}", {f"L_{e}": 1}, "<=", ride[e]))

    # zero-length edges between co-located points let timing rows admit
    # cycles; order variables break those cycles
    zero = [(i, j) for i in range(1, size) for j in range(1, size) if i != j and d[i][j] == 0]
    if zero:
        for i in range(1, size):
            lp.bounds[f"U_{i}"] = (1, size - 1)
        for i, j in zero:
            rows.append(Row(f"order_{i}_{j}", {f"U_{j}": 1, f"U_{i}": -1, y(i, j): -size}, ">=", 1 - size))

    if inst.capacity is not None:
        cap_q = inst.capacity
        lp.bounds["Q_0"] = (k, k)
        for i in range(1, size):
            lp.bounds[f"Q_{i}"] = (0, cap_q)
        big = cap_q + 1
        for i in range(size):
            for j in range(1, size):
                if i == j:
                    continue
                q = 1 if k < j <= k + n else -1
                rows.append(Row(f"load_{i}_{j}", {f"Q_{j}": 1, f"Q_{i}": -1, y(i, j): -big}, ">=", q - big))

    return MipModel(inst, nodes, k, n, d, windows, M, ride, lp, infeasible)


def row_count(k: int, n: int) -> int:
    """Rows of a model without capacity or zero-length edges."""
    size = 1 + k + 2 * n
    return size * size + 2 * size + 4 * n + k


# -- assignments -------------------------------------------------------------


def assignment_for(model: MipModel, order: list[int]) -> dict[str, float]:
    """Variable values for visiting nodes in ``order`` (which starts at 0) at earliest times."""
    size = model.size
    values = {f"y_{i}_{j}": 0.0 for i in range(size) for j in range(size)}
    b = {0: 0}
    for a, c in zip(order, order[1:]):
        values[f"y_{a}_{c}"] = 1.0
        b[c] = b[a] + model.d[a][c]
    for i in range(size):
        values[f"B_{i}"] = float(b.get(i, 0))
    for e in range(model.k + model.n + 1, size):
        values[f"L_{e}"] = float(b.get(e, 0) - b.get(e - model.n, 0))
    pos = {v: i for i, v in enumerate(order)}
    for name in model.lp.bounds:
        if name.startswith("U_"):
            values[name] = float(pos.get(int(name[2:]), 1))
    if any(name.startswith("Q_") for name in model.lp.bounds):
        load = model.k
        values["Q_0"] = float(load)
        for c in order[1:]:
            load += 1 if model.k < c <= model.k + model.n else -1
            values[f"Q_{c}"] = float(load)
    return values


def order_of(model: MipModel, seq) -> list[int]:
    index = {p: i for i, p in enumerate(model.nodes) if p is not None}
    return [0] + [index[p] for p in seq]


def _path(model: MipModel, values: dict[str, float]) -> list[int] | None:
    size = model.size
    succ: dict[int, int] = {}
    for i in range(size):
        for j in range(size):
            if values[f"y_{i}_{j}"] > 0.5:
                if i in succ:
                    return None
                succ[i] = j
    order, seen = [0], {0}
    while order[-1] in succ:
        nxt = succ[order[-1]]
        if nxt in seen:
            return None
        order.append(nxt)
        seen.add(nxt)
    if len(order) != size or len(succ) != size - 1:
        return None
    return order


def check_solution(model: MipModel, values: dict[str, float], tol: float = 1e-6) -> bool:
    """True iff every row and bound holds and ``y`` is one path from node 0 over all nodes."""
    lp = model.lp
    if model._cache is None:
        model._cache = lp.matrix()
    a, names = model._cache
    missing = [v for v in names if v not in values]
    if missing:
        raise ModelError(f"assignment lacks {len(missing)} variables, e.g. {missing[0]}")
    for v in lp.binaries:
        if min(abs(values[v]), abs(values[v] - 1)) > tol:
            return False
    for v, (lo, hi) in lp.bounds.items():
        if not lo - tol <= values[v] <= hi + tol:
            return False
    x = np.array([values[v] for v in names], dtype=float)
    lhs = a @ x
    if not all(r.holds(float(v), tol) for r, v in zip(lp.rows, lhs)):
        return False
    return _path(model, values) is not None


def objective_value(model: MipModel, values: dict[str, float]) -> float:
    return sum(c * values[v] for v, c in model.lp.objective.items())


def solve_exhaustive(model: MipModel) -> tuple[int, tuple[Waypoint, ...]] | None:
    """Optimal objective over all path-shaped assignments the rows accept.

    Prefixes are cut when an arrival passes its window or a dropoff precedes
    its pickup; both are implied by the rows, so no feasible path is lost.
    Ties go to the lexicographically smallest ``(kind, trip)`` sequence.
    """
    if model.infeasible:
        return None
    size, d, win, k, n = model.size, model.d, model.windows, model.k, model.n
    best: list = [None]
    order = [0]

    def rec(here: int, t: int, used: int):
        if len(order) == size:
            values = assignment_for(model, order)
            if not check_solution(model, values):
                return
            cost = int(round(objective_value(model, values)))
            key = (cost, [p.key for p in model.route(order[1:])])
            if best[0] is None or key < best[0][0]:
                best[0] = (key, list(order))
            return
        for j in range(1, size):
            if used >> j & 1:
                continue
            if j > k + n and not used >> (j - n) & 1:
                continue
            arrive = t + d[here][j]
            if arrive > win[j][1]:
                continue
            order.append(j)
            rec(j, arrive, used | 1 << j)
            order.pop()

    rec(0, 0, 1)
    if best[0] is None:
        return None
    (cost, _), path = best[0]
    return cost, model.route(path[1:])


# -- LP text -----------------------------------------------------------------


def _fmt(c) -> str:
    return str(int(c)) if float(c).is_integer() else repr(float(c))


def _expr(coeffs: dict[str, int]) -> list[str]:
    terms = []
    for i, (v, c) in enumerate(coeffs.items()):
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        body = v if mag == 1 else f"{_fmt(mag)} {v}"
        terms.append(f"{sign} {body}" if i or sign == "-" else body)
    return terms


def _wrap(prefix: str, terms: list[str], tail: str = "") -> list[str]:
    lines, cur = [], prefix
    for t in terms + ([tail] if tail else []):
        if len(cur) + len(t) + 1 > 78 and cur.strip():
            lines.append(cur)
            cur = "   "
        cur += " " + t
    lines.append(cur)
    return lines


def emit_lp(model: MipModel) -> str:
    """CPLEX LP text; identical models give byte-identical output."""
    lp = model.lp
    out = [f"\\ rescheduling model: k={model.k} n={model.n} start={model.inst.start}", "Minimize"]
    out += _wrap(" obj:", _expr(lp.objective) or ["0 y_0_0"])
    out.append("Subject To")
    for r in lp.rows:
        out += _wrap(f" {r.name}:", _expr(r.coeffs), f"{r.sense} {_fmt(r.rhs)}")
    out.append("Bounds")
    for v, (lo, hi) in lp.bounds.items():
        out.append(f" {v} = {_fmt(lo)}" if lo == hi else f" {_fmt(lo)} <= {v} <= {_fmt(hi)}")
    out.append("Binaries")
    for i in range(0, len(lp.binaries), 8):
        out.append(" " + " ".join(lp.binaries[i : i + 8]))
    out.append("End")
    return "\n".join(out) + "\n"


_TERM = re.compile(r"([+-])?\s*(\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)?\s*([A-Za-z_][\w.]*)")


def _num_text(s: str):
    v = Fraction(s)
    return int(v) if v.denominator == 1 else float(v)


def _parse_expr(text: str) -> dict[str, int]:
    coeffs: dict[str, int] = {}
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TERM.match(text, pos)
        if not m or m.end() == pos:
            raise ModelError(f"cannot parse expression near {text[pos:pos + 20]!r}")
        sign, coef, var = m.groups()
        c = _num_text(coef) if coef else 1
        coeffs[var] = -c if sign == "-" else c
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    return coeffs


def parse_lp(text: str) -> LinearProgram:
    """Read the subset of CPLEX LP text that :func:`emit_lp` writes."""
    lp = LinearProgram()
    section = None
    pending = ""
    heads = {"minimize": "obj", "subject to": "rows", "bounds": "bounds", "binaries": "bin", "end": "end"}
    stmts: list[tuple[str, str]] = []

    def flush():
        nonlocal pending
        if pending.strip():
            stmts.append((section, pending.strip()))
        pending = ""

    for raw in text.splitlines():
        line = raw.split("\\", 1)[0]
        low = line.strip().lower()
        if low in heads:
            flush()
            section = heads[low]
            continue
        if not low:
            continue
        if section in ("obj", "rows"):
            if raw.startswith("   ") and pending:
                pending += " " + line.strip()
            else:
                flush()
                pending = line.strip()
        else:
            flush()
            stmts.append((section, line.strip()))
    flush()

    for sec, body in stmts:
        if sec == "obj":
            _, expr = body.split(":", 1)
            coeffs = _parse_expr(expr)
            lp.objective = {} if coeffs == {"y_0_0": 0} else coeffs
        elif sec == "rows":
            name, rest = body.split(":", 1)
            m = re.match(r"(.*?)(<=|>=|=)\s*(\S+)\s*$", rest)
            if not m:
                raise ModelError(f"row {name!r} has no comparison")
            lp.rows.append(Row(name.strip(), _parse_expr(m.group(1)), m.group(2), _num_text(m.group(3))))
        elif sec == "bounds":
            parts = body.split()
            if len(parts) == 3 and parts[1] == "=":
                v = _num_text(parts[2])
                lp.bounds[parts[0]] = (v, v)
            elif len(parts) == 5 and parts[1] == parts[3] == "<=":
                lp.bounds[parts[2]] = (_num_text(parts[0]), _num_text(parts[4]))
            else:
                raise ModelError(f"bad bound line {body!r}")
        elif sec == "bin":
            lp.binaries.extend(body.split())
        elif sec is None:
            raise ModelError("content before Minimize section")
    return lp

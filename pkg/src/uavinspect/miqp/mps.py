"""MPS text export (and a reader for round-trip checks).

Emits the classic fixed sections plus a QMATRIX block listing the full
symmetric quadratic matrix; the objective convention is
0.5 x'Qx + c'x, matching mainstream solvers' treatment of QMATRIX.
Binary variables are wrapped in INTORG/INTEND markers and carry BV
bound lines.
"""

from __future__ import annotations

import re

from .model import EQ, GE, LE, MiqpModel

_SENSE_TO_ROW = {LE: "L", GE: "G", EQ: "E"}
_ROW_TO_SENSE = {v: k for k, v in _SENSE_TO_ROW.items()}


def _clean(name: str) -> str:
    """MPS-safe token: alphanumerics, dot, underscore."""
    return re.sub(r"[^A-Za-z0-9_.]", "_", name)


def export_text(model: MiqpModel) -> str:
    """Serialise the model as portable MPS text."""
    vnames = [_clean(n) for n in model.var_names]
    rnames = [_clean(n) for n in model._row_names]
    if len(set(vnames)) != len(vnames) or len(set(rnames)) != len(rnames):
        raise ValueError("variable/row names collide after MPS cleaning")

    out = [f"NAME          {_clean(model.name)}"]
    out.append("ROWS")
    out.append(" N  OBJ")
    for sense, rn in zip(model._senses, rnames):
        out.append(f" {_SENSE_TO_ROW[sense]}  {rn}")

    # column-major coefficient lists
    col_entries: list[list[tuple[str, float]]] = [[] for _ in vnames]
    lin = model.linear_cost()
    for j, c in enumerate(lin):
        if c != 0.0:
            col_entries[j].append(("OBJ", float(c)))
    for r, (idxs, vals) in enumerate(zip(model._row_idx, model._row_coef)):
        for j, a in zip(idxs, vals):
            col_entries[j].append((rnames[r], float(a)))

    out.append("COLUMNS")
    in_int = False
    marker = 0
    for j, name in enumerate(vnames):
        want_int = model.is_binary(j)
        if want_int != in_int:
            kind = "'INTORG'" if want_int else "'INTEND'"
            out.append(f"    MARK{marker:04d}  'MARKER'                 {kind}")
            marker += 1
            in_int = want_int
        entries = col_entries[j] or [("OBJ", 0.0)]
        for rn, a in entries:
            out.append(f"    {name}  {rn}  {a!r}")
    if in_int:
        out.append(f"    MARK{marker:04d}  'MARKER'                 'INTEND'")

    out.append("RHS")
    for rn, rhs in zip(rnames, model._rhs):
        if rhs != 0.0:
            out.append(f"    RHS  {rn}  {rhs!r}")

    out.append("BOUNDS")
    lb, ub = model.lb, model.ub
    for j, name in enumerate(vnames):
        if model.is_binary(j):
            out.append(f" BV BND  {name}")
            continue
        lo, hi = float(lb[j]), float(ub[j])
        if lo == -float("inf") and hi == float("inf"):
            out.append(f" FR BND  {name}")
            continue
        if lo == -float("inf"):
            out.append(f" MI BND  {name}")
        else:
            out.append(f" LO BND  {name}  {lo!r}")
        if hi != float("inf"):
            out.append(f" UP BND  {name}  {hi!r}")

    if model._quad:
        out.append("QMATRIX")
        for (i, j), v in sorted(model._quad.items()):
            out.append(f"    {vnames[i]}  {vnames[j]}  {v!r}")
            if i != j:
                out.append(f"    {vnames[j]}  {vnames[i]}  {v!r}")
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def parse_text(text: str) -> MiqpModel:
    """Rebuild a model from MPS text produced by :func:`export_text`
    (also accepts QUADOBJ quadratic sections)."""
    section = None
    model = MiqpModel()
    row_sense: dict[str, str] = {}
    row_order: list[str] = []
    obj_row: str | None = None
    col_of: dict[str, int] = {}
    rows_coeffs: dict[str, dict[int, float]] = {}
    rhs: dict[str, float] = {}
    in_int = False
    explicit_lo: set[int] = set()
    quad_pairs: dict[tuple[int, int], float] = {}
    quad_section = None

    def var(name: str) -> int:
        if name not in col_of:
            col_of[name] = (model.add_binary(name) if in_int
                            else model.add_continuous(name, lb=0.0))
        return col_of[name]

    for raw in text.splitlines():
        if not raw.strip() or raw.lstrip().startswith("*"):
            continue
        head = raw[:1] != " "
        parts = raw.split()
        if head:
            section = parts[0].upper()
            if section in ("QMATRIX", "QUADOBJ"):
                quad_section = section
            continue
        if section == "ROWS":
            kind, name = parts[0].upper(), parts[1]
            if kind == "N":
                obj_row = name
            else:
                row_sense[name] = _ROW_TO_SENSE[kind]
                row_order.append(name)
                rows_coeffs[name] = {}
        elif section == "COLUMNS":
            if len(parts) >= 3 and parts[1] == "'MARKER'":
                in_int = parts[2] == "'INTORG'"
                continue
            j = var(parts[0])
            for rn, val in zip(parts[1::2], parts[2::2]):
                if rn == obj_row:
                    model.add_linear(j, float(val))
                else:
                    rows_coeffs[rn][j] = rows_coeffs[rn].get(j, 0.0) + float(val)
        elif section == "RHS":
            for rn, val in zip(parts[1::2], parts[2::2]):
                rhs[rn] = float(val)
        elif section == "RANGES":
            raise ValueError("RANGES sections are not supported")
        elif section == "BOUNDS":
            kind = parts[0].upper()
            name = parts[2]
            if name not in col_of:
                raise ValueError(f"bound on unknown column {name}")
            j = col_of[name]
            if kind == "BV":
                if not model.is_binary(j):
                    raise ValueError(f"BV bound on continuous column {name}")
            elif kind == "FR":
                model._lb[j] = -float("inf")
                model._ub[j] = float("inf")
            elif kind == "MI":
                model._lb[j] = -float("inf")
            elif kind == "PL":
                model._ub[j] = float("inf")
            elif kind == "LO":
                model._lb[j] = float(parts[3])
                explicit_lo.add(j)
            elif kind == "UP":
                model._ub[j] = float(parts[3])
                # classic MPS quirk: UP with a negative value and no LO
                # drops the default zero lower bound
                if float(parts[3]) < 0.0 and j not in explicit_lo:
                    model._lb[j] = -float("inf")
            else:
                raise ValueError(f"unsupported bound type {kind}")
        elif section in ("QMATRIX", "QUADOBJ"):
            i, j = col_of[parts[0]], col_of[parts[1]]
            key = (min(i, j), max(i, j))
            val = float(parts[2])
            if quad_section == "QMATRIX":
                quad_pairs[key] = val  # symmetric entries repeat; keep one
            else:
                quad_pairs[key] = quad_pairs.get(key, 0.0) + val
        elif section in ("NAME", "ENDATA"):
            continue

    for name in row_order:
        model.add_constraint(rows_coeffs[name], row_sense[name],
                             rhs.get(name, 0.0), name=name)
    for (i, j), v in quad_pairs.items():
        model.add_quadratic(i, j, v)
    return model

"""Render a plan back to SQL text.

Rendering is structural: each Project/Filter run over a joinable core
becomes one SELECT block, and anything that cannot sit in a FROM clause
directly is wrapped as a derived table with a generated alias.  Column
references come out unqualified when the name is unambiguous in scope,
qualified otherwise; columns exported through a derived table under a
clashing name get a deterministic `binding__column` alias.

The generic dialect has no syntax for a hash join, so the physical kind
is emitted as a `/*+ hash */` hint comment rather than an error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ir import Col, RaExpr, Schema, output_columns

_PREC = {
    "or": 1, "and": 2, "not": 3,
    "eq": 4, "ne": 4, "lt": 4, "gt": 4, "le": 4, "ge": 4,
    "add": 5, "sub": 5,
    "mul": 6, "div": 6, "shl": 6,
}

_OP_TEXT = {
    "add": "+", "sub": "-", "mul": "*", "div": "/", "shl": "<<",
    "eq": "=", "ne": "!=", "lt": "<", "gt": ">", "le": "<=", "ge": ">=",
    "and": "and", "or": "or",
}


def _is_true(e: RaExpr) -> bool:
    return e.kind == "const" and e.payload == ("bool", True)


@dataclass
class _Scope:
    """Visible columns of a FROM clause, in export order."""

    entries: list[tuple[Col, str, str]] = field(default_factory=list)  # (col, qualifier, surface)

    def render(self, c: Col) -> str:
        surface_counts: dict[str, int] = {}
        for _, _, surface in self.entries:
            surface_counts[surface] = surface_counts.get(surface, 0) + 1
        for ec, qualifier, surface in self.entries:
            if ec == c:
                if surface_counts[surface] == 1:
                    return surface
                return f"{qualifier}.{surface}"
        raise KeyError(f"column {c} not in emit scope")


class _Emitter:
    def __init__(self, schema: Schema):
        self.schema = schema
        self.fresh = 0

    def alias(self) -> str:
        self.fresh += 1
        return f"_v{self.fresh}"

    def scalar(self, e: RaExpr, scope: _Scope, parent_prec: int = 0) -> str:
        match e.kind:
            case "col":
                return scope.render(e.payload)
            case "const":
                t, v = e.payload
                if t == "str":
                    return "'" + str(v).replace("'", "''") + "'"
                if t == "bool":
                    return "true" if v else "false"
                return str(v)
            case "not":
                text = "not " + self.scalar(e.children[0], scope, _PREC["not"] + 1)
                return f"({text})" if _PREC["not"] < parent_prec else text
            case k:
                prec = _PREC[k]
                a = self.scalar(e.children[0], scope, prec)
                b = self.scalar(e.children[1], scope, prec + 1)
                text = f"{a} {_OP_TEXT[k]} {b}"
                return f"({text})" if prec < parent_prec else text

    def from_item(self, e: RaExpr, allow_comma: bool) -> tuple[str, _Scope]:
        match e.kind:
            case "scan":
                table, binding = e.payload
                text = table if binding == table else f"{table} as {binding}"
                scope = _Scope([(c, binding, c.column) for c in output_columns(e, self.schema)])
                return text, scope
            case "join":
                pred, left, right = e.children
                cross = _is_true(pred)
                lt, ls = self.from_item(left, allow_comma and cross)
                rt, rs = self.from_item(right, False)
                scope = _Scope(ls.entries + rs.entries)
                if cross and allow_comma:
                    return f"{lt}, {rt}", scope
                hint = "/*+ hash */ " if e.payload == "hash" else ""
                on = self.scalar(pred, scope)
                return f"{lt} join {hint}{rt} on {on}", scope
            case "derived":
                alias = e.payload
                text, exports = self.block(e.children[0], as_derived=True)
                scope = _Scope([(c, alias, surface) for c, surface in exports])
                return f"({text}) as {alias}", scope
            case _:
                # A projection or filter stack in FROM position becomes
                # a derived table with a generated alias.
                alias = self.alias()
                text, exports = self.block(e, as_derived=True)
                scope = _Scope([(c, alias, surface) for c, surface in exports])
                return f"({text}) as {alias}", scope

    def block(self, e: RaExpr, as_derived: bool) -> tuple[str, list[tuple[Col, str]]]:
        cols = None
        if e.kind == "project":
            cols = list(e.payload)
            e = e.children[0]
        preds = []
        while e.kind == "filter":
            preds.append(e.children[0])
            e = e.children[1]
        from_text, scope = self.from_item(e, allow_comma=True)

        if cols is None:
            exports = [(c, surface) for c, _, surface in scope.entries]
        else:
            exports = [(c, c.column) for c in cols]

        seen: dict[str, int] = {}
        for _, surface in exports:
            seen[surface] = seen.get(surface, 0) + 1
        need_alias = as_derived and any(n > 1 for n in seen.values())

        if cols is None and not need_alias:
            select_text = "*"
        else:
            items = []
            out_cols = [c for c, _ in exports]
            if need_alias:
                exports = [(c, f"{c.binding}__{c.column}") for c in out_cols]
            for c, surface in exports:
                ref = scope.render(c)
                base = ref.split(".")[-1]
                items.append(ref if base == surface else f"{ref} as {surface}")
            select_text = ", ".join(items)

        text = f"select {select_text} from {from_text}"
        if preds:
            where = " and ".join(self.scalar(p, scope, _PREC["and"]) for p in preds)
            text += f" where {where}"
        return text, exports


def emit_sql(expr: RaExpr, schema: Schema) -> str:
    """Render `expr` as a SQL string in the generic dialect."""
    text, _ = _Emitter(schema).block(expr, as_derived=False)
    return text

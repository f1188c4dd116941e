"""Render terms back to surface syntax (parseable for parser output)."""

from __future__ import annotations

from dppl.ast import (
    INFIX, Abs, App, Assume, Diff, DistCon, If, Infer, Jvp, Prim, PrimApp,
    Proj, RealLit, Solve, TupleCon, Var, Weight, WienerFn,
)

_LEVEL_ADD = {Prim.ADD: 1, Prim.SUB: 1, Prim.MUL: 2, Prim.DIV: 2}


def fmt_real(r) -> str:
    if not isinstance(r, float):
        return f"<{r}>"
    s = repr(r)
    if s == "inf":
        s = "1e999"
    elif s == "-inf":
        s = "-1e999"
    return f"({s})" if s.startswith("-") else s


def pretty(t) -> str:
    return _pp(t, 0)


def _paren(s, own, need):
    return f"({s})" if own < need else s


def _pp(t, need):
    match t:
        case Var(name):
            return name
        case RealLit(r):
            return fmt_real(r)
        case TupleCon(elems):
            return "(" + ", ".join(_pp(e, 0) for e in elems) + ")"
        case Proj(i, tup, _):
            return f"{_pp(tup, 4)}.{i}"
        case PrimApp(prim, args) if prim in INFIX:
            lvl = _LEVEL_ADD[prim]
            s = f"{_pp(args[0], lvl)} {prim.value} {_pp(args[1], lvl + 1)}"
            return _paren(s, lvl, need)
        case PrimApp(WienerFn(p), args):
            return f"wiener({fmt_real(p)}, {_pp(args[0], 0)})"
        case PrimApp(prim, args):
            return f"{prim.value}(" + ", ".join(_pp(a, 0) for a in args) + ")"
        case DistCon(dist, params):
            return f"{dist.value}(" + ", ".join(_pp(a, 0) for a in params) + ")"
        case App(Abs(x, annot, body), bound):
            ann = "" if annot is None else f": {annot}"
            s = f"let {x}{ann} = {_pp(bound, 0)} in {_pp(body, 0)}"
            return _paren(s, 0, need)
        case App(f, a):
            return _paren(f"{_pp(f, 3)} {_pp(a, 4)}", 3, need)
        case Abs(x, annot, body):
            ann = "?" if annot is None else str(annot)
            return _paren(f"lam {x}: {ann}. {_pp(body, 0)}", 0, need)
        case If(c, a, b):
            s = f"if {_pp(c, 0)} then {_pp(a, 0)} else {_pp(b, 0)}"
            return _paren(s, 0, need)
        case Assume(x):
            return _paren(f"assume {_pp(x, 4)}", 3, need)
        case Weight(x):
            return _paren(f"weight {_pp(x, 4)}", 3, need)
        case Infer(x):
            return _paren(f"infer {_pp(x, 4)}", 3, need)
        case Diff(d, f, x):
            return _paren(f"diff{d.name} {_pp(f, 4)} {_pp(x, 4)}", 3, need)
        case Solve(f, y0, x1):
            return _paren(f"solve {_pp(f, 4)} {_pp(y0, 4)} {_pp(x1, 4)}", 3, need)
        case Jvp(f, x, u):
            return f"jvp({_pp(f, 0)}, {_pp(x, 0)}, {_pp(u, 0)})"
    raise TypeError(f"cannot print {type(t).__name__}")

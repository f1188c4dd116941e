"""Terms, types and modifiers of the core calculus.

Everything here is immutable.  Values of the small-step machine are terms in
value form (see :func:`is_value`); the fast evaluator in :mod:`dppl.machine`
uses native Python values and converts at the boundary.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Union


class Coeffect(enum.IntEnum):
    """Differentiability modifier on real types, ordered A < P < N."""

    A = 0
    P = 1
    N = 2


class Effect(enum.IntEnum):
    DET = 0
    RND = 1

    def __str__(self):
        return "det" if self is Effect.DET else "rnd"


# ---------------------------------------------------------------------------
# Types


@dataclass(frozen=True)
class Real:
    c: Coeffect

    def __str__(self):
        return f"Real{self.c.name}"


@dataclass(frozen=True)
class Arrow:
    arg: "TypeExpr"
    eff: Effect
    res: "TypeExpr"

    def __str__(self):
        arg = f"({self.arg})" if isinstance(self.arg, Arrow) else str(self.arg)
        return f"{arg} ->{self.eff} {self.res}"


@dataclass(frozen=True)
class TupleT:
    elems: tuple

    def __str__(self):
        return "(" + ", ".join(str(e) for e in self.elems) + ")"


@dataclass(frozen=True)
class DistT:
    support: "TypeExpr"

    def __str__(self):
        s = self.support
        inner = str(s) if isinstance(s, (Real, TupleT)) else f"({s})"
        return f"Dist {inner}"


TypeExpr = Union[Real, Arrow, TupleT, DistT]

UNIT = TupleT(())
R_A, R_P, R_N = Real(Coeffect.A), Real(Coeffect.P), Real(Coeffect.N)


def tuple_type(elems) -> TypeExpr:
    """Build a tuple type, collapsing the 1-tuple onto its element."""
    elems = tuple(elems)
    if len(elems) == 1:
        return elems[0]
    return TupleT(elems)


def reals(c: Coeffect, n: int) -> TypeExpr:
    return tuple_type([Real(c)] * n)


# ---------------------------------------------------------------------------
# Modifier algebra


def coeff_mul(c1: Coeffect, c2: Coeffect) -> Coeffect:
    return max(c1, c2)


def coeff_le_type(c: Coeffect, ty: TypeExpr) -> bool:
    if isinstance(ty, Real):
        return c <= ty.c
    if isinstance(ty, TupleT):
        return all(coeff_le_type(c, t) for t in ty.elems)
    return True


def promote_type(c: Coeffect, ty: TypeExpr) -> TypeExpr:
    if c is Coeffect.A:
        return ty
    if isinstance(ty, Real):
        return Real(coeff_mul(c, ty.c))
    if isinstance(ty, TupleT):
        return TupleT(tuple(promote_type(c, t) for t in ty.elems))
    return ty


def max_coeffect_below(types) -> Coeffect:
    """Largest c with c <= every type in ``types`` (N when unconstrained)."""
    best = Coeffect.N
    stack = list(types)
    while stack:
        ty = stack.pop()
        if isinstance(ty, Real):
            if ty.c < best:
                best = ty.c
                if best is Coeffect.A:
                    return best
        elif isinstance(ty, TupleT):
            stack.extend(ty.elems)
    return best


def real_shape(ty: TypeExpr):
    """Modifiers of a type built only from reals and tuples, else None.

    Returns a nested structure mirroring the tuple tree: a Coeffect for a
    real, a tuple of shapes for a tuple.
    """
    if isinstance(ty, Real):
        return ty.c
    if isinstance(ty, TupleT):
        parts = tuple(real_shape(t) for t in ty.elems)
        if any(p is None for p in parts):
            return None
        return parts
    return None


# ---------------------------------------------------------------------------
# Primitives


class Prim(enum.Enum):
    ADD = "+"
    SUB = "-"
    MUL = "*"
    DIV = "/"
    SIN = "sin"
    COS = "cos"
    PDF_GAUSSIAN = "pdfGaussian"
    PDF_BETA = "pdfBeta"

    @property
    def arity(self) -> int:
        if self in (Prim.SIN, Prim.COS):
            return 1
        if self in (Prim.PDF_GAUSSIAN, Prim.PDF_BETA):
            return 3
        return 2


@dataclass(frozen=True)
class WienerFn:
    """The primitive W_p: one fixed realization of the Wiener process."""

    p: float
    arity = 1


PrimFn = Union[Prim, WienerFn]

INFIX = {Prim.ADD, Prim.SUB, Prim.MUL, Prim.DIV}


class PrimDist(enum.Enum):
    GAUSSIAN = "Gaussian"
    BETA = "Beta"
    WIENER = "Wiener"

    @property
    def arity(self) -> int:
        return 0 if self is PrimDist.WIENER else 2


# ---------------------------------------------------------------------------
# Terms


class Term:
    __slots__ = ()

    def __str__(self):
        from dppl.pretty import pretty

        return pretty(self)


@dataclass(frozen=True, repr=False)
class Var(Term):
    name: str


@dataclass(frozen=True, repr=False)
class Abs(Term):
    """Lambda abstraction.  ``annot`` is None only for let-bound binders
    whose type the checker synthesizes from the bound term."""

    param: str
    annot: "TypeExpr | None"
    body: Term


@dataclass(frozen=True, repr=False)
class App(Term):
    fn: Term
    arg: Term


@dataclass(frozen=True, repr=False)
class PrimApp(Term):
    prim: PrimFn
    args: tuple


@dataclass(frozen=True, repr=False)
class RealLit(Term):
    # a float, or a DualReal when the literal carries tangents
    r: object


@dataclass(frozen=True, repr=False)
class TupleCon(Term):
    elems: tuple


@dataclass(frozen=True, repr=False)
class Proj(Term):
    index: int
    tup: Term
    arity: "int | None" = None


@dataclass(frozen=True, repr=False)
class If(Term):
    cond: Term
    then: Term
    else_: Term


@dataclass(frozen=True, repr=False)
class DistCon(Term):
    dist: PrimDist
    params: tuple


@dataclass(frozen=True, repr=False)
class Assume(Term):
    t: Term


@dataclass(frozen=True, repr=False)
class Weight(Term):
    t: Term


@dataclass(frozen=True, repr=False)
class Infer(Term):
    f: Term


@dataclass(frozen=True, repr=False)
class Diff(Term):
    d: Coeffect
    f: Term
    point: Term


@dataclass(frozen=True, repr=False)
class Solve(Term):
    f: Term
    y0: Term
    x1: Term


@dataclass(frozen=True, repr=False)
class Jvp(Term):
    """Body of the closure produced by E-Diff: the directional derivative of
    ``f`` at ``point`` along ``tangent``.  Never produced by the parser."""

    f: Term
    point: Term
    tangent: Term


for _cls in (Var, Abs, App, PrimApp, RealLit, TupleCon, Proj, If, DistCon,
             Assume, Weight, Infer, Diff, Solve, Jvp):
    _cls.__repr__ = Term.__str__

UNIT_TERM = TupleCon(())


def let(name: str, bound: Term, body: Term, annot: "TypeExpr | None" = None) -> Term:
    return App(Abs(name, annot, body), bound)


def tuple_term(elems) -> Term:
    elems = tuple(elems)
    if len(elems) == 1:
        return elems[0]
    return TupleCon(elems)


def children(t: Term) -> tuple:
    match t:
        case Var() | RealLit():
            return ()
        case Abs(body=b):
            return (b,)
        case App(f, a):
            return (f, a)
        case PrimApp(args=args) | TupleCon(elems=args) | DistCon(params=args):
            return args
        case Proj(tup=x) | Assume(x) | Weight(x) | Infer(x):
            return (x,)
        case If(c, a, b):
            return (c, a, b)
        case Diff(_, f, x):
            return (f, x)
        case Solve(f, y0, x1):
            return (f, y0, x1)
        case Jvp(f, x, u):
            return (f, x, u)
    raise TypeError(f"not a term: {t!r}")


def is_value(t: Term) -> bool:
    match t:
        case Abs() | RealLit():
            return True
        case TupleCon(elems) | DistCon(params=elems):
            return all(is_value(e) for e in elems)
        case Infer(f):
            return is_value(f)
    return False


def free_vars(t: Term) -> frozenset:
    match t:
        case Var(name):
            return frozenset((name,))
        case Abs(param, _, body):
            return free_vars(body) - {param}
        case RealLit():
            return frozenset()
    out = frozenset()
    for c in children(t):
        out |= free_vars(c)
    return out


def iter_subterms(t: Term):
    stack = [t]
    while stack:
        u = stack.pop()
        yield u
        stack.extend(children(u))


_fresh = itertools.count()


def fresh_name(base: str, avoid) -> str:
    base = base.rstrip("'0123456789") or "v"
    while True:
        name = f"{base}{next(_fresh)}"
        if name not in avoid:
            return name


def rebuild(t: Term, kids) -> Term:
    """Same constructor as ``t`` with new immediate subterms."""
    match t:
        case Abs(param, annot, _):
            return Abs(param, annot, kids[0])
        case App():
            return App(*kids)
        case PrimApp(prim=p):
            return PrimApp(p, tuple(kids))
        case TupleCon():
            return TupleCon(tuple(kids))
        case DistCon(dist=d):
            return DistCon(d, tuple(kids))
        case Proj(index=i, arity=n):
            return Proj(i, kids[0], n)
        case Assume():
            return Assume(kids[0])
        case Weight():
            return Weight(kids[0])
        case Infer():
            return Infer(kids[0])
        case If():
            return If(*kids)
        case Diff(d=d):
            return Diff(d, *kids)
        case Solve():
            return Solve(*kids)
        case Jvp():
            return Jvp(*kids)
    return t


def subst(t: Term, name: str, v: Term, fv_v: "frozenset | None" = None) -> Term:
    """Capture-avoiding substitution t{v/name}."""
    if fv_v is None:
        fv_v = free_vars(v)
    return _subst(t, name, v, fv_v)


def _subst(t, name, v, fv_v):
    match t:
        case Var(n):
            return v if n == name else t
        case RealLit():
            return t
        case Abs(param, annot, body):
            if param == name:
                return t
            if param in fv_v:
                new = fresh_name(param, fv_v | free_vars(body))
                body = _subst(body, param, Var(new), frozenset((new,)))
                param = new
            return Abs(param, annot, _subst(body, name, v, fv_v))
    kids = children(t)
    if not kids:
        return t
    return rebuild(t, [_subst(k, name, v, fv_v) for k in kids])


def alpha_equal(t1: Term, t2: Term) -> bool:
    return skeleton(t1) == skeleton(t2)


# ---------------------------------------------------------------------------
# Total order on closed values
#
# Closures are compared by their de Bruijn skeleton (reals replaced by holes),
# then by the vector of real holes.  Skeleton tags are ordered by the tuple
# below; the order itself is arbitrary but fixed.

_TAGS = {cls: i for i, cls in enumerate(
    (RealLit, TupleCon, Abs, Var, App, PrimApp, Proj, If, DistCon, Assume,
     Weight, Infer, Diff, Solve, Jvp))}


def _type_key(ty):
    match ty:
        case Real(c):
            return (0, int(c))
        case Arrow(a, e, r):
            return (1, _type_key(a), int(e), _type_key(r))
        case TupleT(elems):
            return (2, len(elems)) + tuple(_type_key(e) for e in elems)
        case DistT(s):
            return (3, _type_key(s))
    return (-1,)


def _prim_key(p):
    if isinstance(p, WienerFn):
        return ("wiener",)
    return (p.value,)


def skeleton(t: Term):
    """(structure, holes): de Bruijn structure with reals lifted out."""
    holes: list = []
    struct = _skel(t, (), holes)
    return struct, tuple(holes)


def _skel(t, scope, holes):
    tag = _TAGS[type(t)]
    match t:
        case RealLit(r):
            holes.append(_primal(r))
            return (tag,)
        case Var(name):
            for i in range(len(scope) - 1, -1, -1):
                if scope[i] == name:
                    return (tag, 0, len(scope) - 1 - i)
            return (tag, 1, name)
        case Abs(param, annot, body):
            return (tag, _type_key(annot), _skel(body, scope + (param,), holes))
        case PrimApp(prim, args):
            if isinstance(prim, WienerFn):
                holes.append(prim.p)
            return (tag, _prim_key(prim)) + tuple(_skel(a, scope, holes) for a in args)
        case DistCon(dist, params):
            return (tag, dist.value) + tuple(_skel(a, scope, holes) for a in params)
        case Proj(index, tup, _):
            return (tag, index, _skel(tup, scope, holes))
        case Diff(d, f, x):
            return (tag, int(d), _skel(f, scope, holes), _skel(x, scope, holes))
    return (tag, len(children(t))) + tuple(_skel(c, scope, holes) for c in children(t))


def _primal(r):
    while not isinstance(r, float):
        r = r.primal
    return r


def value_key(v: Term):
    """Sort key realising the total order on closed values of one type."""
    match v:
        case RealLit(r):
            return _primal(r)
        case TupleCon(elems):
            return tuple(value_key(e) for e in elems)
    return skeleton(v)


def value_order(v1: Term, v2: Term) -> int:
    """-1, 0 or 1 as v1 is below, equal to or above v2."""
    k1, k2 = value_key(v1), value_key(v2)
    if type(k1) is not type(k2):
        raise ValueError("value_order: values of different shape")
    return (k1 > k2) - (k1 < k2)

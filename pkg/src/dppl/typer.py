"""Algorithmic effect/coeffect type checker.

Every subterm is synthesized bottom-up together with its free variables.
The environment is then weakened to those variables and the synthesized type
promoted by the largest modifier the weakened environment admits.
Subsumption is checked only where a value is consumed: application
arguments, primitive arguments, the comparand of ``if`` and the operands of
``diff``/``solve``/``infer``/``assume``/``weight``.
"""

from __future__ import annotations

from dataclasses import dataclass

from dppl.ast import (
    R_A, R_N, R_P, UNIT, Abs, App, Arrow, Assume, Coeffect, Diff, DistCon,
    DistT, Effect, If, Infer, Jvp, Prim, PrimApp, PrimDist, Proj, Real,
    RealLit, Solve, TupleCon, TupleT, Var, Weight, WienerFn,
    max_coeffect_below, promote_type, real_shape, tuple_type,
)

# argument types followed by the result type
PRIM_TYPES = {
    Prim.ADD: (R_A, R_A, R_A),
    Prim.SUB: (R_A, R_A, R_A),
    Prim.MUL: (R_A, R_A, R_A),
    Prim.DIV: (R_A, R_A, R_A),
    Prim.SIN: (R_A, R_A),
    Prim.COS: (R_A, R_A),
    Prim.PDF_GAUSSIAN: (R_A, R_A, R_A, R_A),
    Prim.PDF_BETA: (R_P, R_P, R_P, R_P),
}
WIENER_TYPE = (R_N, R_N)

WIENER_SAMPLE = Arrow(R_N, Effect.DET, R_N)
DIST_TYPES = {
    PrimDist.GAUSSIAN: (R_N, R_N, R_N),
    PrimDist.BETA: (R_N, R_N, R_N),
    PrimDist.WIENER: (WIENER_SAMPLE,),
}


def prim_signature(prim):
    if isinstance(prim, WienerFn):
        return WIENER_TYPE
    return PRIM_TYPES[prim]


def prim_name(prim) -> str:
    return "wiener" if isinstance(prim, WienerFn) else prim.value


@dataclass(frozen=True)
class Judgment:
    type: object
    effect: Effect

    def __str__(self):
        return f"{self.type} @ {self.effect}"


class TypeCheckError(Exception):
    """Ill-typed program.  ``rule`` names the violated typing rule."""

    def __init__(self, rule, message, term=None, expected=None, found=None, position=None):
        self.rule = rule
        self.message = message
        self.term = term
        self.expected = expected
        self.found = found
        self.position = position
        super().__init__(self.render())

    def render(self) -> str:
        s = f"{self.rule}: {self.message}"
        parts = []
        if self.expected is not None:
            parts.append(f"expected {self.expected}")
        if self.found is not None:
            parts.append(f"found {self.found}")
        if parts:
            s += " (" + ", ".join(parts) + ")"
        return s

    def __str__(self):
        where = f"{self.position[0]}:{self.position[1]}: " if self.position else ""
        return where + self.render()


# ---------------------------------------------------------------------------
# Subtyping, joins and meets


def subtype(t1, t2) -> bool:
    match t1, t2:
        case Real(c1), Real(c2):
            return c2 <= c1
        case Arrow(a1, e1, r1), Arrow(a2, e2, r2):
            return e1 <= e2 and subtype(a2, a1) and subtype(r1, r2)
        case TupleT(xs), TupleT(ys):
            return len(xs) == len(ys) and all(subtype(x, y) for x, y in zip(xs, ys))
        case DistT(s1), DistT(s2):
            return subtype(s1, s2)
    return False


def _lattice(t1, t2, upper: bool):
    match t1, t2:
        case Real(c1), Real(c2):
            return Real(min(c1, c2) if upper else max(c1, c2))
        case Arrow(a1, e1, r1), Arrow(a2, e2, r2):
            eff = max(e1, e2) if upper else min(e1, e2)
            return Arrow(_lattice(a1, a2, not upper), eff, _lattice(r1, r2, upper))
        case TupleT(xs), TupleT(ys) if len(xs) == len(ys):
            return TupleT(tuple(_lattice(x, y, upper) for x, y in zip(xs, ys)))
        case DistT(s1), DistT(s2):
            return DistT(_lattice(s1, s2, upper))
    op = "join" if upper else "meet"
    raise TypeCheckError("T-Sub", f"no {op} of incompatible types {t1} and {t2}")


def join(t1, t2):
    """Least upper bound under :func:`subtype`."""
    return _lattice(t1, t2, True)


def meet(t1, t2):
    """Greatest lower bound under :func:`subtype`."""
    return _lattice(t1, t2, False)


def _with_modifier(shape, c):
    """Type with the tuple structure of ``shape`` and every modifier set to c."""
    if isinstance(shape, tuple):
        return tuple_type(_with_modifier(s, c) for s in shape)
    return Real(c)


def _shape_type(shape):
    if isinstance(shape, tuple):
        return tuple_type(_shape_type(s) for s in shape)
    return Real(shape)


def _same_structure(s1, s2) -> bool:
    if isinstance(s1, tuple) and isinstance(s2, tuple):
        return len(s1) == len(s2) and all(_same_structure(a, b) for a, b in zip(s1, s2))
    return not isinstance(s1, tuple) and not isinstance(s2, tuple)


def _flat(shape):
    if isinstance(shape, tuple):
        for s in shape:
            yield from _flat(s)
    else:
        yield shape


def _zip_shape(f, *shapes):
    if isinstance(shapes[0], tuple):
        return tuple(_zip_shape(f, *parts) for parts in zip(*shapes))
    return f(*shapes)


# ---------------------------------------------------------------------------
# Synthesis


class Checker:
    def __init__(self, positions=None):
        self.positions = positions or {}

    def check(self, env: dict, t) -> Judgment:
        ty, eff, _ = self.synth(env, t)
        return Judgment(ty, eff)

    def synth(self, env, t):
        """Returns (type, effect, free variables), type maximally promoted."""
        try:
            ty, eff, fv = self._synth(env, t)
        except TypeCheckError as err:
            if err.position is None and id(t) in self.positions:
                err.position = self.positions[id(t)]
                err.args = (str(err),)
            raise
        if fv:
            c = max_coeffect_below(env[x] for x in fv)
        else:
            c = Coeffect.N
        return promote_type(c, ty), eff, fv

    def _synth(self, env, t):
        match t:
            case Var(name):
                if name not in env:
                    raise TypeCheckError("T-Var", f"unbound variable {name}", t)
                return env[name], Effect.DET, frozenset((name,))

            case RealLit():
                return R_N, Effect.DET, frozenset()

            case Abs(param, annot, body):
                if annot is None:
                    raise TypeCheckError("T-Abs", f"parameter {param} needs a type annotation", t)
                rt, re, fv = self.synth({**env, param: annot}, body)
                return Arrow(annot, re, rt), Effect.DET, fv - {param}

            case App(Abs(param, None, body), bound):
                # unannotated let: the binder takes the bound term's type
                bt, be, bfv = self.synth(env, bound)
                rt, re, rfv = self.synth({**env, param: bt}, body)
                return rt, max(be, re), bfv | (rfv - {param})

            case App(fn, arg):
                ft, fe, ffv = self.synth(env, fn)
                at, ae, afv = self.synth(env, arg)
                if not isinstance(ft, Arrow):
                    raise TypeCheckError("T-App", "applied term is not a function", t,
                                         found=ft)
                if not subtype(at, ft.arg):
                    raise TypeCheckError("T-App", "argument type mismatch", t,
                                         expected=ft.arg, found=at)
                return ft.res, max(fe, ae, ft.eff), ffv | afv

            case PrimApp(prim, args):
                sig = prim_signature(prim)
                if len(args) != len(sig) - 1:
                    raise TypeCheckError("T-PrimApp", f"{prim_name(prim)} takes "
                                         f"{len(sig) - 1} arguments, got {len(args)}", t)
                eff, fv = Effect.DET, frozenset()
                for k, (a, want) in enumerate(zip(args, sig)):
                    at, ae, afv = self.synth(env, a)
                    if not subtype(at, want):
                        if isinstance(prim, WienerFn) and isinstance(at, Real):
                            msg = "tangent would reach non-differentiable primitive wiener"
                        else:
                            msg = f"argument {k + 1} of {prim_name(prim)} has the wrong type"
                        raise TypeCheckError("T-PrimApp", msg, t, expected=want, found=at)
                    eff, fv = max(eff, ae), fv | afv
                return sig[-1], eff, fv

            case TupleCon(elems):
                tys, eff, fv = [], Effect.DET, frozenset()
                for e in elems:
                    et, ee, efv = self.synth(env, e)
                    tys.append(et)
                    eff, fv = max(eff, ee), fv | efv
                return tuple_type(tys), eff, fv

            case Proj(index, tup, arity):
                tt, te, tfv = self.synth(env, tup)
                if isinstance(tt, TupleT):
                    n = len(tt.elems)
                    if arity is not None and arity != n:
                        raise TypeCheckError("T-Proj", f"projection expects a {arity}-tuple",
                                             t, found=tt)
                    if not 1 <= index <= n:
                        raise TypeCheckError("T-Proj", f"index {index} out of range for "
                                             f"a {n}-tuple", t, found=tt)
                    return tt.elems[index - 1], te, tfv
                if index == 1 and arity in (None, 1) and tt != UNIT:
                    return tt, te, tfv
                raise TypeCheckError("T-Proj", "projection from a non-tuple", t, found=tt)

            case If(cond, then, else_):
                ct, ce, cfv = self.synth(env, cond)
                if not subtype(ct, R_P):
                    raise TypeCheckError("T-If", "comparand must be piecewise-analytic", t,
                                         expected=R_P, found=ct)
                at, ae, afv = self.synth(env, then)
                bt, be, bfv = self.synth(env, else_)
                try:
                    rt = join(at, bt)
                except TypeCheckError:
                    raise TypeCheckError("T-If", "branches have incompatible types", t,
                                         expected=at, found=bt) from None
                return rt, max(ce, ae, be), cfv | afv | bfv

            case DistCon(dist, params):
                sig = DIST_TYPES[dist]
                eff, fv = Effect.DET, frozenset()
                for k, (a, want) in enumerate(zip(params, sig)):
                    at, ae, afv = self.synth(env, a)
                    if not subtype(at, want):
                        raise TypeCheckError("T-PrimDist", f"parameter {k + 1} of "
                                             f"{dist.value} has the wrong type", t,
                                             expected=want, found=at)
                    eff, fv = max(eff, ae), fv | afv
                return DistT(sig[-1]), eff, fv

            case Assume(x):
                xt, _, xfv = self.synth(env, x)
                if not isinstance(xt, DistT):
                    raise TypeCheckError("T-Assume", "assume needs a distribution", t,
                                         found=xt)
                return xt.support, Effect.RND, xfv

            case Weight(x):
                xt, _, xfv = self.synth(env, x)
                if not subtype(xt, R_N):
                    raise TypeCheckError("T-Weight", "weight needs a non-differentiable real",
                                         t, expected=R_N, found=xt)
                return UNIT, Effect.RND, xfv

            case Infer(f):
                ft, fe, ffv = self.synth(env, f)
                if not isinstance(ft, Arrow) or not subtype(UNIT, ft.arg):
                    raise TypeCheckError("T-Infer", "infer needs a function from ()", t,
                                         expected=Arrow(UNIT, Effect.RND, R_N), found=ft)
                return DistT(ft.res), fe, ffv

            case Diff(d, f, point):
                return self._diff(env, t, d, f, point)

            case Solve(f, y0, x1):
                return self._solve(env, t, f, y0, x1)

            case Jvp(f, point, tangent):
                ft, fe, ffv = self.synth(env, f)
                pt, pe, pfv = self.synth(env, point)
                ut, ue, ufv = self.synth(env, tangent)
                if not isinstance(ft, Arrow) or ft.eff is not Effect.DET:
                    raise TypeCheckError("T-Diff", "cannot differentiate random function", t,
                                         found=ft)
                sa, sp, su = real_shape(ft.arg), real_shape(pt), real_shape(ut)
                if sa is None or sp is None or su is None or not (
                        _same_structure(sa, sp) and _same_structure(sa, su)):
                    raise TypeCheckError("T-Diff", "point and tangent must match the "
                                         "parameter shape", t, expected=ft.arg, found=pt)
                return ft.res, max(fe, pe, ue), ffv | pfv | ufv

        raise TypeCheckError("T-Term", f"unknown term {type(t).__name__}", t)

    def _diff(self, env, t, d, f, point):
        if d not in (Coeffect.A, Coeffect.P):
            raise TypeCheckError("T-Diff", "diff modifier must be A or P", t)
        ft, fe, ffv = self.synth(env, f)
        pt, pe, pfv = self.synth(env, point)
        if not isinstance(ft, Arrow):
            raise TypeCheckError("T-Diff", "can only differentiate functions", t, found=ft)
        if ft.eff is not Effect.DET:
            raise TypeCheckError("T-Diff", "cannot differentiate random function", t, found=ft)
        arg_shape = real_shape(ft.arg)
        if arg_shape is None:
            raise TypeCheckError("T-Diff", "parameter must be built from reals", t,
                                 found=ft.arg)
        if real_shape(ft.res) is None:
            raise TypeCheckError("T-Diff", "result must be built from reals", t,
                                 found=ft.res)
        want = _with_modifier(arg_shape, d)
        if not subtype(want, ft.arg):
            raise TypeCheckError("T-Diff", f"parameter is not differentiable under diff{d.name}",
                                 t, expected=want, found=ft.arg)
        if not subtype(pt, want):
            raise TypeCheckError("T-Diff", "point has the wrong type", t, expected=want, found=pt)
        deriv = Arrow(_with_modifier(arg_shape, Coeffect.A), Effect.DET, ft.res)
        return deriv, max(fe, pe), ffv | pfv

    def _solve(self, env, t, f, y0, x1):
        ft, fe, ffv = self.synth(env, f)
        yt, ye, yfv = self.synth(env, y0)
        xt, xe, xfv = self.synth(env, x1)
        if not isinstance(ft, Arrow):
            raise TypeCheckError("T-Solve", "right-hand side must be a function", t, found=ft)
        if ft.eff is not Effect.DET:
            raise TypeCheckError("T-Solve", "right-hand side must be deterministic", t,
                                 found=ft)
        arg = ft.arg
        if not (isinstance(arg, TupleT) and len(arg.elems) == 2 and isinstance(arg.elems[0], Real)):
            raise TypeCheckError("T-Solve", "right-hand side must take (time, state)", t,
                                 found=arg)
        cx = arg.elems[0].c
        sp, sr, s0 = real_shape(arg.elems[1]), real_shape(ft.res), real_shape(yt)
        if sp is None or sr is None or not _same_structure(sp, sr):
            raise TypeCheckError("T-Solve", "state and derivative must have the same shape", t,
                                 expected=arg.elems[1], found=ft.res)
        if s0 is None or not _same_structure(sp, s0):
            raise TypeCheckError("T-Solve", "initial value has the wrong shape", t,
                                 expected=arg.elems[1], found=yt)
        c = max(Coeffect.P, cx)
        if not subtype(xt, Real(c)):
            raise TypeCheckError("T-Solve", "end time has the wrong type", t,
                                 expected=Real(c), found=xt)
        cv = _zip_shape(min, sr, s0)
        if any(a > b for a, b in zip(_flat(sp), _flat(cv))):
            raise TypeCheckError("T-Solve", "state modifiers do not fit the right-hand side", t,
                                 expected=arg.elems[1], found=_shape_type(cv))
        return _shape_type(cv), max(fe, ye, xe), ffv | yfv | xfv


def infer_type(env: dict, t, positions=None) -> Judgment:
    return Checker(positions).check(dict(env), t)


def check_program(t, allow_random: bool = False, positions=None):
    """Type of a closed program; top-level randomness needs ``allow_random``."""
    j = infer_type({}, t, positions)
    if j.effect is Effect.RND and not allow_random:
        raise TypeCheckError("T-Top", "top-level term is random (use --allow-random or wrap "
                             "it in infer)", t, found=j.type,
                             position=(positions or {}).get(id(t)))
    return j.type

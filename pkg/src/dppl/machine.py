"""Fast evaluator: terms compiled to Python closures over flat environments.

Variables are resolved to environment slots at compile time, lambdas
capture only their free variables, and ``let`` (an applied lambda) extends
the environment in place of allocating a closure.  Values are native: floats
or duals for reals, tuples, and the value classes below for functions,
distributions and inferred distributions.

Evaluation order, arithmetic and seed consumption are the same as in the
small-step machine of :mod:`dppl.eval`, so both produce the same values,
weights and seed positions; the test suite checks this on generated terms.
"""

from __future__ import annotations

import math
from operator import itemgetter

from dppl import ad
from dppl.ast import (
    R_N, UNIT_TERM, Abs, App, Assume, Diff, DistCon, If, Infer, Jvp, Prim,
    PrimApp, PrimDist, Proj, RealLit, Solve, TupleCon, Var, Weight, WienerFn,
    free_vars, subst,
)
from dppl.dist import quantile, wiener_path
from dppl.eval import (
    Explicit, SeedExhausted, StuckError, dist_params, from_native, prim_apply,
    shape_type, to_native,
)
from dppl.ode import solve_impl
from dppl.runtime import Runtime

NEG_INF = float("-inf")
DualReal = ad.DualReal


class Closure:
    __slots__ = ("code", "env", "term", "names")

    def __init__(self, code, env, term, names):
        self.code = code      # compiled body, called with env + (arg,)
        self.env = env        # captured values, in the order of ``names``
        self.term = term      # the source Abs
        self.names = names


class WienerSample:
    """The function value produced by assuming from Wiener()."""

    __slots__ = ("p", "path")

    def __init__(self, p):
        self.p = p
        self.path = wiener_path(p)


class Derivative:
    """Result of diff: the directional derivative of ``f`` at ``point``."""

    __slots__ = ("f", "point")

    def __init__(self, f, point):
        self.f = f
        self.point = point


class DistV:
    __slots__ = ("dist", "params")

    def __init__(self, dist, params):
        self.dist = dist
        self.params = params


class InferV:
    __slots__ = ("model",)

    def __init__(self, model):
        self.model = model


class State:
    __slots__ = ("log_weight", "seed")

    def __init__(self, seed):
        self.log_weight = 0.0
        self.seed = seed


def _const(r):
    return lambda env: r


class Evaluator:
    def __init__(self, rt: "Runtime | None" = None):
        self.rt = rt or Runtime()
        self.st = None

    # public API -----------------------------------------------------------

    def compile(self, t, scope=()):
        return self._c(t, tuple(scope))

    def value_of(self, t):
        """Evaluate a closed term that needs no randomness."""
        return self.compile(t)(())

    def run_term(self, t, seed):
        """Evaluate ``t`` on ``seed``; returns (value, log_weight)."""
        code = self.compile(t)
        return self._run(lambda: code(()), seed)

    def run_particle(self, model, seed):
        return self._run(lambda: self.call(model, ()), seed)

    def _run(self, thunk, seed):
        saved = self.st
        self.st = st = State(seed)
        try:
            v = thunk()
        except SeedExhausted:
            return (), NEG_INF
        finally:
            self.st = saved
        if isinstance(st.seed, Explicit) and not st.seed.exhausted:
            return (), NEG_INF
        return v, st.log_weight

    def call(self, f, arg):
        if type(f) is Closure:
            return f.code(f.env + (arg,))
        if type(f) is WienerSample:
            return f.path(ad.require_plain(arg, "wiener"))
        if type(f) is Derivative:
            return ad.jvp(self.call, f.f, f.point, arg)
        raise StuckError(f"cannot apply {type(f).__name__}")

    # conversions ------------------------------------------------------------

    def readback(self, v):
        """The value term denoted by a native value."""
        if type(v) is float or type(v) is DualReal:
            return RealLit(v)
        if type(v) is tuple:
            return TupleCon(tuple(self.readback(e) for e in v))
        if type(v) is Closure:
            t = v.term
            for name, val in zip(v.names, v.env):
                t = subst(t, name, self.readback(val))
            return t
        if type(v) is WienerSample:
            return Abs("x", R_N, PrimApp(WienerFn(v.p), (Var("x"),)))
        if type(v) is Derivative:
            point = self.readback(v.point)
            return Abs("u", shape_type(v.point), Jvp(self.readback(v.f), point, Var("u")))
        if type(v) is DistV:
            return DistCon(v.dist, tuple(RealLit(p) for p in v.params))
        if type(v) is InferV:
            return Infer(self.readback(v.model))
        raise TypeError(f"cannot read back {type(v).__name__}")

    def reflect(self, t):
        """Native value of a closed value term."""
        return self.value_of(t)

    # compilation --------------------------------------------------------------

    def _c(self, t, scope):
        match t:
            case Var(name):
                for i in range(len(scope) - 1, -1, -1):
                    if scope[i] == name:
                        return itemgetter(i)
                raise StuckError(f"free variable {name}", t)

            case RealLit(r):
                return _const(r)

            case Abs(param, _, body):
                fv = sorted(free_vars(t))
                idx = []
                for name in fv:
                    for i in range(len(scope) - 1, -1, -1):
                        if scope[i] == name:
                            idx.append(i)
                            break
                    else:
                        raise StuckError(f"free variable {name}", t)
                names = tuple(fv)
                body_code = self._c(body, names + (param,))
                if not idx:
                    def code(env, body_code=body_code, t=t):
                        return Closure(body_code, (), t, ())
                else:
                    pick = itemgetter(*idx) if len(idx) > 1 else None
                    if pick is None:
                        i0 = idx[0]

                        def code(env, body_code=body_code, t=t, names=names, i0=i0):
                            return Closure(body_code, (env[i0],), t, names)
                    else:
                        def code(env, body_code=body_code, t=t, names=names, pick=pick):
                            return Closure(body_code, pick(env), t, names)
                return code

            case App(Abs(param, _, body), bound):
                b = self._c(bound, scope)
                k = self._c(body, scope + (param,))
                return lambda env: k(env + (b(env),))

            case App(fn, arg):
                f = self._c(fn, scope)
                a = self._c(arg, scope)
                call = self.call

                def code(env):
                    fv = f(env)
                    av = a(env)
                    if type(fv) is Closure:
                        return fv.code(fv.env + (av,))
                    return call(fv, av)
                return code

            case PrimApp(prim, args):
                return self._prim(prim, [self._c(a, scope) for a in args])

            case TupleCon(elems):
                cs = [self._c(e, scope) for e in elems]
                if not cs:
                    return _const(())
                if len(cs) == 2:
                    c0, c1 = cs
                    return lambda env: (c0(env), c1(env))
                if len(cs) == 3:
                    c0, c1, c2 = cs
                    return lambda env: (c0(env), c1(env), c2(env))
                return lambda env: tuple([c(env) for c in cs])

            case Proj(index, tup, arity):
                c = self._c(tup, scope)
                i = index - 1

                def code(env):
                    v = c(env)
                    if type(v) is tuple:
                        if arity is not None and arity != len(v) or i >= len(v):
                            raise StuckError(f"projection .{index} from a {len(v)}-tuple")
                        return v[i]
                    if i == 0 and arity in (None, 1):
                        return v
                    raise StuckError(f"projection .{index} from a non-tuple")
                return code

            case If(cond, then, else_):
                c = self._c(cond, scope)
                a = self._c(then, scope)
                b = self._c(else_, scope)

                def code(env):
                    r = c(env)
                    if type(r) is DualReal:
                        r = ad.primal(r)
                    elif type(r) is not float:
                        raise StuckError("comparand is not a real")
                    return a(env) if r > 0 else b(env)
                return code

            case DistCon(dist, params):
                cs = [self._c(p, scope) for p in params]
                return lambda env: DistV(dist, tuple([c(env) for c in cs]))

            case Infer(f):
                c = self._c(f, scope)
                return lambda env: InferV(c(env))

            case Weight(x):
                c = self._c(x, scope)

                def code(env):
                    r = ad.require_plain(c(env), "weight")
                    st = self.st
                    if st is None:
                        raise StuckError("random construct under deterministic evaluation")
                    st.log_weight += math.log(r) if r > 0 else NEG_INF
                    return ()
                return code

            case Assume(x):
                c = self._c(x, scope)
                return lambda env: self._assume(c(env))

            case Diff(_, f, point):
                cf = self._c(f, scope)
                cp = self._c(point, scope)
                return lambda env: Derivative(cf(env), cp(env))

            case Jvp(f, point, tangent):
                cf = self._c(f, scope)
                cp = self._c(point, scope)
                cu = self._c(tangent, scope)
                return lambda env: ad.jvp(self.call, cf(env), cp(env), cu(env))

            case Solve(f, y0, x1):
                cf = self._c(f, scope)
                cy = self._c(y0, scope)
                cx = self._c(x1, scope)
                call, rt = self.call, self.rt
                return lambda env: solve_impl(call, cf(env), cy(env), cx(env), rt.ode)

        raise StuckError(f"cannot compile {type(t).__name__}", t)

    def _prim(self, prim, cs):
        if prim is Prim.ADD or prim is Prim.SUB or prim is Prim.MUL or prim is Prim.DIV:
            a, b = cs
            if prim is Prim.ADD:
                slow = ad.add

                def code(env):
                    x = a(env)
                    y = b(env)
                    if type(x) is float and type(y) is float:
                        return x + y
                    return slow(x, y)
            elif prim is Prim.SUB:
                slow = ad.sub

                def code(env):
                    x = a(env)
                    y = b(env)
                    if type(x) is float and type(y) is float:
                        return x - y
                    return slow(x, y)
            elif prim is Prim.MUL:
                slow = ad.mul

                def code(env):
                    x = a(env)
                    y = b(env)
                    if type(x) is float and type(y) is float:
                        return x * y
                    return slow(x, y)
            else:
                slow = ad.div

                def code(env):
                    x = a(env)
                    y = b(env)
                    if type(x) is float and type(y) is float:
                        return x / y if y != 0.0 else 0.0
                    return slow(x, y)
            return code
        if prim is Prim.SIN:
            (a,) = cs
            return lambda env: ad.sin(a(env))
        if prim is Prim.COS:
            (a,) = cs
            return lambda env: ad.cos(a(env))
        if isinstance(prim, WienerFn):
            (a,) = cs
            path = wiener_path(prim.p)
            return lambda env: path(ad.require_plain(a(env), "wiener"))
        return lambda env: prim_apply(prim, [c(env) for c in cs])

    def _assume(self, d):
        st = self.st
        if st is None:
            raise StuckError("random construct under deterministic evaluation")
        popped = st.seed.pop()
        if popped is None:
            raise SeedExhausted()
        p, st.seed = popped
        if type(d) is DistV:
            if d.dist is PrimDist.WIENER:
                return WienerSample(p)
            return quantile(d.dist.value, dist_params(d.params), p)
        if type(d) is InferV:
            from dppl.infer import materialize

            dist = materialize(self.readback(d.model), self.rt, engine="machine")
            return self.reflect(dist.quantile(p))
        raise StuckError("assume from a non-distribution")


def native_to_term(v):
    return Evaluator().readback(v)


__all__ = ["Evaluator", "Closure", "WienerSample", "Derivative", "DistV", "InferV",
           "native_to_term", "to_native", "from_native", "UNIT_TERM"]

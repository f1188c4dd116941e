"""Reference small-step evaluator: call-by-value substitution semantics.

``step_det`` performs one deterministic reduction, ``step_rnd`` one
sampling-based reduction threading ``RunState``.  The redex is found through
the evaluation contexts: left to right, never under a lambda, and only the
comparand of an ``if``.  Implementing functions (``diff``, ``solve``,
``infer``) run on native values; their function arguments are evaluated by
this same machine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from dppl import ad
from dppl.ast import (
    R_N, UNIT_TERM, Abs, App, Assume, Coeffect, Diff, DistCon, If, Infer, Jvp,
    Prim, PrimApp, PrimDist, Proj, RealLit, Solve, TupleCon, Var, Weight,
    WienerFn, is_value, subst, tuple_type, Real,
)
from dppl.dist import quantile, uniform, wiener_path
from dppl.ode import solve_impl
from dppl.pretty import pretty
from dppl.runtime import Runtime

NEG_INF = float("-inf")


# ---------------------------------------------------------------------------
# Seeds and run state


@dataclass(frozen=True)
class Explicit:
    """A finite seed: the list of uniforms still to be consumed."""

    values: tuple = ()

    def pop(self):
        if not self.values:
            return None
        p = float(self.values[0])
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"seed value {p!r} outside [0, 1]")
        return p, Explicit(self.values[1:])

    @property
    def exhausted(self) -> bool:
        return not self.values


@dataclass(frozen=True)
class Generated:
    """An unbounded counter-based stream: draw k is uniform(key, k)."""

    key: int
    counter: int = 0

    def pop(self):
        return uniform(self.key, self.counter), Generated(self.key, self.counter + 1)

    @property
    def exhausted(self) -> bool:
        return False


@dataclass(frozen=True)
class RunState:
    log_weight: float = 0.0
    seed: object = field(default_factory=Explicit)

    @property
    def weight(self) -> float:
        return math.exp(self.log_weight)


@dataclass(frozen=True)
class Stepped:
    term: object
    rule: str


@dataclass(frozen=True)
class IsValue:
    value: object


@dataclass(frozen=True)
class Stuck:
    diagnostic: str


class StuckError(RuntimeError):
    def __init__(self, diagnostic, term=None):
        super().__init__(diagnostic)
        self.diagnostic = diagnostic
        self.term = term


class FuelExhausted(RuntimeError):
    pass


class SeedExhausted(Exception):
    pass


# ---------------------------------------------------------------------------
# Native values at the implementing-function boundary


def to_native(v):
    match v:
        case RealLit(r):
            return r
        case TupleCon(elems):
            return tuple(to_native(e) for e in elems)
    return v


def from_native(x):
    if isinstance(x, tuple):
        return TupleCon(tuple(from_native(e) for e in x))
    if isinstance(x, (float, ad.DualReal)):
        return RealLit(x)
    if isinstance(x, int):
        return RealLit(float(x))
    return x


def shape_type(x, c=Coeffect.A):
    """Real type mirroring the tuple structure of a native real-shaped value."""
    if isinstance(x, tuple):
        return tuple_type(shape_type(e, c) for e in x)
    return Real(c)


def prim_apply(prim, args):
    """⟦φ⟧ on native reals (floats or duals)."""
    match prim:
        case Prim.ADD:
            return ad.add(*args)
        case Prim.SUB:
            return ad.sub(*args)
        case Prim.MUL:
            return ad.mul(*args)
        case Prim.DIV:
            return ad.div(*args)
        case Prim.SIN:
            return ad.sin(args[0])
        case Prim.COS:
            return ad.cos(args[0])
        case Prim.PDF_GAUSSIAN:
            return ad.pdf_gaussian(*args)
        case Prim.PDF_BETA:
            return ad.pdf_beta(*args)
        case WienerFn(p):
            return wiener_path(p)(ad.require_plain(args[0], "wiener"))
    raise StuckError(f"unknown primitive {prim!r}")


def dist_params(params):
    return tuple(ad.require_plain(p, "distribution parameter") for p in params)


def sample_prim_dist(dist: PrimDist, params, p: float):
    """Native sample for E-AssumeDist; Wiener is handled by the caller."""
    return quantile(dist.value, dist_params(params), p)


# ---------------------------------------------------------------------------
# Small-step machine


def _ctx_children(t):
    """Immediate subterms that evaluation contexts may descend into."""
    match t:
        case App(f, a):
            return (f, a)
        case PrimApp(args=args) | TupleCon(elems=args) | DistCon(params=args):
            return args
        case Proj(tup=x) | Assume(x) | Weight(x) | Infer(x):
            return (x,)
        case If(cond=c):
            return (c,)
        case Diff(_, f, x):
            return (f, x)
        case Solve(f, y0, x1):
            return (f, y0, x1)
        case Jvp(f, x, u):
            return (f, x, u)
    return ()


def _replace(t, i, new):
    match t:
        case App(f, a):
            return App(new, a) if i == 0 else App(f, new)
        case PrimApp(prim, args):
            return PrimApp(prim, args[:i] + (new,) + args[i + 1:])
        case TupleCon(elems):
            return TupleCon(elems[:i] + (new,) + elems[i + 1:])
        case DistCon(dist, params):
            return DistCon(dist, params[:i] + (new,) + params[i + 1:])
        case Proj(index, _, arity):
            return Proj(index, new, arity)
        case Assume():
            return Assume(new)
        case Weight():
            return Weight(new)
        case Infer():
            return Infer(new)
        case If(_, a, b):
            return If(new, a, b)
        case Diff(d, f, x):
            return Diff(d, new, x) if i == 0 else Diff(d, f, new)
        case Solve(f, y0, x1):
            kids = [f, y0, x1]
            kids[i] = new
            return Solve(*kids)
        case Jvp(f, x, u):
            kids = [f, x, u]
            kids[i] = new
            return Jvp(*kids)
    raise StuckError(f"no evaluation context in {type(t).__name__}")


class Machine:
    """Small-step reduction under a fixed Runtime."""

    def __init__(self, rt: "Runtime | None" = None):
        self.rt = rt or Runtime(engine="smallstep")

    # one step -------------------------------------------------------------

    def step_det(self, t):
        if is_value(t):
            return IsValue(t)
        try:
            new, rule, _ = self._reduce(t, None)
        except StuckError as err:
            return Stuck(err.diagnostic)
        return Stepped(new, rule)

    def step_rnd(self, t, st: RunState):
        """Returns (StepResult, RunState).  Raises SeedExhausted."""
        if is_value(t):
            return IsValue(t), st
        try:
            new, rule, st2 = self._reduce(t, st)
        except StuckError as err:
            return Stuck(err.diagnostic), st
        return Stepped(new, rule), st2

    def _reduce(self, t, st):
        kids = _ctx_children(t)
        for i, k in enumerate(kids):
            if not is_value(k):
                new, rule, st = self._reduce(k, st)
                return _replace(t, i, new), rule, st
        return self._contract(t, st)

    def _contract(self, t, st):
        match t:
            case App(Abs(x, _, body), v):
                return subst(body, x, v), "E-App", st
            case PrimApp(prim, args) if all(isinstance(a, RealLit) for a in args):
                return RealLit(prim_apply(prim, [a.r for a in args])), "E-PrimApp", st
            case Proj(i, TupleCon(elems), arity):
                if not 1 <= i <= len(elems) or arity not in (None, len(elems)):
                    raise StuckError(f"projection .{i} from a {len(elems)}-tuple", t)
                return elems[i - 1], "E-Proj", st
            case Proj(1, v, arity) if arity in (None, 1) and not isinstance(v, TupleCon):
                return v, "E-Proj", st
            case If(RealLit(r), a, b):
                if ad.primal(r) > 0:
                    return a, "E-IfTrue", st
                return b, "E-IfFalse", st
            case Diff(_, f, x):
                point = to_native(x)
                u = "u"
                return Abs(u, shape_type(point), Jvp(f, x, Var(u))), "E-Diff", st
            case Jvp(f, x, u):
                out = ad.jvp(self.apply, f, to_native(x), to_native(u))
                return from_native(out), "E-Jvp", st
            case Solve(f, y0, x1):
                out = solve_impl(self.apply, f, to_native(y0), to_native(x1), self.rt.ode)
                return from_native(out), "E-Solve", st
            case Weight(RealLit(r)) if st is not None:
                r = ad.require_plain(r, "weight")
                lw = st.log_weight + (math.log(r) if r > 0 else NEG_INF)
                return UNIT_TERM, "E-Weight", RunState(lw, st.seed)
            case Assume(v) if st is not None and isinstance(v, (DistCon, Infer)):
                popped = st.seed.pop()
                if popped is None:
                    raise SeedExhausted()
                p, rest = popped
                st2 = RunState(st.log_weight, rest)
                match v:
                    case DistCon(PrimDist.WIENER, ()):
                        body = PrimApp(WienerFn(p), (Var("x"),))
                        return Abs("x", R_N, body), "E-AssumeWiener", st2
                    case DistCon(dist, params):
                        r = sample_prim_dist(dist, [a.r for a in params], p)
                        return RealLit(r), "E-AssumeDist", st2
                    case Infer(model):
                        return self.infer_dist(model).quantile(p), "E-AssumeInfer", st2
            case Weight() | Assume() if st is None:
                raise StuckError("random construct under deterministic reduction", t)
            case Var(name):
                raise StuckError(f"free variable {name}", t)
        raise StuckError(f"no reduction rule applies to {pretty(t)}", t)

    # implementing functions ----------------------------------------------

    def apply(self, f, x):
        """Evaluate the function value f on a native argument (deterministic)."""
        return to_native(self.run_det(App(f, from_native(x))))

    def run_det(self, t, fuel=None):
        steps = 0
        while True:
            r = self.step_det(t)
            if isinstance(r, IsValue):
                return r.value
            if isinstance(r, Stuck):
                raise StuckError(r.diagnostic, t)
            t = r.term
            steps += 1
            if fuel is not None and steps >= fuel:
                raise FuelExhausted(f"no value after {fuel} steps")

    def infer_dist(self, model):
        from dppl.infer import materialize

        return materialize(model, self.rt, engine="smallstep")

    # iteration -------------------------------------------------------------

    def eval(self, t, st: RunState, fuel=None, trace=None):
        """Reduce to a value.  Returns (value, final RunState).

        With an explicit seed, running out of seed or leaving part of it
        unused yields ``((), -inf)``: the result/density convention for
        runs that do not consume exactly their seed.
        """
        steps = 0
        while True:
            try:
                r, st2 = self.step_rnd(t, st)
            except SeedExhausted:
                return UNIT_TERM, RunState(NEG_INF, st.seed)
            if isinstance(r, IsValue):
                if isinstance(st.seed, Explicit) and not st.seed.exhausted:
                    return UNIT_TERM, RunState(NEG_INF, st.seed)
                return r.value, st
            if isinstance(r, Stuck):
                raise StuckError(r.diagnostic, t)
            if fuel is not None and steps >= fuel:
                raise FuelExhausted(f"no value after {fuel} steps")
            t, st = r.term, st2
            steps += 1
            if trace is not None:
                trace(steps, r.rule, t)


def step_det(t, rt=None):
    return Machine(rt).step_det(t)


def step_rnd(t, st, rt=None):
    return Machine(rt).step_rnd(t, st)


def evaluate(t, st=None, fuel=None, rt=None, trace=None):
    return Machine(rt).eval(t, st or RunState(), fuel, trace)

"""Random generator of closed, well-typed terms for the theorem suite.

Terms are built top-down from a small grammar guided by the intended type
(reals, pairs of reals, real functions, distributions).  Candidates are then
filtered through the type checker, so the generator only has to be mostly
right.  Everything is driven by one ``random.Random`` and is reproducible.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from dppl.ast import (
    Abs, App, Arrow, Assume, Coeffect, Diff, DistCon, Effect, If, Infer, Prim,
    PrimApp, PrimDist, Proj, Real, RealLit, Solve, TupleCon, TupleT, Var, Weight,
    is_value, let,
)
from dppl.typer import TypeCheckError, check_program

A, P, N = Coeffect.A, Coeffect.P, Coeffect.N
LITERALS = (-2.0, -1.5, -1.0, -0.5, 0.0, 0.25, 0.5, 1.0, 2.0, 3.0)
POSITIVE = (0.5, 1.0, 2.0)


@dataclass
class Gen:
    rng: random.Random
    max_depth: int = 6
    allow_infer: bool = True
    counter: int = 0
    env: dict = field(default_factory=dict)

    def fresh(self, base="v"):
        self.counter += 1
        return f"{base}{self.counter}"

    def lit(self):
        return RealLit(self.rng.choice(LITERALS))

    def pos(self):
        return RealLit(self.rng.choice(POSITIVE))

    def vars_of(self, env, pred):
        return [name for name, ty in env.items() if pred(ty)]

    # reals --------------------------------------------------------------------

    def real(self, env, depth, rnd):
        """A term meant to have a real type, possibly random if ``rnd``."""
        rng = self.rng
        reals = self.vars_of(env, lambda t: isinstance(t, Real))
        if depth <= 0 or rng.random() < 0.15:
            if reals and rng.random() < 0.7:
                return Var(rng.choice(reals))
            return self.lit()
        d = depth - 1
        options = ["arith", "arith", "trig", "if", "let", "app", "proj", "diff",
                   "solve", "pdf", "call", "tuple_let"]
        if rnd:
            options += ["assume", "assume", "weight", "wiener", "beta"]
            if self.allow_infer and depth >= 3:
                options.append("infer")
        kind = rng.choice(options)
        match kind:
            case "arith":
                op = rng.choice((Prim.ADD, Prim.SUB, Prim.MUL, Prim.DIV))
                return PrimApp(op, (self.real(env, d, rnd), self.real(env, d, rnd)))
            case "trig":
                return PrimApp(rng.choice((Prim.SIN, Prim.COS)), (self.real(env, d, rnd),))
            case "if":
                return If(self.real(env, d, rnd), self.real(env, d, rnd), self.real(env, d, rnd))
            case "let":
                x = self.fresh("x")
                bound = self.any_value_term(env, d, rnd)
                ty = bound[1]
                return let(x, bound[0], self.real({**env, x: ty}, d, rnd))
            case "app":
                x = self.fresh("x")
                c = rng.choice((A, P, N))
                body = self.real({**env, x: Real(c)}, d, rnd)
                return App(Abs(x, Real(c), body), self.real(env, d, rnd))
            case "proj":
                i = rng.choice((1, 2))
                return Proj(i, TupleCon((self.real(env, d, rnd), self.real(env, d, rnd))), 2)
            case "tuple_let":
                p = self.fresh("p")
                pair = TupleCon((self.real(env, d, rnd), self.real(env, d, rnd)))
                inner = {**env, p: TupleT((Real(N), Real(N)))}
                return let(p, pair, PrimApp(Prim.ADD, (Proj(1, Var(p), 2),
                                                        self.real(inner, d, rnd))))
            case "diff":
                x = self.fresh("x")
                dm = rng.choice((A, P))
                body = self.real({**env, x: Real(dm)}, d, False)
                f = Abs(x, Real(dm), body)
                return App(Diff(dm, f, self.real(env, d, rnd)), self.lit())
            case "solve":
                x, y = self.fresh("t"), self.fresh("y")
                q = self.fresh("q")
                inner = {**env, x: Real(N), y: Real(A)}
                body = PrimApp(Prim.SUB, (PrimApp(Prim.SIN, (self.real(inner, d, False),)), Var(y)))
                rhs = Abs(q, TupleT((Real(N), Real(A))),
                          let(x, Proj(1, Var(q), 2), let(y, Proj(2, Var(q), 2), body)))
                x1 = RealLit(rng.choice((0.0, 0.1, 0.25, 0.5)))
                return Solve(rhs, self.real(env, d, rnd), x1)
            case "pdf":
                return PrimApp(Prim.PDF_GAUSSIAN, (self.real(env, d, rnd), self.pos(),
                                                   self.real(env, d, rnd)))
            case "call":
                fns = self.vars_of(env, lambda t: isinstance(t, Arrow))
                if fns:
                    return App(Var(rng.choice(fns)), self.real(env, d, rnd))
                return self.real(env, d, rnd)
            case "assume":
                return Assume(DistCon(PrimDist.GAUSSIAN, (self.real(env, d, rnd), self.pos())))
            case "beta":
                return Assume(DistCon(PrimDist.BETA, (self.pos(), self.pos())))
            case "weight":
                return let("_", Weight(self.real(env, d, rnd)), self.real(env, d, rnd))
            case "wiener":
                w = self.fresh("w")
                body = self.real({**env, w: Arrow(Real(N), Effect.DET, Real(N))}, d, rnd)
                arg = self.real(env, d, False)
                return let(w, Assume(DistCon(PrimDist.WIENER, ())),
                           PrimApp(Prim.ADD, (App(Var(w), arg), body)))
            case "infer":
                saved = self.allow_infer
                self.allow_infer = False
                model = Abs(self.fresh("u"), TupleT(()), self.real(env, min(d, 3), True))
                self.allow_infer = saved
                return Assume(Infer(model))
        raise AssertionError(kind)

    def any_value_term(self, env, depth, rnd):
        """(term, intended binder type) for let-bound values of several kinds."""
        rng = self.rng
        kind = rng.choice(("real", "real", "fn", "pair"))
        if kind == "fn":
            x = self.fresh("x")
            c = rng.choice((A, P, N))
            body = self.real({**env, x: Real(c)}, depth, False)
            return Abs(x, Real(c), body), Arrow(Real(c), Effect.DET, Real(N))
        if kind == "pair":
            t = TupleCon((self.real(env, depth, rnd), self.real(env, depth, rnd)))
            return t, TupleT((Real(N), Real(N)))
        return self.real(env, depth, rnd), Real(N)

    # top level ------------------------------------------------------------------

    def program(self, rnd: bool):
        rng = self.rng
        d = rng.randint(3, self.max_depth)
        kind = rng.choice(("real", "real", "real", "pair", "fn", "dist"))
        match kind:
            case "pair":
                return TupleCon((self.real({}, d - 1, rnd), self.real({}, d - 1, rnd)))
            case "fn":
                x = self.fresh("x")
                c = rng.choice((A, P, N))
                return Abs(x, Real(c), self.real({x: Real(c)}, d - 1, rnd))
            case "dist":
                return Infer(Abs(self.fresh("u"), TupleT(()), self.real({}, min(d - 1, 4), True)))
        return self.real({}, d, rnd)


def depth(t) -> int:
    from dppl.ast import children

    kids = children(t)
    return 1 + max((depth(k) for k in kids), default=0)


def generate(count: int, seed: int = 0, max_depth: int = 6, rnd_fraction: float = 0.5):
    """``count`` distinct closed well-typed terms of depth at most ``max_depth``
    (counted in constructor nesting of the generator, not of desugared lets).

    Returns a list of (term, type, effect).
    """
    from dppl.typer import infer_type

    rng = random.Random(seed)
    g = Gen(rng, max_depth=max_depth)
    out, seen = [], set()
    attempts = 0
    while len(out) < count:
        attempts += 1
        if attempts > 200 * count:
            raise RuntimeError("term generator acceptance rate too low")
        rnd = rng.random() < rnd_fraction
        t = g.program(rnd)
        if is_value(t) and not isinstance(t, Abs):
            continue
        try:
            check_program(t, allow_random=True)
        except TypeCheckError:
            continue
        key = repr(t)
        if key in seen:
            continue
        seen.add(key)
        j = infer_type({}, t)
        out.append((t, j.type, j.effect))
    return out

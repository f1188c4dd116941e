"""Forward-mode AD with dynamically tagged dual numbers.

A perturbed real is ``DualReal(tag, primal, tangent)``.  Primal and tangent
may themselves be perturbed, but only by strictly smaller tags, so a value
under several live derivative computations is a nested tower ordered by
tag.  Binary operations split both operands on the larger of their top
tags, which keeps perturbations of different ``diff`` invocations apart
(no perturbation confusion).

Plain reals are Python floats throughout; a float is a dual with every
tangent equal to zero.
"""

from __future__ import annotations

import itertools
import math
import threading

from scipy.special import polygamma as _sc_polygamma


class NonDifferentiable(RuntimeError):
    """A perturbed real reached a primitive that has no derivative."""


class DualReal:
    __slots__ = ("tag", "primal", "tangent")

    def __init__(self, tag: int, primal, tangent):
        self.tag = tag
        self.primal = primal
        self.tangent = tangent

    def __repr__(self):
        return f"Dual[{self.tag}]({self.primal!r}, {self.tangent!r})"

    def __eq__(self, other):
        return (isinstance(other, DualReal) and self.tag == other.tag
                and self.primal == other.primal and self.tangent == other.tangent)

    def __hash__(self):
        return hash((self.tag, self.primal, self.tangent))


_tag_lock = threading.Lock()
_tags = itertools.count(1)


def fresh_tag() -> int:
    with _tag_lock:
        return next(_tags)


def primal(x) -> float:
    """Innermost float of a (possibly nested) dual."""
    while type(x) is DualReal:
        x = x.primal
    return x


def _mk(tag, p, t):
    if type(t) is float and t == 0.0:
        return p
    return DualReal(tag, p, t)


def _split(x, tag):
    if type(x) is DualReal and x.tag == tag:
        return x.primal, x.tangent
    return x, 0.0


def _top(a, b):
    ta = a.tag if type(a) is DualReal else 0
    tb = b.tag if type(b) is DualReal else 0
    return ta if ta > tb else tb


# ---------------------------------------------------------------------------
# Lifted elementary functions


def add(a, b):
    if type(a) is float and type(b) is float:
        return a + b
    t = _top(a, b)
    ap, at = _split(a, t)
    bp, bt = _split(b, t)
    return _mk(t, add(ap, bp), add(at, bt))


def sub(a, b):
    if type(a) is float and type(b) is float:
        return a - b
    t = _top(a, b)
    ap, at = _split(a, t)
    bp, bt = _split(b, t)
    return _mk(t, sub(ap, bp), sub(at, bt))


def mul(a, b):
    if type(a) is float and type(b) is float:
        return a * b
    t = _top(a, b)
    ap, at = _split(a, t)
    bp, bt = _split(b, t)
    return _mk(t, mul(ap, bp), add(mul(ap, bt), mul(at, bp)))


def div(a, b):
    """Quotient; a zero denominator gives 0 with zero tangents."""
    if type(a) is float and type(b) is float:
        return a / b if b != 0.0 else 0.0
    if primal(b) == 0.0:
        return 0.0
    t = _top(a, b)
    ap, at = _split(a, t)
    bp, bt = _split(b, t)
    q = div(ap, bp)
    return _mk(t, q, div(sub(at, mul(q, bt)), bp))


def neg(a):
    return sub(0.0, a)


def sin(a):
    if type(a) is float:
        return math.sin(a)
    p, t = a.primal, a.tangent
    return _mk(a.tag, sin(p), mul(cos(p), t))


def cos(a):
    if type(a) is float:
        return math.cos(a)
    p, t = a.primal, a.tangent
    return _mk(a.tag, cos(p), neg(mul(sin(p), t)))


def exp(a):
    if type(a) is float:
        return math.exp(a)
    e = exp(a.primal)
    return _mk(a.tag, e, mul(e, a.tangent))


def log(a):
    """Natural log; only called on positive primals."""
    if type(a) is float:
        return math.log(a)
    return _mk(a.tag, log(a.primal), div(a.tangent, a.primal))


def log1p(a):
    if type(a) is float:
        return math.log1p(a)
    return _mk(a.tag, log1p(a.primal), div(a.tangent, add(1.0, a.primal)))


def polygamma(n: int, a):
    """polygamma(n, a) with polygamma(-1, .) read as lgamma."""
    if type(a) is float:
        if n < 0:
            return math.lgamma(a)
        return float(_sc_polygamma(n, a))
    return _mk(a.tag, polygamma(n, a.primal), mul(polygamma(n + 1, a.primal), a.tangent))


def lgamma(a):
    return polygamma(-1, a)


_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def pdf_gaussian(mu, sigma, x):
    if type(mu) is float and type(sigma) is float and type(x) is float:
        if not sigma > 0:
            return 0.0
        z = (x - mu) / sigma
        return math.exp(-0.5 * z * z - _LOG_SQRT_2PI) / sigma
    if not primal(sigma) > 0:
        return 0.0
    z = div(sub(x, mu), sigma)
    return div(exp(sub(mul(-0.5, mul(z, z)), _LOG_SQRT_2PI)), sigma)


def pdf_beta(a, b, x):
    pa, pb, px = primal(a), primal(b), primal(x)
    if not (pa > 0 and pb > 0) or not 0.0 < px < 1.0:
        return 0.0
    if type(a) is float and type(b) is float and type(x) is float:
        lb = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
        return math.exp((a - 1.0) * math.log(x) + (b - 1.0) * math.log1p(-x) - lb)
    lb = sub(add(lgamma(a), lgamma(b)), lgamma(add(a, b)))
    s = add(mul(sub(a, 1.0), log(x)), mul(sub(b, 1.0), log1p(neg(x))))
    return exp(sub(s, lb))


def require_plain(x, where: str) -> float:
    """Defensive check at non-differentiable primitives."""
    if type(x) is DualReal:
        raise NonDifferentiable(f"tangent reached non-differentiable primitive {where}")
    return x


# ---------------------------------------------------------------------------
# Derivatives of real-shaped functions


def perturb(point, tangent, tag):
    """Tag every real leaf of ``point`` with the matching leaf of ``tangent``."""
    if isinstance(point, tuple):
        if not isinstance(tangent, tuple) or len(tangent) != len(point):
            raise ValueError("tangent does not match the shape of the point")
        return tuple(perturb(p, u, tag) for p, u in zip(point, tangent))
    return _mk(tag, point, tangent)


def tangent_of(value, tag):
    """Coefficient of ``tag`` in every real leaf of ``value``."""
    if isinstance(value, tuple):
        return tuple(tangent_of(v, tag) for v in value)
    if type(value) is DualReal and value.tag == tag:
        return value.tangent
    if type(value) is DualReal and value.tag > tag:
        raise RuntimeError("perturbation escaped its derivative computation")
    return 0.0


def jvp(apply, f, point, tangent):
    """Directional derivative of ``f`` at ``point`` along ``tangent``.

    ``apply(f, x)`` evaluates the function value ``f`` on a native argument.
    A fresh tag is allocated per call, so nested and repeated derivative
    computations never share perturbations.
    """
    tag = fresh_tag()
    out = apply(f, perturb(point, tangent, tag))
    return tangent_of(out, tag)

"""Fixed-step Euler and RK4 integrators over native (possibly dual) values.

The right-hand side is any function value; ``apply(rhs, (x, y))`` evaluates
it.  All arithmetic goes through :mod:`dppl.ad`, so tangents carried by the
initial value, the end time or values captured by the right-hand side flow
through the solver and ``diff`` of ``solve`` differentiates the integrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from dppl import ad


class OdeDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class OdeConfig:
    method: str = "rk4"
    step: float = 1e-3

    def __post_init__(self):
        if self.method not in ("euler", "rk4"):
            raise ValueError(f"unknown ODE method {self.method!r}")
        if not (self.step > 0 and math.isfinite(self.step)):
            raise ValueError(f"ODE step must be positive and finite, got {self.step!r}")


def axpy(y, a, k):
    """y + a * k leafwise over nested tuples."""
    if type(y) is tuple:
        if type(k) is not tuple or len(k) != len(y):
            raise ValueError("right-hand side returned a value of the wrong shape")
        return tuple(axpy(yi, a, ki) for yi, ki in zip(y, k))
    if type(k) is tuple:
        raise ValueError("right-hand side returned a value of the wrong shape")
    if type(y) is float and type(a) is float and type(k) is float:
        return y + a * k
    return ad.add(y, ad.mul(a, k))


def _combine(y, h6, k1, k2, k3, k4):
    """y + h6 * (k1 + 2 k2 + 2 k3 + k4) leafwise."""
    if type(y) is tuple:
        if not all(type(k) is tuple and len(k) == len(y) for k in (k1, k2, k3, k4)):
            raise ValueError("right-hand side returned a value of the wrong shape")
        return tuple(_combine(*parts) for parts in
                     zip(y, (h6,) * len(y), k1, k2, k3, k4))
    if type(y) is float and type(h6) is float and type(k1) is float and type(k2) is float \
            and type(k3) is float and type(k4) is float:
        return y + h6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    s = ad.add(ad.add(k1, ad.mul(2.0, k2)), ad.add(ad.mul(2.0, k3), k4))
    return ad.add(y, ad.mul(h6, s))


def euler_step(apply, rhs, x, y, h):
    return axpy(y, h, apply(rhs, (x, y)))


def rk4_step(apply, rhs, x, y, h):
    if type(x) is float and type(h) is float:
        half = 0.5 * h
        xm, xe, h6 = x + half, x + h, h / 6.0
    else:
        half = ad.mul(0.5, h)
        xm, xe, h6 = ad.add(x, half), ad.add(x, h), ad.div(h, 6.0)
    k1 = apply(rhs, (x, y))
    k2 = apply(rhs, (xm, axpy(y, half, k1)))
    k3 = apply(rhs, (xm, axpy(y, half, k2)))
    k4 = apply(rhs, (xe, axpy(y, h, k3)))
    return _combine(y, h6, k1, k2, k3, k4)


def _finite(y) -> bool:
    if type(y) is tuple:
        return all(_finite(v) for v in y)
    return math.isfinite(ad.primal(y))


def solve_impl(apply, rhs, y0, x1, cfg: OdeConfig = OdeConfig()):
    """Approximate y(x1) for dy/dx = rhs(x, y), y(0) = y0.

    Takes N = ceil(|x1| / h) steps of size h (backwards when x1 < 0); the
    last step is shortened so the integration lands exactly on x1.
    """
    end = ad.primal(x1)
    if not math.isfinite(end):
        raise OdeDiverged(f"ODE end time is not finite: {end!r}")
    if end == 0.0 and type(x1) is float:
        return y0
    step = euler_step if cfg.method == "euler" else rk4_step
    h = cfg.step if end >= 0 else -cfg.step
    n = max(1, math.ceil(abs(end) / cfg.step - 1e-9))
    y = y0
    for k in range(n - 1):
        x = k * h
        y = step(apply, rhs, x, y, h)
        if not _finite(y):
            raise OdeDiverged(f"ODE diverged at x = {x + h!r}")
    x = (n - 1) * h
    last = x1 - x if type(x1) is float else ad.sub(x1, x)
    y = step(apply, rhs, x, y, last)
    if not _finite(y):
        raise OdeDiverged(f"ODE diverged at x = {end!r}")
    return y

"""Likelihood-weighted importance sampling and empirical distributions.

``⟦infer⟧`` runs the model on K independent seed streams; particle j draws
from the stream keyed by (infer key, j), so the result does not depend on
the order in which particles run or on how they are spread over workers.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from dppl.ast import UNIT_TERM, App, RealLit, TupleCon, skeleton, value_key
from dppl.dist import derive
from dppl.pretty import pretty
from dppl.runtime import Runtime, RuntimeAbort

NEG_INF = float("-inf")


class ZeroWeight(RuntimeAbort):
    pass


@dataclass(frozen=True)
class RunOutcome:
    value: object
    density: float


@dataclass
class EmpiricalDist:
    """Weighted samples (value term, log weight) with a quantile table."""

    samples: list
    support_type: object = None
    normalizer: float = field(init=False)

    def __post_init__(self):
        if not self.samples:
            raise ZeroWeight("inference produced no samples")
        lws = [lw for _, lw in self.samples]
        top = max(lws)
        if top == NEG_INF or math.isnan(top):
            raise ZeroWeight("inference produced zero total weight")
        scaled = [math.exp(lw - top) for lw in lws]
        total = math.fsum(scaled)
        self.normalizer = math.exp(top) * total / len(self.samples)
        self._build_table(scaled, total)

    def _build_table(self, scaled, total):
        live = [(value_key(v), v, w / total) for (v, _), w in zip(self.samples, scaled) if w > 0]
        live.sort(key=lambda e: e[0])
        keys, values, weights = [], [], []
        for k, v, w in live:
            if keys and keys[-1] == k:
                weights[-1] += w
            else:
                keys.append(k)
                values.append(v)
                weights.append(w)
        cum, acc = [], 0.0
        for w in weights:
            acc += w
            cum.append(acc)
        self._keys, self._values, self._weights, self._cum = keys, values, weights, cum

    # queries ----------------------------------------------------------------

    @property
    def support(self):
        """Distinct values in increasing order with their normalized weights."""
        return list(zip(self._values, self._weights))

    def quantile(self, p: float):
        """Smallest stored value v with p <= F(v)."""
        i = bisect.bisect_left(self._cum, p)
        return self._values[min(i, len(self._values) - 1)]

    def cdf(self, v) -> float:
        i = bisect.bisect_right(self._keys, value_key(v))
        return self._cum[i - 1] if i else 0.0

    def expectation(self, fn) -> float:
        return math.fsum(w * fn(v) for v, w in self.support)

    def mean(self, fn=None) -> float:
        return self.expectation(fn or _real)

    def variance(self, fn=None) -> float:
        fn = fn or _real
        m = self.expectation(fn)
        return self.expectation(lambda v: (fn(v) - m) ** 2)

    def effective_sample_size(self) -> float:
        return 1.0 / math.fsum(w * w for w in self._weights)

    # serialization --------------------------------------------------------

    def to_csv(self, out=None, header: bool = True) -> str:
        """``log_weight,<value columns>`` per sample, weights unnormalized."""
        buf = out if out is not None else io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        if header:
            names = [n for n, _ in _flatten(self.samples[0][0], "value")]
            writer.writerow(["log_weight"] + names)
        for v, lw in self.samples:
            writer.writerow([_fmt(lw)] + [c for _, c in _flatten(v, "value")])
        return buf.getvalue() if out is None else ""


def _real(v) -> float:
    if isinstance(v, RealLit):
        r = v.r
        while not isinstance(r, float):
            r = r.primal
        return r
    raise TypeError("mean of a non-real distribution needs a projection function")


def _fmt(x) -> str:
    while not isinstance(x, float):
        x = x.primal
    return repr(x)


def _flatten(v, name):
    if isinstance(v, TupleCon):
        if not v.elems:
            return [(name, "()")]
        out = []
        for i, e in enumerate(v.elems, 1):
            out.extend(_flatten(e, f"{name}.{i}"))
        return out
    if isinstance(v, RealLit):
        return [(name, _fmt(v.r))]
    return [(name, pretty(v))]


# ---------------------------------------------------------------------------
# Running particles


def particle_stream(key: int, j: int):
    from dppl.eval import Generated

    return Generated(derive(key, j), 0)


def _run_smallstep(model, rt, key, indices):
    from dppl.eval import Machine, RunState

    m = Machine(rt)
    out = []
    for j in indices:
        v, st = m.eval(App(model, UNIT_TERM), RunState(0.0, particle_stream(key, j)))
        out.append((v, st.log_weight))
    return out


def _run_machine(model, rt, key, indices):
    from dppl.machine import Evaluator

    ev = Evaluator(rt)
    fn = ev.value_of(model)
    out = []
    for j in indices:
        v, lw = ev.run_particle(fn, particle_stream(key, j))
        out.append((ev.readback(v), lw))
    return out


def _worker(args):
    engine, model, cfg, key, indices = args
    rt = Runtime(**cfg)
    run = _run_machine if engine == "machine" else _run_smallstep
    return run(model, rt, key, indices)


def infer_impl(model, particles: int, key: int, rt: Runtime, engine=None,
               support_type=None) -> EmpiricalDist:
    """Importance sampling of the thunk ``model`` with ``particles`` runs."""
    if particles < 1:
        raise ValueError("particles must be at least 1")
    engine = engine or rt.engine
    run = _run_machine if engine == "machine" else _run_smallstep
    if rt.workers <= 1 or particles < 2 * rt.workers:
        samples = run(model, rt, key, range(particles))
    else:
        cfg = dict(ode=rt.ode, particles=rt.particles, nested_particles=rt.nested_particles,
                   seed=rt.seed, workers=1, engine=engine)
        chunks = [range(w, particles, rt.workers) for w in range(rt.workers)]
        with ProcessPoolExecutor(max_workers=rt.workers) as pool:
            parts = list(pool.map(_worker, [(engine, model, cfg, key, c) for c in chunks]))
        samples = [None] * particles
        for c, part in zip(chunks, parts):
            for j, s in zip(c, part):
                samples[j] = s
    return EmpiricalDist(samples, support_type)


def canonical_text(model) -> str:
    """Alpha-invariant text of a closed value (de Bruijn skeleton and holes)."""
    return repr(skeleton(model))


def model_key(rt: Runtime, model) -> int:
    return derive(derive(rt.seed, "infer"), canonical_text(model))


def materialize(model, rt: Runtime, engine=None, particles=None) -> EmpiricalDist:
    """⟦infer⟧ of the model value, memoized per model term and particle count."""
    k = particles or rt.inner_particles
    text = canonical_text(model)
    cache_key = (text, k)
    with rt.cache_lock:
        hit = rt.infer_cache.get(cache_key)
    if hit is not None:
        return hit
    d = infer_impl(model, k, model_key(rt, model), rt, engine)
    with rt.cache_lock:
        rt.infer_cache.setdefault(cache_key, d)
    return d


def run_with_seed(t, seed, rt: "Runtime | None" = None, engine=None) -> RunOutcome:
    """Result and density of one run of ``t`` on ``seed``.

    A run that runs out of seed, or leaves explicit seed unused, has
    result () and density 0.
    """
    rt = rt or Runtime()
    engine = engine or rt.engine
    if engine == "machine":
        from dppl.machine import Evaluator

        ev = Evaluator(rt)
        v, lw = ev.run_term(t, seed)
        v = ev.readback(v)
    else:
        from dppl.eval import Machine, RunState

        v, st = Machine(rt).eval(t, RunState(0.0, seed))
        lw = st.log_weight
    return RunOutcome(v, math.exp(lw) if lw > NEG_INF else 0.0)


def toplevel_stream(seed: int):
    """Seed stream of a top-level run under the integer ``seed``."""
    from dppl.eval import Generated

    return Generated(derive(seed, "run"), 0)

"""Primitive distributions, counter-based randomness and Wiener realizations.

Randomness is counter based: every uniform draw is a pure function of a
64-bit key and a counter, so particles and Wiener paths can be evaluated in
any order (or in parallel) and still agree bit for bit.
"""

from __future__ import annotations

import hashlib
import math
import struct
import threading
from functools import lru_cache
from statistics import NormalDist

from scipy.special import betaincinv

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_STD_NORMAL = NormalDist()
_inv_phi = _STD_NORMAL.inv_cdf

HUGE = 1e308


class InvalidDistribution(ValueError):
    """Raised when a distribution is sampled with out-of-range parameters."""


# ---------------------------------------------------------------------------
# Pseudo-random function


def splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def uniform(key: int, counter: int) -> float:
    """Draw ``counter`` of the stream ``key``, strictly inside (0, 1)."""
    x = splitmix64((key ^ splitmix64(counter)) & MASK64)
    return ((x >> 11) + 0.5) * (1.0 / 9007199254740992.0)


def derive(key: int, label) -> int:
    """Child key of ``key`` for an int or str label (blake2b based)."""
    h = hashlib.blake2b(digest_size=8)
    h.update(struct.pack("<Q", key & MASK64))
    if isinstance(label, int):
        h.update(b"i" + label.to_bytes(16, "little", signed=True))
    else:
        h.update(b"s" + str(label).encode())
    return int.from_bytes(h.digest(), "little")


def realization_key(p: float) -> int:
    """Widen a realization index p in [0, 1] to a 64-bit key.

    The IEEE bit pattern of p is mixed twice through splitmix64 so that
    nearby indices give unrelated keys.
    """
    bits = struct.unpack("<Q", struct.pack("<d", float(p)))[0]
    return splitmix64(splitmix64(bits ^ 0x5745494E45520000))


# ---------------------------------------------------------------------------
# Quantiles and densities


def check_params(name: str, params) -> None:
    a, b = params
    if name == "Gaussian":
        ok = math.isfinite(a) and b > 0 and math.isfinite(b)
    else:
        ok = a > 0 and b > 0 and math.isfinite(a) and math.isfinite(b)
    if not ok:
        raise InvalidDistribution(f"invalid distribution parameters {name}({a!r}, {b!r})")


def gaussian_quantile(mu: float, sigma: float, p: float) -> float:
    if p <= 0.0:
        return -HUGE
    if p >= 1.0:
        return HUGE
    return mu + sigma * _inv_phi(p)


def beta_quantile(a: float, b: float, p: float) -> float:
    if p <= 0.0:
        return 0.0
    if p >= 1.0:
        return 1.0
    return float(betaincinv(a, b, p))


def quantile(name: str, params, p: float) -> float:
    """Generalized inverse CDF of a primitive distribution at p."""
    check_params(name, params)
    if name == "Gaussian":
        return gaussian_quantile(params[0], params[1], p)
    return beta_quantile(params[0], params[1], p)


_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def pdf_gaussian(mu: float, sigma: float, x: float) -> float:
    if not sigma > 0:
        return 0.0
    z = (x - mu) / sigma
    return math.exp(-0.5 * z * z - _LOG_SQRT_2PI) / sigma


def log_beta_fn(a: float, b: float) -> float:
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def pdf_beta(a: float, b: float, x: float) -> float:
    if not (a > 0 and b > 0) or not 0.0 < x < 1.0:
        return 0.0
    return math.exp((a - 1.0) * math.log(x) + (b - 1.0) * math.log1p(-x) - log_beta_fn(a, b))


# ---------------------------------------------------------------------------
# Wiener realizations


class WienerPath:
    """One realization of the double-sided Wiener process.

    Integer times carry cumulative sums of independent N(0, 1) increments.
    Inside each unit segment a Lévy midpoint construction refines the grid
    to ``depth`` dyadic levels; the midpoint of an interval of length L is
    the average of its endpoints plus an N(0, L/4) draw keyed by the node.
    Queries between level-``depth`` nodes are interpolated linearly.  Node
    values depend only on (key, node), never on query order.
    """

    MEMO_LEVELS = 16

    def __init__(self, key: int, depth: int = 20):
        self.key = key
        self.depth = depth
        self._sides = (derive(key, "pos"), derive(key, "neg"))
        self._ends = ([0.0], [0.0])
        self._memo: dict = {}
        self._lock = threading.Lock()

    def _endpoint(self, side: int, k: int) -> float:
        ends = self._ends[side]
        skey = self._sides[side]
        while len(ends) <= k:
            j = len(ends) - 1
            ends.append(ends[-1] + _inv_phi(uniform(skey, j)))
        return ends[k]

    def __call__(self, x: float) -> float:
        if x == 0.0:
            return 0.0
        if not math.isfinite(x):
            raise ValueError(f"wiener: non-finite time {x!r}")
        side = 0 if x > 0 else 1
        ax = abs(x)
        seg = int(ax)
        frac = ax - seg
        with self._lock:
            lo = self._endpoint(side, seg)
            hi = self._endpoint(side, seg + 1)
            if frac == 0.0:
                return lo
            return self._refine(side, seg, frac, lo, hi)

    def _refine(self, side, seg, frac, lo, hi):
        skey = derive_cached(self._sides[side], seg)
        memo = self._memo
        node = 1                 # heap index of the current interval
        left, width = 0.0, 1.0
        for level in range(self.depth):
            mkey = (side, seg, node) if level < self.MEMO_LEVELS else None
            mid = memo.get(mkey) if mkey else None
            if mid is None:
                z = _inv_phi(uniform(skey, node))
                mid = 0.5 * (lo + hi) + 0.5 * math.sqrt(width) * z
                if mkey:
                    memo[mkey] = mid
            width *= 0.5
            if frac < left + width:
                hi = mid
                node = 2 * node
            else:
                lo = mid
                left += width
                node = 2 * node + 1
        t = (frac - left) / width
        return lo + (hi - lo) * t


@lru_cache(maxsize=4096)
def derive_cached(key: int, label) -> int:
    return derive(key, label)


@lru_cache(maxsize=64)
def wiener_path(p: float) -> WienerPath:
    """The realization W_p (shared per index p; values are deterministic)."""
    return WienerPath(realization_key(p))


def wiener_eval(path: WienerPath, x: float) -> float:
    return path(x)

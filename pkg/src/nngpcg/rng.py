"""Counter-based pseudorandom streams.

The ``k``-th 64-bit output of a stream with seed ``s`` is the SplitMix64
finalizer applied to ``s + (k + 1) * 0x9E3779B97F4A7C15`` (mod 2**64), so
any position can be generated directly and blocks vectorize. All variates
in the package are derived from these words.
"""

from __future__ import annotations

import math
import secrets

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(_M1)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def fresh_seed() -> int:
    return secrets.randbits(63)


class RngState:
    """A seed plus a position counter. Not for sharing across threads; use :meth:`spawn`."""

    __slots__ = ("seed", "counter")

    def __init__(self, seed: int, counter: int = 0):
        self.seed = int(seed) & MASK64
        self.counter = int(counter)

    def __repr__(self) -> str:
        return f"RngState(seed={self.seed}, counter={self.counter})"

    def copy(self) -> "RngState":
        return RngState(self.seed, self.counter)

    def spawn(self, key: int) -> "RngState":
        """Independent substream keyed by ``key``; does not advance this stream."""
        return RngState(mix64(self.seed ^ mix64((int(key) + 1) * GOLDEN)))

    def next_u64(self) -> int:
        self.counter += 1
        return mix64(self.seed + self.counter * GOLDEN)

    def u64(self, k: int) -> np.ndarray:
        """Next ``k`` raw words as uint64."""
        ks = np.arange(self.counter + 1, self.counter + 1 + k, dtype=np.uint64)
        self.counter += k
        with np.errstate(over="ignore"):
            z = np.uint64(self.seed) + ks * np.uint64(GOLDEN)
            return _mix64_array(z)

    def uniform(self, k: int | None = None):
        """Uniform variates on [0, 1) with 53 random bits."""
        if k is None:
            return (self.next_u64() >> 11) * 2.0**-53
        return (self.u64(k) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normals(self, k: int) -> np.ndarray:
        """``k`` standard normals by the Marsaglia polar method.

        Each accepted pair of uniforms yields two normals; when ``k`` is odd
        the last partner is dropped, so the stream position depends only on
        the number of pairs consumed.
        """
        out = np.empty(k)
        filled = 0
        while filled < k:
            need_pairs = (k - filled + 1) // 2
            batch = max(4, int(need_pairs * 1.3) + 4)
            start = self.counter
            u = 2.0 * self.uniform(2 * batch) - 1.0
            u1, u2 = u[0::2], u[1::2]
            s = u1 * u1 + u2 * u2
            ok = np.flatnonzero((s > 0.0) & (s < 1.0))
            use = ok[:need_pairs]
            f = np.sqrt(-2.0 * np.log(s[use]) / s[use])
            vals = np.empty(2 * use.size)
            vals[0::2] = u1[use] * f
            vals[1::2] = u2[use] * f
            take = min(vals.size, k - filled)
            out[filled:filled + take] = vals[:take]
            filled += take
            if use.size:
                self.counter = start + 2 * (int(use[-1]) + 1)
        return out


def standard_normal(rng: RngState) -> float:
    return float(rng.normals(1)[0])


def gamma_variate(rng: RngState, shape: float, rate: float = 1.0) -> float:
    """Gamma(shape, rate) by Marsaglia-Tsang squeeze rejection.

    For ``shape < 1`` a Gamma(shape + 1) draw is boosted by ``U**(1/shape)``.
    """
    if not (shape > 0 and rate > 0):
        raise ValueError("gamma_variate needs shape > 0 and rate > 0")
    if shape < 1.0:
        g = gamma_variate(rng, shape + 1.0, 1.0)
        u = rng.uniform()
        while u == 0.0:
            u = rng.uniform()
        return g * u ** (1.0 / shape) / rate
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = standard_normal(rng)
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = rng.uniform()
        if u < 1.0 - 0.0331 * x ** 4:
            return d * v / rate
        if u > 0.0 and math.log(u) < 0.5 * x * x + d * (1.0 - v + math.log(v)):
            return d * v / rate


def inverse_gamma_variate(rng: RngState, shape: float, scale: float) -> float:
    """IG(shape, scale), density proportional to x^-(shape+1) exp(-scale / x)."""
    return 1.0 / gamma_variate(rng, shape, scale)

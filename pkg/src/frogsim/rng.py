"""Deterministic splittable random streams.

Every stochastic routine in the package draws from an explicit ``Stream``
keyed by a 64-bit state. Child streams are derived from (seed, labels...)
with a counter-based hash, so replica r of a run always sees the same
randomness regardless of worker count or scheduling, and a particle's
trajectory depends only on (field seed, vertex, particle index). That last
property is what makes the per-seed monotone couplings in the frog engine
exact.
"""

from __future__ import annotations

import hashlib
import math

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_INV_2_53 = 1.0 / (1 << 53)


def splitmix64(x: int) -> int:
    """One splitmix64 scramble of ``x`` (stateless)."""
    x = (x + _GOLDEN) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def _encode_label(label) -> int:
    if isinstance(label, bool):
        return int(label)
    if isinstance(label, int):
        return label & _MASK
    if isinstance(label, str):
        # hashlib, not hash(): stable across processes and runs
        return int.from_bytes(
            hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest(), "big"
        )
    raise TypeError(f"stream labels must be int or str, got {type(label)!r}")


def derive_key(seed: int, *labels) -> int:
    """Fold (seed, labels...) into a 64-bit stream key."""
    h = splitmix64(seed & _MASK)
    for i, label in enumerate(labels):
        h = splitmix64(h ^ splitmix64(_encode_label(label) ^ ((i + 1) * _GOLDEN)))
    return h


class Stream:
    """Counter-based pseudo-random stream (splitmix64 core).

    Cheap to create, so it is idiomatic here to derive one stream per
    (replica, vertex, particle) rather than to share mutable generators.
    """

    __slots__ = ("key", "_state")

    def __init__(self, seed: int, *labels):
        self.key = derive_key(seed, *labels) if labels else splitmix64(seed & _MASK)
        self._state = self.key

    def child(self, *labels) -> "Stream":
        return Stream(self.key, *labels)

    def u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK
        x = self._state
        x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
        return x ^ (x >> 31)

    def uniform(self) -> float:
        """Uniform float in [0, 1) with 53-bit resolution."""
        return (self.u64() >> 11) * _INV_2_53

    def exponential(self) -> float:
        return -math.log1p(-self.uniform())

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n). Modulo bias is ~n/2^64, negligible here."""
        return self.u64() % n

    def poisson(self, lam: float) -> int:
        """Poisson(lam) draw by inverse CDF (small lam) or exponential counting."""
        if lam < 0 or not math.isfinite(lam):
            raise ValueError(f"poisson mean must be finite and >= 0, got {lam}")
        if lam == 0.0:
            return 0
        if lam < 30.0:
            return poisson_inverse_cdf(lam, self.uniform())
        # count of exponential arrivals in [0, lam] is exactly Poisson(lam)
        total = 0.0
        k = 0
        while True:
            total += self.exponential()
            if total > lam:
                return k
            k += 1

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]


def poisson_inverse_cdf(lam: float, u: float) -> int:
    """Smallest k with P(Poisson(lam) <= k) >= u.

    Monotone in lam for fixed u, which the particle-field couplings rely on.
    u is capped at 1 - 1e-12: past that the accumulated CDF saturates below
    u in floats and the crossing point stops being well defined (the cap
    shifts at most the 1e-12 extreme quantile). Accurate for lam up to ~700
    (below the exp underflow threshold).
    """
    if lam == 0.0:
        return 0
    if lam > 700.0:
        raise ValueError("poisson_inverse_cdf unstable for lam > 700")
    u = min(u, 1.0 - 1e-12)
    p = math.exp(-lam)
    cdf = p
    k = 0
    while cdf < u:
        k += 1
        p *= lam / k
        cdf += p
    return k

"""Lazy memoized sequences and an explicit enumeration of Q in [0,1]."""
from __future__ import annotations

import threading
from fractions import Fraction
from typing import Callable, Generic, Iterator, TypeVar

T = TypeVar("T")


class VirtualMeasureError(RuntimeError):
    """Raised when atom enumeration is requested beyond the materialization cap."""


class LazySequence(Generic[T]):
    """Memoized ``n -> f(n)`` over indices ``origin, origin+1, ...``.

    ``length`` makes the sequence finite.  Indices at or above ``cap`` are
    refused with :class:`VirtualMeasureError` so that callers can fall back to
    a closed-form evaluator.
    """

    def __init__(self, func: Callable[[int], T], origin: int = 0, length: int | None = None,
                 cap: int | None = None):
        self._func = func
        self.origin = origin
        self.length = length
        self.cap = cap
        self._cache: dict[int, T] = {}
        self._lock = threading.Lock()

    def valid(self, n: int) -> bool:
        if n < self.origin:
            return False
        return self.length is None or n < self.origin + self.length

    def __call__(self, n: int) -> T:
        return self.at(n)

    def at(self, n: int) -> T:
        if not self.valid(n):
            raise IndexError(f"index {n} outside [{self.origin}, {self.end()})")
        if self.cap is not None and n > self.cap:
            raise VirtualMeasureError(f"index {n} exceeds materialization cap {self.cap}")
        try:
            return self._cache[n]
        except KeyError:
            pass
        value = self._func(n)
        with self._lock:
            self._cache.setdefault(n, value)
        return self._cache[n]

    def end(self) -> int | float:
        return float("inf") if self.length is None else self.origin + self.length

    def indices(self, horizon: int) -> range:
        """The first ``horizon`` valid indices (fewer if the sequence is finite)."""
        stop = self.origin + horizon
        if self.length is not None:
            stop = min(stop, self.origin + self.length)
        return range(self.origin, stop)

    def __iter__(self) -> Iterator[T]:
        n = self.origin
        while self.valid(n):
            yield self.at(n)
            n += 1

    def cached(self) -> dict[int, T]:
        return dict(self._cache)


# ---------------------------------------------------------------------------
# rationals in [0,1]
#
# The Calkin-Wilf sequence lists every positive rational once; its terms <= 1
# are the term at position 1 (which is 1) and those at even positions.  We
# take those in order and insert 0 at index 3, giving
# 1, 1/2, 1/3, 0, 2/3, 1/4, 3/5, ...


def calkin_wilf(position: int) -> Fraction:
    """Term of the Calkin-Wilf sequence at 1-based ``position``."""
    if position < 1:
        raise ValueError("position must be >= 1")
    a, b = 1, 1
    for bit in bin(position)[3:]:
        if bit == "0":
            a, b = a, a + b
        else:
            a, b = a + b, b
    return Fraction(a, b)


def calkin_wilf_position(q: Fraction) -> int:
    """Inverse of :func:`calkin_wilf` for a positive rational."""
    if q <= 0:
        raise ValueError("positive rationals only")
    a, b = q.numerator, q.denominator
    bits = []
    while (a, b) != (1, 1):
        if a < b:
            bits.append("0")
            b -= a
        else:
            bits.append("1")
            a -= b
    return int("1" + "".join(reversed(bits)), 2)


ZERO_INDEX = 3


def rational_at(n: int) -> Fraction:
    """The ``n``-th element of the default enumeration of Q in [0,1]."""
    if n < 0:
        raise ValueError("index must be >= 0")
    if n == ZERO_INDEX:
        return Fraction(0)
    f = n if n < ZERO_INDEX else n - 1
    return calkin_wilf(1 if f == 0 else 2 * f)


def rational_index(q: Fraction) -> int:
    """Position of ``q`` in :func:`rational_at`; inverse of that map."""
    q = Fraction(q)
    if not 0 <= q <= 1:
        raise ValueError(f"{q} is not in [0,1]")
    if q == 0:
        return ZERO_INDEX
    pos = calkin_wilf_position(q)
    f = 0 if pos == 1 else pos // 2
    return f if f < ZERO_INDEX else f + 1


def van_der_corput_word(k: int) -> str:
    """Binary digits of ``k`` least significant first; empty for 0."""
    out = []
    while k:
        out.append("1" if k & 1 else "0")
        k >>= 1
    return "".join(out)

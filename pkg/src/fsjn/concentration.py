"""Exact binomial tails and the sqrt(2)/(eps sqrt(n)) concentration bound."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable, Iterator

from .measure import as_fraction

FACT_EPS_MAX = Fraction(1, 12)
PRECISION_BITS = 128


@dataclass(frozen=True)
class BinomialTailQuery:
    """``P(|S_n - n/2| >= eps n/2)`` for ``S_n`` binomial(n, 1/2).

    ``bound_lower`` is a rational lower bound of ``sqrt(2)/(eps sqrt(n))``
    accurate to ``2^-128``; ``holds`` is None when the hypothesis
    ``n >= 3/eps`` and ``eps <= 1/12`` is unmet.
    """

    n: int
    eps: Fraction
    tail: Fraction
    bound_lower: Fraction
    hypothesis_met: bool
    squared_check: bool
    holds: bool | None

    def to_json(self) -> dict:
        return {"n": self.n, "eps": str(self.eps), "tail": str(self.tail),
                "bound_lower": str(self.bound_lower), "hypothesis_met": self.hypothesis_met,
                "squared_check": self.squared_check, "holds": self.holds}


def _check_eps(eps: Any) -> Fraction:
    e = as_fraction(eps)
    if not 0 < e <= 1:
        raise ValueError(f"eps must lie in (0, 1], got {e}")
    return e


def tail_cutoff(n: int, eps: Fraction) -> int:
    """Largest ``k`` with ``n - 2k >= eps n``; the tail is twice the lower sum up to it."""
    return math.floor((n - eps * n) / 2)


def radical_lower_bound(n: int, eps: Fraction, bits: int = PRECISION_BITS) -> Fraction:
    """Rational ``r <= sqrt(2/(eps^2 n))`` with ``sqrt(...) - r < 2^-bits``."""
    sq = Fraction(2) / (eps * eps * n)
    root = math.isqrt(sq.numerator * (1 << (2 * bits)) // sq.denominator)
    return Fraction(root, 1 << bits)


def hypothesis_met(n: int, eps: Fraction) -> bool:
    return eps <= FACT_EPS_MAX and n >= 3 / eps


def _query(n: int, eps: Fraction, lower_sum: int) -> BinomialTailQuery:
    tail = Fraction(2 * lower_sum, 1 << n)
    lb = radical_lower_bound(n, eps)
    # tail <= sqrt(2)/(eps sqrt n)  iff  tail^2 eps^2 n <= 2
    squared = tail * tail * eps * eps * n <= 2
    met = hypothesis_met(n, eps)
    holds = (tail <= lb and squared) if met else None
    return BinomialTailQuery(n, eps, tail, lb, met, squared, holds)


def binomial_tail(n: int, eps: Any) -> BinomialTailQuery:
    """Exact tail by summing binomial coefficients."""
    if n < 1:
        raise ValueError("n must be >= 1")
    e = _check_eps(eps)
    cut = tail_cutoff(n, e)
    lower = 0
    c = 1
    for k in range(cut + 1):
        lower += c
        c = c * (n - k) // (k + 1)
    return _query(n, e, lower)


def binomial_tail_brute(n: int, eps: Any) -> Fraction:
    """The same tail by enumerating all ``2^n`` sign vectors."""
    e = _check_eps(eps)
    hits = 0
    for mask in range(1 << n):
        ones = bin(mask).count("1")
        if abs(2 * ones - n) >= e * n:
            hits += 1
    return Fraction(hits, 1 << n)


def _pascal_rows(n_max: int) -> Iterator[tuple[int, list[int]]]:
    row = [1]
    for n in range(1, n_max + 1):
        row = [1] + [row[i] + row[i + 1] for i in range(len(row) - 1)] + [1]
        yield n, row


def bollobas_sweep(eps_list: Iterable[Any], n_max: int) -> list[BinomialTailQuery]:
    """Every ``(n, eps)`` with ``3/eps <= n <= n_max``, sharing one Pascal row per ``n``."""
    eps_vals = [_check_eps(e) for e in eps_list]
    starts = {e: math.ceil(3 / e) for e in eps_vals}
    out = []
    for n, row in _pascal_rows(n_max):
        for e in eps_vals:
            if n < starts[e]:
                continue
            out.append(_query(n, e, sum(row[: tail_cutoff(n, e) + 1])))
    return out

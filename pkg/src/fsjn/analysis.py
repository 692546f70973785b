"""Limit-set classification, balance and mass checks, decay tables and the product audit."""
from __future__ import annotations

import csv
import io
import math
import random
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from fractions import Fraction
from typing import Any, Callable

from .concentration import binomial_tail
from .enumeration import VirtualMeasureError
from .generators import ProductRectEvaluator
from .handles import SequenceHandle
from .measure import as_fraction, jordan_split
from .spaces import TestFamily


class UsageError(ValueError):
    """The request cannot be answered for this input (CLI exit code 2)."""


DEFAULT_TOLERANCE = Fraction(1, 16)
CLASS_ORDER = ("L", "LI", "LS", "S")


def float_text(q: Fraction, digits: int = 20) -> str:
    with localcontext() as ctx:
        ctx.prec = digits
        return str(Decimal(q.numerator) / Decimal(q.denominator))


MAX_ATOMS = 200_000


def _within_budget(h: SequenceHandle, n: int, max_atoms: int) -> bool:
    if not h.materializable(n):
        return False
    try:
        return h.support_size(n) <= max_atoms
    except VirtualMeasureError:
        return False


def _materialized(h: SequenceHandle, horizon: int, max_atoms: int = MAX_ATOMS) -> list[int]:
    """Leading indices that can be materialized with at most ``max_atoms`` atoms each."""
    out = []
    for n in h.indices(horizon):
        if not _within_budget(h, n, max_atoms):
            break
        out.append(n)
    return out


# ---------------------------------------------------------------------------
# S, LS, LI, L


@dataclass
class PointClass:
    point: Any
    cls: str
    basis: str
    limit: Fraction | None = None
    inf: Fraction | None = None
    sup: Fraction | None = None


@dataclass
class LimitSetReport:
    horizon: int
    indices: int
    entries: list[PointClass]
    warnings: list[str] = field(default_factory=list)

    def members(self, cls: str) -> list:
        """Points in ``cls`` viewed as a set: L within LI within LS within S."""
        rank = CLASS_ORDER.index(cls)
        return [e.point for e in self.entries if CLASS_ORDER.index(e.cls) <= rank]

    @property
    def L(self) -> list:
        return self.members("L")

    @property
    def LI(self) -> list:
        return self.members("LI")

    @property
    def LS(self) -> list:
        return self.members("LS")

    @property
    def S(self) -> list:
        return self.members("S")

    def nested(self) -> bool:
        L, LI, LS, S = (set(self.members(c)) for c in CLASS_ORDER)
        return L <= LI <= LS <= S

    def bases(self) -> set[str]:
        return {e.basis for e in self.entries}

    def to_json(self, encode: Callable[[Any], Any]) -> dict:
        return {
            "horizon": self.horizon,
            "indices": self.indices,
            "counts": {c: len(self.members(c)) for c in CLASS_ORDER},
            "points": [{"point": encode(e.point), "class": e.cls, "basis": e.basis,
                        "limit": None if e.limit is None else str(e.limit),
                        "inf": None if e.inf is None else str(e.inf),
                        "sup": None if e.sup is None else str(e.sup)} for e in self.entries],
            "warnings": self.warnings,
        }


def limit_sets(h: SequenceHandle, horizon: int = 64, tolerance: Any = DEFAULT_TOLERANCE,
               max_atoms: int = MAX_ATOMS) -> LimitSetReport:
    """Classify every point of the supports seen up to ``horizon``."""
    tol = as_fraction(tolerance)
    idx = _materialized(h, horizon, max_atoms)
    first_seen: dict = {}
    for n in idx:
        for p in sorted(h.at(n).atoms, key=_key):
            first_seen.setdefault(p, n)
    entries = []
    tail = idx[len(idx) // 2:]
    for p in first_seen:
        if h.oracle is not None:
            pl = h.oracle.point(p)
            if pl.limit is not None and pl.limit != 0:
                cls = "L"
            elif pl.liminf > 0:
                cls = "LI"
            elif pl.limsup > 0:
                cls = "LS"
            else:
                cls = "S"
            entries.append(PointClass(p, cls, "oracle-exact", pl.limit, pl.liminf, pl.limsup))
            continue
        vals = [h.at(n)[p] for n in tail] or [Fraction(0)]
        mags = [abs(v) for v in vals]
        lo, hi = min(mags), max(mags)
        if hi < tol:
            cls = "S"
        elif lo < tol:
            cls = "LS"
        elif max(vals) - min(vals) < tol:
            cls = "L"
        else:
            cls = "LI"
        entries.append(PointClass(p, cls, "horizon-estimated", vals[-1] if cls == "L" else None, lo, hi))
    report = LimitSetReport(horizon, len(idx), entries)
    if len(idx) < len(list(h.indices(horizon))):
        report.warnings.append(f"stopped at the materialization cap or atom budget after {len(idx)} indices")
    late = [p for p, n in first_seen.items() if idx and n >= idx[len(idx) // 2]]
    if idx and not late:
        report.warnings.append("S appears finite: no new support points in the second half of the horizon")
    return report


def _key(p: Any) -> Any:
    from .spaces import sort_key

    return sort_key(p)


# ---------------------------------------------------------------------------
# balance


@dataclass
class BalanceRow:
    n: int
    positive: Fraction
    deviation: Fraction
    envelope: Fraction | None

    @property
    def within(self) -> bool | None:
        return None if self.envelope is None else self.deviation <= self.envelope


@dataclass
class BalanceReport:
    rows: list[BalanceRow]
    tail_max_deviation: Fraction
    tolerance: Fraction

    @property
    def passed(self) -> bool:
        if any(r.within is False for r in self.rows):
            return False
        if all(r.envelope is not None for r in self.rows):
            return True
        return self.tail_max_deviation <= self.tolerance

    def to_json(self) -> dict:
        return {"rows": [{"n": r.n, "positive": str(r.positive), "deviation": str(r.deviation),
                          "envelope": None if r.envelope is None else str(r.envelope), "within": r.within}
                         for r in self.rows],
                "tail_max_deviation": str(self.tail_max_deviation), "tolerance": str(self.tolerance),
                "passed": self.passed}


def balance_check(h: SequenceHandle, horizon: int = 64, tolerance: Any = DEFAULT_TOLERANCE,
                  max_atoms: int = MAX_ATOMS) -> BalanceReport:
    """Exact mass of the positive part per index and its deviation from 1/2."""
    half = Fraction(1, 2)
    rows = []
    for n in _materialized(h, horizon, max_atoms):
        pos = jordan_split(h.at(n)).positive.norm()
        env = h.balance_envelope(n) if h.balance_envelope else None
        rows.append(BalanceRow(n, pos, abs(pos - half), env))
    tail = rows[len(rows) // 2:]
    worst = max((r.deviation for r in tail), default=Fraction(0))
    return BalanceReport(rows, worst, as_fraction(tolerance))


# ---------------------------------------------------------------------------
# sum of limits over L


@dataclass
class LMassReport:
    closed_form: Fraction | None
    partial: Fraction
    tail: Fraction | None
    groups: int
    agrees: bool | None

    @property
    def total(self) -> Fraction:
        return self.closed_form if self.closed_form is not None else self.partial + (self.tail or 0)

    @property
    def passed(self) -> bool:
        return self.agrees is not False and self.total <= Fraction(1, 2)

    def to_json(self) -> dict:
        return {"closed_form": None if self.closed_form is None else str(self.closed_form),
                "partial": str(self.partial), "tail": None if self.tail is None else str(self.tail),
                "groups": self.groups, "agrees": self.agrees, "sum": str(self.total),
                "passed": self.passed}


def l_mass_sum(h: SequenceHandle, groups: int = 12) -> LMassReport:
    """Sum of ``|lim mu_n({x})|`` over ``L``: closed form against group sums plus tail."""
    if h.oracle is None:
        raise UsageError("limit oracle required")
    o = h.oracle
    if o.identically_zero:
        return LMassReport(Fraction(0), Fraction(0), Fraction(0), 0, o.l_mass in (None, 0))
    if o.l_groups is None:
        if o.l_mass is None:
            raise UsageError("the oracle provides neither a closed form nor an enumeration of L")
        return LMassReport(o.l_mass, Fraction(0), None, 0, None)
    partial = Fraction(0)
    used = 0
    exhausted = False
    for g in range(groups + 1):
        pts = o.l_groups(g)
        if pts is None:
            exhausted = True
            break
        partial += sum((abs(o.limit(p)) for p in pts), Fraction(0))
        used = g + 1
    if exhausted:
        tail = Fraction(0)
    else:
        tail = o.l_tail(used - 1) if o.l_tail is not None else None
    agrees = None if tail is None or o.l_mass is None else (partial + tail == o.l_mass)
    return LMassReport(o.l_mass, partial, tail, used, agrees)


# ---------------------------------------------------------------------------
# decay of functional values


@dataclass
class DecayReport:
    family: str
    indices: list[int]
    values: dict[str, list[Fraction]]
    tail_max: dict[str, Fraction]
    tolerance: Fraction
    horizon: int

    @property
    def consistent(self) -> bool:
        return all(v < self.tolerance for v in self.tail_max.values())

    @property
    def verdict(self) -> str:
        return "consistent" if self.consistent else "inconsistent"

    def eventually_zero_from(self, name: str) -> int | None:
        """First index after which every computed value of ``name`` is 0."""
        vals = self.values[name]
        first = None
        for n, v in zip(self.indices, vals):
            if v != 0:
                first = None
            elif first is None:
                first = n
        return first

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["functional", "n", "value", "float"])
        for name, vals in self.values.items():
            for n, v in zip(self.indices, vals):
                w.writerow([name, n, str(v), float_text(v)])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"family": self.family, "horizon": self.horizon, "indices": self.indices,
                "tolerance": str(self.tolerance), "verdict": self.verdict,
                "tail_max": {k: str(v) for k, v in self.tail_max.items()},
                "values": {k: [str(v) for v in vals] for k, vals in self.values.items()}}


def decay_report(h: SequenceHandle, family: TestFamily, horizon: int = 64,
                 tolerance: Any = DEFAULT_TOLERANCE, max_atoms: int = MAX_ATOMS) -> DecayReport:
    """Exact values ``mu_n(f)`` and their largest modulus over the last quarter of the indices."""
    tol = as_fraction(tolerance)
    idx: list[int] = []
    values: dict[str, list[Fraction]] = {f.name: [] for f in family}
    closed = h.rect_evaluator is not None and all(getattr(f, "rect", None) is not None for f in family)
    for n in h.indices(horizon):
        if not closed and not _within_budget(h, n, max_atoms):
            break
        row = []
        try:
            for f in family:
                row.append(h.evaluate(n, f))
        except VirtualMeasureError:
            break
        idx.append(n)
        for f, v in zip(family, row):
            values[f.name].append(v)
    q = max(1, math.ceil(len(idx) / 4))
    tail_max = {name: max((abs(v) for v in vals[-q:]), default=Fraction(0)) for name, vals in values.items()}
    return DecayReport(family.name, idx, values, tail_max, tol, horizon)


# ---------------------------------------------------------------------------
# audit of the product estimate


@dataclass
class AuditRow:
    n: int
    b: int
    case: str
    value: Fraction
    dagger_bound: Fraction
    dagger_ok: bool
    threshold_passed: bool
    below_2eps: bool
    delta_mass: Fraction | None = None
    delta_bound: Fraction | None = None
    on_delta: Fraction | None = None
    off_delta: Fraction | None = None
    off_delta_max: Fraction | None = None
    estimates_ok: bool | None = None

    @property
    def ok(self) -> bool:
        if not self.dagger_ok or self.estimates_ok is False:
            return False
        return self.below_2eps or not self.threshold_passed

    def to_json(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            out[k] = str(v) if isinstance(v, Fraction) else v
        out["ok"] = self.ok
        return out


@dataclass
class AuditReport:
    eps: Fraction
    n0: int
    i0_threshold: Fraction
    rows: list[AuditRow]

    @property
    def passed(self) -> bool:
        return all(r.ok for r in self.rows)

    def to_json(self) -> dict:
        return {"eps": str(self.eps), "N0": self.n0, "I1_threshold": str(self.i0_threshold),
                "rows": [r.to_json() for r in self.rows], "passed": self.passed}


def _a_predicate(a: Any) -> Callable[[int, int], bool]:
    if a is None:
        return lambda mask, n: True
    if isinstance(a, dict):
        care = sum(1 << j for j in a)
        want = sum(1 << j for j, s in a.items() if s == 1)
        return lambda mask, n: all(j < n for j in a) and (mask & care) == want
    return a


def _a_count(a: Any, n: int) -> int:
    if a is None:
        return 1 << n
    if isinstance(a, dict):
        return 0 if any(j >= n for j in a) else 1 << (n - len(a))
    return sum(1 for mask in range(1 << n) if a(mask, n))


def product_proof_audit(a: Any, b: Callable[[int, int], bool], eps: Any, n_range: range,
                        brute_cap: int = 14, i1_threshold: Any = None) -> AuditReport:
    """Replay the case split and estimates of the weak* nullity argument for one rectangle.

    ``i1_threshold`` overrides the ``2/eps^4`` cut between the two cases so the
    large-``b`` estimates can be exercised at small ``n``; they hold whenever
    ``b >= 3/eps``.
    """
    e = as_fraction(eps)
    if not 0 < e <= Fraction(1, 12):
        raise UsageError(f"eps must lie in (0, 1/12], got {e}")
    if not isinstance(a, dict) and a is not None and max(n_range, default=0) > brute_cap:
        raise UsageError(f"predicate A needs n <= {brute_cap}")
    ev = ProductRectEvaluator(brute_cap)
    apred = _a_predicate(a)
    i1 = 2 / e ** 4 if i1_threshold is None else as_fraction(i1_threshold)
    n0 = math.ceil(1 / e ** 5)
    two_eps = 2 * e
    rows = []
    for n in n_range:
        if n < 1:
            raise UsageError("product indices start at 1")
        bmask = sum(1 << i for i in range(n) if b(i, n))
        bsize = bin(bmask).count("1")
        value = ev(n, a, b)
        dagger = Fraction(_a_count(a, n), 2 ** n) * Fraction(bsize, n)
        case = "I0" if bsize < i1 or bsize == 0 else "I1"
        row = AuditRow(n, bsize, case, value, dagger, abs(value) <= dagger,
                       threshold_passed=(n >= n0) if case == "I0" else True,
                       below_2eps=abs(value) < two_eps)
        if case == "I1":
            q = binomial_tail(bsize, e)
            row.delta_mass = q.tail
            row.delta_bound = q.bound_lower
            worst = max((abs(2 * j - bsize) for j in range(bsize + 1) if abs(2 * j - bsize) < e * bsize),
                        default=0)
            row.off_delta_max = Fraction(worst, n)
            ok = q.tail <= q.bound_lower and worst < e * bsize
            if n <= brute_cap:
                on = off = 0
                for mask in range(1 << n):
                    if not apred(mask, n):
                        continue
                    d = 2 * bin(mask & bmask).count("1") - bsize
                    if abs(d) >= e * bsize:
                        on += d
                    else:
                        off += d
                row.on_delta = Fraction(on, n * 2 ** n)
                row.off_delta = Fraction(off, n * 2 ** n)
                ok = ok and abs(row.on_delta) <= q.tail and abs(row.off_delta) <= row.off_delta_max
                ok = ok and row.on_delta + row.off_delta == value
            row.estimates_ok = ok
        rows.append(row)
    return AuditReport(e, n0, i1, rows)


@dataclass
class RandomRectangle:
    """Random ``A`` within each ``Omega_n`` and ``B`` within each ``Sigma_n``, stored as bit tables."""

    a_bits: dict[int, int]
    b_bits: dict[int, int]

    def a(self, mask: int, n: int) -> bool:
        return bool(self.a_bits[n] >> mask & 1)

    def b(self, i: int, n: int) -> bool:
        return bool(self.b_bits[n] >> i & 1)


def random_rectangles(seed: int, count: int, n_max: int) -> list[RandomRectangle]:
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        a_bits = {n: rng.getrandbits(1 << n) for n in range(1, n_max + 1)}
        b_bits = {n: rng.getrandbits(n) for n in range(1, n_max + 1)}
        out.append(RandomRectangle(a_bits, b_bits))
    return out


# ---------------------------------------------------------------------------
# oracle consistency


def oracle_consistency(h: SequenceHandle, horizon: int = 32,
                       eps_list: tuple = (Fraction(1, 8), Fraction(1, 64))) -> list[str]:
    """Points where a coefficient strays from the oracle limit past the oracle's threshold."""
    if h.oracle is None:
        raise UsageError("limit oracle required")
    idx = _materialized(h, horizon)
    failures = []
    seen = set()
    for n0 in idx:
        for p in h.at(n0):
            if p in seen:
                continue
            seen.add(p)
            pl = h.oracle.point(p)
            if pl.limit is None or pl.settle is None:
                continue
            for eps in eps_list:
                start = pl.settle(eps)
                for n in idx:
                    if n >= start and not abs(h.at(n)[p] - pl.limit) < eps:
                        failures.append(f"{p!r}: |mu_{n} - {pl.limit}| >= {eps} past threshold {start}")
                        break
    return failures

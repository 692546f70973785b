"""Certificate-carrying sequence transforms.

Every transform returns a new :class:`SequenceHandle` whose provenance ends
with a :class:`TransformStep`.  Subsequences are chosen greedily: each stage
takes the least index satisfying its inequality, so reruns are reproducible.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterable

from .enumeration import VirtualMeasureError
from .handles import LimitOracle, PointLimit, SequenceHandle, union_supports, zero_oracle
from .measure import FiniteSignedMeasure, as_fraction, combine
from .spaces import TestFamily, TestFunctional, sort_key


class TransformError(RuntimeError):
    """A stage precondition or certificate failed."""


class SelectionCapError(TransformError, VirtualMeasureError):
    """A selection stage needs a parent index beyond the materialization cap."""


def _fstr(x: Any) -> Any:
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, dict):
        return {k: _fstr(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_fstr(v) for v in x]
    return x


@dataclass
class TransformStep:
    """One applied transform: parameters, static summary and per-index certificates."""

    name: str
    params: dict
    summary: dict = field(default_factory=dict)
    certificate: Callable[[int], dict] | None = None
    output: SequenceHandle | None = None
    substeps: list["TransformStep"] = field(default_factory=list)

    def certificates(self, count: int) -> list[dict]:
        if self.certificate is None or self.output is None:
            return []
        out = []
        for k in self.output.indices(count):
            try:
                out.append(self.certificate(k))
            except VirtualMeasureError:
                break
        return out

    def to_json(self, count: int) -> dict:
        data = {"name": self.name, "params": _fstr(self.params), "summary": _fstr(self.summary),
                "certificate": _fstr(self.certificates(count))}
        if self.substeps:
            data["substeps"] = [s.to_json(count) for s in self.substeps]
        return data


# ---------------------------------------------------------------------------
# greedy selection


class Selector:
    """Lazily chooses ``n_0 < n_1 < ...`` in a parent handle.

    ``accept(k, n)`` returns a certificate dict when index ``n`` may serve
    as ``n_k``, else None.  Scanning more than ``scan_limit`` candidates for
    one stage raises :class:`TransformError`.
    """

    def __init__(self, parent: SequenceHandle, accept: Callable[[int, int], dict | None],
                 scan_limit: int = 4096, stage: str = "selection"):
        self.parent = parent
        self.accept = accept
        self.scan_limit = scan_limit
        self.stage = stage
        self.chosen: list[int] = []
        self.certs: list[dict] = []
        self._lock = threading.RLock()

    def _extend(self) -> None:
        k = len(self.chosen)
        n = self.chosen[-1] + 1 if self.chosen else self.parent.index_origin
        for _ in range(self.scan_limit):
            if not self.parent.valid(n):
                raise TransformError(f"{self.stage}: parent sequence exhausted at stage {k}")
            try:
                cert = self.accept(k, n)
            except VirtualMeasureError as exc:
                raise SelectionCapError(f"{self.stage}: stage {k} needs index {n} beyond the cap") from exc
            if cert is not None:
                self.chosen.append(n)
                self.certs.append(dict(cert, k=k, n=n))
                return
            n += 1
        raise TransformError(f"{self.stage}: no admissible index for stage {k} within {self.scan_limit} candidates")

    def index(self, k: int) -> int:
        with self._lock:
            while len(self.chosen) <= k:
                self._extend()
            return self.chosen[k]

    def cert(self, k: int) -> dict:
        self.index(k)
        return self.certs[k]

    def first_at_least(self, n: int) -> int:
        """Least ``k`` with ``n_k >= n``."""
        k = 0
        while self.index(k) < n:
            k += 1
        return k


def _settle_through(parent_oracle: LimitOracle, first_at_least: Callable[[int], int],
                    extra: Callable[[PointLimit, Fraction], int] | None = None) -> LimitOracle:
    """Oracle of a subsequence (values possibly rescaled by factors tending to 1)."""

    def point(x: Any) -> PointLimit:
        pl = parent_oracle.point(x)
        if pl.settle is None:
            return PointLimit(pl.limit, pl.liminf, pl.limsup, None)
        if extra is None:
            return PointLimit(pl.limit, pl.liminf, pl.limsup, lambda eps: first_at_least(pl.settle(eps)))
        return PointLimit(pl.limit, pl.liminf, pl.limsup, lambda eps: extra(pl, Fraction(eps)))

    return LimitOracle(point, l_norm_limit=parent_oracle.l_norm_limit, identically_zero=parent_oracle.identically_zero,
                       l_mass=parent_oracle.l_mass, l_groups=parent_oracle.l_groups, l_tail=parent_oracle.l_tail,
                       basis=parent_oracle.basis)


def _derived(parent: SequenceHandle, func: Callable[[int], FiniteSignedMeasure], step: TransformStep, *,
             oracle: LimitOracle | None, name: str | None = None, **kw) -> SequenceHandle:
    out = SequenceHandle(parent.space, func, name=name or f"{parent.name}|{step.name}", params=parent.params,
                         oracle=oracle, domain=parent.domain, provenance=parent.with_provenance(step), **kw)
    out.aux["generator"] = parent.aux.get("generator", parent.name)
    out.aux["generator_params"] = parent.aux.get("generator_params", parent.params)
    step.output = out
    return out


def _check_indices(h: SequenceHandle, horizon: int) -> list[int]:
    return h.materialized_indices(horizon)


def _no_limit_points(h: SequenceHandle, horizon: int) -> list:
    pts = union_supports(h.at(n) for n in _check_indices(h, horizon))
    return [p for p in pts if h.oracle.point(p).limit is None]


# ---------------------------------------------------------------------------
# normalization and truncation


def normalize(h: SequenceHandle, eps: Any = Fraction(1, 2), horizon: int = 64) -> SequenceHandle:
    """``mu_n / ||mu_n||`` once every norm in the horizon exceeds ``eps``."""
    e = as_fraction(eps)
    norms = {}
    for n in _check_indices(h, horizon):
        v = h.at(n).norm()
        if v <= e:
            raise TransformError(f"normalize: ||mu_{n}|| = {v} <= {e}")
        norms[n] = v

    def at(n: int) -> FiniteSignedMeasure:
        m = h.at(n)
        v = m.norm()
        if v <= e:
            raise TransformError(f"normalize: ||mu_{n}|| = {v} <= {e}")
        return m if v == 1 else m.scale(1 / v)

    step = TransformStep("normalize", {"eps": e, "horizon": horizon},
                         {"min_norm": min(norms.values()) if norms else None},
                         lambda n: {"n": n, "norm": h.at(n).norm()})
    oracle = h.oracle if not h.pre_normalization else None
    return _derived(h, at, step, oracle=oracle, index_origin=h.index_origin, length=h.length, cap=h.cap,
                    support_size=h._support_size, disjoint_supports=h.disjoint_supports)


@dataclass
class CountableSequence:
    """Countably supported measures given atom by atom.

    ``atom(n, j)`` is the ``j``-th atom of ``mu_n``; ``cut(n)`` atoms form the
    finite set ``F_n`` and ``tail_norm(n)`` is the exact norm of the rest.
    """

    space: str
    atom: Callable[[int, int], tuple[Any, Fraction]]
    cut: Callable[[int], int]
    tail_norm: Callable[[int], Fraction]
    index_origin: int = 1
    name: str = "countable"
    oracle: LimitOracle | None = None


def _pair_code(a: int, b: int) -> int:
    return (a + b) * (a + b + 1) // 2 + b


def geometric_countable() -> CountableSequence:
    """``sum_k 2^(-k-2) (delta_(a_k) - delta_(b_k))`` on omega with ``F_n`` the first ``2n`` pairs."""

    def atom(n: int, j: int) -> tuple[int, Fraction]:
        k = j // 2
        base = 2 * _pair_code(n, k)
        c = Fraction(1, 2 ** (k + 2))
        return (base, c) if j % 2 == 0 else (base + 1, -c)

    return CountableSequence("omega", atom, lambda n: 4 * n, lambda n: Fraction(1, 4 ** n),
                             name="geometric", oracle=zero_oracle(None))


def geometric_tail_partial(n: int, terms: int) -> Fraction:
    """Norm of pairs ``2n .. 2n+terms-1``; tends to the tail norm as ``terms`` grows."""
    return sum((Fraction(2, 2 ** (k + 2)) for k in range(2 * n, 2 * n + terms)), Fraction(0))


def truncate_cs_to_fs(cs: CountableSequence, tail_bound: Callable[[int], Fraction],
                      family: TestFamily | None = None, horizon: int = 64) -> SequenceHandle:
    """Restrict each measure to ``F_n`` and renormalize, certifying the tail."""

    def restricted(n: int) -> FiniteSignedMeasure:
        return FiniteSignedMeasure(cs.space, [cs.atom(n, j) for j in range(cs.cut(n))])

    def certify(n: int) -> dict:
        tail = cs.tail_norm(n)
        bound = as_fraction(tail_bound(n))
        if not tail < bound < 1:
            raise TransformError(f"truncate: tail {tail} is not below bound {bound} < 1 at n={n}")
        cert = {"n": n, "tail": tail, "bound": bound}
        if family is not None:
            m = restricted(n)
            scale = m.norm()
            worst = Fraction(0)
            for f in family:
                part = abs(sum((c * as_fraction(f(p)) for p, c in m.items()), Fraction(0)))
                nu_f = part / scale
                if nu_f > part / (1 - tail):
                    raise TransformError(f"truncate: estimate fails for {f.name} at n={n}")
                worst = max(worst, nu_f)
            cert["max_abs_value"] = worst
        return cert

    for n in range(cs.index_origin, cs.index_origin + horizon):
        certify(n)

    def at(n: int) -> FiniteSignedMeasure:
        certify(n)
        m = restricted(n)
        return m.scale(1 / m.norm())

    step = TransformStep("truncate", {"source": cs.name, "horizon": horizon}, {}, certify)
    out = SequenceHandle(cs.space, at, name=f"{cs.name}|truncate", params={}, oracle=cs.oracle,
                         index_origin=cs.index_origin, provenance=[step])
    step.output = out
    return out


# ---------------------------------------------------------------------------
# pointwise convergence


def _progression_handle(h: SequenceHandle, start: int, step_size: int, oracle: LimitOracle,
                        step: TransformStep) -> SequenceHandle:
    def parent_index(k: int) -> int:
        return start + step_size * k

    def first_at_least(n: int) -> int:
        return max(0, -(-(n - start) // step_size))

    cap = None if h.cap is None else max(-1, (h.cap - start) // step_size)
    length = None if h.length is None else max(0, -(-(h.index_origin + h.length - start) // step_size))
    rect = (lambda k, a, b: h.rect_evaluator(parent_index(k), a, b)) if h.rect_evaluator else None
    env = (lambda k: h.balance_envelope(parent_index(k))) if h.balance_envelope else None
    size = (lambda k: h.support_size(parent_index(k))) if h._support_size else None
    step.certificate = lambda k: {"k": k, "n": parent_index(k)}
    out = _derived(h, lambda k: h.at(parent_index(k)), step, oracle=_settle_through(oracle, first_at_least),
                   cap=cap, length=length, rect_evaluator=rect, balance_envelope=env, support_size=size,
                   disjoint_supports=h.disjoint_supports)
    out.aux["parent_index"] = parent_index
    return out


def _diagonal(h: SequenceHandle, horizon: int, schedule: Callable[[int], Fraction], pool_size: int) -> list[int]:
    pool = _check_indices(h, pool_size)
    pts = union_supports(h.at(n) for n in pool)
    chosen: list[int] = []
    stage = 0
    while pool and len(chosen) < horizon:
        if stage < len(pts):
            p, width = pts[stage], schedule(stage)
            buckets: dict[int, list[int]] = {}
            for n in pool:
                buckets.setdefault(math.floor(h.at(n)[p] / width), []).append(n)
            pool = max(buckets.values(), key=lambda b: (len(b), -b[0]))
        chosen.append(pool[0])
        pool = pool[1:]
        stage += 1
    return chosen


def extract_pointwise_convergent(h: SequenceHandle, horizon: int = 64,
                                 schedule: Callable[[int], Fraction] | None = None) -> tuple[SequenceHandle, str]:
    """A pointwise convergent subsequence and the flag "exact" or "estimated"."""
    schedule = schedule or (lambda m: Fraction(1, m + 1))
    if h.oracle is not None:
        if not h.oracle.progressions and not _no_limit_points(h, horizon):
            step = TransformStep("extract", {"horizon": horizon}, {"flag": "exact", "mode": "identity"},
                                 lambda n: {"n": n})
            out = _derived(h, h.at, step, oracle=h.oracle, index_origin=h.index_origin, length=h.length,
                           cap=h.cap, rect_evaluator=h.rect_evaluator, balance_envelope=h.balance_envelope,
                           support_size=h._support_size, disjoint_supports=h.disjoint_supports)
            out.flags["pointwise"] = "exact"
            return out, "exact"
        for prog in h.oracle.progressions:
            sub = [n for n in range(prog.start, prog.start + prog.step * horizon, prog.step) if h.materializable(n)]
            pts = union_supports(h.at(n) for n in sub)
            if all(prog.oracle.point(p).limit is not None for p in pts):
                step = TransformStep("extract", {"horizon": horizon},
                                     {"flag": "exact", "mode": "progression", "start": prog.start,
                                      "step": prog.step, "label": prog.label})
                out = _progression_handle(h, prog.start, prog.step, prog.oracle, step)
                out.flags["pointwise"] = "exact"
                return out, "exact"
    chosen = _diagonal(h, horizon, schedule, 8 * horizon)
    if not chosen:
        raise TransformError("extract: no materializable indices")
    step = TransformStep("extract", {"horizon": horizon}, {"flag": "estimated", "mode": "diagonal"},
                         lambda k: {"k": k, "n": chosen[k]})
    out = _derived(h, lambda k: h.at(chosen[k]), step, oracle=None, length=len(chosen))
    out.flags["pointwise"] = "estimated"
    return out, "estimated"


# ---------------------------------------------------------------------------
# restriction steps


def _require_oracle(h: SequenceHandle, stage: str) -> LimitOracle:
    if h.oracle is None:
        raise TransformError(f"{stage}: an exact limit oracle is required")
    return h.oracle


def restrict_renormalize_offL(h: SequenceHandle, horizon: int = 64, scan_limit: int = 4096) -> SequenceHandle:
    """Subsequence whose supports meet only inside ``L``.

    With ``Y`` the points of nonzero limit, ``n_k`` is the least index with
    ``||mu_n restricted to A_k|| < 1/(k+1)`` where ``A_k`` collects the points
    outside ``Y`` of the earlier chosen supports; ``nu_k`` drops ``A_k`` and
    renormalizes.
    """
    oracle = _require_oracle(h, "restrict-off-L")
    bad = _no_limit_points(h, horizon)
    if bad:
        raise TransformError(f"restrict-off-L: no limit at {bad[0]!r}; extract a pointwise convergent subsequence first")
    in_y: dict = {}

    def is_y(p: Any) -> bool:
        v = in_y.get(p)
        if v is None:
            v = in_y[p] = oracle.in_L(p)
        return v

    used: set = set()
    measures: dict[int, FiniteSignedMeasure] = {}
    fast = h.disjoint_supports

    def accept(k: int, n: int) -> dict | None:
        if fast:
            return {"tail": Fraction(0), "alpha": Fraction(1)}
        m = h.at(n)
        t = m.mass_on(used)
        if t >= Fraction(1, k + 1):
            return None
        kept = m.without(used) if t else m
        alpha = 1 / kept.norm()
        nu = kept.scale(alpha) if alpha != 1 else kept
        if k >= 1 and not (1 <= alpha < 1 + Fraction(1, k)):
            raise TransformError(f"restrict-off-L: alpha_{k} = {alpha} outside [1, 1+1/{k})")
        dist = combine(nu, m, 1, -1).norm()
        if k >= 1 and dist > Fraction(1, k) + Fraction(1, k + 1):
            raise TransformError(f"restrict-off-L: ||nu_{k} - mu_{n}|| = {dist} too large")
        measures[k] = nu
        used.update(p for p in m if not is_y(p))
        return {"tail": t, "alpha": alpha, "distance": dist}

    sel = Selector(h, accept, scan_limit, "restrict-off-L")

    def at(k: int) -> FiniteSignedMeasure:
        n = sel.index(k)
        return h.at(n) if fast else measures[k]

    def settle_extra(pl: PointLimit, eps: Fraction) -> int:
        target = pl.settle(eps / 4)
        need = math.ceil(2 * abs(pl.limit) / eps) if pl.limit else 0
        return max(sel.first_at_least(target), need, 1)

    step = TransformStep("restrict-off-L", {"horizon": horizon}, {"Y": "nonzero limits"}, sel.cert)
    size = (lambda k: h.support_size(sel.index(k))) if fast and h._support_size else None
    rect = (lambda k, a, b: h.rect_evaluator(sel.index(k), a, b)) if fast and h.rect_evaluator else None
    out = _derived(h, at, step, oracle=_settle_through(oracle, sel.first_at_least, settle_extra),
                   support_size=size, rect_evaluator=rect,
                   disjoint_supports=fast or oracle.identically_zero)
    out.aux["selector"] = sel
    return out


def _l_points(h: SequenceHandle, count: int, horizon: int) -> list:
    oracle = h.oracle
    enum = oracle.l_enumeration(count)
    if enum is not None:
        return enum
    pts = union_supports(h.at(n) for n in _check_indices(h, horizon))
    return [p for p in pts if oracle.in_L(p)][:count]


def restrict_to_L(h: SequenceHandle, horizon: int = 64, scan_limit: int = 4096) -> SequenceHandle:
    """Restrict to ``L`` and renormalize; needs ``||mu_n restricted to L|| -> 1``."""
    oracle = _require_oracle(h, "restrict-to-L")
    declared = oracle.l_norm_limit
    if declared is not None and declared != 1:
        raise TransformError(f"restrict-to-L: the norm on L tends to {declared}, not 1")
    if declared is None:
        for n in _check_indices(h, horizon):
            m = h.at(n)
            if m.restrict(oracle.in_L).norm() != 1:
                raise TransformError("restrict-to-L: no certified envelope and the norm on L is not 1")
    measures: dict[int, FiniteSignedMeasure] = {}

    def accept(k: int, n: int) -> dict | None:
        m = h.at(n)
        on_l = m.restrict(oracle.in_L)
        off = m.norm() - on_l.norm()
        if off >= Fraction(1, k + 1):
            return None
        alpha = 1 / on_l.norm()
        if k >= 1 and not (1 <= alpha < 1 + Fraction(1, k)):
            raise TransformError(f"restrict-to-L: alpha_{k} = {alpha} outside [1, 1+1/{k})")
        nu = on_l if alpha == 1 else on_l.scale(alpha)
        dist = combine(nu, m, 1, -1).norm()
        if dist != 2 * off or dist >= Fraction(2, k + 1):
            raise TransformError(f"restrict-to-L: distance {dist} violates 2||mu off L|| < 2/(k+1)")
        measures[k] = nu
        return {"off_L": off, "alpha": alpha, "distance": dist}

    sel = Selector(h, accept, scan_limit, "restrict-to-L")

    def at(k: int) -> FiniteSignedMeasure:
        sel.index(k)
        return measures[k]

    def settle_extra(pl: PointLimit, eps: Fraction) -> int:
        need = math.ceil(2 * abs(pl.limit) / eps) if pl.limit else 0
        return max(sel.first_at_least(pl.settle(eps / 4)), need, 1)

    step = TransformStep("restrict-to-L", {"horizon": horizon}, {"l_norm_limit": declared}, sel.cert)
    base = _settle_through(oracle, sel.first_at_least, settle_extra)
    out_oracle = LimitOracle(base.point, l_norm_limit=Fraction(1), l_mass=oracle.l_mass,
                             l_groups=oracle.l_groups, l_tail=oracle.l_tail, basis=oracle.basis)
    out = _derived(h, at, step, oracle=out_oracle)
    out.aux["selector"] = sel
    return out


# ---------------------------------------------------------------------------
# disjointification


def dagger_select(h: SequenceHandle, alpha_cap: Fraction | None = None, horizon: int = 64,
                  scan_limit: int = 4096) -> SequenceHandle:
    """Stage ``l`` takes the least index where every ``q_k``, ``k <= l``, of ``L`` satisfies
    ``|nu(q_k) - lim| < |lim|/(l+1)``; with ``alpha_cap`` also ``||nu restricted to L|| < alpha_cap``."""
    oracle = _require_oracle(h, "dagger")
    limits: dict = {}

    def accept(l: int, n: int) -> dict | None:
        m = h.at(n)
        pts = _l_points(h, l + 1, horizon)
        worst = Fraction(0)
        for q in pts:
            lim = limits.get(q)
            if lim is None:
                lim = limits[q] = oracle.limit(q)
            gap = abs(m[q] - lim)
            if not gap < abs(lim) / (l + 1):
                return None
            worst = max(worst, gap / abs(lim))
        cert = {"checked": len(pts), "worst_relative_gap": worst}
        if alpha_cap is not None:
            on_l = m.restrict(oracle.in_L).norm()
            if not on_l < alpha_cap:
                return None
            cert["norm_on_L"] = on_l
        return cert

    sel = Selector(h, accept, scan_limit, "dagger")
    step = TransformStep("dagger", {"horizon": horizon, "alpha_cap": alpha_cap}, {}, sel.cert)
    out = _derived(h, lambda k: h.at(sel.index(k)), step, oracle=_settle_through(oracle, sel.first_at_least))
    out.aux["selector"] = sel
    return out


def double_dagger_select(h: SequenceHandle, scan_limit: int = 4096) -> SequenceHandle:
    """Pairs ``(nu_2k, nu_2k+1)`` where the odd member is within ``1/(4|supp nu_2k|)``
    of the limit at every point of the even member's support."""
    oracle = _require_oracle(h, "double-dagger")
    evens: dict[int, int] = {}

    def accept(k: int, n: int) -> dict | None:
        if k % 2 == 0:
            evens[k] = n
            return {"role": "even"}
        prev = h.at(evens[k - 1])
        bound = Fraction(1, 4 * len(prev))
        m = h.at(n)
        worst = Fraction(0)
        for x in prev:
            lim = oracle.limit(x)
            if lim is None:
                raise TransformError(f"double-dagger: no limit at {x!r}")
            gap = abs(m[x] - lim)
            if not gap < bound:
                return None
            worst = max(worst, gap)
        return {"role": "odd", "bound": bound, "worst_gap": worst}

    sel = Selector(h, accept, scan_limit, "double-dagger")
    step = TransformStep("double-dagger", {}, {}, sel.cert)
    out = _derived(h, lambda k: h.at(sel.index(k)), step, oracle=_settle_through(oracle, sel.first_at_least))
    out.aux["selector"] = sel
    return out


def difference_normalize(h: SequenceHandle, beta: Any = Fraction(1), *, assert_null: bool = False) -> SequenceHandle:
    """``theta_n = (nu_2n - nu_2n+1)/||nu_2n - nu_2n+1||`` with every difference norm at least ``beta``."""
    b = as_fraction(beta)
    if b <= 0:
        raise TransformError("difference-normalize: beta must be positive")
    o = h.index_origin

    def diff(n: int) -> FiniteSignedMeasure:
        return combine(h.at(o + 2 * n), h.at(o + 2 * n + 1), 1, -1)

    def certify(n: int) -> dict:
        v = diff(n).norm()
        if v < b:
            raise TransformError(f"difference-normalize: ||nu_{2 * n} - nu_{2 * n + 1}|| = {v} < beta = {b}")
        return {"n": n, "difference_norm": v}

    def at(n: int) -> FiniteSignedMeasure:
        certify(n)
        d = diff(n)
        return d.scale(1 / d.norm())

    null = assert_null or (h.oracle is not None and h.oracle.identically_zero)
    oracle = zero_oracle(None, basis="proof") if null else None
    length = None if h.length is None else h.length // 2
    step = TransformStep("difference-normalize", {"beta": b}, {"null_oracle": null}, certify)
    return _derived(h, at, step, oracle=oracle, length=length,
                    disjoint_supports=h.disjoint_supports)


def check_pairwise_disjoint(h: SequenceHandle, count: int) -> list[tuple[int, int]]:
    """Index pairs among the first ``count`` whose supports meet."""
    seen: dict = {}
    clashes = []
    for k in h.indices(count):
        try:
            m = h.at(k)
        except VirtualMeasureError:
            break
        for p in m:
            if p in seen:
                clashes.append((seen[p], k))
            else:
                seen[p] = k
    return clashes


def disjointify(h: SequenceHandle, horizon: int = 64, verify: int = 30, scan_limit: int = 4096) -> SequenceHandle:
    """Pipeline producing a subsequence-derived sequence with pairwise disjoint supports."""
    _require_oracle(h, "disjointify")
    steps: list[TransformStep] = []
    cur, flag = extract_pointwise_convergent(h, horizon)
    if flag != "exact":
        raise TransformError("disjointify: pointwise convergence could not be certified")
    steps.append(cur.provenance[-1])
    cur = restrict_renormalize_offL(cur, horizon, scan_limit)
    steps.append(cur.provenance[-1])
    oracle = cur.oracle
    first_l = _l_points(cur, 1, horizon)
    alpha = oracle.l_norm_limit
    if not first_l or alpha == 0:
        case, beta = "L empty", None
    else:
        if alpha is None:
            raise TransformError("disjointify: the limit of the norm on L is not certified")
        if 0 < alpha < 1:
            case, beta = "alpha in (0,1)", 1 - alpha
            cur = dagger_select(cur, (1 + alpha) / 2, horizon, scan_limit)
            steps.append(cur.provenance[-1])
        elif alpha == 1:
            case, beta = "alpha = 1", Fraction(1, 4)
            for stage in (lambda x: restrict_to_L(x, horizon, scan_limit),
                          lambda x: dagger_select(x, None, horizon, scan_limit),
                          lambda x: double_dagger_select(x, scan_limit)):
                cur = stage(cur)
                steps.append(cur.provenance[-1])
        else:
            raise TransformError(f"disjointify: impossible norm limit {alpha} on L")
        cur = difference_normalize(cur, beta, assert_null=True)
        steps.append(cur.provenance[-1])
        cur = restrict_renormalize_offL(cur, horizon, scan_limit)
        steps.append(cur.provenance[-1])
    clashes = check_pairwise_disjoint(cur, verify)
    if clashes:
        raise TransformError(f"disjointify: supports of outputs {clashes[0]} intersect")
    final = cur
    step = TransformStep("disjointify", {"horizon": horizon, "verify": verify},
                         {"case": case, "alpha": alpha, "beta": beta, "verified_pairs": verify},
                         lambda k: {"k": k}, substeps=steps)
    out = _derived(h, final.at, step, oracle=final.oracle, length=final.length,
                   rect_evaluator=final.rect_evaluator, support_size=final._support_size,
                   disjoint_supports=True)
    out.flags["disjoint_verified"] = verify
    return out


# ---------------------------------------------------------------------------
# support-size reductions


def _labelled(m: FiniteSignedMeasure) -> tuple[Fraction, ...]:
    return tuple(c for _, c in m.sorted_items(sort_key))


def stabilize_coefficients(h: SequenceHandle, M: int | None = None, delta: Any = Fraction(1, 64),
                           horizon: int = 64) -> tuple[SequenceHandle, tuple[Fraction, ...], bool]:
    """Subsequence with convergent labelled coefficient vectors and their limit."""
    d = as_fraction(delta)
    idx = _check_indices(h, horizon)
    vecs = {n: _labelled(h.at(n)) for n in idx}
    sizes = {len(v) for v in vecs.values()}
    if M is None and len(sizes) == 1:
        M = sizes.pop()
    if any(len(v) != M for v in vecs.values()):
        raise TransformError(f"stabilize: support sizes differ from M={M}: {sorted({len(v) for v in vecs.values()})}")
    pool = list(idx)
    for i in range(M):
        buckets: dict[int, list[int]] = {}
        for n in pool:
            buckets.setdefault(math.floor(vecs[n][i] / d), []).append(n)
        pool = max(buckets.values(), key=lambda b: (len(b), -b[0]))
    if len(pool) < 2:
        raise TransformError("stabilize: no convergent labelling found within the horizon")
    last = vecs[pool[-1]]
    start = len(pool) - 1
    while start > 0 and vecs[pool[start - 1]] == last:
        start -= 1
    exact = len(pool) - start >= 2
    if exact:
        chosen = pool[start:]
        alpha = last
    else:
        chosen = pool
        grid = tuple(Fraction(math.floor(c / d)) * d for c in last)
        total = sum(abs(c) for c in grid)
        alpha = tuple(c / total for c in grid) if total else grid
    if sum(abs(c) for c in alpha) != 1:
        raise TransformError(f"stabilize: limit vector has sum of moduli {sum(abs(c) for c in alpha)}")
    pos = sum((c for c in alpha if c > 0), Fraction(0))
    if abs(pos - Fraction(1, 2)) > (0 if exact else d):
        raise TransformError(f"stabilize: positive part {pos} is not within {d} of 1/2")
    step = TransformStep("stabilize", {"M": M, "delta": d, "horizon": horizon},
                         {"alpha": list(alpha), "exact": exact, "positive": pos},
                         lambda k: {"k": k, "n": chosen[k], "vector": list(vecs[chosen[k]])})
    out = _derived(h, lambda k: h.at(chosen[k]), step, oracle=None, length=len(chosen))
    out.aux["alpha"] = alpha
    return out, alpha, exact


def smallest_atom(m: FiniteSignedMeasure) -> Any:
    """The atom of least magnitude, ties broken by the canonical order."""
    return min(m.sorted_items(sort_key), key=lambda pc: abs(pc[1]))[0]


def drop_small_atom(h: SequenceHandle, picks: Callable[[int], Any] | None = None,
                    bound: Callable[[int], Fraction] | None = None, *, pick_name: str = "smallest",
                    bound_name: str = "1/(n+1)") -> SequenceHandle:
    """Remove the picked atom, certified smaller than ``bound(n)``, and renormalize."""
    bound = bound or (lambda n: Fraction(1, n + 1))
    picks = picks or (lambda n: smallest_atom(h.at(n)))

    def certify(n: int) -> dict:
        m = h.at(n)
        p = picks(n)
        if p not in m:
            raise TransformError(f"drop-small-atom: pick {p!r} not in the support at n={n}")
        c = abs(m[p])
        b = as_fraction(bound(n))
        if not c < b:
            raise TransformError(f"drop-small-atom: |mu_{n}({p!r})| = {c} is not below {b}")
        scale = 1 / (m.norm() - c)
        return {"n": n, "dropped": c, "bound": b, "scale": scale, "distance": 2 * c / m.norm()}

    def at(n: int) -> FiniteSignedMeasure:
        cert = certify(n)
        m = h.at(n)
        return m.without({picks(n)}).scale(cert["scale"])

    certify(h.index_origin)
    step = TransformStep("drop-small-atom", {"pick": pick_name, "bound": bound_name}, {}, certify)
    size = (lambda n: h.support_size(n) - 1) if h._support_size else None
    return _derived(h, at, step, oracle=None, index_origin=h.index_origin, length=h.length, cap=h.cap,
                    support_size=size)


def pair_reduce(h: SequenceHandle, M: int | None = None, min_atom: Any = None,
                horizon: int = 64) -> SequenceHandle:
    """``1/2 (delta_x - delta_y)`` with ``x``/``y`` the least positive/negative atoms."""
    floor = None if min_atom is None else as_fraction(min_atom)
    sizes = {len(h.at(n)) for n in _check_indices(h, horizon)}
    if M is None and len(sizes) == 1:
        M = next(iter(sizes))
    if M is None or M < 2:
        raise TransformError(f"pair-reduce: need a constant support size M >= 2, got {sorted(sizes)}")
    if sizes != {M}:
        raise TransformError(f"pair-reduce: support sizes {sorted(sizes)} differ from M={M}")

    def pick(n: int) -> tuple[Any, Any]:
        m = h.at(n)
        if len(m) != M:
            raise TransformError(f"pair-reduce: |supp mu_{n}| = {len(m)} != {M}")
        if floor is not None and any(abs(c) < floor for c in m.atoms.values()):
            raise TransformError(f"pair-reduce: an atom of mu_{n} is below {floor}")
        items = m.sorted_items(sort_key)
        x = next((p for p, c in items if c > 0), None)
        y = next((p for p, c in items if c < 0), None)
        if x is None or y is None:
            raise TransformError(f"pair-reduce: mu_{n} lacks a positive or negative atom")
        return x, y

    half = Fraction(1, 2)

    def at(n: int) -> FiniteSignedMeasure:
        x, y = pick(n)
        return FiniteSignedMeasure._trusted(h.space, {x: half, y: -half})

    step = TransformStep("pair-reduce", {"M": M, "min_atom": floor}, {"rule": "least positive, least negative"},
                         lambda n: {"n": n, "pair": [str(p) for p in pick(n)]})
    return _derived(h, at, step, oracle=None, index_origin=h.index_origin, length=h.length, cap=h.cap,
                    support_size=lambda n: 2)


def concentrate_at_isolated(h: SequenceHandle, x: Any, g: TestFunctional | Callable, horizon: int = 64,
                            tolerance: Any = Fraction(1, 16), scan_limit: int = 4096) -> SequenceHandle:
    """Weight by ``g`` around ``x`` on indices where ``|mu_n({x})| > alpha/2``."""
    oracle = _require_oracle(h, "concentrate")
    alpha = oracle.point(x).limsup
    if not alpha > 0:
        raise TransformError(f"concentrate: limsup at {x!r} is {alpha}, not positive")
    if as_fraction(g(x)) != 1:
        raise TransformError("concentrate: g(x) must equal 1")
    measures: dict[int, FiniteSignedMeasure] = {}

    def accept(k: int, n: int) -> dict | None:
        m = h.at(n)
        if not abs(m[x]) > alpha / 2:
            return None
        atoms = {}
        for p, c in m.items():
            gv = as_fraction(g(p))
            if not 0 <= gv <= 1:
                raise TransformError(f"concentrate: g({p!r}) = {gv} outside [0,1]")
            if gv:
                atoms[p] = c * gv
        weighted = FiniteSignedMeasure._trusted(h.space, atoms)
        w = weighted.norm()
        if w == 0:
            raise TransformError(f"concentrate: ||g dmu_{n}|| = 0")
        measures[k] = weighted.scale(1 / w)
        return {"coef_at_x": m[x], "weighted_norm": w}

    sel = Selector(h, accept, scan_limit, "concentrate")

    def at(k: int) -> FiniteSignedMeasure:
        sel.index(k)
        return measures[k]

    tol = as_fraction(tolerance)
    recurring = []
    seen: dict = {}
    tail_from = horizon // 2
    for k in range(horizon):
        try:
            m = at(k)
        except TransformError:
            break
        for p, c in m.items():
            if p != x and k >= tail_from and abs(c) >= tol:
                seen[p] = seen.get(p, 0) + 1
    recurring = [p for p, cnt in seen.items() if cnt > 1]
    step = TransformStep("concentrate", {"x": h.domain.encode(x), "g": getattr(g, "name", "g"), "horizon": horizon},
                         {"alpha": alpha, "LS_subset_of_x": not recurring, "basis": "estimated at horizon"},
                         sel.cert)
    out = _derived(h, at, step, oracle=None)
    out.flags["ls_recurring"] = recurring
    return out

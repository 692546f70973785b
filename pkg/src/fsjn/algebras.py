"""Descriptors for subsets of omega in the power set, Schachermayer and density algebras."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Union

PairMask = Union[frozenset, Callable[[int], bool]]


@dataclass(frozen=True)
class PowerSetElement:
    predicate: Callable[[int], bool]
    name: str = "predicate"
    kind: str = field(default="PowerSet", init=False)


@dataclass(frozen=True)
class SchachermayerSet:
    """A set ``A`` with ``2k in A iff 2k+1 in A`` for every pair ``k`` outside
    the pairs touched by ``exceptions``.

    ``pair_mask`` lists (or decides) the pairs ``{2k, 2k+1}`` contained in
    ``A``; ``exceptions`` are naturals whose membership is toggled.  Pairs with
    both members toggled are folded into the mask, so ``exceptions`` is
    canonical.  ``members``, when given, is an independently declared
    membership predicate that :func:`verify_algebra_element` checks against
    the pairing requirement.
    """

    pair_mask: PairMask = frozenset()
    exceptions: frozenset = frozenset()
    members: Callable[[int], bool] | None = None
    kind: str = field(default="Schachermayer", init=False)

    def __post_init__(self):
        exc = frozenset(int(k) for k in self.exceptions)
        if any(k < 0 for k in exc):
            raise ValueError("exceptions must be naturals")
        full = {k // 2 for k in exc if k % 2 == 0 and k + 1 in exc}
        if full and self.members is None:
            mask = self.pair_mask
            if isinstance(mask, frozenset):
                mask = mask.symmetric_difference(full)
            else:
                base = mask
                mask = lambda j, _b=base, _f=frozenset(full): _b(j) != (j in _f)  # noqa: E731
            exc = frozenset(k for k in exc if k // 2 not in full)
            object.__setattr__(self, "pair_mask", mask)
        object.__setattr__(self, "exceptions", exc)

    def pair_in_mask(self, j: int) -> bool:
        m = self.pair_mask
        return j in m if isinstance(m, frozenset) else bool(m(j))

    def violated_pairs(self) -> frozenset:
        return frozenset(k // 2 for k in self.exceptions)

    @classmethod
    def from_predicate(cls, pred: Callable[[int], bool], exceptions=frozenset()) -> "SchachermayerSet":
        return cls(frozenset(), frozenset(exceptions), pred)


@dataclass(frozen=True)
class DensitySet:
    """A set with declared asymptotic density ``d`` in {0, 1}.

    ``modulus(eps)`` must return ``N`` such that the counting density over
    ``{0..n-1}`` is within ``eps`` of ``d`` for every ``n >= N``.
    """

    predicate: Callable[[int], bool]
    d: int
    modulus: Callable[[Fraction], int]
    name: str = "density"
    modulus_name: str = "modulus"
    kind: str = field(default="Density", init=False)

    def __post_init__(self):
        if self.d not in (0, 1):
            raise ValueError("declared density must be 0 or 1")


AlgebraDescriptor = Union[PowerSetElement, SchachermayerSet, DensitySet]


def membership(desc: AlgebraDescriptor, k: int) -> bool:
    if isinstance(desc, SchachermayerSet):
        if desc.members is not None:
            return bool(desc.members(k))
        return desc.pair_in_mask(k // 2) != (k in desc.exceptions)
    return bool(desc.predicate(k))


def pair_bound(desc: SchachermayerSet) -> int:
    """Least ``N`` such that every pair ``k >= N`` satisfies the pairing."""
    if not isinstance(desc, SchachermayerSet):
        raise TypeError("pair_bound needs a Schachermayer descriptor")
    pairs = desc.violated_pairs()
    return max(pairs) + 1 if pairs else 0


@dataclass
class AlgebraReport:
    kind: str
    passed: bool
    horizon: int
    violations: list[str] = field(default_factory=list)
    checkpoints: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"kind": self.kind, "passed": self.passed, "horizon": self.horizon,
                "violations": self.violations, "checkpoints": self.checkpoints}


DENSITY_EPSILONS = (Fraction(1, 4), Fraction(1, 16))


def verify_algebra_element(desc: AlgebraDescriptor, horizon: int, max_violations: int = 20) -> AlgebraReport:
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if isinstance(desc, SchachermayerSet):
        bad = desc.violated_pairs()
        violations = []
        for j in range((horizon - 1) // 2 + 1):
            if 2 * j + 1 > horizon or j in bad:
                continue
            a, b = membership(desc, 2 * j), membership(desc, 2 * j + 1)
            if a != b:
                violations.append(f"{2 * j}{'∈' if a else '∉'}A but {2 * j + 1}{'∈' if b else '∉'}A")
                if len(violations) >= max_violations:
                    break
        return AlgebraReport("Schachermayer", not violations, horizon, violations)
    if isinstance(desc, DensitySet):
        violations, checkpoints = [], []
        prefix = [0]
        for k in range(horizon):
            prefix.append(prefix[-1] + (1 if desc.predicate(k) else 0))
        for eps in DENSITY_EPSILONS:
            start = max(1, int(desc.modulus(eps)))
            worst = None
            for n in range(start, horizon + 1):
                dev = abs(Fraction(prefix[n], n) - desc.d)
                if worst is None or dev > worst[1]:
                    worst = (n, dev)
                if dev > eps and len(violations) < max_violations:
                    violations.append(f"eps={eps}: n={n} density {Fraction(prefix[n], n)} off by {dev}")
            checkpoints.append({"eps": str(eps), "N": start,
                                "worst_n": worst[0] if worst else None,
                                "worst_deviation": str(worst[1]) if worst else None,
                                "sampled": start <= horizon})
        return AlgebraReport("Density", not violations, horizon, violations, checkpoints)
    return AlgebraReport("PowerSet", True, horizon)


# ---------------------------------------------------------------------------
# builtin density predicates and moduli


def _is_square(k: int) -> bool:
    return k >= 1 and math.isqrt(k) ** 2 == k


def _is_power_of_two(k: int) -> bool:
    return k >= 1 and k & (k - 1) == 0


def _blocks(width: int) -> Callable[[int], bool]:
    # width consecutive naturals starting at each positive square
    def pred(k: int) -> bool:
        if k < 1:
            return False
        m = math.isqrt(k)
        return k - m * m < width

    return pred


def _arithmetic(a: int, b: int) -> Callable[[int], bool]:
    if a < 1 or b < 0:
        raise ValueError("arithmetic(a,b) needs a >= 1 and b >= 0")
    return lambda k: k >= b and (k - b) % a == 0


def inverse_square_modulus(c: int = 1) -> Callable[[Fraction], int]:
    """``N(eps) = ceil(c^2/eps^2) + 1``."""
    return lambda eps: math.ceil(Fraction(c * c) / (Fraction(eps) ** 2)) + 1


def inverse_modulus(c: int = 1) -> Callable[[Fraction], int]:
    """``N(eps) = ceil(c/eps)``."""
    return lambda eps: max(1, math.ceil(Fraction(c) / Fraction(eps)))


_CALL = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$")


def _parse_call(text: str) -> tuple[str, list[int]]:
    m = _CALL.match(text)
    if not m:
        raise ValueError(f"cannot parse {text!r}")
    args = [int(a) for a in m.group(2).split(",")] if m.group(2) and m.group(2).strip() else []
    return m.group(1), args


def builtin_predicate(text: str) -> Callable[[int], bool]:
    name, args = _parse_call(text)
    if name == "squares" and not args:
        return _is_square
    if name == "powers_of_two" and not args:
        return _is_power_of_two
    if name == "blocks" and len(args) == 1:
        return _blocks(args[0])
    if name == "arithmetic" and len(args) == 2:
        return _arithmetic(*args)
    raise ValueError(f"unknown density predicate {text!r}")


def builtin_modulus(text: str) -> Callable[[Fraction], int]:
    name, args = _parse_call(text)
    if name == "inverse_square" and len(args) <= 1:
        return inverse_square_modulus(*(args or [1]))
    if name == "inverse" and len(args) <= 1:
        return inverse_modulus(*(args or [1]))
    raise ValueError(f"unknown modulus {text!r}")


def load_descriptor(data: dict) -> AlgebraDescriptor:
    """Build a descriptor from its JSON catalog entry."""
    kind = str(data.get("kind", "")).lower()
    if kind == "schachermayer":
        mask = data.get("pairMask", [])
        if mask == "all":
            pm: PairMask = lambda j: True  # noqa: E731
        else:
            pm = frozenset(int(j) for j in mask)
        return SchachermayerSet(pm, frozenset(int(k) for k in data.get("exceptions", [])))
    if kind == "density":
        pred_text = data["predicate"]
        mod_text = data.get("modulus", "inverse_square")
        return DensitySet(builtin_predicate(pred_text), int(data["d"]), builtin_modulus(mod_text),
                          name=pred_text, modulus_name=mod_text)
    raise ValueError(f"unknown descriptor kind {data.get('kind')!r}")

"""Named generators and transforms with string parameters, used by the CLI and replay."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable

from . import generators as gen
from . import transforms as tr
from .analysis import UsageError
from .handles import SequenceHandle
from .measure import as_fraction
from .spaces import SquarePoint, indicator, tent


def parse_fraction(text: Any) -> Fraction:
    try:
        return as_fraction(text if not isinstance(text, str) else Fraction(text))
    except (ValueError, ZeroDivisionError, TypeError) as exc:
        raise UsageError(f"not a rational number: {text!r}") from exc


def parse_int(text: Any) -> int:
    try:
        return int(text)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"not an integer: {text!r}") from exc


def parse_optional_int(text: Any) -> int | None:
    return None if text in (None, "", "none") else parse_int(text)


@dataclass
class Entry:
    build: Callable[..., Any]
    params: dict[str, tuple[Callable[[Any], Any], Any]] = field(default_factory=dict)
    help: str = ""

    def normalize(self, given: dict) -> dict:
        unknown = set(given) - set(self.params)
        if unknown:
            raise UsageError(f"unknown parameters {sorted(unknown)}; expected {sorted(self.params)}")
        out = {}
        for key, (parse, default) in self.params.items():
            raw = given.get(key, default)
            out[key] = None if raw is None else parse(raw)
        return out


def _square3(alpha: Fraction) -> SequenceHandle:
    if not 0 < alpha < 1:
        raise UsageError(f"alpha must lie in (0, 1), got {alpha}")
    return gen.square3(alpha)


def _square2(partition: str) -> SequenceHandle:
    if partition not in ("dyadic", "triadic"):
        raise UsageError(f"partition must be dyadic or triadic, got {partition!r}")
    return gen.square2(partition)


def _positive_cap(cap: int | None) -> int | None:
    if cap is not None and cap < 1:
        raise UsageError("caps must be >= 1")
    return cap


GENERATORS: dict[str, Entry] = {
    "conv-pair": Entry(lambda: gen.square_conv_pair(), {}, "(delta_(0,1/(n+1)) - delta_(0,0))/2 on the square"),
    "square1": Entry(lambda: gen.square1(), {}, "even/odd alternating construction on the square"),
    "square2": Entry(_square2, {"partition": (str, "dyadic")}, "block partition construction on the square"),
    "square3": Entry(_square3, {"alpha": (parse_fraction, "1/3")}, "rational enumeration with weight alpha"),
    "square4": Entry(lambda cap: gen.square4(_positive_cap(cap)), {"cap": (parse_optional_int, 16)},
                    "dyadic construction with L-norm limit 1"),
    "schachermayer": Entry(lambda: gen.schachermayer_seq(), {}, "(delta_2k - delta_2k+1)/2 on omega"),
    "product": Entry(lambda cap, brute_cap: gen.product_seq(_positive_cap(cap), _positive_cap(brute_cap)),
                    {"cap": (parse_int, 18), "brute_cap": (parse_int, 14)}, "sign-vector product construction"),
    "cantor": Entry(lambda cap: gen.cantor_canonical(_positive_cap(cap)), {"cap": (parse_optional_int, 20)},
                   "balanced dyadic atoms on the Cantor space"),
    "rademacher": Entry(lambda: gen.rademacher_rl(), {}, "Rademacher cylinder measures"),
    "uds": Entry(lambda cap: gen.uds_seq(cap=_positive_cap(cap)), {"cap": (parse_optional_int, 18)},
                "uniformly distributed blocks minus Lebesgue"),
    "transport": Entry(lambda cap: gen.transport_seq(cap=_positive_cap(cap)), {"cap": (parse_optional_int, 20)},
                      "Cantor sequence pulled back to the doubled Cantor space"),
    "ad-dup": Entry(lambda: gen.ad_duplicate_seq(), {}, "duplicated-points sequence"),
}

CYLINDER_GENERATORS = {"rademacher"}


def build_generator(name: str, params: dict | None = None) -> Any:
    if name not in GENERATORS:
        raise UsageError(f"unknown generator {name!r}; choose from {', '.join(GENERATORS)}")
    entry = GENERATORS[name]
    norm = entry.normalize(params or {})
    try:
        out = entry.build(**norm)
    except gen.GeneratorError as exc:
        raise UsageError(str(exc)) from exc
    if isinstance(out, SequenceHandle):
        out.aux["generator"] = name
        out.aux["generator_params"] = {k: (str(v) if isinstance(v, Fraction) else v) for k, v in norm.items()}
    return out


# ---------------------------------------------------------------------------
# transforms


def _concentrate(h: SequenceHandle, point: Any, g: str, radius: Fraction, horizon: int,
                 tolerance: Fraction) -> SequenceHandle:
    if point is None:
        raise UsageError("concentrate needs a point")
    x = h.domain.decode(point)
    h.domain.validate(x)
    if g == "tent":
        if not isinstance(x, SquarePoint):
            raise UsageError("the tent weight is defined on the unit square only")
        weight = tent(x.x, x.y, radius)
    elif g == "indicator":
        weight = indicator(f"1[{point}]", lambda p, _x=x: p == _x)
    else:
        raise UsageError(f"unknown weight {g!r}")
    return tr.concentrate_at_isolated(h, x, weight, horizon, tolerance)


TRANSFORMS: dict[str, Entry] = {
    "normalize": Entry(lambda h, eps, horizon: tr.normalize(h, eps, horizon),
                      {"eps": (parse_fraction, "1/2"), "horizon": (parse_int, 64)}),
    "extract": Entry(lambda h, horizon: tr.extract_pointwise_convergent(h, horizon)[0], {"horizon": (parse_int, 64)}),
    "restrict-off-L": Entry(lambda h, horizon: tr.restrict_renormalize_offL(h, horizon), {"horizon": (parse_int, 64)}),
    "restrict-to-L": Entry(lambda h, horizon: tr.restrict_to_L(h, horizon), {"horizon": (parse_int, 64)}),
    "difference-normalize": Entry(lambda h, beta: tr.difference_normalize(h, beta), {"beta": (parse_fraction, "1")}),
    "disjointify": Entry(lambda h, horizon, verify: tr.disjointify(h, horizon, verify),
                        {"horizon": (parse_int, 64), "verify": (parse_int, 30)}),
    "stabilize": Entry(lambda h, M, delta, horizon: tr.stabilize_coefficients(h, M, delta, horizon)[0],
                      {"M": (parse_optional_int, None), "delta": (parse_fraction, "1/64"), "horizon": (parse_int, 64)}),
    "drop-small-atom": Entry(lambda h: tr.drop_small_atom(h), {}),
    "pair-reduce": Entry(lambda h, M, min_atom, horizon: tr.pair_reduce(h, M, min_atom, horizon),
                        {"M": (parse_optional_int, None), "min_atom": (parse_fraction, None),
                         "horizon": (parse_int, 64)}),
    "concentrate": Entry(_concentrate, {"point": (lambda v: v, None), "g": (str, "tent"),
                                       "radius": (parse_fraction, "1/4"), "horizon": (parse_int, 64),
                                       "tolerance": (parse_fraction, "1/16")}),
}


def apply_transform(h: SequenceHandle, name: str, params: dict | None = None) -> tuple[SequenceHandle, dict]:
    """Run one named transform; returns the output and the normalized parameters for replay."""
    if name not in TRANSFORMS:
        raise UsageError(f"unknown transform {name!r}; choose from {', '.join(TRANSFORMS)}")
    if not isinstance(h, SequenceHandle):
        raise UsageError(f"transform {name!r} needs a finitely supported sequence")
    entry = TRANSFORMS[name]
    norm = entry.normalize(params or {})
    out = entry.build(h, **norm)
    return out, {k: (str(v) if isinstance(v, Fraction) else v) for k, v in norm.items()}


def run_pipeline(h: SequenceHandle, stages: list[tuple[str, dict]]) -> tuple[SequenceHandle, list[dict]]:
    record = []
    for name, params in stages:
        h, norm = apply_transform(h, name, params)
        record.append({"name": name, "params": norm})
    return h, record


def rebuild(data: dict) -> tuple[SequenceHandle, list[dict]]:
    """Reconstruct the live handle described by a handle file (generator plus pipeline)."""
    try:
        base = build_generator(data["generator"], data.get("params", {}))
        stages = [(s["name"], s.get("params", {})) for s in data.get("pipeline", [])]
    except KeyError as exc:
        raise UsageError(f"handle file lacks field {exc}") from exc
    return run_pipeline(base, stages)

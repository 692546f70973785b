"""Deterministic JSON encodings of measures, handles and reports."""
from __future__ import annotations

import json
from fractions import Fraction
from typing import Any, Callable

from .enumeration import VirtualMeasureError
from .handles import SequenceHandle
from .measure import FiniteSignedMeasure
from .spaces import PointDomain, sort_key

HANDLE_FORMAT = "fsjn-handle/1"
DEFAULT_MAX_ATOMS = 200_000


def dumps(obj: Any) -> str:
    """Canonical text: sorted keys, fixed separators, trailing newline."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False) + "\n"


def jsonable(x: Any, encode: Callable[[Any], Any] | None = None) -> Any:
    """Fractions become strings; other non-JSON values go through ``encode`` or ``str``."""
    if x is None or isinstance(x, (bool, int, float, str)):
        return x
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, dict):
        return {str(k): jsonable(v, encode) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v, encode) for v in x]
    if isinstance(x, (frozenset, set)):
        return sorted(jsonable(v, encode) for v in x)
    if encode is not None:
        try:
            r = encode(x)
        except (TypeError, ValueError, AttributeError, KeyError):
            r = x
        if r is not x:
            return jsonable(r)
    return str(x)


def measure_to_json(m: FiniteSignedMeasure, domain: PointDomain) -> dict:
    atoms = [{"point": domain.encode(p), "coef": str(c)} for p, c in m.sorted_items(sort_key)]
    return {"space": domain.id, "atoms": atoms}


def measure_from_json(data: dict, domain: PointDomain) -> FiniteSignedMeasure:
    if data["space"] != domain.id:
        raise ValueError(f"measure on {data['space']!r} read into {domain.id!r}")
    atoms = {}
    for a in data["atoms"]:
        p = domain.decode(a["point"])
        domain.validate(p)
        atoms[p] = Fraction(a["coef"])
    return FiniteSignedMeasure(domain.id, atoms)


def handle_measures(h: SequenceHandle, horizon: int, max_atoms: int = DEFAULT_MAX_ATOMS) -> list[dict]:
    """The first ``horizon`` indices; entries past the cap or too large are virtual."""
    out = []
    for n in h.indices(horizon):
        entry: dict = {"n": n}
        if not h.materializable(n):
            entry.update(virtual=True, reason="materialization cap")
            out.append(entry)
            continue
        try:
            size = h.support_size(n)
        except VirtualMeasureError:
            entry.update(virtual=True, reason="materialization cap")
            out.append(entry)
            continue
        if size > max_atoms:
            entry.update(virtual=True, reason="max-atoms", support_size=size)
            out.append(entry)
            continue
        m = h.at(n)
        entry.update(measure_to_json(m, h.domain))
        entry["norm"] = str(m.norm())
        entry["support_size"] = len(m)
        out.append(entry)
    return out


def handle_to_json(h: SequenceHandle, horizon: int, pipeline: list[dict] | None = None,
                   max_atoms: int = DEFAULT_MAX_ATOMS, extra: dict | None = None) -> dict:
    data = {
        "format": HANDLE_FORMAT,
        "generator": h.aux.get("generator", h.name),
        "params": jsonable(h.aux.get("generator_params", h.params)),
        "pipeline": jsonable(pipeline or []),
        "space": h.domain.id,
        "index_origin": h.index_origin,
        "horizon": horizon,
        "cap": h.cap,
        "max_atoms": max_atoms,
        "measures": handle_measures(h, horizon, max_atoms),
        "provenance": [jsonable(step.to_json(horizon), h.domain.encode) for step in h.provenance],
        "flags": jsonable(h.flags, h.domain.encode),
    }
    if extra:
        data.update(jsonable(extra))
    return data


def load_json(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)

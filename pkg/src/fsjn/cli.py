"""Command-line front end: generate, transform, verify, report and replay."""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

from . import analysis as an
from . import catalog
from .analysis import UsageError
from .concentration import bollobas_sweep
from .enumeration import VirtualMeasureError
from .handles import SequenceHandle
from .measure import cylinder_eval
from .serialize import DEFAULT_MAX_ATOMS, dumps, handle_to_json, jsonable, load_json, write_text
from .spaces import B_ALL, B_EVEN, B_SMALL, cylinder_family, family_by_name
from .transforms import TransformError

CYLINDER_FORMAT = "fsjn-cylinder/1"
CYLINDER_DEPTH = 10
SUITES = ("balance", "limit-sets", "l-mass", "decay", "product-audit", "bollobas")
B_SETS = {name: pred for name, pred in (B_ALL, B_EVEN, B_SMALL)}


class AssertionFailure(Exception):
    """A verified property failed (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:
        raise UsageError(message)


@dataclass
class RunConfig:
    horizon: int = 64
    brute_cap: int = 14
    cap: int | None = None
    tolerance: Fraction = Fraction(1, 16)
    out: str = "."
    seed: int = 0
    max_atoms: int = DEFAULT_MAX_ATOMS

    def __post_init__(self) -> None:
        if self.horizon < 1 or self.brute_cap < 1 or (self.cap is not None and self.cap < 1):
            raise UsageError("horizon and caps must be >= 1")
        if self.tolerance <= 0:
            raise UsageError("tolerance must be positive")

    def to_json(self) -> dict:
        return {"horizon": self.horizon, "brute_cap": self.brute_cap, "cap": self.cap,
                "tolerance": str(self.tolerance), "seed": self.seed, "max_atoms": self.max_atoms}


def _fraction_arg(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"not a rational number: {text!r}") from exc


def _config(args: argparse.Namespace) -> RunConfig:
    return RunConfig(horizon=args.horizon, brute_cap=args.brute_cap, cap=args.cap,
                     tolerance=_fraction_arg(args.tolerance), out=args.out, seed=args.seed,
                     max_atoms=args.max_atoms)


def _key_values(items: list[str] | None) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _out_path(cfg: RunConfig, name: str) -> str:
    os.makedirs(cfg.out, exist_ok=True)
    return os.path.join(cfg.out, name)


def _stem(path: str) -> str:
    base = os.path.basename(path)
    return base[:-5] if base.endswith(".json") else base


def _summary(h: SequenceHandle, horizon: int) -> dict:
    norms, sizes = [], []
    for n in h.indices(horizon):
        if not h.materializable(n):
            break
        try:
            m = h.at(n)
        except VirtualMeasureError:
            break
        norms.append(str(m.norm()))
        sizes.append(len(m))
    return {"norms": norms, "support_sizes": sizes}


# ---------------------------------------------------------------------------
# handle files


def _cylinder_json(seq: Any, horizon: int) -> dict:
    measures = []
    for n in range(horizon):
        c = seq.at(n)
        depth = min(n + 1, CYLINDER_DEPTH)
        words = [format(k, f"0{depth}b") for k in range(1 << depth)]
        measures.append({"n": n, "depth": depth, "declared_norm": str(c.declared_norm),
                         "values": [[w, str(cylinder_eval(c, w))] for w in words]})
    return {"format": CYLINDER_FORMAT, "generator": "rademacher", "params": {}, "pipeline": [],
            "horizon": horizon, "measures": measures}


def _load(path: str) -> tuple[Any, dict]:
    try:
        data = load_json(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not JSON: {exc}") from exc
    if data.get("format") == CYLINDER_FORMAT:
        return catalog.build_generator(data["generator"], data.get("params", {})), data
    h, _ = catalog.rebuild(data)
    return h, data


def _serialize(h: Any, horizon: int, pipeline: list[dict], max_atoms: int) -> str:
    if isinstance(h, SequenceHandle):
        return dumps(handle_to_json(h, horizon, pipeline, max_atoms))
    return dumps(_cylinder_json(h, horizon))


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(args: argparse.Namespace, cfg: RunConfig) -> dict:
    params = _key_values(args.param)
    entry = catalog.GENERATORS.get(args.name)
    if entry is None:
        raise UsageError(f"unknown generator {args.name!r}; choose from {', '.join(catalog.GENERATORS)}")
    for flag in ("alpha", "partition"):
        if getattr(args, flag) is not None:
            if flag not in entry.params:
                raise UsageError(f"--{flag} does not apply to {args.name}")
            params[flag] = getattr(args, flag)
    if cfg.cap is not None:
        if "cap" not in entry.params:
            raise UsageError(f"--cap does not apply to {args.name}")
        params["cap"] = cfg.cap
    if "brute_cap" in entry.params and args.brute_cap_set:
        params["brute_cap"] = cfg.brute_cap
    h = catalog.build_generator(args.name, params)
    path = args.output or _out_path(cfg, f"{args.name}.json")
    write_text(path, _serialize(h, cfg.horizon, [], cfg.max_atoms))
    verdict = {"command": "generate", "generator": args.name, "file": path}
    if isinstance(h, SequenceHandle):
        summary = _summary(h, min(cfg.horizon, 24))
        print(f"{args.name}: {len(list(h.indices(cfg.horizon)))} indices from {h.index_origin}")
        print("norms: " + " ".join(summary["norms"]))
        print("support sizes: " + " ".join(map(str, summary["support_sizes"])))
        verdict["all_norms_one"] = all(x == "1" for x in summary["norms"])
    return verdict


def cmd_transform(args: argparse.Namespace, cfg: RunConfig) -> dict:
    stages: list[str] = []
    source = args.input
    if args.target:
        if args.target in catalog.TRANSFORMS:
            stages.append(args.target)
        elif source is None:
            source = args.target
        else:
            raise UsageError(f"unknown transform {args.target!r}")
    if args.pipeline:
        stages.extend(s.strip() for s in args.pipeline.split(",") if s.strip())
    if source is None:
        raise UsageError("no input handle given")
    if not stages:
        raise UsageError("no transform given; use --pipeline a,b,c")
    h, data = _load(source)
    extra = _key_values(args.param)
    if args.point is not None:
        try:
            extra["point"] = json.loads(args.point)
        except json.JSONDecodeError as exc:
            raise UsageError(f"--point must be JSON: {exc}") from exc
    plan = []
    for name in stages:
        entry = catalog.TRANSFORMS.get(name)
        if entry is None:
            raise UsageError(f"unknown transform {name!r}; choose from {', '.join(catalog.TRANSFORMS)}")
        params = {k: v for k, v in extra.items() if k in entry.params}
        if "horizon" in entry.params:
            params.setdefault("horizon", cfg.horizon)
        plan.append((name, params))
    out, record = catalog.run_pipeline(h, plan)
    pipeline = list(data.get("pipeline", [])) + record
    text = _serialize(out, cfg.horizon, pipeline, cfg.max_atoms)
    path = args.output or _out_path(cfg, f"{_stem(source)}.{'+'.join(stages)}.json")
    write_text(path, text)
    summary = _summary(out, min(cfg.horizon, 30))
    print(f"{'+'.join(stages)}: wrote {path}")
    print("norms: " + " ".join(summary["norms"]))
    return {"command": "transform", "pipeline": stages, "file": path,
            "disjoint_verified": out.flags.get("disjoint_verified")}


def _write_report(cfg: RunConfig, stem: str, suite: str, report: dict, csv_text: str | None) -> list[str]:
    files = []
    path = _out_path(cfg, f"{stem}.{suite}.json")
    write_text(path, dumps(jsonable(report)))
    files.append(path)
    if csv_text is not None:
        cpath = _out_path(cfg, f"{stem}.{suite}.csv")
        write_text(cpath, csv_text)
        files.append(cpath)
    return files


def _rows_csv(header: list[str], rows: list[list[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _parse_cylinder(text: str | None) -> dict[int, int] | None:
    if text is None or text == "all":
        return None
    cyl = {}
    for part in text.split(","):
        try:
            j, s = part.split(":")
            cyl[int(j)] = 1 if s.strip() in ("+1", "1", "+") else -1 if s.strip() in ("-1", "-") else None
        except ValueError as exc:
            raise UsageError(f"cylinder entries look like 0:+1, got {part!r}") from exc
        if cyl[int(j)] is None:
            raise UsageError(f"sign must be +1 or -1 in {part!r}")
    return cyl


def _cylinder_decay(seq: Any, cfg: RunConfig) -> tuple[dict, str, bool]:
    fam = [(f.name, f.name[1:-1]) for f in cylinder_family(3)]
    rows, tail_max = [], {}
    start = cfg.horizon - max(1, -(-cfg.horizon // 4))
    bad_additivity = []
    for n in range(cfg.horizon):
        c = seq.at(n)
        for name, word in fam:
            v = cylinder_eval(c, word)
            rows.append([name, n, str(v), an.float_text(v)])
            if n >= start:
                tail_max[name] = max(tail_max.get(name, Fraction(0)), abs(v))
            if v != cylinder_eval(c, word + "0") + cylinder_eval(c, word + "1"):
                bad_additivity.append([name, n])
    ok = not bad_additivity and all(v < cfg.tolerance for v in tail_max.values())
    report = {"family": "cylinders3", "tail_max": tail_max, "additivity_failures": bad_additivity,
              "verdict": "consistent" if ok else "inconsistent"}
    return report, _rows_csv(["functional", "n", "value", "float"], rows), ok


def run_suite(suite: str, h: Any, args: argparse.Namespace, cfg: RunConfig) -> tuple[dict, str | None, bool]:
    """One verification suite; returns (report, csv text or None, passed)."""
    if suite == "bollobas":
        eps_list = [_fraction_arg(e) for e in (args.eps or "1/12,1/16,1/24").split(",")]
        rows = bollobas_sweep(eps_list, args.n_max or 2000)
        failed = [q.to_json() for q in rows if q.holds is not True]
        report = {"eps": eps_list, "n_max": args.n_max or 2000, "queries": len(rows), "failures": failed}
        table = _rows_csv(["n", "eps", "tail", "bound_lower", "holds"],
                          [[q.n, str(q.eps), str(q.tail), str(q.bound_lower), q.holds] for q in rows])
        return report, table, not failed and bool(rows)
    if suite == "product-audit":
        eps = _fraction_arg(args.eps or "1/12")
        n_max = args.n_max or cfg.brute_cap
        b_name = args.b_set or "all"
        if b_name not in B_SETS:
            raise UsageError(f"unknown B set {b_name!r}; choose from {', '.join(B_SETS)}")
        cyl = _parse_cylinder(args.a_cylinder or "0:+1")
        thr = _fraction_arg(args.i1_threshold) if args.i1_threshold else None
        audit = an.product_proof_audit(cyl, B_SETS[b_name], eps, range(1, n_max + 1), cfg.brute_cap, thr)
        report = audit.to_json()
        ok = audit.passed
        if args.rectangles:
            rn = min(n_max, cfg.brute_cap)
            sweep_fail = []
            for r_i, rect in enumerate(an.random_rectangles(cfg.seed, args.rectangles, rn)):
                sub = an.product_proof_audit(rect.a, rect.b, eps, range(1, rn + 1), cfg.brute_cap, thr)
                sweep_fail.extend([r_i, row.n] for row in sub.rows if not row.dagger_ok)
            report["random_rectangles"] = {"count": args.rectangles, "seed": cfg.seed, "n_max": rn,
                                           "dagger_failures": sweep_fail}
            ok = ok and not sweep_fail
        table = _rows_csv(["n", "b", "case", "value", "dagger_bound", "ok"],
                          [[r.n, r.b, r.case, str(r.value), str(r.dagger_bound), r.ok] for r in audit.rows])
        return report, table, ok
    if h is None:
        raise UsageError(f"suite {suite} needs a handle file")
    if not isinstance(h, SequenceHandle):
        if suite != "decay":
            raise UsageError(f"suite {suite} does not apply to cylinder measures")
        return _cylinder_decay(h, cfg)
    if suite == "balance":
        rep = an.balance_check(h, cfg.horizon, cfg.tolerance)
        table = _rows_csv(["n", "positive", "deviation", "envelope"],
                          [[r.n, str(r.positive), str(r.deviation), "" if r.envelope is None else str(r.envelope)]
                           for r in rep.rows])
        return rep.to_json(), table, rep.passed
    if suite == "limit-sets":
        rep = an.limit_sets(h, cfg.horizon, cfg.tolerance)
        return rep.to_json(h.domain.encode), None, rep.nested()
    if suite == "l-mass":
        rep = an.l_mass_sum(h)
        return rep.to_json(), None, rep.passed
    if suite == "decay":
        try:
            fam = family_by_name(args.family or "canonical", h.domain.id)
        except KeyError as exc:
            raise UsageError(str(exc)) from exc
        rep = an.decay_report(h, fam, cfg.horizon, cfg.tolerance)
        return rep.to_json(), rep.to_csv(), rep.consistent
    raise UsageError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")


def cmd_verify(args: argparse.Namespace, cfg: RunConfig) -> dict:
    if args.suite not in SUITES:
        raise UsageError(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}")
    source = args.handle or args.input
    h = None
    stem = args.suite
    if source is not None:
        h, _ = _load(source)
        stem = _stem(source)
    report, table, ok = run_suite(args.suite, h, args, cfg)
    report = {"suite": args.suite, "config": cfg.to_json(), "passed": ok, "report": report}
    files = _write_report(cfg, stem, args.suite, report, table)
    verdict = {"command": "verify", "suite": args.suite, "passed": ok, "files": files}
    if not ok:
        raise AssertionFailure(verdict)
    return verdict


def cmd_report(args: argparse.Namespace, cfg: RunConfig) -> dict:
    source = args.handle or args.input
    if source is None:
        raise UsageError("report needs a handle file")
    h, _ = _load(source)
    suites = ["decay"] if not isinstance(h, SequenceHandle) else ["balance", "limit-sets", "decay"]
    if isinstance(h, SequenceHandle) and h.oracle is not None:
        suites.insert(2, "l-mass")
    results, files, all_ok = {}, [], True
    for suite in suites:
        report, table, ok = run_suite(suite, h, args, cfg)
        results[suite] = {"passed": ok, "report": report}
        all_ok = all_ok and ok
        if table is not None:
            files.append(_out_path(cfg, f"{_stem(source)}.{suite}.csv"))
            write_text(files[-1], table)
    path = _out_path(cfg, f"{_stem(source)}.report.json")
    write_text(path, dumps(jsonable({"config": cfg.to_json(), "suites": results, "passed": all_ok})))
    files.insert(0, path)
    for suite in suites:
        print(f"{suite}: {'pass' if results[suite]['passed'] else 'FAIL'}")
    verdict = {"command": "report", "passed": all_ok, "suites": {s: results[s]["passed"] for s in suites},
               "files": files}
    if not all_ok:
        raise AssertionFailure(verdict)
    return verdict


def cmd_replay(args: argparse.Namespace, cfg: RunConfig) -> dict:
    source = args.handle or args.input
    if source is None:
        raise UsageError("replay needs a handle file")
    h, data = _load(source)
    horizon = data.get("horizon", cfg.horizon)
    text = _serialize(h, horizon, data.get("pipeline", []), data.get("max_atoms", cfg.max_atoms))
    path = args.output or _out_path(cfg, f"{_stem(source)}.replay.json")
    write_text(path, text)
    with open(source, encoding="utf-8") as fh:
        identical = fh.read() == text
    verdict = {"command": "replay", "file": path, "identical": identical}
    if not identical:
        raise AssertionFailure(verdict)
    return verdict


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--horizon", type=int, default=64, help="number of indices to emit or check")
    common.add_argument("--cap", type=int, default=None, help="materialization cap")
    common.add_argument("--brute-cap", type=int, default=None, help="brute-force cross-check cap (default 14)")
    common.add_argument("--tolerance", default="1/16", help="tolerance for estimated checks, p/q")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--output", default=None, help="explicit output file")
    common.add_argument("--max-atoms", type=int, default=DEFAULT_MAX_ATOMS,
                        help="measures with more atoms are written as virtual entries")
    common.add_argument("--input", default=None, help="input handle file")

    parser = _Parser(prog="fsjn", description="Finitely supported weak* null sequences of signed measures.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("generate", parents=[common], help="build a named sequence and write a handle file")
    g.add_argument("name")
    g.add_argument("--alpha", default=None)
    g.add_argument("--partition", default=None)
    g.add_argument("--param", action="append", help="extra generator parameter key=value")

    t = sub.add_parser("transform", parents=[common], help="apply transforms to a handle file")
    t.add_argument("target", nargs="?", help="handle file, or a transform name with --input")
    t.add_argument("--pipeline", default=None, help="comma-separated transform names")
    t.add_argument("--param", action="append", help="transform parameter key=value")
    t.add_argument("--point", default=None, help="JSON point encoding for concentrate")

    for name, helptext in (("verify", "run one verification suite"), ("report", "run every applicable suite"),
                           ("replay", "rebuild a handle file and compare bytes")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("handle", nargs="?")
        if name != "replay":
            p.add_argument("--family", default=None, help="test family name")
            p.add_argument("--eps", default=None, help="eps, or a comma list for bollobas")
            p.add_argument("--n-max", type=int, default=None)
            p.add_argument("--a-cylinder", default=None, help="product audit cylinder such as 0:+1,1:-1")
            p.add_argument("--b-set", default=None, help="product audit B set: all, even, i<3")
            p.add_argument("--i1-threshold", default=None, help="override the b threshold between cases")
            p.add_argument("--rectangles", type=int, default=0, help="seeded random rectangles for the (dagger) sweep")
        if name == "verify":
            p.add_argument("--suite", required=True)
    return parser


COMMANDS = {"generate": cmd_generate, "transform": cmd_transform, "verify": cmd_verify,
            "report": cmd_report, "replay": cmd_replay}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required: " + ", ".join(COMMANDS))
        args.brute_cap_set = args.brute_cap is not None
        if args.brute_cap is None:
            args.brute_cap = 14
        cfg = _config(args)
        verdict = COMMANDS[args.command](args, cfg)
        verdict["status"] = "ok"
        code = 0
    except UsageError as exc:
        print(f"fsjn: error: {exc}", file=sys.stderr)
        verdict, code = {"status": "usage-error", "message": str(exc)}, 2
    except (AssertionFailure, TransformError) as exc:
        detail = exc.args[0] if exc.args else str(exc)
        if isinstance(exc, TransformError):
            print(f"fsjn: certificate failure: {exc}", file=sys.stderr)
            detail = {"message": str(exc)}
        verdict, code = dict(detail, status="fail"), 1
    print(json.dumps(jsonable(verdict), sort_keys=True, separators=(",", ":")))
    return code


if __name__ == "__main__":
    sys.exit(main())

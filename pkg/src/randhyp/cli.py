"""Command-line entry point: ``randhyp <subcommand> ...``.

Exit status is 0 on success, 2 for invalid input and 3 when a size cap or
search budget runs out.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from .core import CapExceeded, PiecewiseDensity, RandHypError, ValidationError
from .dense_construct import (
    MixtureConstruction,
    match_moment_density,
    match_quantile_density,
    match_variance_density,
    numeric_check_mixture,
)
from .engine import run_randomization_test
from .finite_null import NullSpec, decide_randomization_hypothesis, ledger_to_csv
from .groups import derive_seed, group_from_json, group_to_json
from .linear_classify import DEFAULT_ZERO_TOL, classification_report
from .mc_harness import COLUMNS, gaussian_rotation_demo, rows_to_csv, size_study

EXIT_OK, EXIT_INVALID, EXIT_CAP = 0, 2, 3


def _read_text(src: str) -> str:
    if src == "-":
        return sys.stdin.read()
    return Path(src).read_text()


def _load_json(src: str):
    """Inline JSON, or a path to a JSON file."""
    text = src.strip()
    if text[:1] in "[{":
        return json.loads(text)
    return json.loads(_read_text(src))


def read_sample(src: str) -> list[float]:
    """One value per line; blank lines and ``#`` comments are skipped."""
    values = []
    for row in csv.reader(io.StringIO(_read_text(src))):
        if not row or not row[0].strip() or row[0].lstrip().startswith("#"):
            continue
        values.extend(float(v) for v in row if v.strip())
    return values


def _group_arg(src: str):
    text = src.strip()
    if text[:1] in "[{" or Path(text).is_file():
        obj = _load_json(text)
        if "kind" not in obj and "group" in obj:
            obj = obj["group"]
        return obj
    return {"kind": text}


def _emit(payload, args, csv_text: str | None = None) -> None:
    if args.output == "csv":
        if csv_text is None:
            raise ValidationError("this subcommand has no CSV form; use --output json")
        text = csv_text
    else:
        text = json.dumps(payload, indent=2, default=float) + "\n"
    if getattr(args, "out", None):
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_test(args) -> int:
    sample = read_sample(args.sample)
    gobj = _group_arg(args.group)
    group = group_from_json(gobj, n=len(sample), seed=derive_seed(args.seed, "group"))
    d = run_randomization_test(sample, group, args.statistic, args.level, cap=args.cap)
    payload = d.to_json()
    payload["group"] = group_to_json(group)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    fields = list(d.to_json())
    w.writerow(fields)
    w.writerow([payload[f] for f in fields])
    _emit(payload, args, buf.getvalue())
    return EXIT_OK


def cmd_check_null(args) -> int:
    obj = _load_json(args.spec)
    if "null" in obj:
        obj = obj["null"]
    spec = NullSpec.from_json(obj)
    verdict = decide_randomization_hypothesis(spec, args.n, args.budget, derive_seed(args.seed, "check-null"))
    payload = verdict.to_json()
    payload["null"] = spec.to_json()
    payload["n"] = args.n
    ledger_csv = ledger_to_csv(verdict.ledger, spec.alphabet)
    if args.ledger:
        Path(args.ledger).write_text(ledger_csv)
    _emit(payload, args, ledger_csv)
    if verdict.budget_exhausted:
        return EXIT_CAP
    return EXIT_OK


def _read_matrices(src: str) -> list[np.ndarray]:
    text = src.strip()
    if text[:1] in "[{" or text.endswith(".json") or text == "-":
        obj = _load_json(text)
        if isinstance(obj, dict):
            obj = obj.get("matrices", obj.get("generators"))
        arr = [np.asarray(m, dtype=float) for m in obj]
        if arr and arr[0].ndim == 1:  # a single matrix given as rows
            arr = [np.asarray(obj, dtype=float)]
        return arr
    rows = [[float(v) for v in r] for r in csv.reader(io.StringIO(_read_text(src))) if r]
    return [np.asarray(rows)]


def cmd_classify(args) -> int:
    mats = _read_matrices(args.matrices)
    if not mats:
        raise ValidationError("no matrices given")
    report = classification_report(mats, args.zero_tol)
    payload = report.to_json()
    payload["matrices"] = [m.tolist() for m in mats]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["generator", "label"])
    for i, lab in enumerate(report.labels):
        w.writerow([i, lab.value])
    w.writerow(["meet", report.meet.value])
    _emit(payload, args, buf.getvalue())
    return EXIT_OK


def _construct(obj: dict) -> MixtureConstruction:
    if "construction" in obj:
        obj = obj["construction"]
    base = PiecewiseDensity.from_json(obj["base"])
    target = obj["target"]
    support = tuple(obj["support"]) if obj.get("support") else None
    kind = target.get("kind")
    if kind == "moment":
        return match_moment_density(base, target["t"], target["beta"], support)
    if kind == "quantile":
        return match_quantile_density(base, target["q"], target.get("prob", target.get("p")), support)
    if kind == "variance":
        if support is not None:
            raise ValidationError("the variance builder works on the real line only")
        return match_variance_density(base, target["beta"])
    raise ValidationError(f"unknown target kind {kind!r}")


def cmd_construct(args) -> int:
    try:
        c = _construct(_load_json(args.spec))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed construction spec: {exc}") from None
    check = numeric_check_mixture(c)
    payload = {"construction": c.to_json(), "check": check.to_json()}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lo", "hi", "height", "part"])
    for (a, b), h in zip(c.mixture.intervals, c.mixture.heights):
        part = "base" if (a, b) in c.base.intervals else "complement"
        w.writerow([repr(a), repr(b), repr(h), part])
    _emit(payload, args, buf.getvalue())
    return EXIT_OK


def cmd_simulate(args) -> int:
    seed = derive_seed(args.seed, "simulate")
    if args.demo == "gaussian-rotation":
        n = args.n[0] if args.n else 9
        report = gaussian_rotation_demo(n, args.reps, seed, args.level[0] if args.level else 0.05)
        rows = [{"dgp": dgp, "n": n, "level": est["level"], "reps": est["reps"], "rate": est["rate"],
                 "se": est["se"], "ci_lo": est["ci_lo"], "ci_hi": est["ci_hi"], "seed": args.seed}
                for dgp, est in (("normal_3_4", report["gaussian"]), ("uniform", report["uniform"]))]
        _emit(report, args, rows_to_csv(rows))
        return EXIT_OK
    gobj = _group_arg(args.group)
    rows = size_study(args.dgp or ["normal"], args.n or [10], args.level or [0.05], gobj,
                      args.statistic, args.reps, seed, workers=args.workers)
    for r in rows:
        r["seed"] = args.seed
    _emit({"columns": list(COLUMNS), "rows": rows}, args, rows_to_csv(rows))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="randhyp", description="Randomization tests and invariance checks.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, default_output="json"):
        sp.add_argument("--output", choices=("json", "csv"), default=default_output)
        sp.add_argument("--out", help="write to this file instead of stdout")
        sp.add_argument("--seed", type=int, default=0)

    t = sub.add_parser("test", help="run the randomization test on one sample")
    t.add_argument("--sample", required=True, help="CSV file, one value per line ('-' for stdin)")
    t.add_argument("--group", default="sign_change", help="group kind or group JSON (inline or file)")
    t.add_argument("--statistic", default="abs_mean")
    t.add_argument("--level", type=float, default=0.05)
    t.add_argument("--cap", type=int, default=10**6)
    common(t)
    t.set_defaults(func=cmd_test)

    c = sub.add_parser("check-null", help="decide the randomization hypothesis for a finite-support null")
    c.add_argument("--spec", required=True, help="null spec JSON (inline or file)")
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--budget", type=int, default=100_000)
    c.add_argument("--ledger", help="also write the counterexample ledger CSV here")
    common(c)
    c.set_defaults(func=cmd_check_null)

    k = sub.add_parser("classify", help="classify linear generators")
    k.add_argument("--matrices", required=True, help="JSON list of matrices (rows) or a CSV matrix")
    k.add_argument("--zero-tol", type=float, default=DEFAULT_ZERO_TOL)
    common(k)
    k.set_defaults(func=cmd_classify)

    d = sub.add_parser("construct-density", help="build a target-matching mixture density")
    d.add_argument("--spec", required=True, help="JSON with base, target and optional support")
    common(d)
    d.set_defaults(func=cmd_construct)

    s = sub.add_parser("simulate", help="Monte Carlo size study")
    s.add_argument("--dgp", action="append")
    s.add_argument("--n", type=int, action="append")
    s.add_argument("--level", type=float, action="append")
    s.add_argument("--group", default="sign_change")
    s.add_argument("--statistic", default="abs_mean")
    s.add_argument("--reps", type=int, default=10_000)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--demo", choices=("gaussian-rotation",))
    common(s, default_output="csv")
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CapExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (ValidationError, ValueError, OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except RandHypError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    raise SystemExit(main())

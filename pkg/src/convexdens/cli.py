"""Command line interface: ``fit``, ``verify``, ``simulate``, ``sharpness``.

Exit codes: 0 success, 1 a check failed, 2 bad input or usage. Errors are
reported on stderr as one line ``error: CODE: message``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import __version__
from .cone import FitConfig, FitResult, fit, lse_objective, mle_objective
from .core import TriangularMix, validate_sample
from .errors import ConvexDensError
from .grenander import grenander_fit
from .harness import ExperimentConfig, format_number, rows_to_csv, run_monte_carlo
from .models import parse_model
from .verification import (
    check_lse_characterization,
    check_mle_characterization,
    check_prop1,
    lemma1_conclusion_check,
    sharpness_fixture,
    theorem1_margins,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    code = "UsageError"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def read_values(path: str) -> list:
    """One number per line; blank lines and ``#`` comments are ignored."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            try:
                out.append(float(text))
            except ValueError:
                raise UsageError(f"{path}:{lineno}: not a number: {text!r}") from None
    return out


def dumps(obj) -> str:
    """JSON with floats at 17 significant digits."""
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(k)}: {dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            return json.dumps(str(obj))
        return "%.17g" % obj
    if obj is None:
        return "null"
    return json.dumps(obj)


def fit_to_dict(res, n: int) -> dict:
    if isinstance(res, FitResult):
        return {
            "estimator": res.estimator,
            "n": n,
            "knots": res.mix.knots.tolist(),
            "coefficients": res.mix.coefs.tolist(),
            "mass": res.mix.mass,
            "objective": res.objective,
            "residual": res.final_residual,
            "iterations": res.iterations,
            "tol": res.tol,
            "warnings": list(res.warnings),
        }
    return {
        "estimator": "grenander",
        "n": n,
        "knots": res.breakpoints.tolist(),
        "heights": res.heights.tolist(),
        "mass": res.mass,
        "objective": None,
        "residual": None,
        "iterations": 0,
        "tol": None,
    }


def mix_from_dict(d: dict) -> TriangularMix:
    if "coefficients" not in d:
        raise UsageError("fit file has no coefficients (only ml/ls fits can be verified)")
    return TriangularMix(np.asarray(d["knots"], dtype=float), np.asarray(d["coefficients"], dtype=float))


def _write(text: str, path: str | None):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)


def _fit_config(args) -> FitConfig:
    return FitConfig(tol_cert=args.tol) if getattr(args, "tol", None) is not None else FitConfig()


def cmd_fit(args) -> int:
    s = validate_sample(read_values(args.input))
    res = grenander_fit(s) if args.estimator == "grenander" else fit(args.estimator, s, _fit_config(args))
    _write(dumps(fit_to_dict(res, s.n)) + "\n", args.output)
    return EXIT_OK


def cmd_verify(args) -> int:
    s = validate_sample(read_values(args.input))
    if args.fit:
        with open(args.fit, encoding="utf-8") as fh:
            stored = json.load(fh)
        est = stored.get("estimator", args.estimator)
        if est != args.estimator:
            raise UsageError(f"fit file holds a {est} fit, not {args.estimator}")
        h = mix_from_dict(stored)
        objective = lse_objective(h, s) if est == "ls" else mle_objective(h, s)
    else:
        res = fit(args.estimator, s, _fit_config(args))
        h, objective = res.mix, res.objective
    check = check_lse_characterization if args.estimator == "ls" else check_mle_characterization
    report = check_prop1(h, s).extend(check(h, s))
    if args.model:
        model = parse_model(args.model)
        other = fit("ml" if args.estimator == "ls" else "ls", s, _fit_config(args)).mix
        pair = (h, other) if args.estimator == "ml" else (other, h)
        report.extend(theorem1_margins(pair[0], pair[1], s, model))
    out = {
        "estimator": args.estimator,
        "n": s.n,
        "objective": objective,
        "passed": report.passed,
        "checks": [c.to_dict() for c in report.checks],
    }
    _write(dumps(out) + "\n", args.output)
    for line in report.lines():
        print(line, file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_FAIL


def _int_list(text: str) -> tuple:
    try:
        vals = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise UsageError(f"bad integer list {text!r}") from None
    if not vals:
        raise UsageError("empty list")
    return vals


def _float_list(text: str) -> tuple:
    try:
        vals = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise UsageError(f"bad number list {text!r}") from None
    if not vals:
        raise UsageError("empty list")
    return vals


def cmd_simulate(args) -> int:
    parse_model(args.family)
    ests = tuple(e.strip() for e in args.estimators.split(",") if e.strip())
    cfg = ExperimentConfig(
        family=args.family,
        sizes=_int_list(args.sizes),
        reps=args.reps,
        base_seed=args.seed,
        estimators=ests,
        fit_config=_fit_config(args),
        workers=args.workers,
    )
    rows, summary = run_monte_carlo(cfg)
    _write(rows_to_csv(rows), args.out)
    print(dumps(summary), file=sys.stderr)
    bad = summary["errors"] + sum(v for k, v in summary.items() if k.startswith(("violations_", "failed_")))
    return EXIT_OK if bad == 0 else EXIT_FAIL


SHARPNESS_COLUMNS = ["c", "eps", "sup_est_minus_model", "sup_emp_minus_model", "emp_minus_model_at_1", "bound", "gap", "eps_squared", "exact"]


def cmd_sharpness(args) -> int:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SHARPNESS_COLUMNS)
    all_ok = True
    for c in _float_list(args.c):
        for eps in _float_list(args.eps):
            sc, closed = sharpness_fixture(c, eps)
            rep = lemma1_conclusion_check(sc, "sup")
            est, emp, anchor = rep.extra["est"], rep.extra["emp"], rep.extra["anchor"]
            gap = rep.extra["bound"] - est.sup
            ok = (
                abs(gap - eps**2) <= 1e-12
                and abs(est.sup - closed.sup_est_minus_model) <= 1e-12
                and abs(emp.sup - closed.sup_emp_minus_model) <= 1e-12
                and abs(anchor - closed.emp_minus_model_at_b) <= 1e-12
            )
            all_ok &= ok
            w.writerow([format_number(x) for x in (c, eps, est.sup, emp.sup, anchor, rep.extra["bound"], gap, eps**2, int(ok))])
    _write(buf.getvalue(), args.out)
    return EXIT_OK if all_ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="convexdens", description="Shape-constrained density fits with pathwise checks.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", help="fit an estimator and write JSON")
    f.add_argument("--estimator", choices=["ml", "ls", "grenander"], required=True)
    f.add_argument("--input", required=True)
    f.add_argument("--tol", type=float)
    f.add_argument("--output")
    f.set_defaults(func=cmd_fit)

    v = sub.add_parser("verify", help="fit (or load a fit) and run all checks")
    v.add_argument("--estimator", choices=["ml", "ls"], required=True)
    v.add_argument("--input", required=True)
    v.add_argument("--model")
    v.add_argument("--fit", help="verify a stored fit JSON instead of refitting")
    v.add_argument("--tol", type=float)
    v.add_argument("--output")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("simulate", help="Monte Carlo experiment to CSV")
    s.add_argument("--family", required=True)
    s.add_argument("--sizes", default="10,50,200")
    s.add_argument("--reps", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.add_argument("--estimators", default="ml,ls,grenander")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--tol", type=float)
    s.set_defaults(func=cmd_simulate)

    h = sub.add_parser("sharpness", help="sweep the extremal configuration")
    h.add_argument("--c", required=True)
    h.add_argument("--eps", required=True)
    h.add_argument("--out")
    h.set_defaults(func=cmd_sharpness)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except (UsageError, ConvexDensError, ValueError, OSError) as exc:
        code = getattr(exc, "code", None) or type(exc).__name__
        msg = str(exc).replace("\n", " ")
        print(f"error: {code}: {msg}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

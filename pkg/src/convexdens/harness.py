"""Deterministic sampling and the Monte Carlo experiment runner.

Uniforms come from numpy's Philox generator, a counter-based 64-bit
bijection, keyed by ``SeedSequence(base_seed, spawn_key=(size_index, rep))``.
Each 64-bit draw ``k`` is mapped to ``(floor(k / 2^11) + 0.5) * 2^-53`` so
uniforms sit strictly inside (0, 1), and samples are produced by the exact
inverse CDF of the model.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cone import FitConfig, fit
from .core import Sample, validate_sample
from .errors import ConvexDensError, NonConcaveModel
from .extrema import Extrema
from .grenander import MARSHALL_SLACK, grenander_fit
from .models import TrueModel, parse_model
from .verification import (
    check_lse_characterization,
    check_mle_characterization,
    check_prop1,
    sup_inf_difference,
    theorem1_margins,
)

ESTIMATORS = ("ml", "ls", "grenander")


def uniforms(seed, n: int) -> np.ndarray:
    """``n`` uniforms on (0, 1) from the Philox stream keyed by ``seed``.

    ``seed`` is an int or a :class:`numpy.random.SeedSequence`.
    """
    bits = np.random.Generator(np.random.Philox(seed)).integers(0, 2**64, size=n, dtype=np.uint64, endpoint=False)
    return ((bits >> np.uint64(11)).astype(float) + 0.5) * 2.0**-53


def sample_model(model: TrueModel, n: int, seed) -> Sample:
    """Sorted sample of size ``n`` drawn by inverse CDF."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return validate_sample(model.ppf(uniforms(seed, n)))


def replication_seed(base_seed: int, size_index: int, rep: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(base_seed, spawn_key=(size_index, rep))


@dataclass(frozen=True)
class ExperimentConfig:
    family: str
    sizes: tuple = (10, 50, 200)
    reps: int = 200
    base_seed: int = 0
    estimators: tuple = ESTIMATORS
    fit_config: FitConfig = field(default_factory=FitConfig)
    workers: int = 1

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if not self.sizes or min(self.sizes) < 1:
            raise ValueError("sizes must be >= 1")
        bad = set(self.estimators) - set(ESTIMATORS)
        if bad:
            raise ValueError(f"unknown estimators {sorted(bad)}")

    @property
    def model(self) -> TrueModel:
        return parse_model(self.family)


COLUMNS = [
    "n",
    "rep",
    "family",
    "seed",
    "emp_sup",
    "emp_inf",
    "ml_sup",
    "ml_inf",
    "ls_sup",
    "ls_inf",
    "gren_sup",
    "gren_inf",
    "margin_ml_inf",
    "margin_ls_inf",
    "margin_ls_sup",
    "margin_ls_norm",
    "margin_marshall",
    "ml_char_ok",
    "ls_char_ok",
    "ml_prop1_ok",
    "ls_prop1_ok",
    "theorem_ok",
    "marshall_ok",
    "ml_iterations",
    "ls_iterations",
    "ml_residual",
    "ls_residual",
    "error",
]


@dataclass
class ExperimentRow:
    n: int
    rep: int
    family: str
    seed: str
    values: dict = field(default_factory=dict)
    error: str = ""

    def get(self, key, default=math.nan):
        return self.values.get(key, default)

    def as_record(self) -> dict:
        rec = {"n": self.n, "rep": self.rep, "family": self.family, "seed": self.seed, "error": self.error}
        for c in COLUMNS:
            if c not in rec:
                rec[c] = self.values.get(c, "")
        return rec


def _seed_label(base_seed, size_index, rep) -> str:
    return f"{base_seed}:{size_index}:{rep}"


def run_replication(cfg: ExperimentConfig, size_index: int, rep: int) -> ExperimentRow:
    """One (size, replication) cell; errors become tagged rows."""
    n = cfg.sizes[size_index]
    model = cfg.model
    row = ExperimentRow(n, rep, model.spec, _seed_label(cfg.base_seed, size_index, rep))
    v = row.values
    try:
        s = sample_model(model, n, replication_seed(cfg.base_seed, size_index, rep))
        emp = sup_inf_difference(s, model)
        v.update(emp_sup=emp.sup, emp_inf=emp.inf)
        fits = {}
        for est in ("ml", "ls"):
            if est not in cfg.estimators:
                continue
            res = fit(est, s, cfg.fit_config)
            fits[est] = res
            ext: Extrema = sup_inf_difference(res, model)
            check = check_mle_characterization if est == "ml" else check_lse_characterization
            v.update(
                {
                    f"{est}_sup": ext.sup,
                    f"{est}_inf": ext.inf,
                    f"{est}_char_ok": int(check(res, s).passed),
                    f"{est}_prop1_ok": int(check_prop1(res, s).passed),
                    f"{est}_iterations": res.iterations,
                    f"{est}_residual": res.final_residual,
                }
            )
        if fits:
            rep_t = theorem1_margins(fits.get("ml"), fits.get("ls"), s, model)
            for name, key in [
                ("mle_inf_bound", "margin_ml_inf"),
                ("lse_inf_bound", "margin_ls_inf"),
                ("lse_sup_bound", "margin_ls_sup"),
                ("lse_norm_bound", "margin_ls_norm"),
            ]:
                try:
                    v[key] = rep_t[name].margin
                except KeyError:
                    pass
            v["theorem_ok"] = int(rep_t.passed)
        if "grenander" in cfg.estimators:
            if not model.density_nonincreasing:
                raise NonConcaveModel(f"{model.spec} has no concave CDF")
            # same quantities as marshall_check, reusing the extrema already computed
            gext = sup_inf_difference(grenander_fit(s), model)
            margin = emp.norm - gext.norm
            v.update(
                gren_sup=gext.sup,
                gren_inf=gext.inf,
                margin_marshall=margin,
                marshall_ok=int(margin >= -MARSHALL_SLACK),
            )
    except (ConvexDensError, ValueError, np.linalg.LinAlgError) as exc:
        row.error = f"{type(exc).__name__}: {exc}"
    return row


def _run_cell(args):
    return run_replication(*args)


def run_monte_carlo(cfg: ExperimentConfig):
    """All (size, replication) rows sorted by ``(n, rep)`` plus a summary."""
    tasks = [(cfg, i, r) for i in range(len(cfg.sizes)) for r in range(cfg.reps)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(_run_cell, tasks, chunksize=max(1, len(tasks) // (8 * cfg.workers))))
    else:
        rows = [_run_cell(t) for t in tasks]
    rows.sort(key=lambda r: (r.n, r.rep, r.seed))
    return rows, summarize(rows)


def summarize(rows) -> dict:
    """Violation counts per inequality and quantiles of the norm ratios."""
    out = {"rows": len(rows), "errors": sum(bool(r.error) for r in rows)}
    for key in ("margin_ml_inf", "margin_ls_inf", "margin_ls_sup", "margin_ls_norm"):
        m = np.array([r.get(key) for r in rows], dtype=float)
        m = m[np.isfinite(m)]
        out[f"violations_{key[7:]}"] = int(np.sum(m < -1e-8))
    m = np.array([r.get("margin_marshall") for r in rows], dtype=float)
    out["violations_marshall"] = int(np.sum(m[np.isfinite(m)] < -1e-12))
    for flag in ("ml_char_ok", "ls_char_ok", "ml_prop1_ok", "ls_prop1_ok"):
        f = [r.get(flag, None) for r in rows]
        out[f"failed_{flag[:-3]}"] = sum(1 for x in f if x == 0)
    for est, key in (("ml", "ml"), ("ls", "ls"), ("grenander", "gren")):
        ratios = []
        for r in rows:
            emp = max(r.get("emp_sup"), -r.get("emp_inf"))
            est_norm = max(r.get(f"{key}_sup"), -r.get(f"{key}_inf"))
            if np.isfinite(emp) and np.isfinite(est_norm) and emp > 0:
                ratios.append(est_norm / emp)
        if ratios:
            q = np.quantile(ratios, [0.0, 0.5, 0.9, 0.99, 1.0])
            out[f"ratio_{est}"] = dict(zip(("min", "median", "q90", "q99", "max"), map(float, q)))
    return out


def format_number(x) -> str:
    """17 significant digits, integers verbatim, empty for missing values."""
    if x is None or x == "":
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float) and math.isnan(x):
        return ""
    return "%.17g" % x


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        rec = r.as_record()
        w.writerow([rec[c] if isinstance(rec[c], str) else format_number(rec[c]) for c in COLUMNS])
    return buf.getvalue()


def write_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(rows_to_csv(rows))

"""Simulation grid, theorem check and real-data workflows behind the CLI.

Every replication draws its random numbers from a ``SeedSequence`` keyed
by ``(seed, scenario index, replication index)``, so results do not depend
on how replications are spread over worker processes.
"""

import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import arma
from .aggtheory import optimal_G_theoretical
from .errors import FrequencyMismatch, TemporalReconError
from .evaluate import STATISTICS, EvalReport, evaluate_method, fit_hierarchy, level_specs
from .hierarchy import TemporalHierarchy, build_hierarchy_series, build_summing_matrix
from .reconcile import CovSpec, estimate_W, method_label, mint_G, parse_method

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = (
    "scenario", "n_top", "phi", "draw", "sigma2", "ks", "h", "mode",
    "method", "level", "statistic", "mean", "se", "median", "n", "n_unavailable",
)
RAW_COLUMNS = (
    "scenario", "replication", "n_top", "phi", "draw", "sigma2", "ks", "h", "mode",
    "method", "level", "statistic", "value", "reason",
)
_GROUP_KEYS = ("scenario", "n_top", "phi", "draw", "sigma2", "ks", "h", "mode", "method", "level", "statistic")

# key offset keeping draw streams apart from replication streams
_DRAW_STREAM = 2**31


def ks_label(ks):
    return "-".join(str(k) for k in ks)


@dataclass(frozen=True)
class Scenario:
    index: int
    n_top: int
    phi: float
    draw: int
    sigma2: float
    ks: tuple
    h: int
    mode: str


def expand_grid(cfg):
    """All scenarios of a config, in a fixed order."""
    processes = (
        [(phi, None) for phi in cfg.phi]
        if cfg.phi is not None
        else [(None, d) for d in range(cfg.arma_draw.draws)]
    )
    out = []
    for n_top, (phi, draw), sigma2, ks, h in itertools.product(
        cfg.n_top, processes, cfg.sigma2, cfg.ks, cfg.h
    ):
        out.append(Scenario(len(out), n_top, phi, draw, sigma2, tuple(ks), h, cfg.mode))
    return out


def n_replications(cfg):
    return cfg.arma_draw.series_per_draw if cfg.arma_draw is not None else cfg.replications


def bottom_model(cfg, sc):
    """Generating process of a scenario and the order it implies for the bottom level."""
    if sc.phi is not None:
        return arma.ArmaModel(phi=[sc.phi], theta=[], sigma2=sc.sigma2), arma.ArmaSpec(1, 0, 0)
    p, q = cfg.arma_draw.p, cfg.arma_draw.q
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(_DRAW_STREAM, sc.draw)))
    drawn = arma.draw_stationary(p, q, rng)
    model = arma.ArmaModel(phi=drawn.phi, theta=drawn.theta, sigma2=sc.sigma2)
    return model, arma.ArmaSpec(p, 0, q)


def run_replication(cfg, sc, rep, allow_pinv=False):
    """Raw result rows of one replication of one scenario."""
    base = {
        "scenario": sc.index, "replication": rep, "n_top": sc.n_top, "phi": sc.phi,
        "draw": sc.draw, "sigma2": sc.sigma2, "ks": ks_label(sc.ks), "h": sc.h, "mode": sc.mode,
    }
    methods = [parse_method(m) for m in cfg.methods]
    hier = TemporalHierarchy(sc.ks)
    rows = []
    try:
        model, bottom_spec = bottom_model(cfg, sc)
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(sc.index, rep)))
        y = arma.simulate(model, sc.n_top * hier.m, seed=rng)
        hs = build_hierarchy_series(y, hier)
        if sc.mode == "auto":
            select = (cfg.auto.max_p, cfg.auto.max_q, cfg.auto.d)
            fitted = fit_hierarchy(hs, None, h=sc.h, train_frac=cfg.train_frac, select=select)
        else:
            fitted = fit_hierarchy(hs, level_specs(bottom_spec, hier), h=sc.h, train_frac=cfg.train_frac)
        reports = [evaluate_method(fitted, m, allow_pinv=allow_pinv) for m in methods]
    except TemporalReconError as exc:
        reason = f"{type(exc).__name__}: {exc}"
        reports = [EvalReport(method_label(m), sc.ks, available=False, reason=reason) for m in methods]
    for report in reports:
        for level in EvalReport.level_names(sc.ks):
            values = report.levels.get(level, {})
            for stat in STATISTICS:
                rows.append({
                    **base, "method": report.method,
                    "level": int(level) if level.isdigit() else level, "statistic": stat,
                    "value": values.get(stat), "reason": "" if report.available else report.reason,
                })
    return rows


def _run_task(args):
    return run_replication(*args)


def run_simulation(cfg, jobs=1, allow_pinv=False):
    """Raw rows for the whole grid, ordered by scenario then replication."""
    tasks = [(cfg, sc, rep, allow_pinv) for sc in expand_grid(cfg) for rep in range(n_replications(cfg))]
    if jobs <= 1:
        results = map(_run_task, tasks)
        return [row for rows in results for row in rows]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        chunk = max(1, len(tasks) // (4 * jobs))
        return [row for rows in pool.map(_run_task, tasks, chunksize=chunk) for row in rows]


def phi_bucket(phi):
    if phi <= -0.5:
        return "[-0.9,-0.5]"
    if phi <= 0.5:
        return "(-0.5,0.5]"
    return "(0.5,0.9]"


def summarize(raw_rows, buckets=False):
    """Long-format summary over replications: mean, standard error, median, counts.

    With ``buckets`` set, AR parameters are pooled into the three buckets
    and the scenario column is left empty.
    """
    groups = {}
    for row in raw_rows:
        key = dict((k, row[k]) for k in _GROUP_KEYS)
        if buckets and row["phi"] is not None:
            key["phi"] = phi_bucket(row["phi"])
            key["scenario"] = None
        groups.setdefault(tuple(key.items()), []).append(row["value"])
    out = []
    for key, values in groups.items():
        present = np.array([v for v in values if v is not None], dtype=float)
        n = present.size
        out.append({
            **dict(key),
            "mean": float(present.mean()) if n else None,
            "se": float(present.std(ddof=1) / np.sqrt(n)) if n > 1 else None,
            "median": float(np.median(present)) if n else None,
            "n": n,
            "n_unavailable": len(values) - n,
        })
    return out


def wide_pivot(summary_rows):
    """One row per scenario, method and level with a mean column per statistic."""
    keys = [k for k in SUMMARY_COLUMNS[:10] if k != "statistic"]
    table = {}
    for row in summary_rows:
        key = tuple((k, row[k]) for k in keys)
        table.setdefault(key, dict(key))[row["statistic"]] = row["mean"]
    return list(table.values()), keys + list(STATISTICS)


def verify_theorem(phi, sigma2, k, mode="theoretical", n_reps=100, n_top=100,
                   train_frac=0.75, seed=0, allow_pinv=False):
    """Mapping ``SG`` for the ``{k, 1}`` hierarchy, as long-format rows.

    The theoretical mode uses the exact error covariance of the AR(1) model;
    the sample mode averages the FullSample mapping over simulated series
    and reports entrywise standard errors.
    """
    hier = TemporalHierarchy((k, 1))
    labels = hier.row_labels()
    if mode == "theoretical":
        _, SG = optimal_G_theoretical(phi, sigma2, k)
        return [
            {"row": labels[i], "col": labels[j], "mean": float(SG[i, j]), "std_error": None, "n": 1}
            for i in range(hier.n) for j in range(hier.n)
        ], 0
    if mode != "sample":
        raise ValueError(f"mode must be 'theoretical' or 'sample', got {mode!r}")
    S = build_summing_matrix(hier)
    specs = level_specs(arma.ArmaSpec(1, 0, 0), hier)
    model = arma.ArmaModel(phi=[phi], theta=[], sigma2=sigma2)
    full = CovSpec("full")
    mats, failed = [], 0
    for rep in range(n_reps):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep,)))
        try:
            hs = build_hierarchy_series(arma.simulate(model, n_top * k, seed=rng), hier)
            fitted = fit_hierarchy(hs, specs, h=1, train_frac=train_frac)
            W = estimate_W(fitted.train_residuals, full, S, allow_pinv=allow_pinv)
            mats.append(mint_G(S, W, allow_pinv=allow_pinv).SG)
        except TemporalReconError as exc:
            logger.warning("replication %d skipped: %s", rep, exc)
            failed += 1
    if not mats:
        raise TemporalReconError("every replication failed")
    stack = np.array(mats)
    mean = stack.mean(axis=0)
    se = stack.std(axis=0, ddof=1) / np.sqrt(len(mats)) if len(mats) > 1 else None
    rows = [
        {
            "row": labels[i], "col": labels[j], "mean": float(mean[i, j]),
            "std_error": None if se is None else float(se[i, j]), "n": len(mats),
        }
        for i in range(hier.n) for j in range(hier.n)
    ]
    return rows, failed


DATASET_COLUMNS = (
    "level", "k", "method", "available", "train_base_mse", "test_base_mse",
    "train_recon_mse", "test_recon_mse", "train_rmse", "test_rmse",
    "train_rmae", "test_rmae", "reason",
)


def dataset_hierarchy(y, spec):
    """Check the series against the hierarchy and build it."""
    hier = TemporalHierarchy(tuple(spec.ks))
    if spec.frequency is not None and spec.frequency % hier.m:
        raise FrequencyMismatch(
            f"top factor {hier.m} does not divide the series frequency {spec.frequency}"
        )
    periods = y.size // hier.m
    I_train = int(np.floor(spec.train_frac * periods))
    if periods < 2 or I_train < 2 or I_train >= periods:
        raise FrequencyMismatch(
            f"{y.size} observations give {periods} periods of {hier.m}; "
            "too few for a training/test split"
        )
    if y.size % hier.m:
        logger.info("dropping %d trailing observations of a partial period", y.size % hier.m)
    return build_hierarchy_series(y, hier)


def run_dataset(y, spec, allow_pinv=False):
    """Table-shaped rows (one per level and method) for a real series."""
    y = np.asarray(y, dtype=float)
    if spec.demean:
        y = y - y.mean()
    hs = dataset_hierarchy(y, spec)
    hier = hs.hierarchy
    if spec.auto is not None:
        fitted = fit_hierarchy(hs, None, h=spec.h, train_frac=spec.train_frac,
                               select=(spec.auto.max_p, spec.auto.max_q, spec.auto.d))
    else:
        if spec.orders is not None:
            specs = {int(k): arma.ArmaSpec(*o) for k, o in spec.orders.items()}
        else:
            specs = level_specs(arma.ArmaSpec(*spec.bottom_order), hier)
        fitted = fit_hierarchy(hs, specs, h=spec.h, train_frac=spec.train_frac)
    rows = []
    for method in spec.methods:
        report = evaluate_method(fitted, parse_method(method), allow_pinv=allow_pinv)
        for i, k in enumerate(hier.ks):
            row = {"level": i + 1, "k": k, "method": report.method,
                   "available": report.available, "reason": report.reason}
            if report.available:
                tr, te = report.train, report.test
                row.update({
                    "train_base_mse": float(tr.sq_base[i] / tr.count[i]),
                    "test_base_mse": float(te.sq_base[i] / te.count[i]),
                    "train_recon_mse": float(tr.sq_recon[i] / tr.count[i]),
                    "test_recon_mse": float(te.sq_recon[i] / te.count[i]),
                    **{s: report.levels[str(i + 1)][s] for s in STATISTICS},
                })
            rows.append(row)
    models = {k: str(f.spec) for k, f in fitted.fits.items()}
    return rows, models

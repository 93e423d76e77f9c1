"""Relative error metrics, the train/test reconciliation protocol and MCB ranking."""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import arma
from .aggtheory import aggregated_order
from .errors import (
    DegenerateVariance,
    DimensionMismatch,
    InsufficientData,
    InsufficientResiduals,
    SingularCovariance,
    ZeroBaseError,
)
from .hierarchy import build_summing_matrix
from .reconcile import BOTTOM_UP, bottom_up_G, estimate_W, method_label, mint_G

logger = logging.getLogger(__name__)

STATISTICS = ("train_rmse", "test_rmse", "train_rmae", "test_rmae")

# two-tailed Nemenyi constants q_alpha (studentized range / sqrt(2)) for 2..10 methods
_NEMENYI_Q = {
    0.05: (1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164),
    0.10: (1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920),
}


def _relative(num, den):
    if den == 0:
        raise ZeroBaseError("base forecasts have zero error")
    return num / den - 1.0


def rmse_rel(recon, base, actual):
    """Squared reconciled error over squared base error, minus one."""
    recon, base, actual = (np.asarray(a, dtype=float) for a in (recon, base, actual))
    if not recon.shape == base.shape == actual.shape:
        raise DimensionMismatch("recon, base and actual must have the same shape")
    return _relative(np.sum((recon - actual) ** 2), np.sum((base - actual) ** 2))


def rmae_rel(recon, base, actual):
    """Absolute reconciled error over absolute base error, minus one."""
    recon, base, actual = (np.asarray(a, dtype=float) for a in (recon, base, actual))
    if not recon.shape == base.shape == actual.shape:
        raise DimensionMismatch("recon, base and actual must have the same shape")
    return _relative(np.sum(np.abs(recon - actual)), np.sum(np.abs(base - actual)))


@dataclass
class ErrorSums:
    """Per-level numerators/denominators; the overall ratio pools them."""

    sq_recon: np.ndarray
    sq_base: np.ndarray
    abs_recon: np.ndarray
    abs_base: np.ndarray
    count: np.ndarray

    @classmethod
    def from_forecasts(cls, recon, base, actual, hier):
        slices = hier.level_slices()
        out = {name: [] for name in ("sq_recon", "sq_base", "abs_recon", "abs_base", "count")}
        for k in hier.ks:
            sl = slices[k]
            r, b, a = recon[:, sl], base[:, sl], actual[:, sl]
            out["sq_recon"].append(np.sum((r - a) ** 2))
            out["sq_base"].append(np.sum((b - a) ** 2))
            out["abs_recon"].append(np.sum(np.abs(r - a)))
            out["abs_base"].append(np.sum(np.abs(b - a)))
            out["count"].append(a.size)
        return cls(**{k: np.array(v, dtype=float) for k, v in out.items()})

    def rmse(self, level=None):
        if level is None:
            return _relative(self.sq_recon.sum(), self.sq_base.sum())
        return _relative(self.sq_recon[level], self.sq_base[level])

    def rmae(self, level=None):
        if level is None:
            return _relative(self.abs_recon.sum(), self.abs_base.sum())
        return _relative(self.abs_recon[level], self.abs_base[level])


@dataclass
class EvalReport:
    """Training and test relative errors of one reconciliation method.

    ``levels`` maps a row label (``"1"`` for the top level, ..., ``"overall"``)
    to a dict of statistics. Unavailable methods carry ``reason`` and no values.
    """

    method: str
    ks: tuple
    levels: dict = field(default_factory=dict)
    available: bool = True
    reason: str = ""
    train: ErrorSums = None
    test: ErrorSums = None
    G: np.ndarray = None

    @staticmethod
    def level_names(ks):
        return [str(i) for i in range(1, len(ks) + 1)] + ["overall"]


@dataclass
class FittedHierarchy:
    """Per-level models frozen on the training periods, plus stacked forecasts."""

    hierarchy: object
    models: dict
    fits: dict
    train_base: np.ndarray
    train_actual: np.ndarray
    test_base: np.ndarray
    test_actual: np.ndarray
    I_train: int

    @property
    def train_residuals(self):
        return self.train_actual - self.train_base


def level_specs(bottom_spec, hier):
    """Fixed orders per level from the aggregation bound on the MA order."""
    p, d, q = bottom_spec.p, bottom_spec.d, bottom_spec.q
    return {k: arma.ArmaSpec(p, d, aggregated_order(p, d, q, k)) for k in hier.ks}


def stacked_forecasts(hs, models, h, origins):
    """Row ``i``: forecasts of top period ``origins[i] + h`` from the end of period ``origins[i]``."""
    hier = hs.hierarchy
    cols = []
    for k, mk in zip(hier.ks, hier.M):
        fc = arma.rolling_forecasts(models[k], hs.levels[k], h * mk, np.asarray(origins) * mk)
        cols.append(fc[:, (h - 1) * mk:])
    return np.hstack(cols)


def fit_hierarchy(hs, specs, h=1, train_frac=0.75, select=None):
    """Fit per-level models on the training periods and build base forecasts.

    ``specs`` maps each factor to an :class:`ArmaSpec`. With ``select`` set to
    ``(max_p, max_q, d)`` orders are chosen by AICc instead and ``specs`` is ignored.
    """
    if not 0 < train_frac < 1:
        raise ValueError(f"train_frac must lie in (0, 1), got {train_frac}")
    hier = hs.hierarchy
    I = hs.I
    I_train = int(np.floor(train_frac * I))
    fits = {}
    for k, mk in zip(hier.ks, hier.M):
        train = hs.levels[k][: I_train * mk]
        if select is not None:
            fits[k] = arma.select_order(train, *select)
        else:
            fits[k] = arma.fit(train, specs[k])
    models = {k: f.model for k, f in fits.items()}
    need = max(int(np.ceil((m.p + m.d) / mk)) for m, mk in zip(models.values(), hier.M))
    o_min = max(1, need)
    train_origins = np.arange(o_min, I_train - h + 1)
    test_origins = np.arange(max(o_min, I_train - h + 1), I - h + 1)
    if train_origins.size < 2:
        raise InsufficientData(f"{I_train} training periods leave fewer than 2 forecast origins")
    if test_origins.size < 1:
        raise InsufficientData("no test periods left after the training split")
    actual = hs.matrix()
    return FittedHierarchy(
        hierarchy=hier,
        models=models,
        fits=fits,
        train_base=stacked_forecasts(hs, models, h, train_origins),
        train_actual=actual[train_origins + h - 1],
        test_base=stacked_forecasts(hs, models, h, test_origins),
        test_actual=actual[test_origins + h - 1],
        I_train=I_train,
    )


def mapping_for(method, fitted, S, allow_pinv=False):
    if method == BOTTOM_UP:
        return bottom_up_G(S)
    W = estimate_W(fitted.train_residuals, method, S, allow_pinv=allow_pinv)
    return mint_G(S, W, allow_pinv=allow_pinv, method=method_label(method))


def evaluate_method(fitted, method, allow_pinv=False):
    """Reconcile training and test forecasts with one method."""
    hier = fitted.hierarchy
    S = build_summing_matrix(hier)
    label = method_label(method)
    report = EvalReport(method=label, ks=hier.ks)
    try:
        mapping = mapping_for(method, fitted, S, allow_pinv=allow_pinv)
    except (SingularCovariance, DegenerateVariance, InsufficientResiduals) as exc:
        report.available = False
        report.reason = f"{type(exc).__name__}: {exc}"
        return report
    report.G = mapping.G
    SG = mapping.SG
    report.train = ErrorSums.from_forecasts(fitted.train_base @ SG.T, fitted.train_base,
                                            fitted.train_actual, hier)
    report.test = ErrorSums.from_forecasts(fitted.test_base @ SG.T, fitted.test_base,
                                           fitted.test_actual, hier)
    for i, name in enumerate(EvalReport.level_names(hier.ks)):
        lvl = None if name == "overall" else i
        report.levels[name] = {
            "train_rmse": float(report.train.rmse(lvl)),
            "test_rmse": float(report.test.rmse(lvl)),
            "train_rmae": float(report.train.rmae(lvl)),
            "test_rmae": float(report.test.rmae(lvl)),
        }
    return report


def run_protocol(hs, specs, methods, h=1, train_frac=0.75, select=None, allow_pinv=False):
    """Fit, forecast and reconcile; one :class:`EvalReport` per method.

    Models and covariances use the training periods only. Test forecasts roll
    through the test periods conditioning on all data before each origin,
    with parameters frozen.
    """
    fitted = fit_hierarchy(hs, specs, h=h, train_frac=train_frac, select=select)
    return [evaluate_method(fitted, m, allow_pinv=allow_pinv) for m in methods]


@dataclass
class MCBResult:
    """Mean ranks with intervals of equal half-width around each."""

    methods: list
    mean_ranks: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    critical_distance: float
    best: int
    indistinguishable: np.ndarray

    def rows(self):
        for i, name in enumerate(self.methods):
            yield {
                "method": name,
                "mean_rank": float(self.mean_ranks[i]),
                "lower": float(self.lower[i]),
                "upper": float(self.upper[i]),
                "critical_distance": self.critical_distance,
                "best": i == self.best,
                "indistinguishable_from_best": bool(self.indistinguishable[i]),
            }


def nemenyi_q(alpha, n_methods):
    """Critical value of the Nemenyi test (studentized range over sqrt(2))."""
    table = _NEMENYI_Q.get(round(alpha, 10))
    if table is not None and 2 <= n_methods <= 1 + len(table):
        return table[n_methods - 2]
    return float(stats.studentized_range.ppf(1 - alpha, n_methods, np.inf) / np.sqrt(2))


def mcb_test(errors, alpha=0.05, methods=None):
    """Multiple comparisons with the best on per-series ranks (rank 1 = smallest error)."""
    E = np.asarray(errors, dtype=float)
    if E.ndim != 2 or E.shape[0] < 2 or E.shape[1] < 2:
        raise InsufficientData(f"need at least 2 series and 2 methods, got shape {E.shape}")
    n_series, n_methods = E.shape
    ranks = stats.rankdata(E, axis=1)
    mean_ranks = ranks.mean(axis=0)
    half = nemenyi_q(alpha, n_methods) * np.sqrt(n_methods * (n_methods + 1) / (12 * n_series))
    best = int(np.argmin(mean_ranks))
    lower, upper = mean_ranks - half, mean_ranks + half
    overlap = (lower <= upper[best]) & (upper >= lower[best])
    names = list(methods) if methods is not None else [f"m{i + 1}" for i in range(n_methods)]
    # two intervals overlap exactly when mean ranks differ by at most twice the half-width
    return MCBResult(names, mean_ranks, lower, upper, float(2 * half), best, overlap)


PERCENTILES = tuple(range(5, 100, 5))


def percentile_summary(values, percentiles=PERCENTILES):
    """Percentiles of a list of per-series errors, keyed by percentile."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("percentile summary of an empty list")
    return dict(zip(percentiles, np.percentile(x, percentiles)))


def trimmed_mean(values, fraction=0.1):
    """Mean after removing ``floor(fraction * n)`` values from each tail."""
    return float(stats.trim_mean(np.asarray(values, dtype=float), fraction))

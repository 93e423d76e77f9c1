"""ARIMA(p, d, q) simulation, conditional-sum-of-squares estimation and forecasting.

Model convention::

    w_t = (1 - L)^d y_t             (d > 0)
    w_t = y_t - mu                  (d = 0)
    w_t = sum_i phi_i w_{t-i} + e_t + sum_j theta_j e_{t-j}

Estimation conditions on the first ``p`` differenced observations and sets
pre-sample innovations to zero. Parameters are optimised in an unconstrained
space that maps through partial autocorrelations, so every fitted model is
stationary and invertible by construction.
"""

import logging
from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy import optimize, signal

from .errors import (
    AllFitsFailed,
    DegenerateSeries,
    InsufficientData,
    InsufficientHistory,
    InvalidPacf,
    NonStationaryModel,
    OptimizerFailure,
)

logger = logging.getLogger(__name__)

MAX_ITER = 500
GRAD_TOL = 1e-8
REL_OBJ_TOL = 1e-10
# keeps tanh-mapped partial correlations strictly inside (-1, 1)
_PACF_CLIP = 1.0 - 1e-10


@dataclass(frozen=True)
class ArmaSpec:
    p: int = 0
    d: int = 0
    q: int = 0

    def __post_init__(self):
        if min(self.p, self.d, self.q) < 0:
            raise ValueError(f"orders must be non-negative, got {self}")

    def __str__(self):
        return f"ARIMA({self.p},{self.d},{self.q})"


@dataclass
class ArmaModel:
    phi: np.ndarray = field(default_factory=lambda: np.zeros(0))
    theta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    d: int = 0
    sigma2: float = 1.0
    mu: float = 0.0

    def __post_init__(self):
        self.phi = np.atleast_1d(np.asarray(self.phi, dtype=float))
        self.theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        self.d = int(self.d)
        self.sigma2 = float(self.sigma2)
        self.mu = float(self.mu)

    @property
    def p(self):
        return self.phi.size

    @property
    def q(self):
        return self.theta.size

    @property
    def spec(self):
        return ArmaSpec(self.p, self.d, self.q)

    def is_stationary(self):
        return _roots_outside_unit_circle(np.r_[1.0, -self.phi])

    def is_invertible(self):
        return _roots_outside_unit_circle(np.r_[1.0, self.theta])

    def check(self):
        if not self.is_stationary():
            raise NonStationaryModel(f"AR polynomial has a root on or inside the unit circle: {self.phi}")
        if not self.is_invertible():
            raise NonStationaryModel(f"MA polynomial has a root on or inside the unit circle: {self.theta}")
        if not self.sigma2 > 0:
            raise NonStationaryModel(f"innovation variance must be positive, got {self.sigma2}")


@dataclass
class FitResult:
    model: ArmaModel
    loglik: float
    aicc: float
    n_used: int
    spec: ArmaSpec
    mean_estimated: bool = False


def _roots_outside_unit_circle(poly):
    """``poly`` holds coefficients of 1 + c_1 z + ... in ascending order.

    Uses the step-down (Schur-Cohn) recursion, which stays accurate when the
    leading coefficients are tiny, where polynomial root finding does not.
    """
    a = -np.asarray(poly, dtype=float)[1:]
    for j in range(a.size, 0, -1):
        r = a[j - 1]
        if not abs(r) < 1:
            return False
        a = (a[: j - 1] + r * a[: j - 1][::-1]) / (1 - r * r)
    return True


def as_generator(seed):
    """Accept an int, a ``SeedSequence`` or a ``Generator``."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def pacf_to_ar(pacf):
    """Map partial autocorrelations to AR coefficients by the Durbin-Levinson recursion."""
    pacf = np.asarray(pacf, dtype=float).ravel()
    if np.any(np.abs(pacf) >= 1):
        raise InvalidPacf(f"partial autocorrelations must lie in (-1, 1), got {pacf}")
    phi = np.zeros(0)
    for r in pacf:
        phi = np.r_[phi - r * phi[::-1], r]
    return phi


def ar_to_pacf(phi):
    """Inverse of :func:`pacf_to_ar` (step-down recursion)."""
    phi = np.asarray(phi, dtype=float).ravel().copy()
    out = np.zeros(phi.size)
    for j in range(phi.size, 0, -1):
        r = phi[j - 1]
        out[j - 1] = r
        if abs(r) >= 1:
            raise InvalidPacf(f"coefficients are not stationary: {phi}")
        phi = (phi[: j - 1] + r * phi[: j - 1][::-1]) / (1 - r * r)
    return out


def draw_stationary(p, q, rng):
    """Random stationary, invertible ARMA(p, q) with unit innovation variance."""
    rng = as_generator(rng)
    ar_partials = rng.uniform(-1.0, 1.0, size=p)
    ma_partials = rng.uniform(-1.0, 1.0, size=q)
    return ArmaModel(phi=pacf_to_ar(ar_partials), theta=-pacf_to_ar(ma_partials))


def default_burn_in(model):
    return 10 * (model.p + model.q + 1) + 100


def simulate(model, n, burn_in=None, seed=None):
    """Draw ``n`` observations with Gaussian innovations."""
    model.check()
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if burn_in is None:
        burn_in = default_burn_in(model)
    rng = as_generator(seed)
    eps = rng.normal(0.0, np.sqrt(model.sigma2), size=n + burn_in)
    w = signal.lfilter(np.r_[1.0, model.theta], np.r_[1.0, -model.phi], eps)[burn_in:]
    if model.d == 0:
        return w + model.mu
    y = w
    for _ in range(model.d):
        y = np.cumsum(y)
    return y


def _difference(y, d, mu):
    y = np.asarray(y, dtype=float)
    if d == 0:
        return y - mu
    return np.diff(y, n=d)


def _unpack(x, p, q):
    partials = np.clip(np.tanh(x), -_PACF_CLIP, _PACF_CLIP)
    return pacf_to_ar(partials[:p]), -pacf_to_ar(partials[p:p + q])


def css_residuals(w, phi, theta):
    """Conditional residuals of the differenced, demeaned series ``w``.

    The first ``p`` entries are zero (conditioning values).
    """
    p = phi.size
    u = w[p:].copy()
    for i in range(1, p + 1):
        u -= phi[i - 1] * w[p - i: w.size - i]
    e = signal.lfilter([1.0], np.r_[1.0, theta], u) if theta.size else u
    return np.r_[np.zeros(min(p, w.size)), e]


def _start_values(w, p, q):
    x0 = np.zeros(p + q)
    if p:
        n = w.size
        acov = np.array([w[: n - lag] @ w[lag:] / n for lag in range(p + 1)])
        if acov[0] > 0:
            partials = _sample_pacf(acov / acov[0], p)
            x0[:p] = np.arctanh(np.clip(partials, -0.9, 0.9))
    return x0


def _sample_pacf(acf, p):
    """Durbin-Levinson on a sample autocorrelation sequence."""
    phi = np.zeros(0)
    partials = np.zeros(p)
    v = 1.0
    for j in range(1, p + 1):
        r = (acf[j] - phi @ acf[1:j][::-1]) / v if v > 0 else 0.0
        r = float(np.clip(r, -0.99, 0.99))
        phi = np.r_[phi - r * phi[::-1], r]
        v *= 1 - r * r
        partials[j - 1] = r
    return partials


def fit(series, spec):
    """Fit an ARIMA model by conditional sum of squares.

    Series with ``d == 0`` are demeaned first and the mean is stored on the model.
    """
    if not isinstance(spec, ArmaSpec):
        spec = ArmaSpec(*spec)
    y = np.asarray(series, dtype=float)
    p, d, q = spec.p, spec.d, spec.q
    if y.size <= p + q + d + 2:
        raise InsufficientData(f"{spec} needs more than {p + q + d + 2} observations, got {y.size}")
    mu = float(np.mean(y)) if d == 0 else 0.0
    w = _difference(y, d, mu)
    if not np.any(w):
        raise DegenerateSeries(f"series has zero variance after differencing/demeaning under {spec}")
    n_used = w.size - p

    if p + q == 0:
        ss = float(w @ w)
        phi, theta = np.zeros(0), np.zeros(0)
    else:
        def objective(x):
            phi_, theta_ = _unpack(x, p, q)
            e = css_residuals(w, phi_, theta_)[p:]
            ss_ = e @ e
            if not np.isfinite(ss_) or ss_ <= 0:
                return 1e300
            return 0.5 * np.log(ss_ / n_used)

        res = optimize.minimize(
            objective,
            _start_values(w, p, q),
            method="L-BFGS-B",
            options={"maxiter": MAX_ITER, "gtol": GRAD_TOL, "ftol": REL_OBJ_TOL},
        )
        if res.status == 1 or not np.all(np.isfinite(res.x)) or res.fun >= 1e299:
            raise OptimizerFailure(f"{spec}: {res.message}")
        if res.status != 0:
            logger.debug("%s: optimizer stopped with status %s (%s)", spec, res.status, res.message)
        phi, theta = _unpack(res.x, p, q)
        e = css_residuals(w, phi, theta)[p:]
        ss = float(e @ e)

    sigma2 = ss / n_used
    if not sigma2 > 0:
        raise DegenerateSeries(f"zero residual variance under {spec}")
    # the conditioning values are credited with the fitted innovation variance so
    # that candidates with different p are scored on the same number of observations
    n = w.size
    loglik = -0.5 * n * (np.log(2 * np.pi * sigma2) + 1.0)
    kappa = p + q + 1 + (1 if d == 0 else 0)
    denom = n - kappa - 1
    aicc = -2 * loglik + 2 * kappa * n / denom if denom > 0 else np.inf
    model = ArmaModel(phi=phi, theta=theta, d=d, sigma2=sigma2, mu=mu)
    return FitResult(model, float(loglik), float(aicc), n_used, spec, mean_estimated=d == 0)


def select_order(series, max_p, max_q, d=0):
    """Exhaustive AICc search over ``p <= max_p``, ``q <= max_q``.

    Ties go to the smaller ``p + q``, then the smaller ``p``.
    """
    if max_p < 0 or max_q < 0:
        raise ValueError("grid bounds must be non-negative")
    fits = []
    for p in range(max_p + 1):
        for q in range(max_q + 1):
            try:
                fits.append(fit(series, ArmaSpec(p, d, q)))
            except (OptimizerFailure, InsufficientData) as exc:
                logger.debug("candidate (%d,%d,%d) skipped: %s", p, d, q, exc)
    if not fits:
        raise AllFitsFailed(f"no candidate up to ({max_p},{d},{max_q}) could be fitted")
    return min(fits, key=lambda f: (f.aicc, f.spec.p + f.spec.q, f.spec.p))


def rolling_forecasts(model, series, horizon, origins):
    """Forecast matrix ``F[i, j]`` of ``y[t_i + j]`` given ``y[:t_i]`` (0-based).

    ``origins`` holds observation counts ``t_i``; the model parameters stay
    fixed and the conditional residuals are computed once for the full series.
    """
    y = np.asarray(series, dtype=float)
    origins = np.asarray(origins, dtype=int).ravel()
    p, q, d = model.p, model.q, model.d
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if origins.size == 0:
        return np.zeros((0, horizon))
    if origins.min() < p + d or origins.max() > y.size:
        raise InsufficientHistory(
            f"origins must lie in [{p + d}, {y.size}], got [{origins.min()}, {origins.max()}]"
        )
    w = _difference(y, d, model.mu)
    e = css_residuals(w, model.phi, model.theta) if w.size else np.zeros(0)
    tw = origins - d  # number of known differenced values per origin

    wbuf = np.zeros((origins.size, p + horizon))
    if p:
        wbuf[:, :p] = w[tw[:, None] - p + np.arange(p)]
    ebuf = np.zeros((origins.size, q + horizon))
    if q:
        idx = tw[:, None] - q + np.arange(q)
        padded = np.r_[np.zeros(q), e]
        ebuf[:, :q] = padded[idx + q]
    for j in range(horizon):
        acc = np.zeros(origins.size)
        for i in range(1, p + 1):
            acc += model.phi[i - 1] * wbuf[:, p + j - i]
        for i in range(j + 1, q + 1):
            acc += model.theta[i - 1] * ebuf[:, q + j - i]
        wbuf[:, p + j] = acc
    wf = wbuf[:, p:]

    if d == 0:
        return wf + model.mu
    coef = np.array([-((-1) ** i) * comb(d, i) for i in range(1, d + 1)])
    ybuf = np.zeros((origins.size, d + horizon))
    ybuf[:, :d] = y[origins[:, None] - d + np.arange(d)]
    for j in range(horizon):
        ybuf[:, d + j] = wf[:, j] + ybuf[:, j:d + j][:, ::-1] @ coef
    return ybuf[:, d:]


def forecast(model, history, h):
    """Conditional-mean forecasts of the next ``h`` values after ``history``."""
    y = np.asarray(history, dtype=float)
    if h < 1:
        raise ValueError(f"horizon must be >= 1, got {h}")
    if y.size < model.p + model.d:
        raise InsufficientHistory(f"need at least {model.p + model.d} observations, got {y.size}")
    return rolling_forecasts(model, y, h, [y.size])[0]


def hstep_residuals(model, series, h):
    """``y[t + h] - forecast(y[:t], h)[-1]`` for every origin ``t >= p + d``."""
    y = np.asarray(series, dtype=float)
    t0 = model.p + model.d
    if y.size - h - t0 < 0:
        raise InsufficientHistory(f"series of length {y.size} leaves no {h}-step origin")
    origins = np.arange(t0, y.size - h + 1)
    fc = rolling_forecasts(model, y, h, origins)[:, -1]
    return y[origins + h - 1] - fc

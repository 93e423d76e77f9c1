"""Base-forecast error covariance estimators and reconciliation mappings.

A mapping ``G`` (``n_b x n``) turns stacked base forecasts into bottom-level
forecasts; ``S @ G`` is the reconciliation projection. Residual matrices are
``N x n`` with one stacked period per row, in hierarchy order.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .aggtheory import theoretical_W1
from .errors import (
    DegenerateVariance,
    DimensionMismatch,
    InsufficientResiduals,
    SingularCovariance,
)

# eigenvalues below this fraction of the largest one count as zero
SINGULAR_RTOL = 1e-10

SPECTRAL_NU_GRID = (0.0, 0.25, 0.5, 0.75, 1.0)
SPECTRAL_MAX_EIG = 6

_VARIANTS = ("ols", "variance", "structural", "full", "shrink", "spectral", "theoretical")


@dataclass(frozen=True)
class CovSpec:
    """Which estimator of the base-forecast error covariance to use.

    ``lam`` (shrink) is a float in (0, 1) or ``"auto"``; ``nu`` (spectral) is
    a float in [0, 1], ``"auto"`` or ``"cv"``; ``n_eig`` is a positive int or
    ``"cv"``. ``phi``/``sigma2`` parametrise the theoretical AR(1) matrix.
    """

    variant: str
    lam: object = None
    nu: object = None
    n_eig: object = None
    phi: float = None
    sigma2: float = None

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ValueError(f"unknown covariance variant {self.variant!r}")
        if self.variant == "shrink":
            lam = "auto" if self.lam is None else self.lam
            if lam != "auto" and not 0 < float(lam) < 1:
                raise ValueError(f"shrinkage lambda must lie in (0, 1), got {lam}")
            object.__setattr__(self, "lam", lam if lam == "auto" else float(lam))
        if self.variant == "spectral":
            nu = "auto" if self.nu is None else self.nu
            if nu not in ("auto", "cv") and not 0 <= float(nu) <= 1:
                raise ValueError(f"spectral nu must lie in [0, 1], got {nu}")
            n_eig = "cv" if self.n_eig is None else self.n_eig
            if n_eig != "cv" and int(n_eig) < 1:
                raise ValueError(f"n_eig must be >= 1, got {n_eig}")
            object.__setattr__(self, "nu", nu if nu in ("auto", "cv") else float(nu))
            object.__setattr__(self, "n_eig", n_eig if n_eig == "cv" else int(n_eig))
        if self.variant == "theoretical" and (self.phi is None or self.sigma2 is None):
            raise ValueError("theoretical covariance needs phi and sigma2")

    @property
    def label(self):
        if self.variant == "shrink":
            return f"shrink:{self.lam}"
        if self.variant == "spectral":
            return f"spectral:nu={self.nu},n_eig={self.n_eig}"
        if self.variant == "theoretical":
            return f"theoretical:phi={self.phi},sigma2={self.sigma2}"
        return self.variant


BOTTOM_UP = "bottom_up"


def parse_method(text):
    """Parse a method name such as ``"full"``, ``"shrink:0.3"`` or
    ``"spectral:nu=auto,n_eig=2"``. ``"bottom_up"`` is returned unchanged."""
    text = text.strip()
    if text in (BOTTOM_UP, "bu", "bottom-up"):
        return BOTTOM_UP
    name, _, args = text.partition(":")
    aliases = {"identity": "ols", "wls_var": "variance", "wls_struct": "structural",
               "sample": "full", "mint_cov": "full", "mint_shrink": "shrink"}
    name = aliases.get(name, name)
    if name not in _VARIANTS:
        raise ValueError(f"unknown reconciliation method {text!r}")
    kwargs = {}
    if args:
        if name == "shrink" and "=" not in args:
            kwargs["lam"] = args
        else:
            for part in args.split(","):
                key, eq, value = part.partition("=")
                if not eq:
                    raise ValueError(f"malformed method argument {part!r} in {text!r}")
                kwargs[key.strip()] = value.strip()
    for key in ("lam", "nu", "phi", "sigma2"):
        if key in kwargs and kwargs[key] not in ("auto", "cv"):
            kwargs[key] = float(kwargs[key])
    if "n_eig" in kwargs and kwargs["n_eig"] != "cv":
        kwargs["n_eig"] = int(kwargs["n_eig"])
    return CovSpec(name, **kwargs)


def method_label(method):
    return method if method == BOTTOM_UP else method.label


@dataclass
class WMatrix:
    """Estimated covariance, or its inverse when ``is_precision`` is set."""

    matrix: np.ndarray
    provenance: str = ""
    n_samples: int = 0
    is_precision: bool = False
    singular: bool = False

    @property
    def W(self):
        if self.is_precision:
            return np.linalg.inv(self.matrix)
        return self.matrix


@dataclass
class ReconMapping:
    G: np.ndarray
    SG: np.ndarray
    method: str


def _is_singular(W):
    eig = np.linalg.eigvalsh((W + W.T) / 2)
    return eig[-1] <= 0 or eig[0] <= SINGULAR_RTOL * eig[-1]


def second_moment(residuals):
    """Mean outer product of residual rows (no centring)."""
    E = np.asarray(residuals, dtype=float)
    W = E.T @ E / E.shape[0]
    return (W + W.T) / 2


def shrinkage_intensity(residuals):
    """Data-driven intensity for shrinking correlations towards zero.

    Ratio of the estimated sampling variance of the off-diagonal
    correlations to their squared size, clipped to [0, 1].
    """
    E = np.asarray(residuals, dtype=float)
    N = E.shape[0]
    scale = np.sqrt(np.mean(E**2, axis=0))
    if np.any(scale == 0):
        raise DegenerateVariance("a series has zero residual variance")
    Z = E / scale
    prods = Z[:, :, None] * Z[:, None, :]
    R = prods.mean(axis=0)
    var_r = N / (N - 1) ** 3 * ((prods - R) ** 2).sum(axis=0)
    off = ~np.eye(E.shape[1], dtype=bool)
    denom = np.sum(R[off] ** 2)
    if denom == 0:
        return 1.0
    return float(np.clip(np.sum(var_r[off]) / denom, 0.0, 1.0))


def spectral_precision(residuals, nu, n_eig):
    """Precision matrix from a shrunk, eigen-filtered correlation matrix.

    The leading ``n_eig`` shrunk eigenvalues are kept; the rest are replaced
    by their average. With ``n_eig == n`` nothing is averaged.
    """
    E = np.asarray(residuals, dtype=float)
    n = E.shape[1]
    if not 1 <= n_eig <= n:
        raise ValueError(f"n_eig must lie in [1, {n}], got {n_eig}")
    W = second_moment(E)
    var = np.diag(W).copy()
    if np.any(var <= 0):
        raise DegenerateVariance("a series has zero residual variance")
    d = 1 / np.sqrt(var)
    R = W * np.outer(d, d)
    lam, V = np.linalg.eigh(R)
    lam, V = lam[::-1], V[:, ::-1]
    shrunk = (1 - nu) * lam + nu
    c = shrunk[n_eig:].mean() if n_eig < n else 0.0
    kept = np.r_[shrunk[:n_eig], np.full(n - n_eig, c)]
    if np.any(kept <= SINGULAR_RTOL * max(kept.max(), 0.0)) or kept.max() <= 0:
        raise SingularCovariance("filtered correlation matrix is singular")
    Q = (V / kept) @ V.T
    P = Q * np.outer(d, d)
    return WMatrix((P + P.T) / 2, provenance=f"spectral(nu={nu},n_eig={n_eig})",
                   n_samples=E.shape[0], is_precision=True)


def _spectral_cv(E, S, nu, n_eig):
    """Pick spectral hyperparameters by expanding-window validation on residual rows.

    The validation loss of row ``t`` is the squared reconciled error
    ``||S G e_t||^2`` with ``G`` estimated from rows before ``t``.
    """
    N, n = E.shape
    nus = SPECTRAL_NU_GRID if nu == "cv" else (nu,)
    eigs = range(1, min(n, SPECTRAL_MAX_EIG) + 1) if n_eig == "cv" else (n_eig,)
    start = max(2, N // 2)
    if start >= N:
        raise InsufficientResiduals(f"{N} residual rows are too few for cross-validation")
    best, best_loss = None, np.inf
    for nu_c in nus:
        for k in eigs:
            loss = 0.0
            try:
                for t in range(start, N):
                    train = E[:t]
                    nu_t = shrinkage_intensity(train) if nu_c == "auto" else nu_c
                    SG = mint_G(S, spectral_precision(train, nu_t, k)).SG
                    loss += float(np.sum((SG @ E[t]) ** 2))
            except (SingularCovariance, DegenerateVariance):
                continue
            if loss < best_loss:
                best, best_loss = (nu_c, k), loss
    if best is None:
        raise SingularCovariance("no spectral candidate produced a usable precision matrix")
    return best


def estimate_W(residuals, spec, S, allow_pinv=False):
    """Estimate the error covariance (or precision) described by ``spec``."""
    S = np.asarray(S, dtype=float)
    n = S.shape[0]
    if spec.variant == "ols":
        return WMatrix(np.eye(n), provenance=spec.label)
    if spec.variant == "structural":
        return WMatrix(np.diag(S.sum(axis=1)), provenance=spec.label)
    if spec.variant == "theoretical":
        W = theoretical_W1(spec.phi, spec.sigma2, S.shape[1]).W
        if W.shape[0] != n:
            raise DimensionMismatch("theoretical covariance is defined for a {k, 1} hierarchy only")
        return WMatrix(W, provenance=spec.label, singular=_is_singular(W))

    E = np.asarray(residuals, dtype=float)
    if E.ndim != 2 or E.shape[1] != n:
        raise DimensionMismatch(f"residuals of shape {E.shape} do not match {n} series")
    N = E.shape[0]
    if N < 2:
        raise InsufficientResiduals(f"need at least 2 residual rows, got {N}")

    if spec.variant == "variance":
        W = np.diag(np.mean(E**2, axis=0))
        return WMatrix(W, provenance=spec.label, n_samples=N, singular=_is_singular(W))
    if spec.variant == "full":
        if N < n and not allow_pinv:
            raise SingularCovariance(f"{N} residual rows cannot identify a {n} x {n} covariance")
        W = second_moment(E)
        return WMatrix(W, provenance=spec.label, n_samples=N, singular=N < n or _is_singular(W))
    if spec.variant == "shrink":
        lam = shrinkage_intensity(E) if spec.lam == "auto" else spec.lam
        W = second_moment(E)
        W = lam * np.diag(np.diag(W)) + (1 - lam) * W
        return WMatrix(W, provenance=f"shrink(lambda={lam})", n_samples=N, singular=_is_singular(W))
    if spec.variant == "spectral":
        nu, n_eig = spec.nu, spec.n_eig
        if nu == "cv" or n_eig == "cv":
            nu, n_eig = _spectral_cv(E, S, nu, n_eig)
        if nu == "auto":
            nu = shrinkage_intensity(E)
        return spectral_precision(E, nu, min(n_eig, n))
    raise ValueError(f"unhandled covariance variant {spec.variant!r}")


def _psd_pinv(A, scale):
    lam, V = np.linalg.eigh((A + A.T) / 2)
    keep = lam > SINGULAR_RTOL * scale
    return (V[:, keep] / lam[keep]) @ V[:, keep].T


def mint_G(S, W, allow_pinv=False, method=None):
    """Minimum-trace mapping ``(S' W^-1 S)^-1 S' W^-1``.

    A singular covariance raises :class:`SingularCovariance` unless
    ``allow_pinv`` is set, in which case the constrained problem is solved
    with a pseudo-inverse.
    """
    S = np.asarray(S, dtype=float)
    n, n_b = S.shape
    label = method or W.provenance or "mint"
    M = np.asarray(W.matrix, dtype=float)
    if M.shape != (n, n):
        raise DimensionMismatch(f"covariance of shape {M.shape} does not match S of shape {S.shape}")

    if W.is_precision:
        A = S.T @ M @ S
        try:
            G = linalg.cho_solve(linalg.cho_factor(A), S.T @ M)
        except linalg.LinAlgError as exc:
            raise SingularCovariance(f"{label}: S' W^-1 S is not positive definite") from exc
        return ReconMapping(G, S @ G, label)

    singular = W.singular or _is_singular(M)
    if singular and not allow_pinv:
        raise SingularCovariance(f"{label}: covariance matrix is singular")
    # constraint form: G = J - J W U (U' W U)^-1 U', U' = [I, -S_aggregate]
    n_a = n - n_b
    U = np.hstack([np.eye(n_a), -S[:n_a]]).T
    J = np.hstack([np.zeros((n_b, n_a)), np.eye(n_b)])
    UWU = U.T @ M @ U
    JWU = J @ M @ U
    if singular:
        G = J - JWU @ _psd_pinv(UWU, np.abs(M).max()) @ U.T
    else:
        try:
            G = J - linalg.cho_solve(linalg.cho_factor(UWU), JWU.T).T @ U.T
        except linalg.LinAlgError as exc:
            raise SingularCovariance(f"{label}: U' W U is not positive definite") from exc
    return ReconMapping(G, S @ G, label)


def bottom_up_G(S):
    S = np.asarray(S, dtype=float)
    n, n_b = S.shape
    G = np.hstack([np.zeros((n_b, n - n_b)), np.eye(n_b)])
    return ReconMapping(G, S @ G, BOTTOM_UP)


def ols_G(S):
    return mint_G(S, WMatrix(np.eye(np.shape(S)[0]), provenance="ols"))


def top_down_G(S, proportions):
    """Split the top-level forecast by fixed ``proportions`` (not unbiased in general)."""
    S = np.asarray(S, dtype=float)
    p = np.asarray(proportions, dtype=float).ravel()
    n, n_b = S.shape
    if p.size != n_b:
        raise DimensionMismatch(f"need {n_b} proportions, got {p.size}")
    G = np.zeros((n_b, n))
    G[:, 0] = p
    return ReconMapping(G, S @ G, "top_down")


def reconcile(base, mapping, S):
    """Reconciled forecasts ``S G base``; ``base`` may hold one period per row."""
    S = np.asarray(S, dtype=float)
    base = np.asarray(base, dtype=float)
    if base.shape[-1] != S.shape[0] or mapping.G.shape != (S.shape[1], S.shape[0]):
        raise DimensionMismatch(
            f"base of shape {base.shape}, G of shape {mapping.G.shape} and S of shape {S.shape} do not match"
        )
    return (base @ mapping.G.T) @ S.T


def reconciled_trace(S, G, W):
    """``trace(S G W G' S')``, the objective minimised by :func:`mint_G`."""
    SG = np.asarray(S) @ np.asarray(G)
    return float(np.trace(SG @ W @ SG.T))

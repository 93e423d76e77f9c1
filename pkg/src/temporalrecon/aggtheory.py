"""Closed-form results for temporally aggregated ARIMA and AR(1) processes.

Flow-aggregating an AR(1) with parameter ``phi`` over ``k`` periods gives an
ARMA(1, 1) in the aggregate time scale with AR coefficient ``phi**k``. Its MA
coefficient and innovation variance follow from matching the lag-0 and
lag-1 autocovariances of the aggregation filter

    T(L) = (1 + phi L + ... + phi^(k-1) L^(k-1)) (1 + L + ... + L^(k-1))

applied to the bottom-level innovations.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NoInvertibleRoot, NonStationaryModel
from .hierarchy import TemporalHierarchy, build_summing_matrix


@dataclass(frozen=True)
class AggregatedAr1:
    beta: float
    eta: float
    sigma_star2: float
    k: int
    source_phi: float
    source_sigma2: float


@dataclass(frozen=True)
class TheoreticalW1:
    W: np.ndarray
    sigma_star2: float
    cross: np.ndarray
    bottom: np.ndarray


def aggregated_order(p, d, q, k):
    """Upper bound on the MA order after k-aggregating an ARIMA(p, d, q).

    AR and differencing orders are unchanged; polynomial cancellation can
    make the true MA order smaller than this bound.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return (p * (k - 1) + (d + 1) * (k - 1) + q) // k


def _check_ar1(phi, sigma2, k):
    if not abs(phi) < 1:
        raise NonStationaryModel(f"|phi| must be < 1, got {phi}")
    if not sigma2 > 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")


def gamma01(phi, sigma2, k):
    """Lag-0 and lag-1 (aggregate scale) autocovariances of ``T(L) eps``.

    The filter has ``2k - 1`` coefficients: partial sums ``sum_{i<=j} phi^i``
    for ``j = 0..k-1`` followed by tail sums ``sum_{i>=j} phi^i`` for
    ``j = 1..k-1``.
    """
    _check_ar1(phi, sigma2, k)
    powers = phi ** np.arange(k)
    head = np.array([powers[: j + 1].sum() for j in range(k)])
    tail = np.array([powers[j:].sum() for j in range(1, k)])
    g0 = sigma2 * (np.sum(head**2) + np.sum(tail**2))
    g1 = sigma2 * sum(powers[j:].sum() * powers[:j].sum() for j in range(1, k))
    return float(g0), float(g1)


def aggregate_ar1(phi, sigma2, k):
    """ARMA(1, 1) parameters of the k-aggregated AR(1)."""
    g0, g1 = gamma01(phi, sigma2, k)
    rho1 = g1 / g0
    if abs(rho1) > 0.5:
        raise NoInvertibleRoot(f"lag-1 autocorrelation {rho1} admits no MA(1) representation")
    # root of rho1 * eta^2 - eta + rho1 = 0 with |eta| <= 1, written as
    # 2 rho1 / (1 + sqrt(1 - 4 rho1^2)) to avoid cancellation for small rho1
    eta = 2 * rho1 / (1 + np.sqrt(1 - 4 * rho1 * rho1))
    return AggregatedAr1(
        beta=phi**k,
        eta=float(eta),
        sigma_star2=float(g0 / (1 + eta * eta)),
        k=k,
        source_phi=phi,
        source_sigma2=sigma2,
    )


def phi_matrix(phi, k):
    """Lower-triangular ``k x k`` matrix with entries ``phi**(i - j)``."""
    i, j = np.indices((k, k))
    return np.where(i >= j, float(phi) ** np.maximum(i - j, 0), 0.0)


def theoretical_W1(phi, sigma2, k):
    """Covariance of 1-step errors for the two-level ``{k, 1}`` hierarchy.

    Row order is the aggregate error first, then the 1..k-step bottom errors.
    At ``phi == 0`` the matrix is singular: the aggregate error equals the
    sum of the bottom errors.
    """
    agg = aggregate_ar1(phi, sigma2, k)
    Phi = phi_matrix(phi, k)
    bottom = sigma2 * Phi @ Phi.T
    cross = bottom.sum(axis=0)
    W = np.empty((k + 1, k + 1))
    W[0, 0] = agg.sigma_star2
    W[0, 1:] = cross
    W[1:, 0] = cross
    W[1:, 1:] = bottom
    return TheoreticalW1(W=W, sigma_star2=agg.sigma_star2, cross=cross, bottom=bottom)


def optimal_G_theoretical(phi, sigma2, k):
    """Minimum-trace mapping under the theoretical covariance.

    Returns ``(G, SG)``; the result is the bottom-up mapping.
    """
    # local import: reconcile depends on this module
    from .reconcile import WMatrix, mint_G

    hier = TemporalHierarchy((k, 1))
    S = build_summing_matrix(hier)
    W = WMatrix(theoretical_W1(phi, sigma2, k).W, provenance="TheoreticalAr1")
    # the theoretical matrix is exact, so the pseudo-inverse only matters at phi == 0
    mapping = mint_G(S, W, allow_pinv=True)
    return mapping.G, mapping.SG

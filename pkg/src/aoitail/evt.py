"""Extreme-value analytics for the peak-age series.

Covers the generalized extreme value (GEV) family for block maxima, the
peaks-over-threshold moment estimator of the tail shape, a
probability-weighted-moments GEV fit, the runs estimator of the extremal
index, and empirical-CCDF diagnostics.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

logger = logging.getLogger(__name__)

# Below this magnitude the shape parameter is treated as exactly zero
# (Gumbel branch); the two branches agree to ~1e-8 there.
SHAPE_ZERO_TOL = 1e-8

_EULER_GAMMA = 0.5772156649015329


class TailDataError(ValueError):
    """Raised when a tail estimate is requested from degenerate data."""


@dataclass(frozen=True)
class GevParams:
    """GEV parameter triple (location, scale, shape)."""

    location: float
    scale: float
    shape: float

    def __post_init__(self):
        if self.scale <= 0.0:
            raise ValueError("scale must be positive")

    @property
    def endpoint(self) -> float:
        """Upper endpoint of the support: finite iff shape < 0."""
        if self.shape < -SHAPE_ZERO_TOL:
            return self.location - self.scale / self.shape
        return math.inf


ArrayLike = Union[float, np.ndarray, Sequence[float]]


def gev_cdf(params: GevParams, z: ArrayLike) -> Union[float, np.ndarray]:
    """GEV cumulative distribution function, elementwise over ``z``."""
    zs = np.asarray(z, dtype=float)
    xi, mu, sigma = params.shape, params.location, params.scale
    if abs(xi) < SHAPE_ZERO_TOL:
        out = np.exp(-np.exp(-(zs - mu) / sigma))
    else:
        t = 1.0 + xi * (zs - mu) / sigma
        inside = t > 0.0
        # outside the support: CDF is 1 past a finite upper endpoint
        # (xi < 0) and 0 below the lower endpoint (xi > 0)
        out = np.where(inside, np.exp(-np.maximum(t, 1e-300) ** (-1.0 / xi)),
                       1.0 if xi < 0.0 else 0.0)
    if np.isscalar(z) or getattr(z, "ndim", 1) == 0:
        return float(out)
    return out


def gev_ccdf(params: GevParams, z: ArrayLike) -> Union[float, np.ndarray]:
    """GEV complementary CDF (tail probability), elementwise over ``z``."""
    cdf = gev_cdf(params, z)
    return 1.0 - cdf


def gev_quantile(params: GevParams, p: float) -> float:
    """Inverse CDF; p in (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError("quantile level must lie in (0, 1)")
    xi, mu, sigma = params.shape, params.location, params.scale
    if abs(xi) < SHAPE_ZERO_TOL:
        return mu - sigma * math.log(-math.log(p))
    return mu + sigma * ((-math.log(p)) ** (-xi) - 1.0) / xi


@dataclass
class ExceedanceMoments:
    """Streaming first and second moments of excesses over a threshold."""

    threshold: float
    count: int = 0
    mean_excess: float = 0.0
    second_moment: float = 0.0

    def update(self, x: float) -> bool:
        """Feed one observation; returns True if it exceeded the threshold."""
        if x <= self.threshold:
            return False
        y = x - self.threshold
        self.count += 1
        self.mean_excess += (y - self.mean_excess) / self.count
        self.second_moment += (y * y - self.second_moment) / self.count
        return True


def shape_from_moments(stats: ExceedanceMoments) -> float:
    """Tail shape from excess moments:

        xi = (E[Y^2] - 2 E[Y]^2) / (2 (E[Y^2] - E[Y]^2))

    which recovers the generalized-Pareto shape exactly when fed exact
    moments. Raises TailDataError when the excess variance is degenerate.
    """
    if stats.count < 2:
        raise TailDataError("need at least two exceedances")
    m1, m2 = stats.mean_excess, stats.second_moment
    variance = m2 - m1 * m1
    if variance <= 0.0 or variance <= 1e-14 * m2:
        raise TailDataError("degenerate excess variance; insufficient tail data")
    return (m2 - 2.0 * m1 * m1) / (2.0 * variance)


def fit_gpd_pot(samples: Sequence[float], quantile: float = 0.99) -> tuple[float, float, float]:
    """Peaks-over-threshold fit by moments.

    The threshold is the empirical ``quantile`` of the samples; the shape
    comes from the excess-moment identity and the scale from
    sigma = mean_excess * (1 - shape). Returns (threshold, shape, scale).
    """
    data = np.asarray(samples, dtype=float)
    if data.size == 0:
        raise TailDataError("no samples")
    if not 0.0 < quantile < 1.0:
        raise ValueError("quantile must lie in (0, 1)")
    q = float(np.quantile(data, quantile))
    excesses = data[data > q] - q
    if excesses.size < 30:
        raise TailDataError(
            f"only {excesses.size} exceedances above the {quantile:.4g} quantile; need >= 30"
        )
    stats = ExceedanceMoments(threshold=q)
    stats.count = int(excesses.size)
    stats.mean_excess = float(np.mean(excesses))
    stats.second_moment = float(np.mean(excesses * excesses))
    xi = shape_from_moments(stats)
    sigma = stats.mean_excess * (1.0 - xi)
    return q, xi, sigma


def fit_gev_block_maxima(maxima: Sequence[float]) -> GevParams:
    """Fit a GEV to block maxima by probability-weighted moments.

    Uses the Hosking L-moment estimators with the rational approximation
    for the shape. Requires at least 50 maxima; all-equal input is
    degenerate. For short-tailed fits a sample beyond the fitted endpoint
    is reported via a warning, never hidden.
    """
    x = np.sort(np.asarray(maxima, dtype=float))
    n = x.size
    if n < 50:
        raise TailDataError(f"need at least 50 block maxima, got {n}")
    j = np.arange(1, n + 1, dtype=float)
    b0 = x.mean()
    b1 = float(np.sum((j - 1.0) / (n - 1.0) * x) / n)
    b2 = float(np.sum((j - 1.0) * (j - 2.0) / ((n - 1.0) * (n - 2.0)) * x) / n)
    l1 = b0
    l2 = 2.0 * b1 - b0
    l3 = 6.0 * b2 - 6.0 * b1 + b0
    if l2 <= 0.0:
        raise TailDataError("degenerate block maxima (zero L-scale)")
    t3 = l3 / l2
    c = 2.0 / (3.0 + t3) - math.log(2.0) / math.log(3.0)
    k = 7.8590 * c + 2.9554 * c * c  # k = -shape
    if abs(k) < SHAPE_ZERO_TOL:
        sigma = l2 / math.log(2.0)
        mu = l1 - _EULER_GAMMA * sigma
        params = GevParams(location=mu, scale=sigma, shape=0.0)
    else:
        gk = math.gamma(1.0 + k)
        sigma = l2 * k / ((1.0 - 2.0 ** (-k)) * gk)
        mu = l1 - sigma * (1.0 - gk) / k
        params = GevParams(location=mu, scale=sigma, shape=-k)
    violations = endpoint_violations(params, x)
    if violations:
        logger.warning(
            "GEV fit with shape %.4f leaves %d of %d samples beyond the "
            "fitted endpoint %.6g", params.shape, violations, n, params.endpoint
        )
    return params


def endpoint_violations(params: GevParams, samples: Sequence[float], rtol: float = 1e-9) -> int:
    """Number of samples beyond a finite fitted upper endpoint."""
    if params.shape >= -SHAPE_ZERO_TOL:
        return 0
    end = params.endpoint
    tol = rtol * max(abs(end), params.scale)
    return int(np.sum(np.asarray(samples, dtype=float) > end + tol))


def runs_extremal_index(series: Sequence[float], threshold: float, run_gap: int = 1) -> float:
    """Runs estimator of the extremal index.

    An exceedance starts a cluster when the preceding ``run_gap``
    observations are all at or below the threshold (the series start counts
    as such a gap). The estimate is the fraction of exceedances that start
    clusters, in (0, 1].
    """
    if run_gap < 1:
        raise ValueError("run gap must be >= 1")
    x = np.asarray(series, dtype=float)
    exceed = x > threshold
    total = int(exceed.sum())
    if total == 0:
        raise TailDataError("no exceedances above the threshold")
    starts = 0
    for i in np.flatnonzero(exceed):
        lo = max(0, i - run_gap)
        if not exceed[lo:i].any():
            starts += 1
    theta = starts / total
    return min(max(theta, 1.0 / x.size), 1.0)


def empirical_ccdf(samples: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Empirical tail function on the order statistics.

    Returns the ascending sorted values and tail probabilities
    1 - i/(n+1) at the i-th order statistic (Weibull plotting positions).
    """
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size == 0:
        raise ValueError("empirical CCDF of an empty sample")
    ranks = np.arange(1, x.size + 1, dtype=float)
    return x, 1.0 - ranks / (x.size + 1.0)


def ks_distance(samples: Sequence[float], params: GevParams) -> float:
    """Kolmogorov-Smirnov sup-gap between the sample and a GEV."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("KS distance of an empty sample")
    cdf = np.asarray(gev_cdf(params, x), dtype=float)
    ranks = np.arange(1, n + 1, dtype=float)
    d_plus = float(np.max(ranks / n - cdf))
    d_minus = float(np.max(cdf - (ranks - 1.0) / n))
    return max(d_plus, d_minus, 0.0)


def gev_from_pot(
    threshold: float,
    shape: float,
    scale: float,
    exceed_prob: float,
    block_size: int,
    extremal_index: float = 1.0,
) -> GevParams:
    """GEV of block maxima implied by a threshold model.

    With excesses over ``threshold`` following a generalized Pareto with
    the given shape/scale and exceedances occurring with probability
    ``exceed_prob`` per observation, the maximum of a block of
    ``block_size`` observations (declustered by the extremal index) is GEV
    with the same shape and rescaled location/scale.
    """
    if not 0.0 < exceed_prob <= 1.0:
        raise ValueError("exceedance probability must lie in (0, 1]")
    if block_size < 1:
        raise ValueError("block size must be >= 1")
    if not 0.0 < extremal_index <= 1.0:
        raise ValueError("extremal index must lie in (0, 1]")
    m_eff = extremal_index * block_size * exceed_prob
    if abs(shape) < SHAPE_ZERO_TOL:
        return GevParams(
            location=threshold + scale * math.log(m_eff), scale=scale, shape=0.0
        )
    return GevParams(
        location=threshold + scale * (m_eff ** shape - 1.0) / shape,
        scale=scale * m_eff ** shape,
        shape=shape,
    )


def write_ccdf_csv(path, z: np.ndarray, empirical: np.ndarray, fitted: np.ndarray) -> None:
    """Export (z, empirical_ccdf, fitted_gev_ccdf) rows for one block size."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["z", "empirical_ccdf", "fitted_gev_ccdf"])
        for zi, ei, fi in zip(z, empirical, fitted):
            writer.writerow([repr(float(zi)), repr(float(ei)), repr(float(fi))])

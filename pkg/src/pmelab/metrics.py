"""Reconstruction metrics and the summaries built on them.

All errors are computed on raw (destandardized) shape modifications, rows
being samples.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, UndefinedMetricError

__all__ = [
    "SweepCurve",
    "PerSampleErrors",
    "nmse",
    "per_sample_nse",
    "threshold_dimension",
    "relative_reduction",
    "error_pdf",
    "representative_sample",
    "median",
    "per_point_error",
]


@dataclass
class SweepCurve:
    method: str
    N: list = field(default_factory=list)
    eps: list = field(default_factory=list)
    dataset_hash: str = ""

    def __post_init__(self):
        if len(self.N) != len(self.eps):
            raise ContractError("N and eps must have the same length")
        if any(b <= a for a, b in zip(self.N, self.N[1:])):
            raise ContractError("N must be strictly increasing")
        if any(e < 0 for e in self.eps):
            raise ContractError("eps must be non-negative")


@dataclass
class PerSampleErrors:
    values: np.ndarray
    method: str
    N: int


def _residual_and_spread(D, D_hat):
    D = np.asarray(D, dtype=float)
    D_hat = np.asarray(D_hat, dtype=float)
    if D.shape != D_hat.shape or D.ndim != 2:
        raise ContractError(f"shape mismatch {D.shape} vs {D_hat.shape}")
    if D.shape[0] < 2:
        raise ContractError("need at least two samples")
    spread = float(np.sum((D - D.mean(axis=0)) ** 2))
    if spread == 0.0:
        raise UndefinedMetricError("all samples identical: normalization is zero")
    return np.sum((D - D_hat) ** 2, axis=1), spread


def nmse(D, D_hat):
    """Sum of squared reconstruction errors over the total spread about the mean."""
    res, spread = _residual_and_spread(D, D_hat)
    return float(np.sum(res) / spread)


def per_sample_nse(D, D_hat):
    """Per-sample squared error over the mean spread; averages to :func:`nmse`."""
    res, spread = _residual_and_spread(D, D_hat)
    return res / (spread / len(res))


def threshold_dimension(curve, tau):
    """Smallest listed N whose error is at most ``tau``; None if never reached."""
    if tau <= 0:
        raise ContractError("tau must be positive")
    if not curve.N:
        raise ContractError("empty curve")
    for n, e in zip(curve.N, curve.eps):
        if e <= tau:
            return n
    return None


def relative_reduction(eps_method, eps_pme):
    """``100 (1 - eps_method / eps_pme)`` per point.

    Returns ``(values, skipped)``; points where ``eps_pme == 0`` are NaN and
    their indices listed in ``skipped``.
    """
    a = np.asarray(eps_method, dtype=float)
    b = np.asarray(eps_pme, dtype=float)
    if a.shape != b.shape:
        raise ContractError("curves must share the N grid")
    out = np.full(a.shape, np.nan)
    ok = b != 0
    out[ok] = 100.0 * (1.0 - a[ok] / b[ok])
    return out, np.flatnonzero(~ok)


def error_pdf(values, n_bins=50, value_range=None):
    """Histogram density over ``value_range`` (default ``[0, max]``).

    Returns ``(density, edges)`` with ``sum(density * widths) == 1``.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ContractError("empty input")
    if n_bins < 1:
        raise ContractError("n_bins must be >= 1")
    if value_range is None:
        hi = float(v.max())
        value_range = (0.0, hi if hi > 0 else 1.0)
    return np.histogram(v, bins=n_bins, range=value_range, density=True)


def median(x):
    """Median; even lengths average the two central order statistics."""
    s = np.sort(np.asarray(x, dtype=float))
    n = len(s)
    return float(s[n // 2]) if n % 2 else 0.5 * float(s[n // 2 - 1] + s[n // 2])


def representative_sample(eps_a, eps_b):
    """Index whose mean of the two per-sample errors is closest to that score's median."""
    a = np.asarray(eps_a, dtype=float)
    b = np.asarray(eps_b, dtype=float)
    if a.size == 0:
        raise ContractError("empty input")
    if a.shape != b.shape:
        raise ContractError("error vectors must have equal length")
    combined = 0.5 * (a + b)
    return int(np.argmin(np.abs(combined - median(combined))))


def per_point_error(d, d_hat):
    """Euclidean error per surface point (xyz triplets)."""
    d = np.asarray(d, dtype=float)
    d_hat = np.asarray(d_hat, dtype=float)
    if d.shape != d_hat.shape:
        raise ContractError("shape mismatch")
    if d.shape[-1] % 3:
        raise ContractError("geometry length must be divisible by 3")
    diff = (d - d_hat).reshape(*d.shape[:-1], -1, 3)
    return np.sqrt(np.sum(diff**2, axis=-1))

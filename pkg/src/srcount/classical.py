"""Information-theoretic source-count baselines.

Eigenvalue forms of the AIC and MDL criteria: both score every hypothesis
k (number of sources) by how well the n-k smallest covariance eigenvalues
look equal, plus a complexity penalty, and pick the argmin.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .array_model import Frame
from .covariance import autocorrelation, eigvalsh, fbss
from .errors import DomainError

EIG_FLOOR = 1e-300


@dataclass
class CriterionCurve:
    """Criterion value per hypothesis k in [0, n-1]; argmin is the estimate."""

    values: np.ndarray
    argmin: int


def _validate_eigs(eigs: np.ndarray) -> np.ndarray:
    eigs = np.asarray(eigs, dtype=float)
    if eigs.ndim != 1 or eigs.size < 1:
        raise DomainError("expected a non-empty 1-D eigenvalue vector")
    tol = 1e-9 * max(1.0, float(np.abs(eigs).max()))
    if np.any(np.diff(eigs) > tol):
        raise DomainError("eigenvalues must be sorted descending")
    return np.maximum(eigs, 0.0)


def _log_mean_ratios(eigs: np.ndarray) -> np.ndarray:
    """ln(geometric mean / arithmetic mean) of each descending tail."""
    n = eigs.size
    floored = np.maximum(eigs, EIG_FLOOR)
    logs = np.log(floored)
    out = np.empty(n)
    for k in range(n):
        tail = n - k
        geo = logs[k:].sum() / tail
        arith = max(float(eigs[k:].sum() / tail), EIG_FLOOR)
        out[k] = geo - np.log(arith)
    return out


def aic(eigs: np.ndarray, snapshots: int) -> CriterionCurve:
    """Akaike information criterion over source-count hypotheses.

    AIC(k) = -2 N (n-k) ln(g_k / a_k) + 2 k (2n - k), where g_k and a_k are
    the geometric and arithmetic means of the n-k smallest eigenvalues.

    Args:
        eigs: Eigenvalues sorted descending, non-negative.
        snapshots: Number of snapshots N behind the covariance estimate.

    Returns:
        CriterionCurve whose argmin is the source-count estimate.
    """
    eigs = _validate_eigs(eigs)
    if snapshots < 1:
        raise DomainError("snapshots must be positive")
    n = eigs.size
    k = np.arange(n)
    values = -2.0 * snapshots * (n - k) * _log_mean_ratios(eigs) + 2.0 * k * (2 * n - k)
    return CriterionCurve(values, int(np.argmin(values)))


def mdl(eigs: np.ndarray, snapshots: int) -> CriterionCurve:
    """Minimum description length criterion over source-count hypotheses.

    MDL(k) = -N (n-k) ln(g_k / a_k) + 0.5 k (2n - k) ln N.
    """
    eigs = _validate_eigs(eigs)
    if snapshots < 1:
        raise DomainError("snapshots must be positive")
    n = eigs.size
    k = np.arange(n)
    penalty = 0.5 * k * (2 * n - k) * np.log(snapshots)
    values = -float(snapshots) * (n - k) * _log_mean_ratios(eigs) + penalty
    return CriterionCurve(values, int(np.argmin(values)))


_CRITERIA = {"mdl": mdl, "aic": aic}


def detect_classical(frame: Frame, method: str = "mdl",
                     fbss_subarray: Optional[int] = None) -> int:
    """Estimate the source count of a frame with MDL or AIC.

    Pipeline: sample autocorrelation, optional forward-backward smoothing,
    eigenvalues, criterion argmin.

    Args:
        frame: Sampled frame.
        method: "mdl" or "aic".
        fbss_subarray: Subarray size L0 to smooth with first, or None.

    Returns:
        Estimated source count in [0, n-1] for the (possibly smoothed)
        covariance side n.
    """
    try:
        criterion = _CRITERIA[method.lower()]
    except KeyError:
        raise DomainError(f"unknown criterion {method!r}") from None
    cov = autocorrelation(frame)
    if fbss_subarray is not None:
        cov = fbss(cov, fbss_subarray)
    return criterion(eigvalsh(cov), cov.snapshots).argmin

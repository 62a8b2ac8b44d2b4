"""Spatial covariance estimation, smoothing, and feature extraction.

The sample autocorrelation of a frame, its forward-backward spatially
smoothed variant (which restores rank lost to coherent multipath), the
normalized upper-triangle feature vector fed to the learned detectors,
and a Jacobi eigenvalue solver for the small Hermitian matrices involved.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .array_model import Frame
from .errors import DomainError, ShapeError

HERMITIAN_ATOL = 1e-12
EIG_CLAMP_FACTOR = 1e-10


@dataclass
class CovMatrix:
    """Hermitian spatial autocorrelation estimate.

    ``subarray``/``num_subarrays`` are set only on smoothed matrices.
    """

    data: np.ndarray
    snapshots: int
    subarray: Optional[int] = None
    num_subarrays: Optional[int] = None

    @property
    def size(self) -> int:
        return self.data.shape[0]

    @property
    def smoothed(self) -> bool:
        return self.subarray is not None


@dataclass
class FeatureVector:
    """Real feature vector of length n(n+1) for an n x n covariance."""

    values: np.ndarray
    normalization: str


def autocorrelation(frame: Frame) -> CovMatrix:
    """Sample spatial autocorrelation R = X X^H / N.

    Args:
        frame: Frame holding the L x N snapshot matrix.

    Returns:
        CovMatrix with an exactly Hermitian L x L estimate (symmetrized by
        averaging with its conjugate transpose).
    """
    x = frame.data
    if x.size == 0 or x.shape[1] < 1:
        raise DomainError("frame holds no snapshots")
    r = x @ x.conj().T / x.shape[1]
    r = 0.5 * (r + r.conj().T)
    return CovMatrix(r, snapshots=frame.snapshots)


def fbss(cov: CovMatrix, subarray_size: int) -> CovMatrix:
    """Forward-backward spatial smoothing over overlapped subarrays.

    Averages the K = L - L0 + 1 forward principal submatrices together with
    their exchange-conjugated (backward) counterparts, producing an L0 x L0
    matrix whose rank is restored in the presence of coherent replicas.

    Args:
        cov: Unsmoothed covariance of side L.
        subarray_size: Subarray dimension L0, with 2 <= L0 <= L.

    Returns:
        Smoothed CovMatrix of side L0 carrying the subarray bookkeeping.
    """
    if cov.smoothed:
        raise DomainError("covariance is already smoothed")
    L = cov.size
    L0 = subarray_size
    if L0 < 2 or L0 > L:
        raise DomainError(f"subarray size {L0} outside [2, {L}]")
    K = L - L0 + 1
    acc = np.zeros((L0, L0), dtype=complex)
    for k in range(K):
        fwd = cov.data[k:k + L0, k:k + L0]
        acc += fwd
        acc += fwd[::-1, ::-1].conj()  # J fwd* J: exchange-conjugate
    acc /= 2.0 * K
    acc = 0.5 * (acc + acc.conj().T)
    return CovMatrix(acc, snapshots=cov.snapshots, subarray=L0, num_subarrays=K)


def extract_features(cov: CovMatrix) -> FeatureVector:
    """Normalized upper-triangle features of a covariance matrix.

    Walks the upper triangle (diagonal included) in row-major order and
    interleaves the real and imaginary part of each entry, then scales the
    whole vector to unit Euclidean norm. An n x n input yields n(n+1)
    values; the diagonal contributes zeros in its imaginary slots.
    """
    n = cov.size
    iu, ju = np.triu_indices(n)
    # Re-symmetrizing pins the diagonal's imaginary slots at exactly zero.
    data = 0.5 * (cov.data + cov.data.conj().T)
    upper = data[iu, ju]
    values = np.empty(2 * upper.size)
    values[0::2] = upper.real
    values[1::2] = upper.imag
    norm = float(np.linalg.norm(values))
    if norm == 0.0:
        return FeatureVector(values, "zero")
    return FeatureVector(values / norm, "unit")


def features_to_matrix(values: np.ndarray, n: int) -> np.ndarray:
    """Rebuild the Hermitian matrix behind a feature vector (up to scale)."""
    values = np.asarray(values, dtype=float)
    if values.shape != (n * (n + 1),):
        raise ShapeError(f"expected {n * (n + 1)} values for side {n}, got {values.shape}")
    upper = values[0::2] + 1j * values[1::2]
    out = np.zeros((n, n), dtype=complex)
    iu, ju = np.triu_indices(n)
    out[iu, ju] = upper
    lower = np.tril_indices(n, -1)
    out[lower] = out.conj().T[lower]
    # Symmetrize the diagonal: stored imaginary slots may carry rounding.
    np.fill_diagonal(out, out.diagonal().real)
    return out


def eigvalsh(cov: CovMatrix) -> np.ndarray:
    """All eigenvalues of a Hermitian covariance, sorted descending.

    Uses cyclic Jacobi rotations; small negatives from roundoff (within
    1e-10 of the trace) are clamped to zero.
    """
    return eigvalsh_matrix(cov.data)


def eigvalsh_matrix(matrix: np.ndarray) -> np.ndarray:
    """Descending eigenvalues of an explicit Hermitian matrix."""
    a = np.asarray(matrix, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got {a.shape}")
    scale = max(1.0, float(np.abs(a).max(initial=0.0)))
    if np.abs(a - a.conj().T).max(initial=0.0) > HERMITIAN_ATOL * scale:
        raise DomainError("matrix is not Hermitian within tolerance")
    eigs = _jacobi_eigvals(a)
    eigs.sort()
    eigs = eigs[::-1]
    clamp = EIG_CLAMP_FACTOR * abs(float(np.trace(a).real))
    eigs[(eigs < 0.0) & (eigs >= -clamp)] = 0.0
    return eigs


def _jacobi_eigvals(a: np.ndarray, max_sweeps: int = 100) -> np.ndarray:
    """Cyclic Jacobi eigenvalues of a complex Hermitian matrix.

    Sweeps stop once the off-diagonal Frobenius mass drops below 1e-12 of
    the matrix scale. Rotations use the unitary 2 x 2 transform that zeroes
    the pivot entry, so Hermitian structure is preserved throughout.
    """
    a = a.astype(complex, copy=True)
    n = a.shape[0]
    if n == 1:
        return np.array([a[0, 0].real])
    scale = max(abs(float(np.trace(a).real)), float(np.abs(a).max()), 1e-300)
    tol = 1e-12 * scale
    for _ in range(max_sweeps):
        off = np.sqrt(2.0 * np.sum(np.abs(np.triu(a, 1)) ** 2))
        if off <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                r = abs(apq)
                if r <= 1e-300:
                    continue
                phase = apq / r
                theta = (a[q, q].real - a[p, p].real) / (2.0 * r)
                if theta >= 0.0:
                    t = 1.0 / (theta + np.hypot(1.0, theta))
                else:
                    t = -1.0 / (-theta + np.hypot(1.0, theta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # Columns p,q of A <- A U, then rows p,q of A <- U^H A.
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * np.conj(phase) * col_q
                a[:, q] = s * phase * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * phase * row_q
                a[q, :] = s * np.conj(phase) * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
    return np.ascontiguousarray(a.diagonal().real)

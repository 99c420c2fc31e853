"""Spectral denoising filters learned from weighted patch ensembles.

The filter is U diag(lambda) U^T: an orthonormal basis U obtained from the
eigendecomposition of the weighted second-moment matrix P W P^T of the
selected reference patches, and per-coordinate shrinkage factors lambda
chosen by one of several rules.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PatchEnsemble",
    "SpectralFilter",
    "LocalPrior",
    "l12_norm",
    "group_sparse_basis",
    "local_prior",
    "spectrum_oracle",
    "spectrum_bayes",
    "spectrum_penalized",
    "spectrum_bm3d_pilot",
    "spectrum_lpg",
    "apply_filter",
]


@dataclass(frozen=True)
class PatchEnsemble:
    """A d x k matrix of selected patches with normalized similarity weights.

    P: (d, k) float64, columns are the selected reference patches.
    weights: (k,) nonnegative, summing to 1.
    spatial_weights: optional (d,) strictly positive per-pixel emphasis.
    """

    P: np.ndarray
    weights: np.ndarray
    spatial_weights: np.ndarray | None = None

    def __post_init__(self):
        if self.P.ndim != 2 or self.P.shape[1] < 1:
            raise ValueError("P must be a (d, k) matrix with k >= 1")
        if self.weights.shape != (self.P.shape[1],):
            raise ValueError("weights must have one entry per patch column")
        if np.any(self.weights < 0) or not np.isclose(self.weights.sum(), 1.0):
            raise ValueError("weights must be nonnegative and sum to 1")
        if self.spatial_weights is not None:
            if self.spatial_weights.shape != (self.P.shape[0],):
                raise ValueError("spatial_weights must have one entry per pixel")
            if np.any(self.spatial_weights <= 0):
                raise ValueError("spatial_weights must be strictly positive")


@dataclass(frozen=True)
class SpectralFilter:
    """Orthonormal basis U, eigenvalues s (descending), shrinkage lam."""

    U: np.ndarray
    s: np.ndarray
    lam: np.ndarray


@dataclass(frozen=True)
class LocalPrior:
    """Weighted mean and covariance of the selected reference patches."""

    mu: np.ndarray
    Sigma: np.ndarray


def l12_norm(X) -> float:
    """Sum of the Euclidean norms of the rows of X."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return float(np.linalg.norm(X, axis=1).sum())


def _second_moment(ens: PatchEnsemble) -> np.ndarray:
    M = (ens.P * ens.weights[None, :]) @ ens.P.T
    if ens.spatial_weights is not None:
        r = np.sqrt(ens.spatial_weights)
        M = r[:, None] * M * r[None, :]
    return 0.5 * (M + M.T)  # kill floating-point asymmetry


def group_sparse_basis(ens: PatchEnsemble) -> tuple[np.ndarray, np.ndarray]:
    """Basis minimizing the l12 norm of the projected patch matrix.

    Eigendecomposes the symmetrized weighted second moment P W P^T (spatial
    weights applied as W_s^{1/2} P W P^T W_s^{1/2} when present). Returns
    (U, s) with eigenvalues sorted descending and clamped at zero.

    Each eigenvector's sign is fixed so its largest-magnitude component is
    positive; the filter U diag(lam) U^T is invariant to this choice.
    """
    M = _second_moment(ens)
    vals, vecs = np.linalg.eigh(M)
    order = np.argsort(vals, kind="stable")[::-1]
    s = np.maximum(vals[order], 0.0)
    U = vecs[:, order]
    anchors = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[anchors, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs[None, :], s


def local_prior(ens: PatchEnsemble) -> LocalPrior:
    """Weighted Gaussian prior fitted to the ensemble.

    mu = sum_j w_j p_j and Sigma = sum_j w_j (p_j - mu)(p_j - mu)^T, so that
    mu mu^T + Sigma = P W P^T exactly.
    """
    mu = ens.P @ ens.weights
    D = ens.P - mu[:, None]
    Sigma = (D * ens.weights[None, :]) @ D.T
    return LocalPrior(mu=mu, Sigma=0.5 * (Sigma + Sigma.T))


# ---------------------------------------------------------------------------
# Shrinkage rules
# ---------------------------------------------------------------------------


def _safe_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    # 0/0 (zero signal at sigma = 0) resolves to 0: the direction carries
    # no signal, so passing it through would only keep noise.
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den > 0)
    return out


def spectrum_oracle(U, p_true, sigma: float) -> np.ndarray:
    """Ground-truth shrinkage: lam_i = a_i^2 / (a_i^2 + sigma^2), a = U^T p."""
    a2 = (np.asarray(U).T @ np.asarray(p_true, dtype=np.float64)) ** 2
    return _safe_ratio(a2, a2 + sigma**2)


def spectrum_bayes(s, sigma: float) -> np.ndarray:
    """Bayes-optimal shrinkage for the ensemble prior: lam = s / (s + sigma^2)."""
    s = np.asarray(s, dtype=np.float64)
    return _safe_ratio(s, s + sigma**2)


def spectrum_penalized(s, sigma: float, gamma: float, alpha: int) -> np.ndarray:
    """Sparsity-penalized shrinkage; gamma = 0 reduces to spectrum_bayes.

    alpha = 1 soft-thresholds: lam = max((s - gamma/2) / (s + sigma^2), 0).
    alpha = 0 hard-thresholds: lam = s / (s + sigma^2) when
    s^2 / (s + sigma^2) > gamma, else 0.
    """
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    s = np.asarray(s, dtype=np.float64)
    den = s + sigma**2
    if alpha == 1:
        return np.maximum(_safe_ratio(s - gamma / 2.0, den), 0.0)
    if alpha == 0:
        keep = _safe_ratio(s * s, den) > gamma
        return np.where(keep, _safe_ratio(s, den), 0.0)
    raise ValueError(f"alpha must be 0 or 1, got {alpha}")


def spectrum_bm3d_pilot(U, pbar, sigma: float) -> np.ndarray:
    """Pilot-estimate shrinkage: the oracle rule evaluated at pbar."""
    return spectrum_oracle(U, pbar, sigma)


def spectrum_lpg(U, q, sigma: float) -> np.ndarray:
    """Noisy-coefficient shrinkage lam = (t - sigma^2) / t, t = (U^T q)^2.

    The raw value is negative when t < sigma^2; it is clamped to [0, 1]
    since any lam outside that range only increases the expected MSE.
    """
    t = (np.asarray(U).T @ np.asarray(q, dtype=np.float64)) ** 2
    return np.clip(_safe_ratio(t - sigma**2, t), 0.0, 1.0)


def apply_filter(f: SpectralFilter, q) -> np.ndarray:
    """Apply U diag(lam) U^T to the patch q."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (f.U.shape[0],):
        raise ValueError(f"patch shape {q.shape} does not match basis {f.U.shape}")
    return f.U @ (f.lam * (f.U.T @ q))

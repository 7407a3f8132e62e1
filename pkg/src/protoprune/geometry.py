"""Unit-sphere primitives shared by the prototype and scoring code.

Every function works on float64 numpy arrays. Single points are 1-D
arrays; most functions also broadcast over a leading batch axis.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatch, ZeroVector

ZERO_NORM = 1e-12


@dataclass(frozen=True)
class HypersphereConfig:
    """Shared vMF concentration ``kappa`` and softmax temperature ``tau``."""

    dim: int
    kappa: float = 1.0
    tau: float = 1e-4

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError(f"dim must be >= 2, got {self.dim}")
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")


def _check_same_dim(a, b):
    if a.shape[-1] != b.shape[-1]:
        raise DimensionMismatch(f"dimension {a.shape[-1]} != {b.shape[-1]}")


def project_to_sphere(raw):
    """Divide ``raw`` (or each row of it) by its Euclidean norm."""
    raw = np.asarray(raw, dtype=np.float64)
    norm = np.linalg.norm(raw, axis=-1, keepdims=True)
    if np.any(norm < ZERO_NORM):
        raise ZeroVector("cannot project a (near-)zero vector onto the sphere")
    return raw / norm


def angular_affinity(p, z, kappa):
    """exp(kappa * <p, z>); the vMF kernel, increasing in similarity."""
    p = np.asarray(p, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    _check_same_dim(p, z)
    return np.exp(kappa * np.sum(p * z, axis=-1))


def angular_distance(p, z, kappa):
    """exp(-kappa * <p, z>): positive and strictly decreasing in similarity."""
    p = np.asarray(p, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    _check_same_dim(p, z)
    return np.exp(-kappa * np.sum(p * z, axis=-1))


def mahalanobis_sq(z, p, cov_inv):
    """Squared Mahalanobis distance (z - p)^T cov_inv (z - p)."""
    z = np.asarray(z, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    cov_inv = np.asarray(cov_inv, dtype=np.float64)
    _check_same_dim(z, p)
    if cov_inv.shape != (z.shape[-1], z.shape[-1]):
        raise DimensionMismatch(
            f"cov_inv shape {cov_inv.shape} does not match dimension {z.shape[-1]}"
        )
    diff = z - p
    return np.einsum("...i,ij,...j->...", diff, cov_inv, diff)


def regularized_cov_inverse(points, ridge=1e-3):
    """Inverse of the population covariance of ``points`` plus ``ridge * I``.

    The divisor is the point count, so a single point yields ``I / ridge``.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.shape[0] < 1:
        raise ValueError("need at least one point")
    if not ridge > 0:
        raise ValueError(f"ridge must be positive, got {ridge}")
    centered = points - points.mean(axis=0)
    cov = centered.T @ centered / points.shape[0]
    reg = cov + ridge * np.eye(points.shape[1])
    inv = np.linalg.inv(reg)
    # symmetrize away round-off
    return 0.5 * (inv + inv.T)

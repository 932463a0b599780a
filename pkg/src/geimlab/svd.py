"""
Snapshot SVD in a weighted inner product and best-fit baselines.

Singular values are those of the weighted snapshot operator ``C U^T``, where
C is the metric factor of the mask/product pair; they coincide with the
square roots of the snapshot Gram eigenvalues but stay accurate far below
``sqrt(eps)`` relative to the first one.
"""

import logging
from typing import List, Sequence, Union

import numpy as np
import pandas as pd
from scipy.linalg import lstsq, svd

from .errors import GridMismatch, SizeMismatch
from .fieldcore import Field, Product, SubdomainMask, norm, stack_fields

logger = logging.getLogger(__name__)

RANK_TOL = 1e-14


class SvdResult:
    """
    Spectrum and orthonormal modes of a snapshot set.

    Attributes:
        product (Product): Inner product the modes are orthonormal in
        mask (SubdomainMask): Subdomain of the inner product
        singular_values (np.ndarray): Nonincreasing, one per snapshot
        mode_values (np.ndarray): (rank, n_nodes) orthonormal modes
    """

    def __init__(
        self,
        product: Union[str, Product],
        mask: SubdomainMask,
        singular_values: np.ndarray,
        mode_values: np.ndarray,
    ):
        self.product = Product.parse(product)
        self.mask = mask
        self.grid = mask.grid
        self.singular_values = np.asarray(singular_values, dtype=float)
        self.mode_values = np.asarray(mode_values, dtype=float).reshape(
            -1, self.grid.n_nodes
        )
        self.singular_values.setflags(write=False)
        self.mode_values.setflags(write=False)
        self._weighted_modes = np.asarray(
            mask.factor(self.product) @ self.mode_values.T
        )

    @property
    def rank(self) -> int:
        return self.mode_values.shape[0]

    @property
    def modes(self) -> List[Field]:
        return [Field(self.grid, row) for row in self.mode_values]

    def __repr__(self) -> str:
        return (
            f"SvdResult({self.product.value} on {self.mask.name}, "
            f"{self.singular_values.size} values, rank {self.rank})"
        )

    def spectrum(self) -> pd.DataFrame:
        """Table of (index, singular_value), 1-based."""
        return pd.DataFrame(
            {
                "index": np.arange(1, self.singular_values.size + 1),
                "singular_value": self.singular_values,
            }
        )


def _orthonormalise(Z: np.ndarray, modes: np.ndarray) -> int:
    """Two Gram-Schmidt passes in the metric; returns how many modes survive."""
    for k in range(Z.shape[1]):
        for _ in range(2):
            coef = Z[:, :k].T @ Z[:, k]
            Z[:, k] -= Z[:, :k] @ coef
            modes[k] -= coef @ modes[:k]
        length = np.linalg.norm(Z[:, k])
        if length < 0.5:
            return k
        Z[:, k] /= length
        modes[k] /= length
    return Z.shape[1]


def snapshot_svd(
    snapshots: Sequence[Field],
    mask: SubdomainMask,
    product: Union[str, Product] = Product.L2,
) -> SvdResult:
    """SVD of the snapshot set restricted to ``mask`` in ``product``.

    Modes are kept for singular values above ``1e-14`` times the first one.
    """
    product = Product.parse(product)
    U = stack_fields(snapshots, mask)
    W = np.asarray(mask.factor(product) @ U.T)
    _, s, vh = svd(W, full_matrices=False, lapack_driver="gesvd")
    values = np.zeros(len(snapshots))
    values[: s.size] = s

    # Lift the right singular vectors back to modes on the grid
    rank = int(np.sum(s > RANK_TOL * s[0])) if s[0] > 0 else 0
    modes = (vh[:rank] @ U) / s[:rank, np.newaxis]
    Z = np.asarray(mask.factor(product) @ modes.T)
    rank = _orthonormalise(Z, modes)
    logger.info(
        "Snapshot SVD (%s on %s): %d snapshots, rank %d",
        product.value,
        mask.name,
        len(snapshots),
        rank,
    )
    return SvdResult(product, mask, values, modes[:rank])


def best_fit_error(result: SvdResult, field: Field, M: int) -> float:
    """Distance from ``field`` to the span of the first M modes.

    M beyond the rank uses every mode.
    """
    if M < 0:
        raise SizeMismatch(f"M must be nonnegative, got {M}")
    if field.grid != result.grid:
        raise GridMismatch(f"{result.grid!r} != {field.grid!r}")
    weighted = result.mask.factor(result.product) @ field.values
    Z = result._weighted_modes[:, : min(M, result.rank)]
    residual = weighted - Z @ (Z.T @ weighted)
    return float(np.linalg.norm(residual))


def best_fit_errors(
    result: SvdResult, fields: Sequence[Field], M: int
) -> np.ndarray:
    """:func:`best_fit_error` for every field of a list, vectorised."""
    if M < 0:
        raise SizeMismatch(f"M must be nonnegative, got {M}")
    weighted = np.asarray(
        result.mask.factor(result.product) @ stack_fields(fields).T
    )
    Z = result._weighted_modes[:, : min(M, result.rank)]
    return np.linalg.norm(weighted - Z @ (Z.T @ weighted), axis=0)


def project_span_error(
    basis: Sequence[Field],
    field: Field,
    mask: SubdomainMask,
    product: Union[str, Product] = Product.L2,
) -> float:
    """Distance from ``field`` to span(basis) in ``product`` on ``mask``."""
    if len(basis) == 0:
        return norm(field, mask, product)
    if field.grid != mask.grid:
        raise GridMismatch(f"{mask.grid!r} != {field.grid!r}")
    C = mask.factor(product)
    A = np.asarray(C @ stack_fields(basis).T)
    b = C @ field.values
    coef = lstsq(A, b)[0]
    return float(np.linalg.norm(b - A @ coef))

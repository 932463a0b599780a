"""
Classical empirical interpolation.

Greedy selection of magic points and nested interpolation bases from a
finite training set of fields, with Lagrange functions and the L-infinity
Lebesgue constant of the resulting interpolation operator.
"""

import logging
from typing import List, Optional, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DegenerateSnapshot, SizeMismatch
from .fieldcore import Field, SubdomainMask, stack_fields

logger = logging.getLogger(__name__)


class EimModel:
    """
    Magic points, basis functions and collocation matrix of an EIM build.

    Attributes:
        mask (SubdomainMask): Subdomain the sup norms are taken over
        points (np.ndarray): Selected node indices x_1..x_M
        basis_values (np.ndarray): (M, n_nodes) array of q_1..q_M
        B (np.ndarray): Collocation matrix, ``B[i, j] = q_j(x_i)``
        selected_snapshots (np.ndarray): Training index picked at each step
        history (np.ndarray): Worst training sup-norm error with m basis
            functions, m = 0..M
    """

    def __init__(
        self,
        mask: SubdomainMask,
        points: Sequence[int],
        basis_values: np.ndarray,
        B: np.ndarray,
        selected_snapshots: Sequence[int],
        history: Sequence[float],
    ):
        self.mask = mask
        self.grid = mask.grid
        self.points = np.asarray(points, dtype=np.int64)
        self.basis_values = np.asarray(basis_values, dtype=float).reshape(
            len(self.points), self.grid.n_nodes
        )
        self.B = np.asarray(B, dtype=float).reshape(len(self.points), len(self.points))
        self.selected_snapshots = np.asarray(selected_snapshots, dtype=np.int64)
        self.history = np.asarray(history, dtype=float)
        for array in (
            self.points,
            self.basis_values,
            self.B,
            self.selected_snapshots,
            self.history,
        ):
            array.setflags(write=False)

    @property
    def size(self) -> int:
        return len(self.points)

    def __len__(self) -> int:
        return self.size

    def __repr__(self) -> str:
        return f"EimModel(M={self.size}, mask={self.mask.name})"

    @property
    def basis(self) -> List[Field]:
        return [Field(self.grid, row) for row in self.basis_values]

    def truncate(self, M: int) -> "EimModel":
        """Model built from the first M greedy steps."""
        _check_dimension(self.size, M)
        return EimModel(
            self.mask,
            self.points[:M],
            self.basis_values[:M],
            self.B[:M, :M],
            self.selected_snapshots[:M],
            self.history[: M + 1],
        )


def _check_dimension(size: int, M: int) -> None:
    if M < 0 or M > size:
        raise SizeMismatch(f"requested M={M}, model holds {size} functions")


def _sup_norms(values: np.ndarray, mask: SubdomainMask) -> np.ndarray:
    return np.max(np.abs(values[:, mask.nodes]), axis=1)


def eim_build(
    snapshots: Sequence[Field],
    mask: SubdomainMask,
    M_max: int,
    tol: float = 1e-12,
) -> EimModel:
    """Run the EIM greedy over a finite training set.

    Args:
        snapshots: Training fields
        mask: Subdomain for the sup norms and candidate points
        M_max: Upper bound on the number of basis functions
        tol: Stop once the worst training error is at most ``tol`` times the
            largest snapshot sup norm

    Returns:
        EimModel with up to M_max functions

    Raises:
        DegenerateSnapshot: If every snapshot vanishes on the mask
    """
    if M_max < 1:
        raise SizeMismatch(f"M_max must be at least 1, got {M_max}")
    U = stack_fields(snapshots, mask)
    scale = float(np.max(_sup_norms(U, mask)))
    if scale < tol:
        raise DegenerateSnapshot(f"largest snapshot sup norm {scale:.3e} < tol")

    points: List[int] = []
    basis: List[np.ndarray] = []
    chosen: List[int] = []
    history: List[float] = []
    residual = U

    while True:
        errors = _sup_norms(residual, mask)
        worst = int(np.argmax(errors))
        history.append(float(errors[worst]))
        logger.debug(
            "EIM step %d: worst error %.3e (snapshot %d)",
            len(points),
            errors[worst],
            worst,
        )
        if history[-1] <= tol * scale or len(points) >= M_max:
            break

        # Magic point: largest entry of the worst residual
        r = residual[worst]
        x = int(mask.nodes[np.argmax(np.abs(r[mask.nodes]))])
        q = r / r[x]
        q[points] = 0.0
        q[x] = 1.0
        points.append(x)
        basis.append(q)
        chosen.append(worst)

        # Re-interpolate the training set
        Q = np.vstack(basis)
        B = np.tril(Q[:, points].T)
        coefficients = solve_triangular(
            B, U[:, points].T, lower=True, unit_diagonal=True
        )
        residual = U - coefficients.T @ Q
        residual[:, points] = 0.0

    Q = np.vstack(basis) if basis else np.zeros((0, mask.grid.n_nodes))
    B = np.tril(Q[:, points].T) if basis else np.zeros((0, 0))
    np.fill_diagonal(B, 1.0)
    logger.info("EIM built %d functions, final error %.3e", len(points), history[-1])
    return EimModel(mask, points, Q, B, chosen, history)


def _coefficients(model: EimModel, M: int, values: np.ndarray) -> np.ndarray:
    _check_dimension(model.size, M)
    values = np.asarray(values, dtype=float)
    if values.shape[0] != M:
        raise SizeMismatch(f"expected {M} point values, got {values.shape[0]}")
    if M == 0:
        return np.zeros((0,) + values.shape[1:])
    return solve_triangular(model.B[:M, :M], values, lower=True, unit_diagonal=True)


def eim_interpolate(model: EimModel, M: int, point_values: Sequence[float]) -> Field:
    """Interpolant in span(q_1..q_M) matching ``point_values`` at x_1..x_M."""
    alpha = _coefficients(model, M, np.asarray(point_values))
    return Field(model.grid, alpha @ model.basis_values[:M])


def eim_reconstruct(model: EimModel, field: Field, M: Optional[int] = None) -> Field:
    """Sample ``field`` at the first M magic points and interpolate."""
    M = model.size if M is None else M
    return eim_interpolate(model, M, field.values[model.points[:M]])


def eim_error(model: EimModel, field: Field, M: Optional[int] = None) -> float:
    """Sup norm on the model mask of ``field - I_M[field]``."""
    diff = field.values - eim_reconstruct(model, field, M).values
    return float(np.max(np.abs(diff[model.mask.nodes])))


def lagrange_functions(model: EimModel, M: int) -> List[Field]:
    """Cardinal functions h_i with h_i(x_j) = delta_ij."""
    _check_dimension(model.size, M)
    inverse = solve_triangular(
        model.B[:M, :M], np.eye(M), lower=True, unit_diagonal=True
    )
    H = inverse.T @ model.basis_values[:M]
    return [Field(model.grid, row) for row in H]


def lebesgue_linf(model: EimModel, M: int) -> float:
    """Max over mask nodes of sum_i |h_i(x)|."""
    if M == 0:
        return 0.0
    H = np.vstack([h.values for h in lagrange_functions(model, M)])
    return float(np.max(np.sum(np.abs(H[:, model.mask.nodes]), axis=0)))

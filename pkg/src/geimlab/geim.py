"""
Generalized empirical interpolation.

The greedy co-selects basis functions from a training set and linear forms
from a sensor dictionary. The interpolant of a field is the element of the
span of the selected functions whose selected sensor readings match those of
the field; the collocation matrix is lower triangular with unit diagonal, so
every reconstruction is a forward substitution.
"""

import logging
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np
from scipy.linalg import eigvalsh, qr, solve_triangular

from .errors import (
    DegenerateResidual,
    DegenerateSnapshot,
    DictionaryExhausted,
    SizeMismatch,
)
from .fieldcore import Field, Product, SubdomainMask, norm, row_norms, stack_fields
from .sensors import Dictionary

logger = logging.getLogger(__name__)

#: Readings below this fraction of the residual norm count as blind sensors.
BLIND_SENSOR_RATIO = 1e-14

#: Smallest admissible eigenvalue ratio of the normalised basis Gram matrix.
GRAM_RATIO = 1e-12


class GeimModel:
    """
    Selected sensors, basis functions and collocation matrix of a GEIM build.

    Attributes:
        dictionary (Dictionary): Candidate set the sensors were drawn from
        mask (SubdomainMask): Subdomain of the greedy norms; basis functions
            vanish off it
        product (Product): Inner product of the greedy norms
        sensor_ids (np.ndarray): Selected sensor ids sigma_1..sigma_M
        basis_values (np.ndarray): (M, n_nodes) array of q_1..q_M
        B (np.ndarray): ``B[i, j] = sigma_i(q_j)``, lower unit triangular
        selected_snapshots (np.ndarray): Training index picked at each step
        history (np.ndarray): Worst training error with m basis functions,
            m = 0..M, in ``product`` on ``mask``
    """

    def __init__(
        self,
        dictionary: Dictionary,
        mask: SubdomainMask,
        product: Union[str, Product],
        sensor_ids: Sequence[int],
        basis_values: np.ndarray,
        B: np.ndarray,
        selected_snapshots: Sequence[int],
        history: Sequence[float],
    ):
        self.dictionary = dictionary
        self.mask = mask
        self.grid = mask.grid
        self.product = Product.parse(product)
        self.sensor_ids = np.asarray(sensor_ids, dtype=np.int64)
        size = len(self.sensor_ids)
        self.basis_values = np.asarray(basis_values, dtype=float).reshape(
            size, self.grid.n_nodes
        )
        self.B = np.asarray(B, dtype=float).reshape(size, size)
        self.selected_snapshots = np.asarray(selected_snapshots, dtype=np.int64)
        self.history = np.asarray(history, dtype=float)
        for array in (
            self.sensor_ids,
            self.basis_values,
            self.B,
            self.selected_snapshots,
            self.history,
        ):
            array.setflags(write=False)

    @property
    def size(self) -> int:
        return len(self.sensor_ids)

    def __len__(self) -> int:
        return self.size

    def __repr__(self) -> str:
        return (
            f"GeimModel(M={self.size}, mask={self.mask.name}, "
            f"product={self.product.value})"
        )

    @property
    def basis(self) -> List[Field]:
        return [Field(self.grid, row) for row in self.basis_values]

    def truncate(self, M: int) -> "GeimModel":
        """Model built from the first M greedy steps."""
        _check_dimension(self.size, M)
        return GeimModel(
            self.dictionary,
            self.mask,
            self.product,
            self.sensor_ids[:M],
            self.basis_values[:M],
            self.B[:M, :M],
            self.selected_snapshots[:M],
            self.history[: M + 1],
        )

    def sensor_rows(self, M: Optional[int] = None) -> np.ndarray:
        """Dense coefficient rows of the first M selected sensors."""
        M = self.size if M is None else M
        return self.dictionary.rows(self.sensor_ids[:M]).toarray()


def _check_dimension(size: int, M: int) -> None:
    if M < 0 or M > size:
        raise SizeMismatch(f"requested M={M}, model holds {size} functions")


def gram_ratio(
    basis_values: np.ndarray,
    mask: SubdomainMask,
    product: Union[str, Product] = Product.L2,
) -> float:
    """Smallest over largest eigenvalue of the normalised basis Gram matrix.

    Each function is scaled to unit norm first, so the ratio only measures
    how close the basis is to linear dependence.
    """
    W = np.asarray(mask.factor(product) @ np.atleast_2d(basis_values).T)
    lengths = np.linalg.norm(W, axis=0)
    if np.any(lengths == 0.0):
        return 0.0
    W = W / lengths
    eigenvalues = eigvalsh(W.T @ W)
    return float(max(eigenvalues[0], 0.0) / eigenvalues[-1])


class _Greedy:
    """Running state shared by the free and the prescribed greedy."""

    def __init__(
        self,
        snapshots: Sequence[Field],
        dictionary: Dictionary,
        mask: SubdomainMask,
        product: Union[str, Product],
        tol: float,
    ):
        if dictionary.grid != mask.grid:
            raise ValueError("dictionary and mask live on different grids")
        if not np.all(mask.indicator[dictionary.subdomain.nodes]):
            raise ValueError(
                f"sensors on '{dictionary.subdomain.name}' reach outside "
                f"the norm mask '{mask.name}'"
            )
        self.dictionary = dictionary
        self.mask = mask
        self.product = Product.parse(product)
        self.U = stack_fields(snapshots, mask)
        self.readings = dictionary.measure(self.U)
        self.scale = float(np.max(row_norms(self.U, mask, self.product)))
        if self.scale < tol:
            raise DegenerateSnapshot(f"largest snapshot norm {self.scale:.3e} < tol")
        self.residual = self.U
        self.sensors: List[int] = []
        self.basis: List[np.ndarray] = []
        self.chosen: List[int] = []
        self.history: List[float] = []

    def errors(self) -> np.ndarray:
        return row_norms(self.residual, self.mask, self.product)

    def collocation(self) -> np.ndarray:
        Q = np.vstack(self.basis)
        # Entries above the diagonal vanish by construction; drop round-off
        B = np.tril(self.dictionary.rows(self.sensors) @ Q.T)
        np.fill_diagonal(B, 1.0)
        return B

    def add(self, snapshot: int, sensor: int, residual_norm: float) -> None:
        r = self.residual[snapshot]
        reading = float(self.dictionary.measure(r[np.newaxis, :], [sensor])[0, 0])
        if abs(reading) < BLIND_SENSOR_RATIO * residual_norm:
            raise DegenerateResidual(
                f"sensor {sensor} reads {reading:.3e} on a residual of norm "
                f"{residual_norm:.3e}"
            )
        self.basis.append(r / reading)
        self.sensors.append(sensor)
        self.chosen.append(snapshot)
        self.check_independent()

        # Re-interpolate every snapshot with the enlarged basis
        Q = np.vstack(self.basis)
        alpha = solve_triangular(
            self.collocation(),
            self.readings[self.sensors],
            lower=True,
            unit_diagonal=True,
        )
        self.residual = self.U - alpha.T @ Q

    def check_independent(self) -> None:
        ratio = gram_ratio(np.vstack(self.basis), self.mask, self.product)
        if ratio <= GRAM_RATIO:
            raise DegenerateResidual(
                f"basis of size {len(self.basis)} is not linearly independent "
                f"(Gram eigenvalue ratio {ratio:.3e})"
            )

    def model(self) -> GeimModel:
        n = self.mask.grid.n_nodes
        if self.basis:
            Q, B = np.vstack(self.basis), self.collocation()
        else:
            Q, B = np.zeros((0, n)), np.zeros((0, 0))
        return GeimModel(
            self.dictionary,
            self.mask,
            self.product,
            self.sensors,
            Q,
            B,
            self.chosen,
            self.history,
        )


def geim_build(
    snapshots: Sequence[Field],
    dictionary: Dictionary,
    mask: SubdomainMask,
    product: Union[str, Product] = Product.L2,
    M_max: int = 15,
    tol: float = 1e-12,
    exclude: Optional[Iterable[int]] = None,
) -> GeimModel:
    """Run the GEIM greedy.

    At each step the training field worst approximated by the current
    interpolant is picked, then the unused sensor reading its residual
    most strongly; the residual scaled to a unit reading becomes the next
    basis function.

    Args:
        snapshots: Training fields
        dictionary: Candidate sensors; their supports must lie in ``mask``
        mask: Subdomain of the greedy norms
        product: "L2" or "H1"
        M_max: Upper bound on the number of basis functions
        tol: Stop once the worst training error is at most ``tol`` times the
            largest snapshot norm
        exclude: Sensor ids that may not be selected

    Returns:
        GeimModel with up to M_max functions

    Raises:
        DegenerateSnapshot: If every snapshot vanishes on the mask
        DegenerateResidual: If no sensor can see the worst residual or the
            basis stops being linearly independent
        DictionaryExhausted: If no candidate sensor is left
    """
    if M_max < 1:
        raise SizeMismatch(f"M_max must be at least 1, got {M_max}")
    state = _Greedy(snapshots, dictionary, mask, product, tol)
    blocked = np.zeros(len(dictionary), dtype=bool)
    # Sensors already used by other series are never candidates
    if exclude is not None:
        blocked[np.fromiter(exclude, dtype=np.int64)] = True

    while True:
        errors = state.errors()
        worst = int(np.argmax(errors))
        state.history.append(float(errors[worst]))
        logger.debug(
            "GEIM step %d: worst error %.3e (snapshot %d)",
            len(state.sensors),
            errors[worst],
            worst,
        )
        # Stop on the relative tolerance or the budget
        if state.history[-1] <= tol * state.scale or len(state.sensors) >= M_max:
            break
        if blocked.all():
            raise DictionaryExhausted(
                f"no candidate sensor left after {len(state.sensors)} selections"
            )
        # Unused sensor with the strongest reading of the worst residual
        readings = np.abs(
            dictionary.measure(state.residual[worst][np.newaxis, :])[:, 0]
        )
        readings[blocked] = -1.0
        sensor = int(np.argmax(readings))
        state.add(worst, sensor, float(errors[worst]))
        blocked[sensor] = True

    logger.info(
        "GEIM (%s on %s) built %d functions, final error %.3e",
        state.product.value,
        mask.name,
        len(state.sensors),
        state.history[-1],
    )
    return state.model()


def geim_from_selection(
    snapshots: Sequence[Field],
    dictionary: Dictionary,
    mask: SubdomainMask,
    snapshot_choices: Sequence[int],
    sensor_choices: Sequence[int],
    product: Union[str, Product] = Product.L2,
) -> GeimModel:
    """Run the GEIM recursion with prescribed snapshot and sensor choices.

    Used to compare against another interpolation scheme on a shared
    selection, e.g. EIM magic points mapped to a Dirac dictionary.
    """
    if len(snapshot_choices) != len(sensor_choices):
        raise SizeMismatch("one sensor per selected snapshot is required")
    if len(set(sensor_choices)) != len(sensor_choices):
        raise ValueError("sensor choices must be distinct")
    state = _Greedy(snapshots, dictionary, mask, product, 0.0)
    for snapshot, sensor in zip(snapshot_choices, sensor_choices):
        errors = state.errors()
        state.history.append(float(np.max(errors)))
        state.add(int(snapshot), int(sensor), float(errors[snapshot]))
    state.history.append(float(np.max(state.errors())))
    return state.model()


def geim_coefficients(
    model: GeimModel, M: int, measurements: Sequence[float]
) -> np.ndarray:
    """Coefficients alpha with ``B[:M, :M] alpha = measurements``.

    ``measurements`` may also be an (M, K) array of K reading vectors.
    """
    _check_dimension(model.size, M)
    values = np.asarray(measurements, dtype=float)
    if values.shape[0] != M:
        raise SizeMismatch(f"expected {M} measurements, got {values.shape[0]}")
    if M == 0:
        return np.zeros((0,) + values.shape[1:])
    return solve_triangular(model.B[:M, :M], values, lower=True, unit_diagonal=True)


def geim_interpolate(model: GeimModel, M: int, measurements: Sequence[float]) -> Field:
    """Element of span(q_1..q_M) reproducing ``measurements`` on sigma_1..sigma_M."""
    alpha = geim_coefficients(model, M, measurements)
    return Field(model.grid, alpha @ model.basis_values[:M])


def geim_reconstruct(model: GeimModel, field: Field, M: Optional[int] = None) -> Field:
    """Measure ``field`` with the first M selected sensors and interpolate."""
    M = model.size if M is None else M
    _check_dimension(model.size, M)
    readings = model.dictionary.measure(field, model.sensor_ids[:M])
    return geim_interpolate(model, M, readings)


def geim_error(
    model: GeimModel,
    field: Field,
    M: int,
    product: Optional[Union[str, Product]] = None,
) -> float:
    """Norm on the model mask of ``field - J_M[field]``."""
    product = model.product if product is None else product
    return norm(field - geim_reconstruct(model, field, M), model.mask, product)


def geim_errors(
    model: GeimModel,
    fields: Sequence[Field],
    M: int,
    product: Optional[Union[str, Product]] = None,
) -> np.ndarray:
    """:func:`geim_error` for every field of a list, vectorised."""
    product = model.product if product is None else product
    U = stack_fields(fields)
    readings = model.dictionary.measure(U, model.sensor_ids[:M])
    alpha = geim_coefficients(model, M, readings)
    return row_norms(U - alpha.T @ model.basis_values[:M], model.mask, product)


def lebesgue_empirical(
    model: GeimModel,
    M: int,
    test_fields: Sequence[Field],
    product: Optional[Union[str, Product]] = None,
) -> float:
    """Largest observed ratio ``||J_M[u]|| / ||u||`` over ``test_fields``."""
    product = model.product if product is None else product
    U = stack_fields(test_fields)
    norms = row_norms(U, model.mask, product)
    keep = norms > 0
    if not keep.any():
        return 0.0
    if M == 0:
        return 0.0
    readings = model.dictionary.measure(U[keep], model.sensor_ids[:M])
    alpha = geim_coefficients(model, M, readings)
    images = alpha.T @ model.basis_values[:M]
    return float(np.max(row_norms(images, model.mask, product) / norms[keep]))


def lebesgue_exact(
    model: GeimModel, M: int, product: Optional[Union[str, Product]] = None
) -> float:
    """Operator norm of J_M over all fields supported on the model mask.

    With C the mask metric factor, G = C^T C, S the sensor rows and Q the
    basis restricted to mask nodes, J_M = Q^T B^-1 S and
    ``||J_M||^2 = lambda_max(R D R^T)`` where ``R^T R = Q G Q^T`` and
    ``D = (B^-1 S) G^-1 (B^-1 S)^T``.
    """
    _check_dimension(model.size, M)
    if M == 0:
        return 0.0
    product = model.product if product is None else product
    nodes = model.mask.nodes
    C = model.mask.local_factor(product)
    lu = model.mask.local_metric_lu(product)

    coupling = solve_triangular(
        model.B[:M, :M],
        model.sensor_rows(M)[:, nodes],
        lower=True,
        unit_diagonal=True,
    )
    D = coupling @ lu.solve(np.ascontiguousarray(coupling.T))
    R = qr(np.asarray(C @ model.basis_values[:M, nodes].T), mode="r")[0][:M]
    eigenvalues = eigvalsh(R @ D @ R.T)
    return float(np.sqrt(max(eigenvalues[-1], 0.0)))


def pessimistic_bound(
    model: GeimModel, M: int, product: Union[str, Product] = Product.L2
) -> float:
    """``2^(M-1) * max_i ||q_i||`` over the first M basis functions."""
    _check_dimension(model.size, M)
    if M == 0:
        return 0.0
    norms = row_norms(model.basis_values[:M], model.mask, product)
    return float(2.0 ** (M - 1) * np.max(norms))

"""
Dictionaries of linear forms.

A moment sensor is ``sigma(phi) = integral of phi * w`` with a compactly
supported kernel ``w`` normalised to unit L2 norm; a Dirac sensor evaluates a
field at one node. Both are stored as sparse coefficient rows, so applying a
sensor is a sparse dot product with the nodal values.
"""

import logging
from enum import Enum
from functools import cached_property
from typing import Any, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import scipy.sparse as sp

from .errors import EmptySupport, GridMismatch
from .fieldcore import Field, Grid, SubdomainMask

logger = logging.getLogger(__name__)


class SensorKind(str, Enum):
    MOMENT = "moment"
    DIRAC = "dirac"


class KernelShape(str, Enum):
    BUMP = "bump"
    BOX = "box"


class Sensor:
    """
    One continuous linear form of a dictionary.

    Attributes:
        sensor_id (int): Index inside its dictionary
        kind (SensorKind): moment or dirac
        center (tuple): (x, y) of the center node
        radius (float): Support radius (0 for Dirac masses)
        nodes (np.ndarray): Support node indices
        kernel (np.ndarray): Kernel values w on the support (1 for Dirac)
        coefficients (np.ndarray): Quadrature-weighted kernel values, so that
            ``sigma(phi) = coefficients . phi[nodes]``
    """

    def __init__(
        self,
        sensor_id: int,
        kind: SensorKind,
        grid: Grid,
        center: Tuple[float, float],
        radius: float,
        nodes: np.ndarray,
        kernel: np.ndarray,
        coefficients: np.ndarray,
    ):
        self.sensor_id = int(sensor_id)
        self.kind = SensorKind(kind)
        self.grid = grid
        self.center = (float(center[0]), float(center[1]))
        self.radius = float(radius)
        self.nodes = np.asarray(nodes, dtype=np.int64)
        self.kernel = np.asarray(kernel, dtype=float)
        self.coefficients = np.asarray(coefficients, dtype=float)
        for array in (self.nodes, self.kernel, self.coefficients):
            array.setflags(write=False)

    def __repr__(self) -> str:
        return (
            f"Sensor({self.sensor_id}, {self.kind.value}, center={self.center}, "
            f"radius={self.radius:g}, support={self.nodes.size})"
        )

    def kernel_field(self) -> Field:
        """Kernel w as a field (zero off the support)."""
        values = np.zeros(self.grid.n_nodes)
        values[self.nodes] = self.kernel
        return Field(self.grid, values)


def apply(sensor: Sensor, field: Field) -> float:
    """Evaluate a sensor on a field.

    Raises:
        GridMismatch: If the sensor and field grids differ
    """
    if sensor.grid != field.grid:
        raise GridMismatch(f"{sensor.grid!r} != {field.grid!r}")
    return float(np.dot(sensor.coefficients, field.values[sensor.nodes]))


class Dictionary:
    """
    Ordered candidate set of sensors sharing a kind and a subdomain.

    Example:
        >>> mask = grid.mask("omega2")
        >>> dictionary = build_dirac_dictionary(grid, mask)
        >>> len(dictionary) == len(mask)
        True
    """

    def __init__(self, sensors: Sequence[Sensor], subdomain: SubdomainMask):
        sensors = list(sensors)
        if not sensors:
            raise ValueError("a dictionary needs at least one sensor")
        if [s.sensor_id for s in sensors] != list(range(len(sensors))):
            raise ValueError("sensor ids must be consecutive from 0")
        kinds = {s.kind for s in sensors}
        if len(kinds) != 1:
            raise ValueError(f"mixed sensor kinds: {sorted(k.value for k in kinds)}")
        self.sensors = sensors
        self.subdomain = subdomain
        self.grid = subdomain.grid
        self.kind = sensors[0].kind

    def __len__(self) -> int:
        return len(self.sensors)

    def __iter__(self) -> Iterator[Sensor]:
        return iter(self.sensors)

    def __getitem__(self, sensor_id: int) -> Sensor:
        return self.sensors[sensor_id]

    def __repr__(self) -> str:
        return (
            f"Dictionary({len(self)} {self.kind.value} sensors "
            f"on {self.subdomain.name})"
        )

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        """(n_sensors, n_nodes) matrix of coefficient rows."""
        rows = np.concatenate(
            [np.full(s.nodes.size, s.sensor_id) for s in self.sensors]
        )
        cols = np.concatenate([s.nodes for s in self.sensors])
        vals = np.concatenate([s.coefficients for s in self.sensors])
        return sp.csr_matrix(
            (vals, (rows, cols)), shape=(len(self), self.grid.n_nodes)
        )

    def rows(self, sensor_ids: Sequence[int]) -> sp.csr_matrix:
        """Coefficient rows of the given sensors, in that order."""
        return self.matrix[np.asarray(sensor_ids, dtype=np.int64)]

    def measure(
        self,
        data: Union[Field, np.ndarray],
        sensor_ids: Optional[Sequence[int]] = None,
    ) -> np.ndarray:
        """Apply every (or the selected) sensor to a field or a (K, n) stack.

        Returns:
            Vector of readings, or an (n_sensors, K) array for stacked input
        """
        if isinstance(data, Field):
            if data.grid != self.grid:
                raise GridMismatch(f"{self.grid!r} != {data.grid!r}")
            values: Any = data.values
        else:
            values = np.asarray(data).T
        matrix = self.matrix if sensor_ids is None else self.rows(sensor_ids)
        return np.asarray(matrix @ values)

    def node_sensor(self, node: int) -> int:
        """Id of the Dirac sensor sitting on ``node``."""
        if self.kind is not SensorKind.DIRAC:
            raise ValueError("node lookup only applies to Dirac dictionaries")
        position = int(np.searchsorted(self.subdomain.nodes, node))
        if (
            position >= len(self.subdomain)
            or self.subdomain.nodes[position] != node
        ):
            raise KeyError(f"node {node} is not in {self.subdomain!r}")
        return position

    def manifest(self) -> pd.DataFrame:
        """Table of (id, center_x, center_y, radius, kind)."""
        return pd.DataFrame(
            {
                "id": [s.sensor_id for s in self.sensors],
                "center_x": [s.center[0] for s in self.sensors],
                "center_y": [s.center[1] for s in self.sensors],
                "radius": [s.radius for s in self.sensors],
                "kind": [s.kind.value for s in self.sensors],
            }
        )


def _kernel_values(r: np.ndarray, radius: float, shape: KernelShape) -> np.ndarray:
    if shape is KernelShape.BOX:
        return np.ones_like(r)
    s = (r / radius) ** 2
    return np.exp(-1.0 / (1.0 - s))


def build_moment_dictionary(
    grid: Grid,
    mask: SubdomainMask,
    centers: Sequence[int],
    radius: float,
    kernel_shape: Union[str, KernelShape] = KernelShape.BUMP,
) -> Dictionary:
    """Build L2-normalised compact-support moment sensors.

    Each kernel is evaluated on the nodes strictly inside its disc, zeroed off
    ``mask``, then scaled to unit L2 norm with the grid quadrature.

    Args:
        grid: Grid of the fields to be measured
        mask: Subdomain the sensors live in
        centers: Center node indices, one sensor each
        radius: Support radius
        kernel_shape: "bump" (smooth, compactly supported) or "box"

    Returns:
        Dictionary of moment sensors, ids in the order of ``centers``

    Raises:
        EmptySupport: If a disc covers no node of ``mask``
    """
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    if mask.grid != grid:
        raise GridMismatch(f"{grid!r} != {mask.grid!r}")
    shape = KernelShape(kernel_shape)
    weights = grid.quadrature_weights
    sensors: List[Sensor] = []

    for sensor_id, center in enumerate(centers):
        cx, cy = grid.xx[center], grid.yy[center]
        r = np.hypot(grid.xx - cx, grid.yy - cy)
        support = np.flatnonzero((r < radius) & mask.indicator)
        if support.size == 0:
            raise EmptySupport(
                f"disc of radius {radius:g} around ({cx:g}, {cy:g}) "
                f"covers no node of '{mask.name}'"
            )
        kernel = _kernel_values(r[support], radius, shape)
        kernel = kernel / np.sqrt(np.sum(weights[support] * kernel**2))
        sensors.append(
            Sensor(
                sensor_id,
                SensorKind.MOMENT,
                grid,
                (cx, cy),
                radius,
                support,
                kernel,
                # Quadrature weights folded into the reading coefficients
                weights[support] * kernel,
            )
        )

    logger.debug("Built %d moment sensors on '%s'", len(sensors), mask.name)
    return Dictionary(sensors, mask)


def build_dirac_dictionary(grid: Grid, mask: SubdomainMask) -> Dictionary:
    """One Dirac mass per mask node, in node order."""
    if mask.grid != grid:
        raise GridMismatch(f"{grid!r} != {mask.grid!r}")
    sensors = [
        Sensor(
            sensor_id,
            SensorKind.DIRAC,
            grid,
            (grid.xx[node], grid.yy[node]),
            0.0,
            np.array([node]),
            np.ones(1),
            np.ones(1),
        )
        for sensor_id, node in enumerate(mask.nodes)
    ]
    return Dictionary(sensors, mask)


def default_moment_centers(
    grid: Grid, mask: SubdomainMask, target: int = 200
) -> List[int]:
    """Every k-th interior node of ``mask``, strides chosen to hit ``target``.

    Interior means off the outer boundary. Column and row strides differ by
    at most one; among those the pair giving the count closest to ``target``
    wins (smaller strides first on ties).
    """
    interior = mask.indicator & ~grid.boundary
    if not interior.any():
        raise EmptySupport(f"mask '{mask.name}' has no interior node")
    cols = np.unique(grid.cols[interior])
    rows = np.unique(grid.rows[interior])

    best: Optional[Tuple[int, int, List[int]]] = None
    for sx in range(1, cols.size + 1):
        # Row stride within one of the column stride
        for sy in (sx - 1, sx, sx + 1):
            if sy < 1 or sy > rows.size:
                continue
            picked = [
                grid.node_index(i, j)
                for j in rows[::sy]
                for i in cols[::sx]
                if interior[grid.node_index(i, j)]
            ]
            if not picked:
                continue
            score = abs(len(picked) - target)
            if best is None or score < best[0]:
                best = (score, sx, picked)
    assert best is not None
    logger.debug("Default centers: %d sensors (stride %d)", len(best[2]), best[1])
    return best[2]

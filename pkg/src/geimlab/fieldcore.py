"""
Discrete function spaces on a rectangular tensor grid.

This module contains the Grid, Field and SubdomainMask types together with
the discrete L2 and H1 inner products every other module measures against.
Nodal values are stored row-major: node ``k = j * nx + i`` sits at
``(x_i, y_j)``.
"""

import logging
from enum import Enum
from functools import cached_property
from typing import Any, Callable, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import GridMismatch, InvalidGeometry

logger = logging.getLogger(__name__)

MASK_NAMES = ("omega", "omega1", "omega2", "omega2_closure", "interface")


class Product(str, Enum):
    """Inner products available on a subdomain."""

    L2 = "L2"
    H1 = "H1"

    @classmethod
    def parse(cls, value: Union[str, "Product"]) -> "Product":
        """Accept a Product or its case-insensitive name."""
        if isinstance(value, Product):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(
                f"Unsupported product: {value}. Supported products: "
                f"{[p.value for p in cls]}"
            ) from None


class Grid:
    """
    Rectangular tensor grid split by a vertical interface.

    The interface is a grid column: Omega1 lies to its left, Omega2 to its
    right. Grids are immutable and compare equal when every defining
    parameter matches.

    Attributes:
        nx (int): Number of nodes along x
        ny (int): Number of nodes along y
        x_min, x_max, y_min, y_max (float): Physical bounds
        interface_col (int): Column index of the interface

    Example:
        >>> grid = make_grid(65, 33, (0.0, 2.0, 0.0, 1.0), 0.75)
        >>> grid.interface_col
        24
    """

    def __init__(
        self,
        nx: int,
        ny: int,
        x_min: float,
        x_max: float,
        y_min: float,
        y_max: float,
        interface_col: int,
    ):
        """Initialize a grid; use make_grid for validated construction."""
        self.nx = int(nx)
        self.ny = int(ny)
        self.x_min = float(x_min)
        self.x_max = float(x_max)
        self.y_min = float(y_min)
        self.y_max = float(y_max)
        self.interface_col = int(interface_col)

    def _key(self) -> Tuple[Any, ...]:
        return (
            self.nx,
            self.ny,
            self.x_min,
            self.x_max,
            self.y_min,
            self.y_max,
            self.interface_col,
        )

    def __repr__(self) -> str:
        return (
            f"Grid({self.nx}x{self.ny}, [{self.x_min}, {self.x_max}]x"
            f"[{self.y_min}, {self.y_max}], interface_col={self.interface_col})"
        )

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, Grid):
            return False
        return self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self._key())

    @property
    def hx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def hy(self) -> float:
        return (self.y_max - self.y_min) / (self.ny - 1)

    @property
    def n_nodes(self) -> int:
        return self.nx * self.ny

    @property
    def bounds(self) -> Tuple[float, float, float, float]:
        return (self.x_min, self.x_max, self.y_min, self.y_max)

    @cached_property
    def x(self) -> np.ndarray:
        """Column abscissae."""
        return _frozen(np.linspace(self.x_min, self.x_max, self.nx))

    @cached_property
    def y(self) -> np.ndarray:
        """Row ordinates."""
        return _frozen(np.linspace(self.y_min, self.y_max, self.ny))

    @property
    def interface_x(self) -> float:
        return float(self.x[self.interface_col])

    @cached_property
    def xx(self) -> np.ndarray:
        """Nodal x-coordinates, flattened row-major."""
        return _frozen(np.tile(self.x, self.ny))

    @cached_property
    def yy(self) -> np.ndarray:
        """Nodal y-coordinates, flattened row-major."""
        return _frozen(np.repeat(self.y, self.nx))

    @cached_property
    def cols(self) -> np.ndarray:
        return _frozen(np.tile(np.arange(self.nx), self.ny))

    @cached_property
    def rows(self) -> np.ndarray:
        return _frozen(np.repeat(np.arange(self.ny), self.nx))

    @cached_property
    def weights_x(self) -> np.ndarray:
        """1D trapezoidal weights along x."""
        w = np.full(self.nx, self.hx)
        w[[0, -1]] *= 0.5
        return _frozen(w)

    @cached_property
    def weights_y(self) -> np.ndarray:
        """1D trapezoidal weights along y."""
        w = np.full(self.ny, self.hy)
        w[[0, -1]] *= 0.5
        return _frozen(w)

    @cached_property
    def quadrature_weights(self) -> np.ndarray:
        """Tensor trapezoidal weights over the whole grid."""
        return _frozen(np.outer(self.weights_y, self.weights_x).ravel())

    @cached_property
    def boundary(self) -> np.ndarray:
        """Boolean indicator of the outer boundary nodes."""
        on_edge = (
            (self.cols == 0)
            | (self.cols == self.nx - 1)
            | (self.rows == 0)
            | (self.rows == self.ny - 1)
        )
        return _frozen(on_edge)

    def node_index(self, i: int, j: int) -> int:
        """Flat index of node (column i, row j)."""
        return j * self.nx + i

    def nearest_node(self, x: float, y: float) -> int:
        """Flat index of the node closest to (x, y)."""
        i = int(np.clip(round((x - self.x_min) / self.hx), 0, self.nx - 1))
        j = int(np.clip(round((y - self.y_min) / self.hy), 0, self.ny - 1))
        return self.node_index(i, j)

    def mask(self, name: str) -> "SubdomainMask":
        """
        Named subdomain mask.

        The interface column belongs to ``omega1`` so that Omega1 and Omega2
        quadratures add up to the full one; ``omega2_closure`` adds the
        interface column back to ``omega2`` for reconstructions that must
        carry a trace.
        """
        return _named_mask(self, name)


def make_grid(
    nx: int,
    ny: int,
    bounds: Sequence[float],
    interface_x: float,
) -> Grid:
    """Build a validated grid, snapping the interface to the nearest column.

    Args:
        nx: Node count along x (at least 3)
        ny: Node count along y (at least 3)
        bounds: (x_min, x_max, y_min, y_max)
        interface_x: Abscissa of the interface

    Returns:
        Grid instance

    Raises:
        InvalidGeometry: If counts are too small, bounds are empty, or the
            interface is not strictly interior
    """
    if nx < 3 or ny < 3:
        raise InvalidGeometry(f"grid needs at least 3x3 nodes, got {nx}x{ny}")
    if len(bounds) != 4:
        raise InvalidGeometry("bounds must be (x_min, x_max, y_min, y_max)")
    x_min, x_max, y_min, y_max = (float(b) for b in bounds)
    if not (x_max > x_min and y_max > y_min):
        raise InvalidGeometry(f"empty bounds {bounds}")

    hx = (x_max - x_min) / (nx - 1)
    col = int(round((interface_x - x_min) / hx))
    snapped = x_min + col * hx
    if abs(snapped - interface_x) > 0.5 * hx or not 0 < col < nx - 1:
        raise InvalidGeometry(
            f"interface_x={interface_x} is not a strictly interior grid column"
        )
    grid = Grid(nx, ny, x_min, x_max, y_min, y_max, col)
    logger.debug("Built %r (h_x=%g, h_y=%g)", grid, grid.hx, grid.hy)
    return grid


class Field:
    """
    Nodal values on a grid.

    Fields are immutable; arithmetic returns new fields.

    Attributes:
        grid (Grid): Grid the values live on
        values (np.ndarray): Read-only vector of length nx * ny
    """

    def __init__(self, grid: Grid, values: Any):
        values = np.array(values, dtype=float).ravel()
        if values.shape != (grid.n_nodes,):
            raise ValueError(
                f"field needs {grid.n_nodes} values, got {values.shape[0]}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        values.setflags(write=False)
        self.grid = grid
        self.values = values

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.n_nodes))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "Field":
        return cls(grid, np.full(grid.n_nodes, float(value)))

    @classmethod
    def from_function(
        cls, grid: Grid, func: Callable[[np.ndarray, np.ndarray], Any]
    ) -> "Field":
        """Sample ``func(x, y)`` at every node."""
        return cls(grid, np.broadcast_to(func(grid.xx, grid.yy), grid.n_nodes))

    def as_array(self) -> np.ndarray:
        """Values as a (ny, nx) array."""
        return self.values.reshape(self.grid.ny, self.grid.nx)

    def _check(self, other: "Field") -> None:
        if self.grid != other.grid:
            raise GridMismatch(f"{self.grid!r} != {other.grid!r}")

    def __add__(self, other: "Field") -> "Field":
        self._check(other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        self._check(other)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> "Field":
        return Field(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> "Field":
        return Field(self.grid, self.values / float(scalar))

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.values)

    def __repr__(self) -> str:
        return f"Field({self.grid!r}, max|v|={np.max(np.abs(self.values)):.3e})"


class SubdomainMask:
    """
    A set of grid nodes used to restrict fields and quadratures.

    Quadrature weights are the global tensor trapezoid weights restricted to
    the node set. Gradients in the H1 product only use neighbours inside the
    mask (centered where both exist, one-sided otherwise), so norms on a mask
    depend on the values on that mask alone.
    """

    def __init__(self, grid: Grid, nodes: Iterable[int], name: str = "custom"):
        nodes = np.unique(np.asarray(list(nodes), dtype=np.int64))
        if nodes.size == 0:
            raise InvalidGeometry(f"mask '{name}' is empty")
        if nodes[0] < 0 or nodes[-1] >= grid.n_nodes:
            raise InvalidGeometry(f"mask '{name}' has nodes outside the grid")
        nodes.setflags(write=False)
        self.grid = grid
        self.nodes = nodes
        self.name = name

    @classmethod
    def from_indicator(
        cls, grid: Grid, indicator: np.ndarray, name: str = "custom"
    ) -> "SubdomainMask":
        return cls(grid, np.flatnonzero(indicator), name)

    def __len__(self) -> int:
        return int(self.nodes.size)

    def __repr__(self) -> str:
        return f"SubdomainMask({self.name}, {len(self)} nodes)"

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, SubdomainMask):
            return False
        return self.grid == other.grid and np.array_equal(self.nodes, other.nodes)

    def __hash__(self) -> int:
        return hash((self.grid, self.nodes.tobytes()))

    @cached_property
    def indicator(self) -> np.ndarray:
        ind = np.zeros(self.grid.n_nodes, dtype=bool)
        ind[self.nodes] = True
        return _frozen(ind)

    @cached_property
    def weights(self) -> np.ndarray:
        """Quadrature weights, zero off the mask."""
        return _frozen(self.grid.quadrature_weights * self.indicator)

    @cached_property
    def gradient_x(self) -> sp.csr_matrix:
        return _difference_operator(self.grid, self.indicator, axis=0)

    @cached_property
    def gradient_y(self) -> sp.csr_matrix:
        return _difference_operator(self.grid, self.indicator, axis=1)

    def factor(self, product: Union[str, Product]) -> sp.csr_matrix:
        """Sparse C with C^T C equal to the Gram operator of ``product``.

        ``inner(f, g) = (C f) . (C g)``; C has one row block per term of the
        product and columns indexed by all grid nodes.
        """
        product = Product.parse(product)
        if product is Product.L2:
            return self._l2_factor
        return self._h1_factor

    @cached_property
    def _l2_factor(self) -> sp.csr_matrix:
        root = sp.diags(np.sqrt(self.weights)).tocsr()
        return root[self.nodes]

    @cached_property
    def _h1_factor(self) -> sp.csr_matrix:
        root = self._l2_factor
        return sp.vstack(
            [root, root @ self.gradient_x, root @ self.gradient_y]
        ).tocsr()

    def local_factor(self, product: Union[str, Product]) -> sp.csc_matrix:
        """Metric factor acting on mask-node values only."""
        return self.factor(product)[:, self.nodes].tocsc()

    def local_metric_lu(self, product: Union[str, Product]) -> Any:
        """Sparse LU of the Gram operator restricted to mask nodes (cached)."""
        product = Product.parse(product)
        cache = self.__dict__.setdefault("_lu_cache", {})
        if product not in cache:
            c = self.local_factor(product)
            cache[product] = splu((c.T @ c).tocsc())
        return cache[product]

    def restrict_values(self, values: np.ndarray) -> np.ndarray:
        """Zero every entry off the mask (works on stacked rows too)."""
        return np.asarray(values) * self.indicator


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def _named_mask(grid: Grid, name: str) -> SubdomainMask:
    cache = grid.__dict__.setdefault("_mask_cache", {})
    if name in cache:
        return cache[name]
    col = grid.interface_col
    if name == "omega":
        indicator = np.ones(grid.n_nodes, dtype=bool)
    elif name == "omega1":
        indicator = grid.cols <= col
    elif name == "omega2":
        indicator = grid.cols > col
    elif name == "omega2_closure":
        indicator = grid.cols >= col
    elif name == "interface":
        indicator = grid.cols == col
    else:
        raise ValueError(f"Unknown mask '{name}'. Known masks: {list(MASK_NAMES)}")
    mask = SubdomainMask.from_indicator(grid, indicator, name)
    cache[name] = mask
    return mask


def _difference_operator(
    grid: Grid, indicator: np.ndarray, axis: int
) -> sp.csr_matrix:
    """First-derivative operator using only neighbours inside the mask."""
    n = grid.n_nodes
    idx = np.arange(n)
    if axis == 0:
        pos, count, step, h = grid.cols, grid.nx, 1, grid.hx
    else:
        pos, count, step, h = grid.rows, grid.ny, grid.nx, grid.hy

    # Neighbours that exist on the grid and lie inside the mask
    has_prev = np.zeros(n, dtype=bool)
    has_next = np.zeros(n, dtype=bool)
    interior = pos > 0
    has_prev[interior] = indicator[idx[interior] - step]
    interior = pos < count - 1
    has_next[interior] = indicator[idx[interior] + step]
    has_prev &= indicator
    has_next &= indicator

    central = idx[has_prev & has_next]
    forward = idx[has_next & ~has_prev]
    backward = idx[has_prev & ~has_next]

    # Central differences where both neighbours exist, one-sided otherwise
    rows = np.concatenate([central, central, forward, forward, backward, backward])
    cols = np.concatenate(
        [
            central + step,
            central - step,
            forward + step,
            forward,
            backward,
            backward - step,
        ]
    )
    vals = np.concatenate(
        [
            np.full(central.size, 0.5 / h),
            np.full(central.size, -0.5 / h),
            np.full(forward.size, 1.0 / h),
            np.full(forward.size, -1.0 / h),
            np.full(backward.size, 1.0 / h),
            np.full(backward.size, -1.0 / h),
        ]
    )
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def _check_grid(*items: Any) -> Grid:
    grids = [item.grid for item in items]
    for other in grids[1:]:
        if other != grids[0]:
            raise GridMismatch(f"{grids[0]!r} != {other!r}")
    return grids[0]


def inner(
    f: Field,
    g: Field,
    mask: SubdomainMask,
    product: Union[str, Product] = Product.L2,
) -> float:
    """Discrete inner product of two fields on a mask.

    Args:
        f: First field
        g: Second field
        mask: Subdomain the integral runs over
        product: "L2" or "H1"

    Returns:
        Value of the inner product

    Raises:
        GridMismatch: If the operands do not share a grid
    """
    _check_grid(f, g, mask)
    c = mask.factor(product)
    return float(np.dot(c @ f.values, c @ g.values))


def inner_l2(f: Field, g: Field, mask: SubdomainMask) -> float:
    """Trapezoidal L2 pairing restricted to ``mask``."""
    return inner(f, g, mask, Product.L2)


def inner_h1(f: Field, g: Field, mask: SubdomainMask) -> float:
    """L2 pairing plus the pairing of discrete gradients on ``mask``."""
    return inner(f, g, mask, Product.H1)


def norm(
    f: Field, mask: SubdomainMask, product: Union[str, Product] = Product.L2
) -> float:
    """Norm induced by ``product`` on ``mask``."""
    _check_grid(f, mask)
    return float(np.linalg.norm(mask.factor(product) @ f.values))


def row_norms(
    values: np.ndarray, mask: SubdomainMask, product: Union[str, Product]
) -> np.ndarray:
    """Norms of each row of a (K, n) stack of nodal vectors."""
    weighted = mask.factor(product) @ np.atleast_2d(values).T
    return np.linalg.norm(weighted, axis=0)


def restrict(f: Field, mask: SubdomainMask) -> Field:
    """Copy of ``f`` on the mask, zero elsewhere."""
    _check_grid(f, mask)
    return Field(f.grid, mask.restrict_values(f.values))


def stack_fields(
    fields: Sequence[Field], mask: Optional[SubdomainMask] = None
) -> np.ndarray:
    """Stack fields into a (K, n) array, optionally restricted to a mask."""
    if len(fields) == 0:
        raise ValueError("at least one field is required")
    _check_grid(*fields, *([mask] if mask is not None else []))
    values = np.vstack([f.values for f in fields])
    if mask is not None:
        values = mask.restrict_values(values)
    return values

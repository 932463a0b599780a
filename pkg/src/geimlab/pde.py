"""
Parametrized Laplace problem and snapshot generation.

Solves ``-Laplace(phi) = f`` with the 5-point finite-difference stencil on
any union of grid nodes closed by Dirichlet data, and samples the solution
manifold of ``f = 1 + (alpha sin(x) + beta cos(gamma pi y)) chi_1`` over a
tensor grid of parameters.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg, splu

from .errors import GridMismatch, IncompleteBoundary, SingularSystem, SizeMismatch
from .fieldcore import Field, Grid, SubdomainMask, stack_fields

logger = logging.getLogger(__name__)

Range = Tuple[float, float]

DEFAULT_RANGES: Tuple[Range, Range, Range] = ((-1.0, 1.0), (-1.0, 1.0), (0.5, 1.5))
DEFAULT_COUNTS: Tuple[int, int, int] = (6, 6, 6)

#: Above this many unknowns the direct factorisation gives way to CG.
DIRECT_SOLVE_LIMIT = 100_000
CG_RTOL = 1e-12


class ParamPoint(NamedTuple):
    alpha: float
    beta: float
    gamma: float


class DirichletData:
    """
    Prescribed nodal values on a set of nodes.

    Attributes:
        nodes (np.ndarray): Sorted unique node indices
        values (np.ndarray): Values aligned with ``nodes``
    """

    def __init__(self, nodes: Sequence[int], values: Union[float, Sequence[float]]):
        node_array = np.asarray(nodes, dtype=np.int64)
        value_array = np.broadcast_to(np.asarray(values, dtype=float), node_array.shape)
        order = np.argsort(node_array, kind="stable")
        self.nodes = node_array[order]
        self.values = np.array(value_array[order])
        if np.unique(self.nodes).size != self.nodes.size:
            raise ValueError("Dirichlet nodes must be unique")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("Dirichlet values must be finite")

    @classmethod
    def zero(cls, nodes: Sequence[int]) -> "DirichletData":
        return cls(nodes, 0.0)

    def override(self, other: "DirichletData") -> "DirichletData":
        """Union of both node sets; ``other`` wins where they overlap."""
        keep = ~np.isin(self.nodes, other.nodes)
        return DirichletData(
            np.concatenate([self.nodes[keep], other.nodes]),
            np.concatenate([self.values[keep], other.values]),
        )

    def __len__(self) -> int:
        return int(self.nodes.size)

    def __repr__(self) -> str:
        return f"DirichletData({len(self)} nodes)"


def forcing(p: ParamPoint, grid: Grid, chi1: Optional[SubdomainMask] = None) -> Field:
    """Right-hand side ``1 + (alpha sin x + beta cos(gamma pi y))`` on chi_1."""
    chi1 = grid.mask("omega1") if chi1 is None else chi1
    bump = p.alpha * np.sin(grid.xx) + p.beta * np.cos(p.gamma * np.pi * grid.yy)
    return Field(grid, 1.0 + bump * chi1.indicator)


def discrete_laplacian(grid: Grid) -> sp.csr_matrix:
    """5-point ``-Laplace`` operator; rows of outer-boundary nodes are empty."""
    n = grid.n_nodes
    idx = np.flatnonzero(~grid.boundary)
    cx, cy = 1.0 / grid.hx**2, 1.0 / grid.hy**2
    rows = np.tile(idx, 5)
    cols = np.concatenate([idx, idx - 1, idx + 1, idx - grid.nx, idx + grid.nx])
    vals = np.concatenate(
        [
            np.full(idx.size, 2.0 * (cx + cy)),
            np.full(idx.size, -cx),
            np.full(idx.size, -cx),
            np.full(idx.size, -cy),
            np.full(idx.size, -cy),
        ]
    )
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


class LaplaceSolver:
    """
    Factorised Dirichlet problem on a node region.

    The unknowns are the region nodes without prescribed data; every one of
    their four stencil neighbours must be a region node.

    Args:
        grid: Grid of the problem
        region: Nodes of the solve region
        fixed: Region nodes carrying Dirichlet data

    Raises:
        IncompleteBoundary: If an unknown node has a neighbour outside the
            region or lies on the outer boundary of the grid
    """

    def __init__(self, grid: Grid, region: SubdomainMask, fixed: Sequence[int]):
        self.grid = grid
        self.region = region
        self.fixed = np.unique(np.asarray(fixed, dtype=np.int64))
        if not np.all(region.indicator[self.fixed]):
            raise IncompleteBoundary("Dirichlet nodes must lie in the solve region")
        free = region.indicator.copy()
        free[self.fixed] = False
        self.unknowns = np.flatnonzero(free)
        self._check_closed()

        # Split the stencil into unknown and Dirichlet columns
        L = discrete_laplacian(grid)[self.unknowns]
        self.A = L[:, self.unknowns].tocsc()
        self.K = L[:, self.fixed].tocsr()
        self._lu: Any = None
        if 0 < self.unknowns.size <= DIRECT_SOLVE_LIMIT:
            self._lu = splu(self.A)
        logger.debug(
            "LaplaceSolver on '%s': %d unknowns, %d fixed, %s",
            region.name,
            self.unknowns.size,
            self.fixed.size,
            "direct" if self._lu is not None else "cg",
        )

    def _check_closed(self) -> None:
        g = self.grid
        on_edge = g.boundary[self.unknowns]
        if on_edge.any():
            node = int(self.unknowns[on_edge][0])
            raise IncompleteBoundary(
                f"node {node} lies on the outer boundary without Dirichlet data"
            )
        # Four stencil neighbours: left, right, below, above
        for offset in (-1, 1, -g.nx, g.nx):
            outside = ~self.region.indicator[self.unknowns + offset]
            if outside.any():
                node = int(self.unknowns[outside][0])
                raise IncompleteBoundary(
                    f"node {node} has a neighbour outside '{self.region.name}'"
                )

    def boundary_values(self, dirichlet: DirichletData) -> np.ndarray:
        """Dirichlet values aligned with ``self.fixed``."""
        if not np.array_equal(dirichlet.nodes, self.fixed):
            raise SizeMismatch("Dirichlet nodes differ from the solver's fixed nodes")
        return dirichlet.values

    def solve(self, f: Field, dirichlet: DirichletData) -> Field:
        """Solve for the unknowns; the result vanishes off the region."""
        if f.grid != self.grid:
            raise GridMismatch(f"forcing on {f.grid!r}, solver on {self.grid!r}")
        data = self.boundary_values(dirichlet)
        values = np.zeros(self.grid.n_nodes)
        values[self.fixed] = data
        if self.unknowns.size == 0:
            return Field(self.grid, values)

        # Move the known boundary values to the right-hand side
        rhs = f.values[self.unknowns] - self.K @ data
        if self._lu is not None:
            u = self._lu.solve(rhs)
        else:
            u, info = cg(self.A, rhs, rtol=CG_RTOL, maxiter=10 * self.unknowns.size)
            if info != 0:
                raise SingularSystem(f"conjugate gradient stopped with info={info}")
        if not np.all(np.isfinite(u)):
            raise SingularSystem("non-finite values in the Laplace solution")
        values[self.unknowns] = u
        return Field(self.grid, values)


def solve_laplace(
    f: Field,
    grid: Grid,
    dirichlet: Optional[DirichletData] = None,
    region: Optional[SubdomainMask] = None,
) -> Field:
    """One-off Dirichlet solve; homogeneous data on the outer boundary by default."""
    region = grid.mask("omega") if region is None else region
    if dirichlet is None:
        dirichlet = DirichletData.zero(np.flatnonzero(grid.boundary & region.indicator))
    return LaplaceSolver(grid, region, dirichlet.nodes).solve(f, dirichlet)


def _axis_values(bounds: Range, count: int) -> np.ndarray:
    if count < 1:
        raise ValueError(f"parameter counts must be positive, got {count}")
    lo, hi = bounds
    if count == 1:
        return np.array([0.5 * (lo + hi)])
    return np.linspace(lo, hi, count)


def _tensor(axes: Sequence[np.ndarray]) -> List[ParamPoint]:
    return [
        ParamPoint(float(a), float(b), float(c))
        for c in axes[2]
        for b in axes[1]
        for a in axes[0]
    ]


def parameter_grid(
    ranges: Sequence[Range] = DEFAULT_RANGES,
    counts: Sequence[int] = DEFAULT_COUNTS,
) -> List[ParamPoint]:
    """Tensor grid of parameters, alpha varying fastest.

    A count of 1 places the single value at the midpoint of its range.
    """
    return _tensor([_axis_values(r, c) for r, c in zip(ranges, counts)])


def midpoint_parameters(
    ranges: Sequence[Range] = DEFAULT_RANGES,
    counts: Sequence[int] = DEFAULT_COUNTS,
) -> List[ParamPoint]:
    """Cell midpoints of the training parameter grid (held-out points)."""
    axes = []
    for r, c in zip(ranges, counts):
        values = _axis_values(r, c)
        axes.append(0.5 * (values[1:] + values[:-1]) if c > 1 else values)
    return _tensor(axes)


class SnapshotSet:
    """
    Solutions of the parametrized problem at a list of parameters.

    Attributes:
        grid (Grid): Grid of every field
        params (list): ParamPoint per snapshot
        fields (list): Field per snapshot, same order
        metadata (dict): Generation settings (ranges, counts, solver)
    """

    def __init__(
        self,
        grid: Grid,
        params: Sequence[ParamPoint],
        fields: Sequence[Field],
        metadata: Optional[Dict[str, Any]] = None,
    ):
        if len(params) != len(fields):
            raise SizeMismatch(f"{len(params)} parameters but {len(fields)} fields")
        self.grid = grid
        self.params = [ParamPoint(*p) for p in params]
        self.fields = list(fields)
        self.metadata = dict(metadata or {})

    def __len__(self) -> int:
        return len(self.fields)

    def __repr__(self) -> str:
        return f"SnapshotSet({len(self)} snapshots on {self.grid!r})"

    def values(self) -> np.ndarray:
        """(K, n_nodes) array of nodal values."""
        return stack_fields(self.fields)


def _solve_chunk(
    grid: Grid, chi1: SubdomainMask, params: Sequence[ParamPoint]
) -> List[Field]:
    solver = LaplaceSolver(grid, grid.mask("omega"), np.flatnonzero(grid.boundary))
    dirichlet = DirichletData.zero(solver.fixed)
    return [solver.solve(forcing(p, grid, chi1), dirichlet) for p in params]


def solve_snapshots(
    grid: Grid,
    params: Sequence[ParamPoint],
    chi1: Optional[SubdomainMask] = None,
    workers: int = 1,
) -> List[Field]:
    """Global solutions at ``params``, in order.

    Parameters are split into contiguous chunks, one factorisation and one
    thread per chunk.
    """
    chi1 = grid.mask("omega1") if chi1 is None else chi1
    workers = max(1, min(int(workers), len(params)))
    logger.info("Solving %d snapshots with %d worker(s)", len(params), workers)
    if workers == 1:
        return _solve_chunk(grid, chi1, params)

    # Contiguous chunks keep the output order
    chunks = np.array_split(np.arange(len(params)), workers)
    with ThreadPoolExecutor(max_workers=workers) as executor:
        parts = executor.map(
            lambda idx: _solve_chunk(grid, chi1, [params[i] for i in idx]),
            chunks,
        )
        return [f for part in parts for f in part]


def generate_snapshots(
    grid: Grid,
    ranges: Sequence[Range] = DEFAULT_RANGES,
    counts: Sequence[int] = DEFAULT_COUNTS,
    chi1: Optional[SubdomainMask] = None,
    workers: int = 1,
) -> SnapshotSet:
    """Solve the parametrized problem on a tensor grid of parameters.

    Args:
        grid: Grid of the solves
        ranges: (min, max) for alpha, beta and gamma
        counts: Values per axis
        chi1: Support of the parametrized part of the forcing (omega1)
        workers: Solver threads

    Returns:
        SnapshotSet ordered with alpha varying fastest
    """
    params = parameter_grid(ranges, counts)
    fields = solve_snapshots(grid, params, chi1, workers)
    metadata = {
        "ranges": [[float(v) for v in r] for r in ranges],
        "counts": [int(c) for c in counts],
        "solver": "direct" if grid.n_nodes <= DIRECT_SOLVE_LIMIT else "cg",
    }
    return SnapshotSet(grid, params, fields, metadata)

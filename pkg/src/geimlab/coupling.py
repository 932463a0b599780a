"""
Data assimilation on one subdomain feeding a PDE solve on the other.

The field on omega2 is reconstructed from sensor readings; its values on the
interface column become Dirichlet data for the Laplace problem on omega1,
whose outer boundary keeps homogeneous data.
"""

import logging
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .errors import GridMismatch, SizeMismatch
from .fieldcore import Field, Grid, Product, SubdomainMask, norm, row_norms
from .geim import GeimModel, geim_reconstruct
from .pde import DirichletData, LaplaceSolver, ParamPoint, forcing, solve_laplace

logger = logging.getLogger(__name__)


class CoupledResult:
    """
    Errors of one coupled reconstruction against a known truth.

    Attributes:
        M (int): Number of GEIM functions used
        reconstruction_omega2 (Field): GEIM reconstruction (omega2 and trace)
        solution_omega1 (Field): Laplace solution on omega1
        err_l2_omega1, err_h1_omega1 (float): Errors of the omega1 solution
        err_l2_omega2, err_h1_omega2 (float): Errors of the reconstruction
        err_trace (float): Interface trace error in the discrete 1D L2 norm
    """

    def __init__(
        self,
        M: int,
        reconstruction_omega2: Field,
        solution_omega1: Field,
        errors: Dict[str, float],
    ):
        self.M = int(M)
        self.reconstruction_omega2 = reconstruction_omega2
        self.solution_omega1 = solution_omega1
        self.err_l2_omega1 = errors["err_l2_omega1"]
        self.err_h1_omega1 = errors["err_h1_omega1"]
        self.err_l2_omega2 = errors["err_l2_omega2"]
        self.err_h1_omega2 = errors["err_h1_omega2"]
        self.err_trace = errors["err_trace"]

    def __repr__(self) -> str:
        return (
            f"CoupledResult(M={self.M}, err_h1_omega1={self.err_h1_omega1:.3e}, "
            f"err_h1_omega2={self.err_h1_omega2:.3e})"
        )

    def as_row(self) -> Dict[str, float]:
        return {
            "M": self.M,
            "err_l2_omega1": self.err_l2_omega1,
            "err_h1_omega1": self.err_h1_omega1,
            "err_l2_omega2": self.err_l2_omega2,
            "err_h1_omega2": self.err_h1_omega2,
            "err_trace": self.err_trace,
        }


def results_frame(results: Sequence[CoupledResult]) -> pd.DataFrame:
    return pd.DataFrame([r.as_row() for r in results])


def reconstruct_omega2(model: GeimModel, truth: Field, M: int) -> Field:
    """GEIM reconstruction of ``truth`` from the first M selected sensors."""
    return geim_reconstruct(model, truth, M)


def extract_trace(field: Field, grid: Optional[Grid] = None) -> DirichletData:
    """Values of ``field`` on the interface column, bottom to top."""
    grid = field.grid if grid is None else grid
    if field.grid != grid:
        raise GridMismatch(f"{grid!r} != {field.grid!r}")
    nodes = grid.mask("interface").nodes
    return DirichletData(nodes, field.values[nodes])


def trace_norm(values: np.ndarray, grid: Grid) -> float:
    """Discrete L2 norm along the interface (trapezoid in y)."""
    values = np.asarray(values, dtype=float)
    return float(np.sqrt(np.sum(grid.weights_y * values**2)))


class _Omega1Problem:
    """Factorised omega1 solve: zero outer data, interface data on top."""

    def __init__(self, grid: Grid, chi1: Optional[SubdomainMask] = None):
        self.grid = grid
        self.chi1 = grid.mask("omega1") if chi1 is None else chi1
        region = grid.mask("omega1")
        self.interface = grid.mask("interface").nodes
        outer_nodes = np.flatnonzero(grid.boundary & region.indicator)
        self.outer = DirichletData.zero(outer_nodes)
        fixed = np.union1d(self.outer.nodes, self.interface)
        self.solver = LaplaceSolver(grid, region, fixed)

    def dirichlet(self, trace: Union[DirichletData, Sequence[float]]) -> DirichletData:
        if isinstance(trace, DirichletData):
            if not np.array_equal(trace.nodes, self.interface):
                raise SizeMismatch("trace must cover exactly the interface nodes")
            values = trace.values
        else:
            values = np.asarray(trace, dtype=float)
            if values.shape != self.interface.shape:
                raise SizeMismatch(
                    f"trace has {values.size} values, interface has "
                    f"{self.interface.size} nodes"
                )
        return self.outer.override(DirichletData(self.interface, values))

    def solve(self, f: Field, trace: Union[DirichletData, Sequence[float]]) -> Field:
        return self.solver.solve(f, self.dirichlet(trace))


def solve_omega1(
    p: ParamPoint,
    grid: Grid,
    trace: Union[DirichletData, Sequence[float]],
    chi1: Optional[SubdomainMask] = None,
) -> Field:
    """Solve the parametrized problem on omega1 with the given interface data.

    The trace values win at the two corners shared with the outer boundary.
    """
    problem = _Omega1Problem(grid, chi1)
    return problem.solve(forcing(p, grid, problem.chi1), trace)


def _extension_matrix(problem: _Omega1Problem, product: Product) -> np.ndarray:
    """Weighted omega1 images of unit traces, scaled to the trace norm."""
    grid = problem.grid
    zero = Field.zeros(grid)
    columns = []
    # One harmonic extension per interface node
    for k in range(problem.interface.size):
        unit = np.zeros(problem.interface.size)
        unit[k] = 1.0
        columns.append(problem.solve(zero, unit).values)
    images = np.vstack(columns)
    C = grid.mask("omega1").factor(product)
    return np.asarray(C @ images.T) / np.sqrt(grid.weights_y)


def stability_constant(
    grid: Grid, product: Union[str, Product] = Product.H1
) -> float:
    """Norm of the map from interface data to the harmonic omega1 extension.

    Measured from the trace norm to ``product`` on omega1, so that
    ``err_omega1 <= C * err_trace`` whenever both solves share the forcing.
    """
    problem = _Omega1Problem(grid)
    matrix = _extension_matrix(problem, Product.parse(product))
    return float(np.linalg.norm(matrix, 2))


def stability_estimate(
    grid: Grid,
    samples: int = 32,
    seed: int = 0,
    product: Union[str, Product] = Product.H1,
) -> float:
    """Largest ratio observed over random Gaussian trace perturbations.

    A lower bound for :func:`stability_constant`.
    """
    problem = _Omega1Problem(grid)
    rng = np.random.default_rng(seed)
    zero = Field.zeros(grid)
    mask = grid.mask("omega1")
    best = 0.0
    for _ in range(samples):
        t = rng.standard_normal(problem.interface.size)
        u = problem.solve(zero, t)
        best = max(best, norm(u, mask, product) / trace_norm(t, grid))
    return best


def coupled_run(
    model: GeimModel,
    p_truth: ParamPoint,
    grid: Grid,
    chi1: Optional[SubdomainMask] = None,
    M_range: Optional[Sequence[int]] = None,
    truth: Optional[Field] = None,
) -> List[CoupledResult]:
    """Reconstruct, transfer the trace and solve on omega1 for each M.

    Args:
        model: GEIM model on omega2 (with its interface closure)
        p_truth: Parameters of the true field and of the omega1 forcing
        grid: Grid of every solve
        chi1: Support of the parametrized forcing
        M_range: Dimensions to run, 1..model.size by default
        truth: Global solution at ``p_truth``; solved here if omitted

    Returns:
        One CoupledResult per M, in order
    """
    problem = _Omega1Problem(grid, chi1)
    f = forcing(p_truth, grid, problem.chi1)
    truth = solve_laplace(f, grid) if truth is None else truth
    true_trace = extract_trace(truth).values
    omega1, omega2 = grid.mask("omega1"), grid.mask("omega2")
    M_range = range(1, model.size + 1) if M_range is None else M_range

    results = []
    for M in M_range:
        # Sensors only see omega2; the trace comes from the reconstruction
        rec = reconstruct_omega2(model, truth, M)
        trace = extract_trace(rec)
        u1 = problem.solve(f, trace)
        diff1, diff2 = (u1 - truth).values, (rec - truth).values
        errors = {
            "err_l2_omega1": float(row_norms(diff1, omega1, Product.L2)[0]),
            "err_h1_omega1": float(row_norms(diff1, omega1, Product.H1)[0]),
            "err_l2_omega2": float(row_norms(diff2, omega2, Product.L2)[0]),
            "err_h1_omega2": float(row_norms(diff2, omega2, Product.H1)[0]),
            "err_trace": trace_norm(trace.values - true_trace, grid),
        }
        logger.debug("Coupled M=%d: %s", M, errors)
        results.append(CoupledResult(M, rec, u1, errors))
    return results

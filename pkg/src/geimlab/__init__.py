"""
geim-lab - Generalized Empirical Interpolation experiments

Greedy construction of interpolation bases and sensor selections from a
parametrized-PDE snapshot set, reconstruction from sensor readings,
coupling of data assimilation with a subdomain solve, and noise-filtered
multi-series reconstruction.

Features:
- Finite-difference grids, fields and L2/H1 inner products on subdomains
- Moment and Dirac sensor dictionaries
- Classical EIM and generalized EIM with exact Lebesgue constants
- Snapshot SVD baselines in L2 and H1
- Reproducible experiments emitting CSV tables and gnuplot scripts
"""

__version__ = "0.1.0"
__author__ = "Ethan Li"

from .cli import main
from .eim import EimModel, eim_build, eim_interpolate
from .errors import GeimError
from .fieldcore import Field, Grid, Product, SubdomainMask, make_grid
from .geim import GeimModel, geim_build, geim_interpolate, geim_reconstruct
from .pde import ParamPoint, SnapshotSet, generate_snapshots
from .sensors import Dictionary, build_dirac_dictionary, build_moment_dictionary

__all__ = [
    "Grid",
    "Field",
    "SubdomainMask",
    "Product",
    "make_grid",
    "Dictionary",
    "build_moment_dictionary",
    "build_dirac_dictionary",
    "EimModel",
    "eim_build",
    "eim_interpolate",
    "GeimModel",
    "geim_build",
    "geim_interpolate",
    "geim_reconstruct",
    "ParamPoint",
    "SnapshotSet",
    "generate_snapshots",
    "GeimError",
    "main",
]

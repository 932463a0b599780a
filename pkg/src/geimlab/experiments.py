"""
Experiment runner.

Builds the grid, snapshot sets, sensor dictionary and GEIM models of a
configuration on first use and runs the studies behind each CLI
subcommand. Every ``run_*`` method returns a report dictionary::

    {
        "experiment": name,
        "config_hash": hex digest,
        "tables": {name: DataFrame},
        "summary": {name: scalar},
        "plot": {"table", "x", "columns", "title", "ylabel", "logscale"},
    }
"""

import logging
from functools import cached_property
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from .config import ExperimentConfig
from .coupling import coupled_run, results_frame, stability_constant
from .fieldcore import Field, Grid, Product, SubdomainMask, make_grid, row_norms
from .geim import (
    GeimModel,
    geim_build,
    geim_errors,
    lebesgue_empirical,
    lebesgue_exact,
    pessimistic_bound,
)
from .noise import NoiseModel, build_series_ensemble, variance_study
from .pde import (
    ParamPoint,
    SnapshotSet,
    generate_snapshots,
    midpoint_parameters,
    solve_snapshots,
)
from .sensors import Dictionary, build_moment_dictionary, default_moment_centers
from .svd import SvdResult, best_fit_errors, snapshot_svd

logger = logging.getLogger(__name__)

EXPERIMENTS = ("snapshots", "decay", "svd", "bestfit", "lebesgue", "coupled", "noise")


def _suffix(product: Product) -> str:
    return product.value.lower()


class ExperimentRunner:
    """
    Lazily assembled state of one configuration.

    Args:
        config: Experiment configuration
        workers: Solver threads; defaults to ``config.threads``

    Example:
        >>> runner = ExperimentRunner(ExperimentConfig(nx=17, ny=9))
        >>> report = runner.run_decay()
        >>> sorted(report["tables"])
        ['decay']
    """

    def __init__(self, config: ExperimentConfig, workers: Optional[int] = None):
        self.config = config
        self.workers = config.threads if workers is None else workers
        self._models: Dict[Product, GeimModel] = {}
        self._svds: Dict[Product, SvdResult] = {}

    def __repr__(self) -> str:
        return f"ExperimentRunner(config_hash={self.config.config_hash[:12]})"

    @cached_property
    def grid(self) -> Grid:
        c = self.config
        return make_grid(c.nx, c.ny, c.bounds, c.interface_x)

    @property
    def norm_mask(self) -> SubdomainMask:
        """Omega2 with its interface column, where reconstructions live."""
        return self.grid.mask("omega2_closure")

    @property
    def products(self) -> List[Product]:
        return [Product.parse(p) for p in self.config.products]

    @cached_property
    def snapshots(self) -> SnapshotSet:
        c = self.config
        return generate_snapshots(
            self.grid, c.ranges, c.counts, self.grid.mask("omega1"), self.workers
        )

    @cached_property
    def heldout_params(self) -> List[ParamPoint]:
        return midpoint_parameters(self.config.ranges, self.config.counts)

    @cached_property
    def heldout(self) -> List[Field]:
        return solve_snapshots(
            self.grid, self.heldout_params, self.grid.mask("omega1"), self.workers
        )

    @cached_property
    def heldout_truth(self) -> int:
        """Index of the held-out parameter used as the true field.

        The held-out point nearest the centre of the parameter box with alpha
        and beta both nonzero, or the middle point when there is none.
        """
        params = np.array(self.heldout_params, dtype=float)
        ranges = np.array(self.config.ranges, dtype=float)
        centre = ranges.mean(axis=1)
        width = np.where(ranges[:, 1] > ranges[:, 0], ranges[:, 1] - ranges[:, 0], 1.0)
        distance = np.sum(((params - centre) / width) ** 2, axis=1).round(12)
        active = np.all(np.abs(params[:, :2]) > 1e-12 * width[:2], axis=1)
        if not active.any():
            logger.warning("No held-out point with nonzero alpha and beta")
            return len(params) // 2
        distance[~active] = np.inf
        return int(np.argmin(distance))

    def _truth_summary(self) -> str:
        p = self.heldout_params[self.heldout_truth]
        return f"({p.alpha:g}, {p.beta:g}, {p.gamma:g})"

    @cached_property
    def dictionary(self) -> Dictionary:
        c = self.config
        mask = self.grid.mask("omega2")
        centers = default_moment_centers(self.grid, mask, c.sensor_target)
        radius = c.sensor_radius_factor * max(self.grid.hx, self.grid.hy)
        return build_moment_dictionary(self.grid, mask, centers, radius, c.kernel)

    def model(self, product: Product) -> GeimModel:
        if product not in self._models:
            self._models[product] = geim_build(
                self.snapshots.fields,
                self.dictionary,
                self.norm_mask,
                product,
                M_max=self.config.M_max,
                tol=self.config.tol,
            )
        return self._models[product]

    def svd(self, product: Product) -> SvdResult:
        if product not in self._svds:
            self._svds[product] = snapshot_svd(
                self.snapshots.fields, self.norm_mask, product
            )
        return self._svds[product]

    def run(self, experiment: str) -> Dict[str, Any]:
        if experiment not in EXPERIMENTS:
            raise ValueError(
                f"Unknown experiment: {experiment}. Experiments: {list(EXPERIMENTS)}"
            )
        logger.info("Running experiment '%s'", experiment)
        return getattr(self, f"run_{experiment}")()

    def _report(
        self,
        experiment: str,
        tables: Dict[str, pd.DataFrame],
        summary: Dict[str, Any],
        plot: Dict[str, Any],
    ) -> Dict[str, Any]:
        return {
            "experiment": experiment,
            "config_hash": self.config.config_hash,
            "tables": tables,
            "summary": summary,
            "plot": plot,
        }

    def run_snapshots(self) -> Dict[str, Any]:
        snapshots = self.snapshots
        values = snapshots.values()
        omega = self.grid.mask("omega")
        manifest = pd.DataFrame(
            {
                "index": np.arange(len(snapshots)),
                "alpha": [p.alpha for p in snapshots.params],
                "beta": [p.beta for p in snapshots.params],
                "gamma": [p.gamma for p in snapshots.params],
                "norm_l2": row_norms(values, omega, Product.L2),
                "norm_h1": row_norms(values, omega, Product.H1),
            }
        )
        report = self._report(
            "snapshots",
            {"manifest": manifest},
            {"snapshots": len(snapshots), "grid": repr(self.grid)},
            {
                "table": "manifest",
                "x": "index",
                "columns": ["norm_l2", "norm_h1"],
                "title": "Snapshot norms",
                "ylabel": "norm on omega",
                "logscale": False,
            },
        )
        report["snapshot_set"] = snapshots
        return report

    def run_decay(self) -> Dict[str, Any]:
        """Worst training (and held-out) GEIM error against M."""
        columns: Dict[str, Any] = {}
        summary: Dict[str, Any] = {"sensors": len(self.dictionary)}
        M_top = 0
        for product in self.products:
            model = self.model(product)
            s = _suffix(product)
            heldout = [
                float(np.max(geim_errors(model, self.heldout, M)))
                for M in range(model.size + 1)
            ]
            columns[f"worst_{s}"] = model.history
            columns[f"relative_{s}"] = model.history / model.history[0]
            columns[f"heldout_{s}"] = np.array(heldout)
            summary[f"M_final_{s}"] = model.size
            summary[f"final_relative_{s}"] = float(model.history[-1] / model.history[0])
            M_top = max(M_top, model.size)
        table = _padded_table(M_top, columns)
        return self._report(
            "decay",
            {"decay": table},
            summary,
            {
                "table": "decay",
                "x": "M",
                "columns": [k for k in columns if k.startswith("worst_")],
                "title": "Worst GEIM error on the training set",
                "ylabel": "error",
                "logscale": True,
            },
        )

    def run_svd(self) -> Dict[str, Any]:
        """Singular values of the snapshot set in each product."""
        table = pd.DataFrame({"index": np.arange(1, len(self.snapshots) + 1)})
        summary: Dict[str, Any] = {}
        for product in self.products:
            result = self.svd(product)
            s = _suffix(product)
            sigma = result.singular_values
            table[f"sigma_{s}"] = sigma
            table[f"relative_{s}"] = sigma / sigma[0] if sigma[0] > 0 else sigma
            summary[f"rank_{s}"] = result.rank
            if sigma.size >= 10 and sigma[0] > 0:
                summary[f"sigma10_over_sigma1_{s}"] = float(sigma[9] / sigma[0])
        return self._report(
            "svd",
            {"spectrum": table},
            summary,
            {
                "table": "spectrum",
                "x": "index",
                "columns": [c for c in table.columns if c.startswith("relative_")],
                "title": "Snapshot singular values",
                "ylabel": "sigma_n / sigma_1",
                "logscale": True,
            },
        )

    def run_bestfit(self) -> Dict[str, Any]:
        """Worst GEIM error against worst best-fit error with M SVD modes."""
        columns: Dict[str, Any] = {}
        summary: Dict[str, Any] = {}
        M_top = 0
        fields = self.snapshots.fields
        for product in self.products:
            model, result = self.model(product), self.svd(product)
            s = _suffix(product)
            geim = model.history
            best = np.array(
                [
                    float(np.max(best_fit_errors(result, fields, M)))
                    for M in range(model.size + 1)
                ]
            )
            # Undefined once the best fit is exact
            ratio = np.full(best.shape, np.nan)
            np.divide(geim, best, out=ratio, where=best > 0)
            columns[f"geim_{s}"] = geim
            columns[f"bestfit_{s}"] = best
            columns[f"ratio_{s}"] = ratio
            head = ratio[1 : min(10, model.size) + 1]
            if head.size and np.isfinite(head).any():
                summary[f"max_ratio_up_to_10_{s}"] = float(np.nanmax(head))
            M_top = max(M_top, model.size)
        return self._report(
            "bestfit",
            {"bestfit": _padded_table(M_top, columns)},
            summary,
            {
                "table": "bestfit",
                "x": "M",
                "columns": [k for k in columns if not k.startswith("ratio_")],
                "title": "GEIM error against SVD best fit",
                "ylabel": "worst training error",
                "logscale": True,
            },
        )

    def run_lebesgue(self) -> Dict[str, Any]:
        """Empirical and exact Lebesgue constants with the pessimistic bound."""
        columns: Dict[str, Any] = {}
        summary: Dict[str, Any] = {}
        M_top = 0
        tests = self.snapshots.fields + self.heldout
        for product in self.products:
            model = self.model(product)
            s = _suffix(product)
            Ms = range(1, model.size + 1)
            exact = [lebesgue_exact(model, M, product) for M in Ms]
            columns[f"empirical_{s}"] = [np.nan] + [
                lebesgue_empirical(model, M, tests, product) for M in Ms
            ]
            columns[f"exact_{s}"] = [np.nan] + exact
            columns[f"bound_{s}"] = [np.nan] + [
                pessimistic_bound(model, M, product) for M in Ms
            ]
            if exact:
                summary[f"max_exact_{s}"] = float(max(exact))
            M_top = max(M_top, model.size)
        # No M = 0 row
        table = _padded_table(M_top, columns).iloc[1:].reset_index(drop=True)
        return self._report(
            "lebesgue",
            {"lebesgue": table},
            summary,
            {
                "table": "lebesgue",
                "x": "M",
                "columns": [k for k in columns if not k.startswith("bound_")],
                "title": "Norm of the GEIM operator",
                "ylabel": "Lebesgue constant",
                "logscale": False,
            },
        )

    def run_coupled(self) -> Dict[str, Any]:
        """Coupled reconstruction for a training and a held-out truth."""
        product = Product.L2 if Product.L2 in self.products else self.products[0]
        model = self.model(product)
        stab = stability_constant(self.grid, Product.H1)
        middle = len(self.snapshots) // 2
        cases = [
            ("training", self.snapshots.params[middle], self.snapshots.fields[middle]),
            (
                "heldout",
                self.heldout_params[self.heldout_truth],
                self.heldout[self.heldout_truth],
            ),
        ]
        frames = []
        summary: Dict[str, Any] = {"stability_constant": stab}
        for case, params, truth in cases:
            results = coupled_run(model, params, self.grid, truth=truth)
            frame = results_frame(results)
            frame.insert(0, "case", case)
            frame["trace_bound"] = stab * frame["err_trace"]
            frames.append(frame)
            first, last = frame.iloc[0], frame.iloc[-1]
            summary[f"{case}_params"] = (
                f"({params.alpha:g}, {params.beta:g}, {params.gamma:g})"
            )
            for column in ("err_h1_omega1", "err_h1_omega2"):
                if last[column] > 0:
                    decay = float(first[column] / last[column])
                    summary[f"{case}_{column}_decay"] = decay
        return self._report(
            "coupled",
            {"coupled": pd.concat(frames, ignore_index=True)},
            summary,
            {
                "table": "coupled",
                "x": "M",
                "columns": ["err_h1_omega1", "err_h1_omega2"],
                "title": "Coupled reconstruction error",
                "ylabel": "H1 error",
                "logscale": True,
            },
        )

    def run_noise(self) -> Dict[str, Any]:
        """Variance of the averaged multi-series estimator."""
        c = self.config
        ensemble = build_series_ensemble(
            self.snapshots.fields,
            self.dictionary,
            self.norm_mask,
            c.series,
            c.noise_M,
            c.tol,
        )
        truth = self.heldout[self.heldout_truth]
        study = variance_study(
            ensemble, truth, NoiseModel(c.epsilon, c.seed), trials=c.trials
        )
        summary = dict(study.summary)
        summary["truth_params"] = self._truth_summary()
        return self._report(
            "noise",
            {"noise": pd.DataFrame([study.summary]), "series": study.series},
            summary,
            {
                "table": "series",
                "x": "series",
                "columns": ["lambda", "empirical_std"],
                "title": "Per-series Lebesgue constant and noise spread",
                "ylabel": "value",
                "logscale": True,
            },
        )


def _padded_table(M_top: int, columns: Dict[str, Any]) -> pd.DataFrame:
    """Table indexed by M = 0..M_top; shorter columns padded with NaN."""
    table = pd.DataFrame({"M": np.arange(M_top + 1)})
    for name, values in columns.items():
        padded = np.full(M_top + 1, np.nan)
        values = np.asarray(values, dtype=float)
        padded[: values.size] = values
        table[name] = padded
    return table

"""
Noisy sensor readings and the multi-series averaged estimator.

Each reading gets independent additive Gaussian noise drawn from a
counter-based stream keyed by (seed, sensor id) and indexed by the draw
number, so any draw can be regenerated on its own and in any order.
"""

import logging
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.special import ndtri

from .errors import DictionaryExhausted, SizeMismatch
from .fieldcore import Field, Product, SubdomainMask, norm
from .geim import GeimModel, geim_build, geim_coefficients, lebesgue_exact
from .sensors import Dictionary, Sensor, apply

logger = logging.getLogger(__name__)

_MANTISSA = float(2**53)


class NoiseModel:
    """
    I.i.d. additive Gaussian noise on every scalar reading.

    Attributes:
        epsilon (float): Standard deviation of the noise
        seed (int): Stream key shared by every sensor
    """

    def __init__(self, epsilon: float, seed: int = 0):
        if not epsilon >= 0:
            raise ValueError(f"epsilon must be nonnegative, got {epsilon}")
        if seed < 0:
            raise ValueError(f"seed must be nonnegative, got {seed}")
        self.epsilon = float(epsilon)
        self.seed = int(seed)

    def __repr__(self) -> str:
        return f"NoiseModel(epsilon={self.epsilon:g}, seed={self.seed})"

    def draws(self, sensor_ids: Sequence[int], start: int, count: int) -> np.ndarray:
        """(len(sensor_ids), count) standard normals, one stream per sensor."""
        return np.vstack(
            [standard_normals(self.seed, sid, start, count) for sid in sensor_ids]
        ).reshape(len(sensor_ids), count)


def standard_normals(seed: int, sensor_id: int, start: int, count: int) -> np.ndarray:
    """Draws ``start .. start+count-1`` of the stream keyed by (sensor, seed).

    Draw d uses the first 64-bit word of the d-th Philox block after the
    starting counter, mapped to (0, 1) and through the inverse normal CDF.
    """
    key = np.array([sensor_id, seed], dtype=np.uint64)
    counter = np.array([start, 0, 0, 0], dtype=np.uint64)
    bits = np.random.Philox(counter=counter, key=key)
    # One block per draw keeps windows shift-consistent
    words = bits.random_raw(4 * count).reshape(count, 4)[:, 0]
    u = ((words >> np.uint64(11)).astype(np.float64) + 0.5) / _MANTISSA
    return ndtri(u)


def noisy_measure(
    sensor: Sensor, field: Field, nm: NoiseModel, draw_index: int
) -> float:
    """Exact reading plus ``epsilon`` times draw ``draw_index`` of the sensor."""
    exact = apply(sensor, field)
    if nm.epsilon == 0.0:
        return exact
    z = standard_normals(nm.seed, sensor.sensor_id, draw_index, 1)[0]
    return exact + nm.epsilon * float(z)


class SeriesEnsemble:
    """
    GEIM models over pairwise-disjoint sensor sets.

    Attributes:
        models (list): One GeimModel per series, all of dimension M
        M (int): Common dimension
        lambdas (np.ndarray): L2 Lebesgue constant of each series at M
        lambda_bar (float): Harmonic mean of ``lambdas``
    """

    def __init__(self, models: Sequence[GeimModel], M: int, lambdas: Sequence[float]):
        if not models:
            raise ValueError("an ensemble needs at least one series")
        if len(models) != len(lambdas):
            raise SizeMismatch("one Lebesgue constant per series is required")
        self.models = list(models)
        self.M = int(M)
        self.lambdas = np.asarray(lambdas, dtype=float)
        self.lambda_bar = float(1.0 / np.mean(1.0 / self.lambdas))

    @property
    def P(self) -> int:
        return len(self.models)

    @property
    def weights(self) -> np.ndarray:
        """``(lambda_bar / P) / Lambda_p``; sums to one."""
        return (self.lambda_bar / self.P) / self.lambdas

    @property
    def mask(self) -> SubdomainMask:
        return self.models[0].mask

    def __repr__(self) -> str:
        return (
            f"SeriesEnsemble(P={self.P}, M={self.M}, "
            f"lambda_bar={self.lambda_bar:.4g})"
        )

    def sensor_sets(self) -> List[List[int]]:
        return [[int(s) for s in m.sensor_ids[: self.M]] for m in self.models]


def build_series_ensemble(
    snapshots: Sequence[Field],
    dictionary: Dictionary,
    mask: SubdomainMask,
    P: int,
    M: int,
    tol: float = 1e-12,
    product: Union[str, Product] = Product.L2,
) -> SeriesEnsemble:
    """Build P GEIM series, each drawing only on sensors no earlier series used.

    Raises:
        DictionaryExhausted: If fewer than M unused sensors remain for a series
    """
    if P < 1 or M < 1:
        raise SizeMismatch(f"P and M must be positive, got P={P}, M={M}")
    used: List[int] = []
    models = []
    for p in range(P):
        if len(dictionary) - len(used) < M:
            raise DictionaryExhausted(
                f"series {p + 1} needs {M} sensors, "
                f"{len(dictionary) - len(used)} unused remain"
            )
        model = geim_build(
            snapshots, dictionary, mask, product, M_max=M, tol=tol, exclude=used
        )
        used.extend(int(s) for s in model.sensor_ids)
        models.append(model)

    common = min(m.size for m in models)
    if common < M:
        logger.warning(
            "Series converged early; using dimension %d instead of %d", common, M
        )
    models = [m.truncate(common) for m in models]
    lambdas = [lebesgue_exact(m, common, Product.L2) for m in models]
    ensemble = SeriesEnsemble(models, common, lambdas)
    logger.info(
        "Built %d series of dimension %d, lambda_bar=%.4g",
        P,
        common,
        ensemble.lambda_bar,
    )
    return ensemble


def _series_readings(
    model: GeimModel, truth: Field, nm: NoiseModel, M: int, start: int, count: int
) -> np.ndarray:
    exact = model.dictionary.measure(truth, model.sensor_ids[:M])
    noise = nm.epsilon * nm.draws(model.sensor_ids[:M], start, count)
    return exact[:, np.newaxis] + noise


def averaged_reconstruction(
    ens: SeriesEnsemble,
    truth: Field,
    nm: NoiseModel,
    M: Optional[int] = None,
    draw_index: int = 0,
) -> Field:
    """Weighted average of the P noisy series reconstructions.

    Raises:
        SizeMismatch: If M exceeds the ensemble dimension
    """
    M = ens.M if M is None else M
    if M < 1 or M > ens.M:
        raise SizeMismatch(f"requested M={M}, ensemble dimension is {ens.M}")
    weights = ens.weights
    values = np.zeros(truth.grid.n_nodes)
    for weight, model in zip(weights, ens.models):
        readings = _series_readings(model, truth, nm, M, draw_index, 1)[:, 0]
        alpha = geim_coefficients(model, M, readings)
        values += weight * (alpha @ model.basis_values[:M])
    return Field(truth.grid, values)


class VarianceReport:
    """
    Monte-Carlo spread of single-series and averaged reconstructions.

    Attributes:
        summary (dict): Scalar results, one CSV row
        series (pd.DataFrame): Per-series Lebesgue constant, weight and spread
    """

    def __init__(self, summary: Dict[str, Any], series: pd.DataFrame):
        self.summary = summary
        self.series = series

    def __repr__(self) -> str:
        return f"VarianceReport({self.summary})"


def variance_study(
    ens: SeriesEnsemble,
    truth: Field,
    nm: NoiseModel,
    M: Optional[int] = None,
    trials: int = 10_000,
) -> VarianceReport:
    """Compare the noise spread of each series with that of the average.

    The spread of an estimator is the root-mean-square L2 norm (on the
    ensemble mask) of its deviation from the noiseless reconstruction, which
    by linearity is the reconstruction of the pure noise readings.

    Series 1 is the reference: ``empirical_std_single`` is its spread, while
    ``empirical_ratio`` and ``predicted_ratio`` divide by its spread and by
    its Lebesgue constant. The spread of every series is in ``series``.

    Returns:
        VarianceReport with empirical and predicted spread ratios
    """
    M = ens.M if M is None else M
    if M < 1 or M > ens.M:
        raise SizeMismatch(f"requested M={M}, ensemble dimension is {ens.M}")
    if trials < 1:
        raise ValueError(f"trials must be positive, got {trials}")
    mask = ens.mask
    P = ens.P

    # Interpolation is linear, so the error is the interpolant of the noise alone
    coefficients = []
    for model in ens.models:
        noise = nm.epsilon * nm.draws(model.sensor_ids[:M], 0, trials)
        coefficients.append(geim_coefficients(model, M, noise))

    basis = np.vstack([m.basis_values[:M] for m in ens.models])
    weighted = np.asarray(mask.factor(Product.L2) @ basis.T)

    def spread(block: np.ndarray) -> float:
        return float(np.sqrt(np.mean(np.sum((weighted @ block) ** 2, axis=0))))

    # Spread of each series on its own, then of the weighted average
    single = []
    for p in range(P):
        block = np.zeros((P * M, trials))
        block[p * M : (p + 1) * M] = coefficients[p]
        single.append(spread(block))
    averaged = spread(
        np.vstack([w * c for w, c in zip(ens.weights, coefficients)])
    )

    noiseless = np.zeros(truth.grid.n_nodes)
    for weight, model in zip(ens.weights, ens.models):
        readings = model.dictionary.measure(truth, model.sensor_ids[:M])
        coef = geim_coefficients(model, M, readings)
        noiseless += weight * (coef @ model.basis_values[:M])

    condition = bool(np.max(ens.lambdas) < np.sqrt(P))
    if not condition:
        logger.warning(
            "max Lambda_p = %.4g >= sqrt(P) = %.4g; variance reduction not guaranteed",
            np.max(ens.lambdas),
            np.sqrt(P),
        )
    summary = {
        "P": P,
        "M": M,
        "epsilon": nm.epsilon,
        "trials": trials,
        "empirical_std_single": single[0],
        "empirical_std_averaged": averaged,
        "empirical_ratio": averaged / single[0] if single[0] > 0 else float("nan"),
        "predicted_ratio": ens.lambda_bar / (ens.lambdas[0] * np.sqrt(P)),
        "lambda_bar": ens.lambda_bar,
        "lambda_max": float(np.max(ens.lambdas)),
        "condition_holds": condition,
        "variance_reduced": bool(averaged < min(single)) if nm.epsilon > 0 else False,
        "noiseless_error": norm(truth - Field(truth.grid, noiseless), mask, Product.L2),
    }
    series = pd.DataFrame(
        {
            "series": np.arange(1, P + 1),
            "lambda": ens.lambdas,
            "weight": ens.weights,
            "empirical_std": single,
        }
    )
    return VarianceReport(summary, series)

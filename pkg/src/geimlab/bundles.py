"""
On-disk formats: field CSV, snapshot-set directories and model bundles.

Model bundles are ``.npz`` archives carrying the grid, the masks, every
array of the model and, for GEIM, the whole sensor dictionary, so a loaded
model reproduces interpolants bit for bit without any other input.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
import pandas as pd
import toml

from .eim import EimModel
from .errors import GeimError
from .fieldcore import Field, Grid, SubdomainMask
from .geim import GeimModel
from .pde import ParamPoint, SnapshotSet
from .sensors import Dictionary, Sensor, SensorKind

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1

PathLike = Union[str, Path]

GRID_KEYS = ("nx", "ny", "x_min", "x_max", "y_min", "y_max", "interface_col")


class BundleError(GeimError):
    """A file is not a readable bundle of the expected kind and version."""


def _grid_dict(grid: Grid) -> Dict[str, Any]:
    return {key: getattr(grid, key) for key in GRID_KEYS}


def _grid_from(data: Any) -> Grid:
    return Grid(
        int(data["nx"]),
        int(data["ny"]),
        float(data["x_min"]),
        float(data["x_max"]),
        float(data["y_min"]),
        float(data["y_max"]),
        int(data["interface_col"]),
    )


def _grid_arrays(grid: Grid) -> Dict[str, np.ndarray]:
    return {f"grid_{k}": np.asarray(v) for k, v in _grid_dict(grid).items()}


def _grid_from_arrays(archive: Any) -> Grid:
    return _grid_from({k: archive[f"grid_{k}"][()] for k in GRID_KEYS})


def _check_header(archive: Any, kind: str, path: PathLike) -> None:
    if "kind" not in archive or str(archive["kind"][()]) != kind:
        raise BundleError(f"'{path}' is not a {kind} bundle")
    version = int(archive["format_version"][()])
    if version != FORMAT_VERSION:
        raise BundleError(
            f"'{path}' has format version {version}, expected {FORMAT_VERSION}"
        )


def save_field_csv(field: Field, path: PathLike) -> None:
    """Write one ``value`` column in node order below a grid comment line."""
    grid = field.grid
    header = " ".join(f"{k}={v!r}" for k, v in _grid_dict(grid).items())
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(f"# {header}\n")
        frame = pd.DataFrame({"value": field.values})
        frame.to_csv(f, index=False, lineterminator="\n")


def load_field_csv(path: PathLike) -> Field:
    with open(path, encoding="utf-8") as f:
        first = f.readline()
    if not first.startswith("# "):
        raise BundleError(f"'{path}' has no grid header line")
    meta = dict(item.split("=", 1) for item in first[2:].split())
    grid = _grid_from(meta)
    table = pd.read_csv(path, comment="#", float_precision="round_trip")
    return Field(grid, table["value"].to_numpy())


def save_snapshot_set(snapshots: SnapshotSet, directory: PathLike) -> Path:
    """Write ``grid.toml``, ``manifest.csv`` and one ``.npy`` per snapshot."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta = {
        "format_version": FORMAT_VERSION,
        "grid": _grid_dict(snapshots.grid),
        "metadata": snapshots.metadata,
    }
    (directory / "grid.toml").write_text(toml.dumps(meta), encoding="utf-8")
    manifest = pd.DataFrame(
        {
            "index": np.arange(len(snapshots)),
            "alpha": [p.alpha for p in snapshots.params],
            "beta": [p.beta for p in snapshots.params],
            "gamma": [p.gamma for p in snapshots.params],
        }
    )
    manifest.to_csv(directory / "manifest.csv", index=False, lineterminator="\n")
    for i, field in enumerate(snapshots.fields):
        np.save(directory / f"snapshot_{i:04d}.npy", field.values)
    logger.info("Wrote %d snapshots to %s", len(snapshots), directory)
    return directory


def load_snapshot_set(directory: PathLike) -> SnapshotSet:
    directory = Path(directory)
    meta = toml.loads((directory / "grid.toml").read_text(encoding="utf-8"))
    if int(meta.get("format_version", -1)) != FORMAT_VERSION:
        raise BundleError(f"'{directory}' has an unsupported snapshot format")
    grid = _grid_from(meta["grid"])
    manifest = pd.read_csv(directory / "manifest.csv", float_precision="round_trip")
    params = [
        ParamPoint(float(r.alpha), float(r.beta), float(r.gamma))
        for r in manifest.itertuples(index=False)
    ]
    fields = [
        Field(grid, np.load(directory / f"snapshot_{int(i):04d}.npy"))
        for i in manifest["index"]
    ]
    return SnapshotSet(grid, params, fields, meta.get("metadata", {}))


def save_eim_model(model: EimModel, path: PathLike) -> None:
    np.savez(
        path,
        kind=np.asarray("eim"),
        format_version=np.asarray(FORMAT_VERSION),
        mask_name=np.asarray(model.mask.name),
        mask_nodes=model.mask.nodes,
        points=model.points,
        basis_values=model.basis_values,
        B=model.B,
        selected_snapshots=model.selected_snapshots,
        history=model.history,
        **_grid_arrays(model.grid),
    )


def load_eim_model(path: PathLike) -> EimModel:
    with np.load(path, allow_pickle=False) as archive:
        _check_header(archive, "eim", path)
        grid = _grid_from_arrays(archive)
        mask = SubdomainMask(grid, archive["mask_nodes"], str(archive["mask_name"][()]))
        return EimModel(
            mask,
            archive["points"],
            archive["basis_values"],
            archive["B"],
            archive["selected_snapshots"],
            archive["history"],
        )


def _dictionary_arrays(dictionary: Dictionary) -> Dict[str, np.ndarray]:
    sensors = dictionary.sensors
    return {
        "dict_kind": np.asarray(dictionary.kind.value),
        "dict_mask_name": np.asarray(dictionary.subdomain.name),
        "dict_mask_nodes": dictionary.subdomain.nodes,
        "dict_centers": np.array([s.center for s in sensors]),
        "dict_radii": np.array([s.radius for s in sensors]),
        "dict_offsets": np.cumsum([0] + [s.nodes.size for s in sensors]),
        "dict_nodes": np.concatenate([s.nodes for s in sensors]),
        "dict_kernel": np.concatenate([s.kernel for s in sensors]),
        "dict_coefficients": np.concatenate([s.coefficients for s in sensors]),
    }


def _dictionary_from(archive: Any, grid: Grid) -> Dictionary:
    subdomain = SubdomainMask(
        grid, archive["dict_mask_nodes"], str(archive["dict_mask_name"][()])
    )
    kind = SensorKind(str(archive["dict_kind"][()]))
    # Ragged per-sensor arrays are stored flat with offsets
    offsets = archive["dict_offsets"]
    nodes, kernel = archive["dict_nodes"], archive["dict_kernel"]
    coefficients = archive["dict_coefficients"]
    centers, radii = archive["dict_centers"], archive["dict_radii"]
    sensors = [
        Sensor(
            i,
            kind,
            grid,
            (centers[i, 0], centers[i, 1]),
            radii[i],
            nodes[offsets[i] : offsets[i + 1]],
            kernel[offsets[i] : offsets[i + 1]],
            coefficients[offsets[i] : offsets[i + 1]],
        )
        for i in range(len(radii))
    ]
    return Dictionary(sensors, subdomain)


def save_geim_model(model: GeimModel, path: PathLike) -> None:
    np.savez(
        path,
        kind=np.asarray("geim"),
        format_version=np.asarray(FORMAT_VERSION),
        product=np.asarray(model.product.value),
        mask_name=np.asarray(model.mask.name),
        mask_nodes=model.mask.nodes,
        sensor_ids=model.sensor_ids,
        basis_values=model.basis_values,
        B=model.B,
        selected_snapshots=model.selected_snapshots,
        history=model.history,
        **_grid_arrays(model.grid),
        **_dictionary_arrays(model.dictionary),
    )


def load_geim_model(path: PathLike) -> GeimModel:
    with np.load(path, allow_pickle=False) as archive:
        _check_header(archive, "geim", path)
        grid = _grid_from_arrays(archive)
        mask = SubdomainMask(grid, archive["mask_nodes"], str(archive["mask_name"][()]))
        return GeimModel(
            _dictionary_from(archive, grid),
            mask,
            str(archive["product"][()]),
            archive["sensor_ids"],
            archive["basis_values"],
            archive["B"],
            archive["selected_snapshots"],
            archive["history"],
        )

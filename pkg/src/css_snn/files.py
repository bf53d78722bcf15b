"""JSON file formats for networks, datasets, calibrations and reports.

Network file (``format: css-snn/network``, ``version: 1``)::

    {
      "format": "css-snn/network", "version": 1,
      "input_shape": [2],
      "sidecar": "weights.npz",            # optional, relative to the file
      "layers": [
        {"kind": "dense", "weight": [[...]], "bias": [...]},
        {"kind": "relu"},
        {"kind": "conv2d", "weight": "npz:conv1.w", "bias": "npz:conv1.b", "stride": 1, "pad": 1},
        {"kind": "avgpool", "size": 2},
        {"kind": "flatten"}
      ]
    }

Array fields hold nested lists, or ``"npz:<key>"`` to read from the sidecar.
Datasets (``css-snn/dataset``) carry ``x`` and optional integer labels ``y``
in the same container; ``.npz`` files with ``x``/``y`` arrays are accepted
too. Calibrations are ``css-snn/calibration`` files; converted models
(``css-snn/model``) embed the network document plus thresholds and
``horizon``/``precharge``/``alpha``.
"""

from __future__ import annotations

import json
from importlib.resources import files
from pathlib import Path

import numpy as np

from . import __version__
from .conversion import CalibrationResult, SnnModel
from .network import Layer, NetworkError, NetworkSpec

NETWORK_FORMAT = "css-snn/network"
DATASET_FORMAT = "css-snn/dataset"
CALIBRATION_FORMAT = "css-snn/calibration"
MODEL_FORMAT = "css-snn/model"
SCHEMA_VERSION = 1


class LoadError(ValueError):
    """Malformed or inconsistent input file."""


def _read_json(path, expected_format: str) -> dict:
    path = Path(path)
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise LoadError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("format") != expected_format:
        raise LoadError(f"{path}: expected format {expected_format!r}")
    if doc.get("version") != SCHEMA_VERSION:
        raise LoadError(f"{path}: unsupported schema version {doc.get('version')!r}")
    return doc


def load_network(path) -> NetworkSpec:
    path = Path(path)
    return _network_from_doc(_read_json(path, NETWORK_FORMAT), path)


def _network_from_doc(doc: dict, path: Path) -> NetworkSpec:
    sidecar = None
    if doc.get("sidecar"):
        sidecar = np.load(path.parent / doc["sidecar"])
    if "input_shape" not in doc or not isinstance(doc.get("layers"), list):
        raise LoadError(f"{path}: network needs 'input_shape' and a 'layers' list")

    def array(value, i, name):
        if value is None:
            return None
        if isinstance(value, str):
            if not value.startswith("npz:") or sidecar is None:
                raise LoadError(f"{path}: layer {i}: cannot resolve {name} reference {value!r}")
            return np.array(sidecar[value[4:]], dtype=np.float64)
        try:
            return np.array(value, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise LoadError(f"{path}: layer {i}: {name} is not a numeric array") from exc

    layers = []
    for i, entry in enumerate(doc["layers"]):
        if not isinstance(entry, dict) or "kind" not in entry:
            raise LoadError(f"{path}: layer {i}: missing 'kind'")
        unknown = set(entry) - {"kind", "weight", "bias", "stride", "pad", "size", "name"}
        if unknown:
            raise LoadError(f"{path}: layer {i}: unknown field(s) {sorted(unknown)}")
        layers.append(
            Layer(
                entry["kind"],
                array(entry.get("weight"), i, "weight"),
                array(entry.get("bias"), i, "bias"),
                entry.get("stride"),
                entry.get("pad", 0),
                entry.get("size", 2),
            )
        )
    try:
        return NetworkSpec(doc["input_shape"], layers, doc.get("meta", {}))
    except NetworkError as exc:
        raise LoadError(f"{path}: {exc}") from exc


def network_to_dict(spec: NetworkSpec) -> dict:
    layers = []
    for layer in spec.layers:
        entry = {"kind": layer.kind}
        if layer.weight is not None:
            entry["weight"] = layer.weight.tolist()
            entry["bias"] = layer.bias.tolist()
        if layer.kind == "conv2d":
            entry["stride"], entry["pad"] = layer.step, layer.pad
        if layer.kind == "avgpool":
            entry["size"], entry["stride"] = layer.size, layer.step
        layers.append(entry)
    return {
        "format": NETWORK_FORMAT,
        "version": SCHEMA_VERSION,
        "input_shape": list(spec.input_shape),
        "meta": spec.meta,
        "layers": layers,
    }


def save_network(spec: NetworkSpec, path) -> None:
    _write_json(network_to_dict(spec), path)


def load_dataset(path) -> tuple[np.ndarray, np.ndarray | None]:
    path = Path(path)
    if path.suffix == ".npz":
        with np.load(path) as data:
            if "x" not in data:
                raise LoadError(f"{path}: dataset archive lacks 'x'")
            return np.array(data["x"], dtype=np.float64), (np.array(data["y"]) if "y" in data else None)
    doc = _read_json(path, DATASET_FORMAT)
    x = np.array(doc["x"], dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise LoadError(f"{path}: non-finite dataset values")
    y = np.array(doc["y"], dtype=np.int64) if doc.get("y") is not None else None
    if y is not None and len(y) != len(x):
        raise LoadError(f"{path}: {len(x)} samples but {len(y)} labels")
    return x, y


def save_dataset(x, y, path, meta: dict | None = None) -> None:
    doc = {"format": DATASET_FORMAT, "version": SCHEMA_VERSION, "meta": meta or {}, "x": np.asarray(x).tolist()}
    doc["y"] = None if y is None else np.asarray(y).tolist()
    _write_json(doc, path)


def save_calibration(calib: CalibrationResult, path, extra: dict | None = None) -> None:
    doc = {
        "format": CALIBRATION_FORMAT,
        "version": SCHEMA_VERSION,
        "tool_version": __version__,
        "percentile": calib.percentile,
        "n_batches": calib.n_batches,
        "thresholds": {str(i): v for i, v in sorted(calib.thresholds.items())},
        "per_batch": {str(i): v for i, v in sorted(calib.per_batch.items())},
    }
    doc.update(extra or {})
    _write_json(doc, path)


def load_calibration(path) -> CalibrationResult:
    doc = _read_json(path, CALIBRATION_FORMAT)
    try:
        thresholds = {int(k): float(v) for k, v in doc["thresholds"].items()}
        per_batch = {int(k): list(v) for k, v in doc.get("per_batch", {}).items()}
        return CalibrationResult(thresholds, float(doc["percentile"]), int(doc["n_batches"]), per_batch)
    except (KeyError, TypeError, ValueError) as exc:
        raise LoadError(f"{path}: malformed calibration ({exc})") from exc


def _write_json(doc: dict, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=False)
        fh.write("\n")



def fixture_path(name: str) -> Path:
    """Path of a toy fixture shipped with the package (e.g. ``"mlp.json"``)."""
    return Path(str(files("css_snn") / "fixtures" / name))


def save_model(model: SnnModel, path, extra: dict | None = None) -> None:
    doc = {
        "format": MODEL_FORMAT,
        "version": SCHEMA_VERSION,
        "tool_version": __version__,
        "horizon": model.horizon,
        "precharge": model.precharge,
        "alpha": model.alpha,
        "thresholds": {str(i): v for i, v in sorted(model.thresholds.items())},
        "network": network_to_dict(model.spec),
    }
    doc.update(extra or {})
    _write_json(doc, path)


def load_model(path) -> SnnModel:
    path = Path(path)
    doc = _read_json(path, MODEL_FORMAT)
    if not isinstance(doc.get("network"), dict):
        raise LoadError(f"{path}: model file lacks an embedded network")
    spec = _network_from_doc(doc["network"], path)
    try:
        thresholds = {int(k): float(v) for k, v in doc["thresholds"].items()}
        return SnnModel(spec, thresholds, int(doc["horizon"]), int(doc["precharge"]), float(doc["alpha"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise LoadError(f"{path}: malformed model file ({exc})") from exc

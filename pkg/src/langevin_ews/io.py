"""CSV, YAML and JSON readers/writers."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np
import yaml

from .exceptions import ConfigError, InvalidStateError
from .models import ModelSpec, TimeSeries


def fmt(value):
    """17 significant digits for floats so that values round-trip exactly."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % value
    return str(value)


def write_rows(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def write_timeseries_csv(ts, path):
    header = ["t"] + [f"x{j + 1}" for j in range(ts.n)]
    write_rows(path, header, ([t, *col] for t, col in zip(ts.times, ts.values.T)))


def read_timeseries_csv(path, model_tag=None):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "t" or len(header) < 2:
            raise InvalidStateError(f"{path}: expected a header 't,x1,...,xn'")
        data = np.array([[float(v) for v in row] for row in reader if row])
    if data.ndim != 2 or data.shape[0] < 2:
        raise InvalidStateError(f"{path}: need at least two rows")
    t = data[:, 0]
    steps = np.diff(t)
    dt = (t[-1] - t[0]) / (len(t) - 1)
    if not np.allclose(steps, dt, rtol=1e-6, atol=0.0):
        raise InvalidStateError(f"{path}: samples are not uniformly spaced")
    return TimeSeries(float(t[0]), float(dt), data[:, 1:].T, model_tag)


def load_yaml(path):
    try:
        with open(path) as fh:
            cfg = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return cfg


SIMULATION_KEYS = {"t0", "t_end", "dt", "substeps", "x0", "bound"}


def load_model_config(path):
    """Read ``{model: ..., simulation: ...}``; returns ``(ModelSpec, dict)``."""
    cfg = load_yaml(path)
    unknown = set(cfg) - {"model", "simulation"}
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    if "model" not in cfg:
        raise ConfigError(f"{path}: missing 'model' section")
    sim = cfg.get("simulation") or {}
    if not isinstance(sim, dict):
        raise ConfigError(f"{path}: 'simulation' must be a mapping")
    unknown = set(sim) - SIMULATION_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown simulation keys {sorted(unknown)}")
    return ModelSpec.from_config(cfg["model"]), sim


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return None if not math.isfinite(obj) else float(obj)
    return obj


def dump_json(obj, path=None):
    text = json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"
    if path is not None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    return text

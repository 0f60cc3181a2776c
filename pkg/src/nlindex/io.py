"""CSV and JSON persistence for samples, embeddings and landscape artifacts."""
from __future__ import annotations

import csv
import json
import math
import warnings
from pathlib import Path

import numpy as np

from .problems import ConfigError, clip_objective_value
from .sampler import Sample, SampleSet

SAMPLE_KEYS = ("groupId", "iteration", "J")
OPTIONAL_KEYS = ("reference",)


class IngestError(ValueError):
    """Malformed sample file."""


def fmt(x) -> str:
    """Shortest-safe float text: 17 significant digits round-trip exactly."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def write_samples(samples: SampleSet, path) -> None:
    n = samples.samples[0].design.size if samples.samples else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(SAMPLE_KEYS) + ["reference"] + [f"rho_{i}" for i in range(n)])
        for s in samples.samples:
            w.writerow([s.group_id, s.iteration, fmt(s.raw_J), int(s.reference_group)]
                       + [fmt(v) for v in s.design])


def read_samples(path, n_expected: int | None = None, rho_min: float = 1e-6,
                 clip_bound: float = np.inf) -> SampleSet:
    """Load and validate a sample table.

    Required columns are ``groupId, iteration, J`` followed by the design
    densities; a ``reference`` 0/1 column is optional. Densities outside
    ``[rho_min, 1]`` are clamped and counted in ``SampleSet.clamped``.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise IngestError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if tuple(header[:3]) != SAMPLE_KEYS:
        raise IngestError(f"{path}: header must start with {','.join(SAMPLE_KEYS)}, got {','.join(header[:3])}")
    has_ref = len(header) > 3 and header[3] == "reference"
    first_rho = 4 if has_ref else 3
    n = len(header) - first_rho
    if n < 1:
        raise IngestError(f"{path}: no density columns")
    if n_expected is not None and n != n_expected:
        raise ConfigError(f"samples: file has {n} density columns but the problem has {n_expected} elements")
    samples = []
    clamped = 0
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise IngestError(f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}")
        try:
            gid = int(row[0])
            it = int(row[1])
            J = float(row[2])
            ref = bool(int(row[3])) if has_ref else False
            rho = np.array([float(v) for v in row[first_rho:]])
        except ValueError as exc:
            raise IngestError(f"{path}: row {lineno}: non-numeric field ({exc})") from None
        if not np.all(np.isfinite(rho)):
            raise IngestError(f"{path}: row {lineno}: non-finite density")
        out = (rho < rho_min) | (rho > 1.0)
        if out.any():
            clamped += int(out.sum())
            rho = np.clip(rho, rho_min, 1.0)
        samples.append(Sample(gid, it, rho, J, clip_objective_value(J, clip_bound),
                              is_start=(it == 0 and not ref), reference_group=ref))
    if not samples:
        raise IngestError(f"{path}: no sample rows")
    if clamped:
        warnings.warn(f"{clamped} density value(s) clamped to [{rho_min}, 1]", RuntimeWarning, stacklevel=2)
    return SampleSet(samples, clip_bound, clamped=clamped)


def write_embedding(samples: SampleSet, coords, normalized, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["groupId", "iteration", "reference", "isStart", "x", "y", "J", "Jclipped", "Jnorm"])
        for s, (x, y), jn in zip(samples.samples, coords, normalized):
            w.writerow([s.group_id, s.iteration, int(s.reference_group), int(s.is_start),
                        fmt(x), fmt(y), fmt(s.raw_J), fmt(s.clipped_J), fmt(jn)])


def read_embedding(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise IngestError(f"{path}: empty embedding file")
    try:
        return {
            "group_id": np.array([int(r["groupId"]) for r in rows]),
            "iteration": np.array([int(r["iteration"]) for r in rows]),
            "reference": np.array([bool(int(r["reference"])) for r in rows]),
            "is_start": np.array([bool(int(r["isStart"])) for r in rows]),
            "coords": np.array([[float(r["x"]), float(r["y"])] for r in rows]),
            "J": np.array([float(r["Jclipped"]) for r in rows]),
        }
    except (KeyError, ValueError) as exc:
        raise IngestError(f"{path}: malformed embedding table ({exc})") from None


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(obj, path) -> None:
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())

"""Plain-text writers shared by the pipeline (JSON, CSV, OBJ)."""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

__all__ = ["to_jsonable", "dump_json", "write_json", "write_csv", "write_obj", "read_obj"]


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays and tuples into JSON types."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v) or math.isinf(v):
            return repr(v)
        return v
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dump_json(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dump_json(obj))


def write_csv(path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_obj(path, vertices: np.ndarray, triangles: np.ndarray) -> None:
    """Triangle mesh as OBJ: ``v x y z`` lines then 1-based ``f i j k``."""
    V = np.asarray(vertices, dtype=float)
    if V.shape[1] == 2:
        V = np.column_stack([V, np.zeros(len(V))])
    out = [f"v {x!r} {y!r} {z!r}" for x, y, z in V[:, :3].tolist()]
    out += [f"f {i + 1} {j + 1} {k + 1}" for i, j, k in np.asarray(triangles).tolist()]
    Path(path).write_text("\n".join(out) + "\n")


def read_obj(path) -> tuple[np.ndarray, np.ndarray]:
    verts, faces = [], []
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            faces.append([int(x.split("/")[0]) - 1 for x in parts[1:4]])
    return np.asarray(verts), np.asarray(faces, dtype=np.int64)

"""File formats: field JSON, SGRID text, PL JSON and topology outputs.

Floats are written with 17 significant digits so every file round-trips
exactly. All writers go through a temporary file and an atomic rename.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import FormatError
from .field import HighOrderField
from .mesh import KIND_CODES, Mesh
from .transform import PLField, ScalarGrid

FIELD_VERSION = 1
BASIS_NAME = "nodal-lagrange-uniform"


def fmt(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise FormatError(f"cannot serialise non-finite value {x!r}")
    return format(x, ".17g")


def to_json(obj) -> str:
    """Compact JSON with 17-significant-digit floats and stable key order."""
    if isinstance(obj, dict):
        return "{" + ",".join(json.dumps(str(k)) + ":" + to_json(v) for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(to_json(v) for v in obj) + "]"
    if isinstance(obj, np.ndarray):
        return to_json(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def atomic_write(path, text: str) -> None:
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: not UTF-8 text") from exc


def _load_json(path):
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc


# -- meshes and fields ------------------------------------------------------------


def mesh_dict(mesh: Mesh) -> dict:
    return {
        "version": FIELD_VERSION,
        "dimension": 2,
        "vertices": mesh.vertices.tolist(),
        "elements": [{"type": kind, "v": ids} for kind, ids in mesh.elements()],
    }


def _parse_mesh(doc, path) -> Mesh:
    if not isinstance(doc, dict) or "vertices" not in doc or "elements" not in doc:
        raise FormatError(f"{path}: expected an object with 'vertices' and 'elements'")
    if doc.get("version", FIELD_VERSION) != FIELD_VERSION:
        raise FormatError(f"{path}: unsupported version {doc.get('version')!r}")
    if doc.get("dimension", 2) != 2:
        raise FormatError(f"{path}: only 2D meshes are supported")
    try:
        elements = []
        for el in doc["elements"]:
            kind = el["type"]
            if kind not in KIND_CODES:
                raise FormatError(f"{path}: unknown element type {kind!r}")
            elements.append((kind, [int(i) for i in el["v"]]))
        verts = np.asarray(doc["vertices"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: malformed mesh ({exc})") from exc
    return Mesh(verts, elements)


def write_mesh(path, mesh: Mesh) -> None:
    doc = mesh_dict(mesh)
    doc["fields"] = []
    atomic_write(path, to_json(doc) + "\n")


def read_mesh(path) -> Mesh:
    return _parse_mesh(_load_json(path), path)


def write_fields(path, fields: list[HighOrderField]) -> None:
    if not fields:
        raise ValueError("no fields to write")
    mesh = fields[0].mesh
    if any(f.mesh is not mesh for f in fields):
        raise ValueError("all fields in one file must share a mesh")
    doc = mesh_dict(mesh)
    doc["fields"] = [
        {"name": f.name, "degree": f.degree, "basis": BASIS_NAME, "coeffs": f.coeff_lists()} for f in fields
    ]
    atomic_write(path, to_json(doc) + "\n")


def read_fields(path) -> dict[str, HighOrderField]:
    doc = _load_json(path)
    mesh = _parse_mesh(doc, path)
    out: dict[str, HighOrderField] = {}
    for entry in doc.get("fields", []):
        try:
            name = str(entry["name"])
            if entry.get("basis", BASIS_NAME) != BASIS_NAME:
                raise FormatError(f"{path}: field {name!r} uses unsupported basis {entry['basis']!r}")
            out[name] = HighOrderField(mesh, int(entry["degree"]), entry["coeffs"], name=name)
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}: malformed field entry ({exc})") from exc
    return out


def read_field(path, name: str | None = None) -> HighOrderField:
    fields = read_fields(path)
    if not fields:
        raise FormatError(f"{path}: file holds no fields")
    if name is None:
        return next(iter(fields.values()))
    if name not in fields:
        raise FormatError(f"{path}: no field named {name!r} (available: {', '.join(fields)})")
    return fields[name]


# -- grids ------------------------------------------------------------------


def _grid_text(magic: str, grid_res, origin, spacing, rows, flags=None) -> str:
    dim = len(grid_res)
    lines = [
        f"{magic} 1",
        f"dim {dim}",
        "res " + " ".join(str(int(r)) for r in grid_res),
        "origin " + " ".join(fmt(o) for o in origin),
        "spacing " + " ".join(fmt(s) for s in spacing),
    ]
    lines.extend(rows)
    if flags is not None:
        nx = int(grid_res[0])
        lines.append("flags")
        f = np.asarray(flags, dtype=np.int8).reshape(-1, nx)
        lines.extend(" ".join("1" if b else "0" for b in row) for row in f)
    return "\n".join(lines) + "\n"


def write_grid(path, grid: ScalarGrid) -> None:
    nx = grid.res[0]
    vals = grid.values.reshape(-1, nx)
    rows = [" ".join(fmt(v) for v in row) for row in vals]
    atomic_write(path, _grid_text("SGRID", grid.res, grid.origin, grid.spacing, rows, grid.flags))


def write_labels(path, grid: ScalarGrid, labels) -> None:
    """Per-node integer labels on the lattice of ``grid``."""
    nx = grid.res[0]
    lab = np.asarray(labels, dtype=np.int64).reshape(-1, nx)
    rows = [" ".join(str(int(v)) for v in row) for row in lab]
    atomic_write(path, _grid_text("SEGM", grid.res, grid.origin, grid.spacing, rows))


def _parse_grid_text(text: str, path, magic: str):
    lines = text.splitlines()
    try:
        head = lines[0].split()
        if head != [magic, "1"]:
            raise FormatError(f"{path}: expected '{magic} 1' header, got {lines[0]!r}")
        kv = {}
        for line in lines[1:5]:
            key, *vals = line.split()
            kv[key] = vals
        dim = int(kv["dim"][0])
        res = tuple(int(v) for v in kv["res"])
        origin = tuple(float(v) for v in kv["origin"])
        spacing = tuple(float(v) for v in kv["spacing"])
    except (IndexError, KeyError, ValueError) as exc:
        raise FormatError(f"{path}: malformed {magic} header") from exc
    if dim not in (2, 3) or len(res) != dim or len(origin) != dim or len(spacing) != dim:
        raise FormatError(f"{path}: header dimensions disagree")
    body = lines[5:]
    flags_at = next((i for i, line in enumerate(body) if line.strip() == "flags"), None)
    value_tokens = " ".join(body if flags_at is None else body[:flags_at]).split()
    flag_tokens = None if flags_at is None else " ".join(body[flags_at + 1 :]).split()
    count = int(np.prod(res))
    if len(value_tokens) != count:
        raise FormatError(f"{path}: expected {count} values, found {len(value_tokens)}")
    if flag_tokens is not None and len(flag_tokens) != count:
        raise FormatError(f"{path}: expected {count} flags, found {len(flag_tokens)}")
    return res, origin, spacing, value_tokens, flag_tokens


def parse_grid(text: str, path="<grid>") -> ScalarGrid:
    res, origin, spacing, vals, flags = _parse_grid_text(text, path, "SGRID")
    try:
        values = np.array([float(v) for v in vals])
        fl = None if flags is None else np.array([int(v) for v in flags], dtype=bool)
    except ValueError as exc:
        raise FormatError(f"{path}: non-numeric grid entry") from exc
    if not np.all(np.isfinite(values)):
        raise FormatError(f"{path}: grid values must be finite")
    return ScalarGrid(res, origin, spacing, values, fl)


def read_grid(path) -> ScalarGrid:
    return parse_grid(_read_text(path), path)


def read_labels(path) -> tuple[ScalarGrid, np.ndarray]:
    res, origin, spacing, vals, _ = _parse_grid_text(_read_text(path), path, "SEGM")
    labels = np.array([int(v) for v in vals], dtype=np.int64)
    return ScalarGrid(res, origin, spacing, np.zeros(len(labels))), labels


# -- PL fields --------------------------------------------------------------------


def pl_dict(pl: PLField) -> dict:
    return {"vertices": pl.vertices.tolist(), "triangles": pl.triangles.tolist(), "values": pl.values.tolist()}


def write_pl(path, pl: PLField) -> None:
    atomic_write(path, to_json(pl_dict(pl)) + "\n")


def read_pl(path) -> PLField:
    doc = _load_json(path)
    try:
        return PLField(doc["vertices"], doc["triangles"], doc["values"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: malformed PL field ({exc})") from exc


def read_scalar(path) -> ScalarGrid | PLField:
    """Either an SGRID file or a PL JSON file, detected from the content."""
    text = _read_text(path)
    if text.lstrip().startswith("SGRID"):
        return parse_grid(text, path)
    if text.lstrip().startswith("{"):
        return read_pl(path)
    raise FormatError(f"{path}: neither an SGRID nor a PL field file")


def write_scalar(path, data) -> None:
    if isinstance(data, ScalarGrid):
        write_grid(path, data)
    else:
        write_pl(path, data)


# -- topology outputs ------------------------------------------------------------


def pairs_list(pairs) -> list[dict]:
    return [
        {
            "birth": {"vertex": p.birth_vertex, "value": p.birth_value, "type": p.birth_type},
            "death": {"vertex": p.death_vertex, "value": p.death_value, "type": p.death_type},
            "persistence": p.persistence,
            "kind": p.kind,
        }
        for p in pairs
    ]


def write_pairs(path, pairs) -> None:
    atomic_write(path, to_json(pairs_list(pairs)) + "\n")


def read_pairs(path):
    from .topology.persistence import PersistencePair

    doc = _load_json(path)
    try:
        return [
            PersistencePair(
                int(d["birth"]["vertex"]),
                float(d["birth"]["value"]),
                int(d["death"]["vertex"]),
                float(d["death"]["value"]),
                str(d["kind"]),
            )
            for d in doc
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: malformed pairs file ({exc})") from exc


def write_curve(path, rows) -> None:
    lines = ["threshold,count_leq,count_gt"]
    lines.extend(f"{fmt(t)},{leq},{gt}" for t, leq, gt in rows)
    atomic_write(path, "\n".join(lines) + "\n")


def write_json(path, obj) -> None:
    atomic_write(path, to_json(obj) + "\n")

"""Command-line pipeline driver.

Exit status: 0 on success, 2 on usage errors, 1 on data errors. Diagnostics
go to standard error; outputs are written atomically.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import io, transform
from .demo import make_demo_mesh
from .errors import HotopoError, InvalidSpec
from .field import analytic, project_analytic
from .topology import (
    classify_critical_points,
    contour_tree,
    from_pl,
    persistence_curve,
    persistence_pairs,
    segmentation,
    simplify,
    triangulate_grid,
)
from .transform import PLField, ScalarGrid


class UsageError(Exception):
    pass


# -- argument types ------------------------------------------------------------------


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _nonneg_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not np.isfinite(v) or v < 0:
        raise argparse.ArgumentTypeError(f"expected a finite number >= 0, got {text!r}")
    return v


def _positive_float(text: str) -> float:
    v = _nonneg_float(text)
    if v == 0:
        raise argparse.ArgumentTypeError("expected a number > 0")
    return v


def _finite_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not np.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a finite number, got {text!r}")
    return v


def _resolution(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected NXxNY, got {text!r}")
    try:
        nx, ny = (int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected NXxNY, got {text!r}") from None
    if nx < 2 or ny < 2:
        raise argparse.ArgumentTypeError("resolution needs at least 2 nodes per axis")
    return nx, ny


def _cells(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    try:
        nx, ny = (int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected NXxNY, got {text!r}") from None
    if nx < 1 or ny < 1:
        raise argparse.ArgumentTypeError("grid needs at least one cell per axis")
    return nx, ny


def _bbox(text: str):
    if text == "auto":
        return "auto"
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or x0,y0,x1,y1, got {text!r}") from None
    if len(vals) != 4 or not (vals[2] > vals[0] and vals[3] > vals[1]):
        raise argparse.ArgumentTypeError("bbox must be x0,y0,x1,y1 with x1 > x0 and y1 > y0")
    return tuple(vals)


def _thresholds(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("at least one threshold is required")
    return vals


# -- parser ----------------------------------------------------------------------


def _add_lsiac_options(p: argparse.ArgumentParser, theta: bool = True, deriv: bool = True) -> None:
    if theta:
        p.add_argument("--theta", type=_finite_float, default=0.0, help="filter angle in degrees")
    p.add_argument("--ksiac", type=_positive_int, default=None, help="kernel half-order (default: field degree)")
    p.add_argument("--spline-order", type=_positive_int, default=None, help="B-spline order (default: ksiac + 1)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--adaptive", action="store_true", help="adapt H to the element sizes (default)")
    g.add_argument("--H", type=_positive_float, default=None, help="fixed characteristic length")
    if deriv:
        p.add_argument("--deriv", type=int, choices=(0, 1), default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hotopo", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", help="write a seeded demo mesh")
    p.add_argument("--grid", type=_cells, required=True, help="cells per axis, e.g. 14x14")
    p.add_argument("--jitter", type=_nonneg_float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    kind = p.add_mutually_exclusive_group()
    kind.add_argument("--tri", dest="tri", action="store_true", default=True)
    kind.add_argument("--quad", dest="tri", action="store_false")
    p.add_argument("--bbox", type=_bbox, default=(0.0, 0.0, 1.0, 1.0))
    p.add_argument("--out", required=True)

    p = sub.add_parser("project", help="L2-project a built-in analytic field")
    p.add_argument("--field", required=True)
    p.add_argument("--mesh", required=True)
    p.add_argument("--degree", type=_positive_int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sample", help="sample a field on a regular grid")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--name", default=None)
    p.add_argument("--res", type=_resolution, required=True)
    p.add_argument("--bbox", type=_bbox, default="auto")
    p.add_argument("--out", required=True)

    p = sub.add_parser("subdivide", help="uniformly subdivide the mesh with boundary averaging")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--name", default=None)
    p.add_argument("--factor", type=_positive_int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("lsiac", help="L-SIAC filter sampled on a regular grid")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--name", default=None)
    p.add_argument("--res", type=_resolution, required=True)
    p.add_argument("--bbox", type=_bbox, default="auto")
    _add_lsiac_options(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("vorticity", help="v_x - u_y by one of three pipelines")
    p.add_argument("--method", choices=("fd", "subdivided", "lsiac"), required=True)
    p.add_argument("--u", help="u input: SGRID (fd) or PL JSON (subdivided)")
    p.add_argument("--v", help="v input: SGRID (fd) or PL JSON (subdivided)")
    p.add_argument("--in", dest="inp", help="field file holding u and v (lsiac)")
    p.add_argument("--u-name", default="u")
    p.add_argument("--v-name", default="v")
    p.add_argument("--res", type=_resolution)
    p.add_argument("--bbox", type=_bbox, default="auto")
    _add_lsiac_options(p, theta=False, deriv=False)
    p.add_argument("--out", required=True)

    p = sub.add_parser("normalize", help="rescale values to [0, 1]")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)

    topo = sub.add_parser("topo", help="topological analysis of PL data").add_subparsers(dest="topo", required=True)
    p = topo.add_parser("critical")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p = topo.add_parser("persistence")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p = topo.add_parser("curve")
    p.add_argument("--in", dest="inp", required=True, help="pairs JSON")
    p.add_argument("--thresholds", type=_thresholds, default=None)
    p.add_argument("--include-essential", action="store_true")
    p.add_argument("--out", required=True)
    p = topo.add_parser("simplify")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--epsilon", type=_nonneg_float, required=True)
    p.add_argument("--out", required=True)
    p = topo.add_parser("contour-tree")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--segmentation", default=None, help="also write per-vertex arc labels here")
    p.add_argument("--out", required=True)
    p = topo.add_parser("segment")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--min-size", type=_positive_int, default=1)
    p.add_argument("--leaf-only", action="store_true", help="label non-leaf or small segments -1")
    p.add_argument("--out", required=True)
    return ap


# -- commands ---------------------------------------------------------------------


def _threads() -> int | None:
    env = os.environ.get("HOTOPO_THREADS")
    if env is None:
        return None
    try:
        n = int(env)
    except ValueError:
        raise UsageError(f"HOTOPO_THREADS must be a positive integer, got {env!r}") from None
    if n < 1:
        raise UsageError(f"HOTOPO_THREADS must be a positive integer, got {env!r}")
    return n


def _complex(data):
    if isinstance(data, ScalarGrid):
        return triangulate_grid(data)
    return from_pl(data)


def _position(data, v: int) -> list[float]:
    if isinstance(data, ScalarGrid):
        return data.positions()[v].tolist()
    return data.vertices[v].tolist()


def _cmd_mesh(a):
    try:
        mesh = make_demo_mesh(a.grid[0], a.grid[1], jitter=a.jitter, seed=a.seed, tri=a.tri, bbox=a.bbox)
    except InvalidSpec as exc:
        raise UsageError(str(exc)) from None
    io.write_mesh(a.out, mesh)


def _cmd_project(a):
    af = analytic(a.field)
    mesh = io.read_mesh(a.mesh)
    io.write_fields(a.out, project_analytic(af, mesh, a.degree))


def _cmd_sample(a):
    field = io.read_field(a.inp, a.name)
    io.write_grid(a.out, transform.sample_grid(field, a.res, a.bbox))


def _cmd_subdivide(a):
    field = io.read_field(a.inp, a.name)
    io.write_pl(a.out, transform.subdivide(field, a.factor))


def _cmd_lsiac(a):
    field = io.read_field(a.inp, a.name)
    g = transform.lsiac_grid(
        field, a.res, a.bbox, a.theta, a.ksiac, a.spline_order, a.deriv, a.H, threads=_threads()
    )
    io.write_grid(a.out, g)


def _cmd_vorticity(a):
    if a.method == "lsiac":
        if not a.inp or a.res is None:
            raise UsageError("--method lsiac needs --in and --res")
        fields = io.read_fields(a.inp)
        for nm in (a.u_name, a.v_name):
            if nm not in fields:
                raise HotopoError(f"{a.inp}: no field named {nm!r}")
        g = transform.vorticity_lsiac(
            fields[a.u_name], fields[a.v_name], a.res, a.bbox, a.ksiac, a.spline_order, a.H, threads=_threads()
        )
        io.write_grid(a.out, g)
        return
    if not a.u or not a.v:
        raise UsageError(f"--method {a.method} needs --u and --v")
    if a.method == "fd":
        io.write_grid(a.out, transform.vorticity_grid_fd(io.read_grid(a.u), io.read_grid(a.v)))
    else:
        io.write_pl(a.out, transform.vorticity_subdivided(io.read_pl(a.u), io.read_pl(a.v)))


def _cmd_normalize(a):
    io.write_scalar(a.out, transform.normalize(io.read_scalar(a.inp)))


def _cmd_topo(a):
    if a.topo == "curve":
        pairs = io.read_pairs(a.inp)
        io.write_curve(a.out, persistence_curve(pairs, a.thresholds, a.include_essential))
        return
    data = io.read_scalar(a.inp)
    tf = _complex(data)
    if a.topo == "critical":
        cps = classify_critical_points(tf)
        io.write_json(
            a.out,
            [
                {
                    "vertex": c.vertex,
                    "value": c.value,
                    "type": c.type,
                    "index": c.index,
                    "multiplicity": c.multiplicity,
                    "position": _position(data, c.vertex),
                }
                for c in cps
            ],
        )
    elif a.topo == "persistence":
        io.write_pairs(a.out, persistence_pairs(tf))
    elif a.topo == "simplify":
        g = simplify(tf, a.epsilon)
        if isinstance(data, ScalarGrid):
            out = ScalarGrid(data.res, data.origin, data.spacing, g.values, data.flags)
        else:
            out = PLField(data.vertices, data.triangles, g.values)
        io.write_scalar(a.out, out)
    elif a.topo == "contour-tree":
        tree = contour_tree(tf)
        seg = segmentation(tree, tf)
        io.write_json(a.out, _tree_doc(tree, seg, data))
        if a.segmentation:
            _write_segmentation(a.segmentation, data, seg.labels)
    elif a.topo == "segment":
        tree = contour_tree(tf)
        seg = segmentation(tree, tf)
        labels = seg.labels
        if a.leaf_only:
            keep = np.array([s.is_leaf and s.size >= a.min_size for s in seg.segments])
            labels = np.where(keep[labels], labels, -1)
        _write_segmentation(a.out, data, labels)


def _tree_doc(tree, seg, data) -> dict:
    leaves = set(tree.leaves().tolist())
    nodes = [
        {
            "vertex": int(v),
            "value": float(tree.values[v]),
            "type": tree.node_type(int(v)),
            "leaf": int(v) in leaves,
            "position": _position(data, int(v)),
        }
        for v in tree.nodes
    ]
    arcs = [
        {
            "id": s.id,
            "lo": s.lo,
            "hi": s.hi,
            "size": s.size,
            "leaf": s.is_leaf,
            "depth": s.depth,
            "extremum": s.extremum_value,
        }
        for s in seg.segments
    ]
    return {"nodes": nodes, "arcs": arcs, "leaf_segments": len(seg.leaf_segments())}


def _write_segmentation(path, data, labels) -> None:
    if isinstance(data, ScalarGrid):
        io.write_labels(path, data, labels)
    else:
        io.write_json(path, {"labels": np.asarray(labels).tolist()})


COMMANDS = {
    "mesh": _cmd_mesh,
    "project": _cmd_project,
    "sample": _cmd_sample,
    "subdivide": _cmd_subdivide,
    "lsiac": _cmd_lsiac,
    "vorticity": _cmd_vorticity,
    "normalize": _cmd_normalize,
    "topo": _cmd_topo,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the message
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"hotopo: usage error: {exc}", file=sys.stderr)
        return 2
    except (HotopoError, ValueError, OSError) as exc:
        print(f"hotopo: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

import json
import subprocess
import sys

import numpy as np
import pytest

from hotopo import analytic, io, make_demo_mesh, project
from hotopo.cli import run
from hotopo.errors import FormatError
from hotopo.field import project_analytic
from hotopo.mesh import Mesh
from hotopo.topology import persistence_pairs, triangulate_grid
from hotopo.transform import PLField, ScalarGrid, sample_grid, subdivide


@pytest.fixture
def small_field():
    mesh = make_demo_mesh(4, 3, jitter=0.2, seed=3, tri=False)
    return project(analytic("paper2d"), mesh, 2)


# -- round trips ------------------------------------------------------------------


def test_field_round_trip(tmp_path, small_field, rng):
    other = project(lambda x, y: np.exp(x - y) / 3, small_field.mesh, 2, name="w")
    io.write_fields(tmp_path / "f.json", [small_field, other])
    back = io.read_fields(tmp_path / "f.json")
    assert list(back) == ["u", "w"]
    np.testing.assert_array_equal(back["u"].coeffs, small_field.coeffs)
    np.testing.assert_array_equal(back["w"].coeffs, other.coeffs)
    np.testing.assert_array_equal(back["u"].mesh.vertices, small_field.mesh.vertices)
    assert back["u"].mesh.kinds.tolist() == small_field.mesh.kinds.tolist()


def test_mesh_round_trip_mixed(tmp_path):
    verts = np.array([[0, 0], [1, 0], [2, 0], [0, 1], [1, 1], [2, 1.0]]) / 3
    mesh = Mesh.from_arrays(verts, triangles=[[1, 2, 5], [1, 5, 4]], quads=[[0, 1, 4, 3]])
    io.write_mesh(tmp_path / "m.json", mesh)
    back = io.read_mesh(tmp_path / "m.json")
    np.testing.assert_array_equal(back.vertices, mesh.vertices)
    assert list(back.elements()) == list(mesh.elements())


def test_grid_round_trip_with_flags(tmp_path, rng):
    vals = rng.standard_normal(12) * 1e-7 + np.pi
    g = ScalarGrid((4, 3), (0.1, -0.2), (1 / 3, 0.7), vals, rng.random(12) < 0.5)
    io.write_grid(tmp_path / "g.sgrid", g)
    back = io.read_grid(tmp_path / "g.sgrid")
    assert back.res == g.res and back.origin == g.origin and back.spacing == g.spacing
    np.testing.assert_array_equal(back.values, g.values)
    np.testing.assert_array_equal(back.flags, g.flags)


def test_grid_round_trip_3d(tmp_path, rng):
    g = ScalarGrid((3, 2, 2), (0, 0, 0), (1, 1, 1), rng.random(12))
    io.write_grid(tmp_path / "g.sgrid", g)
    np.testing.assert_array_equal(io.read_grid(tmp_path / "g.sgrid").values, g.values)


def test_labels_round_trip(tmp_path):
    g = ScalarGrid((3, 2), (0, 0), (1, 1), np.zeros(6))
    io.write_labels(tmp_path / "s.segm", g, [0, 4, -1, 2, 2, 7])
    _, labels = io.read_labels(tmp_path / "s.segm")
    assert labels.tolist() == [0, 4, -1, 2, 2, 7]


def test_pl_round_trip(tmp_path, small_field):
    pl = subdivide(small_field, 2)
    io.write_pl(tmp_path / "p.json", pl)
    back = io.read_pl(tmp_path / "p.json")
    np.testing.assert_array_equal(back.vertices, pl.vertices)
    np.testing.assert_array_equal(back.triangles, pl.triangles)
    np.testing.assert_array_equal(back.values, pl.values)


def test_pairs_round_trip(tmp_path, rng):
    tf = triangulate_grid(ScalarGrid((9, 9), (0, 0), (1, 1), rng.random(81) / 7))
    pairs = persistence_pairs(tf)
    io.write_pairs(tmp_path / "pairs.json", pairs)
    assert io.read_pairs(tmp_path / "pairs.json") == pairs


def test_seventeen_digits():
    for x in (0.1, 1 / 3, np.nextafter(1.0, 2.0), 5e-324, -1.7976931348623157e308):
        assert float(io.fmt(x)) == x


def test_non_finite_rejected():
    with pytest.raises(FormatError):
        io.fmt(float("nan"))


def test_read_scalar_detects_format(tmp_path, small_field):
    io.write_grid(tmp_path / "g", sample_grid(small_field, (5, 5)))
    io.write_pl(tmp_path / "p", subdivide(small_field, 1))
    assert isinstance(io.read_scalar(tmp_path / "g"), ScalarGrid)
    assert isinstance(io.read_scalar(tmp_path / "p"), PLField)
    (tmp_path / "x").write_text("hello\n")
    with pytest.raises(FormatError):
        io.read_scalar(tmp_path / "x")


@pytest.mark.parametrize(
    "text",
    [
        "SGRID 2\ndim 2\nres 2 2\norigin 0 0\nspacing 1 1\n1 2\n3 4\n",
        "SGRID 1\ndim 2\nres 2 2\norigin 0 0\nspacing 1 1\n1 2\n3\n",
        "SGRID 1\ndim 2\nres 2 2\norigin 0 0\nspacing 1 1\n1 2\n3 nan\n",
        "SGRID 1\ndim 2\nres 2 2\norigin 0\nspacing 1 1\n1 2\n3 4\n",
    ],
)
def test_malformed_grid(text):
    with pytest.raises(FormatError):
        io.parse_grid(text)


def test_atomic_write_leaves_no_temp(tmp_path):
    io.atomic_write(tmp_path / "a.txt", "x\n")
    io.atomic_write(tmp_path / "a.txt", "y\n")
    assert [p.name for p in tmp_path.iterdir()] == ["a.txt"]
    assert (tmp_path / "a.txt").read_text() == "y\n"


# -- mesh command --------------------------------------------------------------


def test_mesh_command_counts(tmp_path):
    assert run(["mesh", "--grid", "10x10", "--jitter", "0", "--tri", "--out", str(tmp_path / "m.json")]) == 0
    mesh = io.read_mesh(tmp_path / "m.json")
    assert mesh.n_elements == 200 and mesh.n_vertices == 121


def test_mesh_command_seeded(tmp_path):
    argv = ["mesh", "--grid", "10x10", "--jitter", "0.2", "--seed", "7", "--tri"]
    run(argv + ["--out", str(tmp_path / "a.json")])
    run(argv + ["--out", str(tmp_path / "b.json")])
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    run(["mesh", "--grid", "10x10", "--jitter", "0.2", "--seed", "8", "--tri", "--out", str(tmp_path / "c.json")])
    assert (tmp_path / "a.json").read_bytes() != (tmp_path / "c.json").read_bytes()


@pytest.mark.parametrize("tri", [True, False])
def test_jittered_mesh_invariants(tri):
    mesh = make_demo_mesh(12, 9, jitter=0.29, seed=11, tri=tri)
    for _, ids in mesh.elements():
        poly = mesh.vertices[ids]
        x, y = poly[:, 0], poly[:, 1]
        assert 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y) > 0
    counts = np.array([len(v) for v in mesh.edge_elements.values()])
    assert set(counts.tolist()) <= {1, 2}
    assert np.count_nonzero(counts == 1) == 2 * (12 + 9)


def test_mesh_command_rejects_big_jitter(tmp_path, capsys):
    assert run(["mesh", "--grid", "4x4", "--jitter", "0.3", "--out", str(tmp_path / "m.json")]) == 2
    assert "jitter" in capsys.readouterr().err
    assert not (tmp_path / "m.json").exists()


# -- exit codes -------------------------------------------------------------------


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["frobnicate"],
        ["sample", "--in", "f.json", "--res", "0x4", "--out", "x"],
        ["sample", "--in", "f.json", "--res", "4by4", "--out", "x"],
        ["lsiac", "--in", "f.json", "--res", "4x4", "--H", "-1", "--out", "x"],
        ["lsiac", "--in", "f.json", "--res", "4x4", "--H", "0.1", "--adaptive", "--out", "x"],
        ["topo", "simplify", "--in", "g", "--epsilon", "-0.1", "--out", "x"],
        ["topo", "curve", "--in", "p", "--thresholds", "0.1,abc", "--out", "x"],
        ["sample", "--in", "f.json", "--res", "4x4", "--out", "x", "--bogus"],
        ["vorticity", "--method", "fd", "--out", "x"],
    ],
)
def test_usage_errors_exit_2(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert run(argv) == 2
    assert not (tmp_path / "x").exists()


def test_data_errors_exit_1(tmp_path, capsys, small_field):
    missing = str(tmp_path / "nope.json")
    assert run(["sample", "--in", missing, "--res", "4x4", "--out", str(tmp_path / "x")]) == 1
    assert "nope.json" in capsys.readouterr().err
    io.write_fields(tmp_path / "f.json", [small_field])
    assert run(["sample", "--in", str(tmp_path / "f.json"), "--name", "zz", "--res", "4x4", "--out", "x"]) == 1
    assert "'zz'" in capsys.readouterr().err
    (tmp_path / "bad.json").write_text("{not json")
    assert run(["topo", "persistence", "--in", str(tmp_path / "bad.json"), "--out", str(tmp_path / "x")]) == 1
    assert "bad.json" in capsys.readouterr().err


def test_bad_thread_env_is_usage_error(tmp_path, monkeypatch, small_field):
    io.write_fields(tmp_path / "f.json", [small_field])
    monkeypatch.setenv("HOTOPO_THREADS", "zero")
    assert run(["lsiac", "--in", str(tmp_path / "f.json"), "--res", "4x4", "--out", str(tmp_path / "x")]) == 2


def test_console_script_exit_status(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "hotopo.cli", "topo", "persistence", "--in", str(tmp_path / "nope")],
        capture_output=True,
        text=True,
    )
    assert out.returncode == 2
    assert out.stdout == ""
    assert "--out" in out.stderr


# -- pipelines ------------------------------------------------------------------


def _pipeline(d, threads, monkeypatch):
    monkeypatch.setenv("HOTOPO_THREADS", str(threads))
    d.mkdir()
    steps = [
        ["mesh", "--grid", "5x5", "--jitter", "0.2", "--seed", "1", "--out", "mesh.json"],
        ["project", "--field", "paper2d", "--mesh", "mesh.json", "--degree", "2", "--out", "f.json"],
        ["sample", "--in", "f.json", "--res", "30x30", "--out", "s.sgrid"],
        ["subdivide", "--in", "f.json", "--factor", "3", "--out", "sub.json"],
        ["lsiac", "--in", "f.json", "--res", "12x12", "--out", "l.sgrid"],
        ["lsiac", "--in", "f.json", "--res", "9x9", "--theta", "30", "--deriv", "1", "--out", "ld.sgrid"],
        ["normalize", "--in", "s.sgrid", "--out", "n.sgrid"],
        ["normalize", "--in", "sub.json", "--out", "nsub.json"],
        ["topo", "critical", "--in", "s.sgrid", "--out", "cp.json"],
        ["topo", "persistence", "--in", "s.sgrid", "--out", "pairs.json"],
        ["topo", "curve", "--in", "pairs.json", "--out", "curve.csv"],
        ["topo", "simplify", "--in", "s.sgrid", "--epsilon", "0.4", "--out", "ss.sgrid"],
        ["topo", "contour-tree", "--in", "ss.sgrid", "--segmentation", "seg.segm", "--out", "tree.json"],
        ["topo", "segment", "--in", "sub.json", "--leaf-only", "--min-size", "3", "--out", "subseg.json"],
        ["mesh", "--grid", "4x4", "--out", "rm.json"],
        ["project", "--field", "rotation", "--mesh", "rm.json", "--degree", "1", "--out", "rot.json"],
        ["sample", "--in", "rot.json", "--name", "u", "--res", "7x7", "--out", "ru.sgrid"],
        ["sample", "--in", "rot.json", "--name", "v", "--res", "7x7", "--out", "rv.sgrid"],
        ["vorticity", "--method", "fd", "--u", "ru.sgrid", "--v", "rv.sgrid", "--out", "wfd.sgrid"],
        ["subdivide", "--in", "rot.json", "--name", "u", "--out", "su.json"],
        ["subdivide", "--in", "rot.json", "--name", "v", "--out", "sv.json"],
        ["vorticity", "--method", "subdivided", "--u", "su.json", "--v", "sv.json", "--out", "wsub.json"],
        ["vorticity", "--method", "lsiac", "--in", "rot.json", "--res", "8x8", "--out", "wl.sgrid"],
    ]
    for argv in steps:
        argv = [str(d / a) if a.endswith((".json", ".sgrid", ".csv", ".segm")) else a for a in argv]
        assert run(argv) == 0, argv
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_pipeline_outputs(tmp_path, monkeypatch):
    files = _pipeline(tmp_path / "a", 1, monkeypatch)
    tree = json.loads(files["tree.json"])
    assert tree["leaf_segments"] == sum(a["leaf"] for a in tree["arcs"])
    assert files["curve.csv"].startswith(b"threshold,count_leq,count_gt\n")
    wfd = io.parse_grid(files["wfd.sgrid"].decode())
    np.testing.assert_allclose(wfd.values, 2.0, atol=1e-10)
    n = io.parse_grid(files["n.sgrid"].decode())
    assert n.values.min() == 0.0 and n.values.max() == 1.0


def test_pipeline_byte_identical_across_threads(tmp_path, monkeypatch):
    a = _pipeline(tmp_path / "a", 1, monkeypatch)
    b = _pipeline(tmp_path / "b", 3, monkeypatch)
    c = _pipeline(tmp_path / "c", 1, monkeypatch)
    assert a.keys() == b.keys() == c.keys()
    for name in a:
        assert a[name] == b[name] == c[name], name


def test_project_analytic_names():
    mesh = make_demo_mesh(2, 2)
    assert [f.name for f in project_analytic(analytic("rotation"), mesh, 1)] == ["rotation", "u", "v"]
    assert [f.name for f in project_analytic(analytic("paper2d"), mesh, 1)] == ["u"]

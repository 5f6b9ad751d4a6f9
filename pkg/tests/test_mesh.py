import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import synth
from mobius_ot.errors import (IndexOutOfRangeError, MeshParseError, NotDiskTypeError, ValidationError)
from mobius_ot.mesh import (TriMesh, build_midedge, dump_mesh, load_mesh, normalize_area, save_mesh,
                            validate)
from mobius_ot.synth import synth_surface

TRI_OFF = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n"
SQUARE_OBJ = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3\nf 1 3 4\n"


def test_load_single_triangle_off():
    m = load_mesh(io.StringIO(TRI_OFF), "off")
    assert (m.n_vertices, m.n_edges, m.n_faces) == (3, 3, 1)


def test_off_face_index_out_of_range():
    bad = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 99\n"
    with pytest.raises(IndexOutOfRangeError):
        load_mesh(io.StringIO(bad), "off")


def test_load_square_obj():
    m = load_mesh(io.StringIO(SQUARE_OBJ), "obj")
    assert (m.n_vertices, m.n_edges, m.n_faces) == (4, 5, 2)
    assert len(m.boundary_loop) == 4


def test_obj_slash_and_negative_indices():
    text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2/5/1 -1\n"
    m = load_mesh(io.StringIO(text), "obj")
    assert m.faces.tolist() == [[0, 1, 2]]


def test_off_counts_on_header_line():
    m = load_mesh(io.StringIO("OFF 3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n"), "off")
    assert m.n_faces == 1


@pytest.mark.parametrize("text", ["", "OFF\n3 1\n0 0 0\n", "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n4 0 1 2 0\n",
                                  "OFF\n3 1 0\n0 0 x\n1 0 0\n0 1 0\n3 0 1 2\n"])
def test_malformed_off(text):
    with pytest.raises(MeshParseError):
        load_mesh(io.StringIO(text), "off")


def test_vertex_positions_preserved_exactly():
    m = load_mesh(io.StringIO("OFF\n3 1 0\n0.1 0.2 0.3\n1e-7 0 0\n0 1 0\n3 0 1 2\n"), "off")
    assert m.vertices[0].tolist() == [0.1, 0.2, 0.3]
    assert m.vertices[1, 0] == 1e-7


@pytest.mark.parametrize("fmt", ["off", "obj"])
def test_dump_roundtrip(tmp_path, fmt):
    m = synth_surface("two-bumps", 12)
    path = tmp_path / f"m.{fmt}"
    save_mesh(m, path)
    back = load_mesh(path)
    assert np.array_equal(back.vertices, m.vertices)
    assert np.array_equal(back.faces, m.faces)
    assert dump_mesh(back, fmt) == dump_mesh(m, fmt)


def test_validate_square(square):
    r = validate(square)
    assert r.euler_characteristic == 1 and r.is_disk_type
    assert validate(square) == r


def test_validate_tetrahedron(tetrahedron):
    r = validate(tetrahedron)
    assert r.euler_characteristic == 2
    assert r.boundary_loop_count == 0
    assert not r.is_disk_type


def test_validate_triangle(triangle):
    r = validate(triangle)
    assert r.euler_characteristic == 1 and r.is_disk_type


def test_validate_nonmanifold_and_degenerate():
    fan = TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1]], [[0, 1, 2], [0, 3, 1], [0, 1, 4]])
    assert validate(fan).nonmanifold_edges
    flat = TriMesh([[0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 1, 0]], [[0, 1, 2], [0, 2, 3]])
    r = validate(flat)
    assert r.degenerate_faces == (0,) and not r.is_disk_type


def test_annulus_has_two_loops():
    # strip of quads around a square hole
    outer = [[0, 0], [3, 0], [3, 3], [0, 3]]
    inner = [[1, 1], [2, 1], [2, 2], [1, 2]]
    v = [[x, y, 0] for x, y in outer + inner]
    f = []
    for k in range(4):
        a, b, c, d = k, (k + 1) % 4, 4 + (k + 1) % 4, 4 + k
        f += [[a, b, c], [a, c, d]]
    r = validate(TriMesh(v, f))
    assert r.boundary_loop_count == 2 and r.euler_characteristic == 0 and not r.is_disk_type
    with pytest.raises(NotDiskTypeError):
        build_midedge(TriMesh(v, f))


def test_midedge_triangle(triangle):
    me = build_midedge(triangle)
    assert me.n_vertices == 3 and len(me.faces) == 1


def test_midedge_square_shares_diagonal(square):
    me = build_midedge(square)
    assert me.n_vertices == 5 and len(me.faces) == 2
    shared = set(me.faces[0]) & set(me.faces[1])
    assert len(shared) == 1
    assert np.allclose(me.vertices[shared.pop()], [0.5, 0.5, 0])


def test_midedge_midpoint():
    m = TriMesh([[0, 0, 0], [2, 0, 0], [0, 2, 0]], [[0, 1, 2]])
    me = build_midedge(m)
    k = [tuple(e) for e in m.edges.tolist()].index((0, 1))
    assert me.vertices[k].tolist() == [1.0, 0.0, 0.0]


def test_midedge_face_order_and_orientation():
    m = synth("gaussian-bump", 12)
    me = build_midedge(m)
    f = m.faces
    ends = me.parent_edges[me.faces]
    for c in range(3):
        pair = np.sort(np.stack([f[:, c], f[:, (c + 1) % 3]], axis=1), axis=1)
        assert np.array_equal(ends[:, c], pair)
    # same orientation as the parent
    def normals(v, faces):
        p = v[faces]
        return np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    assert (np.einsum("ij,ij->i", normals(m.vertices, f), normals(me.vertices, me.faces)) > 0).all()


@pytest.mark.parametrize("kind", ["flat-disk", "two-bumps", "bent-sheet"])
def test_midedge_area_is_quarter(kind):
    m = synth(kind, 16)
    areas = build_midedge(m).face_areas
    assert areas.sum() == pytest.approx(0.25 * m.total_area, rel=1e-12)
    assert np.allclose(areas, 0.25 * m.face_areas, rtol=1e-12, atol=0)


def test_midedge_vertices_touch_at_most_two_faces():
    me = build_midedge(synth("two-bumps", 12))
    assert np.bincount(me.faces.reshape(-1)).max() <= 2


def test_normalize_area_examples(square):
    big = square.scaled(2.0)
    out, s = normalize_area(big)
    assert s == pytest.approx(0.5) and out.total_area == pytest.approx(1.0, abs=1e-12)
    out, s = normalize_area(square)
    assert s == 1.0 and out is square
    right = TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
    out, s = normalize_area(right)
    assert s == pytest.approx(np.sqrt(2)) and out.total_area == pytest.approx(1.0, abs=1e-12)


def test_normalize_zero_area():
    flat = TriMesh([[0, 0, 0], [1, 0, 0], [2, 0, 0]], [[0, 1, 2]])
    with pytest.raises(ValidationError):
        normalize_area(flat)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 100.0), st.sampled_from(["flat-disk", "gaussian-bump", "bent-sheet"]))
def test_normalize_area_property(factor, kind):
    m = synth_surface(kind, 8).scaled(factor)
    assert normalize_area(m)[0].total_area == pytest.approx(1.0, abs=1e-12)


def test_boundary_loop_is_cycle():
    m = synth("two-bumps", 16)
    loop = m.boundary_loop
    be = {tuple(sorted(e)) for e in m.edges[m.boundary_edges].tolist()}
    steps = {tuple(sorted((int(a), int(b)))) for a, b in zip(loop, np.roll(loop, -1))}
    assert steps == be


def test_synth_variants_match_flat():
    flat = synth_surface("flat-disk", 16)
    assert np.array_equal(synth_surface("bent-sheet", 16, angle=0).vertices, flat.vertices)
    assert np.array_equal(synth_surface("gaussian-bump", 16, height=0).vertices[:, :2], flat.vertices[:, :2])
    assert np.all(synth_surface("gaussian-bump", 16, height=0).vertices[:, 2] == 0)


def test_synth_bent_sheet_is_isometric():
    flat, bent = synth_surface("flat-disk", 16), synth_surface("bent-sheet", 16)
    # lengths along y are preserved exactly; lengths along x are arcs vs chords
    e = flat.edges
    lf = np.linalg.norm(flat.vertices[e[:, 0]] - flat.vertices[e[:, 1]], axis=1)
    lb = np.linalg.norm(bent.vertices[e[:, 0]] - bent.vertices[e[:, 1]], axis=1)
    assert np.abs(lf - lb).max() < 1e-3
    assert (lb <= lf + 1e-15).all()


def test_synth_rejects_bad_input():
    with pytest.raises(ValidationError):
        synth_surface("sphere", 16)
    with pytest.raises(ValidationError):
        synth_surface("flat-disk", 4)


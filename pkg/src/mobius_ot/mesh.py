"""Triangle meshes of disk type: loading, topology checks, mid-edge meshes."""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse

from .errors import (
    IndexOutOfRangeError,
    MeshParseError,
    NotDiskTypeError,
    ValidationError,
)

# relative to total area
DEGENERATE_AREA_RATIO = 1e-14


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


class TriMesh:
    """Immutable oriented triangle mesh.

    Parameters
    ----------
    vertices : array_like, shape (V, 3)
        Vertex positions.
    faces : array_like, shape (F, 3)
        Vertex indices of each face, oriented ``i -> j -> k``.

    Attributes
    ----------
    edges : ndarray, shape (E, 2)
        Unique undirected edges, each stored as ``(min, max)``.
    face_edges : ndarray, shape (F, 3)
        Edge index of the half-edges ``(i, j)``, ``(j, k)``, ``(k, i)`` of
        every face. This is also the vertex list of the mid-edge face.
    edge_faces : ndarray, shape (E, 2)
        The (first two) faces incident to each edge, ``-1`` if absent.
    edge_face_count : ndarray, shape (E,)
        Number of faces incident to each edge.
    """

    def __init__(self, vertices, faces):
        v = np.array(vertices, dtype=np.float64)
        f = np.array(faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValidationError(f"vertices must have shape (V, 3), got {v.shape}")
        if f.size == 0:
            f = f.reshape(0, 3)
        if f.ndim != 2 or f.shape[1] != 3:
            raise ValidationError(f"faces must have shape (F, 3), got {f.shape}")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            bad = int(f.max()) if f.max() >= len(v) else int(f.min())
            raise IndexOutOfRangeError(
                f"face references vertex {bad} but mesh has {len(v)} vertices"
            )
        self.vertices = _frozen(v)
        self.faces = _frozen(f)

        half = np.stack([f, np.roll(f, -1, axis=1)], axis=2).reshape(-1, 2)
        key = np.sort(half, axis=1)
        edges, inverse = np.unique(key, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        self.edges = _frozen(edges.reshape(-1, 2))
        self.face_edges = _frozen(inverse.reshape(-1, 3))

        count = np.bincount(inverse, minlength=len(edges))
        edge_faces = np.full((len(edges), 2), -1, dtype=np.int64)
        face_of_half = np.repeat(np.arange(len(f)), 3)
        order = np.argsort(inverse, kind="stable")
        starts = np.concatenate([[0], np.cumsum(count)[:-1]])
        first = order[starts[count > 0]]
        edge_faces[count > 0, 0] = face_of_half[first]
        two = count >= 2
        edge_faces[two, 1] = face_of_half[order[starts[two] + 1]]
        self.edge_faces = _frozen(edge_faces)
        self.edge_face_count = _frozen(count)
        self._half_edges = half

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def n_faces(self):
        return len(self.faces)

    @cached_property
    def face_areas(self):
        p = self.vertices[self.faces]
        cr = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        return _frozen(0.5 * np.linalg.norm(cr, axis=1))

    @cached_property
    def face_normals(self):
        """Unit normals following the face orientation."""
        p = self.vertices[self.faces]
        cr = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        norm = np.linalg.norm(cr, axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return _frozen(np.where(norm > 0, cr / norm, 0.0))

    @property
    def total_area(self):
        return float(self.face_areas.sum())

    @cached_property
    def boundary_edges(self):
        return _frozen(np.flatnonzero(self.edge_face_count == 1))

    @cached_property
    def boundary_loops(self):
        """Boundary cycles as ordered vertex lists, following face orientation."""
        half = self._half_edges
        edge_of_half = self.face_edges.reshape(-1)
        bmask = self.edge_face_count[edge_of_half] == 1
        bhalf = half[bmask]
        outgoing = {}
        for h, (a, _) in enumerate(bhalf):
            outgoing.setdefault(int(a), []).append(h)
        used = np.zeros(len(bhalf), dtype=bool)
        loops = []
        for start in range(len(bhalf)):
            if used[start]:
                continue
            loop = []
            h = start
            while h is not None and not used[h]:
                used[h] = True
                loop.append(int(bhalf[h, 0]))
                nxt = [g for g in outgoing.get(int(bhalf[h, 1]), []) if not used[g]]
                h = nxt[0] if nxt else None
            loops.append(np.array(loop, dtype=np.int64))
        return tuple(loops)

    @property
    def boundary_loop(self):
        """The single boundary loop of a disk-type mesh."""
        loops = self.boundary_loops
        if len(loops) != 1:
            raise NotDiskTypeError(f"expected one boundary loop, found {len(loops)}")
        return loops[0]

    @cached_property
    def boundary_vertices(self):
        return _frozen(np.unique(self.edges[self.boundary_edges]))

    def vertex_graph(self):
        """Sparse symmetric edge graph weighted by Euclidean edge length."""
        e = self.edges
        w = np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)
        n = self.n_vertices
        g = sparse.coo_matrix((w, (e[:, 0], e[:, 1])), shape=(n, n))
        return (g + g.T).tocsr()

    def scaled(self, factor):
        return TriMesh(self.vertices * factor, self.faces)

    def transformed(self, rotation=None, translation=None):
        v = self.vertices
        if rotation is not None:
            v = v @ np.asarray(rotation, dtype=float).T
        if translation is not None:
            v = v + np.asarray(translation, dtype=float)
        return TriMesh(v, self.faces)

    def __repr__(self):
        return f"TriMesh(V={self.n_vertices}, E={self.n_edges}, F={self.n_faces})"


@dataclass(frozen=True)
class TopologyReport:
    euler_characteristic: int
    boundary_loop_count: int
    nonmanifold_edges: tuple
    degenerate_faces: tuple
    is_disk_type: bool


def validate(mesh: TriMesh) -> TopologyReport:
    """Compute the topology report of ``mesh``; never raises."""
    euler = mesh.n_vertices - mesh.n_edges + mesh.n_faces
    loops = len(mesh.boundary_loops)
    nonmanifold = tuple(int(e) for e in np.flatnonzero(mesh.edge_face_count > 2))
    total = mesh.total_area
    degenerate = tuple(
        int(i) for i in np.flatnonzero(mesh.face_areas < DEGENERATE_AREA_RATIO * total)
    )
    if total <= 0:
        degenerate = tuple(range(mesh.n_faces))
    ok = euler == 1 and loops == 1 and not nonmanifold and not degenerate
    return TopologyReport(euler, loops, nonmanifold, degenerate, bool(ok and mesh.n_faces >= 1))


def require_disk(mesh: TriMesh) -> None:
    report = validate(mesh)
    if not report.is_disk_type:
        raise NotDiskTypeError(
            "mesh is not disk-type: "
            f"euler={report.euler_characteristic}, loops={report.boundary_loop_count}, "
            f"nonmanifold edges={len(report.nonmanifold_edges)}, "
            f"degenerate faces={len(report.degenerate_faces)}"
        )


@dataclass(frozen=True)
class MidEdgeMesh:
    """Mid-edge companion of a disk-type mesh.

    Vertex ``r`` sits at the midpoint of parent edge ``r``; face ``f`` joins the
    midpoints of the edges of parent face ``f`` in the parent orientation.
    Every mid-edge vertex touches one or two faces, so the mesh is not a
    manifold.
    """

    vertices: np.ndarray
    faces: np.ndarray
    parent_edges: np.ndarray
    boundary: np.ndarray

    @property
    def n_vertices(self):
        return len(self.vertices)

    @cached_property
    def face_areas(self):
        p = self.vertices[self.faces]
        cr = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        return _frozen(0.5 * np.linalg.norm(cr, axis=1))

    def graph(self):
        """Sparse symmetric graph of mid-edge edges weighted by 3D length."""
        f = self.faces
        a = np.concatenate([f[:, 0], f[:, 1], f[:, 2]])
        b = np.concatenate([f[:, 1], f[:, 2], f[:, 0]])
        w = np.linalg.norm(self.vertices[a] - self.vertices[b], axis=1)
        n = self.n_vertices
        g = sparse.coo_matrix((w, (a, b)), shape=(n, n)).tocsr()
        return g.maximum(g.T).tocsr()


def build_midedge(mesh: TriMesh) -> MidEdgeMesh:
    require_disk(mesh)
    mid = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    return MidEdgeMesh(
        vertices=_frozen(mid),
        faces=mesh.face_edges,
        parent_edges=mesh.edges,
        boundary=mesh.boundary_edges,
    )


def normalize_area(mesh: TriMesh):
    """Scale ``mesh`` about the origin to unit total area.

    Returns the scaled mesh and the linear scale factor applied.
    """
    total = mesh.total_area
    if not total > 0:
        raise ValidationError("mesh has zero total area")
    scale = 1.0 / np.sqrt(total)
    if scale == 1.0:
        return mesh, 1.0
    return mesh.scaled(scale), float(scale)


# ---------------------------------------------------------------- file formats

FORMATS = ("off", "obj")


def _open_text(source):
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            data = fh.read()
    elif isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    else:
        data = source.read()
    if isinstance(data, bytes):
        try:
            data = data.decode("ascii")
        except UnicodeDecodeError as exc:
            raise MeshParseError("mesh file is not ASCII text") from exc
    return data


def _guess_format(source, fmt):
    if fmt is not None:
        fmt = fmt.lower()
    elif isinstance(source, (str, os.PathLike)):
        fmt = os.path.splitext(os.fspath(source))[1].lstrip(".").lower()
    if fmt not in FORMATS:
        raise MeshParseError(f"unsupported mesh format {fmt!r}; use OFF or OBJ")
    return fmt


def _parse_off(text):
    tokens = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.append(line.split())
    if not tokens or not tokens[0][0].upper().endswith("OFF"):
        raise MeshParseError("missing OFF header")
    if tokens[0][0].upper() != "OFF":
        raise MeshParseError(f"unsupported OFF variant {tokens[0][0]!r}")
    head = tokens[0][1:]
    rows = tokens[1:]
    if not head:
        if not rows:
            raise MeshParseError("missing OFF counts line")
        head, rows = rows[0], rows[1:]
    try:
        nv, nf = int(head[0]), int(head[1])
    except (IndexError, ValueError) as exc:
        raise MeshParseError("malformed OFF counts line") from exc
    if len(rows) < nv + nf:
        raise MeshParseError(f"OFF file truncated: expected {nv + nf} records, got {len(rows)}")
    try:
        verts = [[float(x) for x in r[:3]] for r in rows[:nv]]
    except ValueError as exc:
        raise MeshParseError("malformed OFF vertex line") from exc
    if any(len(v) != 3 for v in verts):
        raise MeshParseError("OFF vertex line needs three coordinates")
    faces = []
    for r in rows[nv:nv + nf]:
        try:
            n = int(r[0])
            idx = [int(x) for x in r[1:n + 1]]
        except ValueError as exc:
            raise MeshParseError("malformed OFF face line") from exc
        if n != 3 or len(idx) != 3:
            raise MeshParseError("only triangular OFF faces are supported")
        faces.append(idx)
    return verts, faces


def _parse_obj(text):
    verts, faces = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split("#", 1)[0].split()
        if not parts:
            continue
        tag = parts[0]
        if tag == "v":
            try:
                verts.append([float(x) for x in parts[1:4]])
            except ValueError as exc:
                raise MeshParseError(f"line {lineno}: malformed vertex") from exc
            if len(verts[-1]) != 3:
                raise MeshParseError(f"line {lineno}: vertex needs three coordinates")
        elif tag == "f":
            if len(parts) != 4:
                raise MeshParseError(f"line {lineno}: only triangular faces are supported")
            idx = []
            for p in parts[1:]:
                try:
                    k = int(p.split("/")[0])
                except ValueError as exc:
                    raise MeshParseError(f"line {lineno}: malformed face") from exc
                if k == 0:
                    raise IndexOutOfRangeError(f"line {lineno}: OBJ indices are 1-based")
                idx.append(k - 1 if k > 0 else len(verts) + k)
            faces.append(idx)
    return verts, faces


def load_mesh(source, format=None) -> TriMesh:
    """Read an ASCII OFF or OBJ triangle mesh.

    ``source`` is a path, raw bytes, or a readable (binary or text) stream.
    """
    fmt = _guess_format(source, format)
    text = _open_text(source)
    verts, faces = (_parse_off if fmt == "off" else _parse_obj)(text)
    if not verts:
        raise MeshParseError("mesh has no vertices")
    return TriMesh(np.array(verts, dtype=float).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3))


def dump_mesh(mesh: TriMesh, format="off") -> str:
    fmt = format.lower()
    out = io.StringIO()
    if fmt == "off":
        out.write(f"OFF\n{mesh.n_vertices} {mesh.n_faces} {mesh.n_edges}\n")
        for x, y, z in mesh.vertices.tolist():
            out.write(f"{x!r} {y!r} {z!r}\n")
        for i, j, k in mesh.faces.tolist():
            out.write(f"3 {i} {j} {k}\n")
    elif fmt == "obj":
        for x, y, z in mesh.vertices.tolist():
            out.write(f"v {x!r} {y!r} {z!r}\n")
        for i, j, k in mesh.faces.tolist():
            out.write(f"f {i + 1} {j + 1} {k + 1}\n")
    else:
        raise MeshParseError(f"unsupported mesh format {format!r}")
    return out.getvalue()


def save_mesh(mesh: TriMesh, path, format=None):
    fmt = _guess_format(path, format)
    with open(path, "w") as fh:
        fh.write(dump_mesh(mesh, fmt))

"""Discrete conformal flattening of disk-type meshes onto the unit disk.

A discrete harmonic function ``u`` (piecewise linear, one face excised, two of
its vertices pinned to 0 and 1) is paired with its conjugate ``u*``, obtained
by rotating ``grad u`` a quarter turn inside each face and integrating across
mid-edges. ``Phi = u + i u*`` is a similarity on every mid-edge face and sends
the mesh boundary onto a horizontal slit; the inverse of ``w -> w + 1/w`` then
carries the slit domain to the unit disk.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.sparse.linalg import spsolve

from .errors import (
    BranchError,
    CollapsedFaceError,
    DegenerateFaceError,
    IntegrationMismatchError,
    SingularSystemError,
    ValidationError,
)
from .mesh import DEGENERATE_AREA_RATIO, TriMesh, require_disk

RESIDUAL_TOL = 1e-10
MISMATCH_TOL = 1e-6
COLLINEAR_TOL = 1e-6
COLLAPSE_TOL = 1e-14


def _cotangents(mesh, faces):
    """Cotangent of the angle at each corner of ``faces``, shape (F, 3)."""
    p = mesh.vertices[mesh.faces[faces]]
    cots = np.empty((len(faces), 3))
    for c in range(3):
        a = p[:, (c + 1) % 3] - p[:, c]
        b = p[:, (c + 2) % 3] - p[:, c]
        cross = np.linalg.norm(np.cross(a, b), axis=1)
        cots[:, c] = np.einsum("ij,ij->i", a, b) / cross
    return cots


def _active_faces(mesh, exclude):
    keep = np.ones(mesh.n_faces, dtype=bool)
    if exclude is not None:
        keep[exclude] = False
    return np.flatnonzero(keep)


def assemble_dirichlet(mesh: TriMesh, exclude=None):
    """Stiffness matrix ``L[i, j] = integral <grad phi_i, grad phi_j>``.

    Built from cotangent weights: each face contributes ``-cot(angle)/2`` to the
    entry of the edge opposite that angle. Faces listed in ``exclude`` are left
    out. Rows sum to zero.
    """
    faces = _active_faces(mesh, exclude)
    area = mesh.face_areas[faces]
    if np.any(area <= DEGENERATE_AREA_RATIO * max(mesh.total_area, np.finfo(float).tiny)):
        bad = faces[np.argmin(area)]
        raise DegenerateFaceError(f"face {bad} has (near) zero area")
    cots = _cotangents(mesh, faces)
    f = mesh.faces[faces]
    rows, cols, vals = [], [], []
    for c in range(3):
        i, j = f[:, (c + 1) % 3], f[:, (c + 2) % 3]
        w = 0.5 * cots[:, c]
        rows += [i, j, i, j]
        cols += [j, i, i, j]
        vals += [-w, -w, w, w]
    n = mesh.n_vertices
    L = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    return L.tocsr()


def dirichlet_energy(L, u):
    return float(u @ (L @ u))


def default_excised_face(mesh: TriMesh) -> int:
    """Face whose centroid is graph-geodesically farthest from the boundary."""
    g = mesh.vertex_graph()
    d = csgraph.dijkstra(g, indices=mesh.boundary_vertices, min_only=True)
    p = mesh.vertices[mesh.faces]
    centroid = p.mean(axis=1)
    to_corner = np.linalg.norm(p - centroid[:, None, :], axis=2)
    score = np.min(d[mesh.faces] + to_corner, axis=1)
    # faces touching the boundary cannot be excised
    score[np.any(mesh.edge_face_count[mesh.face_edges] == 1, axis=1)] = -np.inf
    if not np.isfinite(score).any():
        raise ValidationError("mesh has no interior face to excise")
    return int(np.argmax(score))


@dataclass(frozen=True)
class HarmonicField:
    u: np.ndarray
    u_star: np.ndarray
    excised_face: int
    pinned: tuple
    residual: float
    mismatch: float


def _face_gradients(mesh, u, faces):
    """Per-face gradient of the piecewise linear ``u``, shape (F, 3)."""
    f = mesh.faces[faces]
    p = mesh.vertices[f]
    n = mesh.face_normals[faces]
    area2 = 2.0 * mesh.face_areas[faces][:, None]
    grad = np.zeros((len(faces), 3))
    for c in range(3):
        prev, nxt = p[:, (c + 2) % 3], p[:, (c + 1) % 3]
        grad += u[f[:, c]][:, None] * np.cross(n, prev - nxt) / area2
    return grad


def solve_harmonic(mesh: TriMesh, excised=None, pins=None) -> HarmonicField:
    """Discrete harmonic ``u`` on the mesh minus ``excised``, with two vertices
    of the excised face pinned to 0 and 1, plus its conjugate."""
    require_disk(mesh)
    if excised is None:
        excised = default_excised_face(mesh)
    excised = int(excised)
    if not 0 <= excised < mesh.n_faces:
        raise ValidationError(f"excised face {excised} out of range")
    if np.any(mesh.edge_face_count[mesh.face_edges[excised]] == 1):
        raise ValidationError("the excised face must not touch the boundary")
    fv = [int(v) for v in mesh.faces[excised]]
    if pins is None:
        pins = (fv[0], fv[1])
    pins = tuple(int(p) for p in pins)
    if len(pins) != 2 or pins[0] == pins[1] or not set(pins) <= set(fv):
        raise ValidationError("pins must be two distinct vertices of the excised face")

    L = assemble_dirichlet(mesh, exclude=[excised]).tocsc()
    n = mesh.n_vertices
    used = np.zeros(n, dtype=bool)
    used[mesh.faces[_active_faces(mesh, [excised])].reshape(-1)] = True
    ncomp, _ = csgraph.connected_components(abs(L) + sparse.identity(n), directed=False)
    if ncomp != 1 or not used.all():
        raise SingularSystemError("mesh is disconnected after excising the face")

    u = np.zeros(n)
    u[pins[1]] = 1.0
    free = np.setdiff1d(np.arange(n), pins)
    A = L[free][:, free].tocsc()
    rhs = -(L[free][:, list(pins)] @ np.array([0.0, 1.0]))
    x = spsolve(A, rhs)
    # one step of iterative refinement
    x = x + spsolve(A, rhs - A @ x)
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("harmonic system is singular")
    u[free] = x
    residual = float(np.linalg.norm(A @ x - rhs) / max(np.linalg.norm(rhs), 1e-300))
    if residual > RESIDUAL_TOL:
        raise SingularSystemError(f"harmonic solve residual {residual:.3e} too large")
    u.setflags(write=False)
    u_star, mismatch = conjugate_harmonic(mesh, u, excised)
    return HarmonicField(u, u_star, excised, pins, residual, mismatch)


def conjugate_harmonic(mesh: TriMesh, u, excised=None):
    """Conjugate function at the mid-edge vertices.

    Returns ``(u_star, mismatch)`` where ``mismatch`` is the largest
    disagreement between the two faces sharing a mid-edge vertex. ``u_star``
    is zero at the first mid-edge vertex of the first face kept.
    """
    u = np.asarray(u, dtype=float)
    exclude = None if excised is None else [int(excised)]
    faces = _active_faces(mesh, exclude)
    fe = mesh.face_edges[faces]
    mid = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    rot = np.cross(mesh.face_normals[faces], _face_gradients(mesh, u, faces))
    # *u restricted to a face is <J grad u, x> + const
    local = np.einsum("fk,fck->fc", rot, mid[fe])

    slot = np.full(mesh.n_faces, -1)
    slot[faces] = np.arange(len(faces))
    ef = mesh.edge_faces
    inner = np.flatnonzero((ef[:, 1] >= 0) & (slot[ef[:, 0]] >= 0) & (slot[np.maximum(ef[:, 1], 0)] >= 0))
    fa, fb = slot[ef[inner, 0]], slot[ef[inner, 1]]
    m = len(faces)
    adj = sparse.coo_matrix(
        (np.concatenate([inner + 1, inner + 1]), (np.concatenate([fa, fb]), np.concatenate([fb, fa]))),
        shape=(m, m),
    ).tocsr()
    order, pred = csgraph.breadth_first_order(adj, 0, directed=False)
    if len(order) != m:
        raise SingularSystemError("face graph is disconnected")

    const = np.zeros(m)
    const[0] = -local[0, 0]
    fe_l = fe.tolist()
    local_l = local.tolist()
    const_l = const.tolist()
    for g in order[1:].tolist():
        f = int(pred[g])
        e = int(adj[f, g]) - 1
        cf, cg = fe_l[f].index(e), fe_l[g].index(e)
        const_l[g] = const_l[f] + local_l[f][cf] - local_l[g][cg]
    const = np.array(const_l)

    values = local + const[:, None]
    total = np.bincount(fe.reshape(-1), weights=values.reshape(-1), minlength=mesh.n_edges)
    count = np.bincount(fe.reshape(-1), minlength=mesh.n_edges)
    u_star = total / np.maximum(count, 1)
    first = values[np.arange(m)[:, None], np.arange(3)[None, :]]
    spread = np.abs(first - u_star[fe])
    mismatch = float(2 * spread.max()) if spread.size else 0.0
    if mismatch > MISMATCH_TOL:
        raise IntegrationMismatchError(
            f"conjugate integration mismatch {mismatch:.3e}; input is not harmonic"
        )
    u_star.setflags(write=False)
    return u_star, mismatch


@dataclass(frozen=True)
class FlatMap:
    """Complex coordinate per mid-edge vertex.

    ``stage`` is ``"slit-plane"`` right after flattening (boundary on a
    horizontal segment) and ``"disk"`` after the inverse Joukowski map.
    """

    phi: np.ndarray
    stage: str
    slit_interval: tuple
    boundary: np.ndarray
    faces: np.ndarray
    excised_face: int
    field: HarmonicField | None = None
    normalized: np.ndarray | None = None

    @property
    def active_faces(self):
        keep = np.ones(len(self.faces), dtype=bool)
        keep[self.excised_face] = False
        return np.flatnonzero(keep)

    @property
    def interior(self):
        mask = np.ones(len(self.phi), dtype=bool)
        mask[self.boundary] = False
        return np.flatnonzero(mask)


def flatten(mesh: TriMesh, excised=None, pins=None) -> FlatMap:
    field = solve_harmonic(mesh, excised, pins)
    u_mid = 0.5 * (field.u[mesh.edges[:, 0]] + field.u[mesh.edges[:, 1]])
    phi = u_mid + 1j * field.u_star
    phi.setflags(write=False)
    b = mesh.boundary_edges
    interval = (float(phi[b].real.min()), float(phi[b].real.max()))
    return FlatMap(phi, "slit-plane", interval, b, mesh.face_edges, field.excised_face, field)


def slit_collinearity(flat: FlatMap) -> float:
    """Standard deviation of boundary imaginary parts over the slit length."""
    b = flat.phi[flat.boundary]
    length = flat.slit_interval[1] - flat.slit_interval[0]
    return float(np.std(b.imag) / length)


def inverse_joukowski(z, side=None):
    """Root ``w`` of ``w + 1/w = z`` with ``|w| <= 1``.

    Points on the slit ``[-2, 2]`` have two preimages on the circle; ``side``
    (+1 or -1, per point) chooses the one reached from above (+1, lower
    semicircle) or below (-1, upper semicircle).
    """
    z = np.asarray(z, dtype=complex)
    s = np.sqrt(z * z - 4)
    w1 = 0.5 * (z - s)
    w2 = 0.5 * (z + s)
    w = np.where(np.abs(w1) <= np.abs(w2), w1, w2)
    if side is not None:
        side = np.broadcast_to(np.asarray(side, dtype=float), z.shape)
        on_slit = side != 0
        x = np.clip(z.real, -2.0, 2.0)
        circ = 0.5 * x - 1j * np.sign(side) * np.sqrt(np.maximum(1 - 0.25 * x * x, 0.0))
        w = np.where(on_slit, circ, w)
    return w if w.ndim else complex(w)


def slit_to_disk(flat: FlatMap) -> FlatMap:
    """Normalize the slit to ``[-2, 2]`` and apply the inverse Joukowski map."""
    if flat.stage != "slit-plane":
        raise ValidationError("slit_to_disk expects a slit-plane map")
    length = flat.slit_interval[1] - flat.slit_interval[0]
    if not length > 0:
        raise BranchError("boundary collapsed to a point")
    defect = slit_collinearity(flat)
    if defect > COLLINEAR_TOL:
        raise BranchError(f"boundary is not on a horizontal line (relative spread {defect:.2e})")
    b = flat.boundary
    shift = 0.5 * (flat.slit_interval[0] + flat.slit_interval[1]) + 1j * np.median(flat.phi[b].imag)
    z = (flat.phi - shift) * (4.0 / length)
    z[b] = z[b].real

    # which bank of the slit each boundary mid-edge sits on
    side = np.zeros(len(z))
    owner = _boundary_owner(flat)
    tilt = z[flat.faces[owner]].imag.sum(axis=1)
    side[b] = np.where(tilt >= 0, 1.0, -1.0)

    w = inverse_joukowski(z, side)
    interior = flat.interior
    if interior.size and np.abs(w[interior]).max() >= 1.0:
        worst = interior[np.argmax(np.abs(w[interior]))]
        raise BranchError(f"mid-edge vertex {worst} left the open disk (|w|={abs(w[worst]):.6f})")
    w.setflags(write=False)
    z.setflags(write=False)
    return replace(flat, phi=w, stage="disk", normalized=z)


def _boundary_owner(flat):
    """The unique face holding each boundary mid-edge vertex."""
    owner = np.full(len(flat.phi), -1)
    active = flat.active_faces
    for slot in range(3):
        owner[flat.faces[active, slot]] = active
    return owner[flat.boundary]


def similarity_defect(mesh: TriMesh, flat: FlatMap):
    """Per-face deviation of ``Phi`` from a similarity (slit-plane stage).

    Compares the complex edge ratio of each image face with the shape ratio
    of the 3D mid-edge face, relative to the latter's modulus.
    """
    faces = flat.active_faces
    fe = flat.faces[faces]
    mid = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    A, B, C = (mid[fe[:, c]] for c in range(3))
    n = mesh.face_normals[faces]
    e1 = B - A
    e1 = e1 / np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(n, e1)

    def cplx(x):
        return np.einsum("ij,ij->i", x, e1) + 1j * np.einsum("ij,ij->i", x, e2)

    shape = cplx(B - A) / cplx(C - A)
    p = flat.phi[fe]
    image = (p[:, 1] - p[:, 0]) / (p[:, 2] - p[:, 0])
    return np.abs(image - shape) / np.abs(shape)


@dataclass(frozen=True)
class DiscreteConformalFactors:
    """Conformal factors of a flattened mid-edge mesh.

    ``faces`` lists the parent faces carrying a factor (all but the excised
    one); ``mu_e_face`` is aligned with it.
    """

    faces: np.ndarray
    mu_e_face: np.ndarray
    mu_e_vertex: np.ndarray
    mu_h_vertex: np.ndarray


def signed_areas(points, faces):
    p = points[faces]
    return 0.5 * np.imag(np.conj(p[:, 1] - p[:, 0]) * (p[:, 2] - p[:, 0]))


def conformal_factors(mesh: TriMesh, flat: FlatMap) -> DiscreteConformalFactors:
    faces = flat.active_faces
    fe = flat.faces[faces]
    image = signed_areas(flat.phi, fe)
    if np.any(image <= COLLAPSE_TOL):
        bad = faces[np.argmin(image)]
        raise CollapsedFaceError(f"image of face {bad} collapsed (area {image.min():.3e})")
    area3d = 0.25 * mesh.face_areas[faces]
    mu_face = area3d / image
    total = np.bincount(fe.reshape(-1), weights=np.repeat(mu_face, 3), minlength=len(flat.phi))
    count = np.bincount(fe.reshape(-1), minlength=len(flat.phi))
    mu_e = total / count
    mu_h = mu_e * (1 - np.abs(flat.phi) ** 2) ** 2
    if flat.stage == "disk":
        mu_h[flat.boundary] = 0.0
    for a in (faces, mu_face, mu_e, mu_h):
        a.setflags(write=False)
    return DiscreteConformalFactors(faces, mu_face, mu_e, mu_h)


@dataclass(frozen=True)
class Uniformization:
    slit: FlatMap
    disk: FlatMap
    factors: DiscreteConformalFactors


def uniformize(mesh: TriMesh, excised=None) -> Uniformization:
    slit = flatten(mesh, excised)
    disk = slit_to_disk(slit)
    return Uniformization(slit, disk, conformal_factors(mesh, disk))

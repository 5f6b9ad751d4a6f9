"""Farthest-point sampling on the mid-edge graph and Voronoi masses.

Geodesic distances are shortest paths on the mid-edge graph with Euclidean
edge lengths.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csgraph

from .errors import ValidationError
from .mesh import TriMesh, build_midedge

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DiscreteMeasure:
    """Weighted sample set ``sum_i masses[i] * delta(disk_points[i])``."""

    surface_points: np.ndarray
    disk_points: np.ndarray
    masses: np.ndarray
    fill_distance: float
    equal_mass: bool = False

    @property
    def N(self):
        return len(self.surface_points)

    def equal_mass_defect(self):
        """``max |xi_i - 1/N|`` in units of ``1/N``."""
        return float(np.abs(self.masses * self.N - 1).max())


def fps_graph(graph, n, start, candidates=None):
    """Farthest-point sampling on a weighted graph.

    The ``start`` node only seeds the search and is not returned unless picked
    later. Ties go to the lowest node index. Returns the picked nodes and the
    matrix of their shortest-path distances to every node.
    """
    size = graph.shape[0]
    allowed = np.zeros(size, dtype=bool)
    if candidates is None:
        allowed[:] = True
    else:
        allowed[np.asarray(candidates)] = True
    if n > allowed.sum():
        raise ValidationError(f"cannot pick {n} samples from {int(allowed.sum())} candidates")
    seed_dist = csgraph.dijkstra(graph, indices=int(start))
    score = np.where(allowed, seed_dist, -np.inf)
    picked = []
    rows = np.empty((n, size))
    best = None
    for k in range(n):
        idx = int(np.argmax(score))
        picked.append(idx)
        rows[k] = csgraph.dijkstra(graph, indices=idx)
        best = rows[k] if best is None else np.minimum(best, rows[k])
        score = np.where(allowed, best, -np.inf)
    return np.array(picked, dtype=np.int64), rows


def _interior_midedges(mesh):
    mask = mesh.edge_face_count == 2
    return np.flatnonzero(mask)


def fps_sample(mesh: TriMesh, n, seed=0, candidates=None):
    """``n`` mid-edge vertices picked by farthest-point sampling.

    The search starts from a seeded random mid-edge vertex. By default only
    interior mid-edge vertices are eligible, since boundary ones land on the
    unit circle after uniformization.
    """
    me = build_midedge(mesh)
    if candidates is None:
        candidates = _interior_midedges(mesh)
    if n < 1:
        raise ValidationError("need at least one sample")
    if n > len(candidates):
        raise ValidationError(f"N={n} exceeds the {len(candidates)} eligible mid-edge vertices")
    rng = np.random.default_rng(seed)
    start = int(rng.integers(me.n_vertices))
    picked, _ = fps_graph(me.graph(), n, start, candidates)
    return picked


def _face_distances(mesh, me, rows):
    """Distance from each sample (row) to each face centroid, via the
    face's mid-edge vertices."""
    fe = me.faces
    centroid = mesh.vertices[mesh.faces].mean(axis=1)
    hop = np.linalg.norm(me.vertices[fe] - centroid[:, None, :], axis=2)
    return np.min(rows[:, fe] + hop[None, :, :], axis=2)


def _sample_rows(me, samples):
    return csgraph.dijkstra(me.graph(), indices=np.asarray(samples, dtype=np.int64))


def fill_distance(mesh: TriMesh, samples) -> float:
    """Largest graph distance from a mid-edge vertex to its nearest sample."""
    samples = np.asarray(samples, dtype=np.int64)
    if samples.size == 0:
        raise ValidationError("need at least one sample")
    me = build_midedge(mesh)
    d = csgraph.dijkstra(me.graph(), indices=samples, min_only=True)
    return float(d.max())


def voronoi_masses(mesh: TriMesh, samples, disk=None) -> DiscreteMeasure:
    """Area of the geodesic Voronoi cell of every sample, normalized to sum 1.

    Each face goes to the sample nearest its centroid, lower sample index on
    ties. ``disk`` optionally supplies disk coordinates per mid-edge vertex.
    """
    samples = np.asarray(samples, dtype=np.int64)
    if samples.size == 0:
        raise ValidationError("need at least one sample")
    me = build_midedge(mesh)
    rows = _sample_rows(me, samples)
    masses = _cell_masses(mesh, me, rows)
    fill = float(rows.min(axis=0).max())
    pts = np.full(len(samples), np.nan + 0j) if disk is None else np.asarray(disk)[samples]
    return DiscreteMeasure(samples, pts, masses, fill)


def _cell_masses(mesh, me, rows):
    owner = np.argmin(_face_distances(mesh, me, rows), axis=0)
    masses = np.bincount(owner, weights=mesh.face_areas, minlength=len(rows))
    return masses / masses.sum()


def _eliminate(face_dist, area, keep):
    """Greedy backward elimination toward equal Voronoi masses.

    Repeatedly drops the candidate whose removal leaves the smallest worst
    relative deviation from equal masses, until ``keep`` remain.
    """
    C, F = face_dist.shape
    order = np.argsort(face_dist, axis=0, kind="stable").astype(np.int32)
    active = np.ones(C, dtype=bool)
    p1 = np.zeros(F, dtype=np.int64)
    p2 = np.ones(F, dtype=np.int64)
    cols = np.arange(F)
    total = area.sum()
    n = C
    while n > keep:
        owner = order[p1, cols]
        second = order[p2, cols]
        mass = np.bincount(owner, weights=area, minlength=C)
        gain = np.bincount(owner * C + second, weights=area, minlength=C * C).reshape(C, C)
        after = mass[None, :] + gain
        target = total / (n - 1)
        dev = np.abs(after - target)
        dev[:, ~active] = -np.inf
        np.fill_diagonal(dev, -np.inf)
        worst = dev.max(axis=1)
        spread = np.where(np.isfinite(dev), dev, 0.0)
        spread = (spread ** 2).sum(axis=1)
        worst[~active] = np.inf
        cand = np.flatnonzero(worst <= worst.min() * (1 + 1e-12))
        drop = int(cand[np.argmin(spread[cand])])
        active[drop] = False
        n -= 1
        hit1 = owner == drop
        p1[hit1] = p2[hit1]
        stale = hit1 | (second == drop)
        p2[stale] = np.maximum(p2[stale], p1[stale]) + 1
        while True:
            bad = stale & ~active[order[np.minimum(p2, C - 1), cols]] & (p2 < C - 1)
            if not bad.any():
                break
            p2[bad] += 1
    return np.flatnonzero(active)


def sample_surface(mesh: TriMesh, n, seed=0, disk=None, equal_mass=False) -> DiscreteMeasure:
    """FPS samples with Voronoi masses, optionally steered toward equal masses.

    With ``equal_mass`` set, ``4 n`` FPS candidates are drawn and greedily
    thinned to the ``n`` whose cells are closest to ``1/n``.
    """
    if not equal_mass:
        samples = fps_sample(mesh, n, seed)
        return voronoi_masses(mesh, samples, disk)
    interior = _interior_midedges(mesh)
    if n > len(interior):
        raise ValidationError(f"N={n} exceeds the {len(interior)} eligible mid-edge vertices")
    me = build_midedge(mesh)
    c = min(4 * n, len(interior))
    rng = np.random.default_rng(seed)
    start = int(rng.integers(me.n_vertices))
    cand, rows = fps_graph(me.graph(), c, start, interior)
    fd = _face_distances(mesh, me, rows)
    kept = _eliminate(fd, mesh.face_areas, n)
    # keep FPS order among survivors
    samples = cand[kept]
    sub = rows[kept]
    masses = _cell_masses(mesh, me, sub)
    fill = float(sub.min(axis=0).max())
    pts = np.full(n, np.nan + 0j) if disk is None else np.asarray(disk)[samples]
    measure = DiscreteMeasure(samples, pts, masses, fill, equal_mass=True)
    defect = measure.equal_mass_defect()
    if defect > 0.5:
        logger.warning("equal-mass target missed: max |xi - 1/N| = %.3f / N", defect)
    return measure

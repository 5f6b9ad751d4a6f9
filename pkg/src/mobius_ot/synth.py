"""Synthetic disk-type test surfaces.

All surfaces are graphs ``z = f(x, y)`` over the unit disk (or an isometric
bend of the flat disk), triangulated by concentric rings: ring ``k`` of ``n``
carries ``6k`` vertices, so triangles stay close to equilateral.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .mesh import TriMesh

KINDS = ("flat-disk", "gaussian-bump", "two-bumps", "bent-sheet")


def _zip_rings(inner, outer, ang_in, ang_out):
    """Triangulate the strip between two closed rings of vertex indices."""
    tris = []
    ni, no = len(inner), len(outer)
    i = j = 0
    while i < ni or j < no:
        next_in = ang_in[i + 1] if i + 1 <= ni else np.inf
        next_out = ang_out[j + 1] if j + 1 <= no else np.inf
        if j < no and (i >= ni or next_out <= next_in):
            tris.append((inner[i % ni], outer[j % no], outer[(j + 1) % no]))
            j += 1
        else:
            tris.append((inner[i % ni], outer[j % no], inner[(i + 1) % ni]))
            i += 1
    return tris


def disk_grid(resolution):
    """Planar ring triangulation of the unit disk with ``resolution // 2`` rings."""
    if resolution < 8:
        raise ValidationError("resolution must be at least 8")
    n = resolution // 2
    xy = [(0.0, 0.0)]
    rings = [[0]]
    angles = [np.array([0.0, 2 * np.pi])]
    for k in range(1, n + 1):
        count = 6 * k
        t = 2 * np.pi * np.arange(count) / count
        start = len(xy)
        xy.extend(zip((k / n) * np.cos(t), (k / n) * np.sin(t)))
        rings.append(list(range(start, start + count)))
        angles.append(np.append(t, 2 * np.pi))
    faces = []
    # center fan
    for j in range(6):
        faces.append((0, rings[1][j], rings[1][(j + 1) % 6]))
    for k in range(2, n + 1):
        faces.extend(_zip_rings(rings[k - 1], rings[k], angles[k - 1], angles[k]))
    xy = np.array(xy)
    faces = np.array(faces, dtype=np.int64)
    p = xy[faces]
    signed = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    faces[signed < 0] = faces[signed < 0][:, ::-1]
    return xy, faces


def _gauss(x, y, cx, cy, s):
    return np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * s * s))


def synth_surface(kind, resolution=32, height=None, width=None, angle=None) -> TriMesh:
    """Build a synthetic surface.

    ``height``/``width`` parametrize the bumps (defaults 0.4/0.3 for
    ``gaussian-bump``, 0.3/0.25 for ``two-bumps``); ``angle`` is the total bend
    of ``bent-sheet`` in degrees (default 30).
    """
    xy, faces = disk_grid(resolution)
    x, y = xy[:, 0], xy[:, 1]
    if kind == "flat-disk":
        v = np.column_stack([x, y, np.zeros_like(x)])
    elif kind == "gaussian-bump":
        h = 0.4 if height is None else height
        s = 0.3 if width is None else width
        v = np.column_stack([x, y, h * _gauss(x, y, 0.0, 0.0, s)])
    elif kind == "two-bumps":
        h = 0.3 if height is None else height
        s = 0.25 if width is None else width
        # unequal heights keep the surface free of symmetries swapping the bumps
        z = h * _gauss(x, y, -0.4, 0.1, s) + 0.6 * h * _gauss(x, y, 0.45, -0.15, s)
        v = np.column_stack([x, y, z])
    elif kind == "bent-sheet":
        deg = 30.0 if angle is None else angle
        if deg == 0:
            v = np.column_stack([x, y, np.zeros_like(x)])
        else:
            rho = 2.0 / np.radians(deg)
            v = np.column_stack([rho * np.sin(x / rho), y, rho * (1 - np.cos(x / rho))])
    else:
        raise ValidationError(f"unknown surface kind {kind!r}; expected one of {KINDS}")
    return TriMesh(v, faces)

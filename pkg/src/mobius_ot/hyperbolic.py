"""Disk Möbius transformations, hyperbolic distance and the quadrature grid.

A disk Möbius map is stored as ``m(z) = tau * (z - a) / (1 - conj(a) z)`` with
``|a| < 1`` and ``|tau| = 1``. These are the isometries of the unit disk with
metric ``(1 - |z|^2)^-2 |dz|^2``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class DiskMobius:
    a: complex = 0j
    tau: complex = 1 + 0j

    def __post_init__(self):
        a, tau = complex(self.a), complex(self.tau)
        if not abs(a) < 1:
            raise ValidationError(f"|a| must be < 1, got {abs(a)}")
        if abs(abs(tau) - 1) > 1e-12:
            raise ValidationError(f"|tau| must be 1, got {abs(tau)}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "tau", tau)

    @property
    def theta(self):
        return float(np.angle(self.tau))

    def __call__(self, z):
        return mobius_apply(self, z)

    def matrix(self):
        """2x2 complex matrix acting by linear fractional transformation."""
        return np.array([[self.tau, -self.tau * self.a], [-np.conj(self.a), 1.0]], dtype=complex)

    def derivative(self, z):
        z = np.asarray(z, dtype=complex)
        return self.tau * (1 - abs(self.a) ** 2) / (1 - np.conj(self.a) * z) ** 2

    def to_dict(self):
        return {"a_re": self.a.real, "a_im": self.a.imag, "tau_re": self.tau.real, "tau_im": self.tau.imag}

    @classmethod
    def from_dict(cls, d):
        tau = complex(d["tau_re"], d["tau_im"])
        return cls(complex(d["a_re"], d["a_im"]), tau / abs(tau))


IDENTITY = DiskMobius()


def mobius_apply(m: DiskMobius, z):
    z = np.asarray(z, dtype=complex)
    out = m.tau * (z - m.a) / (1 - np.conj(m.a) * z)
    return out if out.ndim else complex(out)


def _from_matrix(mat):
    (p, q), (_, s) = mat
    # m(z) = (p z + q) / (r z + s) = (p/s) (z + q/p) / (1 + (r/s) z)
    tau = p / s
    a = -q / p
    return DiskMobius(a, tau / abs(tau))


def mobius_compose(m1: DiskMobius, m2: DiskMobius) -> DiskMobius:
    """``m1 o m2``, i.e. apply ``m2`` first."""
    return _from_matrix(m1.matrix() @ m2.matrix())


def mobius_inverse(m: DiskMobius) -> DiskMobius:
    return DiskMobius(-m.tau * m.a, np.conj(m.tau))


def mobius_family(z0, w0, sigma) -> DiskMobius:
    """The member of the one-parameter family of maps sending ``z0`` to ``w0``
    selected by the unit complex number ``sigma``."""
    z0, w0, sigma = complex(z0), complex(w0), complex(sigma)
    sb = sigma.conjugate()
    den = 1 - z0.conjugate() * w0 * sb
    a = (z0 - w0 * sb) / den
    tau = sigma * den / (1 - z0 * w0.conjugate() * sigma)
    return DiskMobius(a, tau / abs(tau))


def base_mobius(z) -> DiskMobius:
    """The fixed map ``u -> (u + z) / (1 + conj(z) u)`` sending 0 to ``z``."""
    return DiskMobius(-complex(z), 1 + 0j)


def hyperbolic_distance(z, w):
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    ratio = np.abs(z - w) / np.abs(1 - np.conj(w) * z)
    return np.arctanh(np.minimum(ratio, 1.0))


def disk_area(R):
    """Hyperbolic area of a geodesic disk of radius ``R``."""
    return np.pi * np.sinh(R) ** 2


def euclidean_radius(R):
    return float(np.tanh(R))


@dataclass(frozen=True)
class QuadratureGrid:
    """Voronoi quadrature on the hyperbolic disk of radius ``R`` about 0.

    ``sum(weights * f(centers))`` approximates the hyperbolic-area integral of
    ``f`` over ``{|z| <= tanh(R)}``.
    """

    radius_R: float
    centers: np.ndarray
    weights: np.ndarray
    seed: int = 0

    @property
    def r_R(self):
        return euclidean_radius(self.radius_R)

    @property
    def K(self):
        return len(self.centers)

    def integrate(self, f):
        return float(np.dot(self.weights, f(self.centers)))

    def to_json(self):
        return json.dumps({
            "R": self.radius_R,
            "seed": self.seed,
            "centers": [[z.real, z.imag] for z in self.centers.tolist()],
            "weights": self.weights.tolist(),
        })


ORACLE_RINGS = 400
ORACLE_SECTORS = 800


def _oracle_cells(R, rings=ORACLE_RINGS, sectors=ORACLE_SECTORS):
    """Polar subdivision of the hyperbolic disk of radius R.

    Rings are equally spaced in hyperbolic radius. Returns cell sample points
    and exact hyperbolic cell areas.
    """
    rho = np.linspace(0.0, R, rings + 1)
    r = np.tanh(rho)
    # hyperbolic area inside Euclidean radius r is pi r^2 / (1 - r^2)
    inner = r**2 / (1 - r**2)
    ring_area = np.pi * np.diff(inner) / sectors
    r_mid = np.tanh(0.5 * (rho[:-1] + rho[1:]))
    theta = (np.arange(sectors) + 0.5) * (2 * np.pi / sectors)
    pts = (r_mid[:, None] * np.exp(1j * theta)[None, :]).reshape(-1)
    area = np.repeat(ring_area, sectors)
    return pts, area


def _pseudo_distance(z, pts, scale_pts):
    # monotone in hyperbolic distance: cosh d = 1 + 2 * this
    return np.abs(pts - z) ** 2 / (scale_pts * (1 - abs(z) ** 2))


@lru_cache(maxsize=32)
def build_quadrature(R=1.0, K=300, seed=0) -> QuadratureGrid:
    """Spread ``K`` centers by hyperbolic farthest-point sampling and weight
    each by the hyperbolic area of its Voronoi cell.

    Sampling and cell integration both run on a dense polar oracle grid. The
    seeded random start point is not itself a center.
    """
    if not R > 0:
        raise ValidationError("R must be positive")
    if K < 1:
        raise ValidationError("K must be at least 1")
    pts, area = _oracle_cells(R)
    if K > len(pts):
        raise ValidationError(f"K={K} exceeds oracle grid size {len(pts)}")
    rng = np.random.default_rng(seed)
    scale = 1 - np.abs(pts) ** 2
    start = pts[rng.integers(len(pts))]
    dist = _pseudo_distance(start, pts, scale)
    owner = np.zeros(len(pts), dtype=np.int64)
    chosen = np.empty(K, dtype=np.int64)
    nearest = np.full(len(pts), np.inf)
    for k in range(K):
        idx = int(np.argmax(dist if k == 0 else nearest))
        chosen[k] = idx
        d = _pseudo_distance(pts[idx], pts, scale)
        closer = d < nearest
        owner[closer] = k
        nearest = np.where(closer, d, nearest)
    weights = np.bincount(owner, weights=area, minlength=K)
    centers = pts[chosen]
    centers.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureGrid(float(R), centers, weights, int(seed))

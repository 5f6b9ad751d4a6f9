"""Möbius-invariant local dissimilarity between two densities on the disk.

For sample points ``z`` (of ``mu``) and ``w`` (of ``nu``)::

    d(z, w) = min_l sum_k alpha_k |mu(B_z(p_k)) - nu(m_{z,w,sigma_l}(B_z(p_k)))|

where ``(p_k, alpha_k)`` is a hyperbolic quadrature grid on the disk of
radius ``R`` about 0, ``B_z`` is the base map sending 0 to ``z`` and
``sigma_l = exp(2 pi i l / L)``.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .hyperbolic import (DiskMobius, QuadratureGrid, base_mobius, build_quadrature, disk_area,
                         mobius_family)

THREADS_ENV = "MOBIUS_OT_THREADS"


@dataclass(frozen=True)
class LocalDistanceConfig:
    radius_R: float
    grid: QuadratureGrid
    mobius_steps: int = 32

    def __post_init__(self):
        if self.mobius_steps < 4:
            raise ValidationError("L must be at least 4")
        if abs(self.grid.radius_R - self.radius_R) > 1e-12:
            raise ValidationError("grid radius does not match R")

    @classmethod
    def build(cls, R=1.0, K=300, L=32, seed=0):
        return cls(float(R), build_quadrature(float(R), int(K), int(seed)), int(L))

    @property
    def L(self):
        return self.mobius_steps

    @property
    def sigmas(self):
        return np.exp(2j * np.pi * np.arange(self.mobius_steps) / self.mobius_steps)

    @property
    def area(self):
        """Hyperbolic area of the neighborhood; ``sum(alpha)`` up to roundoff."""
        return disk_area(self.radius_R)


def local_distance(mu, nu, z, w, cfg: LocalDistanceConfig):
    """Return ``(value, l, mobius)`` for the best rotation index ``l``.

    Evaluates the composed map ``m_{z,w,sigma} o B_z`` directly. Ties in ``l``
    go to the lowest index.
    """
    p, alpha = cfg.grid.centers, cfg.grid.weights
    pts = base_mobius(z)(p)
    a = mu(pts)
    best = (np.inf, -1, None)
    for ell, s in enumerate(cfg.sigmas):
        m = mobius_family(z, w, s)
        val = float(np.dot(alpha, np.abs(a - nu(m(pts)))))
        if val < best[0]:
            best = (val, ell, m)
    return best


@dataclass(frozen=True)
class CostMatrix:
    values: np.ndarray
    argmin_sigma: np.ndarray
    argmin_mobius: list
    area: float = float("nan")

    @property
    def shape(self):
        return self.values.shape

    def to_dict(self):
        return {
            "d": self.values.tolist(),
            "sigma": self.argmin_sigma.tolist(),
            "mobius": [[m.to_dict() for m in row] for row in self.argmin_mobius],
            "area": self.area,
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        mob = [[DiskMobius.from_dict(m) for m in row] for row in d.get("mobius", [])]
        return cls(np.array(d["d"], dtype=float), np.array(d.get("sigma", []), dtype=np.int64), mob,
                   float(d.get("area", float("nan"))))


def resolve_threads(threads=None):
    """Explicit value, else the environment cap, else 1."""
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        threads = int(env) if env else 1
    return max(1, int(threads))


def cost_matrix(mu, nu, Z, W, cfg: LocalDistanceConfig, threads=None) -> CostMatrix:
    """All ``local_distance(mu, nu, z_i, w_j)`` values.

    Uses ``m_{z,w,sigma}(B_z(u)) = B_w(sigma u)``, so ``nu`` is evaluated once
    per ``(w_j, sigma_l, p_k)`` instead of once per ``(i, j, l, k)``.
    """
    Z = np.atleast_1d(np.asarray(Z, dtype=complex))
    W = np.atleast_1d(np.asarray(W, dtype=complex))
    if Z.size == 0 or W.size == 0:
        raise ValidationError("empty sample set")
    p, alpha = cfg.grid.centers, cfg.grid.weights
    sig = cfg.sigmas
    N, P, L, K = len(Z), len(W), len(sig), len(p)

    A = np.asarray(mu((p[None, :] + Z[:, None]) / (1 + np.conj(Z)[:, None] * p[None, :])))
    u = sig[:, None] * p[None, :]
    Bpts = (u[None] + W[:, None, None]) / (1 + np.conj(W)[:, None, None] * u[None])
    B = np.asarray(nu(Bpts)).reshape(P * L, K)

    D = np.empty((N, P * L))

    def rows(block):
        for i in block:
            D[i] = np.abs(B - A[i]) @ alpha

    n_threads = min(resolve_threads(threads), N)
    blocks = np.array_split(np.arange(N), n_threads)
    if n_threads == 1:
        rows(blocks[0])
    else:
        with ThreadPoolExecutor(n_threads) as ex:
            list(ex.map(rows, blocks))

    D = D.reshape(N, P, L)
    ell = np.argmin(D, axis=2)
    values = np.take_along_axis(D, ell[..., None], axis=2)[..., 0]
    mob = [[mobius_family(Z[i], W[j], sig[ell[i, j]]) for j in range(P)] for i in range(N)]
    return CostMatrix(values, ell, mob, float(disk_area(cfg.radius_R)))

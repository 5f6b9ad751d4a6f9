"""Thin-plate-spline model of a conformal density on the unit disk.

``Gamma(z) = c0 + c1 x + c2 y + sum_i b_i psi(|z - z_i|)`` with
``psi(r) = r^2 log(r^2)`` and the side conditions ``sum b_i = 0``,
``sum b_i x_i = 0``, ``sum b_i y_i = 0``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import RankDeficientError, ValidationError

# bending energy of the spline in terms of its coefficients is
# BENDING * b^T Psi b, with Psi[i, j] = psi(|z_i - z_j|)
BENDING = 16 * np.pi
FLOOR_RATIO = 1e-8
EVAL_CHUNK = 1 << 20


def tps_kernel(r):
    """``r^2 log(r^2)``, continuous at 0."""
    r2 = np.square(np.asarray(r, dtype=float))
    return _psi_sq(r2)


def _psi_sq(r2):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = r2 * np.log(r2)
    return np.where(r2 > 0, out, 0.0)


def _kernel_matrix(points, centers):
    d2 = np.abs(points[:, None] - centers[None, :]) ** 2
    return _psi_sq(d2)


def _poly(points):
    return np.column_stack([np.ones(len(points)), points.real, points.imag])


@dataclass(frozen=True)
class ConformalDensity:
    centers: np.ndarray
    b: np.ndarray
    p1: np.ndarray
    smoothing_lambda: float = 1.0
    floor_epsilon: float = 0.0

    def raw(self, z):
        """Spline value without the positivity floor."""
        z = np.asarray(z, dtype=complex)
        flat = z.reshape(-1)
        out = np.empty(flat.shape)
        step = max(1, EVAL_CHUNK // max(len(self.centers), 1))
        c0, c1, c2 = self.p1
        for s in range(0, len(flat), step):
            q = flat[s:s + step]
            val = c0 + c1 * q.real + c2 * q.imag
            if len(self.centers):
                val = val + _kernel_matrix(q, self.centers) @ self.b
            out[s:s + step] = val
        return out.reshape(z.shape)

    def __call__(self, z):
        return eval_density(self, z)

    def side_conditions(self):
        """``(sum b, sum b x, sum b y)``; all zero for a valid spline."""
        return _poly(self.centers).T @ self.b

    def to_dict(self):
        return {
            "centers": [[z.real, z.imag] for z in self.centers.tolist()],
            "b": self.b.tolist(),
            "p1": self.p1.tolist(),
            "lambda": self.smoothing_lambda,
            "floor": self.floor_epsilon,
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        c = np.array([complex(x, y) for x, y in d["centers"]], dtype=complex)
        return cls(c, np.array(d["b"], dtype=float), np.array(d["p1"], dtype=float),
                   float(d.get("lambda", 1.0)), float(d.get("floor", 0.0)))


def eval_density(d: ConformalDensity, z):
    out = np.maximum(d.raw(z), d.floor_epsilon)
    return out if out.ndim else float(out)


def fit_density(centers, data_points, data_values, smoothing_lambda=0.99) -> ConformalDensity:
    """Fit a (smoothing) thin-plate spline with the given centers.

    Minimizes ``lam * sum_r (y_r - g(x_r))^2 + (1 - lam) * bending(g)`` over
    splines ``g`` centered at ``centers``. With ``lam = 1`` this is least
    squares in the spline span, and exact interpolation when the data sites
    are the centers.
    """
    lam = float(smoothing_lambda)
    if not 0 < lam <= 1:
        raise ValidationError("smoothing lambda must lie in (0, 1]")
    z = np.asarray(centers, dtype=complex).reshape(-1)
    x = np.asarray(data_points, dtype=complex).reshape(-1)
    y = np.asarray(data_values, dtype=float).reshape(-1)
    if len(x) != len(y):
        raise ValidationError("data points and values differ in length")
    if len(z) < 3:
        raise RankDeficientError("need at least three centers")
    P = _poly(z)
    if np.linalg.matrix_rank(P) < 3:
        raise RankDeficientError("centers are collinear")

    # b = Q2 beta spans the coefficients obeying the side conditions
    Q, _ = np.linalg.qr(P, mode="complete")
    Q2 = Q[:, 3:]
    A = _kernel_matrix(x, z) @ Q2
    Px = _poly(x)
    design = np.sqrt(lam) * np.hstack([A, Px])
    rhs = np.sqrt(lam) * y
    if lam < 1:
        G = Q2.T @ _kernel_matrix(z, z) @ Q2
        G = 0.5 * (G + G.T)
        try:
            U = linalg.cholesky(G, lower=False)
        except linalg.LinAlgError as exc:
            raise RankDeficientError("bending form is not positive definite") from exc
        pen = np.sqrt((1 - lam) * BENDING) * np.hstack([U, np.zeros((len(U), 3))])
        design = np.vstack([design, pen])
        rhs = np.concatenate([rhs, np.zeros(len(U))])
    sol, _, rank, _ = linalg.lstsq(design, rhs, lapack_driver="gelsd")
    if rank < design.shape[1]:
        raise RankDeficientError(f"spline system is rank deficient ({rank} < {design.shape[1]})")
    b = Q2 @ sol[:-3]
    p1 = sol[-3:]
    d = ConformalDensity(z, b, p1, lam, 0.0)
    fitted = d.raw(x)
    floor = FLOOR_RATIO * abs(float(np.mean(fitted))) if len(x) else 0.0
    return ConformalDensity(z, b, p1, lam, floor)

"""Consistency scoring of correspondences by clustering of their Möbius maps."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError
from .hyperbolic import DiskMobius


@dataclass(frozen=True)
class ScoredCorrespondence:
    pair: tuple
    mobius: DiskMobius
    local_cost: float = float("nan")
    variance_score: float = float("nan")

    @property
    def i(self):
        return self.pair[0]

    @property
    def j(self):
        return self.pair[1]

    def to_dict(self):
        return {"i": self.i, "j": self.j, "mobius": self.mobius.to_dict(),
                "d": self.local_cost, "E_V": self.variance_score}


def mobius_to_sl2(m: DiskMobius):
    """Determinant-one matrix of ``m``, sign fixed so that the trace has
    nonnegative real part (then imaginary part, then first nonzero entry)."""
    mat = m.matrix()
    det = m.tau * (1 - abs(m.a) ** 2)
    mat = mat / np.sqrt(det)
    tr = np.trace(mat)
    flip = False
    if abs(tr.real) > 1e-15:
        flip = tr.real < 0
    elif abs(tr.imag) > 1e-15:
        flip = tr.imag < 0
    else:
        first = mat.reshape(-1)[np.flatnonzero(np.abs(mat.reshape(-1)) > 0)[0]]
        flip = first.real < 0
    return -mat if flip else mat


def _pairwise(mats):
    flat = mats.reshape(len(mats), -1)
    diff = np.linalg.norm(flat[:, None] - flat[None], axis=2)
    summ = np.linalg.norm(flat[:, None] + flat[None], axis=2)
    return np.minimum(diff, summ)


def variance_scores(mobius_list):
    """``E_V`` per entry: sum over all other entries of the sign-minimized
    Frobenius distance between determinant-one matrices."""
    if len(mobius_list) < 2:
        raise ValidationError("need at least two correspondences")
    mats = np.array([mobius_to_sl2(m) for m in mobius_list])
    dist = _pairwise(mats)
    np.fill_diagonal(dist, 0.0)
    return dist.sum(axis=1)


def score_pairs(pairs, mobius, costs=None):
    """Attach ``E_V`` to each ``(i, j)`` pair; ``mobius`` and ``costs`` are
    tables indexed ``[i][j]``."""
    pairs = [(int(i), int(j)) for i, j in pairs]
    mobs = [mobius[i][j] for i, j in pairs]
    cost = [float("nan") if costs is None else float(costs[i][j]) for i, j in pairs]
    scores = variance_scores(mobs) if len(pairs) > 1 else np.zeros(len(pairs))
    return [ScoredCorrespondence(p, m, c, float(s)) for p, m, c, s in zip(pairs, mobs, cost, scores)]


def filter_top(scored, k):
    """The ``k`` entries with smallest ``E_V``, ties ordered by ``(i, j)``."""
    if k > len(scored):
        raise ValidationError(f"k={k} exceeds the {len(scored)} scored pairs")
    if k < 0:
        raise ValidationError("k must be nonnegative")
    return sorted(scored, key=lambda s: (s.variance_score, s.i, s.j))[:k]


def rescore(scored):
    """Recompute ``E_V`` within a subset."""
    scores = variance_scores([s.mobius for s in scored])
    return [replace(s, variance_score=float(v)) for s, v in zip(scored, scores)]

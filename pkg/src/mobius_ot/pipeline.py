"""End-to-end surface comparison and collection-level distance tables."""

from __future__ import annotations

import contextlib
import csv
import io
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy import linalg

from .consistency import score_pairs
from .density import ConformalDensity, fit_density
from .errors import MobiusOTError, NumericalError, ValidationError
from .hyperbolic import disk_area
from .local_distance import CostMatrix, LocalDistanceConfig, cost_matrix, resolve_threads
from .mesh import TriMesh, normalize_area, require_disk
from .sampling import DiscreteMeasure, fps_sample, sample_surface
from .transport import TransportPlan, TransportProblem, extract_correspondence, solve
from .uniformize import Uniformization, uniformize

logger = logging.getLogger(__name__)

# stream keys for np.random.SeedSequence([seed, stream, role])
STREAM_SAMPLE = 1
STREAM_QUADRATURE = 2
ROLE_A, ROLE_B = 0, 1


def stage_seed(seed, stream, role=0):
    """Independent 63-bit seed for one stage of one surface role."""
    state = np.random.SeedSequence([int(seed), int(stream), int(role)]).generate_state(2, np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


@dataclass(frozen=True)
class PipelineConfig:
    N: int = 150
    R: float = 1.0
    K: int = 300
    L: int = 32
    smoothing_lambda: float = 0.99
    Q: float = 1.0
    seed: int = 0
    equal_mass: bool = True
    threads: int | None = None

    def __post_init__(self):
        if self.N < 1:
            raise ValidationError("N must be at least 1")
        if not self.R > 0:
            raise ValidationError("R must be positive")
        if self.K < 1:
            raise ValidationError("K must be at least 1")
        if self.L < 4:
            raise ValidationError("L must be at least 4")
        if not 0 < self.smoothing_lambda <= 1:
            raise ValidationError("lambda must lie in (0, 1]")
        if not 0 < self.Q <= 1:
            raise ValidationError("Q must lie in (0, 1]")
        if self.threads is not None and self.threads < 1:
            raise ValidationError("threads must be positive")

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValidationError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def local_config(self):
        return LocalDistanceConfig.build(self.R, self.K, self.L, stage_seed(self.seed, STREAM_QUADRATURE))


@contextlib.contextmanager
def stage(name):
    """Tag library errors with the pipeline stage they came from."""
    try:
        yield
    except MobiusOTError as exc:
        if exc.stage is None:
            exc.stage = name
        raise
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        err = NumericalError(f"{name}: {exc}")
        err.stage = name
        raise err from exc


def _with_context(exc, context):
    err = type(exc)(f"{context}: {exc}")
    err.stage = exc.stage
    return err


@dataclass(frozen=True)
class SurfaceModel:
    """A surface carried through uniformization, sampling and density fit."""

    mesh: TriMesh
    scale: float
    uniformization: Uniformization
    measure: DiscreteMeasure
    density: ConformalDensity
    seed: int

    @property
    def disk(self):
        return self.uniformization.disk.phi


def density_centers(mesh, measure, disk, seed):
    """Sample disk points, topped up to three by extra FPS points if needed."""
    if measure.N >= 3:
        return measure.disk_points
    taken = set(measure.surface_points.tolist())
    extra = [k for k in fps_sample(mesh, 3 + measure.N, seed).tolist() if k not in taken]
    idx = list(measure.surface_points) + extra[:3 - measure.N]
    return np.asarray(disk)[idx]


def prepare_surface(mesh: TriMesh, cfg: PipelineConfig, role=ROLE_A) -> SurfaceModel:
    with stage("validate"):
        require_disk(mesh)
        mesh, scale = normalize_area(mesh)
    with stage("uniformize"):
        uni = uniformize(mesh)
    seed = stage_seed(cfg.seed, STREAM_SAMPLE, role)
    disk = uni.disk.phi
    with stage("sample"):
        measure = sample_surface(mesh, cfg.N, seed=seed, disk=disk, equal_mass=cfg.equal_mass)
    with stage("density"):
        centers = density_centers(mesh, measure, disk, seed)
        dens = fit_density(centers, disk, uni.factors.mu_h_vertex, cfg.smoothing_lambda)
    return SurfaceModel(mesh, scale, uni, measure, dens, seed)


@dataclass(frozen=True)
class DistanceRecord:
    id_a: str
    id_b: str
    T: float
    config: dict
    area: float
    timing: dict = field(default_factory=dict)

    def to_dict(self, timing=False):
        out = {"a": self.id_a, "b": self.id_b, "T": self.T, "area": self.area, "config": self.config}
        if timing:
            out["timing"] = self.timing
        return out


@dataclass(frozen=True)
class Comparison:
    record: DistanceRecord
    plan: TransportPlan
    cost: CostMatrix
    pairs: list
    scored: list
    a: SurfaceModel
    b: SurfaceModel

    def to_dict(self, timing=False):
        out = self.record.to_dict(timing)
        out["pairs"] = [list(p) for p in self.pairs]
        out["E_V"] = [s.variance_score for s in self.scored]
        return out

    def to_json(self, timing=False):
        return json.dumps(self.to_dict(timing))


def _masses(model, cfg):
    if cfg.equal_mass:
        return np.full(model.measure.N, 1.0 / model.measure.N)
    return model.measure.masses


def _pairs(plan, n, cfg):
    if cfg.equal_mass and abs(cfg.Q * n - round(cfg.Q * n)) < 1e-9:
        return extract_correspondence(plan, n)
    return [(int(i), int(j)) for i, j in np.argwhere(plan.pi > 0)]


def compare_models(a: SurfaceModel, b: SurfaceModel, cfg: PipelineConfig, ids=("A", "B"), threads=None,
                   local=None) -> Comparison:
    timing = {}
    t0 = time.perf_counter()
    local = local or cfg.local_config()
    with stage("cost_matrix"):
        C = cost_matrix(a.density, b.density, a.measure.disk_points, b.measure.disk_points, local,
                        threads=cfg.threads if threads is None else threads)
    timing["cost_matrix"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    with stage("transport"):
        prob = TransportProblem(C.values, _masses(a, cfg), _masses(b, cfg), cfg.Q)
        plan = solve(prob)
        pairs = _pairs(plan, a.measure.N, cfg)
    timing["transport"] = time.perf_counter() - t0
    with stage("consistency"):
        scored = score_pairs(pairs, C.argmin_mobius, C.values)
    record = DistanceRecord(str(ids[0]), str(ids[1]), plan.objective, cfg.to_dict(),
                            float(disk_area(cfg.R)), timing)
    return Comparison(record, plan, C, pairs, scored, a, b)


def compare(mesh_a: TriMesh, mesh_b: TriMesh, cfg: PipelineConfig | None = None, ids=("A", "B")) -> Comparison:
    """Distance between two disk-type surfaces with plan and scored pairs.

    Deterministic given ``cfg.seed``. The two inputs draw their samples from
    different streams, so comparing a surface with itself uses independent
    sample sets.
    """
    cfg = cfg or PipelineConfig()
    t0 = time.perf_counter()
    a = prepare_surface(mesh_a, cfg, ROLE_A)
    b = prepare_surface(mesh_b, cfg, ROLE_B)
    prep = time.perf_counter() - t0
    out = compare_models(a, b, cfg, ids)
    out.record.timing["prepare"] = prep
    return out


@dataclass(frozen=True)
class DistanceTable:
    labels: list
    T: np.ndarray
    config: dict
    records: list = field(default_factory=list)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([""] + list(self.labels))
        for lab, row in zip(self.labels, self.T.tolist()):
            w.writerow([lab] + [repr(x) for x in row])
        return buf.getvalue()

    def to_dict(self):
        return {"labels": list(self.labels), "T": self.T.tolist(), "config": self.config}

    def to_json(self):
        return json.dumps(self.to_dict())


def matrix(meshes, cfg: PipelineConfig | None = None, labels=None) -> DistanceTable:
    """Symmetric table of distances over all unordered pairs.

    Entry ``(i, j)`` with ``i < j`` is exactly ``compare(meshes[i], meshes[j])``;
    the diagonal is 0.
    """
    cfg = cfg or PipelineConfig()
    meshes = list(meshes)
    n = len(meshes)
    if n < 2:
        raise ValidationError("need at least two surfaces")
    labels = list(labels) if labels is not None else [f"s{i}" for i in range(n)]
    if len(labels) != n:
        raise ValidationError("label count does not match surface count")
    models = {}

    def model(i, role):
        if (i, role) not in models:
            try:
                models[(i, role)] = prepare_surface(meshes[i], cfg, role)
            except MobiusOTError as exc:
                raise _with_context(exc, f"surface {labels[i]}") from exc
        return models[(i, role)]

    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    for i, j in pairs:
        model(i, ROLE_A)
        model(j, ROLE_B)
    local = cfg.local_config()
    workers = min(resolve_threads(cfg.threads), len(pairs))

    def run(ij):
        i, j = ij
        try:
            return compare_models(models[(i, ROLE_A)], models[(j, ROLE_B)], cfg, (labels[i], labels[j]),
                                  threads=1 if workers > 1 else cfg.threads, local=local)
        except MobiusOTError as exc:
            raise _with_context(exc, f"pair ({labels[i]}, {labels[j]})") from exc

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(run, pairs))
    else:
        results = [run(p) for p in pairs]
    T = np.zeros((n, n))
    records = []
    for (i, j), res in zip(pairs, results):
        T[i, j] = T[j, i] = res.record.T
        records.append(res.record)
    return DistanceTable(labels, T, cfg.to_dict(), records)


def mds_embed(D, dim=2):
    """Classical multidimensional scaling of a distance table.

    Columns follow descending eigenvalue; each column is signed so its first
    nonzero coordinate is positive. Missing positive eigenvalues give zero
    columns with a warning.
    """
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValidationError("distance table must be square")
    if (D < 0).any():
        raise ValidationError("distances must be nonnegative")
    if not np.allclose(D, D.T, rtol=0, atol=1e-12 * max(1.0, np.abs(D).max())):
        raise ValidationError("distance table must be symmetric")
    n = len(D)
    J = np.eye(n) - 1.0 / n
    B = -0.5 * J @ (D ** 2) @ J
    vals, vecs = linalg.eigh(0.5 * (B + B.T))
    order = np.argsort(-vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    scale = max(1.0, np.abs(vals).max()) if n else 1.0
    X = np.zeros((n, dim))
    positive = 0
    for k in range(min(dim, n)):
        if vals[k] <= 1e-12 * scale:
            break
        col = vecs[:, k] * np.sqrt(vals[k])
        nz = np.flatnonzero(np.abs(col) > 1e-12 * np.abs(col).max())
        if nz.size and col[nz[0]] < 0:
            col = -col
        X[:, k] = col
        positive += 1
    if positive < dim:
        logger.warning("only %d positive eigenvalues for %d embedding dimensions; padding with zeros",
                       positive, dim)
    return X

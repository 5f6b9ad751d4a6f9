"""Command-line interface.

Exit codes: 0 on success, 2 for invalid input, 3 when a computation fails.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .consistency import filter_top, score_pairs
from .density import ConformalDensity, fit_density
from .errors import NumericalError, ValidationError
from .local_distance import CostMatrix, cost_matrix
from .mesh import dump_mesh, load_mesh, normalize_area, require_disk
from .pipeline import (ROLE_A, STREAM_SAMPLE, PipelineConfig, compare, density_centers, matrix, mds_embed,
                       stage_seed)
from .sampling import sample_surface
from .synth import KINDS, synth_surface
from .transport import TransportProblem, extract_correspondence, solve
from .uniformize import uniformize

logger = logging.getLogger("mobius_ot")


def _points(z):
    return [[p.real, p.imag] for p in np.asarray(z).tolist()]


def _complex(pairs):
    return np.array([complex(x, y) for x, y in pairs], dtype=complex)


def _emit(args, payload):
    text = payload if isinstance(payload, str) else json.dumps(payload)
    if args.out:
        Path(args.out).write_text(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc


def _config(args, **over):
    kw = dict(N=args.n, R=args.r, K=args.k, L=args.l, smoothing_lambda=args.lam, Q=args.q, seed=args.seed,
              equal_mass=not args.voronoi_masses, threads=args.threads)
    kw.update(over)
    return PipelineConfig(**kw)


def _prepared(path, args):
    mesh = load_mesh(path)
    require_disk(mesh)
    mesh, _ = normalize_area(mesh)
    return mesh, uniformize(mesh)


def cmd_uniformize(args):
    _, uni = _prepared(args.mesh, args)
    _emit(args, {
        "midedge": _points(uni.disk.phi),
        "mu_h": uni.factors.mu_h_vertex.tolist(),
        "boundary": uni.disk.boundary.tolist(),
        "excised_face": int(uni.disk.excised_face),
    })


def _sample(args):
    mesh, uni = _prepared(args.mesh, args)
    seed = stage_seed(args.seed, STREAM_SAMPLE, ROLE_A)
    m = sample_surface(mesh, args.n, seed=seed, disk=uni.disk.phi, equal_mass=args.equal_mass)
    return mesh, uni, m, seed


def cmd_sample(args):
    _, _, m, _ = _sample(args)
    _emit(args, {"indices": m.surface_points.tolist(), "disk": _points(m.disk_points),
                 "masses": m.masses.tolist(), "fill_distance": m.fill_distance})


def cmd_density(args):
    mesh, uni = _prepared(args.mesh, args)
    if args.samples:
        s = _read_json(args.samples)
        centers, masses = _complex(s["disk"]), s.get("masses")
        if args.equal_mass:
            masses = [1.0 / len(centers)] * len(centers)
    else:
        seed = stage_seed(args.seed, STREAM_SAMPLE, ROLE_A)
        m = sample_surface(mesh, args.n, seed=seed, disk=uni.disk.phi, equal_mass=args.equal_mass)
        centers = density_centers(mesh, m, uni.disk.phi, seed)
        masses = np.full(m.N, 1.0 / m.N).tolist() if args.equal_mass else m.masses.tolist()
    d = fit_density(centers, uni.disk.phi, uni.factors.mu_h_vertex, args.lam)
    out = d.to_dict()
    if masses is not None and len(masses) == len(centers):
        out["masses"] = list(masses)
    _emit(args, out)


def cmd_distmat(args):
    a, b = _read_json(args.dens_a), _read_json(args.dens_b)
    mu, nu = ConformalDensity.from_dict(a), ConformalDensity.from_dict(b)
    cfg = _config(args).local_config()
    C = cost_matrix(mu, nu, mu.centers, nu.centers, cfg, threads=args.threads)
    out = C.to_dict()
    for key, src in (("mu_masses", a), ("nu_masses", b)):
        if "masses" in src:
            out[key] = src["masses"]
    _emit(args, out)


def _problem(mat, Q):
    d = np.asarray(mat["d"], dtype=float)
    n, p = d.shape
    if n != p:
        logger.warning("sample counts differ (%d vs %d); correspondences need equal counts", n, p)
    mu = np.asarray(mat.get("mu_masses", np.full(n, 1.0 / n)), dtype=float)
    nu = np.asarray(mat.get("nu_masses", np.full(p, 1.0 / p)), dtype=float)
    return TransportProblem(d, mu, nu, Q)


def _uniform(prob):
    n, p = prob.cost.shape
    return n == p and np.allclose(prob.mu_masses, 1.0 / n) and np.allclose(prob.nu_masses, 1.0 / p)


def cmd_transport(args):
    prob = _problem(_read_json(args.matrix), args.q)
    plan = solve(prob)
    n = prob.cost.shape[0]
    if _uniform(prob) and abs(args.q * n - round(args.q * n)) < 1e-9:
        pairs = extract_correspondence(plan, n)
    else:
        pairs = [(int(i), int(j)) for i, j in np.argwhere(plan.pi > 0)]
    _emit(args, plan.to_dict(pairs))


def cmd_filter(args):
    plan, mat = _read_json(args.plan), _read_json(args.matrix)
    C = CostMatrix.from_dict(mat)
    pairs = [tuple(p) for p in plan["pairs"]]
    scored = score_pairs(pairs, C.argmin_mobius, C.values)
    top = filter_top(scored, len(scored) if args.top is None else args.top)
    _emit(args, {"pairs": [s.to_dict() for s in top]})


def cmd_compare(args):
    cfg = _config(args)
    a, b = load_mesh(args.mesh_a), load_mesh(args.mesh_b)
    res = compare(a, b, cfg, ids=(Path(args.mesh_a).stem, Path(args.mesh_b).stem))
    out = res.to_dict(timing=args.timings)
    out["plan"] = res.plan.to_dict()
    _emit(args, out)


def cmd_matrix(args):
    cfg = _config(args)
    meshes = [load_mesh(p) for p in args.meshes]
    labels = [Path(p).stem for p in args.meshes]
    table = matrix(meshes, cfg, labels)
    if args.out:
        base = Path(args.out)
        base = base.with_suffix("") if base.suffix in (".csv", ".json") else base
        base.with_suffix(".csv").write_text(table.to_csv())
        base.with_suffix(".json").write_text(table.to_json() + "\n")
    else:
        sys.stdout.write(table.to_csv())


def _load_table(path):
    path = Path(path)
    if path.suffix == ".csv":
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
        labels = rows[0][1:]
        D = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
        return labels, D
    data = _read_json(path)
    return data.get("labels"), np.asarray(data["T"], dtype=float)


def cmd_embed(args):
    labels, D = _load_table(args.table)
    X = mds_embed(D, args.dim)
    labels = labels or [str(i) for i in range(len(D))]
    _emit(args, {"labels": labels, "coords": X.tolist()})


def cmd_synth(args):
    mesh = synth_surface(args.kind, args.resolution, args.height, args.width, args.angle)
    fmt = "obj" if args.out and args.out.endswith(".obj") else "off"
    _emit(args, dump_mesh(mesh, fmt))


def _global_flags():
    p = argparse.ArgumentParser(add_help=False)
    d = PipelineConfig()
    g = p.add_argument_group("global options")
    g.add_argument("--n", type=int, default=d.N, help="samples per surface (default %(default)s)")
    g.add_argument("--r", type=float, default=d.R, help="hyperbolic neighborhood radius")
    g.add_argument("--k", type=int, default=d.K, help="quadrature points")
    g.add_argument("--l", type=int, default=d.L, help="rotation steps in the Möbius search")
    g.add_argument("--lambda", dest="lam", type=float, default=d.smoothing_lambda, help="smoothing factor")
    g.add_argument("--q", type=float, default=d.Q, help="transported mass fraction")
    g.add_argument("--seed", type=int, default=d.seed)
    g.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $MOBIUS_OT_THREADS or 1)")
    g.add_argument("--out", default=None, help="output file (default stdout)")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser():
    common = _global_flags()
    parser = argparse.ArgumentParser(prog="mobius-ot", description="Möbius-invariant transport distances "
                                     "between disk-type surfaces.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=func)
        return p

    p = add("uniformize", cmd_uniformize, "map a mesh to the unit disk")
    p.add_argument("mesh")
    p = add("sample", cmd_sample, "farthest-point samples with Voronoi masses")
    p.add_argument("mesh")
    p.add_argument("--equal-mass", action="store_true")
    p = add("density", cmd_density, "fit the disk density of a mesh")
    p.add_argument("mesh")
    p.add_argument("--samples", help="sample JSON to use as centers")
    p.add_argument("--equal-mass", action="store_true")
    p = add("distmat", cmd_distmat, "local distance matrix between two densities")
    p.add_argument("dens_a")
    p.add_argument("dens_b")
    p = add("transport", cmd_transport, "optimal plan for a distance matrix")
    p.add_argument("matrix")
    p = add("filter", cmd_filter, "keep the most consistent correspondences")
    p.add_argument("plan")
    p.add_argument("matrix")
    p.add_argument("--top", type=int, default=None)
    for name, func, help_ in (("compare", cmd_compare, "distance between two meshes"),
                              ("matrix", cmd_matrix, "distance table for a collection")):
        p = add(name, func, help_)
        if name == "compare":
            p.add_argument("mesh_a")
            p.add_argument("mesh_b")
        else:
            p.add_argument("meshes", nargs="+")
        p.add_argument("--voronoi-masses", action="store_true",
                       help="use Voronoi cell masses instead of equal masses")
        p.add_argument("--timings", action="store_true", help="include stage timings in the output")
    p = add("embed", cmd_embed, "classical MDS of a distance table")
    p.add_argument("table")
    p.add_argument("--dim", type=int, default=2)
    p = add("synth", cmd_synth, "write a synthetic test surface")
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--resolution", type=int, default=32)
    p.add_argument("--height", type=float)
    p.add_argument("--width", type=float)
    p.add_argument("--angle", type=float)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    if not hasattr(args, "voronoi_masses"):
        args.voronoi_masses = False
    try:
        args.func(args)
    except ValidationError as exc:
        _report(exc)
        return 2
    except (OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        _report(exc)
        return 3
    return 0


def _report(exc):
    where = f" [{exc.stage}]" if getattr(exc, "stage", None) else ""
    print(f"error{where}: {exc}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())

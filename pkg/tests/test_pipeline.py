import json
import logging

import numpy as np
import pytest

from conftest import synth
from mobius_ot.errors import NotDiskTypeError, ValidationError
from mobius_ot.pipeline import (STREAM_QUADRATURE, STREAM_SAMPLE, PipelineConfig, compare, matrix,
                                mds_embed, prepare_surface, stage_seed)

SMALL = PipelineConfig(N=20, K=60, L=8, seed=3)


def test_stage_seeds_are_distinct_and_stable():
    seeds = {stage_seed(0, s, r) for s in (STREAM_SAMPLE, STREAM_QUADRATURE) for r in (0, 1)}
    assert len(seeds) == 4
    assert stage_seed(5, 1, 0) == stage_seed(5, 1, 0) != stage_seed(6, 1, 0)


def test_config_roundtrip_and_validation():
    cfg = PipelineConfig(N=12, Q=0.5, threads=2)
    assert PipelineConfig.from_json(cfg.to_json()) == cfg
    for bad in ({"N": 0}, {"R": 0}, {"K": 0}, {"L": 3}, {"smoothing_lambda": 0}, {"Q": 1.5}, {"threads": 0}):
        with pytest.raises(ValidationError):
            PipelineConfig(**bad)
    with pytest.raises(ValidationError):
        PipelineConfig.from_dict({"N": 3, "bogus": 1})


def test_compare_is_deterministic():
    a, b = synth("gaussian-bump", 16), synth("two-bumps", 16)
    r1, r2 = compare(a, b, SMALL), compare(a, b, SMALL)
    assert r1.record.T == r2.record.T
    assert r1.to_json() == r2.to_json()
    assert "timing" not in json.loads(r1.to_json()) and "timing" in r1.to_dict(timing=True)


def test_compare_outputs_are_consistent():
    res = compare(synth("gaussian-bump", 16), synth("bent-sheet", 16), SMALL)
    assert res.record.T == pytest.approx(res.plan.objective)
    assert res.record.T >= 0
    assert len(res.pairs) == SMALL.N and len(res.scored) == SMALL.N
    assert res.record.area == pytest.approx(np.pi * np.sinh(1.0) ** 2)
    assert res.record.config == SMALL.to_dict()
    # T is the plan cost against the local distance matrix
    assert res.record.T == pytest.approx(np.mean([res.cost.values[i, j] for i, j in res.pairs]))


def test_single_sample_runs():
    res = compare(synth("gaussian-bump", 16), synth("two-bumps", 16), PipelineConfig(N=1, K=40, L=8))
    assert res.pairs == [(0, 0)] and np.isfinite(res.record.T)
    assert res.record.T == pytest.approx(res.cost.values[0, 0])


def test_invariant_to_rigid_motion_and_scale():
    mesh = synth("two-bumps", 16)
    c, s = np.cos(1.1), np.sin(1.1)
    rot = np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])
    moved = mesh.transformed(2.5 * rot, [1.0, -4.0, 0.5])
    other = synth("gaussian-bump", 16)
    t1 = compare(mesh, other, SMALL).record.T
    t2 = compare(moved, other, SMALL).record.T
    assert t2 == pytest.approx(t1, rel=1e-6)


def test_partial_and_voronoi_modes():
    a, b = synth("gaussian-bump", 16), synth("two-bumps", 16)
    full = compare(a, b, SMALL).record.T
    part = compare(a, b, PipelineConfig(N=20, K=60, L=8, seed=3, Q=0.5))
    assert len(part.pairs) == 10 and part.record.T <= full
    vor = compare(a, b, PipelineConfig(N=20, K=60, L=8, seed=3, equal_mass=False))
    assert vor.plan.pi.sum() == pytest.approx(1.0) and np.isfinite(vor.record.T)


def test_matrix_matches_pairwise_compare():
    meshes = [synth("flat-disk", 16), synth("gaussian-bump", 16), synth("bent-sheet", 16)]
    table = matrix(meshes, SMALL, ["flat", "bump", "bent"])
    assert np.array_equal(table.T, table.T.T) and (np.diag(table.T) == 0).all()
    for i in range(3):
        for j in range(i + 1, 3):
            assert table.T[i, j] == compare(meshes[i], meshes[j], SMALL).record.T
    threaded = matrix(meshes, PipelineConfig(N=20, K=60, L=8, seed=3, threads=3), ["flat", "bump", "bent"])
    assert np.array_equal(threaded.T, table.T)
    lines = table.to_csv().splitlines()
    assert lines[0] == ",flat,bump,bent" and float(lines[1].split(",")[2]) == table.T[0, 1]
    assert json.loads(table.to_json())["labels"] == ["flat", "bump", "bent"]


def test_matrix_errors_name_the_surface(tetrahedron):
    with pytest.raises(ValidationError):
        matrix([synth("flat-disk", 16)], SMALL)
    with pytest.raises(NotDiskTypeError) as err:
        matrix([synth("flat-disk", 16), tetrahedron], SMALL, ["ok", "closed"])
    assert "closed" in str(err.value) and err.value.stage == "validate"


def test_prepare_surface_tags_stage(tetrahedron):
    with pytest.raises(NotDiskTypeError) as err:
        prepare_surface(tetrahedron, SMALL)
    assert err.value.stage == "validate"


def test_mds_equilateral():
    D = np.ones((3, 3)) - np.eye(3)
    X = mds_embed(D, 2)
    got = np.linalg.norm(X[:, None] - X[None], axis=2)
    assert np.allclose(got, D, atol=1e-12)


def test_mds_recovers_euclidean_points():
    rng = np.random.default_rng(0)
    P = rng.standard_normal((6, 3))
    D = np.linalg.norm(P[:, None] - P[None], axis=2)
    X = mds_embed(D, 3)
    assert np.allclose(np.linalg.norm(X[:, None] - X[None], axis=2), D, atol=1e-10)
    # columns ordered by decreasing spread, first nonzero entry positive
    assert np.var(X[:, 0]) >= np.var(X[:, 1]) >= np.var(X[:, 2])
    assert (X[0] > 0).all()


def test_mds_zero_table_warns(caplog):
    with caplog.at_level(logging.WARNING):
        X = mds_embed(np.zeros((4, 4)), 2)
    assert np.array_equal(X, np.zeros((4, 2))) and "padding" in caplog.text


def test_mds_rejects_bad_tables():
    with pytest.raises(ValidationError):
        mds_embed(np.ones((2, 3)))
    with pytest.raises(ValidationError):
        mds_embed(np.array([[0, 1], [2, 0]]))
    with pytest.raises(ValidationError):
        mds_embed(-np.ones((2, 2)))


def test_distance_grows_with_bump_height():
    flat = synth("flat-disk", 32)
    cfg = PipelineConfig(N=100, seed=1)
    T = [compare(flat, synth("gaussian-bump", 32, height=h), cfg).record.T for h in (0.0, 0.1, 0.2, 0.4)]
    assert all(a <= b for a, b in zip(T, T[1:]))


def test_self_distance_is_stable_across_seeds():
    mesh = synth("two-bumps", 32)
    T = [compare(mesh, mesh, PipelineConfig(N=100, seed=s)).record.T for s in range(1, 6)]
    assert max(T) <= 2 * np.median(T)

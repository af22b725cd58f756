import numpy as np
import pytest

import specloc as sl
from specloc.anderson import EnsembleSpec, run_ensemble

TOPO = sl.HaldaneParams(t=1.0, t_c=0.5, phi=np.pi / 2, M=0.0)


def small_spec(lambdas=(0.0, 1.5), seeds=(11, 12, 13), rhos=(2.0, 3.0)):
    nx = ny = 8
    lat, _ = sl.build_haldane(nx, ny, TOPO, "periodic")
    probe = sl.Probe(tuple(lat.center), max(rhos), 0.2)
    return EnsembleSpec(nx=nx, ny=ny, params=TOPO, lambda_list=tuple(lambdas),
                        seeds=tuple(seeds), probe=probe, rho_grid=tuple(rhos))


def test_run_ensemble_deterministic_and_thread_safe():
    spec = small_spec()
    s1 = run_ensemble(spec)
    s2 = run_ensemble(spec)
    s3 = run_ensemble(spec, threads=3)
    assert s1.rows == s2.rows == s3.rows
    assert s1.aggregate == s3.aggregate


def test_zero_disorder_row_has_zero_variance():
    spec = small_spec(lambdas=(0.0,))
    stats = run_ensemble(spec)
    for agg in stats.aggregate:
        assert agg["std_g_rho"] == 0.0
        assert agg["std_mu"] == 0.0
        assert agg["std_index"] == 0.0
        assert agg["n_undefined"] == 0
    # index equals the clean-system marker
    lat, H = sl.build_haldane(spec.nx, spec.ny, TOPO, "periodic")
    clean = sl.half_signature(
        sl.assemble(H, lat, sl.Probe(spec.probe.x, spec.rho_grid[-1],
                                     spec.probe.kappa)))
    assert stats.aggregate[-1]["mean_index"] == clean.half_signature


def test_mean_local_gap_non_increasing_in_rho():
    spec = small_spec(lambdas=(0.0, 2.0), rhos=(2.0, 3.0, 4.0))
    stats = run_ensemble(spec)
    for lam in spec.lambda_list:
        means = [a["mean_g_rho"] for a in stats.aggregate if a["lambda"] == lam]
        assert all(x >= y - 1e-12 for x, y in zip(means, means[1:]))


def test_per_realization_rows_complete():
    spec = small_spec()
    stats = run_ensemble(spec)
    assert len(stats.rows) == len(spec.lambda_list) * len(spec.seeds) * len(spec.rho_grid)
    for row in stats.rows:
        assert row.g_rho >= 0 and row.mu >= 0 and row.dos0 >= 0
        if row.mu > 0:
            assert row.ratio == pytest.approx(row.g_rho / row.mu)


def test_ratio_region_matches_fig4_heuristic():
    # lambda = 0 at the probe radius sits inside the g/mu <= 2 region
    spec = small_spec(lambdas=(0.0,), rhos=(3.0,))
    stats = run_ensemble(spec)
    assert stats.aggregate[0]["mean_ratio"] <= 2.0


def test_ensemble_spec_round_trip():
    spec = small_spec()
    payload = spec.to_json_dict()
    assert EnsembleSpec.from_json_dict(payload) == spec


def test_expected_gap_estimate():
    assert sl.expected_gap_estimate(10.0, 0.01, 2) == pytest.approx(1.0)
    # doubling rho in d = 2 quarters the estimate
    e1 = sl.expected_gap_estimate(7.0, 0.3, 2)
    e2 = sl.expected_gap_estimate(14.0, 0.3, 2)
    assert e2 == pytest.approx(e1 / 4)
    with pytest.raises(ValueError):
        sl.expected_gap_estimate(5.0, 0.0, 2)


def test_rho_c_estimate():
    assert sl.rho_c_estimate(1.0, 1.0, 1.0, 1.0, 2) == pytest.approx(1.0)
    # vanishing DOS pushes the admissible length scale to infinity
    assert sl.rho_c_estimate(3.0, 5.0, 1e-12, 2.0, 2) > 1e6
    assert sl.rho_c_estimate(2.0, 2.0, 0.1, 2.0, 2) == pytest.approx(
        (2.0 * 2.0 * 2.0 * 0.01) ** (-1 / 3))


def test_heuristics_bracket_measured_gap():
    # E(g_rho) ~ 1/(rho^d dos0) should land within a decade of the measured
    # ensemble mean in the gap-filled regime
    spec = small_spec(lambdas=(2.5,), seeds=tuple(range(20, 28)), rhos=(4.0,))
    stats = run_ensemble(spec)
    agg = stats.aggregate[0]
    estimate = sl.expected_gap_estimate(4.0, max(agg["mean_dos0"], 1e-6), 2)
    measured = agg["mean_g_rho"]
    assert measured > 0
    assert 0.1 * measured <= estimate <= 10 * measured

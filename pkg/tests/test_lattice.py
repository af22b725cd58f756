import json

import numpy as np
import pytest
import scipy.sparse as sp

import specloc as sl
from specloc.lattice import NNN_PLUS, S3, from_json_dict, to_json_dict

from oracles import bulk_gap, chern_number, matching_kgrid, pbc_spectrum

TOPO = sl.HaldaneParams(t=1.0, t_c=0.5, phi=np.pi / 2, M=0.0)
MASSIVE = sl.HaldaneParams(t=1.0, t_c=0.0, phi=0.0, M=S3 / 2)


def hermiticity_defect(H):
    d = H.matrix - H.matrix.conj().T
    return np.abs(d.toarray()).max() if d.nnz else 0.0


def test_single_cell_dimer():
    lat, H = sl.build_haldane(1, 1, sl.HaldaneParams(t=1.0), "open")
    assert lat.n_sites == 2
    np.testing.assert_array_equal(H.to_dense(), [[0, -1], [-1, 0]])


def test_topological_phase_predicate():
    assert TOPO.is_topological  # 0 < 3 sqrt3 (t/2) sin(pi/2)
    assert not MASSIVE.is_topological
    assert not sl.HaldaneParams(t=1.0, t_c=0.5, phi=np.pi / 2, M=3.0).is_topological


def test_predicate_monotone_in_tc():
    margins = [3 * S3 * tc * np.sin(np.pi / 2) - 0.5
               for tc in (0.05, 0.1, 0.2, 0.4)]
    assert all(b > a for a, b in zip(margins, margins[1:]))


def test_periodic_spectrum_matches_bloch_oracle():
    lat, H = sl.build_haldane(4, 4, TOPO, "periodic")
    w = np.sort(np.linalg.eigvalsh(H.to_dense()))
    np.testing.assert_allclose(w, pbc_spectrum(4, 4, 1.0, 0.5, np.pi / 2, 0.0),
                               atol=1e-12)
    # min |eigenvalue| equals half the bulk gap on the matching k-grid
    grid_gap = min(
        np.abs(np.linalg.eigvalsh(
            __import__("oracles").bloch_hamiltonian(k, 1.0, 0.5, np.pi / 2, 0.0)
        )).min()
        for k in matching_kgrid(4, 4)
    )
    assert abs(np.abs(w).min() - grid_gap) < 1e-12


def test_periodic_spectrum_matches_bloch_generic_params():
    p = sl.HaldaneParams(t=1.0, t_c=0.3, phi=0.7, M=0.4)
    lat, H = sl.build_haldane(6, 6, p, "periodic")
    w = np.sort(np.linalg.eigvalsh(H.to_dense()))
    np.testing.assert_allclose(w, pbc_spectrum(6, 6, 1.0, 0.3, 0.7, 0.4),
                               atol=1e-12)


def test_builders_exactly_hermitian():
    for H in (
        sl.build_haldane(5, 6, TOPO, "open")[1],
        sl.build_haldane(4, 4, TOPO, "periodic")[1],
        sl.build_heterostructure(6, 6, MASSIVE, TOPO)[1],
        sl.build_ssh(7, 1.0, 0.3)[1],
    ):
        assert hermiticity_defect(H) == 0.0


def test_chiral_symmetry_of_plain_graphene():
    lat, H = sl.build_haldane(5, 4, sl.HaldaneParams(t=1.0), "open")
    s = sp.diags(np.where(lat.sublattice == 0, 1.0, -1.0).astype(complex))
    anti = s @ H.matrix + H.matrix @ s
    assert np.abs(anti.toarray()).max() < 1e-15
    w = np.linalg.eigvalsh(H.to_dense())
    np.testing.assert_allclose(w, -w[::-1], atol=1e-13)


def test_honeycomb_geometry_invariants():
    lat, H = sl.build_haldane(6, 5, TOPO, "open")
    assert lat.n_sites == 6 * 5 * 2
    # positions pairwise distinct
    assert len({tuple(np.round(p, 9)) for p in lat.positions}) == lat.n_sites
    # NN neighbor counts: A sites see <= 3 B sites at distance 1, bulk has 3
    from scipy.spatial import cKDTree

    tree = cKDTree(lat.positions)
    counts = []
    for i in np.flatnonzero(lat.sublattice == 0):
        nbrs = tree.query_ball_point(lat.positions[i], 1.0 + 1e-9)
        nn = [j for j in nbrs if j != i
              and abs(np.linalg.norm(lat.positions[j] - lat.positions[i]) - 1.0) < 1e-9]
        assert all(lat.sublattice[j] == 1 for j in nn)
        counts.append(len(nn))
    assert max(counts) == 3 and min(counts) >= 1
    interior = [c for i, c in zip(np.flatnonzero(lat.sublattice == 0), counts)
                if np.all(np.abs(lat.positions[i] - lat.center) < 3)]
    assert all(c == 3 for c in interior)


def test_periodic_size_requirements():
    with pytest.raises(ValueError):
        sl.build_haldane(2, 4, TOPO, "periodic")
    with pytest.raises(ValueError):
        sl.build_haldane(4, 5, TOPO, "periodic")


def test_nonfinite_parameters_rejected():
    with pytest.raises(ValueError):
        sl.HaldaneParams(t=np.nan)
    with pytest.raises(ValueError):
        sl.build_ssh(3, np.inf, 1.0)


def test_ssh_single_cell():
    lat, H = sl.build_ssh(1, 0.7, 0.2)
    np.testing.assert_array_equal(H.to_dense(), [[0, 0.7], [0.7, 0]])
    assert lat.dimension == 1


def test_ssh_decoupled_dimers_spectrum():
    # t1 = 0, t2 = t: two isolated dimers plus two free end sites
    lat, H = sl.build_ssh(3, 0.0, 1.0)
    w = np.sort(np.linalg.eigvalsh(H.to_dense()))
    np.testing.assert_allclose(w, [-1, -1, 0, 0, 1, 1], atol=1e-14)


def test_ssh_hopping_pattern():
    lat, H = sl.build_ssh(200, 1.0, 0.2)
    dense = H.to_dense().real
    assert dense[0, 1] == 1.0 and dense[1, 2] == 0.2 and dense[2, 3] == 1.0
    assert lat.n_sites == 400


def test_heterostructure_degenerate_split_equals_haldane():
    lat_h, H_h = sl.build_haldane(6, 6, TOPO, "open")
    lat_s, H_s = sl.build_heterostructure(6, 6, TOPO, TOPO)
    assert np.abs((H_h.matrix - H_s.matrix).toarray()).max() == 0.0


def test_heterostructure_requires_even_nx():
    with pytest.raises(ValueError):
        sl.build_heterostructure(5, 4, MASSIVE, TOPO)


def _expected_nnn_amplitude(vec, sub, params):
    plus = any(np.allclose(vec, w, atol=1e-6) for w in NNN_PLUS)
    nu = (1 if plus else -1) * (1 if sub == 0 else -1)
    return -params.t_c * np.exp(1j * nu * params.phi)


def test_heterostructure_bond_audit():
    """Independent bond-list walk: every NNN entry must match the parameters
    of the side owning the bond midpoint, NN entries carry -t."""
    nx = 8
    lat, H = sl.build_heterostructure(nx, 6, MASSIVE, TOPO)
    x_split = sl.lattice.interface_x(nx)
    coo = sp.triu(H.matrix, k=1).tocoo()
    n_cross_nn = 0
    for i, j, v in zip(coo.row, coo.col, coo.data):
        vec = lat.positions[j] - lat.positions[i]
        d = np.linalg.norm(vec)
        mid = lat.positions[i] + 0.5 * vec
        params = MASSIVE if mid[0] < x_split else TOPO
        if abs(d - 1.0) < 1e-9:
            assert v == -params.t
            if (lat.positions[i][0] - x_split) * (lat.positions[j][0] - x_split) < 0:
                n_cross_nn += 1
        else:
            assert abs(d - S3) < 1e-9
            expected = _expected_nnn_amplitude(vec, lat.sublattice[i], params)
            assert abs(v - expected) < 1e-12
    assert n_cross_nn > 0  # the interface is actually bonded


def test_heterostructure_onsite_by_side():
    nx = 8
    lat, H = sl.build_heterostructure(nx, 6, MASSIVE, TOPO)
    x_split = sl.lattice.interface_x(nx)
    diag = H.matrix.diagonal()
    for i in range(lat.n_sites):
        m = MASSIVE.M if lat.positions[i][0] < x_split else TOPO.M
        expected = m if lat.sublattice[i] == 0 else -m
        assert diag[i] == expected


def test_disorder_zero_strength_is_identity():
    lat, H = sl.build_haldane(4, 4, TOPO, "open")
    H2 = sl.apply_disorder(H, lat, sl.DisorderSpec(lam=0.0, seed=7))
    assert H2 is H


def test_disorder_deterministic_and_bounded():
    lat, H = sl.build_haldane(5, 4, TOPO, "open")
    d = sl.DisorderSpec(lam=2.0, seed=12345)
    H1 = sl.apply_disorder(H, lat, d)
    H2 = sl.apply_disorder(H, lat, d)
    assert np.abs((H1.matrix - H2.matrix).toarray()).max() == 0.0
    v = d.potential(lat)
    assert np.all(v >= -0.5) and np.all(v <= 0.5)
    assert np.abs(v).max() > 0


def test_disorder_disk_region():
    lat, H = sl.build_haldane(8, 8, TOPO, "open")
    center = lat.center
    d = sl.DisorderSpec(lam=6.0, seed=9, region=sl.Disk(tuple(center), 10.0))
    Hd = sl.apply_disorder(H, lat, d)
    delta = (Hd.matrix - H.matrix).diagonal()
    dist = lat.distances_from(center)
    assert np.all(delta[dist > 10.0] == 0)
    assert np.any(delta[dist <= 10.0] != 0)


def test_chern_oracle_values():
    assert chern_number(1.0, 0.5, np.pi / 2, 0.0) == 1
    assert chern_number(1.0, 0.0, 0.0, S3 / 2) == 0


def test_bulk_gap_oracle_value():
    # the M-point bands pin the topological bulk half-gap at exactly t
    assert abs(bulk_gap(1.0, 0.5, np.pi / 2, 0.0) - 1.0) < 1e-9


def test_json_round_trip():
    lat, H = sl.build_haldane(3, 3, TOPO, "open")
    payload = json.loads(json.dumps(to_json_dict(H)))
    lat2, H2 = from_json_dict(payload)
    assert np.abs((H.matrix - H2.matrix).toarray()).max() == 0.0
    np.testing.assert_array_equal(lat.positions, lat2.positions)
    np.testing.assert_array_equal(lat.sublattice, lat2.sublattice)


def test_json_schema_version_checked():
    lat, H = sl.build_ssh(2, 1.0, 0.5)
    payload = to_json_dict(H)
    payload["schema_version"] = 99
    with pytest.raises(ValueError):
        from_json_dict(payload)

"""Finite lattice geometries and tight-binding Hamiltonians.

Builders for the Haldane honeycomb model, massive graphene, SSH chains and
left/right heterostructures, plus seeded on-site disorder.  All builders are
pure and return exactly Hermitian sparse matrices (both matrix elements of a
bond are written from a single bond record).

Geometry conventions (spacing a_l = 1):
  nearest-neighbour vectors   d1=(0,1), d2=(s3/2,-1/2), d3=(-s3/2,-1/2)
  cell translations           u=(s3,0), v=(s3/2,3/2)
  rows are staggered so an nx x ny lattice fills a rectangle of width
  nx*s3 and height 1.5*ny + 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .linalg import operator_norm

S3 = math.sqrt(3.0)

# next-nearest-neighbour hops along these vectors pick up phase +phi on the A
# sublattice (-phi on B); the triple is (s3,0) rotated by 0, 120 and 240 deg
NNN_PLUS = np.array([[S3, 0.0], [-S3 / 2, 1.5], [-S3 / 2, -1.5]])

_NN_DIST = 1.0
_NNN_DIST = S3
_DIST_TOL = 1e-9

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class SiteLattice:
    """Geometric lattice decoupled from any Hamiltonian.

    positions : (n, dim) float array in units of the site spacing
    sublattice : (n,) int8 array, 0 = A and 1 = B
    cell_index : (n,) int array labelling the unit cell of each site
    """

    positions: np.ndarray
    sublattice: np.ndarray
    cell_index: np.ndarray
    dimension: int
    boundary: str = "open"
    spacing: float = 1.0

    @property
    def n_sites(self) -> int:
        return self.positions.shape[0]

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.positions.min(axis=0) + self.positions.max(axis=0))

    def distances_from(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.linalg.norm(self.positions - x[None, :], axis=1)


@dataclass(frozen=True)
class HermitianOperator:
    """Complex Hermitian sparse matrix over the sites of a lattice."""

    matrix: sp.csr_matrix
    lattice: SiteLattice

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def norm(self) -> float:
        return operator_norm(self.matrix)

    def __add__(self, other: "HermitianOperator") -> "HermitianOperator":
        if other.lattice is not self.lattice and other.dim != self.dim:
            raise ValueError("operands live on different lattices")
        return HermitianOperator(
            sp.csr_matrix(self.matrix + other.matrix), self.lattice
        )

    def __sub__(self, other: "HermitianOperator") -> "HermitianOperator":
        return self + (-1.0) * other

    def __rmul__(self, scalar: float) -> "HermitianOperator":
        return HermitianOperator(sp.csr_matrix(scalar * self.matrix), self.lattice)


@dataclass(frozen=True)
class HaldaneParams:
    """Parameters of the Haldane honeycomb Hamiltonian."""

    t: float = 1.0
    t_c: float = 0.0
    phi: float = 0.0
    M: float = 0.0

    def __post_init__(self):
        for name in ("t", "t_c", "phi", "M"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"non-finite Haldane parameter {name}")

    @property
    def is_topological(self) -> bool:
        return abs(self.M) < 3 * S3 * self.t_c * math.sin(self.phi)


@dataclass(frozen=True)
class Disk:
    center: tuple
    radius: float


@dataclass(frozen=True)
class DisorderSpec:
    """Uniform on-site disorder of strength `lam`, drawn from a seeded stream.

    The potential values v_n are iid uniform on [-1/2, 1/2] generated by a
    counter-based Philox generator, so identical seeds give bit-identical
    potentials on any platform.  `region` restricts where the potential acts
    (None applies it everywhere); the stream itself is drawn for every site
    so the values inside a disk do not depend on the region choice.
    """

    lam: float
    seed: int
    region: Disk | None = None

    def potential(self, lat: SiteLattice) -> np.ndarray:
        rng = np.random.Generator(np.random.Philox(key=self.seed))
        v = rng.random(lat.n_sites) - 0.5
        if self.region is not None:
            center = np.asarray(self.region.center, dtype=float)
            mask = lat.distances_from(center) <= self.region.radius
            v = np.where(mask, v, 0.0)
        return v


# ---------------------------------------------------------------------------
# honeycomb geometry


def _honeycomb_sites(nx: int, ny: int):
    positions = np.empty((2 * nx * ny, 2))
    sublattice = np.empty(2 * nx * ny, dtype=np.int8)
    cell = np.empty(2 * nx * ny, dtype=np.int64)
    idx = 0
    for j in range(ny):
        x_off = S3 / 2 * (j % 2)
        for i in range(nx):
            x0 = S3 * i + x_off
            positions[idx] = (x0, 1.5 * j)
            positions[idx + 1] = (x0, 1.5 * j + 1)
            sublattice[idx] = 0
            sublattice[idx + 1] = 1
            cell[idx] = cell[idx + 1] = j * nx + i
            idx += 2
    return positions, sublattice, cell


def _periodic_translations(nx: int, ny: int) -> np.ndarray:
    t1 = np.array([nx * S3, 0.0])
    t2 = np.array([0.0, 1.5 * ny])
    return np.array([t1, t2, t1 + t2, t1 - t2])


def _collect_bonds(positions: np.ndarray, translations) -> list:
    """Undirected (i, j, vec) bond records with vec = pos[j] + T - pos[i].

    NN bonds have |vec| = 1, NNN bonds |vec| = sqrt(3).  Each translation in
    `translations` is used in one orientation only, so every wrapped bond is
    recorded exactly once.
    """
    tree = cKDTree(positions)
    bonds = []
    dmax = _NNN_DIST + 1e-6
    pairs = tree.sparse_distance_matrix(tree, dmax, output_type="coo_matrix")
    for i, j, d in zip(pairs.row, pairs.col, pairs.data):
        if i < j and d > 0.5:
            bonds.append((int(i), int(j), positions[j] - positions[i]))
    for t_vec in translations:
        shifted = cKDTree(positions + t_vec[None, :])
        pairs = tree.sparse_distance_matrix(shifted, dmax, output_type="coo_matrix")
        for i, j, d in zip(pairs.row, pairs.col, pairs.data):
            if d > 0.5:
                if i == j:
                    raise ValueError("lattice too small for periodic wrapping")
                bonds.append((int(i), int(j), positions[j] + t_vec - positions[i]))
    return bonds


def _nnn_phase_sign(vec: np.ndarray, sub: int) -> int:
    plus = bool(np.any(np.all(np.abs(NNN_PLUS - vec) < 1e-6, axis=1)))
    if not plus and not np.any(np.all(np.abs(NNN_PLUS + vec) < 1e-6, axis=1)):
        raise AssertionError(f"unrecognized NNN bond vector {vec}")
    sign = 1 if plus else -1
    return sign if sub == 0 else -sign


def _assemble_honeycomb(lat: SiteLattice, bonds, params_at) -> sp.csr_matrix:
    n = lat.n_sites
    rows, cols, vals = [], [], []

    def put(i, j, amp):
        rows.extend((i, j))
        cols.extend((j, i))
        vals.extend((amp, np.conj(amp)))

    for i in range(n):
        p = params_at(lat.positions[i])
        m_val = p.M if lat.sublattice[i] == 0 else -p.M
        if m_val != 0.0:
            rows.append(i)
            cols.append(i)
            vals.append(m_val)

    for i, j, vec in bonds:
        mid = lat.positions[i] + 0.5 * vec
        p = params_at(mid)
        d = np.linalg.norm(vec)
        if abs(d - _NN_DIST) < 1e-6:
            if lat.sublattice[i] == lat.sublattice[j]:
                raise AssertionError("NN bond within one sublattice")
            put(i, j, -p.t)
        elif abs(d - _NNN_DIST) < 1e-6:
            if lat.sublattice[i] != lat.sublattice[j]:
                raise AssertionError("NNN bond across sublattices")
            if p.t_c != 0.0:
                nu = _nnn_phase_sign(vec, int(lat.sublattice[i]))
                put(i, j, -p.t_c * np.exp(1j * nu * p.phi))
        else:
            raise AssertionError(f"unexpected bond length {d}")

    h = sp.coo_matrix((vals, (rows, cols)), shape=(n, n), dtype=complex)
    return h.tocsr()


def _build_honeycomb(nx, ny, params_at, boundary):
    if nx < 1 or ny < 1:
        raise ValueError("nx, ny must be >= 1")
    if boundary not in ("open", "periodic"):
        raise ValueError(f"unknown boundary {boundary!r}")
    if boundary == "periodic" and (nx < 3 or ny < 4 or ny % 2):
        # the staggered rows wrap cleanly only for even ny, and smaller tori
        # make NNN minimum images ambiguous
        raise ValueError("periodic honeycomb requires nx >= 3 and even ny >= 4")
    positions, sub, cell = _honeycomb_sites(nx, ny)
    lat = SiteLattice(positions, sub, cell, dimension=2, boundary=boundary)
    translations = _periodic_translations(nx, ny) if boundary == "periodic" else []
    bonds = _collect_bonds(positions, translations)
    h = _assemble_honeycomb(lat, bonds, params_at)
    return lat, HermitianOperator(h, lat)


def build_haldane(nx: int, ny: int, p: HaldaneParams, boundary: str = "open"):
    """Haldane honeycomb lattice: on-site +-M, NN hopping -t and NNN hopping
    -t_c e^{+-i phi}.

    Parameters
    ----------
    nx, ny : int
        Number of unit cells (2 sites each) per direction.
    p : HaldaneParams
    boundary : "open" | "periodic"

    Returns
    -------
    (SiteLattice, HermitianOperator)
    """
    return _build_honeycomb(nx, ny, lambda pos: p, boundary)


def build_heterostructure(nx: int, ny: int, left: HaldaneParams,
                          right: HaldaneParams):
    """Honeycomb strip whose left half uses `left` parameters and right half
    `right`; bonds are owned by the side containing their midpoint.

    `nx` must be even so the split puts nx/2 columns on each side.
    """
    if nx % 2:
        raise ValueError("heterostructure requires even nx")
    x_split = S3 * (nx / 2 - 0.25)

    def params_at(pos):
        return left if pos[0] < x_split else right

    return _build_honeycomb(nx, ny, params_at, "open")


def interface_x(nx: int) -> float:
    """x coordinate of the heterostructure interface for an nx-column strip."""
    return S3 * (nx / 2 - 0.25)


# ---------------------------------------------------------------------------
# SSH chain


def build_ssh(n_cells: int, t1: float, t2: float):
    """Open SSH chain with alternating hoppings t1 (intra-cell) and t2."""
    if n_cells < 1:
        raise ValueError("n_cells must be >= 1")
    if not (math.isfinite(t1) and math.isfinite(t2)):
        raise ValueError("non-finite hopping")
    n = 2 * n_cells
    positions = np.arange(n, dtype=float)[:, None]
    sub = np.tile([0, 1], n_cells).astype(np.int8)
    cell = (np.arange(n) // 2).astype(np.int64)
    lat = SiteLattice(positions, sub, cell, dimension=1)
    amp = np.where(np.arange(n - 1) % 2 == 0, t1, t2).astype(complex)
    h = sp.diags([amp, amp.conj()], [1, -1], shape=(n, n), dtype=complex)
    return lat, HermitianOperator(h.tocsr(), lat)


# ---------------------------------------------------------------------------
# disorder


def apply_disorder(H: HermitianOperator, lat: SiteLattice,
                   d: DisorderSpec) -> HermitianOperator:
    """H + lam * sum_{n in region} v_n |n><n| with seeded uniform v_n."""
    if d.region is not None:
        center = np.asarray(d.region.center, dtype=float)
        if center.shape[0] != lat.dimension:
            raise ValueError("disorder region center has wrong dimension")
    if d.lam == 0.0:
        return H
    v = d.lam * d.potential(lat)
    h = H.matrix + sp.diags(v.astype(complex))
    return HermitianOperator(h.tocsr(), lat)


# ---------------------------------------------------------------------------
# JSON export of (lattice, operator) pairs


def to_json_dict(H: HermitianOperator) -> dict:
    """Serializable dict with sites and the upper matrix triangle."""
    lat = H.lattice
    pos = lat.positions
    sites = [
        {
            "x": float(pos[i, 0]),
            "y": float(pos[i, 1]) if lat.dimension == 2 else 0.0,
            "sublattice": "A" if lat.sublattice[i] == 0 else "B",
        }
        for i in range(lat.n_sites)
    ]
    coo = sp.triu(H.matrix).tocoo()
    entries = [
        {"row": int(r), "col": int(c), "re": float(v.real), "im": float(v.imag)}
        for r, c, v in zip(coo.row, coo.col, coo.data)
    ]
    return {
        "schema_version": SCHEMA_VERSION,
        "dimension": lat.dimension,
        "boundary": lat.boundary,
        "sites": sites,
        "entries": entries,
    }


def from_json_dict(payload: dict):
    """Inverse of `to_json_dict`; cell indices are not round-tripped."""
    if payload.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {payload.get('schema_version')}")
    dim = payload["dimension"]
    sites = payload["sites"]
    n = len(sites)
    positions = np.array(
        [[s["x"], s["y"]][:dim] for s in sites], dtype=float
    ).reshape(n, dim)
    sub = np.array([0 if s["sublattice"] == "A" else 1 for s in sites], dtype=np.int8)
    lat = SiteLattice(positions, sub, np.zeros(n, dtype=np.int64),
                      dimension=dim, boundary=payload.get("boundary", "open"))
    rows, cols, vals = [], [], []
    for e in payload["entries"]:
        r, c = e["row"], e["col"]
        val = e["re"] + 1j * e["im"]
        rows.append(r)
        cols.append(c)
        vals.append(val)
        if r != c:
            rows.append(c)
            cols.append(r)
            vals.append(np.conj(val))
    h = sp.coo_matrix((vals, (rows, cols)), shape=(n, n), dtype=complex).tocsr()
    return lat, HermitianOperator(h, lat)


def dump_json(H: HermitianOperator, path) -> None:
    with open(path, "w") as fh:
        json.dump(to_json_dict(H), fh)


def load_json(path):
    with open(path) as fh:
        return from_json_dict(json.load(fh))

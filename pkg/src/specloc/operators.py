"""Core operator algebra: restrictions, Dirac operators, commutators,
resolvent-damped norms and tapered multipliers.

Doubled (spinor) matrices use block layout: index = (block, site) with the
upper block first, so M = [[A, B], [C, D]] built with ``scipy.sparse.bmat``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .lattice import HermitianOperator, SiteLattice
from .linalg import operator_norm


@dataclass(frozen=True)
class Restriction:
    """Index set of lattice sites inside a ball or box around `center`.

    ball: ||pos - center||_2 < radius;  box: ||pos - center||_inf < radius/2.
    """

    center: np.ndarray
    radius: float
    shape: str
    indices: np.ndarray

    @classmethod
    def from_lattice(cls, lat: SiteLattice, x, rho: float,
                     shape: str = "ball") -> "Restriction":
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if shape == "ball":
            keep = lat.distances_from(x) < rho
        elif shape == "box":
            keep = np.all(np.abs(lat.positions - x[None, :]) < rho / 2, axis=1)
        else:
            raise ValueError(f"unknown region shape {shape!r}")
        return cls(x, float(rho), shape, np.flatnonzero(keep))

    @property
    def n_kept(self) -> int:
        return self.indices.size


def sublattice_of(lat: SiteLattice, indices: np.ndarray) -> SiteLattice:
    """Lattice over a subset of sites (used as the basis of restrictions)."""
    return SiteLattice(
        lat.positions[indices],
        lat.sublattice[indices],
        lat.cell_index[indices],
        dimension=lat.dimension,
        boundary="open",
        spacing=lat.spacing,
    )


def principal_submatrix(m: sp.spmatrix, indices: np.ndarray) -> sp.csr_matrix:
    return sp.csr_matrix(m.tocsr()[np.ix_(indices, indices)])


def restrict(A: HermitianOperator, r: Restriction) -> HermitianOperator:
    """Dirichlet restriction pi A pi^* to the kept sites of `r`."""
    if r.n_kept == 0:
        raise ValueError("restriction keeps no sites")
    if r.indices.max() >= A.dim:
        raise ValueError("restriction indices outside operator basis")
    sub = principal_submatrix(A.matrix, r.indices)
    return HermitianOperator(sub, sublattice_of(A.lattice, r.indices))


@dataclass(frozen=True)
class DiracOperator:
    """Dual Dirac operator D(x) = sum_j gamma_j (X_j - x_j).

    In d=2 the Clifford matrices are the first two Pauli matrices, so
    D = [[0, diag(conj(z))], [diag(z), 0]] with z = (X_1-x_1) + i(X_2-x_2);
    in d=1 no doubling occurs and D = X - x.
    """

    center: np.ndarray
    lattice: SiteLattice

    @classmethod
    def at(cls, lat: SiteLattice, x) -> "DiracOperator":
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape[0] != lat.dimension:
            raise ValueError("center has wrong dimension")
        return cls(x, lat)

    @property
    def z(self) -> np.ndarray:
        """Complex diagonal of D_0(x) (d=2) or real diagonal X - x (d=1)."""
        rel = self.lattice.positions - self.center[None, :]
        if self.lattice.dimension == 2:
            return rel[:, 0] + 1j * rel[:, 1]
        return rel[:, 0].astype(complex)

    @property
    def radii(self) -> np.ndarray:
        return np.abs(self.z)

    def full_matrix(self) -> sp.csr_matrix:
        z = self.z
        if self.lattice.dimension == 1:
            return sp.diags(z.real).tocsr().astype(complex)
        return sp.bmat(
            [[None, sp.diags(np.conj(z))], [sp.diags(z), None]], format="csr"
        )


def grading(n_sites: int) -> sp.csr_matrix:
    """Chiral grading Gamma = diag(+1, -1) in the doubled block layout."""
    g = np.concatenate([np.ones(n_sites), -np.ones(n_sites)])
    return sp.diags(g).tocsr().astype(complex)


def doubled(m: sp.spmatrix) -> sp.csr_matrix:
    """Lift a single-space operator A to A (x) 1_2."""
    return sp.bmat([[m, None], [None, m]], format="csr")


def _weighted_commutator(weights: np.ndarray, m: sp.spmatrix) -> sp.csr_matrix:
    """[diag(w), M] with entries (w_i - w_j) M_ij, kept sparse."""
    coo = m.tocoo()
    data = (weights[coo.row] - weights[coo.col]) * coo.data
    return sp.coo_matrix((data, (coo.row, coo.col)), shape=m.shape).tocsr()


def commutator_with_dirac(H: HermitianOperator, D: DiracOperator) -> sp.csr_matrix:
    """[D(x), H (x) 1_2] for d=2 (block off-diagonal), or [X - x, H] for d=1.

    Since the positions are diagonal, entry (m, n) of [D_0, H] is
    (z_m - z_n) H_mn.
    """
    z = D.z
    if D.lattice.dimension == 1:
        return _weighted_commutator(z, H.matrix)
    lower = _weighted_commutator(z, H.matrix)
    upper = _weighted_commutator(np.conj(z), H.matrix)
    return sp.bmat([[None, upper], [lower, None]], format="csr")


def dirac_resolvent_product(a: sp.spmatrix, D: DiracOperator, alpha: float,
                            mode: str = "D") -> sp.csr_matrix:
    """A (i 1 + alpha D)^{-1}, exactly, using the diagonal structure of D^2.

    mode "D" uses the chiral Dirac operator (doubled space in d=2); mode
    "absD" replaces D by |D(x)| = |X - x|, which keeps everything on the
    single space.  `a` must match the corresponding dimension.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    n = D.lattice.n_sites
    r = D.radii
    if mode == "absD":
        res = 1.0 / (1j + alpha * r)
        if a.shape[1] == 2 * n:
            res = np.concatenate([res, res])
        elif a.shape[1] != n:
            raise ValueError("operator dimension matches neither space")
        return sp.csr_matrix(a @ sp.diags(res))
    if mode != "D":
        raise ValueError(f"unknown damping mode {mode!r}")
    if D.lattice.dimension == 1:
        res = 1.0 / (1j + alpha * D.z.real)
        return sp.csr_matrix(a @ sp.diags(res))
    if a.shape[1] != 2 * n:
        a = doubled(a)
    # (i + aD)^{-1} = (-i + aD) (1 + a^2 D^2)^{-1} and D^2 = diag(r^2, r^2)
    g = 1.0 / (1.0 + alpha**2 * r**2)
    g2 = np.concatenate([g, g])
    return sp.csr_matrix((a @ D.full_matrix()) * alpha @ sp.diags(g2)
                         - 1j * (a @ sp.diags(g2)))


def damped_norm(a, D: DiracOperator, alpha: float, mode: str = "D",
                tol: float = 1e-8) -> float:
    """|| A (i 1 + alpha D(x))^{-1} || as an operator 2-norm.

    alpha = 0 returns ||A|| since the resolvent is then the unitary -i 1.
    """
    m = a.matrix if isinstance(a, HermitianOperator) else a
    if alpha == 0.0:
        return operator_norm(m, tol=tol)
    return operator_norm(dirac_resolvent_product(m, D, alpha, mode), tol=tol)


def tapered_multiplier(lat: SiteLattice, x, rho: float, F) -> HermitianOperator:
    """Diagonal operator F(|pos - x| / rho): 1 on the inner plateau
    |pos - x| <= rho/2 and 0 beyond rho."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    profile = F.F if hasattr(F, "F") else F
    vals = profile(lat.distances_from(x) / rho)
    diag = sp.diags(np.asarray(vals, dtype=complex)).tocsr()
    return HermitianOperator(diag, lat)

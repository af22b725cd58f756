"""Admissibility windows for the localizer tuning parameter kappa.

All variants bound kappa from below by 2 g_rho / rho and from above by

    g_rho^3 / [ (1 - a - b^2)^{-1} (C_F ||H R|| + g_rho) ||[D(x), H] R|| ]

with different choices of the damping operator R:

  cond10       R = (i 1 + (c kappa / g_rho) D(x))^{-1}  (self-consistent in kappa)
  cond12       R = (i 1 + (2 c / rho) D(x))^{-1}        (kappa-free sufficient form)
  cond11       R = -i 1 (a = 0, global norms)
  criterion2d  the d=2 convenience form with |X - x| damping, a = 3/20,
               b = c = 1/2 and C_F = 2 baked in

An admissible (kappa, rho) certifies a localizer gap mu >= b g_rho on every
region containing the ball.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .lattice import HermitianOperator, SiteLattice
from .linalg import operator_norm
from .localgap import local_gap, squared_operator
from .operators import (
    DiracOperator,
    _weighted_commutator,
    commutator_with_dirac,
    damped_norm,
    doubled,
)

#: Fourier tapering constant used by default: the numerically supported
#: nearest-neighbour value.  4.56 (beta k=1 bound) and 8 (legacy) also work.
DEFAULT_C_F = 2.0


@dataclass(frozen=True)
class BoundParams:
    """Constants (a, b, c) of the gap criterion with c^2 = a/(1 - a - b^2)."""

    a: float
    b: float
    c: float | None = None
    C_F: float = DEFAULT_C_F

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise ValueError("a, b must be >= 0")
        if 1 - self.a - self.b**2 <= 0:
            raise ValueError("require 1 - a - b^2 > 0")
        c_expected = math.sqrt(self.a / (1 - self.a - self.b**2))
        if self.c is None:
            object.__setattr__(self, "c", c_expected)
        elif abs(self.c - c_expected) > 1e-12:
            raise ValueError(f"c={self.c} inconsistent with (a, b); "
                             f"expected {c_expected}")

    @property
    def prefactor(self) -> float:
        return 1.0 / (1 - self.a - self.b**2)


@dataclass(frozen=True)
class KappaWindow:
    """One admissibility window evaluation; admissible iff lower < upper."""

    lower: float
    upper: float
    variant: str
    g_rho: float
    rho: float
    kappa_probe: float | None = None

    @property
    def admissible(self) -> bool:
        return self.lower < self.upper


def _window(H, lat, x, g_rho, rho, params, alpha, variant, kappa_probe=None,
            mode="D"):
    if g_rho <= 0:
        raise ValueError("g_rho must be positive")
    D = DiracOperator.at(lat, x)
    h2 = doubled(H.matrix) if (lat.dimension == 2 and mode == "D") else H.matrix
    norm_h = damped_norm(h2, D, alpha, mode=mode)
    comm = commutator_with_dirac(H, D)
    norm_comm = damped_norm(comm, D, alpha, mode=mode)
    upper = g_rho**3 / (params.prefactor * (params.C_F * norm_h + g_rho) * norm_comm)
    return KappaWindow(2 * g_rho / rho, float(upper), variant, float(g_rho),
                       float(rho), kappa_probe)


def kappa_window_relative(H: HermitianOperator, lat: SiteLattice, x,
                          g_rho: float, rho: float, params: BoundParams,
                          kappa_probe: float | None = None,
                          variant: str = "cond10") -> KappaWindow:
    """Relative (resolvent-damped) admissibility window.

    variant "cond10" evaluates the self-consistent form at the supplied
    `kappa_probe`; variant "cond12" uses the kappa-free damping 2c/rho.
    With a = 0 both reduce exactly to the global-norm window.
    """
    if variant == "cond10":
        if params.c > 0 and kappa_probe is None:
            raise ValueError("cond10 with a > 0 needs kappa_probe")
        alpha = params.c * (kappa_probe or 0.0) / g_rho
    elif variant == "cond12":
        alpha = 2 * params.c / rho
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return _window(H, lat, x, g_rho, rho, params, alpha, variant, kappa_probe)


def kappa_window_global(H: HermitianOperator, lat: SiteLattice, x,
                        g_rho: float, rho: float, b: float,
                        C_F: float = DEFAULT_C_F) -> KappaWindow:
    """Global-norm window (a = 0): the prior-work bound with the local gap."""
    if not 0 < b < 1:
        raise ValueError("require 0 < b < 1")
    params = BoundParams(a=0.0, b=b, C_F=C_F)
    return _window(H, lat, x, g_rho, rho, params, 0.0, "cond11")


def criterion_2d(H: HermitianOperator, lat: SiteLattice, x, g_rho: float,
                 rho: float) -> KappaWindow:
    """The dimension-2 convenience criterion
    2 g/rho < kappa < g^3 / [ (5/3)(2 ||H R|| + g) ||[X_1 + iX_2 - z_x, H] R|| ]
    with R = (i 1 + |X - x|/rho)^{-1} (single-space norms)."""
    if g_rho <= 0:
        raise ValueError("g_rho must be positive")
    D = DiracOperator.at(lat, x)
    alpha = 1.0 / rho
    norm_h = damped_norm(H.matrix, D, alpha, mode="absD")
    comm = _weighted_commutator(D.z, H.matrix)
    norm_comm = damped_norm(comm, D, alpha, mode="absD")
    upper = g_rho**3 / ((5.0 / 3.0) * (2.0 * norm_h + g_rho) * norm_comm)
    return KappaWindow(2 * g_rho / rho, float(upper), "criterion2d",
                       float(g_rho), float(rho))


def defect_bound(H: HermitianOperator, W: HermitianOperator, lat: SiteLattice,
                 x, y, rho: float, C_F: float = DEFAULT_C_F) -> KappaWindow:
    """Defect-damped sufficient window for H + W with W centered near y.

    The perturbation enters only through W(y) = W (1 + |X - y|) damped by
    4 rho / (1 + |x - y|^2), so distant defects barely move the window:

        upper = g^3 / [ (5/3) (C_F ||H|| + 4 C_F rho ||W(y)||/(1+d^2) + g)
                              (||[D,H]|| + 4 rho ||[W(y),D]||/(1+d^2)) ]

    with g = g_rho(H + W, x) and d = |x - y|.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    g = local_gap(H + W, x, rho).g_rho
    if g <= 0:
        raise ValueError("perturbed local gap vanished")
    d2 = float(np.sum((x - y) ** 2))
    damp = 4.0 * rho / (1.0 + d2)
    D = DiracOperator.at(lat, x)

    wy = W.matrix @ sp.diags((1.0 + lat.distances_from(y)).astype(complex))
    norm_h = operator_norm(H.matrix)
    norm_wy = operator_norm(wy)
    # both off-diagonal blocks of [D, .] can differ for the non-Hermitian
    # W(y); take the full (max) block norm
    norm_comm_h = operator_norm(_weighted_commutator(D.z, H.matrix))
    norm_comm_w = max(
        operator_norm(_weighted_commutator(D.z, wy)),
        operator_norm(_weighted_commutator(np.conj(D.z), wy)),
    )
    upper = g**3 / (
        (5.0 / 3.0)
        * (C_F * norm_h + C_F * damp * norm_wy + g)
        * (norm_comm_h + damp * norm_comm_w)
    )
    return KappaWindow(2 * g / rho, float(upper), "defect", float(g), float(rho))


def admissible_region_scan(H: HermitianOperator, lat: SiteLattice, x,
                           rho_grid, kappa_grid, params: BoundParams,
                           E: float = 0.0,
                           variant: str = "cond10") -> list[KappaWindow]:
    """Evaluate the window on a (rho, kappa) grid (kappa is the cond10 probe).

    Returns one KappaWindow per grid cell; a cell is admissible when
    lower < kappa <= upper, i.e. the pair itself satisfies the criterion.
    """
    rho_grid = list(rho_grid)
    kappa_grid = list(kappa_grid)
    if not rho_grid or not kappa_grid:
        raise ValueError("empty scan grid")
    square = squared_operator(H, E)
    out = []
    for rho in rho_grid:
        g = local_gap(H, x, rho, E, square=square).g_rho
        for kappa in kappa_grid:
            if variant == "cond10":
                w = kappa_window_relative(H, lat, x, g, rho, params,
                                          kappa_probe=kappa, variant="cond10")
            elif variant == "cond12":
                w = kappa_window_relative(H, lat, x, g, rho, params,
                                          variant="cond12")
                w = KappaWindow(w.lower, w.upper, w.variant, w.g_rho, w.rho,
                                kappa)
            else:
                raise ValueError(f"unknown variant {variant!r}")
            out.append(w)
    return out


def pair_admissible(w: KappaWindow) -> bool:
    """True when the scanned pair itself lies in the window."""
    return w.kappa_probe is not None and w.lower < w.kappa_probe <= w.upper

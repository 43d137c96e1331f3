"""One-dimensional weighted Neumann eigenproblems.

The generator u'' - psi' u' acting on L^2 of a density exp(-psi) is
discretized in divergence form on a cell-centered grid: stiffness entries
use density values at cell faces, mass entries use cell-center density
times cell width.  Only density *values* are ever needed, so kinked
potentials (|t|, |t|^p with p<=1) require no smoothing.

The discrete pencil is a symmetric-definite tridiagonal generalized
problem solved directly; the smallest nontrivial eigenvalue inverts to the
Poincare constant of the truncated measure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import NotConverged, NotNormalized, SingularWeight
from .measures import Density, expectation

__all__ = ["Spectrum1D", "solve_sturm_liouville", "poincare_1d",
           "bobkov_bracket", "conditional_gap", "line_restriction"]


@dataclass
class Spectrum1D:
    """Ascending eigenpairs of the discrete weighted Neumann problem."""
    window: Tuple[float, float]
    node_count: int
    eigenvalues: np.ndarray          # lambda_0 ~ 0 included
    eigenvectors: np.ndarray         # (node_count, k+1), mu-orthonormal
    extrapolated_lambda1: float = math.nan
    lambda1_error: float = math.nan
    cell_centers: np.ndarray = field(default=None, repr=False)
    cell_masses: np.ndarray = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {"lambda": self.eigenvalues.tolist(),
                "cp": 1.0 / self.extrapolated_lambda1,
                "error": self.lambda1_error,
                "window": list(self.window),
                "nodes": self.node_count}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _density_values_1d(dens_or_fn, t: np.ndarray) -> np.ndarray:
    if isinstance(dens_or_fn, Density):
        return dens_or_fn.rho(t)
    return np.asarray(dens_or_fn(t), dtype=float)


def _solve_grid(dens, a: float, b: float, n: int, k: int):
    h = (b - a) / n
    faces = a + h * np.arange(1, n)          # interior faces
    centers = a + h * (np.arange(n) + 0.5)
    w = _density_values_1d(dens, faces)
    m = _density_values_1d(dens, centers) * h
    if np.any(m <= 0.0) or np.any(w < 0.0):
        raise SingularWeight("density underflows to zero inside the window")
    if np.any(w == 0.0):
        raise SingularWeight("zero face weight inside the window")
    wf = w / h
    diag = np.zeros(n)
    diag[:-1] += wf
    diag[1:] += wf
    off = -wf
    # symmetrize the pencil (A, M) with M = diag(m)
    sqrt_m = np.sqrt(m)
    d_sym = diag / m
    e_sym = off / (sqrt_m[:-1] * sqrt_m[1:])
    k_eff = min(k, n - 1)
    vals, vecs = eigh_tridiagonal(d_sym, e_sym, select="i",
                                  select_range=(0, k_eff))
    vecs = vecs / sqrt_m[:, None]            # mu-orthonormal eigenvectors
    return vals, vecs, centers, m


def solve_sturm_liouville(dens, window: Tuple[float, float], nodes: int,
                          k: int = 4) -> Spectrum1D:
    """k+1 smallest eigenpairs of the finite-volume operator on [a, b].

    ``dens`` is a 1-D :class:`Density` or a plain density callable.  The
    boundary condition is zero flux (Neumann), so the constant function is
    an exact discrete eigenvector with eigenvalue ~0.
    """
    if nodes < 64:
        raise ValueError("need at least 64 nodes")
    a, b = window
    vals, vecs, centers, m = _solve_grid(dens, a, b, nodes, k)
    vals_c, _, _, _ = _solve_grid(dens, a, b, nodes // 2, min(k, 1))
    lam1 = (4.0 * vals[1] - vals_c[1]) / 3.0
    err = abs(vals[1] - vals_c[1]) / 3.0
    return Spectrum1D(window=(a, b), node_count=nodes,
                      eigenvalues=np.maximum(vals, 0.0), eigenvectors=vecs,
                      extrapolated_lambda1=lam1, lambda1_error=err,
                      cell_centers=centers, cell_masses=m)


def _default_window(dens) -> float:
    if isinstance(dens, Density):
        return float(dens.support_box[0])
    raise ValueError("explicit window required for a bare callable")


def poincare_1d(dens, window: Optional[float] = None, nodes: int = 4096,
                tol: float = 0.02, max_doublings: int = 3):
    """Poincare constant of a 1-D measure with an error bar.

    Richardson-extrapolates the spectral gap over two grids, then checks
    convergence in the window by growing it 1.5x; raises
    :class:`NotConverged` when ``max_doublings`` window growths still move
    the answer by more than ``tol`` (relative).
    """
    w = _default_window(dens) if window is None else float(window)
    cap = math.inf
    if isinstance(dens, Density) and dens.indicator is not None:
        # compact support: windows larger than the support are pointless
        # (and singular), so clamp instead of growing past it
        cap = float(dens.support_box[0])
        w = min(w, cap)
    for _ in range(max_doublings + 1):
        try:
            w2 = min(1.5 * w, cap)
            s1 = solve_sturm_liouville(dens, (-w, w), nodes, k=1)
            s2 = solve_sturm_liouville(dens, (-w2, w2),
                                       int(nodes * 1.5), k=1)
        except SingularWeight:
            # window reaches into the underflow region; shrink instead
            w *= 0.7
            continue
        lam_a, lam_b = s1.extrapolated_lambda1, s2.extrapolated_lambda1
        drift = abs(lam_a - lam_b) / max(lam_b, 1e-300)
        if drift <= tol:
            cp = 1.0 / lam_b
            err = cp * (drift + s2.lambda1_error / lam_b)
            return cp, err
        w *= 2.0
    raise NotConverged(f"window growth beyond {w:g} still moves lambda1 "
                       f"by more than {tol:g}")


def bobkov_bracket(dens: Density) -> Tuple[float, float]:
    """Two-sided Poincare bracket (phi(0)^-2/12, phi(0)^-2) for an even,
    log-concave, normalized 1-D density."""
    if not dens.normalized:
        raise NotNormalized("bracket requires a probability density")
    if dens.density_at_origin is None:
        raise NotNormalized("density value at the origin is unknown")
    phi0 = dens.density_at_origin
    return (1.0 / (12.0 * phi0 ** 2), 1.0 / phi0 ** 2)


def line_restriction(dens: Density, index: int, anchor) -> "_LineDensity":
    """1-D unnormalized density t -> rho(anchor with coordinate i set to t)."""
    anchor = np.asarray(anchor, dtype=float)
    return _LineDensity(dens, index, anchor)


class _LineDensity:
    def __init__(self, dens, index, anchor):
        self.dens = dens
        self.index = index
        self.anchor = anchor

    def __call__(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        pts = np.tile(self.anchor, (len(t), 1))
        pts[:, self.index] = t
        with np.errstate(under="ignore"):
            return np.exp(self.dens.log_rho(pts))

    def halfwidth(self) -> float:
        return float(self.dens.support_box[self.index])


def conditional_gap(dens: Density, index: int, anchor, nodes: int = 4096,
                    window: Optional[float] = None) -> float:
    """Spectral gap of the restriction of an n-D measure to an axis line."""
    line = line_restriction(dens, index, anchor)
    w = line.halfwidth() if window is None else window
    spec = solve_sturm_liouville(line, (-w, w), nodes, k=1)
    return spec.extrapolated_lambda1

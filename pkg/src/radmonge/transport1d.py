"""One-dimensional optimal transport on an interval.

CDFs are piecewise linear (trapezoid accumulation); the monotone transport
map is the exact inverse of the discrete CDF model composed with the source
CDF. Also houses the triangle-map counterexample showing that the monotone
map is not the Sobolev-cheapest transport for strongly oscillating densities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .domain import ValidationError
from . import stencils


@dataclass(frozen=True)
class Measure1D:
    """Nonnegative density samples on increasing nodes."""

    grid: np.ndarray = field(repr=False)
    density: np.ndarray = field(repr=False)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        dens = np.asarray(self.density, dtype=float)
        if grid.ndim != 1 or len(grid) < 2 or np.any(np.diff(grid) <= 0):
            raise ValidationError("grid must be strictly increasing, >= 2 nodes")
        if dens.shape != grid.shape:
            raise ValidationError("density shape must match grid")
        if np.any(dens < 0):
            raise ValidationError("density must be nonnegative")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "density", dens)
        cdf = stencils.cumtrapz0(dens, grid)
        object.__setattr__(self, "_cdf", cdf)
        if cdf[-1] <= 0:
            raise ValidationError("measure must have positive total mass")

    @property
    def cdf(self) -> np.ndarray:
        return self._cdf

    @property
    def total_mass(self) -> float:
        return float(self._cdf[-1])


@dataclass(frozen=True)
class Map1D:
    """Transport map sampled at the source grid nodes."""

    grid: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != grid.shape:
            raise ValidationError("map values must match the grid")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", vals)


def _inverse_cdf(cdf: np.ndarray, grid: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Smallest x with CDF(x) >= q for a piecewise-linear nondecreasing CDF."""
    q = np.asarray(q, dtype=float)
    idx = np.searchsorted(cdf, q, side="left")
    idx = np.clip(idx, 0, len(cdf) - 1)
    lo = np.maximum(idx - 1, 0)
    c0, c1 = cdf[lo], cdf[idx]
    x0, x1 = grid[lo], grid[idx]
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(c1 > c0, (q - c0) / np.where(c1 > c0, c1 - c0, 1.0), 1.0)
    out = x0 + np.clip(frac, 0.0, 1.0) * (x1 - x0)
    return np.where(idx == 0, grid[0], out)


def cdf_inverse(m: Measure1D, q):
    """Position of the q-quantile (smallest x with CDF(x) >= q)."""
    scalar = np.isscalar(q)
    qa = np.atleast_1d(np.asarray(q, dtype=float))
    tol = 1e-12 * max(1.0, m.total_mass)
    if np.any(qa < -tol) or np.any(qa > m.total_mass + tol):
        raise ValidationError("quantile outside [0, total mass]")
    qa = np.clip(qa, 0.0, m.total_mass)
    out = _inverse_cdf(m.cdf, m.grid, qa)
    return float(out[0]) if scalar else out


def monotone_map(src: Measure1D, dst: Measure1D) -> Map1D:
    """The nondecreasing transport map CDF_dst^{-1} o CDF_src at source nodes."""
    if abs(src.total_mass - dst.total_mass) > 1e-10 * max(src.total_mass,
                                                          dst.total_mass):
        raise ValidationError("source and target masses differ beyond 1e-10")
    q = np.clip(src.cdf, 0.0, dst.total_mass)
    vals = _inverse_cdf(dst.cdf, dst.grid, q)
    return Map1D(grid=src.grid, values=np.maximum.accumulate(vals))


def pushforward(T: Map1D, src: Measure1D, target_grid: np.ndarray) -> Measure1D:
    """Histogram deposition of source cell masses into target cells.

    Each source cell's trapezoid mass is spread uniformly over the image
    interval of the cell; cell masses are then lumped back to node densities
    in a way that preserves the trapezoid total exactly.
    """
    target_grid = np.asarray(target_grid, dtype=float)
    cell_mass = deposit_cell_masses(T, src, target_grid)
    return cells_to_measure(cell_mass, target_grid)


def deposit_cell_masses(T: Map1D, src: Measure1D,
                        target_grid: np.ndarray) -> np.ndarray:
    """Masses of the pushforward measure per target cell (len(grid)-1 array)."""
    x = src.grid
    rho = src.density
    masses = 0.5 * (rho[1:] + rho[:-1]) * np.diff(x)
    a = np.minimum(T.values[:-1], T.values[1:])
    b = np.maximum(T.values[:-1], T.values[1:])
    out = np.zeros(len(target_grid) - 1)
    edges = target_grid
    for mi, ai, bi in zip(masses, a, b):
        if mi == 0.0:
            continue
        if bi <= ai:
            k = min(max(np.searchsorted(edges, ai, side="right") - 1, 0),
                    len(out) - 1)
            out[k] += mi
            continue
        k0 = max(np.searchsorted(edges, ai, side="right") - 1, 0)
        k1 = min(np.searchsorted(edges, bi, side="left") - 1, len(out) - 1)
        if k1 < k0:
            k1 = k0
        lo = np.maximum(edges[k0:k1 + 1], ai)
        hi = np.minimum(edges[k0 + 1:k1 + 2], bi)
        overlap = np.clip(hi - lo, 0.0, None)
        total = overlap.sum()
        if total > 0:
            out[k0:k1 + 2 - 1] += mi * overlap / total
        else:
            out[k0] += mi
    return out


def cells_to_measure(cell_mass: np.ndarray, grid: np.ndarray) -> Measure1D:
    """Node-density lumping of cell masses; preserves the trapezoid total."""
    widths = np.diff(grid)
    dens = np.zeros(len(grid))
    dens[0] = cell_mass[0] / widths[0]
    dens[-1] = cell_mass[-1] / widths[-1]
    if len(grid) > 2:
        dens[1:-1] = (cell_mass[:-1] + cell_mass[1:]) / (widths[:-1] + widths[1:])
    return Measure1D(grid=grid, density=dens)


def w1_cdf_distance(m1: Measure1D, m2: Measure1D) -> float:
    """1D Wasserstein-1 distance as the L^1 distance between CDFs."""
    nodes = np.union1d(m1.grid, m2.grid)
    c1 = np.interp(nodes, m1.grid, m1.cdf, left=0.0, right=m1.total_mass)
    c2 = np.interp(nodes, m2.grid, m2.cdf, left=0.0, right=m2.total_mass)
    return float(stencils.trapz(np.abs(c1 - c2), nodes))


def sobolev_cost_1d(T: Map1D) -> float:
    """Forward-difference Sobolev cost sum((dT/dx)^2 dx)."""
    if len(T.grid) < 2:
        raise ValidationError("need at least 2 nodes")
    return float(np.sum(np.diff(T.values) ** 2 / np.diff(T.grid)))


def triangle_map(x: np.ndarray) -> np.ndarray:
    """The tent map U(x) = 2x on [0,1/2], 2-2x on [1/2,1]."""
    x = np.asarray(x, dtype=float)
    return np.where(x <= 0.5, 2.0 * x, 2.0 - 2.0 * x)


def mu_alpha(alpha: float, n: int) -> Measure1D:
    """Density alpha on [0,1/4] u [3/4,1], 1 on (1/4,3/4), nodes at quarters."""
    m = max(int(np.ceil((n - 1) / 4)), 250)
    grid = np.linspace(0.0, 1.0, 4 * m + 1)
    dens = np.where((grid <= 0.25) | (grid >= 0.75), float(alpha), 1.0)
    return Measure1D(grid=grid, density=dens)


def triangle_counterexample(alpha: float, n: int) -> tuple[float, float, float]:
    """Sobolev costs of the tent map U vs the monotone map for mu_alpha.

    Returns (cost_U, cost_T_alpha, margin). For large alpha the monotone map
    is strictly more expensive in the Sobolev sense even though both maps
    have the same Monge cost.
    """
    if alpha <= 0:
        raise ValidationError("alpha must be positive")
    if n < 1000:
        raise ValidationError("n must be at least 1000")
    mu = mu_alpha(alpha, n)
    U = Map1D(grid=mu.grid, values=triangle_map(mu.grid))
    cost_U = sobolev_cost_1d(U)
    nu = pushforward(U, mu, mu.grid)
    # deposition conserves total mass exactly; lumping keeps the trapezoid
    # total, so the mass precondition of monotone_map holds to rounding
    T = monotone_map(mu, nu)
    cost_T = sobolev_cost_1d(T)
    return cost_U, cost_T, cost_T - cost_U

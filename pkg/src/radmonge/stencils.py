"""Shared quadrature and finite-difference stencils.

Every energy expression in the package is assembled from the same three
ingredients so that algebraic identities between functionals hold at machine
precision rather than up to discretization error:

* trapezoid node weights for mass terms,
* forward differences living on edges for stiffness terms,
* the edge rule ``dt/2 * [(Dphi - psi_j)^2 + (Dphi - psi_{j+1})^2]`` for
  mixed node/edge products, which collapses exactly to trapezoid mass +
  forward-difference stiffness when one argument vanishes.

Angular grids are always uniform; radial grids may be non-uniform, so radial
helpers take explicit node arrays.
"""

from __future__ import annotations

import numpy as np


def trap_weights(nodes: np.ndarray) -> np.ndarray:
    """Trapezoid quadrature weights for an increasing 1D node array.

    ``sum(w * vals)`` equals the composite trapezoid rule for ``vals``.
    """
    nodes = np.asarray(nodes, dtype=float)
    w = np.zeros_like(nodes)
    d = np.diff(nodes)
    w[:-1] += d / 2.0
    w[1:] += d / 2.0
    return w


def trapz(vals: np.ndarray, nodes: np.ndarray, axis: int = -1) -> np.ndarray:
    """Composite trapezoid integral of samples along ``axis``."""
    return np.trapezoid(vals, np.asarray(nodes, dtype=float), axis=axis)


def cumtrapz0(vals: np.ndarray, nodes: np.ndarray, axis: int = 0) -> np.ndarray:
    """Cumulative trapezoid integral starting at 0 (same shape as input)."""
    vals = np.asarray(vals, dtype=float)
    nodes = np.asarray(nodes, dtype=float)
    shape = [1] * vals.ndim
    shape[axis] = len(nodes) - 1
    d = np.diff(nodes).reshape(shape)
    mid = 0.5 * d * (np.take(vals, range(1, len(nodes)), axis=axis)
                     + np.take(vals, range(0, len(nodes) - 1), axis=axis))
    out = np.concatenate(
        [np.zeros_like(np.take(vals, [0], axis=axis)), np.cumsum(mid, axis=axis)],
        axis=axis,
    )
    return out


def h1_inner(a: np.ndarray, b: np.ndarray, dtheta: float) -> float:
    """Discrete H^1 inner product on a uniform grid of spacing ``dtheta``.

    Trapezoid mass + forward-difference stiffness; the bilinear form shared
    by the obstacle functional, the projection gap, and the H functional.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    mass = dtheta * (np.dot(a, b) - 0.5 * (a[0] * b[0] + a[-1] * b[-1]))
    stiff = np.dot(np.diff(a), np.diff(b)) / dtheta
    return float(mass + stiff)


def h1_norm_sq(a: np.ndarray, dtheta: float) -> float:
    return h1_inner(a, a, dtheta)


def l2_norm_sq(a: np.ndarray, dtheta: float) -> float:
    """Trapezoid L^2 norm squared on a uniform grid."""
    a = np.asarray(a, dtype=float)
    return float(dtheta * (np.dot(a, a) - 0.5 * (a[0] ** 2 + a[-1] ** 2)))


def h_pair(phi: np.ndarray, psi: np.ndarray, dtheta: float) -> np.ndarray:
    """Discrete ``||phi' - psi||^2 + ||phi + psi'||^2`` along the last axis.

    Derivatives are forward differences on edges; node values enter through
    both edge endpoints with averaged squares, so ``h_pair(phi, 0)`` equals
    ``h1_norm_sq(phi)`` exactly. Accepts stacked curves (leading axes kept).
    """
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    dphi = (phi[..., 1:] - phi[..., :-1]) / dtheta
    dpsi = (psi[..., 1:] - psi[..., :-1]) / dtheta
    t1 = (dphi - psi[..., :-1]) ** 2 + (dphi - psi[..., 1:]) ** 2
    t2 = (phi[..., :-1] + dpsi) ** 2 + (phi[..., 1:] + dpsi) ** 2
    return 0.5 * dtheta * np.sum(t1 + t2, axis=-1)

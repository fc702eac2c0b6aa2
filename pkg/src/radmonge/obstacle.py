"""Lower-obstacle problem for curves on [0, pi/2].

Minimizes the discrete H^1 norm squared over curves phi >= R1 with natural
boundary conditions. The minimizer Phi and its energy K feed every energy
bound downstream; the projection inequality G(phi) >= ||phi - Phi||_H1^2
holds for feasible curves and is exposed as a checkable gap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domain import AngularGrid, ValidationError
from . import stencils


@dataclass(frozen=True)
class Curve:
    """Samples of a function of theta with discrete H^1 structure."""

    theta: AngularGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.theta.n_theta,):
            raise ValidationError("curve values must match the angular grid")
        if not np.all(np.isfinite(vals)):
            raise ValidationError("curve values must be finite")
        object.__setattr__(self, "values", vals)

    def h1_norm_sq(self) -> float:
        return stencils.h1_norm_sq(self.values, self.theta.dtheta)


def h1_inner(a: Curve, b: Curve) -> float:
    """Shared H^1 bilinear form: trapezoid mass + forward-difference stiffness."""
    if a.theta.n_theta != b.theta.n_theta:
        raise ValidationError("curves live on different grids")
    return stencils.h1_inner(a.values, b.values, a.theta.dtheta)


def _h1_matrix(tgrid: AngularGrid) -> sp.csr_matrix:
    """Sparse A with x^T A x = discrete H^1 norm squared."""
    n = tgrid.n_theta
    dth = tgrid.dtheta
    w = np.full(n, dth)
    w[0] = w[-1] = dth / 2.0
    main = w.copy()
    main[0] += 1.0 / dth
    main[-1] += 1.0 / dth
    main[1:-1] += 2.0 / dth
    off = np.full(n - 1, -1.0 / dth)
    return sp.diags([off, main, off], [-1, 0, 1], format="csc")


@dataclass(frozen=True)
class ObstacleResult:
    Phi: Curve
    K: float
    R1: Curve
    multiplier: np.ndarray = field(repr=False)
    active: np.ndarray = field(repr=False)
    kkt_residual: float = 0.0
    iterations: int = 0


def solve_obstacle(R1: Curve, tol: float = 1e-10, max_iter: int = 200,
                   sup_R2: float | None = None) -> ObstacleResult:
    """Minimize ||phi||_H1^2 subject to phi >= R1 (componentwise).

    Primal-dual active-set iteration on the tridiagonal operator; falls back
    to projected gradient if the active set cycles. On the inactive set the
    discrete Euler-Lagrange stencil (-phi'' + phi = 0) holds; the multiplier
    lambda = 2 A phi is nonnegative on the active set.
    """
    n = R1.theta.n_theta
    A = _h1_matrix(R1.theta)
    obst = R1.values
    active = np.ones(n, dtype=bool)
    phi = obst.copy()
    it = 0
    seen = set()
    for it in range(1, max_iter + 1):
        phi = _solve_given_active(A, obst, active)
        lam = 2.0 * (A @ phi)
        lam[~active] = 0.0
        new_active = (lam + (obst - phi)) > 0.0
        key = new_active.tobytes()
        if np.array_equal(new_active, active):
            break
        if key in seen:
            break
        seen.add(key)
        active = new_active
    phi = np.maximum(phi, obst)  # clip rounding-level violations
    lam = 2.0 * (A @ phi)
    residual = _kkt_residual(lam, phi, obst, active)
    if residual > max(tol, 1e-9):
        phi, active = _projected_gradient(A, obst, phi, tol)
        lam = 2.0 * (A @ phi)
        residual = _kkt_residual(lam, phi, obst, active)
        if residual > max(tol * 1e3, 1e-7):
            raise ValidationError(
                f"obstacle solver did not converge (KKT residual {residual:.3e})")
    Phi = Curve(theta=R1.theta, values=phi)
    K = Phi.h1_norm_sq()
    if sup_R2 is not None and phi.max() > sup_R2 + 1e-9:
        raise ValidationError("minimizer exceeds inf R2: upper constraint "
                              "cannot be dropped for this target")
    return ObstacleResult(Phi=Phi, K=K, R1=R1, multiplier=lam, active=active,
                          kkt_residual=residual, iterations=it)


def _solve_given_active(A, obst, active):
    n = len(obst)
    phi = np.empty(n)
    phi[active] = obst[active]
    inactive = ~active
    if inactive.any():
        Aii = A[inactive][:, inactive]
        rhs = -A[inactive][:, active] @ obst[active]
        phi[inactive] = spla.spsolve(Aii.tocsc(), rhs)
    return phi


def _kkt_residual(lam, phi, obst, active):
    feas = float(np.max(obst - phi, initial=0.0))
    dual = float(np.max(-lam[active], initial=0.0)) if active.any() else 0.0
    stat = float(np.max(np.abs(lam[~active]), initial=0.0)) if (~active).any() else 0.0
    comp = float(np.max(np.abs(lam * (phi - obst)), initial=0.0))
    return max(feas, dual, stat, comp)


def _projected_gradient(A, obst, phi, tol, max_iter=200000):
    lip = spla.norm(A, np.inf)
    step = 1.0 / (2.0 * lip)
    x = np.maximum(phi, obst)
    for _ in range(max_iter):
        grad = 2.0 * (A @ x)
        x_new = np.maximum(x - step * grad, obst)
        if np.max(np.abs(x_new - x)) < tol * step:
            x = x_new
            break
        x = x_new
    active = (x - obst) < 1e-10
    return x, active


def G_value(phi: Curve, K: float) -> float:
    """Excess energy G(phi) = ||phi||_H1^2 - K."""
    return phi.h1_norm_sq() - K


def projection_gap(phi: Curve, Phi: Curve, K: float,
                   R1: Curve | None = None) -> float:
    """gap = G(phi) - ||phi - Phi||_H1^2; nonnegative for feasible phi."""
    if R1 is not None and np.any(phi.values < R1.values - 1e-12):
        raise ValidationError("phi is infeasible (below the obstacle)")
    diff = Curve(theta=phi.theta, values=phi.values - Phi.values)
    return G_value(phi, K) - diff.h1_norm_sq()


def cosh_bridge(theta: np.ndarray, t0: float, v0: float, t1: float,
                v1: float) -> np.ndarray:
    """Solution of phi'' = phi matching values at the ends of [t0, t1]."""
    M = np.array([[np.cosh(t0), np.sinh(t0)], [np.cosh(t1), np.sinh(t1)]])
    a, b = np.linalg.solve(M, [v0, v1])
    return a * np.cosh(theta) + b * np.sinh(theta)

"""Bounded-energy recovery family: ray map outside B(0,delta), Lipschitz
measure-matching patch inside, delta = eps^(1/3).

The patch is built on the unit square as common domain. The inner ball
(scaled to the unit quarter disk) is charted by polar normalization about an
interior center (`SourceChart`): this sends the corner r = 0 to an interior
point of the square, so the chart and the resulting patch stay Lipschitz
there. Any chart that preserves the polar angle at the corner (for example
(rho, theta) -> (rho, 2 theta/pi)) is degenerate at r = 0 and would force
the patch Dirichlet energy to inherit the K|log r| blow-up of the ray maps;
the interior-center chart collapses angles near the corner instead. The
target strip {Phi(theta) < r < phi(delta,theta)} is charted affinely by
(lambda, 2 theta/pi). A Moser flow (Neumann Poisson solve for the potential
of the density difference, then RK4 integration of
v_t = w/((1-t) f1 + t f2)) carries the source chart density to the target
chart density; a final boundary correction restores the seam identity that
the gradient flow only preserves up to tangential sliding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domain import DensityPair, PolarTarget, ValidationError
from .obstacle import Curve
from .raymaps import RadialProfile
from .energy import MapField, snap_delta, F_eps_decomposed, w1_from_map
from . import stencils


@dataclass(frozen=True)
class PatchMap:
    """Discrete Moser flow on the unit-square chart."""

    m: int
    potential: np.ndarray = field(repr=False)
    wx: np.ndarray = field(repr=False)
    wy: np.ndarray = field(repr=False)
    f1: np.ndarray = field(repr=False)
    f2: np.ndarray = field(repr=False)
    defect: float = 0.0
    boundary_mismatch: float = 0.0
    lip_chart: float = 0.0
    clamp_fraction: float = 0.0
    cg_iters: int = 0
    n_steps: int = 32

    def transport(self, pts: np.ndarray) -> np.ndarray:
        """Flow chart points (N,2) from t=0 to t=1 by RK4."""
        return _flow(pts, self.wx, self.wy, self.f1, self.f2, self.m,
                     self.n_steps)[0]


def _bilinear(field_vals: np.ndarray, pts: np.ndarray, m: int) -> np.ndarray:
    """Bilinear interpolation of a cell-centered m x m field at (N,2) points."""
    h = 1.0 / m
    u = np.clip(pts[:, 0] / h - 0.5, 0.0, m - 1.0)
    v = np.clip(pts[:, 1] / h - 0.5, 0.0, m - 1.0)
    i0 = np.clip(u.astype(int), 0, m - 2)
    j0 = np.clip(v.astype(int), 0, m - 2)
    fu = u - i0
    fv = v - j0
    f00 = field_vals[i0, j0]
    f10 = field_vals[i0 + 1, j0]
    f01 = field_vals[i0, j0 + 1]
    f11 = field_vals[i0 + 1, j0 + 1]
    return ((1 - fu) * (1 - fv) * f00 + fu * (1 - fv) * f10
            + (1 - fu) * fv * f01 + fu * fv * f11)


def _extend(field: np.ndarray, sx: float, sy: float) -> np.ndarray:
    """Pad a cell-centered field with one ghost layer, mirrored with sign
    sx/sy per axis (sign -1 makes the face value interpolate to zero)."""
    m = field.shape[0]
    ext = np.empty((m + 2, m + 2))
    ext[1:-1, 1:-1] = field
    ext[0, 1:-1] = sx * field[0, :]
    ext[-1, 1:-1] = sx * field[-1, :]
    ext[:, 0] = sy * ext[:, 1]
    ext[:, -1] = sy * ext[:, -2]
    return ext


def _bilinear_ghost(ext: np.ndarray, pts: np.ndarray, m: int) -> np.ndarray:
    """Bilinear interpolation on a ghost-padded (m+2) x (m+2) field."""
    h = 1.0 / m
    u = np.clip(pts[:, 0] / h + 0.5, 0.0, m + 1.0)
    v = np.clip(pts[:, 1] / h + 0.5, 0.0, m + 1.0)
    i0 = np.clip(u.astype(int), 0, m)
    j0 = np.clip(v.astype(int), 0, m)
    fu = u - i0
    fv = v - j0
    return ((1 - fu) * (1 - fv) * ext[i0, j0] + fu * (1 - fv) * ext[i0 + 1, j0]
            + (1 - fu) * fv * ext[i0, j0 + 1] + fu * fv * ext[i0 + 1, j0 + 1])


def _flow(pts, wx, wy, f1, f2, m, n_steps):
    """RK4 integration of dX/dt = w(X)/((1-t) f1(X) + t f2(X)).

    Velocities are interpolated with mirrored ghost layers so the normal
    component vanishes exactly on each face (discrete no-flux): the square
    boundary is invariant up to time-stepping error.
    """
    x = np.array(pts, dtype=float)
    dt = 1.0 / n_steps
    floor = 1e-4 * max(f1.max(), f2.max())
    clamped = np.zeros(len(x), dtype=bool)
    wx_ext = _extend(wx, -1.0, 1.0)
    wy_ext = _extend(wy, 1.0, -1.0)

    def vel(p, t):
        rho = (1.0 - t) * _bilinear(f1, p, m) + t * _bilinear(f2, p, m)
        rho = np.maximum(rho, floor)
        return np.stack([_bilinear_ghost(wx_ext, p, m) / rho,
                         _bilinear_ghost(wy_ext, p, m) / rho], axis=1)

    for k in range(n_steps):
        t = k * dt
        k1 = vel(x, t)
        k2 = vel(x + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = vel(x + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = vel(x + dt * k3, t + dt)
        x = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out = (x < 0.0) | (x > 1.0)
        clamped |= out.any(axis=1)
        x = np.clip(x, 0.0, 1.0)
    return x, clamped


def _neumann_poisson(rhs: np.ndarray, m: int, tol: float = 1e-10):
    """Solve Delta u = rhs on the unit square, homogeneous Neumann, 5-point
    stencil on cell centers, conjugate gradient."""
    h = 1.0 / m
    n = m * m
    idx = np.arange(n).reshape(m, m)
    main = np.zeros(n)
    rows, cols, vals = [], [], []
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        si = slice(max(di, 0), m + min(di, 0))
        sj = slice(max(dj, 0), m + min(dj, 0))
        ti = slice(max(-di, 0), m + min(-di, 0))
        tj = slice(max(-dj, 0), m + min(-dj, 0))
        r = idx[ti, tj].ravel()
        c = idx[si, sj].ravel()
        rows.append(r)
        cols.append(c)
        vals.append(np.full(len(r), 1.0 / h ** 2))
        np.add.at(main, r, -1.0 / h ** 2)
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(main)
    A = sp.csr_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n))
    b = rhs.ravel() - rhs.mean()
    iters = [0]

    def cb(_):
        iters[0] += 1

    u, info = spla.cg(A, b, rtol=0.0, atol=tol * max(1.0, np.abs(b).max()),
                      maxiter=20000, callback=cb)
    if info != 0:
        raise ValidationError(f"Poisson CG did not converge (info={info})")
    return u.reshape(m, m), iters[0]


def _cell_centers(m: int) -> tuple[np.ndarray, np.ndarray]:
    c = (np.arange(m) + 0.5) / m
    return c, c


def _sliced_w1(mass_a: np.ndarray, mass_b: np.ndarray, m: int) -> float:
    """Max over the two axis projections of the 1D W1 between cell-mass
    fields on the unit square."""
    h = 1.0 / m
    out = 0.0
    for axis in (0, 1):
        ca = np.cumsum(mass_a.sum(axis=axis))
        cb = np.cumsum(mass_b.sum(axis=axis))
        out = max(out, float(np.sum(np.abs(ca - cb)) * h))
    return out


def moser_patch(f1: np.ndarray, f2: np.ndarray, n_steps: int = 32,
                tol: float = 1e-10) -> PatchMap:
    """Measure-matching map on the unit square pushing f1 dx to f2 dx.

    f1, f2: positive cell-centered m x m densities with equal total mass.
    """
    f1 = np.asarray(f1, dtype=float)
    f2 = np.asarray(f2, dtype=float)
    if f1.shape != f2.shape or f1.ndim != 2 or f1.shape[0] != f1.shape[1]:
        raise ValidationError("densities must be square arrays of equal shape")
    if np.any(f1 <= 0) or np.any(f2 <= 0):
        raise ValidationError("densities must be strictly positive")
    m = f1.shape[0]
    h = 1.0 / m
    m1, m2 = f1.sum() * h * h, f2.sum() * h * h
    if abs(m1 - m2) > 1e-10 * max(m1, m2):
        raise ValidationError("masses differ beyond 1e-10 relative")
    u, iters = _neumann_poisson(f1 - f2, m, tol=tol)
    wx = np.zeros_like(u)
    wy = np.zeros_like(u)
    # centered differences with mirrored ghosts (zero normal derivative)
    wx[1:-1, :] = (u[2:, :] - u[:-2, :]) / (2 * h)
    wx[0, :] = (u[1, :] - u[0, :]) / (2 * h)
    wx[-1, :] = (u[-1, :] - u[-2, :]) / (2 * h)
    wy[:, 1:-1] = (u[:, 2:] - u[:, :-2]) / (2 * h)
    wy[:, 0] = (u[:, 1] - u[:, 0]) / (2 * h)
    wy[:, -1] = (u[:, -1] - u[:, -2]) / (2 * h)

    cx, cy = _cell_centers(m)
    pts = np.stack(np.meshgrid(cx, cy, indexing="ij"), axis=-1).reshape(-1, 2)
    mapped, clamped = _flow(pts, wx, wy, f1, f2, m, n_steps)
    # deposit source cell masses at mapped points (bilinear binning)
    masses = (f1 * h * h).ravel()
    pushed = np.zeros((m, m))
    uu = np.clip(mapped[:, 0] / h - 0.5, 0.0, m - 1.0)
    vv = np.clip(mapped[:, 1] / h - 0.5, 0.0, m - 1.0)
    i0 = np.clip(uu.astype(int), 0, m - 2)
    j0 = np.clip(vv.astype(int), 0, m - 2)
    fu, fv = uu - i0, vv - j0
    np.add.at(pushed, (i0, j0), masses * (1 - fu) * (1 - fv))
    np.add.at(pushed, (i0 + 1, j0), masses * fu * (1 - fv))
    np.add.at(pushed, (i0, j0 + 1), masses * (1 - fu) * fv)
    np.add.at(pushed, (i0 + 1, j0 + 1), masses * fu * fv)
    defect = _sliced_w1(pushed, f2 * h * h, m)
    # seam: displacement of the a=1 edge cell centers
    edge = np.stack([np.full(m, 1.0 - 0.5 * h), cy], axis=1)
    edge_mapped, _ = _flow(edge, wx, wy, f1, f2, m, n_steps)
    boundary_mismatch = float(np.max(np.linalg.norm(edge_mapped - edge,
                                                    axis=1)))
    grid_map = mapped.reshape(m, m, 2)
    lip = 0.0
    for axis in (0, 1):
        dmap = np.diff(grid_map, axis=axis)
        lip = max(lip, float(np.max(np.linalg.norm(dmap, axis=-1)) / h))
    return PatchMap(m=m, potential=u, wx=wx, wy=wy, f1=f1, f2=f2,
                    defect=defect, boundary_mismatch=boundary_mismatch,
                    lip_chart=lip,
                    clamp_fraction=float(clamped.mean()), cg_iters=iters,
                    n_steps=n_steps)


def rescale_densities(d: DensityPair, p: RadialProfile, Phi: Curve,
                      delta: float,
                      t: PolarTarget) -> tuple[np.ndarray, np.ndarray]:
    """(f_delta on the unit quarter disk, g_delta on the (lambda,theta) chart).

    f_delta(x) = f(delta x), sampled at (rho_i, theta_j) with rho on the
    lambda grid; g_delta(lambda,theta) = (phi(delta,theta) - Phi(theta))
    (1/delta^2) g(r(lambda,theta), theta) with r = Phi + lambda
    (phi_delta - Phi). The target annulus is needed to locate physical radii
    on the chart that stores g.
    """
    i_d = int(np.argmin(np.abs(p.radial - delta)))
    if abs(p.radial[i_d] - delta) > 1e-12 + 1e-9 * delta:
        raise ValidationError("delta must be snapped to the radial grid")
    phid = p.phi[i_d, :]
    gap = phid - Phi.values
    if np.any(gap <= 0):
        raise ValidationError("phi(delta,.) must exceed Phi everywhere")
    lam = d.lam
    f_delta = np.empty((len(lam), d.theta.n_theta))
    g_delta = np.empty_like(f_delta)
    for j in range(d.theta.n_theta):
        f_delta[:, j] = np.interp(delta * lam, d.radial.nodes, d.f[:, j])
        strip_r = Phi.values[j] + lam * gap[j]
        lam_full = (strip_r - t.R1[j]) / (t.R2[j] - t.R1[j])
        g_delta[:, j] = gap[j] / delta ** 2 * np.interp(lam_full, lam,
                                                        d.g[:, j])
    return f_delta, g_delta


@dataclass(frozen=True)
class RecoveryResult:
    field: MapField
    eps: float
    delta: float
    patch: PatchMap
    lip_S: float
    patch_defect: float
    seam_mismatch: float
    raw_edge_slide: float = 0.0
    terms: "object" = None


class SourceChart:
    """Bi-Lipschitz chart of the closed unit quarter disk onto the unit square.

    Polar normalization about an interior center c1: a point at normalized
    boundary distance s in direction omega goes to the point at the same
    normalized distance from the square center in direction m(omega), where
    m is a monotone circle map chosen so that the seam arc rho = 1 lands on
    the square edge {x = 1} with matching angular parameter
    (theta -> y = 2 theta/pi) and the corner rho = 0 lands at the midpoint
    of the opposite edge. Because c1 is interior, the chart (and its
    inverse) is Lipschitz up to and including the corner.
    """

    def __init__(self, center: tuple[float, float] = (0.35, 0.35),
                 n_seam: int = 1024):
        self.c1 = np.array(center, dtype=float)
        self.c2 = np.array([0.5, 0.5])
        th = np.linspace(0.0, math.pi / 2.0, n_seam + 1)
        seam = np.stack([np.cos(th), np.sin(th)], axis=1) - self.c1
        om_seam = np.arctan2(seam[:, 1], seam[:, 0])
        et_seam = np.arctan2(2.0 * th / math.pi - 0.5, 0.5)
        om0 = math.atan2(-self.c1[1], -self.c1[0]) + 2.0 * math.pi
        # branches: seam arc -> right edge, then the two straight edges of
        # the quarter disk (through the corner direction om0, which is sent
        # to the left-edge midpoint, angle pi) cover the rest of the square
        # boundary linearly in angle
        self.om_tab = np.concatenate(
            [om_seam, [om0, om_seam[0] + 2.0 * math.pi]])
        self.et_tab = np.concatenate(
            [et_seam, [math.pi, et_seam[0] + 2.0 * math.pi]])
        if np.any(np.diff(self.om_tab) <= 0) or np.any(
                np.diff(self.et_tab) <= 0):
            raise ValidationError("chart angle tables must be monotone")

    def _gamma_src(self, om: np.ndarray) -> np.ndarray:
        """Distance from c1 to the quarter-disk boundary in direction om."""
        ux, uy = np.cos(om), np.sin(om)
        cu = self.c1[0] * ux + self.c1[1] * uy
        t_arc = -cu + np.sqrt(cu ** 2 + 1.0 - self.c1 @ self.c1)
        with np.errstate(divide="ignore"):
            tx = np.where(ux < 0, -self.c1[0] / np.where(ux < 0, ux, -1.0),
                          np.inf)
            ty = np.where(uy < 0, -self.c1[1] / np.where(uy < 0, uy, -1.0),
                          np.inf)
        return np.minimum(t_arc, np.minimum(tx, ty))

    def _gamma_sq(self, et: np.ndarray) -> np.ndarray:
        """Distance from the square center to its boundary in direction et."""
        return 0.5 / np.maximum(np.abs(np.cos(et)), np.abs(np.sin(et)))

    def _wrap(self, a: np.ndarray, tab: np.ndarray) -> np.ndarray:
        return np.mod(a - tab[0], 2.0 * math.pi) + tab[0]

    def forward(self, pts: np.ndarray) -> np.ndarray:
        """Quarter-disk points (..., 2) to square points (..., 2)."""
        v = np.asarray(pts, dtype=float) - self.c1
        om = np.arctan2(v[..., 1], v[..., 0])
        s = np.linalg.norm(v, axis=-1) / self._gamma_src(om)
        et = np.interp(self._wrap(om, self.om_tab), self.om_tab, self.et_tab)
        w = (np.minimum(s, 1.0) * self._gamma_sq(et))[..., None]
        return self.c2 + w * np.stack([np.cos(et), np.sin(et)], axis=-1)

    def inverse(self, zs: np.ndarray) -> np.ndarray:
        """Square points (..., 2) back to quarter-disk points (..., 2)."""
        w = np.asarray(zs, dtype=float) - self.c2
        et = np.arctan2(w[..., 1], w[..., 0])
        s = np.linalg.norm(w, axis=-1) / self._gamma_sq(et)
        om = np.interp(self._wrap(et, self.et_tab), self.et_tab, self.om_tab)
        r = (np.minimum(s, 1.0) * self._gamma_src(om))[..., None]
        return self.c1 + r * np.stack([np.cos(om), np.sin(om)], axis=-1)


def _interp2(table: np.ndarray, xn: np.ndarray, tn: np.ndarray,
             x: np.ndarray, th: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of a (x, theta) table at scattered points,
    with constant extrapolation outside the node range."""
    x = np.asarray(x, dtype=float)
    th = np.asarray(th, dtype=float)
    i = np.clip(np.searchsorted(xn, x) - 1, 0, len(xn) - 2)
    j = np.clip(np.searchsorted(tn, th) - 1, 0, len(tn) - 2)
    wx = np.clip((x - xn[i]) / (xn[i + 1] - xn[i]), 0.0, 1.0)
    wt = np.clip((th - tn[j]) / (tn[j + 1] - tn[j]), 0.0, 1.0)
    return ((1 - wx) * (1 - wt) * table[i, j]
            + wx * (1 - wt) * table[i + 1, j]
            + (1 - wx) * wt * table[i, j + 1]
            + wx * wt * table[i + 1, j + 1])


def evaluate_field(field: MapField, points: np.ndarray) -> np.ndarray:
    """Cartesian image T(x) of scattered source points under a map field.

    Interpolates the polar-frame components (phi, psi) bilinearly on the
    (radial, angular) grid and rotates them into Cartesian coordinates.
    """
    pts = np.asarray(points, dtype=float)
    r = np.linalg.norm(pts, axis=1)
    th = np.arctan2(pts[:, 1], pts[:, 0])
    phi = _interp2(field.phi, field.radial, field.theta, r, th)
    psi = _interp2(field.psi, field.radial, field.theta, r, th)
    cos, sin = np.cos(th), np.sin(th)
    return np.stack([phi * cos - psi * sin, phi * sin + psi * cos], axis=1)


def _square_densities(d: DensityPair, t: PolarTarget, p: RadialProfile,
                      Phi: Curve, delta: float, m: int, chart: SourceChart):
    """Cell-centered densities on the unit square for the Moser patch.

    Source: pushforward of f(delta x) dx on the unit quarter disk through
    the chart (Jacobian estimated by central differences of the inverse
    chart). Target: the image measure of the inner ball under the
    three-piece ray map, supported on the strip {Phi < r < phi(delta,.)}
    with density proportional to g(r) r per unit (lambda, theta), carried
    through the affine strip chart. Totals are matched exactly by scaling
    the target; the relative correction is returned as a mass defect.
    """
    i_d = int(np.argmin(np.abs(p.radial - delta)))
    phid = p.phi[i_d, :]
    gap = phid - Phi.values
    if np.any(gap <= 0):
        raise ValidationError("phi(delta,.) must exceed Phi everywhere")
    c = (np.arange(m) + 0.5) / m
    Z = np.stack(np.meshgrid(c, c, indexing="ij"), axis=-1)  # (m, m, 2)
    h = 0.5 / m
    ex = np.array([h, 0.0])
    ey = np.array([0.0, h])
    Xp, Xm = chart.inverse(Z + ex), chart.inverse(Z - ex)
    Yp, Ym = chart.inverse(Z + ey), chart.inverse(Z - ey)
    J11 = (Xp[..., 0] - Xm[..., 0]) / (2 * h)
    J21 = (Xp[..., 1] - Xm[..., 1]) / (2 * h)
    J12 = (Yp[..., 0] - Ym[..., 0]) / (2 * h)
    J22 = (Yp[..., 1] - Ym[..., 1]) / (2 * h)
    det = np.abs(J11 * J22 - J12 * J21)
    X0 = chart.inverse(Z)
    rho = np.linalg.norm(X0, axis=-1)
    th_src = np.clip(np.arctan2(X0[..., 1], X0[..., 0]), 0.0, math.pi / 2.0)
    fval = _interp2(d.f, d.radial.nodes, d.theta.nodes, delta * rho, th_src)
    p_sq = fval * det
    lam = Z[..., 0]
    th_t = Z[..., 1] * (math.pi / 2.0)
    Phi_t = np.interp(th_t, Phi.theta.nodes, Phi.values)
    gap_t = np.interp(th_t, p.theta, gap)
    R = Phi_t + lam * gap_t
    R1_t = np.interp(th_t, t.theta.nodes, t.R1)
    R2_t = np.interp(th_t, t.theta.nodes, t.R2)
    lam_full = (R - R1_t) / (R2_t - R1_t)
    gval = _interp2(d.g, d.lam, d.theta.nodes, lam_full, th_t)
    q_sq = gval * R * gap_t * (math.pi / 2.0)
    scale = p_sq.sum() / q_sq.sum()
    return p_sq, q_sq * scale


def _interp_theta(table: np.ndarray, x_nodes: np.ndarray,
                  th_nodes: np.ndarray, x: np.ndarray, tj: float) -> np.ndarray:
    """Bilinear interpolation of a (x, theta) table at (x, theta=tj)."""
    j = np.searchsorted(th_nodes, tj) - 1
    j = min(max(j, 0), len(th_nodes) - 2)
    w = (tj - th_nodes[j]) / (th_nodes[j + 1] - th_nodes[j])
    col = (1 - w) * table[:, j] + w * table[:, j + 1]
    return np.interp(x, x_nodes, col)


def _seam_correction(patch: PatchMap, n: int = 513):
    """Post-flow correction undoing the tangential slide along the seam edge.

    The gradient flow keeps the square boundary invariant but lets points
    slide along it; the glued map needs the seam edge {x = 1} fixed
    pointwise. Flowing a dense sample of the edge gives the slide map
    y -> Y(y); the correction shifts the y-coordinate back by the inverse
    slide, ramped to zero away from the edge so the interior is untouched.
    """
    ys = np.linspace(0.0, 1.0, n)
    edge = np.stack([np.ones(n), ys], axis=1)
    slid, _ = _flow(edge, patch.wx, patch.wy, patch.f1, patch.f2, patch.m,
                    patch.n_steps)
    Y = np.maximum.accumulate(slid[:, 1])
    x0 = 0.7

    def correct(pts: np.ndarray) -> np.ndarray:
        out = np.array(pts, dtype=float)
        ramp = np.clip((out[:, 0] - x0) / (1.0 - x0), 0.0, 1.0)
        y_fixed = np.interp(out[:, 1], Y, ys)
        out[:, 1] = out[:, 1] + ramp * (y_fixed - out[:, 1])
        return out

    slide = float(np.max(np.abs(Y - ys)))
    return correct, slide


def assemble_recovery(p: RadialProfile, d: DensityPair, t: PolarTarget,
                      Phi: Curve, eps: float, patch_m: int = 128,
                      n_steps: int = 32) -> RecoveryResult:
    """Recovery field: profile p outside B(0,delta), Moser patch inside."""
    i_d, delta = snap_delta(p.radial, eps)
    if i_d < 4:
        raise ValidationError("delta must cover at least 4 radial cells")
    chart = SourceChart()
    p_sq, q_sq = _square_densities(d, t, p, Phi, delta, patch_m, chart)
    patch = moser_patch(p_sq, q_sq, n_steps=n_steps)
    correct, raw_slide = _seam_correction(patch)

    gap = p.phi[i_d, :] - Phi.values

    def to_strip(z: np.ndarray):
        """Square chart points to (radius, angle) on the target strip."""
        lam = np.clip(z[:, 0], 0.0, 1.0)
        th_m = np.clip(z[:, 1], 0.0, 1.0) * (math.pi / 2.0)
        Phi_m = np.interp(th_m, Phi.theta.nodes, Phi.values)
        gap_m = np.interp(th_m, p.theta, gap)
        return Phi_m + lam * gap_m, th_m

    r = p.radial
    th = p.theta
    phi_out = p.phi.copy()
    psi_out = np.zeros_like(phi_out)
    inner = np.arange(i_d)  # nodes strictly inside the seam
    if len(inner):
        rr, tt = np.meshgrid(r[inner], th, indexing="ij")
        xy = (rr / delta)[..., None] * np.stack(
            [np.cos(tt), np.sin(tt)], axis=-1)
        pts = chart.forward(xy).reshape(-1, 2)
        mapped = correct(patch.transport(pts))
        rad_m, th_m = to_strip(mapped)
        beta = th_m - tt.ravel()
        phi_out[inner, :] = (rad_m * np.cos(beta)).reshape(len(inner), len(th))
        psi_out[inner, :] = (rad_m * np.sin(beta)).reshape(len(inner), len(th))
    mf = MapField(radial=r, theta=th, phi=phi_out, psi=psi_out)
    lip_S = _lipschitz_estimate(mf, i_d)

    # pushforward defect after the seam correction: re-deposit the flowed
    # cell masses and compare against the target chart density
    m = patch.m
    h = 1.0 / m
    cx = (np.arange(m) + 0.5) / m
    cells = np.stack(np.meshgrid(cx, cx, indexing="ij"), axis=-1).reshape(-1, 2)
    mapped_cells = correct(patch.transport(cells))
    masses = (p_sq * h * h).ravel()
    pushed = _deposit(mapped_cells, masses, m)
    defect = _sliced_w1(pushed, q_sq * h * h, m)

    # residual seam mismatch in physical target units
    n_seam = 257
    th_seam = np.linspace(0.0, math.pi / 2.0, n_seam)
    seam_xy = np.stack([np.cos(th_seam), np.sin(th_seam)], axis=1)
    seam_img = correct(patch.transport(chart.forward(seam_xy)))
    rad_s, th_s = to_strip(seam_img)
    rad_ref = np.interp(th_seam, p.theta, p.phi[i_d, :])
    y_ref = rad_ref * np.exp(1j * th_seam)
    y_got = rad_s * np.exp(1j * th_s)
    seam = float(np.max(np.abs(y_got - y_ref)))
    return RecoveryResult(field=mf, eps=eps, delta=delta, patch=patch,
                          lip_S=lip_S, patch_defect=defect,
                          seam_mismatch=seam, raw_edge_slide=raw_slide)


def _deposit(points: np.ndarray, masses: np.ndarray, m: int) -> np.ndarray:
    """Bilinear binning of point masses onto the m x m cell-center grid."""
    h = 1.0 / m
    uu = np.clip(points[:, 0] / h - 0.5, 0.0, m - 1.0)
    vv = np.clip(points[:, 1] / h - 0.5, 0.0, m - 1.0)
    i0 = np.clip(uu.astype(int), 0, m - 2)
    j0 = np.clip(vv.astype(int), 0, m - 2)
    fu, fv = uu - i0, vv - j0
    out = np.zeros((m, m))
    np.add.at(out, (i0, j0), masses * (1 - fu) * (1 - fv))
    np.add.at(out, (i0 + 1, j0), masses * fu * (1 - fv))
    np.add.at(out, (i0, j0 + 1), masses * (1 - fu) * fv)
    np.add.at(out, (i0 + 1, j0 + 1), masses * fu * fv)
    return out


def _lipschitz_estimate(m: MapField, i_d: int) -> float:
    """Max difference quotient of the Cartesian map over the patch region."""
    r = m.radial[: i_d + 1]
    th = m.theta
    cos, sin = np.cos(th)[None, :], np.sin(th)[None, :]
    T1 = m.phi[: i_d + 1] * cos - m.psi[: i_d + 1] * sin
    T2 = m.phi[: i_d + 1] * sin + m.psi[: i_d + 1] * cos
    X1 = r[:, None] * cos
    X2 = r[:, None] * sin
    lip = 0.0
    for axis in (0, 1):
        dT = np.sqrt(np.diff(T1, axis=axis) ** 2 + np.diff(T2, axis=axis) ** 2)
        dX = np.sqrt(np.diff(X1, axis=axis) ** 2 + np.diff(X2, axis=axis) ** 2)
        lip = max(lip, float(np.max(dT / np.maximum(dX, 1e-300))))
    return lip


def recovery_sweep(p: RadialProfile, d: DensityPair, t: PolarTarget,
                   Phi: Curve, K: float, eps_list, patch_m: int = 128,
                   n_steps: int = 32) -> list[dict]:
    """Recovery family diagnostics per eps: J, F with its four terms,
    Lip(S) * delta, and the patch defects."""
    from .energy import J_eps
    rows = []
    for eps in eps_list:
        res = assemble_recovery(p, d, t, Phi, eps, patch_m=patch_m,
                                n_steps=n_steps)
        terms = F_eps_decomposed(res.field, d, eps, K)
        rows.append({
            "eps": eps,
            "delta": res.delta,
            "J": J_eps(res.field, d, eps),
            "F": terms.total,
            "term1": terms.term1,
            "term2": terms.term2,
            "term3": terms.term3,
            "term4": terms.term4,
            "lip_S_delta": res.lip_S * res.delta,
            "patch_defect": res.patch_defect,
            "seam_mismatch": res.seam_mismatch,
        })
    return rows

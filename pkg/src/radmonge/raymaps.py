"""Ray-preserving optimal Monge maps T(x) = phi(r,theta) x/|x|.

Two canonical constructions per angle: the monotone map (nondecreasing along
each ray) and the three-piece map whose radial profile starts at the obstacle
minimizer, phi(0,.) = Phi: piece 1 increasing on (0,rho1) onto half the
target strip (Phi,R2), piece 2 decreasing on (rho1,rho2) onto the other half,
piece 3 decreasing on (rho2,1) onto (R1,Phi) when Phi > R1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .domain import DensityPair, PolarTarget, ValidationError, check_compatibility
from .obstacle import Curve
from . import stencils
from . import transport1d as t1d


@dataclass(frozen=True)
class RadialProfile:
    """phi(r_i, theta_j) samples plus construction metadata."""

    radial: "np.ndarray" = field(repr=False)   # radial grid nodes
    theta: "np.ndarray" = field(repr=False)    # angular grid nodes
    phi: np.ndarray = field(repr=False)        # (n_r, n_theta)
    kind: str = "monotone"
    rho1: np.ndarray | None = field(default=None, repr=False)
    rho2: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        if phi.shape != (len(self.radial), len(self.theta)):
            raise ValidationError("profile shape must match grids")
        object.__setattr__(self, "phi", phi)


def _per_theta_measures(d: DensityPair, t: PolarTarget):
    """Source CDFs on (0,1) (radial chart, origin node added) and target CDFs
    on the physical radius per theta. Returns arrays indexed (node, theta)."""
    r = d.radial.nodes
    r_ext = np.concatenate([[0.0], r])
    mu_integrand = np.concatenate(
        [np.zeros((1, d.theta.n_theta)), r[:, None] * d.f])
    F = stencils.cumtrapz0(mu_integrand, r_ext, axis=0)  # (n_r+1, n_theta)
    rad = t.radius(d.lam)                                # (n_lam, n_theta)
    nu_integrand = d.g * rad * (t.R2 - t.R1)[None, :]
    G = stencils.cumtrapz0(nu_integrand, d.lam, axis=0)  # CDF along lambda
    return r_ext, F, rad, G


def monotone_ray_map(d: DensityPair, t: PolarTarget,
                     defect_tol: float = 1e-8) -> RadialProfile:
    """Per-theta monotone transport of r f dr onto r g dr."""
    _, maxdef = check_compatibility(d, t)
    if maxdef > defect_tol:
        raise ValidationError(f"compatibility defect {maxdef:.3e} too large")
    r_ext, F, rad, G = _per_theta_measures(d, t)
    n_theta = d.theta.n_theta
    phi = np.empty((d.radial.n_r, n_theta))
    for j in range(n_theta):
        # rescale the target CDF by the per-theta mass ratio (defect <= tol)
        scale = F[-1, j] / G[-1, j]
        q = np.clip(F[1:, j], 0.0, G[-1, j] * scale)
        phi[:, j] = np.maximum.accumulate(
            t1d._inverse_cdf(G[:, j] * scale, rad[:, j], q))
    return RadialProfile(radial=d.radial.nodes, theta=d.theta.nodes, phi=phi,
                         kind="monotone")


def original_map(d: DensityPair, t: PolarTarget, Phi: Curve,
                 defect_tol: float = 1e-8) -> RadialProfile:
    """Three-piece radial profile with phi(0,.) = Phi."""
    _, maxdef = check_compatibility(d, t)
    if maxdef > defect_tol:
        raise ValidationError(f"compatibility defect {maxdef:.3e} too large")
    if Phi.values.shape != (d.theta.n_theta,):
        raise ValidationError("Phi must live on the density angular grid")
    r_ext, F, rad, G = _per_theta_measures(d, t)
    n_theta = d.theta.n_theta
    phi = np.empty((d.radial.n_r, n_theta))
    rho1 = np.empty(n_theta)
    rho2 = np.empty(n_theta)
    for j in range(n_theta):
        scale = F[-1, j] / G[-1, j]
        Gj = G[:, j] * scale
        radj = rad[:, j]
        GPhi = float(np.interp(Phi.values[j], radj, Gj))
        GR2 = float(Gj[-1])
        half = 0.5 * (GR2 - GPhi)
        if half <= 0:
            raise ValidationError("Phi at or above R2: degenerate strip")
        rho1[j] = t1d._inverse_cdf(F[:, j], r_ext, np.array([half]))[0]
        skip3 = Phi.values[j] <= t.R1[j] + 1e-10
        rho2[j] = 1.0 if skip3 else t1d._inverse_cdf(
            F[:, j], r_ext, np.array([2.0 * half]))[0]
        Fj = F[1:, j]
        q = np.where(
            r_ext[1:] <= rho1[j],
            GPhi + 2.0 * Fj,
            np.where(r_ext[1:] <= rho2[j],
                     GR2 - 2.0 * (Fj - half),
                     GPhi - (Fj - 2.0 * half)))
        q = np.clip(q, 0.0, GR2)
        phi[:, j] = t1d._inverse_cdf(Gj, radj, q)
    return RadialProfile(radial=d.radial.nodes, theta=d.theta.nodes, phi=phi,
                         kind="original", rho1=rho1, rho2=rho2)


def growth_constants(p: RadialProfile, Phi: Curve,
                     r_max: float) -> tuple[float, float]:
    """min and max of (phi - Phi)/r^2 over the window (r_min, r_max]."""
    mask = p.radial <= r_max
    if not mask.any():
        raise ValidationError("empty radial window: r_max below r_min")
    ratio = (p.phi[mask] - Phi.values[None, :]) / (p.radial[mask, None] ** 2)
    return float(ratio.min()), float(ratio.max())


def theta_regularity_check(p: RadialProfile, Phi: Curve) -> float:
    """sup over r of the angular difference quotient of phi - Phi, over r^2."""
    dth = p.theta[1] - p.theta[0]
    diff = p.phi - Phi.values[None, :]
    quot = np.max(np.abs(np.diff(diff, axis=1)), axis=1) / dth
    return float(np.max(quot / p.radial ** 2))


def per_theta_pushforward_defect(p: RadialProfile, d: DensityPair,
                                 t: PolarTarget) -> np.ndarray:
    """W1 distance between phi(.,theta)_# mu_theta and nu_theta, per theta.

    Splits the profile into its monotone pieces (with the rho breakpoints
    inserted as extra nodes for the original map) and deposits each piece.
    """
    r_ext, F, rad, G = _per_theta_measures(d, t)
    n_theta = d.theta.n_theta
    out = np.empty(n_theta)
    for j in range(n_theta):
        scale = F[-1, j] / G[-1, j]
        # grid is the physical radius, so the density per unit r is g * r
        nu = t1d.Measure1D(grid=rad[:, j], density=d.g[:, j] * rad[:, j] * scale)
        mu = t1d.Measure1D(grid=r_ext, density=np.concatenate(
            [[0.0], d.radial.nodes * d.f[:, j]]))
        rnodes = np.concatenate([[0.0], d.radial.nodes])
        phij = np.concatenate([[p.phi[0, j] if p.kind == "monotone"
                                else _phi0(p, j)], p.phi[:, j]])
        if p.kind == "original" and p.rho1 is not None:
            extra = np.array([p.rho1[j], p.rho2[j]])
            extra = extra[(extra > 0) & (extra < 1)]
            add = np.setdiff1d(extra, rnodes)
            if len(add):
                phadd = np.interp(add, rnodes, phij)
                order = np.argsort(np.concatenate([rnodes, add]))
                rnodes = np.concatenate([rnodes, add])[order]
                phij = np.concatenate([phij, phadd])[order]
            mu = t1d.Measure1D(grid=rnodes,
                               density=rnodes * np.interp(
                                   rnodes, r_ext, np.concatenate(
                                       [[d.f[0, j]], d.f[:, j]])))
        T = t1d.Map1D(grid=rnodes, values=phij)
        cells = t1d.deposit_cell_masses(T, mu, rad[:, j])
        pushed = t1d.cells_to_measure(cells, rad[:, j])
        out[j] = t1d.w1_cdf_distance(pushed, nu)
    return out


def _phi0(p: RadialProfile, j: int) -> float:
    # extrapolate the profile to r=0 quadratically (phi - Phi ~ C r^2)
    r0, r1 = p.radial[0], p.radial[1]
    v0, v1 = p.phi[0, j], p.phi[1, j]
    c = (v1 - v0) / (r1 ** 2 - r0 ** 2)
    return float(v0 - c * r0 ** 2)

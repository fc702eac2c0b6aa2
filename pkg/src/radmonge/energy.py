"""Transport and Dirichlet functionals in the polar frame.

A general map is stored through its polar-frame components,
``T(x) = phi x/|x| + psi (x/|x|)^perp``, for which

    |DT|^2 = (d_r phi)^2 + (d_r psi)^2
           + ((d_theta phi - psi)/r)^2 + ((phi + d_theta psi)/r)^2.

All functionals here share the stencils of :mod:`radmonge.stencils`, so the
splitting of the penalized excess

    F_eps = term1 + term2 + term3 + term4

is an exact algebraic identity at the discrete level, not an approximation:
the radial integrals split bit-for-bit at the snapped cutoff delta, and the
|log delta| bookkeeping uses the discrete quadrature of 1/r on the same
nodes as term3 (the "discrete log" convention, see ``log_delta_discrete``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .domain import DensityPair, PolarTarget, ValidationError, check_compatibility
from .obstacle import Curve
from .raymaps import RadialProfile
from . import stencils


@dataclass(frozen=True)
class MapField:
    """Polar-frame components phi, psi on a (radial x angular) grid."""

    radial: np.ndarray = field(repr=False)
    theta: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    psi: np.ndarray = field(repr=False)

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        psi = np.asarray(self.psi, dtype=float)
        shape = (len(self.radial), len(self.theta))
        if phi.shape != shape or psi.shape != shape:
            raise ValidationError("field components must match the grids")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "psi", psi)

    @classmethod
    def from_profile(cls, p: RadialProfile) -> "MapField":
        return cls(radial=p.radial, theta=p.theta, phi=p.phi,
                   psi=np.zeros_like(p.phi))

    @property
    def dtheta(self) -> float:
        return float(self.theta[1] - self.theta[0])


@dataclass(frozen=True)
class BoundConstants:
    """Explicit constants of the lower-bound inequalities; depend only on
    the target annulus and K."""

    A: float
    B1: float
    B2: float
    B3: float
    B4: float
    B5: float
    B: float


def _grid_quad(vals: np.ndarray, r: np.ndarray, th: np.ndarray) -> float:
    inner = stencils.trapz(vals * r[:, None], r, axis=0)
    return float(stencils.trapz(inner, th))


def monge_cost(m: MapField, d: DensityPair) -> float:
    """Quadrature of |T(x) - x| f over Omega; |T-x|^2 = (phi-r)^2 + psi^2."""
    r = m.radial
    dist = np.sqrt((m.phi - r[:, None]) ** 2 + m.psi ** 2)
    return _grid_quad(dist * d.f, r, m.theta)


def w1_from_map(m: MapField, d: DensityPair) -> float:
    """Quadrature of (|T| - |x|) f over Omega.

    For admissible maps this equals the duality value of W1 up to the
    pushforward defect; it is the W1 to pass to :func:`F_eps_direct` when
    the exact agreement with :func:`F_eps_decomposed` is wanted, since the
    decomposition's term1 integrates |T-x| - |T| + |x| against the same
    quadrature.
    """
    r = m.radial
    mag = np.sqrt(m.phi ** 2 + m.psi ** 2)
    return _grid_quad((mag - r[:, None]) * d.f, r, m.theta)


def w1_duality(d: DensityPair, t: PolarTarget, defect_tol: float = 1e-8) -> float:
    """W1 by duality with the radial potential: int |y| dnu - int |x| dmu."""
    _, maxdef = check_compatibility(d, t)
    if maxdef > defect_tol:
        raise ValidationError(
            f"compatibility defect {maxdef:.3e}: radial potential invalid")
    rad = t.radius(d.lam)
    nu_term = stencils.trapz(
        stencils.trapz(rad ** 2 * d.g * (t.R2 - t.R1)[None, :], d.lam, axis=0),
        d.theta.nodes)
    r = d.radial.nodes
    r_ext = np.concatenate([[0.0], r])
    integ = np.concatenate([np.zeros((1, d.theta.n_theta)),
                            r[:, None] ** 2 * d.f])
    mu_term = stencils.trapz(stencils.trapz(integ, r_ext, axis=0),
                             d.theta.nodes)
    return float(nu_term - mu_term)


def _dirichlet_parts(m: MapField):
    """Angular part per radial node and radial part per radial edge.

    ang[i] = H(phi(r_i,.), psi(r_i,.)) / r_i  (to be integrated w_i dr)
    rad[e] = ||d_r phi||^2 + ||d_r psi||^2 in L2(theta) at the edge,
             times the edge midpoint radius (to be integrated dr).
    """
    r = m.radial
    dth = m.dtheta
    ang = stencils.h_pair(m.phi, m.psi, dth) / r
    dr = np.diff(r)[:, None]
    drphi = (m.phi[1:, :] - m.phi[:-1, :]) / dr
    drpsi = (m.psi[1:, :] - m.psi[:-1, :]) / dr
    sq = drphi ** 2 + drpsi ** 2
    l2 = dth * (np.sum(sq, axis=1) - 0.5 * (sq[:, 0] + sq[:, -1]))
    rad_part = l2 * 0.5 * (r[1:] + r[:-1])
    return ang, rad_part


def _node_index(r: np.ndarray, r_lo: float) -> int:
    i = int(np.argmin(np.abs(r - r_lo)))
    return i


def dirichlet_polar(m: MapField, r_lo: float) -> float:
    """Dirichlet energy over the annular sector r in (r_lo, 1).

    r_lo is snapped to the nearest radial node; the split at any node is
    exact (trapezoid weights are additive at nodes).
    """
    r = m.radial
    if r_lo < r[0] - 1e-12:
        raise ValidationError("r_lo below the radial cutoff")
    i0 = _node_index(r, r_lo)
    ang, rad_part = _dirichlet_parts(m)
    w = stencils.trap_weights(r[i0:])
    return float(np.dot(w, ang[i0:]) + np.sum(rad_part[i0:] * np.diff(r)[i0:]))


def J_eps(m: MapField, d: DensityPair, eps: float) -> float:
    """Penalized Monge functional monge_cost + eps * Dirichlet energy."""
    if eps <= 0:
        raise ValidationError("eps must be positive")
    return monge_cost(m, d) + eps * dirichlet_polar(m, m.radial[0])


def H_functional(phi: Curve, psi: Curve) -> float:
    """Discrete ||phi' - psi||^2 + ||phi + psi'||^2 on the shared stencil."""
    if phi.theta.n_theta != psi.theta.n_theta:
        raise ValidationError("curves live on different grids")
    return float(stencils.h_pair(phi.values, psi.values, phi.theta.dtheta))


def snap_delta(radial: np.ndarray, eps: float) -> tuple[int, float]:
    """Index and value of the radial node nearest eps^(1/3)."""
    if not 0.0 < eps < 1.0:
        raise ValidationError("eps must lie in (0,1)")
    i = _node_index(radial, eps ** (1.0 / 3.0))
    if i < 1 or i > len(radial) - 2:
        raise ValidationError("delta = eps^(1/3) is not grid-resolvable")
    return i, float(radial[i])


def log_delta_discrete(radial: np.ndarray, i_delta: int) -> float:
    """Trapezoid quadrature of 1/r over (delta, 1) on the radial nodes.

    Stands in for |log delta| in the bookkeeping so the direct/decomposed
    split is an exact identity; differs from log by O(dr^2).
    """
    r = radial[i_delta:]
    return float(np.dot(stencils.trap_weights(r), 1.0 / r))


@dataclass(frozen=True)
class FepsTerms:
    total: float
    term1: float
    term2: float
    term3: float
    term4: float
    delta: float
    log_delta: float


def F_eps_direct(m: MapField, d: DensityPair, eps: float, K: float,
                 W1: float) -> float:
    """(J_eps - W1 - K eps Ldelta)/eps with the snapped-delta convention.

    Ldelta is the discrete quadrature of 1/r over (delta, 1) (see
    ``log_delta_discrete``); 3|log delta| plays the role of |log eps|. Exact
    agreement with :func:`F_eps_decomposed` requires W1 = w1_from_map(m, d).
    """
    i_d, _ = snap_delta(m.radial, eps)
    L = log_delta_discrete(m.radial, i_d)
    return (J_eps(m, d, eps) - W1 - K * eps * L) / eps


def F_eps_decomposed(m: MapField, d: DensityPair, eps: float, K: float,
                     defect_tol: float = 1e-2) -> FepsTerms:
    """Four-term split of F_eps at delta = snap(eps^(1/3)).

    term1 = (1/eps) int (|T-x| - |T| + |x|) f dx       (duality excess)
    term2 = Dirichlet energy on the inner ball r < delta (patch region)
    term3 = int_delta^1 (H(phi(r,.), psi(r,.)) - K) dr/r
    term4 = int_delta^1 (||d_r phi||^2 + ||d_r psi||^2) r dr
    """
    r = m.radial
    i_d, delta = snap_delta(r, eps)
    L = log_delta_discrete(r, i_d)
    dist = np.sqrt((m.phi - r[:, None]) ** 2 + m.psi ** 2)
    mag = np.sqrt(m.phi ** 2 + m.psi ** 2)
    term1 = _grid_quad((dist - mag + r[:, None]) * d.f, r, m.theta) / eps
    ang, rad_part = _dirichlet_parts(m)
    dr = np.diff(r)
    w_in = stencils.trap_weights(r[: i_d + 1])
    term2 = float(np.dot(w_in, ang[: i_d + 1])
                  + np.sum(rad_part[:i_d] * dr[:i_d]))
    w_out = stencils.trap_weights(r[i_d:])
    term3 = float(np.dot(w_out, ang[i_d:])) - K * L
    term4 = float(np.sum(rad_part[i_d:] * dr[i_d:]))
    total = term1 + term2 + term3 + term4
    return FepsTerms(total=total, term1=term1, term2=term2, term3=term3,
                     term4=term4, delta=delta, log_delta=L)


@dataclass(frozen=True)
class LimitFValue:
    total: float
    first: float
    second: float
    first_tail_slope: float
    diverges: bool


def limit_F(p: RadialProfile, K: float, tail_tol: float = 0.05) -> LimitFValue:
    """Limit functional int G(phi(r,.)) dr/r + int ||d_r phi||^2 r dr.

    Both integrals run over (r_min, 1). The first integrand behaves like
    G(phi(0,.))/r near the origin; a nonzero logarithmic tail slope
    (estimated by comparing nested inner cutoffs) flags divergence.
    """
    m = MapField.from_profile(p)
    ang, rad_part = _dirichlet_parts(m)
    r = m.radial
    dth = m.dtheta
    first_integrand = ang - K / r  # (||phi(r,.)||_H1^2 - K)/r with psi = 0
    w = stencils.trap_weights(r)
    first = float(np.dot(w, first_integrand))
    second = float(np.sum(rad_part * np.diff(r)))
    # logarithmic tail diagnostic: compare the partials from r_min and 8 r_min
    i4 = max(2, _node_index(r, 8.0 * r[0]))
    if i4 < len(r) - 1:
        w4 = stencils.trap_weights(r[i4:])
        first_inner = first - float(np.dot(w4, first_integrand[i4:]))
        denom = math.log(r[i4] / r[0])
        slope = first_inner / denom if denom > 0 else 0.0
    else:
        slope = 0.0
    diverges = abs(slope) > tail_tol * max(1.0, abs(first))
    return LimitFValue(total=first + second, first=first, second=second,
                       first_tail_slope=float(slope), diverges=bool(diverges))


def bound_constants(t: PolarTarget, K: float) -> BoundConstants:
    """Explicit constants A, B1..B5, B of the lower-bound inequalities."""
    sR1, sR2 = t.sup_R1, t.sup_R2
    iR1 = t.inf_R1
    lip = t.lip_R1
    hpi = math.pi / 2.0
    A = 1.0 / ((2.0 * sR2 + 1.0) * (2.0 * sR2))
    B1 = hpi * (lip / iR1) + 1.0
    B2 = hpi * sR1 + 2.0 * lip + t.bv_R1p
    B3 = 2.0 * B1 * B2
    # largest root of x^2/2 - 4 supR2 sqrt(pi/2) x - (4 supR2^2
    #   + (B3/2) supR2 + K/2)
    b = 4.0 * sR2 * math.sqrt(hpi)
    c = 4.0 * sR2 ** 2 + 0.5 * B3 * sR2 + 0.5 * K
    B4 = b + math.sqrt(b * b + 2.0 * c)
    B5 = math.sqrt(hpi) * B4 + 2.0 * sR2 + B3
    eps_star = (4.0 / (math.sqrt(2.0) * B5)) ** 0.25
    B = 3.0 * math.sqrt(2.0) * B5 / (4.0 * eps_star ** (4.0 / 3.0))
    return BoundConstants(A=A, B1=B1, B2=B2, B3=B3, B4=B4, B5=B5, B=B)


def check_xpsi2(m: MapField, A: float) -> float:
    """min over the grid of |T-x| - |T| + |x| - A |x| psi^2."""
    r = m.radial[:, None]
    dist = np.sqrt((m.phi - r) ** 2 + m.psi ** 2)
    mag = np.sqrt(m.phi ** 2 + m.psi ** 2)
    slack = dist - mag + r - A * r * m.psi ** 2
    return float(slack.min())


def curve_in_target(phi: np.ndarray, psi: np.ndarray, theta: np.ndarray,
                    t: PolarTarget, tol: float = 1e-9) -> bool:
    """Whether theta -> phi x_hat + psi x_hat_perp stays inside Omega'."""
    rad = np.sqrt(phi ** 2 + psi ** 2)
    ang = theta + np.arctan2(psi, phi)
    if np.any(ang < -tol) or np.any(ang > math.pi / 2.0 + tol):
        return False
    R1 = np.interp(np.clip(ang, 0, math.pi / 2), t.theta.nodes, t.R1)
    R2 = np.interp(np.clip(ang, 0, math.pi / 2), t.theta.nodes, t.R2)
    return bool(np.all(rad >= R1 - tol) and np.all(rad <= R2 + tol))


def check_deuxtiers(phi: Curve, psi: Curve, Phi: Curve, K: float,
                    bc: BoundConstants, t: PolarTarget) -> float:
    """Slack of H(phi,psi) >= K + ||max(phi,R1) - Phi||_L2^2 / 2
    - B ||psi||_L2^(2/3) for curves valued in Omega'."""
    R1 = np.interp(phi.theta.nodes, t.theta.nodes, t.R1)
    if not curve_in_target(phi.values, psi.values, phi.theta.nodes, t):
        raise ValidationError("curve leaves the target annulus")
    dth = phi.theta.dtheta
    H = float(stencils.h_pair(phi.values, psi.values, dth))
    phit = np.maximum(phi.values, R1)
    Phi_v = np.interp(phi.theta.nodes, Phi.theta.nodes, Phi.values)
    l2sq = stencils.l2_norm_sq(phit - Phi_v, dth)
    psi_l2 = math.sqrt(stencils.l2_norm_sq(psi.values, dth))
    rhs = K + 0.5 * l2sq - bc.B * psi_l2 ** (2.0 / 3.0)
    return H - rhs


def dirichlet_cartesian_frame(m: MapField, r_lo: float) -> float:
    """Dirichlet energy via the Cartesian components on the polar grid.

    Independent discretization route: differentiates T1 = phi cos - psi sin
    and T2 = phi sin + psi cos directly, with |DT|^2 = |d_r T|^2
    + |d_theta T|^2 / r^2. Used to cross-check the polar-frame four-term
    integrand.
    """
    r = m.radial
    th = m.theta
    cos, sin = np.cos(th)[None, :], np.sin(th)[None, :]
    T1 = m.phi * cos - m.psi * sin
    T2 = m.phi * sin + m.psi * cos
    i0 = _node_index(r, r_lo)
    dth = m.dtheta
    dr = np.diff(r)[:, None]
    total = 0.0
    for comp in (T1, T2):
        d_r = (comp[1:, :] - comp[:-1, :]) / dr
        sq = d_r ** 2
        l2 = dth * (np.sum(sq, axis=1) - 0.5 * (sq[:, 0] + sq[:, -1]))
        total += float(np.sum(l2[i0:] * 0.5 * (r[1:] + r[:-1])[i0:]
                              * np.diff(r)[i0:]))
        d_t = (comp[:, 1:] - comp[:, :-1]) / dth
        sq_t = dth * np.sum(d_t ** 2, axis=1)
        w = stencils.trap_weights(r[i0:])
        total += float(np.dot(w, sq_t[i0:] / r[i0:]))
    return total

"""Geometry, grids, densities, and configuration.

The source domain is the quarter disk ``Omega = {r < 1, 0 < theta < pi/2}``,
the target is a polar annulus ``Omega' = {R1(theta) < r < R2(theta)}``. The
source density f lives on a (radial x angular) grid; the target density g
lives on a (lambda, theta) chart of Omega' with ``r = R1 + lambda (R2-R1)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import stencils


class ValidationError(ValueError):
    """Raised when inputs fail a structural precondition."""


@dataclass(frozen=True)
class AngularGrid:
    """Uniform grid of n_theta nodes on [0, pi/2]."""

    n_theta: int
    nodes: np.ndarray = field(repr=False)

    @classmethod
    def make(cls, n_theta: int) -> "AngularGrid":
        if n_theta < 3:
            raise ValidationError("angular grid needs at least 3 nodes")
        return cls(n_theta=n_theta, nodes=np.linspace(0.0, math.pi / 2.0, n_theta))

    @property
    def dtheta(self) -> float:
        return (math.pi / 2.0) / (self.n_theta - 1)


@dataclass(frozen=True)
class RadialGrid:
    """Increasing radial nodes on [r_min, 1] with r_min > 0.

    The origin is a singular point of every optimal map here, so all radial
    integrals start at a positive cutoff; ``uniform`` places the first node
    half a cell away from 0.
    """

    nodes: np.ndarray = field(repr=False)
    r_min: float = 0.0

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or len(nodes) < 3:
            raise ValidationError("radial grid needs at least 3 nodes")
        if np.any(np.diff(nodes) <= 0):
            raise ValidationError("radial nodes must be strictly increasing")
        if nodes[0] <= 0:
            raise ValidationError("radial grid must start at a positive cutoff")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "r_min", float(nodes[0]))

    @classmethod
    def uniform(cls, n_r: int) -> "RadialGrid":
        """Uniform nodes with r_min = dr/2 (cell-centered near the origin)."""
        if n_r < 3:
            raise ValidationError("radial grid needs at least 3 nodes")
        dr = 2.0 / (2 * n_r - 1)
        return cls(nodes=np.linspace(dr / 2.0, 1.0, n_r))

    @classmethod
    def geometric(cls, n_r: int, r_min: float) -> "RadialGrid":
        """Geometrically spaced nodes, suited to 1/r-type integrands."""
        if not 0 < r_min < 1:
            raise ValidationError("r_min must lie in (0,1)")
        return cls(nodes=np.geomspace(r_min, 1.0, n_r))

    @property
    def n_r(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True)
class PolarTarget:
    """The annulus Omega' given by sampled boundary curves R1 <= r <= R2."""

    theta: AngularGrid
    R1: np.ndarray = field(repr=False)
    R2: np.ndarray = field(repr=False)
    lip_R1: float = 0.0
    lip_R2: float = 0.0
    bv_R1p: float = 0.0

    def __post_init__(self):
        R1 = np.asarray(self.R1, dtype=float)
        R2 = np.asarray(self.R2, dtype=float)
        if len(R1) != self.theta.n_theta or len(R2) != self.theta.n_theta:
            raise ValidationError("boundary curves must match the angular grid")
        if R1.min() <= 1.0:
            raise ValidationError("inf R1 must exceed 1")
        if R2.min() <= R1.max():
            raise ValidationError("inf R2 must exceed sup R1")
        dth = self.theta.dtheta
        for curve, lip, name in ((R1, self.lip_R1, "R1"), (R2, self.lip_R2, "R2")):
            quot = np.max(np.abs(np.diff(curve))) / dth
            if quot > lip + 1e-9:
                raise ValidationError(
                    f"declared Lipschitz constant for {name} ({lip}) below the "
                    f"sampled difference quotient ({quot:.6g})"
                )
        object.__setattr__(self, "R1", R1)
        object.__setattr__(self, "R2", R2)

    @property
    def inf_R1(self) -> float:
        return float(self.R1.min())

    @property
    def sup_R1(self) -> float:
        return float(self.R1.max())

    @property
    def inf_R2(self) -> float:
        return float(self.R2.min())

    @property
    def sup_R2(self) -> float:
        return float(self.R2.max())

    def radius(self, lam: np.ndarray) -> np.ndarray:
        """Physical radius r(lambda, theta) of the chart, shape (n_lam, n_theta)."""
        lam = np.asarray(lam, dtype=float)[:, None]
        return self.R1[None, :] + lam * (self.R2 - self.R1)[None, :]


@dataclass(frozen=True)
class DensityPair:
    """Sampled densities: f over Omega, g over the (lambda,theta) chart of Omega'."""

    radial: RadialGrid
    theta: AngularGrid
    lam: np.ndarray = field(repr=False)
    f: np.ndarray = field(repr=False)
    g: np.ndarray = field(repr=False)

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        f = np.asarray(self.f, dtype=float)
        g = np.asarray(self.g, dtype=float)
        if f.shape != (self.radial.n_r, self.theta.n_theta):
            raise ValidationError("f must be sampled on (radial x angular) grid")
        if g.shape != (len(lam), self.theta.n_theta):
            raise ValidationError("g must be sampled on (lambda x angular) grid")
        if np.any(f <= 0) or np.any(g <= 0):
            raise ValidationError("densities must be strictly positive")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", g)

    @property
    def inf_f(self) -> float:
        return float(self.f.min())

    @property
    def sup_f(self) -> float:
        return float(self.f.max())

    @property
    def inf_g(self) -> float:
        return float(self.g.min())

    @property
    def sup_g(self) -> float:
        return float(self.g.max())


DEFAULT_EPS_LIST = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)


@dataclass(frozen=True)
class ExperimentConfig:
    n_r: int = 2001
    n_theta: int = 129
    n_lam: int = 2001
    preset: str = "annulus-const"
    eps_list: tuple = DEFAULT_EPS_LIST
    seed: int = 0
    obstacle_tol: float = 1e-10
    anneal_cooling: float = 0.95
    anneal_proposals_per_point: int = 200
    anneal_t0: float = 1e-3
    out_dir: str = "out"

    def __post_init__(self):
        if self.n_r < 3 or self.n_theta < 3 or self.n_lam < 3:
            raise ValidationError("grids need at least 3 nodes per axis")
        eps = tuple(float(e) for e in self.eps_list)
        if any(not (0.0 < e < 1.0) for e in eps):
            raise ValidationError("eps values must lie in (0,1)")
        object.__setattr__(self, "eps_list", eps)


_CONFIG_KEYS = {
    "n_r", "n_theta", "n_lam", "preset", "eps_list", "seed", "obstacle_tol",
    "anneal_cooling", "anneal_proposals_per_point", "anneal_t0", "out_dir",
}


def load_config(path: str) -> ExperimentConfig:
    """Load a flat JSON key-value config file, filling defaults."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"malformed config file: {exc}") from exc
    if not isinstance(raw, dict):
        raise ValidationError("config must be a flat key-value object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    if "eps_list" in raw:
        raw["eps_list"] = tuple(float(e) for e in raw["eps_list"])
    return ExperimentConfig(**raw)


def make_preset(name: str, n_r: int = 2001, n_theta: int = 129,
                n_lam: int = 2001) -> tuple[DensityPair, PolarTarget]:
    """Build a named (DensityPair, PolarTarget) preset.

    ``annulus-const``: R1=1.5, R2=2.5, f=4/pi, g=1/pi. Probability
    normalization with exact per-angle compatibility; closed forms exist for
    every downstream quantity.

    ``annulus-sin``: same annulus with a theta-modulated source density
    f ~ (1 + 0.1 sin 2 theta), target renormalized per angle.
    """
    tgrid = AngularGrid.make(n_theta)
    rgrid = RadialGrid.uniform(n_r)
    lam = np.linspace(0.0, 1.0, n_lam)
    target = PolarTarget(
        theta=tgrid,
        R1=np.full(n_theta, 1.5),
        R2=np.full(n_theta, 2.5),
        lip_R1=0.0,
        lip_R2=0.0,
        bv_R1p=0.0,
    )
    if name == "annulus-const":
        f = np.full((n_r, n_theta), 4.0 / math.pi)
        g = np.full((n_lam, n_theta), 1.0 / math.pi)
        d = DensityPair(radial=rgrid, theta=tgrid, lam=lam, f=f, g=g)
        return d, target
    if name == "annulus-sin":
        mod = 1.0 + 0.1 * np.sin(2.0 * tgrid.nodes)
        # total mass of (4/pi)(1 + 0.1 sin 2t) r dr dt is 1 + 0.2/pi
        norm = 1.0 + 0.2 / math.pi
        f = (4.0 / math.pi) * mod[None, :] / norm * np.ones((n_r, 1))
        g = np.full((n_lam, n_theta), 1.0 / math.pi)
        d = DensityPair(radial=rgrid, theta=tgrid, lam=lam, f=f, g=g)
        return normalize_target_per_theta(d, target), target
    raise ValidationError(f"unknown preset {name!r}")


def _mu_theta_mass(d: DensityPair) -> np.ndarray:
    """Per-theta source mass: integral of f r dr over (0,1), shape (n_theta,)."""
    r = d.radial.nodes
    # include the (0, r_min) sliver: the integrand r f vanishes at r=0
    r_ext = np.concatenate([[0.0], r])
    integ = np.concatenate([np.zeros((1, d.theta.n_theta)), r[:, None] * d.f])
    return stencils.trapz(integ, r_ext, axis=0)


def _nu_theta_mass(d: DensityPair, t: PolarTarget) -> np.ndarray:
    """Per-theta target mass: integral of g r dr over (R1,R2), shape (n_theta,)."""
    rad = t.radius(d.lam)
    integ = d.g * rad * (t.R2 - t.R1)[None, :]
    return stencils.trapz(integ, d.lam, axis=0)


def check_compatibility(d: DensityPair, t: PolarTarget) -> tuple[np.ndarray, float]:
    """Per-theta mass defect between source and target slices, plus the max."""
    defect = np.abs(_mu_theta_mass(d) - _nu_theta_mass(d, t))
    return defect, float(defect.max())


def normalize_target_per_theta(d: DensityPair, t: PolarTarget) -> DensityPair:
    """Rescale g per theta so per-angle masses match the source exactly."""
    mu = _mu_theta_mass(d)
    nu = _nu_theta_mass(d, t)
    if np.any(nu <= 0):
        raise ValidationError("zero per-theta target mass")
    return replace(d, g=d.g * (mu / nu)[None, :])


def quadrature_2d(field_vals: np.ndarray, d: DensityPair, weight: str,
                  t: PolarTarget | None = None) -> float:
    """Composite trapezoid integral of a sampled field.

    ``weight="r dr dtheta"`` integrates over Omega on the (radial x angular)
    grid with the polar weight r; ``weight="dx"`` integrates over Omega' on
    the (lambda x angular) chart with the area element r (R2-R1) dlambda dtheta.
    """
    field_vals = np.asarray(field_vals, dtype=float)
    if weight == "r dr dtheta":
        r = d.radial.nodes
        inner = stencils.trapz(field_vals * r[:, None], r, axis=0)
        return float(stencils.trapz(inner, d.theta.nodes))
    if weight == "dx":
        if t is None:
            raise ValidationError("target required for the dx weight")
        rad = t.radius(d.lam)
        inner = stencils.trapz(field_vals * rad * (t.R2 - t.R1)[None, :],
                               d.lam, axis=0)
        return float(stencils.trapz(inner, d.theta.nodes))
    raise ValidationError(f"unknown weight {weight!r}")

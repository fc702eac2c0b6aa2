"""Command-line pipeline: config -> runs -> CSV artifacts -> plot outputs.

Subcommands
-----------
validate        compatibility defect of the preset densities
w1              exact Monge cost by duality
obstacle        lower-obstacle minimizer Phi and constant K
build-maps      ray-map profiles (monotone or three-piece original)
energy          penalized energy and its four-term decomposition
recovery-sweep  recovery-family diagnostics over an eps list
minimize        discrete inf J_eps estimates on point clouds
counterexample  tent map vs monotone map Sobolev costs
fit             three-term asymptotic fit of the minimize CSV
report          plot script + rendered figure from existing CSVs

CSV schemas (comma separator, '.' decimal, header row, LF endings,
values formatted with %.12g so reruns with the same config and seed are
byte-identical):

  counterexample.csv   alpha,cost_U,cost_T_alpha,margin
  obstacle.csv         theta,R1,Phi
  maps_<kind>.csv      r,theta,phi
  breakpoints_<kind>.csv  theta,rho1,rho2
  energy.csv           eps,J,F_direct,term1,term2,term3,term4
  recovery_sweep.csv   eps,delta,J,F,term1,term2,term3,term4,
                       lip_S_delta,patch_defect,seam_mismatch
  field_<eps>.csv      r,theta,phi,psi            (--emit-field)
  minimize.csv         eps,J_discrete,monge_part,dirichlet_part,accept_rate
  fit.csv              c0,c1,c2,se1,se2

Every run writes ``manifest_<subcommand>.json`` (config hash, subcommand,
timestamps, output file list, tool version) to the output directory.

Exit codes: 0 success, 1 validation failure, 2 solver failure,
3 acceptance-check failure (``report --check``).
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .domain import (ExperimentConfig, ValidationError, check_compatibility,
                     load_config, make_preset)
from .obstacle import Curve, solve_obstacle
from .raymaps import monotone_ray_map, original_map
from .energy import (MapField, F_eps_decomposed, F_eps_direct, J_eps,
                     w1_duality, w1_from_map)
from .recovery import assemble_recovery, evaluate_field, recovery_sweep
from .minimizer import (fit_asymptotics, minimize_J_eps, sample_clouds,
                        solve_assignment_monge)
from .transport1d import triangle_counterexample

K_THIRD = 3.0 * math.pi / 8.0


class CheckFailure(Exception):
    """An acceptance check requested on the command line failed."""


def _fmt(x) -> str:
    return "%.12g" % float(x)


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    if not path.exists():
        raise ValidationError(f"missing input file: {path}")
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def _config_hash(cfg: ExperimentConfig) -> str:
    blob = json.dumps(dataclasses.asdict(cfg), sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


class Run:
    """Output directory plus the manifest bookkeeping for one subcommand."""

    def __init__(self, cfg: ExperimentConfig, subcommand: str):
        self.cfg = cfg
        self.subcommand = subcommand
        self.out = Path(cfg.out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs: list[str] = []
        self.started = datetime.now(timezone.utc).isoformat()

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.out / name

    def finish(self) -> None:
        manifest = {
            "tool_version": __version__,
            "subcommand": self.subcommand,
            "config_hash": _config_hash(self.cfg),
            "started": self.started,
            "finished": datetime.now(timezone.utc).isoformat(),
            "outputs": list(self.outputs),
        }
        mpath = self.out / f"manifest_{self.subcommand}.json"
        mpath.write_text(json.dumps(manifest, indent=2) + "\n",
                         encoding="utf-8")


def _pmap(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _preset(cfg: ExperimentConfig):
    return make_preset(cfg.preset, n_r=cfg.n_r, n_theta=cfg.n_theta,
                       n_lam=cfg.n_lam)


def _solve_K(cfg: ExperimentConfig, d, t):
    return solve_obstacle(Curve(theta=d.theta, values=t.R1),
                          tol=cfg.obstacle_tol)


# ---------------------------------------------------------------- subcommands


def cmd_validate(cfg: ExperimentConfig, args) -> int:
    run = Run(cfg, "validate")
    d, t = _preset(cfg)
    _, maxdef = check_compatibility(d, t)
    print(f"preset {cfg.preset}: compatibility defect {maxdef:.6e}")
    run.finish()
    return 0


def cmd_w1(cfg: ExperimentConfig, args) -> int:
    run = Run(cfg, "w1")
    d, t = _preset(cfg)
    value = w1_duality(d, t)
    print(f"{value:.6f}")
    run.finish()
    return 0


def cmd_obstacle(cfg: ExperimentConfig, args) -> int:
    run = Run(cfg, "obstacle")
    d, t = _preset(cfg)
    res = _solve_K(cfg, d, t)
    _write_csv(run.path("obstacle.csv"), ["theta", "R1", "Phi"],
               zip(d.theta.nodes, t.R1, res.Phi.values))
    print(f"K = {res.K:.12g}")
    print(json.dumps({"K": res.K, "kkt_residual": res.kkt_residual,
                      "iterations": res.iterations,
                      "active_nodes": int(res.active.sum()),
                      "n_theta": cfg.n_theta}))
    run.finish()
    return 0


def cmd_build_maps(cfg: ExperimentConfig, args) -> int:
    run = Run(cfg, "build-maps")
    d, t = _preset(cfg)
    if args.kind == "monotone":
        p = monotone_ray_map(d, t)
        rho1 = np.full(cfg.n_theta, float("nan"))
        rho2 = rho1
    else:
        res = _solve_K(cfg, d, t)
        p = original_map(d, t, res.Phi)
        rho1, rho2 = p.rho1, p.rho2
    rr, tt = np.meshgrid(p.radial, p.theta, indexing="ij")
    _write_csv(run.path(f"maps_{args.kind}.csv"), ["r", "theta", "phi"],
               zip(rr.ravel(), tt.ravel(), p.phi.ravel()))
    _write_csv(run.path(f"breakpoints_{args.kind}.csv"),
               ["theta", "rho1", "rho2"], zip(p.theta, rho1, rho2))
    run.finish()
    return 0


def _load_profile_field(path: Path) -> MapField:
    header, data = _read_csv(path)
    if header != ["r", "theta", "phi"]:
        raise ValidationError(f"{path} is not an r,theta,phi map file")
    r = np.unique(data[:, 0])
    th = np.unique(data[:, 1])
    if len(r) * len(th) != len(data):
        raise ValidationError("map file does not cover a full grid")
    order = np.lexsort((data[:, 1], data[:, 0]))
    phi = data[order, 2].reshape(len(r), len(th))
    return MapField(radial=r, theta=th, phi=phi, psi=np.zeros_like(phi))


def cmd_energy(cfg: ExperimentConfig, args) -> int:
    run = Run(cfg, "energy")
    m = _load_profile_field(Path(args.map))
    d, t = make_preset(cfg.preset, n_r=len(m.radial), n_theta=len(m.theta),
                       n_lam=cfg.n_lam)
    if not (np.allclose(d.radial.nodes, m.radial)
            and np.allclose(d.theta.nodes, m.theta)):
        raise ValidationError("map grid does not match the preset grids")
    K = _solve_K(cfg, d, t).K
    W1 = w1_from_map(m, d)
    rows = []
    for eps in args.eps:
        terms = F_eps_decomposed(m, d, eps, K)
        rows.append((eps, J_eps(m, d, eps), F_eps_direct(m, d, eps, K, W1),
                     terms.term1, terms.term2, terms.term3, terms.term4))
    _write_csv(run.path("energy.csv"),
               ["eps", "J", "F_direct", "term1", "term2", "term3", "term4"],
               rows)
    run.finish()
    return 0


def cmd_recovery_sweep(cfg: ExperimentConfig, args) -> int:
    run = Run(cfg, "recovery-sweep")
    d, t = _preset(cfg)
    res = _solve_K(cfg, d, t)
    p = original_map(d, t, res.Phi)
    eps_list = sorted(args.eps_list or cfg.eps_list, reverse=True)
    rows = recovery_sweep(p, d, t, res.Phi, res.K, eps_list,
                          patch_m=args.patch_m)
    cols = ["eps", "delta", "J", "F", "term1", "term2", "term3", "term4",
            "lip_S_delta", "patch_defect", "seam_mismatch"]
    _write_csv(run.path("recovery_sweep.csv"), cols,
               [[row[c] for c in cols] for row in rows])
    if args.emit_field:
        for eps in eps_list:
            rr = assemble_recovery(p, d, t, res.Phi, eps,
                                   patch_m=args.patch_m)
            f = rr.field
            rg, tg = np.meshgrid(f.radial, f.theta, indexing="ij")
            _write_csv(run.path(f"field_{_fmt(eps)}.csv"),
                       ["r", "theta", "phi", "psi"],
                       zip(rg.ravel(), tg.ravel(), f.phi.ravel(),
                           f.psi.ravel()))
    run.finish()
    return 0


def cmd_minimize(cfg: ExperimentConfig, args) -> int:
    run = Run(cfg, "minimize")
    d, t = _preset(cfg)
    res = _solve_K(cfg, d, t)
    p = original_map(d, t, res.Phi)
    c = sample_clouds(d, t, args.N, seed=cfg.seed)
    init = solve_assignment_monge(c, seed=cfg.seed)
    eps_list = sorted(args.eps_list
                      or np.geomspace(1e-3, 1e-1, 8).tolist(), reverse=True)

    def job(eps: float):
        rr = assemble_recovery(p, d, t, res.Phi, eps, patch_m=args.patch_m)
        predicted = evaluate_field(rr.field, c.x)
        return minimize_J_eps(
            c, eps, init, predicted=predicted, seed=cfg.seed,
            refine=args.refine, cooling=cfg.anneal_cooling,
            proposals_per_point=cfg.anneal_proposals_per_point)

    results = _pmap(job, eps_list, args.threads)
    _write_csv(run.path("minimize.csv"),
               ["eps", "J_discrete", "monge_part", "dirichlet_part",
                "accept_rate"],
               [(r.eps, r.J, r.monge_part, r.dirichlet_part, r.accept_rate)
                for r in results])
    run.finish()
    return 0


def cmd_counterexample(cfg: ExperimentConfig, args) -> int:
    run = Run(cfg, "counterexample")
    rows = []
    for alpha in args.alpha:
        cost_U, cost_T, margin = triangle_counterexample(alpha, args.n)
        rows.append((alpha, cost_U, cost_T, margin))
    _write_csv(run.path("counterexample.csv"),
               ["alpha", "cost_U", "cost_T_alpha", "margin"], rows)
    run.finish()
    return 0


def cmd_fit(cfg: ExperimentConfig, args) -> int:
    run = Run(cfg, "fit")
    header, data = _read_csv(Path(args.input or (run.out / "minimize.csv")))
    if header[:2] != ["eps", "J_discrete"]:
        raise ValidationError("fit input must be a minimize CSV")
    if args.free_c0:
        W1 = None
    else:
        d, t = _preset(cfg)
        W1 = w1_duality(d, t)
    fit = fit_asymptotics(list(zip(data[:, 0], data[:, 1])), W1_known=W1,
                          relative_errors=not args.absolute_errors)
    _write_csv(run.path("fit.csv"), ["c0", "c1", "c2", "se1", "se2"],
               [(fit.c0, fit.c1, fit.c2, fit.se1, fit.se2)])
    print(f"c0 = {fit.c0:.6f}  c1 = {fit.c1:.6f} (se {fit.se1:.4f})  "
          f"c2 = {fit.c2:.6f} (se {fit.se2:.4f})")
    run.finish()
    return 0


_GNUPLOT = """\
# penalized Monge energy vs eps with the three-term asymptotic fit
set datafile separator ","
set logscale x
set xlabel "eps"
set ylabel "inf J_eps"
c0 = {c0}
c1 = {c1}
c2 = {c2}
f(x) = c0 + c1*x*abs(log(x)) + c2*x
plot "minimize.csv" using 1:2 skip 1 with points pt 7 \\
         title "discrete inf J_eps", \\
     f(x) with lines title sprintf("fit c1=%.4f", c1)
"""


def cmd_report(cfg: ExperimentConfig, args) -> int:
    # reads previously written CSVs only; never recomputes physics
    run = Run(cfg, "report")
    _, mdata = _read_csv(run.out / "minimize.csv")
    fheader, fdata = _read_csv(run.out / "fit.csv")
    if fheader != ["c0", "c1", "c2", "se1", "se2"]:
        raise ValidationError("fit.csv has an unexpected schema")
    c0, c1, c2 = fdata[0, 0], fdata[0, 1], fdata[0, 2]
    run.path("report.gp").write_text(
        _GNUPLOT.format(c0=_fmt(c0), c1=_fmt(c1), c2=_fmt(c2)),
        encoding="utf-8", newline="\n")

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    eps, J = mdata[:, 0], mdata[:, 1]
    xs = np.geomspace(eps.min() / 1.5, eps.max() * 1.5, 200)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogx(eps, J, "o", label="discrete inf $J_\\varepsilon$")
    ax.semilogx(xs, c0 + c1 * xs * np.abs(np.log(xs)) + c2 * xs, "-",
                label=f"fit: $c_1$ = {c1:.4f}")
    ax.set_xlabel("$\\varepsilon$")
    ax.set_ylabel("inf $J_\\varepsilon$")
    ax.legend()
    fig.tight_layout()
    fig.savefig(run.path("report.png"), dpi=150)
    plt.close(fig)
    run.finish()

    if args.check:
        rel = abs(c1 - K_THIRD) / K_THIRD
        print(f"c1 = {c1:.6f}, target {K_THIRD:.6f}, "
              f"relative error {rel:.4f}")
        if rel > 0.25:
            raise CheckFailure(
                f"fitted c1 off by {rel:.1%} (> 25% of 3*pi/8)")
    return 0


# -------------------------------------------------------------------- parsing


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="flat JSON config file")
    common.add_argument("--out", metavar="DIR",
                        help="output directory (overrides config)")
    common.add_argument("--seed", type=int, metavar="S",
                        help="RNG seed (overrides config)")
    common.add_argument("--threads", type=int, default=1, metavar="T",
                        help="parallel per-eps jobs (default 1)")
    common.add_argument("--preset", metavar="P",
                        help="density preset name (overrides config)")

    top = argparse.ArgumentParser(
        prog="radmonge",
        description="Radial Monge transport with vanishing Dirichlet "
                    "penalization: maps, energies, and asymptotics.")
    top.add_argument("--version", action="version", version=__version__)
    sub = top.add_subparsers(dest="subcommand", required=True)

    sub.add_parser("validate", parents=[common]).set_defaults(fn=cmd_validate)
    sub.add_parser("w1", parents=[common]).set_defaults(fn=cmd_w1)
    sub.add_parser("obstacle", parents=[common]).set_defaults(fn=cmd_obstacle)

    p = sub.add_parser("build-maps", parents=[common])
    p.add_argument("--kind", choices=["monotone", "original"],
                   default="original")
    p.set_defaults(fn=cmd_build_maps)

    p = sub.add_parser("energy", parents=[common])
    p.add_argument("--map", required=True, metavar="FILE",
                   help="r,theta,phi CSV from build-maps")
    p.add_argument("--eps", type=float, nargs="+", required=True)
    p.set_defaults(fn=cmd_energy)

    p = sub.add_parser("recovery-sweep", parents=[common])
    p.add_argument("--eps-list", type=float, nargs="+", default=None)
    p.add_argument("--patch-m", type=int, default=128)
    p.add_argument("--emit-field", action="store_true")
    p.set_defaults(fn=cmd_recovery_sweep)

    p = sub.add_parser("minimize", parents=[common])
    p.add_argument("--N", type=int, default=4000,
                   help="points per cloud (default 4000)")
    p.add_argument("--eps-list", type=float, nargs="+", default=None,
                   help="default: 8 geometric points in [1e-3, 1e-1]")
    p.add_argument("--patch-m", type=int, default=128)
    p.add_argument("--refine", action="store_true",
                   help="also anneal each warm start")
    p.set_defaults(fn=cmd_minimize)

    p = sub.add_parser("counterexample", parents=[common])
    p.add_argument("--alpha", type=float, nargs="+", default=[10.0, 100.0])
    p.add_argument("--n", type=int, default=10000)
    p.set_defaults(fn=cmd_counterexample)

    p = sub.add_parser("fit", parents=[common])
    p.add_argument("--input", metavar="FILE",
                   help="minimize CSV (default: <out>/minimize.csv)")
    p.add_argument("--free-c0", action="store_true",
                   help="fit c0 instead of fixing it to the duality W1")
    p.add_argument("--absolute-errors", action="store_true",
                   help="unweighted fit (default weights rows by 1/eps)")
    p.set_defaults(fn=cmd_fit)

    p = sub.add_parser("report", parents=[common])
    p.add_argument("--check", action="store_true",
                   help="exit 3 unless fitted c1 is within 25%% of 3*pi/8")
    p.set_defaults(fn=cmd_report)
    return top


def _resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "preset", None) is not None:
        overrides["preset"] = args.preset
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
        return args.fn(cfg, args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except CheckFailure as exc:
        print(f"acceptance check failed: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

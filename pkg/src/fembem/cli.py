"""Command-line batch interface: verify, solve, sweep, converge, mie.

Configuration files are flat INI with the sections geometry / medium /
incident / discretization / output; see README for the keys.  Exit
codes: 0 success, 1 verify failure, 2 configuration error, 3 solve
refused as near-singular.
"""

from __future__ import annotations

import argparse
import os
import sys
from configparser import ConfigParser
from dataclasses import dataclass, field

import numpy as np

from . import bem, fem, formulations as fm, geometry as geo, oracle as oc
from . import verify as vf


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    geometry_kind: str = "concentric"
    a: float = 1.0
    b: float = 2.0
    n_inner: int = 64
    n_outer: int = 128
    n_arc: int = 32
    volume_h: float | None = None
    mesh_file: str | None = None
    kappa0: float = 1.0
    kappas: list[float] = field(default_factory=lambda: [2.0])
    kappa_sigma: str = "constant:1.5"
    angle_deg: float = 0.0
    amplitude: complex = 1.0 + 0.0j
    quad_order: int = 8
    mie_tol: float = 1e-12
    seed: int = 42
    prefix: str = "fembem"

    @classmethod
    def load(cls, path) -> "RunConfig":
        cp = ConfigParser()
        if not cp.read(path):
            raise ConfigError(f"cannot read config {path}")
        cfg = cls()
        g = cp["geometry"] if cp.has_section("geometry") else {}
        cfg.geometry_kind = g.get("kind", cfg.geometry_kind)
        cfg.a = float(g.get("a", cfg.a))
        cfg.b = float(g.get("b", cfg.b))
        cfg.n_inner = int(g.get("n_inner", cfg.n_inner))
        cfg.n_outer = int(g.get("n_outer", cfg.n_outer))
        cfg.n_arc = int(g.get("n_arc", cfg.n_arc))
        if "volume_h" in g:
            cfg.volume_h = float(g["volume_h"])
        cfg.mesh_file = g.get("mesh_file", None)
        m = cp["medium"] if cp.has_section("medium") else {}
        cfg.kappa0 = float(m.get("kappa0", cfg.kappa0))
        if "kappa" in m:
            cfg.kappas = [float(t) for t in m["kappa"].split(",") if t.strip()]
        cfg.kappa_sigma = m.get("kappa_sigma", cfg.kappa_sigma)
        i = cp["incident"] if cp.has_section("incident") else {}
        cfg.angle_deg = float(i.get("angle_deg", cfg.angle_deg))
        cfg.amplitude = complex(float(i.get("amplitude_re", 1.0)),
                                float(i.get("amplitude_im", 0.0)))
        d = cp["discretization"] if cp.has_section("discretization") else {}
        cfg.quad_order = int(d.get("quad_order", cfg.quad_order))
        cfg.mie_tol = float(d.get("mie_tol", cfg.mie_tol))
        cfg.seed = int(d.get("seed", cfg.seed))
        o = cp["output"] if cp.has_section("output") else {}
        cfg.prefix = o.get("prefix", cfg.prefix)
        cfg.validate()
        return cfg

    def validate(self):
        if self.geometry_kind not in ("concentric", "halfdisk", "gap-demo",
                                      "external-mesh"):
            raise ConfigError(f"unknown geometry kind {self.geometry_kind!r}")
        if self.kappa0 <= 0 or any(k <= 0 for k in self.kappas):
            raise ConfigError("wavenumbers must be positive")
        if self.mesh_file and not os.path.exists(self.mesh_file):
            raise ConfigError(f"mesh file {self.mesh_file} does not exist")
        if self.kappa_sigma.startswith("table:"):
            path = self.kappa_sigma.split(":", 1)[1]
            if not os.path.exists(path):
                raise ConfigError(f"kappa table {path} does not exist")

    def medium(self) -> fem.MediumField:
        spec = self.kappa_sigma
        if spec.startswith("constant:"):
            return fem.MediumField.constant(float(spec.split(":", 1)[1]))
        if spec.startswith("table:"):
            return fem.MediumField.from_table_file(spec.split(":", 1)[1])
        if spec.startswith("radial:"):
            coeffs = [float(t) for t in spec.split(":", 1)[1].split(",")]
            return fem.MediumField.radial_profile(
                lambda r: sum(c * r ** p for p, c in enumerate(coeffs)))
        raise ConfigError(f"unknown kappa_sigma spec {spec!r}")

    def wave(self, k0: float | None = None) -> fm.IncidentWave:
        ang = np.deg2rad(self.angle_deg)
        return fm.IncidentWave(k0=k0 if k0 is not None else self.kappa0,
                               direction=(float(np.cos(ang)), float(np.sin(ang))),
                               amplitude=self.amplitude)

    def build(self, k0: float | None = None) -> fm.Workbench:
        quad = bem.QuadratureSpec(gauss_order=self.quad_order)
        if self.geometry_kind in ("concentric", "gap-demo"):
            part, vol = geo.make_concentric_config(
                self.a, self.b, self.n_inner, self.n_outer, self.volume_h)
            kappas = list(self.kappas[:1]) or [self.kappa0]
        elif self.geometry_kind == "halfdisk":
            part, vol = geo.make_halfdisk_config(self.a, self.b, self.n_arc,
                                                 self.volume_h)
            kappas = list(self.kappas[:1]) or [self.kappa0]
        else:
            raise ConfigError("external-mesh runs need mesh_file plus a "
                              "curve file; not wired into solve yet")
        return fm.Workbench(part, vol, k0 if k0 is not None else self.kappa0,
                            kappas, self.medium(), quad=quad)


def export_csv(rows, header, path):
    """RFC-4180-style CSV with 17 significant digits."""
    rows = list(rows)
    width = len(header)
    for r in rows:
        if len(r) != width:
            raise ValueError("row width does not match header")
    with open(path, "w", newline="") as f:
        def fmt(v):
            if isinstance(v, (int, np.integer)):
                return str(int(v))
            if isinstance(v, str):
                return v
            return f"{float(v):.17g}"
        f.write(",".join(header) + "\r\n")
        for r in rows:
            f.write(",".join(fmt(v) for v in r) + "\r\n")


def read_csv(path):
    with open(path, newline="") as f:
        lines = [ln for ln in f.read().splitlines() if ln]
    header = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:]]
    return header, rows


def _threads_cap() -> int:
    raw = os.environ.get("THREADS")
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"THREADS must be a positive integer, got {raw!r}")
    if n <= 0:
        raise ConfigError(f"THREADS must be a positive integer, got {raw!r}")
    return n


def _probe_points(radius: float, n: int = 256):
    ang = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    return radius * np.column_stack([np.cos(ang), np.sin(ang)])


def cmd_verify(args) -> int:
    seed = 42
    if args.config:
        seed = RunConfig.load(args.config).seed
    results = vf.run_identity_suite(seed=seed)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def cmd_solve(args) -> int:
    cfg = RunConfig.load(args.config)
    wb = cfg.build()
    wave = cfg.wave()
    system = fm.assemble(args.formulation, wb, wave)
    bundle = fm.solve(system, wb, wave)
    pts = _probe_points(args.probe)
    vals = fm.reconstruct(bundle, pts)
    export_csv([(x, y, v.real, v.imag) for (x, y), v in zip(pts, vals)],
               ["x", "y", "re", "im"], f"{cfg.prefix}_probe.csv")
    # coarse field grid over the probe box, skipping near-interface points
    grid = np.linspace(-args.probe, args.probe, 41)
    gx, gy = np.meshgrid(grid, grid)
    gpts = np.column_stack([gx.ravel(), gy.ravel()])
    keep = _far_from_interfaces(wb, gpts)
    gv = fm.reconstruct(bundle, gpts[keep])
    export_csv([(x, y, v.real, v.imag)
                for (x, y), v in zip(gpts[keep], gv)],
               ["x", "y", "re", "im"], f"{cfg.prefix}_grid.csv")
    print(f"solved {args.formulation}: n = {system.layout.size}, "
          f"sigma_min = {bundle.sigma_min:.3e}, residual = {bundle.residual:.2e}")
    return 0


def _far_from_interfaces(wb, pts):
    keep = np.ones(len(pts), bool)
    for _, mesh in wb.part.region_meshes():
        from .bem import _PanelSet, _point_panel_distances
        t = _PanelSet(mesh)
        d = _point_panel_distances(pts, t).min(axis=1)
        keep &= d > 0.75 * float(np.max(mesh.lengths))
    return keep


def cmd_sweep(args) -> int:
    cfg = RunConfig.load(args.config)
    grid = np.linspace(args.kmin, args.kmax, args.steps)
    result = oc.sweep_sigma_min(args.formulation, lambda k0: cfg.build(k0=k0),
                                grid)
    export_csv([(r.k0, r.sigma_min, r.condition, r.kind)
                for r in result.rows],
               ["k0", "sigma_min", "condition", "kind"],
               f"{cfg.prefix}_sweep.csv")
    print(f"sweep written to {cfg.prefix}_sweep.csv")
    return 0


def cmd_converge(args) -> int:
    cfg = RunConfig.load(args.config)
    if cfg.geometry_kind not in ("concentric", "gap-demo"):
        raise ConfigError("converge needs the concentric oracle geometry")
    if cfg.kappa_sigma.split(":")[0] != "constant":
        raise ConfigError("converge needs constant kappa_sigma")
    ks = float(cfg.kappa_sigma.split(":")[1])
    wave = cfg.wave()
    mie = oc.mie_transmission(cfg.a, cfg.b, ks, cfg.kappas[0], cfg.kappa0,
                              wave, tol=cfg.mie_tol)

    def builder(level):
        sub = RunConfig(**{**cfg.__dict__,
                           "n_inner": cfg.n_inner * 2 ** level,
                           "n_outer": cfg.n_outer * 2 ** level})
        return sub.build()

    result = oc.convergence_study(args.formulation, builder, wave, mie,
                                  args.levels, args.probe)
    export_csv([(r.h, r.rel_l2_error) for r in result.rows],
               ["h", "rel_l2_error"], f"{cfg.prefix}_converge.csv")
    print(f"estimated order {result.estimated_order:.2f}; "
          f"table in {cfg.prefix}_converge.csv")
    return 0


def cmd_mie(args) -> int:
    cfg = RunConfig.load(args.config)
    if cfg.kappa_sigma.split(":")[0] != "constant":
        raise ConfigError("mie needs constant kappa_sigma")
    ks = float(cfg.kappa_sigma.split(":")[1])
    wave = cfg.wave()
    mie = oc.mie_transmission(cfg.a, cfg.b, ks, cfg.kappas[0], cfg.kappa0,
                              wave, tol=cfg.mie_tol)
    pts = _probe_points(args.probe)
    vals = mie.total_field(pts)
    export_csv([(x, y, v.real, v.imag) for (x, y), v in zip(pts, vals)],
               ["x", "y", "re", "im"], f"{cfg.prefix}_mie.csv")
    print(f"mie oracle (truncation {mie.truncation}) written to "
          f"{cfg.prefix}_mie.csv")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="fembem",
                                 description="2D Helmholtz multi-domain "
                                             "FEM-BEM workbench")
    sub = ap.add_subparsers(dest="command", required=True)
    pv = sub.add_parser("verify", help="run the operator identity suite")
    pv.add_argument("--config", default=None)
    ps = sub.add_parser("solve", help="assemble, solve, export fields")
    ps.add_argument("--config", required=True)
    ps.add_argument("--formulation", required=True, choices=fm.KINDS)
    ps.add_argument("--probe", type=float, default=3.0)
    pw = sub.add_parser("sweep", help="sigma_min over a wavenumber grid")
    pw.add_argument("--config", required=True)
    pw.add_argument("--formulation", required=True, choices=fm.KINDS)
    pw.add_argument("--kmin", type=float, required=True)
    pw.add_argument("--kmax", type=float, required=True)
    pw.add_argument("--steps", type=int, required=True)
    pc = sub.add_parser("converge", help="refinement study vs the oracle")
    pc.add_argument("--config", required=True)
    pc.add_argument("--formulation", required=True, choices=fm.KINDS)
    pc.add_argument("--levels", type=int, default=3)
    pc.add_argument("--probe", type=float, default=3.0)
    pm = sub.add_parser("mie", help="oracle-only evaluation")
    pm.add_argument("--config", required=True)
    pm.add_argument("--probe", type=float, default=3.0)
    args = ap.parse_args(argv)
    try:
        _threads_cap()
        np.random.seed(42)  # fixed base seed; suites use explicit RNGs
        handler = {"verify": cmd_verify, "solve": cmd_solve,
                   "sweep": cmd_sweep, "converge": cmd_converge,
                   "mie": cmd_mie}[args.command]
        return handler(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except fm.NearSingularSystemError as e:
        print(f"solve error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

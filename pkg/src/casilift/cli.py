"""Command-line interface: casilift <subcommand> --config FILE --out DIR.

Subcommands
-----------
materials tabulate   permittivity tables (CSV per material)
pressure             Casimir pressure/energy over the (d, T) grids
landscape            total energy and force over the (d, T) grids
sweep                equilibrium branches vs temperature + bifurcations
boltzmann            Boltzmann statistics of the suspended object vs T

Exit codes: 0 success, 2 configuration/validation error, 3 numerical failure.
"""

import argparse
import os
import sys

import numpy as np

from . import __version__
from . import brownian as br
from . import landscape as ld
from . import lifshitz as lz
from .config import load_config
from .errors import ConfigError, DomainError, NumericalError
from .materials import tabulate
from .runner import Manifest, TaskError, parallel_map, write_csv
from .stratified import KERNEL_ENERGY, KERNEL_PRESSURE

_CACHE_D_CAP = 1.0e-4


def _cache_range(cfg):
    lo, hi = cfg.d_range
    return (max(lo * 0.5, 1e-10), min(max(hi * 4.0, 2.0e-5), _CACHE_D_CAP))


class _PressureTask:
    """Per-temperature pressure/energy rows (picklable for worker pools)."""

    def __init__(self, cfg, use_cache):
        self.case = cfg.case
        self.separations = np.asarray(cfg.separations)
        self.truncation = cfg.tolerances.matsubara_truncation
        self.rtol = cfg.tolerances.quadrature_rel
        self.d_range = _cache_range(cfg)
        self.use_cache = use_cache

    def __call__(self, T):
        cache = lz.ReflectionCache(enabled=self.use_cache, d_range=self.d_range)
        rows = []
        thermal = lz.ThermalSpec(T, truncation=self.truncation)
        for d in self.separations:
            try:
                gap = self.case.gap(float(d))
                res = lz.spectral_sum(gap, thermal,
                                      (KERNEL_PRESSURE, KERNEL_ENERGY),
                                      cache=cache, rtol=self.rtol)
            except NumericalError as exc:
                raise TaskError(str(exc), {"T_K": T, "d_m": float(d)}) from exc
            rows.append((float(d), float(T),
                         res[KERNEL_PRESSURE].value, res[KERNEL_ENERGY].value,
                         res[KERNEL_PRESSURE].n_terms_used))
        return rows


class _LandscapeTask:
    def __init__(self, cfg, use_cache):
        self.case = cfg.case
        self.separations = np.asarray(cfg.separations)
        self.truncation = cfg.tolerances.matsubara_truncation
        self.rtol = cfg.tolerances.quadrature_rel
        self.d_range = _cache_range(cfg)
        self.use_cache = use_cache

    def __call__(self, T):
        cache = lz.ReflectionCache(enabled=self.use_cache, d_range=self.d_range)
        try:
            u = ld.total_energy(self.case, self.separations, T, cache=cache,
                                rtol=self.rtol, truncation=self.truncation)
            f = ld.total_force(self.case, self.separations, T, cache=cache,
                               rtol=self.rtol, truncation=self.truncation)
        except NumericalError as exc:
            raise TaskError(str(exc), {"T_K": T}) from exc
        return [(float(d), float(T), float(ui), float(fi))
                for d, ui, fi in zip(self.separations, u, f)]


class _BoltzmannTask:
    def __init__(self, cfg, use_cache):
        self.case = cfg.case
        self.d_range_scan = cfg.d_range
        self.n_scan = cfg.n_scan
        self.truncation = cfg.tolerances.matsubara_truncation
        self.rtol = cfg.tolerances.quadrature_rel
        self.cache_range = _cache_range(cfg)
        self.use_cache = use_cache

    def __call__(self, T):
        cache = lz.ReflectionCache(enabled=self.use_cache, d_range=self.cache_range)
        try:
            stats = br.boltzmann_stats(self.case, T, T, d_range=self.d_range_scan,
                                       cache=cache, rtol=self.rtol,
                                       truncation=self.truncation)
        except NumericalError as exc:
            raise TaskError(str(exc), {"T_K": T}) from exc
        return (float(T), stats.mean_d, stats.q025, stats.q975, stats.barrier_in)


class _CacheFactory:
    def __init__(self, enabled, d_range):
        self.enabled = enabled
        self.d_range = d_range

    def __call__(self):
        return lz.ReflectionCache(enabled=self.enabled, d_range=self.d_range)


def _run_materials(cfg, args, manifest, out_dir):
    if not cfg.tabulate_materials:
        raise ConfigError("materials.tabulate lists no materials")
    for name in cfg.tabulate_materials:
        mat = cfg.materials[name]
        if mat.is_metallic and cfg.xi_grid[0] == 0.0:
            raise ConfigError(f"material {name!r} is metallic; xi grid must not include 0")
        rows = tabulate(mat, cfg.xi_grid)
        path = os.path.join(out_dir, f"materials_{name}.csv")
        checksum = write_csv(path, ["xi_rad_s", "eps", "matsubara_K"], rows)
        manifest.add_output(path, checksum)
    return 0


def _run_pressure(cfg, args, manifest, out_dir):
    if cfg.case is None:
        raise ConfigError("pressure needs a case definition")
    task = _PressureTask(cfg, not args.no_cache)
    results = parallel_map(task, list(cfg.temperatures), args.workers)
    rows = [row for chunk in results for row in chunk]
    path = os.path.join(out_dir, "pressure.csv")
    checksum = write_csv(path, ["d_m", "T_K", "pressure_Pa", "energy_J_m2", "n_terms"], rows)
    manifest.add_output(path, checksum)
    return 0


def _run_landscape(cfg, args, manifest, out_dir):
    if cfg.case is None:
        raise ConfigError("landscape needs a case definition")
    task = _LandscapeTask(cfg, not args.no_cache)
    results = parallel_map(task, list(cfg.temperatures), args.workers)
    rows = [row for chunk in results for row in chunk]
    path = os.path.join(out_dir, "landscape.csv")
    checksum = write_csv(path, ["d_m", "T_K", "total_energy_J", "total_force_N"], rows)
    manifest.add_output(path, checksum)
    manifest.add_metadata("force_convention", "positive = repulsive (pushes apart)")
    return 0


def _run_sweep(cfg, args, manifest, out_dir):
    if cfg.case is None:
        raise ConfigError("sweep needs a case definition")
    factory = _CacheFactory(not args.no_cache, _cache_range(cfg))
    task = ld._EquilibriaTask(cfg.case, cfg.d_range, cfg.n_scan,
                              cfg.tolerances.quadrature_rel,
                              cfg.tolerances.matsubara_truncation)
    task_cached = _SweepScanTask(task, factory)

    def map_fn(fn, temps):
        return parallel_map(task_cached, list(temps), args.workers)

    branches, bifurcations = ld.sweep_temperature(
        cfg.case, list(cfg.temperatures), cfg.d_range, cfg.n_scan,
        bif_resolution_K=cfg.tolerances.bifurcation_K, map_fn=map_fn,
        cache_factory=factory, rtol=cfg.tolerances.quadrature_rel,
        truncation=cfg.tolerances.matsubara_truncation)

    rows = []
    for b in branches:
        for T, d in zip(b.temperatures, b.separations):
            rows.append((T, b.id, d, b.stability))
    rows.sort(key=lambda r: (r[0], r[1]))
    path = os.path.join(out_dir, "branches.csv")
    manifest.add_output(path, write_csv(path, ["T_K", "branch_id", "d_c_m", "stability"], rows))
    if not rows:
        print("warning: no equilibria found in the scanned range", file=sys.stderr)
    brows = [(b.T_c, b.d_merge, b.branch_a, b.branch_b) for b in bifurcations]
    path = os.path.join(out_dir, "bifurcations.csv")
    manifest.add_output(path, write_csv(path, ["T_c_K", "d_merge_m", "branch_a", "branch_b"], brows))
    manifest.add_metadata("force_convention", "positive = repulsive (pushes apart)")
    return 0


class _SweepScanTask:
    def __init__(self, task, factory):
        self.task = task
        self.factory = factory

    def __call__(self, T):
        try:
            return ld.find_equilibria(self.task.case, T, self.task.d_range,
                                      self.task.n_scan, cache=self.factory(),
                                      rtol=self.task.rtol,
                                      truncation=self.task.truncation)
        except NumericalError as exc:
            raise TaskError(str(exc), {"T_K": T}) from exc


def _run_boltzmann(cfg, args, manifest, out_dir):
    if cfg.case is None:
        raise ConfigError("boltzmann needs a case definition")
    task = _BoltzmannTask(cfg, not args.no_cache)
    rows = parallel_map(task, list(cfg.temperatures), args.workers)
    path = os.path.join(out_dir, "boltzmann.csv")
    manifest.add_output(path, write_csv(
        path, ["T_K", "mean_d_m", "q025_m", "q975_m", "barrier_contact_kT"], rows))
    if cfg.frozen_T is not None:
        cache = lz.ReflectionCache(enabled=not args.no_cache, d_range=_cache_range(cfg))
        pts = br.counterfactual_mean(cfg.case, cfg.frozen_T, list(cfg.temperatures),
                                     d_range=cfg.d_range, cache=cache,
                                     rtol=cfg.tolerances.quadrature_rel,
                                     truncation=cfg.tolerances.matsubara_truncation)
        path = os.path.join(out_dir, "counterfactual.csv")
        manifest.add_output(path, write_csv(path, ["ensemble_T_K", "mean_d_m"], pts))
        manifest.add_metadata("counterfactual_frozen_T_K", cfg.frozen_T)
    return 0


_COMMANDS = {
    "materials": _run_materials,
    "pressure": _run_pressure,
    "landscape": _run_landscape,
    "sweep": _run_sweep,
    "boltzmann": _run_boltzmann,
}


def _build_parser():
    parser = argparse.ArgumentParser(prog="casilift",
                                     description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="run configuration JSON")
        p.add_argument("--out", default="casilift_out", help="output directory")
        p.add_argument("--workers", type=int, default=None,
                       help="worker processes (default: CASILIFT_WORKERS or config)")
        p.add_argument("--no-cache", action="store_true",
                       help="disable reflection-product caching")
        p.add_argument("--verbose", action="store_true")

    p = sub.add_parser("materials", help="material utilities")
    p.add_argument("action", choices=["tabulate"])
    common(p)
    for name in ("pressure", "landscape", "sweep", "boltzmann"):
        common(sub.add_parser(name, help=f"run the {name} computation"))
    return parser


def run(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.workers is None:
        env = os.environ.get("CASILIFT_WORKERS")
        args.workers = int(env) if env else cfg.workers
    if args.workers < 1:
        print("error: workers must be >= 1", file=sys.stderr)
        return 2

    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    manifest = Manifest(cfg, [args.command] + (argv or sys.argv[1:]), __version__)

    if args.verbose:
        print(f"casilift {args.command}: {cfg.temperatures.size} temperatures, "
              f"{cfg.separations.size} separations, workers={args.workers}",
              file=sys.stderr)
    try:
        code = _COMMANDS[args.command](cfg, args, manifest, out_dir)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, TaskError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    manifest.write(out_dir)
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()

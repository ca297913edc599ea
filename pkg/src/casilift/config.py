"""Run configuration: JSON with explicit unit suffixes on physical fields.

A run configuration names materials from a library file, defines the
suspension case (stacks, fluid, gravity, geometry), and supplies the
temperature / separation grids and tolerances. Everything is validated
before any computation starts.
"""

import json
import os
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import ConfigError
from .landscape import PlateCase, SlabGravity, SphereCase, SphereGravity
from .materials import load_material_library
from .stratified import Layer, Stack


def bundled_materials_path():
    """Path of the material library shipped with the package."""
    return str(resources.files("casilift").joinpath("data/materials.json"))


def _grid(node, what, allow_log=True):
    if node is None:
        raise ConfigError(f"missing grid specification for {what}")
    if "values" in node:
        vals = [float(v) for v in node["values"]]
        if not vals:
            raise ConfigError(f"{what}: grid must be nonempty")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ConfigError(f"{what}: grid values must be strictly increasing")
        return np.asarray(vals)
    try:
        start, stop = float(node["start"]), float(node["stop"])
        count = int(node["count"])
    except KeyError as exc:
        raise ConfigError(f"{what}: grid needs values or start/stop/count ({exc})") from exc
    if count < 1 or stop < start:
        raise ConfigError(f"{what}: need count >= 1 and stop >= start")
    spacing = node.get("spacing", "linear")
    if spacing == "log":
        if not allow_log or start <= 0:
            raise ConfigError(f"{what}: log spacing needs positive start")
        return np.geomspace(start, stop, count)
    if spacing != "linear":
        raise ConfigError(f"{what}: unknown spacing {spacing!r}")
    return np.linspace(start, stop, count)


@dataclass
class Tolerances:
    matsubara_truncation: float = 1.0e-10
    quadrature_rel: float = 1.0e-9
    bifurcation_K: float = 0.02


@dataclass
class RunConfig:
    case: object               # PlateCase | SphereCase
    temperatures: np.ndarray   # K
    separations: np.ndarray    # m
    tolerances: Tolerances
    workers: int
    n_scan: int
    materials: dict
    tabulate_materials: list
    xi_grid: np.ndarray
    frozen_T: float | None
    fluid_liquid_range: tuple | None
    raw_bytes: bytes
    path: str

    @property
    def d_range(self):
        return float(self.separations.min()), float(self.separations.max())


def _build_stack(node, library, where):
    if node is None:
        raise ConfigError(f"{where}: missing stack definition")
    terminal = node.get("terminal")
    if terminal not in library:
        raise ConfigError(f"{where}: unknown terminal material {terminal!r}")
    layers = []
    for i, lay in enumerate(node.get("layers", [])):
        name = lay.get("material")
        if name not in library:
            raise ConfigError(f"{where}.layers[{i}]: unknown material {name!r}")
        try:
            layers.append(Layer(library[name], float(lay["thickness_m"])))
        except KeyError:
            raise ConfigError(f"{where}.layers[{i}]: missing thickness_m")
    return Stack(terminal=library[terminal], layers=tuple(layers))


def _build_case(node, library):
    kind = node.get("type")
    fluid_name = node.get("fluid")
    if fluid_name not in library:
        raise ConfigError(f"case: unknown fluid material {fluid_name!r}")
    fluid = library[fluid_name]
    if kind == "plate":
        left = _build_stack(node.get("left"), library, "case.left")
        right = _build_stack(node.get("right"), library, "case.right")
        gravity = None
        if "gravity" in node:
            g = node["gravity"]
            gravity = SlabGravity(
                delta_rho=float(g["delta_rho_kg_m3"]),
                thickness=float(g["thickness_m"]),
                **({"g": float(g["g_m_s2"])} if "g_m_s2" in g else {}),
            )
        return PlateCase(left=left, right=right, fluid=fluid,
                         area=float(node.get("area_m2", 1.0)), gravity=gravity)
    if kind == "sphere":
        substrate = _build_stack(node.get("substrate"), library, "case.substrate")
        shell_name = node.get("shell_material")
        if shell_name not in library:
            raise ConfigError(f"case: unknown shell material {shell_name!r}")
        interior = None
        if "interior_material" in node:
            iname = node["interior_material"]
            if iname not in library:
                raise ConfigError(f"case: unknown interior material {iname!r}")
            interior = library[iname]
        gravity = None
        if "gravity" in node:
            g = node["gravity"]
            kwargs = {
                "rho_shell": float(g["rho_shell_kg_m3"]),
                "rho_fluid": float(g["rho_fluid_kg_m3"]),
            }
            if "rho_interior_kg_m3" in g:
                kwargs["rho_interior"] = float(g["rho_interior_kg_m3"])
            if "g_m_s2" in g:
                kwargs["g"] = float(g["g_m_s2"])
            gravity = SphereGravity(**kwargs)
        return SphereCase(substrate=substrate, shell=library[shell_name],
                          r_inner=float(node["r_inner_m"]),
                          R_outer=float(node["R_outer_m"]),
                          fluid=fluid, interior=interior, gravity=gravity)
    raise ConfigError(f"case: unknown type {kind!r} (use 'plate' or 'sphere')")


def load_config(path):
    """Parse and validate a run configuration file."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc

    mats_path = doc.get("materials_path")
    if mats_path is None:
        mats_path = bundled_materials_path()
    elif not os.path.isabs(mats_path):
        mats_path = os.path.join(os.path.dirname(os.path.abspath(path)), mats_path)
    library = load_material_library(mats_path)

    case = None
    if "case" in doc:
        case = _build_case(doc["case"], library)

    tol_node = doc.get("tolerances", {})
    tolerances = Tolerances(
        matsubara_truncation=float(tol_node.get("matsubara_truncation", 1.0e-10)),
        quadrature_rel=float(tol_node.get("quadrature_rel", 1.0e-9)),
        bifurcation_K=float(tol_node.get("bifurcation_K", 0.02)),
    )
    if not (0 < tolerances.matsubara_truncation < 1):
        raise ConfigError("tolerances.matsubara_truncation must lie in (0,1)")

    temperatures = (_grid(doc.get("temperatures_K"), "temperatures_K")
                    if "temperatures_K" in doc else np.asarray([300.0]))
    if np.any(temperatures < 0):
        raise ConfigError("temperatures_K must be >= 0")
    separations = (_grid(doc.get("separations_m"), "separations_m")
                   if "separations_m" in doc else np.geomspace(1e-8, 5e-6, 200))
    if np.any(separations <= 0):
        raise ConfigError("separations_m must be > 0")

    mat_node = doc.get("materials", {})
    tab_names = list(mat_node.get("tabulate", []))
    for name in tab_names:
        if name not in library:
            raise ConfigError(f"materials.tabulate: unknown material {name!r}")
    xi_grid = (_grid(mat_node.get("xi_grid_rad_s"), "materials.xi_grid_rad_s")
               if "xi_grid_rad_s" in mat_node else np.geomspace(1e12, 1e17, 101))

    frozen = doc.get("boltzmann", {}).get("frozen_T_K")
    frozen = float(frozen) if frozen is not None else None

    liquid = doc.get("fluid_liquid_range_K")
    if liquid is not None:
        liquid = (float(liquid[0]), float(liquid[1]))

    workers = int(doc.get("workers", 1))
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    n_scan = int(doc.get("scan", {}).get("n_scan", 200))
    if n_scan < 16:
        raise ConfigError("scan.n_scan must be >= 16")

    return RunConfig(case=case, temperatures=temperatures, separations=separations,
                     tolerances=tolerances, workers=workers, n_scan=n_scan,
                     materials=library, tabulate_materials=tab_names,
                     xi_grid=xi_grid, frozen_T=frozen,
                     fluid_liquid_range=liquid, raw_bytes=raw,
                     path=os.path.abspath(path))

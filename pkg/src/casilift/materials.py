"""Permittivity models on the imaginary-frequency axis and the material library.

Every model evaluates the relative permittivity eps(i*xi) for xi >= 0 in rad/s.
On the imaginary axis eps is real, >= 1 and monotonically nonincreasing for
passive media; metals (Drude) diverge as xi -> 0 and report a metallic static
limit instead of a number.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .constants import E_CHARGE, EPS0, EV_TO_RAD_S, HBAR, KB, M_ELECTRON
from .errors import ConfigError, DomainError, StaticMetalError

METALLIC = math.inf  # static_limit marker for metals


def _as_array(xi):
    xi = np.asarray(xi, dtype=float)
    if np.any(xi < 0):
        raise DomainError("imaginary frequency must be >= 0")
    return xi


@dataclass(frozen=True)
class ConstantModel:
    """Dispersionless medium, eps(i*xi) = eps for all xi."""

    eps: float

    def __post_init__(self):
        if self.eps < 1.0:
            raise ConfigError(f"constant permittivity must be >= 1, got {self.eps}")

    def eps_at(self, xi):
        xi = _as_array(xi)
        return np.full_like(xi, self.eps)

    def static(self):
        return self.eps


@dataclass(frozen=True)
class DrudeModel:
    """Free-carrier response eps_bg(i*xi) + omega_p^2 / (xi*(xi+gamma)).

    eps_background may be a plain float or any other model instance (e.g. an
    oscillator core for doped semiconductors).
    """

    omega_p: float           # plasma frequency, rad/s
    gamma: float             # relaxation rate, rad/s
    eps_background: object = 1.0

    def __post_init__(self):
        if self.omega_p <= 0 or self.gamma <= 0:
            raise ConfigError("Drude omega_p and gamma must be > 0")

    def _bg(self, xi):
        if isinstance(self.eps_background, (int, float)):
            return float(self.eps_background) * np.ones_like(xi)
        return self.eps_background.eps_at(xi)

    def eps_at(self, xi):
        xi = _as_array(xi)
        if np.any(xi == 0):
            raise StaticMetalError(
                "Drude model diverges at xi=0; use static_limit()"
            )
        return self._bg(xi) + self.omega_p**2 / (xi * (xi + self.gamma))

    def static(self):
        return METALLIC


@dataclass(frozen=True)
class OscillatorModel:
    """Sum of undamped/damped Lorentz oscillators.

    eps(i*xi) = eps_inf + sum_j C_j w_j^2 / (w_j^2 + xi^2 + g_j*xi)
    """

    eps_inf: float
    terms: tuple  # of (C, omega, g) triples

    def __post_init__(self):
        if self.eps_inf < 1.0:
            raise ConfigError(f"eps_inf must be >= 1, got {self.eps_inf}")
        norm = []
        for t in self.terms:
            c, w = float(t[0]), float(t[1])
            g = float(t[2]) if len(t) > 2 else 0.0
            if c <= 0 or w <= 0 or g < 0:
                raise ConfigError(f"bad oscillator term {t}: need C>0, omega>0, g>=0")
            norm.append((c, w, g))
        object.__setattr__(self, "terms", tuple(norm))

    def eps_at(self, xi):
        xi = _as_array(xi)
        out = np.full_like(xi, self.eps_inf)
        for c, w, g in self.terms:
            out += c * w * w / (w * w + xi * xi + g * xi)
        return out

    def static(self):
        return self.eps_inf + sum(c for c, _, _ in self.terms)


@dataclass(frozen=True)
class TabulatedModel:
    """Log-log linear interpolation through (xi, eps) samples.

    Below the first node and above the last node the boundary value is held.
    """

    points: tuple  # of (xi, eps), strictly increasing in xi

    def __post_init__(self):
        pts = tuple((float(x), float(e)) for x, e in self.points)
        if len(pts) < 2:
            raise ConfigError("tabulated model needs at least 2 points")
        xs = [p[0] for p in pts]
        if any(x <= 0 for x in xs):
            raise ConfigError("tabulated xi values must be > 0")
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ConfigError("tabulated xi values must be strictly increasing")
        if any(p[1] < 1.0 for p in pts):
            raise ConfigError("tabulated eps values must be >= 1")
        object.__setattr__(self, "points", pts)

    def eps_at(self, xi):
        xi = _as_array(xi)
        lx = np.log(np.asarray([p[0] for p in self.points]))
        le = np.log(np.asarray([p[1] for p in self.points]))
        scalar_zero_safe = np.where(xi > 0, xi, self.points[0][0])
        out = np.exp(np.interp(np.log(scalar_zero_safe), lx, le))
        return out

    def static(self):
        return self.points[0][1]


@dataclass(frozen=True)
class IdealMetalModel:
    """Perfect mirror: |r| = 1 at every frequency.

    Not a permittivity in the usual sense; the reflection code special-cases
    it (TM -> +1, TE -> -1 at xi > 0; TM -> 1, TE -> 0 at xi = 0).
    """

    def eps_at(self, xi):
        raise StaticMetalError("ideal metal has no finite permittivity")

    def static(self):
        return METALLIC


@dataclass(frozen=True)
class Material:
    """A named permittivity model."""

    name: str
    model: object

    def eps(self, xi):
        """eps(i*xi); xi in rad/s, scalar or array."""
        out = self.model.eps_at(xi)
        if out.ndim == 0:
            return float(out)
        return out

    @property
    def is_metallic(self):
        return self.model.static() == METALLIC

    @property
    def is_ideal_metal(self):
        return isinstance(self.model, IdealMetalModel)


def permittivity(material, xi):
    """Relative permittivity eps(i*xi) of a material at xi >= 0 rad/s.

    Raises StaticMetalError for a Drude/ideal metal at xi = 0 and DomainError
    for negative xi.
    """
    return material.eps(xi)


def static_limit(material):
    """eps(0), or the METALLIC marker (math.inf) for Drude/ideal metals."""
    return material.model.static()


def drude_from_doping(rho_d_cm3, m_eff, mobility, eps_background=1.0):
    """Drude parameters from carrier density, effective mass and mobility.

    rho_d_cm3 : carrier density in cm^-3
    m_eff     : effective mass in kg
    mobility  : drift mobility in m^2/(V s)

    omega_p = sqrt(rho_d e^2 / (eps0 m_eff)), gamma = e / (m_eff mobility).
    """
    if rho_d_cm3 <= 0 or m_eff <= 0 or mobility <= 0:
        raise DomainError("doping density, effective mass and mobility must be > 0")
    rho_m3 = rho_d_cm3 * 1e6
    omega_p = math.sqrt(rho_m3 * E_CHARGE**2 / (EPS0 * m_eff))
    gamma = E_CHARGE / (m_eff * mobility)
    return DrudeModel(omega_p=omega_p, gamma=gamma, eps_background=eps_background)


def matsubara_temperature(xi):
    """Temperature whose first Matsubara frequency equals xi: T = hbar*xi/(2*pi*k_B)."""
    return HBAR * np.asarray(xi, dtype=float) / (2.0 * math.pi * KB)


def tabulate(material, xi_grid):
    """Rows of (xi, eps(i*xi), Matsubara temperature in K) over a sorted grid.

    xi = 0 is allowed only for non-metallic materials.
    """
    xi_grid = np.asarray(xi_grid, dtype=float)
    if xi_grid.size == 0:
        return []
    if np.any(np.diff(xi_grid) < 0):
        raise DomainError("xi grid must be sorted ascending")
    rows = []
    for xi in xi_grid:
        rows.append((float(xi), float(material.eps(xi)), float(matsubara_temperature(xi))))
    return rows


# --- material library file handling -----------------------------------------

_UNIT_SCALE = {"rad_s": 1.0, "eV": EV_TO_RAD_S}

# fields holding frequencies, scaled by the entry's declared unit
_FREQ_FIELDS_DRUDE = ("omega_p", "gamma")


def _scale(value, unit):
    return float(value) * _UNIT_SCALE[unit]


def _model_from_entry(entry, where):
    kind = entry.get("model")
    unit = entry.get("unit", "rad_s")
    if unit not in _UNIT_SCALE:
        raise ConfigError(f"{where}: unknown unit {unit!r} (use 'rad_s' or 'eV')")
    if kind == "constant":
        return ConstantModel(eps=float(entry["eps"]))
    if kind == "oscillators":
        terms = tuple(
            (float(t["C"]), _scale(t["omega"], unit), _scale(t.get("g", 0.0), unit))
            for t in entry["terms"]
        )
        return OscillatorModel(eps_inf=float(entry.get("eps_inf", 1.0)), terms=terms)
    if kind == "drude":
        bg = entry.get("eps_background", 1.0)
        if isinstance(bg, dict):
            bg = _model_from_entry(bg, where + ".eps_background")
        else:
            bg = float(bg)
        if "doping" in entry:
            d = entry["doping"]
            m_eff = float(d.get("m_eff_ratio", 1.0)) * M_ELECTRON
            model = drude_from_doping(
                rho_d_cm3=float(d["rho_d_cm3"]),
                m_eff=m_eff,
                mobility=float(d["mobility_m2_Vs"]),
                eps_background=bg,
            )
            return model
        return DrudeModel(
            omega_p=_scale(entry["omega_p"], unit),
            gamma=_scale(entry["gamma"], unit),
            eps_background=bg,
        )
    if kind == "table":
        pts = tuple((_scale(p[0], unit), float(p[1])) for p in entry["points"])
        return TabulatedModel(points=pts)
    if kind == "ideal_metal":
        return IdealMetalModel()
    raise ConfigError(f"{where}: unknown model tag {kind!r}")


def load_material_library(path):
    """Load a named material map from a JSON library file.

    Returns a dict name -> Material. Every entry is validated on load;
    duplicate names and unknown model tags are rejected.
    """
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read material library {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"material library {path} is not valid JSON "
            f"(line {exc.lineno}, column {exc.colno}): {exc.msg}"
        ) from exc

    entries = doc.get("materials", [])
    library = {}
    for i, entry in enumerate(entries):
        where = f"{path}: materials[{i}]"
        name = entry.get("name")
        if not name:
            raise ConfigError(f"{where}: missing material name")
        if name in library:
            raise ConfigError(f"{where}: duplicate material name {name!r}")
        try:
            model = _model_from_entry(entry, where)
        except KeyError as exc:
            raise ConfigError(f"{where} ({name}): missing field {exc}") from exc
        except ConfigError as exc:
            raise ConfigError(f"{where} ({name}): {exc}") from exc
        library[name] = Material(name=name, model=model)
    return library


def _entry_from_model(model):
    if isinstance(model, ConstantModel):
        return {"model": "constant", "eps": model.eps}
    if isinstance(model, OscillatorModel):
        return {
            "model": "oscillators",
            "unit": "rad_s",
            "eps_inf": model.eps_inf,
            "terms": [{"C": c, "omega": w, "g": g} for c, w, g in model.terms],
        }
    if isinstance(model, DrudeModel):
        entry = {
            "model": "drude",
            "unit": "rad_s",
            "omega_p": model.omega_p,
            "gamma": model.gamma,
        }
        bg = model.eps_background
        entry["eps_background"] = bg if isinstance(bg, (int, float)) else _entry_from_model(bg)
        return entry
    if isinstance(model, TabulatedModel):
        return {"model": "table", "unit": "rad_s", "points": [list(p) for p in model.points]}
    if isinstance(model, IdealMetalModel):
        return {"model": "ideal_metal"}
    raise ConfigError(f"cannot serialize model {type(model).__name__}")


def dump_material_library(library, path):
    """Write a material map back to a JSON library file (round-trip safe)."""
    doc = {"materials": []}
    for name in library:
        entry = {"name": name}
        entry.update(_entry_from_model(library[name].model))
        doc["materials"].append(entry)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")

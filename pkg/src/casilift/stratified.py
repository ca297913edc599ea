"""Reflection of layered half-spaces on the imaginary-frequency axis.

Conventions
-----------
* kappa(eps, xi, k) = sqrt(k^2 + eps*xi^2/c^2) is the imaginary-axis decay
  constant in a medium of permittivity eps.
* Fresnel amplitudes are taken from the gap fluid into the stack; "TM"
  carries the permittivity weighting, "TE" does not.
* At xi = 0 every nonmagnetic TE reflection vanishes and metallic media
  reflect TM waves perfectly (Drude prescription).
* Attractive contributions are positive in the pressure integrand f_P and
  binding contributions negative in the energy integrand f_E.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import spence

from .constants import C, HBAR
from .errors import ConfigError, DomainError
from .materials import METALLIC, Material, static_limit


class Polarization(Enum):
    TE = "TE"
    TM = "TM"


@dataclass(frozen=True)
class Layer:
    material: Material
    thickness: float  # m

    def __post_init__(self):
        if not (self.thickness > 0 and math.isfinite(self.thickness)):
            raise ConfigError(f"layer thickness must be finite and > 0, got {self.thickness}")
        if self.material.is_ideal_metal:
            raise ConfigError("ideal metal is only supported as a terminal half-space")


@dataclass(frozen=True)
class Stack:
    """Finite layers (gap-adjacent first) in front of a semi-infinite terminal."""

    terminal: Material
    layers: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))

    def media(self):
        return [lay.material for lay in self.layers] + [self.terminal]

    def signature(self):
        return (
            tuple((lay.material.name, lay.material.model, lay.thickness) for lay in self.layers),
            (self.terminal.name, self.terminal.model),
        )


@dataclass(frozen=True)
class GapGeometry:
    left: Stack
    right: Stack
    fluid: Material
    separation: float  # m

    def __post_init__(self):
        if not self.separation > 0:
            raise ConfigError(f"separation must be > 0, got {self.separation}")
        if self.fluid.is_metallic:
            raise ConfigError("gap fluid must be non-metallic")

    def at(self, separation):
        return GapGeometry(self.left, self.right, self.fluid, separation)

    def signature(self):
        return (self.left.signature(), self.right.signature(),
                (self.fluid.name, self.fluid.model))


def kappa(eps, xi, k):
    """Imaginary-axis decay constant sqrt(k^2 + eps*xi^2/c^2), 1/m."""
    if xi < 0 or k < 0:
        raise DomainError("xi and k must be >= 0")
    if xi == 0 and k == 0:
        raise DomainError("kappa undefined at xi = k = 0")
    return math.sqrt(k * k + eps * (xi / C) ** 2)


def fresnel(pol, eps_in, kappa_in, eps_out, kappa_out):
    """Single-interface Fresnel amplitude on the imaginary axis.

    TE: (kappa_in - kappa_out) / (kappa_in + kappa_out)
    TM: (eps_out*kappa_in - eps_in*kappa_out) / (eps_out*kappa_in + eps_in*kappa_out)
    """
    if pol is Polarization.TE or pol == "TE":
        return (kappa_in - kappa_out) / (kappa_in + kappa_out)
    return (eps_out * kappa_in - eps_in * kappa_out) / (eps_out * kappa_in + eps_in * kappa_out)


# --- vectorized reflection over arrays of kappa_fluid -------------------------


def _stack_reflection_arrays(stack, eps_fluid, xi, k2):
    """(r_TE, r_TM) of a stack at fixed xi > 0 over an array of k^2 values.

    k2 is the squared transverse wavenumber array; all media kappas follow
    from kappa_i^2 = k^2 + eps_i*(xi/c)^2.
    """
    xic2 = (xi / C) ** 2
    kap_prev = np.sqrt(k2 + eps_fluid * xic2)
    eps_prev = eps_fluid

    media = stack.media()
    # kappa and eps per medium, gap-adjacent first
    kaps, epss, metal_flags = [], [], []
    for m in media:
        if m.is_ideal_metal:
            kaps.append(None)
            epss.append(None)
            metal_flags.append(True)
        else:
            e = m.eps(xi)
            epss.append(e)
            kaps.append(np.sqrt(k2 + e * xic2))
            metal_flags.append(False)

    def interface(ei, ki, j):
        # from medium (ei, ki) into media[j]
        if metal_flags[j]:
            ones = np.ones_like(ki)
            return -ones, ones
        eo, ko = epss[j], kaps[j]
        r_te = (ki - ko) / (ki + ko)
        r_tm = (eo * ki - ei * ko) / (eo * ki + ei * ko)
        return r_te, r_tm

    n = len(media)
    # innermost interface: last finite layer (or fluid) into terminal
    if n == 1:
        return interface(eps_prev, kap_prev, 0)
    r_te, r_tm = interface(epss[n - 2], kaps[n - 2], n - 1)
    for j in range(n - 2, -1, -1):
        # propagate through layer j, then cross the interface into it
        decay = np.exp(-2.0 * kaps[j] * stack.layers[j].thickness)
        if j == 0:
            ei, ki = eps_prev, kap_prev
        else:
            ei, ki = epss[j - 1], kaps[j - 1]
        rho_te, rho_tm = interface(ei, ki, j)
        r_te = (rho_te + r_te * decay) / (1.0 + rho_te * r_te * decay)
        r_tm = (rho_tm + r_tm * decay) / (1.0 + rho_tm * r_tm * decay)
    return r_te, r_tm


def _static_rho_tm(eps_in, eps_out):
    if eps_out == METALLIC:
        return 0.0 if eps_in == METALLIC else 1.0
    if eps_in == METALLIC:
        return -1.0
    return (eps_out - eps_in) / (eps_out + eps_in)


def _stack_reflection_static_tm(stack, eps_fluid_0, k):
    """Zero-frequency TM reflection over an array of k values (Drude rule)."""
    media = stack.media()
    eps0 = [static_limit(m) for m in media]
    n = len(media)
    if n == 1:
        return np.full_like(k, _static_rho_tm(eps_fluid_0, eps0[0]))
    r = np.full_like(k, _static_rho_tm(eps0[n - 2], eps0[n - 1]))
    for j in range(n - 2, -1, -1):
        decay = np.exp(-2.0 * k * stack.layers[j].thickness)
        ei = eps_fluid_0 if j == 0 else eps0[j - 1]
        rho = _static_rho_tm(ei, eps0[j])
        r = (rho + r * decay) / (1.0 + rho * r * decay)
    return r


def stack_reflection(stack, fluid, xi, k, pol):
    """Reflection coefficient of a layered stack seen from the fluid.

    Computed by backward recursion from the terminal half-space,
    r_j = (rho_j + r_{j+1} e^{-2 kappa_j t_j}) / (1 + rho_j r_{j+1} e^{-2 kappa_j t_j}).
    """
    if xi <= 0:
        raise DomainError("stack_reflection needs xi > 0; use zero_frequency_reflection")
    k2 = np.asarray([float(k) ** 2])
    r_te, r_tm = _stack_reflection_arrays(stack, fluid.eps(xi), xi, k2)
    pol = Polarization(pol) if not isinstance(pol, Polarization) else pol
    return float(r_te[0] if pol is Polarization.TE else r_tm[0])


def zero_frequency_reflection(stack, fluid, k, pol):
    """xi = 0 limit: TE vanishes, TM uses static permittivities (metals -> 1)."""
    if k <= 0:
        raise DomainError("zero-frequency reflection needs k > 0")
    pol = Polarization(pol) if not isinstance(pol, Polarization) else pol
    if pol is Polarization.TE:
        return 0.0
    eps_f0 = static_limit(fluid)
    return float(_stack_reflection_static_tm(stack, eps_f0, np.asarray([float(k)]))[0])


def predict_sign(eps1, eps_fluid, eps2):
    """Sign of the per-frequency force between half-spaces across a fluid.

    -1 (repulsive) iff the fluid lies strictly between the two bodies'
    permittivities; +1 (attractive) otherwise, including ties. Metallic
    media enter as +inf.
    """
    if eps1 < eps_fluid < eps2 or eps2 < eps_fluid < eps1:
        return -1
    return +1


# --- per-frequency kernels ----------------------------------------------------

# integrand kernels over kappa; prefactors chosen so that
#   f_P(xi) = PREF_P * I_P  with I_P = int kappa^2 sum_p A e^-u/(1 - A e^-u) dkappa
#   f_E(xi) = PREF_E * I_E  with I_E = int kappa   sum_p log(1 - A e^-u) dkappa
#   f_U(xi) = PREF_U * I_U  with I_U = int       -sum_p Li2(A e^-u)      dkappa
# where u = 2*kappa*d and A = r_left*r_right per polarization.
# f_U is the separation integral of f_E from d to infinity (sphere PFA energy).
PREF_P = HBAR / (2.0 * math.pi**2)
PREF_E = HBAR / (4.0 * math.pi**2)
PREF_U = HBAR / (8.0 * math.pi**2)

KERNEL_PRESSURE = "pressure"
KERNEL_ENERGY = "energy"
KERNEL_GAP_INTEGRAL = "gap_integral"


def _dilog(x):
    # Li2(x) for real x <= 1
    return spence(1.0 - x)


KERNEL_PREFACTOR = {
    KERNEL_PRESSURE: PREF_P,
    KERNEL_ENERGY: PREF_E,
    KERNEL_GAP_INTEGRAL: PREF_U,
}


def reflection_products(gap, xi, kap_nodes):
    """(A_TE, A_TM) = products of left/right reflections at kappa nodes.

    At xi = 0 the TE product is identically zero and TM uses the static
    recursion; metals reflect with r_TM = 1 there.
    """
    if xi == 0.0:
        a_tm = (_stack_reflection_static_tm(gap.left, static_limit(gap.fluid), kap_nodes)
                * _stack_reflection_static_tm(gap.right, static_limit(gap.fluid), kap_nodes))
        return np.zeros_like(kap_nodes), a_tm
    eps_f = gap.fluid.eps(xi)
    k2 = kap_nodes**2 - eps_f * (xi / C) ** 2
    # clip tiny negative round-off at the light line kappa = kappa_min
    k2 = np.maximum(k2, 0.0)
    lte, ltm = _stack_reflection_arrays(gap.left, eps_f, xi, k2)
    rte, rtm = _stack_reflection_arrays(gap.right, eps_f, xi, k2)
    return lte * rte, ltm * rtm


def kappa_min(gap, xi):
    """Smallest decay constant in the fluid at xi: sqrt(eps_f)*xi/c."""
    if xi == 0.0:
        return 0.0
    return math.sqrt(gap.fluid.eps(xi)) * xi / C


def frequency_integrand(gap, xi, rtol=1.0e-9, cache=None):
    """Per-frequency pressure and energy densities (f_P, f_E) at xi >= 0.

    f_P in Pa s/rad (positive = attractive), f_E in J s/(m^2 rad)
    (negative = binding). The k integral runs to relative tolerance rtol.
    """
    from .lifshitz import spectral_integrands  # local import; avoids cycle

    vals = spectral_integrands(
        gap, [xi], gap.separation,
        kernels=(KERNEL_PRESSURE, KERNEL_ENERGY),
        rtol=rtol, cache=cache,
    )
    return float(vals[KERNEL_PRESSURE][0]), float(vals[KERNEL_ENERGY][0])

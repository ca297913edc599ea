"""Equilibrium Boltzmann statistics of a suspended object.

The object's separation z is distributed as p(z) ~ exp(-U_T(z)/k_B T_e) over
a basin of the total-energy landscape; this module computes the mean
separation, equal-tail 95% interval, barrier heights and the Arrhenius-style
stiction factor, plus the frozen-landscape counterfactual that separates the
explicit Boltzmann-factor temperature dependence from the Casimir one.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .constants import KB
from .errors import DomainError
from . import landscape as ld
from . import lifshitz as lz

BASIN_CUTOFF_KT = 30.0        # domain ends where U - U_min exceeds this
GRID_RESOLUTION_KT = 0.01     # refine until U is interpolated this well
_DU_CORE_KT = 0.12            # max per-cell potential step where mass lives
_DU_TAIL_KT = 0.6             # looser bound out to the relevance cutoff
_MAX_GRID = 16385


@dataclass(frozen=True)
class BoltzmannDomain:
    d_lo: float
    d_hi: float
    basin_policy: str = "suspension_basin"   # or "full_range"
    inner_is_barrier: bool = False            # d_lo sits on an unstable point

    def __post_init__(self):
        if not (0 < self.d_lo < self.d_hi):
            raise DomainError("need 0 < d_lo < d_hi")
        if self.basin_policy not in ("suspension_basin", "full_range"):
            raise DomainError(f"unknown basin policy {self.basin_policy!r}")


@dataclass
class BoltzmannStats:
    mean_d: float
    q025: float
    q975: float
    normalization: float
    barrier_in: float         # k_B T_e units toward contact; inf if none
    landscape_T: float
    ensemble_T: float


class StictionRate(NamedTuple):
    value: float
    underflow: bool


def stiction_exponent(barrier_kT):
    """exp(-barrier): rate proportionality only, no attempt frequency.

    Barriers beyond the double-precision exponent range return 0 with the
    underflow flag set.
    """
    if barrier_kT < 0:
        raise DomainError("barrier must be >= 0")
    if barrier_kT > 708.0:
        return StictionRate(0.0, True)
    return StictionRate(math.exp(-barrier_kT), False)


def resolve_domain(case, landscape_T, ensemble_T=None, d_range=(1.0e-8, 5.0e-6),
                   policy="suspension_basin", n_scan=200, cache=None,
                   rtol=lz.DEFAULT_RTOL, truncation=1.0e-10):
    """Basin of the stable equilibrium: inner unstable point to outer
    unstable point, or to where U climbs BASIN_CUTOFF_KT above the minimum."""
    if policy == "full_range":
        return BoltzmannDomain(d_range[0], d_range[1], "full_range")
    T_e = landscape_T if ensemble_T is None else ensemble_T
    kT = KB * T_e
    eqs = ld.find_equilibria(case, landscape_T, d_range, n_scan, cache=cache,
                             rtol=rtol, truncation=truncation)
    stable = [e for e in eqs if e.stability == "stable"]
    if not stable:
        raise DomainError("no stable equilibrium in range; nothing to suspend")
    if len(stable) > 1:
        us = np.array([ld.total_energy(case, e.d_c, landscape_T, cache=cache,
                                       rtol=rtol, truncation=truncation)
                       for e in stable])
        anchor = stable[int(np.argmin(us))]
    else:
        anchor = stable[0]
    lower_unstable = [e for e in eqs if e.stability == "unstable" and e.d_c < anchor.d_c]
    upper_unstable = [e for e in eqs if e.stability == "unstable" and e.d_c > anchor.d_c]
    inner_is_barrier = bool(lower_unstable)
    d_lo = lower_unstable[-1].d_c if lower_unstable else d_range[0]
    if upper_unstable:
        d_hi = upper_unstable[0].d_c
    else:
        u_min = ld.total_energy(case, anchor.d_c, landscape_T, cache=cache,
                                rtol=rtol, truncation=truncation)
        d_hi = anchor.d_c
        step = max(anchor.d_c * 0.25, 1e-8)
        while True:
            trial = d_hi + step
            u = ld.total_energy(case, trial, landscape_T, cache=cache,
                                rtol=rtol, truncation=truncation)
            d_hi = trial
            if u - u_min > BASIN_CUTOFF_KT * kT:
                break
            step *= 1.6
    return BoltzmannDomain(d_lo, d_hi, policy, inner_is_barrier)


def _adaptive_grid(u_fn, d_lo, d_hi, kT_resolve, n_init=65):
    """Refine a linear grid until U interpolates to GRID_RESOLUTION_KT."""
    zs = np.linspace(d_lo, d_hi, n_init)
    us = np.asarray(u_fn(zs), dtype=float)
    tol = GRID_RESOLUTION_KT * kT_resolve
    while zs.size < _MAX_GRID:
        mids = 0.5 * (zs[:-1] + zs[1:])
        u_mid = np.asarray(u_fn(mids), dtype=float)
        err = np.abs(u_mid - 0.5 * (us[:-1] + us[1:]))
        u_floor = np.minimum(np.minimum(us[:-1], us[1:]), u_mid)
        relevant = (u_floor - us.min()) < 1.5 * BASIN_CUTOFF_KT * kT_resolve
        bad = (err > tol) & relevant
        if not np.any(bad):
            break
        new_z, new_u = [], []
        for i in range(zs.size - 1):
            new_z.append(zs[i])
            new_u.append(us[i])
            if bad[i]:
                new_z.append(mids[i])
                new_u.append(u_mid[i])
        new_z.append(zs[-1])
        new_u.append(us[-1])
        zs = np.asarray(new_z)
        us = np.asarray(new_u)
    return zs, us


def _trapezoid_cdf(zs, w):
    seg = 0.5 * (w[:-1] + w[1:]) * np.diff(zs)
    cdf = np.concatenate([[0.0], np.cumsum(seg)])
    return cdf


def _quantile(zs, w, cdf, q):
    """Invert the piecewise-linear CDF at mass fraction q (monotone interp)."""
    target = q * cdf[-1]
    i = int(np.searchsorted(cdf, target, side="right") - 1)
    i = min(max(i, 0), zs.size - 2)
    # within segment i the density is linear: solve the quadratic mass
    z0, z1 = zs[i], zs[i + 1]
    w0, w1 = w[i], w[i + 1]
    rem = target - cdf[i]
    h = z1 - z0
    if h <= 0:
        return z0
    a = 0.5 * (w1 - w0) / h
    if abs(a) < 1e-300:
        return z0 + (rem / w0 if w0 > 0 else 0.0)
    disc = w0 * w0 + 4.0 * a * rem
    dz = (-w0 + math.sqrt(max(disc, 0.0))) / (2.0 * a)
    return float(min(max(z0 + dz, z0), z1))


def stats_from_potential(u_fn, d_lo, d_hi, ensemble_T, landscape_T=None,
                         inner_is_barrier=True):
    """Boltzmann statistics over an arbitrary potential callable (J vs m)."""
    if ensemble_T <= 0:
        raise DomainError("ensemble temperature must be > 0")
    kT = KB * ensemble_T
    zs, us = _adaptive_grid(u_fn, d_lo, d_hi, kT)
    u_min = us.min()
    w = np.exp(-(us - u_min) / kT)
    z_norm = _trapezoid_cdf(zs, w)[-1]
    if not (z_norm > 0) or not np.isfinite(z_norm):
        raise DomainError("degenerate Boltzmann density (flat or diverging)")
    p = w / z_norm
    cdf = _trapezoid_cdf(zs, p)
    normalization = cdf[-1]
    mean = _trapezoid_cdf(zs, zs * p)[-1]
    q025 = _quantile(zs, p, cdf, 0.025)
    q975 = _quantile(zs, p, cdf, 0.975)
    if inner_is_barrier:
        barrier_in = (us[0] - u_min) / kT
    else:
        barrier_in = math.inf
    return BoltzmannStats(mean, q025, q975, float(normalization), barrier_in,
                          landscape_T if landscape_T is not None else ensemble_T,
                          ensemble_T)


def boltzmann_stats(case, landscape_T, ensemble_T, domain=None,
                    d_range=(1.0e-8, 5.0e-6), cache=None,
                    rtol=lz.DEFAULT_RTOL, truncation=1.0e-10):
    """Boltzmann statistics of a suspension case.

    The landscape is evaluated at landscape_T while the Boltzmann factor
    uses ensemble_T; the physical curve has the two equal, the split isolates
    the explicit temperature dependence (see counterfactual_mean).
    """
    if domain is None:
        domain = resolve_domain(case, landscape_T, ensemble_T, d_range,
                                cache=cache, rtol=rtol, truncation=truncation)
    if cache is None:
        cache = lz.ReflectionCache()

    def u_fn(z):
        return ld.total_energy(case, z, landscape_T, cache=cache, rtol=rtol,
                               truncation=truncation)

    return stats_from_potential(u_fn, domain.d_lo, domain.d_hi, ensemble_T,
                                landscape_T, domain.inner_is_barrier)


def counterfactual_mean(case, frozen_T, ensemble_T_values,
                        d_range=(1.0e-8, 5.0e-6), cache=None,
                        rtol=lz.DEFAULT_RTOL, truncation=1.0e-10):
    """Mean separation with the landscape frozen at frozen_T while the
    Boltzmann temperature sweeps; returns [(ensemble_T, mean_d)].

    The point ensemble_T == frozen_T coincides with the true curve at that
    temperature by construction.
    """
    ensemble_T_values = [float(t) for t in ensemble_T_values]
    if not ensemble_T_values:
        return []
    if cache is None:
        cache = lz.ReflectionCache()
    widest = max(ensemble_T_values)
    domain = resolve_domain(case, frozen_T, widest, d_range, cache=cache,
                            rtol=rtol, truncation=truncation)
    out = []
    for T_e in ensemble_T_values:
        stats = boltzmann_stats(case, frozen_T, T_e, domain=domain,
                                cache=cache, rtol=rtol, truncation=truncation)
        out.append((T_e, stats.mean_d))
    return out


def barrier(case, T, d_range=(1.0e-8, 5.0e-6), cache=None,
            rtol=lz.DEFAULT_RTOL, truncation=1.0e-10):
    """(toward_contact, toward_escape) barrier heights in k_B T units.

    Measured from the lowest stable equilibrium to the flanking unstable
    equilibria; a missing unstable point on a side reports infinity.
    """
    if cache is None:
        cache = lz.ReflectionCache()
    eqs = ld.find_equilibria(case, T, d_range, cache=cache, rtol=rtol,
                             truncation=truncation)
    stable = [e for e in eqs if e.stability == "stable"]
    if not stable:
        raise DomainError("no stable equilibrium; barrier undefined")
    kT = KB * T

    def u(z):
        return ld.total_energy(case, z, T, cache=cache, rtol=rtol,
                               truncation=truncation)

    us = [u(e.d_c) for e in stable]
    i_min = int(np.argmin(us))
    anchor, u_anchor = stable[i_min], us[i_min]
    lower = [e for e in eqs if e.stability == "unstable" and e.d_c < anchor.d_c]
    upper = [e for e in eqs if e.stability == "unstable" and e.d_c > anchor.d_c]
    toward_contact = (u(lower[-1].d_c) - u_anchor) / kT if lower else math.inf
    toward_escape = (u(upper[0].d_c) - u_anchor) / kT if upper else math.inf
    return toward_contact, toward_escape

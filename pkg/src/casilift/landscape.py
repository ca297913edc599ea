"""Total-energy landscapes, equilibria, temperature continuation, bifurcations.

Sign conventions (fixed once, used in every output):
* total_force > 0 pushes the bodies apart (repulsive), so a stable
  equilibrium has negative force slope.
* total_energy is normalized to the gravity ramp alone at infinite
  separation (the Casimir part vanishes there).

Plate case: energies are per-area Lifshitz values times the configured area,
plus the gravity ramp delta_rho*g*h*d per area. Sphere case: the proximity
(Derjaguin) approximation U(d) = 2*pi*R * integral_d^inf E_pp(z) dz plus the
buoyant weight W*d of the ethanol-filled shell.
"""

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .constants import G_STANDARD
from .errors import ConfigError, DomainError
from . import lifshitz as lz
from .stratified import (GapGeometry, KERNEL_ENERGY, KERNEL_GAP_INTEGRAL,
                         KERNEL_PRESSURE, Layer, Stack)


@dataclass(frozen=True)
class SlabGravity:
    """Buoyant weight per area of a suspended slab: delta_rho * g * h."""

    delta_rho: float          # slab density minus fluid density, kg/m^3
    thickness: float          # slab thickness h, m
    g: float = G_STANDARD

    def __post_init__(self):
        if self.thickness < 0:
            raise ConfigError("slab thickness must be >= 0")


@dataclass(frozen=True)
class SphereGravity:
    """Buoyant weight data for a hollow shell; the interior may hold the
    ambient fluid (default) or a different medium (e.g. a gas core)."""

    rho_shell: float                    # kg/m^3
    rho_fluid: float                    # kg/m^3
    rho_interior: Optional[float] = None  # None -> filled with the fluid
    g: float = G_STANDARD


@dataclass(frozen=True)
class PlateCase:
    """Plate-plate suspension: a gap template plus area and optional gravity."""

    left: Stack
    right: Stack
    fluid: object
    area: float               # m^2, for absolute energies
    gravity: Optional[SlabGravity] = None

    def __post_init__(self):
        if not self.area > 0:
            raise ConfigError("plate area must be > 0")

    def gap(self, d):
        return GapGeometry(self.left, self.right, self.fluid, d)

    @property
    def weight(self):
        """Net downhill force, N (positive pulls the bodies together)."""
        if self.gravity is None:
            return 0.0
        return self.gravity.delta_rho * self.gravity.g * self.gravity.thickness * self.area

    _energy_kernel = KERNEL_ENERGY

    def casimir_energy(self, spectral_value):
        return spectral_value * self.area

    def casimir_force(self, spectral_values):
        # repulsive-positive force from the attractive-positive pressure
        return -spectral_values[KERNEL_PRESSURE] * self.area

    _force_kernels = (KERNEL_PRESSURE,)


@dataclass(frozen=True)
class SphereCase:
    """Hollow sphere above a layered substrate, treated in the proximity
    approximation. The shell of thickness R_outer - r_inner faces the gap;
    the interior half-space defaults to the ambient fluid."""

    substrate: Stack
    shell: object             # shell Material
    r_inner: float
    R_outer: float
    fluid: object
    interior: object = None   # Material; None -> fluid-filled
    gravity: Optional[SphereGravity] = None

    def __post_init__(self):
        if not (0 < self.r_inner < self.R_outer):
            raise ConfigError("need 0 < r_inner < R_outer")

    def gap(self, d):
        shell_layer = Layer(self.shell, self.R_outer - self.r_inner)
        terminal = self.interior if self.interior is not None else self.fluid
        sphere_stack = Stack(terminal=terminal, layers=(shell_layer,))
        return GapGeometry(self.substrate, sphere_stack, self.fluid, d)

    @property
    def shell_volume(self):
        return 4.0 * math.pi / 3.0 * (self.R_outer**3 - self.r_inner**3)

    @property
    def weight(self):
        """Buoyant weight of the shell plus its interior, N.

        For a fluid-filled shell this reduces to
        g*(rho_shell - rho_fluid)*V_shell.
        """
        if self.gravity is None:
            return 0.0
        gr = self.gravity
        rho_int = gr.rho_interior if gr.rho_interior is not None else gr.rho_fluid
        v_core = 4.0 * math.pi / 3.0 * self.r_inner**3
        v_total = 4.0 * math.pi / 3.0 * self.R_outer**3
        mass = gr.rho_shell * self.shell_volume + rho_int * v_core
        return gr.g * (mass - gr.rho_fluid * v_total)

    _energy_kernel = KERNEL_GAP_INTEGRAL

    def casimir_energy(self, spectral_value):
        return 2.0 * math.pi * self.R_outer * spectral_value

    def casimir_force(self, spectral_values):
        # Derjaguin: repulsive force = 2*pi*R * E_pp(d)
        return 2.0 * math.pi * self.R_outer * spectral_values[KERNEL_ENERGY]

    _force_kernels = (KERNEL_ENERGY,)


@dataclass(frozen=True)
class CallableCase:
    """Adapter exposing user-supplied energy/force callables as a case.

    Useful for synthetic landscapes (validation, method studies); both
    callables map (separation array, T) to absolute values in J and N.
    """

    energy_fn: object
    force_fn: object


@dataclass(frozen=True)
class Equilibrium:
    d_c: float
    stability: str            # "stable" | "unstable"
    T: float


@dataclass
class Branch:
    id: int
    stability: str
    temperatures: list
    separations: list

    def sample_at(self, T):
        i = int(np.argmin(np.abs(np.asarray(self.temperatures) - T)))
        return self.temperatures[i], self.separations[i]


@dataclass
class Bifurcation:
    T_c: float
    d_merge: float
    branch_a: int
    branch_b: int


def _spectral_batch_group(case, d_values, thermal, kernels, cache, rtol, out, idx):
    gap = case.gap(float(d_values.min()))
    xi_T = 2.0 * math.pi * lz.KB * thermal.T / lz.HBAR
    n_terms = lz._estimate_n_terms(gap, float(d_values.min()), xi_T)
    while True:
        if n_terms > thermal.n_max_cap:
            raise lz.NumericalError("Matsubara sum exceeded its term cap",
                                    context={"T": thermal.T})
        xis = xi_T * np.arange(0, n_terms + 1)
        vals = lz.spectral_integrands(gap, xis, d_values, kernels=kernels,
                                      rtol=rtol, cache=cache)
        undecided = False
        for kernel in kernels:
            mat = vals[kernel]           # (n_xi, nd)
            for i in range(d_values.size):
                terms = mat[:, i].copy()
                terms[0] *= 0.5
                decision = lz._truncate_terms(terms, thermal.truncation)
                if decision is None:
                    undecided = True
                    break
                stop, _ = decision
                out[kernel][idx[i]] = xi_T * math.fsum(terms[: stop + 1])
            if undecided:
                break
        if not undecided:
            return
        n_terms = int(math.ceil(n_terms * 1.6)) + 8


def _spectral_batch(case, d_values, thermal, kernels, cache, rtol):
    """Per-kernel spectral values over a separation grid at one temperature.

    The grid is processed in factor-of-two separation groups so the number
    of Matsubara terms follows each group's own decay scale instead of the
    global minimum separation.
    """
    d_values = np.atleast_1d(np.asarray(d_values, dtype=float))
    out = {kernel: np.empty(d_values.size) for kernel in kernels}
    if thermal.T < lz.LOW_T_CROSSOVER_K:
        for i, d in enumerate(d_values):
            g = case.gap(float(d))
            for kernel in kernels:
                out[kernel][i] = lz.spectral_integral_T0(g, kernel, tol=max(rtol, 1e-10),
                                                         cache=cache)
        return out

    order = np.argsort(d_values)
    start = 0
    while start < order.size:
        d_lo = d_values[order[start]]
        stop = start
        while stop < order.size and d_values[order[stop]] <= 2.0 * d_lo:
            stop += 1
        idx = order[start:stop]
        _spectral_batch_group(case, d_values[idx], thermal, kernels, cache,
                              rtol, out, idx)
        start = stop
    return out


def total_energy(case, d, T, cache=None, rtol=lz.DEFAULT_RTOL,
                 truncation=1.0e-10):
    """Total energy U_T(d) in J: Casimir part plus linear gravity ramp."""
    if np.any(np.asarray(d) <= 0):
        raise DomainError("separation must be > 0")
    if isinstance(case, CallableCase):
        u = np.asarray(case.energy_fn(np.atleast_1d(np.asarray(d, float)), T))
        return float(u[0]) if np.ndim(d) == 0 else u
    thermal = lz.ThermalSpec(T, truncation=truncation)
    vals = _spectral_batch(case, d, thermal, (case._energy_kernel,), cache, rtol)
    u = case.casimir_energy(vals[case._energy_kernel]) + case.weight * np.atleast_1d(d)
    return float(u[0]) if np.ndim(d) == 0 else u


def total_force(case, d, T, cache=None, rtol=lz.DEFAULT_RTOL,
                truncation=1.0e-10):
    """Total force in N, positive = repulsive (pushes apart); -dU/dd."""
    if np.any(np.asarray(d) <= 0):
        raise DomainError("separation must be > 0")
    if isinstance(case, CallableCase):
        f = np.asarray(case.force_fn(np.atleast_1d(np.asarray(d, float)), T))
        return float(f[0]) if np.ndim(d) == 0 else f
    thermal = lz.ThermalSpec(T, truncation=truncation)
    vals = _spectral_batch(case, d, thermal, case._force_kernels, cache, rtol)
    f = case.casimir_force(vals) - case.weight
    return float(f[0]) if np.ndim(d) == 0 else f


def find_equilibria(case, T, d_range=(1.0e-8, 5.0e-6), n_scan=200,
                    rel_tol=1.0e-10, cache=None, rtol=lz.DEFAULT_RTOL,
                    truncation=1.0e-10):
    """Zeros of the total force on a log grid, refined by bisection.

    Returns equilibria sorted by separation; stability alternates by
    construction (a bracket where the force falls through zero is stable).
    """
    d_lo, d_hi = d_range
    if not (0 < d_lo < d_hi):
        raise DomainError("need 0 < d_min < d_max")
    if n_scan < 16:
        raise DomainError("n_scan must be >= 16")
    ds = np.geomspace(d_lo, d_hi, n_scan)
    F = total_force(case, ds, T, cache=cache, rtol=rtol, truncation=truncation)

    lo_idx = np.nonzero(np.sign(F[:-1]) * np.sign(F[1:]) < 0)[0]
    if lo_idx.size == 0:
        return []
    lo = ds[lo_idx].copy()
    hi = ds[lo_idx + 1].copy()
    f_lo = F[lo_idx].copy()

    # bisect all brackets together in log d
    while np.max((hi - lo) / lo) > rel_tol:
        mid = np.sqrt(lo * hi)
        f_mid = total_force(case, mid, T, cache=cache, rtol=rtol,
                            truncation=truncation)
        take_lo = np.sign(f_mid) == np.sign(f_lo)
        lo = np.where(take_lo, mid, lo)
        f_lo = np.where(take_lo, f_mid, f_lo)
        hi = np.where(take_lo, hi, mid)

    roots = np.sqrt(lo * hi)
    eqs = []
    for i, idx in enumerate(lo_idx):
        stability = "stable" if F[idx] > 0 else "unstable"
        eqs.append(Equilibrium(float(roots[i]), stability, T))
    for a, b in zip(eqs, eqs[1:]):
        if a.stability == b.stability:
            raise lz.NumericalError(
                "stability alternation violated; increase n_scan",
                context={"T": T, "d": (a.d_c, b.d_c)},
            )
    return eqs


def _match(prev, new):
    """Greedy nearest-in-log-d matching of equilibria with equal stability."""
    pairs = []
    used_new = set()
    for i, p in enumerate(prev):
        best, best_cost = None, None
        for j, n in enumerate(new):
            if j in used_new or n.stability != p.stability:
                continue
            cost = abs(math.log(n.d_c / p.d_c))
            if cost < math.log(2.2) and (best_cost is None or cost < best_cost):
                best, best_cost = j, cost
        if best is not None:
            used_new.add(best)
            pairs.append((i, best))
    return pairs


def _near_edge(d, d_range):
    lo, hi = d_range
    span = math.log(hi / lo)
    return (math.log(d / lo) < 0.02 * span) or (math.log(hi / d) < 0.02 * span)


def sweep_temperature(case, T_values, d_range=(1.0e-8, 5.0e-6), n_scan=200,
                      bif_resolution_K=0.02, map_fn=None, cache_factory=None,
                      rtol=lz.DEFAULT_RTOL, truncation=1.0e-10):
    """Continue equilibria over temperature and locate bifurcations.

    Equilibria at each temperature are matched to the nearest predecessor
    in separation; branch deaths/births away from the domain edges are
    refined by bisection in T until the annihilating pair's existence flips
    within bif_resolution_K. Returns (branches, bifurcations).
    """
    T_values = sorted(float(t) for t in T_values)
    if not T_values:
        return [], []
    if cache_factory is None:
        cache_factory = lz.ReflectionCache

    def eqs_at(T):
        return find_equilibria(case, T, d_range, n_scan, cache=cache_factory(),
                               rtol=rtol, truncation=truncation)

    mapper = map_fn if map_fn is not None else map
    eq_lists = list(mapper(_EquilibriaTask(case, d_range, n_scan, rtol, truncation),
                           T_values))

    branches = []
    bifurcations = []
    active = {}      # branch id -> Branch
    next_id = 0

    def close_branch(bid, T_prev, T_next, partner_candidates):
        """A branch vanished between T_prev and T_next; refine or mark edge."""
        br = active.pop(bid)
        d_last = br.separations[-1]
        if _near_edge(d_last, d_range):
            return None
        return (bid, d_last)

    prev_eqs = None
    for step, (T, eqs) in enumerate(zip(T_values, eq_lists)):
        if prev_eqs is None:
            for e in eqs:
                br = Branch(next_id, e.stability, [T], [e.d_c])
                active[next_id] = br
                branches.append(br)
                next_id += 1
        else:
            prev_list = [(bid, active[bid]) for bid in sorted(active)]
            prev_eq = [Equilibrium(b.separations[-1], b.stability, T_values[step - 1])
                       for _, b in prev_list]
            pairs = _match(prev_eq, eqs)
            matched_prev = {i for i, _ in pairs}
            matched_new = {j for _, j in pairs}
            for i, j in pairs:
                bid = prev_list[i][0]
                active[bid].temperatures.append(T)
                active[bid].separations.append(eqs[j].d_c)
            # deaths
            dead = [prev_list[i][0] for i in range(len(prev_list)) if i not in matched_prev]
            dead_info = []
            for bid in dead:
                info = close_branch(bid, T_values[step - 1], T, dead)
                if info is not None:
                    dead_info.append(info)
            if dead_info:
                bifurcations.extend(
                    _refine_events(case, dead_info, T_values[step - 1], T, d_range,
                                   n_scan, bif_resolution_K, branches,
                                   cache_factory, rtol, truncation, dying=True))
            # births
            born_info = []
            for j in range(len(eqs)):
                if j in matched_new:
                    continue
                br = Branch(next_id, eqs[j].stability, [T], [eqs[j].d_c])
                active[next_id] = br
                branches.append(br)
                if not _near_edge(eqs[j].d_c, d_range):
                    born_info.append((next_id, eqs[j].d_c))
                next_id += 1
            if born_info:
                bifurcations.extend(
                    _refine_events(case, born_info, T_values[step - 1], T, d_range,
                                   n_scan, bif_resolution_K, branches,
                                   cache_factory, rtol, truncation, dying=False))
        prev_eqs = eqs

    bifurcations.sort(key=lambda b: (b.T_c, b.d_merge))
    return branches, bifurcations


class _EquilibriaTask:
    """Picklable find_equilibria closure for worker pools."""

    def __init__(self, case, d_range, n_scan, rtol, truncation):
        self.case = case
        self.d_range = d_range
        self.n_scan = n_scan
        self.rtol = rtol
        self.truncation = truncation

    def __call__(self, T):
        return find_equilibria(self.case, T, self.d_range, self.n_scan,
                               cache=lz.ReflectionCache(), rtol=self.rtol,
                               truncation=self.truncation)


def _refine_events(case, events, T_prev, T_cur, d_range, n_scan,
                   bif_resolution_K, branches, cache_factory, rtol,
                   truncation, dying):
    """Pair up simultaneously vanishing branches and bisect each fold in T.

    events: list of (branch_id, d) that vanished between T_prev and T_cur
    (or appeared, for dying=False). Adjacent events of opposite stability
    annihilate together.
    """
    events = sorted(events, key=lambda e: e[1])
    by_id = {b.id: b for b in branches}
    out = []
    used = set()
    for i, (bid, d_i) in enumerate(events):
        if bid in used:
            continue
        partner = None
        for j in range(i + 1, len(events)):
            pid, d_j = events[j]
            if pid in used:
                continue
            if by_id[pid].stability != by_id[bid].stability:
                partner = (pid, d_j)
                break
        if partner is None:
            continue
        used.add(bid)
        used.add(partner[0])
        window = (max(d_range[0], min(d_i, partner[1]) / 2.5),
                  min(d_range[1], max(d_i, partner[1]) * 2.5))
        # orientation: unstable below stable means the force peaks upward
        # between the pair; the opposite ordering dips downward
        low_id = bid if d_i < partner[1] else partner[0]
        sign = +1.0 if by_id[low_id].stability == "unstable" else -1.0
        T_has, T_not = (T_prev, T_cur) if dying else (T_cur, T_prev)
        refined = _bisect_fold(case, window, T_has, T_not, sign,
                               bif_resolution_K, cache_factory, rtol,
                               truncation)
        if refined is None:
            continue
        t_c, d_merge = refined
        out.append(Bifurcation(t_c, d_merge, min(bid, partner[0]),
                               max(bid, partner[0])))
    return out


def _bisect_fold(case, window, T_has, T_not, sign, resolution_K,
                 cache_factory, rtol, truncation):
    """Bisect the fold temperature on a scalar existence indicator.

    Between an annihilating pair the force has an interior extremum whose
    (signed) height passes through zero exactly at the fold, so its sign is
    a resolution-robust existence test even when the roots sit closer than
    any scan grid. Returns (T_c, d_merge) or None when no sign change is
    bracketed.
    """
    win = window

    def indicator(T):
        ds = np.geomspace(win[0], win[1], 96)
        F = total_force(case, ds, T, cache=cache_factory(), rtol=rtol,
                        truncation=truncation)
        i = int(np.argmax(sign * F))
        return sign * F[i], float(ds[i])

    v_has, d_merge = indicator(T_has)
    v_not, _ = indicator(T_not)
    if v_has <= 0.0:
        return None
    extended = 0
    while v_not > 0.0 and extended < 4:
        T_not = T_has + 2.0 * (T_not - T_has)
        v_not, _ = indicator(T_not)
        extended += 1
    if v_not > 0.0:
        return None
    while abs(T_has - T_not) > resolution_K:
        T_mid = 0.5 * (T_has + T_not)
        v_mid, d_mid = indicator(T_mid)
        if v_mid > 0.0:
            T_has = T_mid
            d_merge = d_mid
            win = (max(window[0], d_mid / 2.0), min(window[1], d_mid * 2.0))
        else:
            T_not = T_mid
    return 0.5 * (T_has + T_not), d_merge


class SlopeResult(float):
    """Branch slope in m/K; ``one_sided`` flags an edge-of-branch estimate."""

    def __new__(cls, value, one_sided):
        obj = super().__new__(cls, value)
        obj.one_sided = one_sided
        return obj


def branch_slope(branch, T):
    """d(d_c)/dT on a branch near temperature T, by finite differences."""
    Ts = np.asarray(branch.temperatures)
    ds = np.asarray(branch.separations)
    if Ts.size < 2:
        raise DomainError("branch has fewer than 2 samples")
    if T < Ts.min() - 1e-9 or T > Ts.max() + 1e-9:
        raise DomainError("T outside branch samples")
    i = int(np.argmin(np.abs(Ts - T)))
    if 0 < i < Ts.size - 1:
        return SlopeResult((ds[i + 1] - ds[i - 1]) / (Ts[i + 1] - Ts[i - 1]), False)
    if i == 0:
        return SlopeResult((ds[1] - ds[0]) / (Ts[1] - Ts[0]), True)
    return SlopeResult((ds[-1] - ds[-2]) / (Ts[-1] - Ts[-2]), True)


# Reference point from exact-scattering studies of micron spheres: at gaps
# around a tenth of the radius the exact energy is roughly 85% of the
# proximity value. Recorded for context; the exact computation is out of
# scope here.
PFA_EXACT_ENERGY_RATIO_500NM = 0.85


def pfa_energy(case, d, T, cache=None, rtol=lz.DEFAULT_RTOL,
               truncation=1.0e-10):
    """Sphere-plate Casimir energy in the proximity approximation, J.

    2*pi*R times the separation integral of the plate-plate energy per area
    from d to infinity. Warns when d exceeds R/5, where the approximation
    degrades.
    """
    if not isinstance(case, SphereCase):
        raise DomainError("pfa_energy needs a SphereCase")
    if np.any(np.asarray(d) > case.R_outer / 5.0):
        warnings.warn("PFA requested at d > R_outer/5; accuracy degrades",
                      stacklevel=2)
    thermal = lz.ThermalSpec(T, truncation=truncation)
    vals = _spectral_batch(case, d, thermal, (KERNEL_GAP_INTEGRAL,), cache, rtol)
    u = case.casimir_energy(vals[KERNEL_GAP_INTEGRAL])
    return float(u[0]) if np.ndim(d) == 0 else u

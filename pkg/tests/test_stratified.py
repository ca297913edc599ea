import math

import numpy as np
import pytest

import casilift as cl
from casilift.constants import C
from casilift.errors import DomainError
from casilift.stratified import (KERNEL_ENERGY, KERNEL_PRESSURE, Polarization,
                                 fresnel, kappa, predict_sign,
                                 stack_reflection, zero_frequency_reflection)
from casilift.lifshitz import ReflectionCache, spectral_integrands
from conftest import half_space, random_material, random_stack


def transfer_matrix_reflection(stack, fluid, xi, k, pol):
    """Independent brute-force transfer-matrix evaluation."""
    media = [fluid] + [lay.material for lay in stack.layers] + [stack.terminal]
    eps = [m.eps(xi) for m in media]
    kap = [math.sqrt(k * k + e * (xi / C) ** 2) for e in eps]
    M = np.eye(2)
    for j in range(len(media) - 1):
        ei, ki, eo, ko = eps[j], kap[j], eps[j + 1], kap[j + 1]
        if pol == "TE":
            rho = (ki - ko) / (ki + ko)
        else:
            rho = (eo * ki - ei * ko) / (eo * ki + ei * ko)
        M = M @ np.array([[1.0, rho], [rho, 1.0]])
        if j + 1 < len(media) - 1:
            t = stack.layers[j].thickness
            M = M @ np.array([[math.exp(kap[j + 1] * t), 0.0],
                              [0.0, math.exp(-kap[j + 1] * t)]])
            M /= M[0, 0]
    return M[1, 0] / M[0, 0]


def test_kappa_limits():
    assert kappa(7.3, 0.0, 1e6) == 1e6
    k = 1e6
    assert kappa(1.0, C * k, k) == pytest.approx(math.sqrt(2.0) * k, rel=1e-14)
    assert kappa(2.0, 3e14, 0.0) == pytest.approx(math.sqrt(2.0) * 3e14 / C, rel=1e-12)
    with pytest.raises(DomainError):
        kappa(2.0, 0.0, 0.0)


def test_fresnel_no_interface():
    for pol in (Polarization.TE, Polarization.TM):
        assert fresnel(pol, 3.0, 5e6, 3.0, 5e6) == 0.0


def test_fresnel_metallic_limit():
    # TM -> 1 as eps_out -> infinity at fixed kappas
    r = fresnel(Polarization.TM, 2.0, 4e6, 1e14, 5e6)
    assert r == pytest.approx(1.0, abs=1e-7)


def test_fresnel_te_at_normal_incidence():
    xi, ei, eo = 2e15, 2.0, 5.0
    ki, ko = kappa(ei, xi, 0.0), kappa(eo, xi, 0.0)
    r = fresnel(Polarization.TE, ei, ki, eo, ko)
    expected = (math.sqrt(ei) - math.sqrt(eo)) / (math.sqrt(ei) + math.sqrt(eo))
    assert r == pytest.approx(expected, rel=1e-14)


def test_stack_reflection_half_space_and_opaque():
    fl = cl.Material("f", cl.ConstantModel(2.0))
    sub = cl.Material("s", cl.ConstantModel(4.0))
    hs = half_space(sub)
    xi, k = 1e15, 1e6
    for pol in ("TE", "TM"):
        direct = fresnel(Polarization(pol), fl.eps(xi), kappa(fl.eps(xi), xi, k),
                         sub.eps(xi), kappa(sub.eps(xi), xi, k))
        assert stack_reflection(hs, fl, xi, k, pol) == pytest.approx(direct, rel=1e-15)
        opaque = cl.Stack(terminal=cl.Material("x", cl.ConstantModel(9.0)),
                          layers=(cl.Layer(sub, 1.0),))
        assert stack_reflection(opaque, fl, xi, k, pol) == pytest.approx(direct, rel=1e-12)


def test_stack_reflection_matches_transfer_matrix():
    rng = np.random.default_rng(42)
    worst = 0.0
    for i in range(300):
        stack = random_stack(rng, max_layers=5, tag=i)
        fl = cl.Material("f", cl.ConstantModel(1.0 + 5.0 * rng.random()))
        xi = 10 ** rng.uniform(12.0, 16.5)
        k = 10 ** rng.uniform(4.0, 8.0)
        for pol in ("TE", "TM"):
            r = stack_reflection(stack, fl, xi, k, pol)
            oracle = transfer_matrix_reflection(stack, fl, xi, k, pol)
            worst = max(worst, abs(r - oracle) / max(abs(oracle), 1e-30))
    assert worst < 1e-10


def test_reflection_bounded():
    # |r| <= 1 over randomized stacks and (xi, k); vectorized to cover 1e4 points
    rng = np.random.default_rng(3)
    total = 0
    for i in range(100):
        stack = random_stack(rng, tag=i)
        fl = cl.Material("f", cl.ConstantModel(1.0 + 4.0 * rng.random()))
        xi = 10 ** rng.uniform(12.0, 16.5)
        eps_f = fl.eps(xi)
        kaps = np.sqrt(10 ** rng.uniform(8.0, 16.0, size=50) + eps_f * (xi / C) ** 2)
        from casilift.stratified import _stack_reflection_arrays
        k2 = kaps**2 - eps_f * (xi / C) ** 2
        r_te, r_tm = _stack_reflection_arrays(stack, eps_f, xi, k2)
        assert np.all(np.abs(r_te) <= 1.0 + 1e-12)
        assert np.all(np.abs(r_tm) <= 1.0 + 1e-12)
        total += kaps.size * 2
    assert total >= 10_000


def test_zero_frequency_reflection():
    fl4 = cl.Material("f", cl.ConstantModel(4.0))
    anything = half_space(cl.Material("x", cl.ConstantModel(7.0)))
    assert zero_frequency_reflection(anything, fl4, 1e6, "TE") == 0.0
    hs2 = half_space(cl.Material("y", cl.ConstantModel(2.0)))
    assert zero_frequency_reflection(hs2, fl4, 1e6, "TM") == pytest.approx(-1.0 / 3.0, rel=1e-15)
    gold = cl.Material("au", cl.DrudeModel(1.37e16, 5.3e13, 1.0))
    assert zero_frequency_reflection(half_space(gold), fl4, 1e6, "TM") == 1.0
    with pytest.raises(DomainError):
        zero_frequency_reflection(hs2, fl4, 0.0, "TM")


def test_predict_sign():
    assert predict_sign(2.0, 5.0, 10.0) == -1
    assert predict_sign(5.0, 2.0, 10.0) == +1
    assert predict_sign(3.0, 3.0, 7.0) == +1
    assert predict_sign(math.inf, 5.0, 2.0) == -1   # metallic as +inf


def test_frequency_integrand_no_contrast(vacuum):
    gap = cl.GapGeometry(half_space(vacuum), half_space(cl.Material("s", cl.ConstantModel(4.0))),
                         vacuum, 2e-7)
    f_p, f_e = cl.frequency_integrand(gap, 3e14)
    assert f_p == 0.0
    assert f_e == 0.0


def test_frequency_integrand_repulsive_ordering():
    # eps1 < eps_fluid < eps2 -> f_P < 0 (repulsive)
    g = cl.GapGeometry(half_space(cl.Material("a", cl.ConstantModel(2.0))),
                       half_space(cl.Material("b", cl.ConstantModel(10.0))),
                       cl.Material("f", cl.ConstantModel(5.0)), 2e-7)
    f_p, f_e = cl.frequency_integrand(g, 2e14)
    assert f_p < 0.0


def test_frequency_integrand_mirror_symmetry_attracts():
    rng = np.random.default_rng(5)
    for i in range(4):
        m = random_material(rng, i)
        fl = cl.Material("f", cl.ConstantModel(1.0 + rng.random()))
        g = cl.GapGeometry(half_space(m), half_space(m), fl, 10 ** rng.uniform(-7.5, -6.0))
        for xi in (1e13, 3e14, 2e15):
            f_p, f_e = cl.frequency_integrand(g, xi)
            assert f_p > 0.0
            assert f_e < 0.0


def test_sign_rule_consistency_random():
    rng = np.random.default_rng(19)
    cache_hits = 0
    for i in range(25):
        e1, ef, e2 = sorted(1.0 + 12.0 * rng.random(3))
        order = rng.permutation([e1, ef, e2])
        m1, mf, m2 = (cl.Material(f"m{j}", cl.ConstantModel(v)) for j, v in enumerate(order))
        g = cl.GapGeometry(half_space(m1), half_space(m2), mf, 3e-7)
        for xi in 10 ** rng.uniform(12.5, 15.5, size=4):
            f_p, _ = cl.frequency_integrand(g, float(xi))
            expected = predict_sign(order[0], order[1], order[2])
            if f_p != 0.0:
                assert math.copysign(1.0, f_p) == expected
            cache_hits += 1
    assert cache_hits == 100


def test_fluid_identical_layer_invariance():
    # prepending a fluid-identical layer only converts gap into layer thickness
    fl = cl.Material("f", cl.ConstantModel(3.0))
    base = cl.Stack(terminal=cl.Material("s", cl.ConstantModel(8.0)),
                    layers=(cl.Layer(cl.Material("x", cl.ConstantModel(1.5)), 5e-8),))
    padded = cl.Stack(terminal=base.terminal,
                      layers=(cl.Layer(fl, 1e-7),) + base.layers)
    other = half_space(cl.Material("o", cl.ConstantModel(2.0)))
    d = 4e-7
    g1 = cl.GapGeometry(base, other, fl, d)
    g2 = cl.GapGeometry(padded, other, fl, d - 1e-7)
    for xi in (1e13, 2e14, 1e15):
        a, _ = cl.frequency_integrand(g1, xi)
        b, _ = cl.frequency_integrand(g2, xi)
        assert a == pytest.approx(b, rel=1e-10)


def test_integrand_decay_beyond_cutoff(library):
    g = cl.GapGeometry(half_space(library["teflon"]), half_space(library["silicon"]),
                       library["ethanol"], 3e-7)
    xi0 = 10.0 * C / (2.0 * g.separation)
    xis = xi0 * np.array([1.0, 1.3, 1.7, 2.3, 3.0])
    vals = [abs(cl.frequency_integrand(g, float(x))[0]) for x in xis]
    assert all(b < a for a, b in zip(vals, vals[1:]))

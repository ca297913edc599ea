import numpy as np
import pytest

import casilift as cl
from casilift.config import bundled_materials_path


@pytest.fixture(scope="session")
def library():
    return cl.load_material_library(bundled_materials_path())


@pytest.fixture(scope="session")
def vacuum():
    return cl.Material("vacuum", cl.ConstantModel(1.0))


@pytest.fixture(scope="session")
def mirror():
    return cl.Material("mirror", cl.IdealMetalModel())


@pytest.fixture(scope="session")
def mirror_gap(vacuum, mirror):
    """Two ideal-metal half-spaces across vacuum at 100 nm."""
    hs = cl.Stack(terminal=mirror)
    return cl.GapGeometry(hs, hs, vacuum, 1.0e-7)


def half_space(material):
    return cl.Stack(terminal=material)


def random_material(rng, tag=""):
    kind = rng.integers(0, 3)
    if kind == 0:
        return cl.Material(f"c{tag}", cl.ConstantModel(1.0 + 10.0 * rng.random()))
    if kind == 1:
        terms = tuple((0.2 + 3.0 * rng.random(), 10 ** rng.uniform(13.5, 16.3), 0.0)
                      for _ in range(rng.integers(1, 4)))
        return cl.Material(f"o{tag}", cl.OscillatorModel(1.0 + 0.2 * rng.random(), terms))
    return cl.Material(f"d{tag}", cl.DrudeModel(10 ** rng.uniform(14.0, 16.2),
                                                10 ** rng.uniform(12.0, 14.0), 1.0 + rng.random()))


def random_dielectric(rng, tag=""):
    while True:
        m = random_material(rng, tag)
        if not m.is_metallic:
            return m


def random_stack(rng, max_layers=5, tag=""):
    n = rng.integers(0, max_layers + 1)
    layers = tuple(cl.Layer(random_material(rng, f"{tag}l{j}"), 10 ** rng.uniform(-9.0, -6.5))
                   for j in range(n))
    return cl.Stack(terminal=random_material(rng, f"{tag}t"), layers=layers)

"""测试公共夹具: 小型玩具体系"""

import numpy as np
import pytest

from data.presets import preset_definition
from dynamics.propagator import TwoSurfaceHamiltonian
from molecule.system import build_system


@pytest.fixture(scope="session")
def harmonic_system():
    """等频率位移谐振子预设 (128 点网格, 20 + 20 个能级)"""
    return build_system(preset_definition("harmonic"))


@pytest.fixture
def toy_hamiltonian():
    """4 个基态能级 + 3 个激发态能级的显式哈密顿量"""
    rng = np.random.default_rng(7)
    ground = np.array([0.0, 0.010, 0.0195, 0.0285])
    excited = np.array([0.0, 0.011, 0.0215])
    eta = rng.uniform(0.1, 0.6, size=(3, 4))
    return TwoSurfaceHamiltonian(ground, excited, eta, electronic_gap=0.1, carrier=0.1)


@pytest.fixture
def two_level():
    """一个共振的基态能级 (v=1) 加一个远离共振的目标能级 (v=0), 一个激发态能级"""
    return TwoSurfaceHamiltonian(np.array([-1.0, 0.0]), np.array([0.0]), np.array([[1.0, 1.0]]))


def random_ensemble(rng, dim, n_members):
    """归一化的随机复系综, 每列一个成员"""
    amplitudes = rng.normal(size=(dim, n_members)) + 1j * rng.normal(size=(dim, n_members))
    return amplitudes / np.linalg.norm(amplitudes, axis=0)

from pathlib import Path

import numpy as np
import pytest

from dephasing.bath import BathModel, tabulate
from dephasing.twoqubit import PureStateAmplitudes, TwoQubitParams, build_model

REPO_ROOT = Path(__file__).resolve().parent.parent

REFERENCE_MODES = [(0.3, 0.7), (0.25, 1.1), (0.2, 1.6), (0.15, 2.3), (0.1, 3.1)]


@pytest.fixture(scope="session")
def repo_root():
    return REPO_ROOT


@pytest.fixture(scope="session")
def reference_bath():
    return BathModel.discrete(REFERENCE_MODES, 0.5)


@pytest.fixture(scope="session")
def reference_model():
    return build_model(TwoQubitParams(omega_a=1.0, omega_b=1.3, j=0.2))


@pytest.fixture(scope="session")
def reference_table(reference_bath):
    return tabulate(reference_bath, 0.0, 10.0, 1000)


@pytest.fixture(scope="session")
def single_mode_bath():
    return BathModel.discrete([(1.0, 1.0)], 0.0)


@pytest.fixture(scope="session")
def ohmic_bath():
    return BathModel.ohmic_bath(0.05, 5.0, 2.0)


@pytest.fixture(scope="session")
def ohmic_table(ohmic_bath):
    # covers [5 tau_phi, 10 tau_phi] = [3.98, 7.96]
    return tabulate(ohmic_bath, 0.0, 8.5, 850)


@pytest.fixture(scope="session")
def long_ohmic_table(ohmic_bath):
    # covers [10 tau_phi, 20 tau_phi] = [7.96, 15.9]
    return tabulate(ohmic_bath, 0.0, 16.5, 1650)


@pytest.fixture
def rng():
    return np.random.default_rng(234)


@pytest.fixture
def random_amplitudes():
    """Factory for Haar-like random pure states: random_amplitudes(rng) -> PureStateAmplitudes."""

    def make(generator: np.random.Generator) -> PureStateAmplitudes:
        raw = generator.normal(size=4) + 1j * generator.normal(size=4)
        return PureStateAmplitudes.normalized(raw)

    return make

import pytest

from platoonsim import ModelParams, load_preset, simulate


@pytest.fixture(scope="session")
def reference_params():
    return ModelParams(k_v=1.0, k_d=0.2, k=0.3, tau_s=1.4, v_bar=2.0,
                       u_min=0.1, u_max=1.95)


@pytest.fixture(scope="session")
def fig1_left_scenario():
    return load_preset("fig1_left").scenario


@pytest.fixture(scope="session")
def fig1_left_result(fig1_left_scenario):
    return simulate(fig1_left_scenario)


@pytest.fixture(scope="session")
def fig4_scenario():
    return load_preset("fig4").scenario


@pytest.fixture(scope="session")
def fig4_result(fig4_scenario):
    return simulate(fig4_scenario)

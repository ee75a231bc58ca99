import math

import pytest

from chiralpair.params import EmitterParams, preset_emitter


@pytest.fixture
def qd1() -> EmitterParams:
    return preset_emitter("qd1")


@pytest.fixture
def qd1_nojitter(qd1) -> EmitterParams:
    return qd1.replace(jitter_sigma=0.0)


def make_params(phi=0.12 * math.pi, fss_ghz=12.78, gamma=8.35, sigma=0.0):
    return EmitterParams(
        gamma_x=gamma,
        fss=2 * math.pi * fss_ghz,
        phi=phi,
        jitter_sigma=sigma,
        rep_period=1e3 / 76.148,
    )

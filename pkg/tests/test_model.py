import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from chiralpair.model import (
    DegenerateStateError,
    amplitude_norm,
    amplitude_vector,
    amplitudes,
    coincidence_probability,
    total_coincidence_probability,
)
from chiralpair.params import PORT_PAIRS, EmitterParams, PortPair

from conftest import make_params

SQRT2 = math.sqrt(2.0)

random_params = st.builds(
    make_params,
    phi=st.floats(-math.pi, math.pi),
    fss_ghz=st.floats(0.5, 40.0),
    gamma=st.floats(0.5, 20.0),
)
delays = st.floats(0.0, 2.0)


def test_chiral_point_amplitudes_at_zero_delay():
    p = make_params(phi=math.pi / 2)
    a = amplitudes(p, 0.0)
    # e^{-i pi} + 1 = 0 kills the same-port amplitude
    assert a.psi_aa == pytest.approx(0.0, abs=1e-12)
    assert a.psi_ab == pytest.approx(-2 * SQRT2 * p.gamma_x)
    assert a.psi_ab == a.psi_ba


def test_nonchiral_state_is_uniform():
    p = make_params(phi=0.0)
    for tau in (0.0, 0.1, 0.37):
        a = amplitudes(p, tau)
        expected = -2 * SQRT2 * p.gamma_x * math.cos(p.fss * tau / 2) * math.exp(
            -p.gamma_x * tau / 2
        )
        for psi in (a.psi_aa, a.psi_ab, a.psi_ba, a.psi_bb):
            assert psi == pytest.approx(expected, rel=1e-12)


def test_amplitudes_regression_fixture():
    # frozen from a 50-digit evaluation of the amplitude formulas
    p = make_params()
    a = amplitudes(p, 0.039)
    assert a.psi_aa == pytest.approx(6.7827574326350298 - 2.6854836444611314j, rel=1e-14)
    assert a.psi_ab == pytest.approx(-0.099614519907998641 + 0j, rel=1e-13)
    assert a.psi_bb == pytest.approx(-6.9549878123916051 - 2.7536744757726276j, rel=1e-14)
    assert amplitude_norm(a) == pytest.approx(109.1920454888244, rel=1e-14)


def test_negative_delay_rejected():
    p = make_params()
    with pytest.raises(ValueError):
        amplitudes(p, -0.01)
    with pytest.raises(ValueError):
        coincidence_probability(p, -1e-9, PortPair.AA)


def test_magnitude_bound():
    p = make_params(phi=0.3)
    for tau in np.linspace(0, 1, 50):
        vec = amplitudes(p, tau).as_vector()
        assert np.all(np.abs(vec) <= 2 * SQRT2 * p.gamma_x + 1e-12)


def test_coincidence_zero_at_chiral_point():
    p = make_params(phi=math.pi / 2)
    assert coincidence_probability(p, 0.0, PortPair.AA) == pytest.approx(0.0, abs=1e-12)


def test_nonchiral_configs_identical():
    p = make_params(phi=0.0)
    tau = np.linspace(0, 1, 200)
    aa = coincidence_probability(p, tau, PortPair.AA)
    ab = coincidence_probability(p, tau, PortPair.AB)
    np.testing.assert_allclose(aa, ab, rtol=1e-12)


def test_peak_offset_between_configs_is_2phi_over_s():
    # the same-port oscillation leads the different-port one by 2 phi in phase
    p = make_params()
    tau = np.linspace(0.0, 0.5, 500001)
    aa = coincidence_probability(p, tau, PortPair.AA) * np.exp(p.gamma_x * tau)
    ab = coincidence_probability(p, tau, PortPair.AB) * np.exp(p.gamma_x * tau)
    period = 2 * math.pi / p.fss
    sel = (tau > 2 * period) & (tau < 3 * period)
    t_aa = tau[sel][np.argmax(aa[sel])]
    t_ab = tau[sel][np.argmax(ab[sel])]
    offset = (t_ab - t_aa) % period
    assert offset == pytest.approx(2 * p.phi / p.fss, abs=2 * (tau[1] - tau[0]))


@given(p=random_params, tau=delays)
@settings(max_examples=100, deadline=None)
def test_probability_matches_squared_amplitude(p, tau):
    a = amplitudes(p, tau)
    for config in PORT_PAIRS:
        prob = coincidence_probability(p, tau, config)
        assert prob >= 0
        assert prob == pytest.approx(abs(a[config]) ** 2, rel=1e-12, abs=1e-9)


@given(p=random_params, tau=delays)
@settings(max_examples=100, deadline=None)
def test_total_probability_equals_norm(p, tau):
    a = amplitudes(p, tau)
    total = sum(coincidence_probability(p, tau, c) for c in PORT_PAIRS)
    # phi = 0 with fss*tau an odd multiple of pi zeroes all four amplitudes;
    # amplitude_norm deliberately rejects that point
    assume(total > 1e-30)
    assert total == pytest.approx(amplitude_norm(a), rel=1e-12)
    assert total == pytest.approx(total_coincidence_probability(p, tau), rel=1e-12)


@given(p=random_params, tau=delays)
@settings(max_examples=100, deadline=None)
def test_swap_symmetry(p, tau):
    # exchanging the two ports is the same as negating the chiral phase
    flipped = p.replace(phi=-p.phi)
    assert coincidence_probability(p, tau, PortPair.AA) == pytest.approx(
        coincidence_probability(flipped, tau, PortPair.BB), rel=1e-12, abs=1e-12
    )
    assert coincidence_probability(p, tau, PortPair.AB) == pytest.approx(
        coincidence_probability(flipped, tau, PortPair.AB), rel=1e-12, abs=1e-12
    )


def test_envelope_is_periodic():
    p = make_params(phi=0.31, fss_ghz=9.0)
    period = 2 * math.pi / p.fss
    tau = np.linspace(0, 4 * period, 1000)
    for config in PORT_PAIRS:
        env = coincidence_probability(p, tau, config) * np.exp(p.gamma_x * tau)
        env_shift = coincidence_probability(p, tau + period, config) * np.exp(
            p.gamma_x * (tau + period)
        )
        assert env.max() <= 8 * p.gamma_x**2 * (1 + 1e-12)
        np.testing.assert_allclose(env, env_shift, rtol=1e-9, atol=1e-9)


def test_norm_brute_force_oracle():
    rng = np.random.default_rng(7)
    for _ in range(20):
        p = make_params(
            phi=rng.uniform(-math.pi, math.pi),
            fss_ghz=rng.uniform(1, 30),
            gamma=rng.uniform(1, 15),
        )
        tau = rng.uniform(0, 1)
        a = amplitudes(p, tau)
        brute = sum(abs(x) ** 2 for x in a.as_vector())
        assert amplitude_norm(a) == pytest.approx(brute, rel=1e-12)


def test_degenerate_norm_raises():
    from chiralpair.model import TwoPhotonAmplitudes

    zero = TwoPhotonAmplitudes(0j, 0j, 0j, 0j, tau=0.1)
    with pytest.raises(DegenerateStateError):
        amplitude_norm(zero)


def test_amplitude_vector_matches_scalar_path():
    p = make_params(phi=1.0)
    tau = np.array([0.0, 0.05, 0.41])
    vec = amplitude_vector(p, tau)
    for j, t in enumerate(tau):
        a = amplitudes(p, float(t))
        np.testing.assert_allclose(vec[:, j], a.as_vector(), rtol=1e-15)

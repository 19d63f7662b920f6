import math

import pytest

from app.core.errors import ParameterError
from app.models.physics import (
    epsilon_from_kbar,
    kbar_from_period,
    period_from_kbar,
    scaled_time,
    thermal_ensemble,
    thermal_sigma_beta,
)
from app.models.schemas import GaussianBeta, GaussianN0, KickParams, PhysicalConstants


class TestKbarFromPeriod:
    def test_published_periods(self):
        assert 6.25 <= kbar_from_period(32.5e-6) <= 6.35
        assert kbar_from_period(32.5e-6) == pytest.approx(6.3, abs=0.01)
        assert kbar_from_period(30.5e-6) == pytest.approx(5.9, abs=0.03)

    def test_linear_in_period(self):
        assert kbar_from_period(40e-6) == pytest.approx(2.0 * kbar_from_period(20e-6), rel=1e-14)

    def test_rejects_non_positive_period(self):
        with pytest.raises(ParameterError):
            kbar_from_period(0.0)
        with pytest.raises(ParameterError):
            kbar_from_period(-1e-6)

    def test_period_round_trip(self):
        for period in (1e-6, 30.5e-6, 32.5e-6, 1e-3):
            assert period_from_kbar(kbar_from_period(period)) == pytest.approx(period, rel=1e-12)

    def test_custom_constants(self):
        consts = PhysicalConstants(recoil_frequency=1000.0)
        assert kbar_from_period(1e-3, consts) == pytest.approx(8.0)


class TestEpsilonFromKbar:
    def test_exact_resonances(self):
        assert epsilon_from_kbar(2 * math.pi) == (0.0, 1)
        assert epsilon_from_kbar(4 * math.pi) == (0.0, 2)

    def test_near_resonance(self):
        eps, ell = epsilon_from_kbar(6.3)
        assert ell == 1
        assert eps == pytest.approx(0.016815, abs=1e-5)

    def test_identity_on_split(self):
        for ell in range(1, 11):
            for eps in (-3.1, -0.5, -1e-6, 0.0, 1e-6, 0.5, 3.1):
                got_eps, got_ell = epsilon_from_kbar(2 * math.pi * ell + eps)
                assert got_ell == ell
                assert got_eps == pytest.approx(eps, abs=1e-12)

    def test_rejects_kbar_below_pi(self):
        with pytest.raises(ParameterError):
            epsilon_from_kbar(math.pi)
        with pytest.raises(ParameterError):
            epsilon_from_kbar(1.0)

    def test_kick_params_expose_split(self):
        params = KickParams(k=4.2, kbar=6.3, kicks=14)
        assert params.ell == 1
        assert params.epsilon == pytest.approx(6.3 - 2 * math.pi)


class TestThermal:
    def test_ten_microkelvin_rubidium(self):
        assert thermal_sigma_beta(10e-6) == pytest.approx(2.6, abs=0.05)

    def test_square_root_law(self):
        assert thermal_sigma_beta(40e-6) == pytest.approx(2.0 * thermal_sigma_beta(10e-6), rel=1e-12)

    def test_rejects_non_positive_temperature(self):
        with pytest.raises(ParameterError):
            thermal_sigma_beta(0.0)

    def test_thermal_ensemble_laws(self):
        spec = thermal_ensemble(10e-6, atom_count=100, seed=3)
        assert isinstance(spec.beta_law, GaussianBeta)
        assert isinstance(spec.n0_law, GaussianN0)
        assert spec.beta_law.sigma == pytest.approx(thermal_sigma_beta(10e-6))
        assert spec.atom_count == 100

    def test_wavelength_is_rubidium_d2(self):
        assert PhysicalConstants().wavelength == pytest.approx(780e-9, abs=2e-9)


def test_scaled_time():
    assert scaled_time(16, 4.2, 0.0104) == pytest.approx(16 * math.sqrt(4.2 * 0.0104))
    assert scaled_time(16, 4.2, -0.0104) == scaled_time(16, 4.2, 0.0104)

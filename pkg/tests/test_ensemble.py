import numpy as np
import pytest
from scipy import stats

from app.models.schemas import EnsembleSpec, GaussianBeta, GaussianN0, PointBeta, PointN0, UniformBeta
from app.services.ensemble import draw_phases, estimate_from_gains, noise_draws, sample_ensemble


class TestSampleEnsemble:
    def test_point_laws(self):
        atoms = sample_ensemble(EnsembleSpec(beta_law=PointBeta(value=0.5), n0_law=PointN0(value=0), atom_count=3))
        assert atoms.pairs() == [(0, 0.5)] * 3

    def test_uniform_mean(self):
        atoms = sample_ensemble(EnsembleSpec(beta_law=UniformBeta(), atom_count=100_000, seed=11))
        assert 0.497 <= atoms.beta.mean() <= 0.503

    def test_uniform_chi_square(self):
        atoms = sample_ensemble(EnsembleSpec(beta_law=UniformBeta(), atom_count=100_000, seed=12))
        counts, _ = np.histogram(atoms.beta, bins=50, range=(0.0, 1.0))
        assert stats.chisquare(counts).pvalue > 0.001

    def test_same_seed_reproduces(self):
        spec = EnsembleSpec(beta_law=GaussianBeta(sigma=2.6), n0_law=GaussianN0(sigma=2.6), atom_count=500, seed=5)
        a, b = sample_ensemble(spec), sample_ensemble(spec)
        np.testing.assert_array_equal(a.beta, b.beta)
        np.testing.assert_array_equal(a.n0, b.n0)

    def test_draws_do_not_depend_on_atom_count(self):
        small = sample_ensemble(EnsembleSpec(atom_count=10, seed=9))
        large = sample_ensemble(EnsembleSpec(atom_count=50, seed=9))
        np.testing.assert_array_equal(small.beta, large.beta[:10])

    def test_different_seeds_differ(self):
        a = sample_ensemble(EnsembleSpec(atom_count=100, seed=1))
        b = sample_ensemble(EnsembleSpec(atom_count=100, seed=2))
        assert not np.array_equal(a.beta, b.beta)

    def test_gaussian_laws_stay_in_range(self):
        spec = EnsembleSpec(beta_law=GaussianBeta(sigma=0.3, center=0.9), n0_law=GaussianN0(sigma=3.0),
                            atom_count=2000, seed=4)
        atoms = sample_ensemble(spec)
        assert np.all((atoms.beta >= 0.0) & (atoms.beta < 1.0))
        assert atoms.n0.dtype.kind == "i"
        assert abs(atoms.n0.mean()) < 0.5

    def test_initial_energy(self):
        atoms = sample_ensemble(EnsembleSpec(beta_law=PointBeta(value=0.5), n0_law=PointN0(value=2), atom_count=2))
        np.testing.assert_allclose(atoms.initial_energy, [3.125, 3.125])


class TestRandomStreams:
    def test_phases_shape_and_range(self):
        theta = draw_phases(3, atom_count=20, trajectories_per_atom=4)
        assert theta.shape == (20, 4)
        assert np.all((theta >= 0) & (theta < 2 * np.pi))

    def test_phases_prefix_stable(self):
        np.testing.assert_array_equal(draw_phases(3, 5, 2), draw_phases(3, 8, 2)[:5])

    def test_streams_are_separate_by_purpose(self):
        phases = draw_phases(3, 1, 2)[0] / (2 * np.pi)
        assert not np.allclose(phases, noise_draws(3, 0, 1)[0])


def test_estimate_from_gains():
    est = estimate_from_gains(np.array([1.0, 2.0, 3.0, 4.0]))
    assert est.mean == pytest.approx(2.5)
    assert est.stderr == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2.0)
    assert est.samples == 4
    assert estimate_from_gains(np.array([5.0])).stderr == 0.0

"""Unit tests for acquisition functions and penalized batch selection."""

import numpy as np
import pytest
from scipy.stats import norm

from src.core.acquisition import (
    AcquisitionKind,
    acq_ei,
    acq_lcb,
    acq_mpi,
    acquisition_values,
    candidate_set,
    desirability,
    propose_batch,
    select_penalized,
)
from src.core.surrogate import GpHyperparams, GpModel
from src.utils.errors import InsufficientCandidatesError


def sharp_optimum_model() -> GpModel:
    """2-D surrogate with one clear minimum near (0.7, 0.3)."""
    grid = np.linspace(0.05, 0.95, 5)
    x = np.array([[a, b] for a in grid for b in grid])
    y = 0.6 + 0.4 * np.sum((x - np.array([0.7, 0.3])) ** 2, axis=1)
    y[np.argmin(np.sum((x - np.array([0.7, 0.3])) ** 2, axis=1))] = 0.1
    hyper = GpHyperparams(lengthscales=[0.15, 0.15], signal_variance=0.05, noise_variance=1e-6, mean_const=0.6)
    return GpModel.from_hyperparams(x, y, hyper)


class TestAcquisitionFunctions:
    """Test cases for EI, MPI and LCB."""

    def test_ei_no_uncertainty_no_improvement(self):
        """Test EI is zero at the incumbent with no uncertainty."""
        assert acq_ei(0.45, 0.0, 0.45) == 0.0

    def test_ei_value(self):
        """Test EI at mu=0.5, s=0.1, best=0.45."""
        expected = -0.05 * norm.cdf(-0.5) + 0.1 * norm.pdf(-0.5)
        assert acq_ei(0.5, 0.1, 0.45) == pytest.approx(expected, abs=1e-12)
        assert acq_ei(0.5, 0.1, 0.45) == pytest.approx(0.019780, abs=1e-5)

    def test_ei_matches_quadrature(self):
        """Test EI equals the integral of max(best - f, 0) under the posterior."""
        f = np.linspace(0.5 - 10 * 0.1, 0.5 + 10 * 0.1, 200001)
        integrand = np.maximum(0.45 - f, 0.0) * norm.pdf(f, 0.5, 0.1)
        assert acq_ei(0.5, 0.1, 0.45) == pytest.approx(np.trapz(integrand, f), abs=1e-7)

    def test_ei_non_negative(self):
        """Test EI is never negative."""
        mu = np.linspace(0.0, 1.0, 50)
        assert np.all(acq_ei(mu, np.full(50, 0.05), 0.3) >= 0.0)

    def test_mpi_symmetric(self):
        """Test MPI at the incumbent is one half."""
        assert acq_mpi(0.45, 0.1, 0.45) == pytest.approx(0.5)

    def test_mpi_value(self):
        """Test MPI at mu=0.5, s=0.1, best=0.45."""
        assert acq_mpi(0.5, 0.1, 0.45) == pytest.approx(0.30854, abs=1e-5)

    def test_mpi_step_without_uncertainty(self):
        """Test MPI is a step function when s = 0."""
        assert acq_mpi(0.4, 0.0, 0.45) == 1.0
        assert acq_mpi(0.5, 0.0, 0.45) == 0.0

    def test_lcb_value(self):
        """Test LCB arithmetic."""
        assert acq_lcb(0.5, 0.1, 2.0) == pytest.approx(0.3)

    def test_lcb_rejects_non_positive_beta(self):
        """Test beta must be positive."""
        with pytest.raises(ValueError):
            acq_lcb(0.5, 0.1, 0.0)

    def test_lcb_small_beta_exploits(self):
        """Test a vanishing beta picks the lowest posterior mean."""
        model = sharp_optimum_model()
        candidates = candidate_set(model, 500, np.random.default_rng(0))
        mean, var = model.predict(candidates)
        values = acquisition_values(model, AcquisitionKind.LCB, candidates, beta=1e-12)
        assert int(np.argmin(values)) == int(np.argmin(mean))

    def test_ei_matches_quadrature_grid(self):
        """Test EI against quadrature on 100 seeded (mu, s, best) triples."""
        rng = np.random.default_rng(8)
        for mu, s, best in zip(rng.random(100), rng.uniform(0.01, 0.3, 100), rng.random(100)):
            f = np.linspace(mu - 10 * s, mu + 10 * s, 40001)
            integrand = np.maximum(best - f, 0.0) * norm.pdf(f, mu, s)
            assert acq_ei(mu, s, best) == pytest.approx(np.trapz(integrand, f), abs=1e-6)

    @pytest.mark.parametrize("s", [0.0, 0.02, 0.2])
    def test_ei_and_mpi_increase_with_incumbent(self, s):
        """Test EI and MPI never decrease as the incumbent loss rises."""
        bests = np.linspace(0.0, 1.0, 201)
        ei = acq_ei(0.5, s, bests)
        mpi = acq_mpi(0.5, s, bests)
        assert np.all(np.diff(ei) >= 0.0)
        assert np.all(np.diff(mpi) >= 0.0)

    @pytest.mark.parametrize("kind", [AcquisitionKind.EI, AcquisitionKind.MPI])
    def test_argmax_invariant_to_loss_shift(self, kind):
        """Test shifting every training loss by a constant keeps the EI/MPI argmax."""
        base = sharp_optimum_model()
        shifted = GpModel.from_hyperparams(
            base.train_x, base.train_y + 0.25,
            base.hyper.model_copy(update={"mean_const": base.hyper.mean_const + 0.25}),
        )
        candidates = candidate_set(base, 500, np.random.default_rng(2))
        a = acquisition_values(base, kind, candidates)
        b = acquisition_values(shifted, kind, candidates)
        assert int(np.argmax(a)) == int(np.argmax(b))
        np.testing.assert_allclose(a, b, atol=1e-9)

    def test_lcb_beta_sweep_explores_more(self):
        """Test a larger beta never selects a point with smaller posterior spread."""
        model = sharp_optimum_model()
        candidates = candidate_set(model, 1000, np.random.default_rng(6))
        _, var = model.predict(candidates)
        spreads = []
        for beta in (0.1, 1.0, 10.0):
            values = acquisition_values(model, AcquisitionKind.LCB, candidates, beta=beta)
            spreads.append(np.sqrt(var[int(np.argmin(values))]))
        assert spreads[0] <= spreads[1] <= spreads[2]

    def test_desirability_lcb_flips_sign(self):
        """Test LCB desirability ranks the lowest bound first."""
        values = np.array([0.3, 0.1, 0.5])
        assert int(np.argmax(desirability(AcquisitionKind.LCB, values))) == 1
        assert int(np.argmax(desirability(AcquisitionKind.EI, values))) == 2


class TestSelectPenalized:
    """Test cases for the greedy penalized selector."""

    def test_neighbour_suppressed(self):
        """Test the runner-up next to the first pick loses to a distant candidate."""
        scores = np.array([1.0, 0.9, 0.5])
        candidates = np.array([[0.0, 0.0], [0.01, 0.0], [0.5, 0.5]])
        assert select_penalized(scores, candidates, 2, 0.1) == [0, 2]

    def test_duplicates_never_repeat(self):
        """Test identical candidates cannot be picked twice."""
        scores = np.array([1.0, 1.0, 0.0])
        candidates = np.array([[0.2, 0.2], [0.2, 0.2], [0.9, 0.9]])
        chosen = select_penalized(scores, candidates, 2, 0.1)
        assert chosen == [0, 2]

    def test_runs_out_of_candidates(self):
        """Test asking for more distinct points than exist fails."""
        candidates = np.array([[0.2, 0.2], [0.2, 0.2]])
        with pytest.raises(InsufficientCandidatesError):
            select_penalized(np.array([1.0, 1.0]), candidates, 2, 0.1)


class TestProposeBatch:
    """Test cases for propose_batch."""

    def test_single_point_is_global_best(self):
        """Test b=1 returns the best candidate without penalization."""
        model = sharp_optimum_model()
        proposal = propose_batch(model, AcquisitionKind.EI, 1, 0.1, 512, np.random.default_rng(3))
        candidates = candidate_set(model, 512, np.random.default_rng(3))
        values = acquisition_values(model, AcquisitionKind.EI, candidates)
        np.testing.assert_array_equal(proposal.points[0], candidates[int(np.argmax(values))])

    def test_batch_spreads_out(self):
        """Test the penalized batch differs from the clustered raw top-10."""
        model = sharp_optimum_model()
        proposal = propose_batch(model, AcquisitionKind.EI, 10, 0.1, 2048, np.random.default_rng(4))
        candidates = candidate_set(model, 2048, np.random.default_rng(4))
        values = acquisition_values(model, AcquisitionKind.EI, candidates)
        raw_top = candidates[np.argsort(-values, kind="stable")[:10]]

        def min_pairwise(points):
            d = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=-1)
            return d[np.triu_indices(len(points), 1)].min()

        assert len(proposal) == 10
        assert min_pairwise(proposal.points) > 0.0
        assert min_pairwise(proposal.points) > min_pairwise(raw_top)
        assert {tuple(p) for p in proposal.points} != {tuple(p) for p in raw_top}

    def test_deterministic(self):
        """Test the same seed gives the same batch."""
        model = sharp_optimum_model()
        a = propose_batch(model, AcquisitionKind.MPI, 5, 0.1, 512, np.random.default_rng(9))
        b = propose_batch(model, AcquisitionKind.MPI, 5, 0.1, 512, np.random.default_rng(9))
        np.testing.assert_array_equal(a.points, b.points)
        np.testing.assert_array_equal(a.acq_values, b.acq_values)

    @pytest.mark.parametrize("kind", list(AcquisitionKind))
    def test_points_in_cube(self, kind):
        """Test every kind proposes points inside the unit cube."""
        proposal = propose_batch(sharp_optimum_model(), kind, 4, 0.1, 256, np.random.default_rng(1))
        assert proposal.kind is kind
        assert np.all((proposal.points >= 0.0) & (proposal.points <= 1.0))

    def test_pool_smaller_than_batch(self):
        """Test a pool smaller than the batch raises InsufficientCandidatesError."""
        with pytest.raises(InsufficientCandidatesError):
            propose_batch(sharp_optimum_model(), AcquisitionKind.EI, 10, 0.1, 5, np.random.default_rng(0))

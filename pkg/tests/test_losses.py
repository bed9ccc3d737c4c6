import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import norm

from scenepose.errors import DimMismatch, ValidationError
from scenepose.losses import (
    LOG_FLOOR,
    GaussianParams,
    attention_loss,
    colour_loss,
    depth_loss,
    gaussian_rgb_pdf,
    kl_diag_gaussian,
    scope_loss,
    total_loss,
    where_loss,
)

pos = st.floats(0.05, 5.0)
real = st.floats(-5.0, 5.0)


def perfect_value(sigma_std=0.1):
    return -3 * np.log(norm.pdf(0.0, loc=0.0, scale=sigma_std))


class TestColour:
    def test_perfect_reconstruction(self):
        obs = np.array([0.2, 0.5, 0.9])
        loss = colour_loss(obs, obs[None], [10.0], 0.1, 10.0)
        assert loss == pytest.approx(perfect_value(), abs=1e-9)
        assert loss == pytest.approx(-4.15, abs=2e-3)

    def test_pdf_matches_scipy(self, rng):
        obs = rng.uniform(size=3)
        cols = rng.uniform(size=(4, 3))
        expected = np.prod(norm.pdf(obs, loc=cols, scale=0.1), axis=-1)
        assert np.allclose(gaussian_rgb_pdf(obs, cols, 0.1), expected, rtol=1e-12)

    def test_vanishing_weight_is_floored(self):
        obs = np.array([0.2, 0.5, 0.9])
        loss = colour_loss(obs, obs[None], [0.0])
        assert loss == pytest.approx(-np.log(LOG_FLOOR))

    def test_split_component_is_equivalent(self):
        obs = np.array([0.3, 0.3, 0.3])
        c = np.array([0.35, 0.28, 0.3])
        one = colour_loss(obs, c[None], [8.0])
        two = colour_loss(obs, np.stack([c, c]), [4.0, 4.0])
        assert one == pytest.approx(two, abs=1e-12)

    def test_rejects_overfull_density(self):
        with pytest.raises(ValidationError):
            colour_loss(np.zeros(3), np.zeros((2, 3)), [6.0, 6.0])

    def test_minimised_at_observation(self):
        obs = np.array([0.4, 0.6, 0.1])
        h = 1e-4
        for ch in range(3):
            lo, hi = obs.copy(), obs.copy()
            lo[ch] -= h
            hi[ch] += h
            base = colour_loss(obs, obs[None], [7.0])
            assert colour_loss(obs, lo[None], [7.0]) > base
            assert colour_loss(obs, hi[None], [7.0]) > base

    def test_batch_sums(self, rng):
        obs = rng.uniform(size=(5, 3))
        cols = rng.uniform(size=(5, 2, 3))
        hat = rng.uniform(0, 5, (5, 2))
        total = colour_loss(obs, cols, hat)
        assert total == pytest.approx(sum(colour_loss(obs[i], cols[i], hat[i]) for i in range(5)))


class TestDepth:
    def test_closed_forms(self):
        assert depth_loss(10.0, 0.0, 1.0) == pytest.approx(-np.log(10.0), abs=1e-12)
        assert depth_loss(1.0, 1.0, 1.0) == 1.0

    @given(st.floats(0, 10), st.floats(0, 10), st.floats(0.01, 10), st.floats(1e-3, 5))
    def test_increasing_in_air_density(self, s, a, rho, bump):
        assert depth_loss(s, a + bump, rho) > depth_loss(s, a, rho)

    def test_zero_surface_density_is_finite(self):
        assert np.isfinite(depth_loss(0.0, 0.0, 1.0))

    def test_density_must_be_positive(self):
        with pytest.raises(ValidationError):
            depth_loss(1.0, 1.0, 0.0)


class TestKL:
    def test_identical(self):
        q = GaussianParams([0.3, -1.0], [0.5, 2.0])
        assert kl_diag_gaussian(q, q) == pytest.approx(0.0, abs=1e-9)

    def test_shifted_mean(self):
        assert kl_diag_gaussian(GaussianParams([1.0], [1.0]), GaussianParams([0.0], [1.0])) == pytest.approx(0.5, abs=1e-9)

    def test_wider(self):
        value = kl_diag_gaussian(GaussianParams([0.0], [2.0]), GaussianParams([0.0], [1.0]))
        assert value == pytest.approx(np.log(0.5) + 2.0 - 0.5, abs=1e-9)
        assert value == pytest.approx(0.80685, abs=1e-5)

    def test_dimension_mismatch(self):
        with pytest.raises(DimMismatch):
            kl_diag_gaussian(GaussianParams([0.0], [1.0]), GaussianParams([0.0, 0.0], [1.0, 1.0]))
        with pytest.raises(DimMismatch):
            GaussianParams([0.0, 1.0], [1.0])
        with pytest.raises(ValidationError):
            GaussianParams([0.0], [0.0])

    @given(real, pos, real, pos)
    def test_nonnegative(self, m1, s1, m2, s2):
        assert kl_diag_gaussian(GaussianParams([m1], [s1]), GaussianParams([m2], [s2])) >= -1e-12


class TestWhere:
    def test_examples(self):
        assert where_loss([[1, 2, 3]], [[1, 2, 3]]) == 0.0
        assert where_loss([[0, 0, 0]], [[1, 0, 0]]) == 1.0

    def test_idle_slots_excluded(self):
        value = where_loss([[0, 0, 0], [9, 9, 9]], [[1, 0, 0], [0, 0, 0]], active=[True, False])
        assert value == 1.0

    def test_length_mismatch(self):
        with pytest.raises(DimMismatch):
            where_loss([[0, 0, 0]], [[0, 0, 0], [1, 1, 1]])


class TestAttention:
    def setup_method(self):
        self.obs = np.array([[[0.1, 0.2, 0.3]]])
        self.cols = np.array([[[[0.1, 0.2, 0.3], [0.9, 0.9, 0.9]]]])

    def test_perfect(self):
        masks = np.array([[[1.0]], [[0.0]]])
        hat = np.array([[[10.0, 0.0]]])
        assert attention_loss(masks, self.cols, hat, self.obs) == pytest.approx(perfect_value(), abs=1e-9)

    def test_zero_masks_floored(self):
        masks = np.zeros((2, 1, 1))
        hat = np.array([[[10.0, 0.0]]])
        assert attention_loss(masks, self.cols, hat, self.obs) == pytest.approx(-2 * np.log(LOG_FLOOR))

    def test_mass_on_empty_slot_is_worse(self):
        hat = np.array([[[6.0, 0.0]]])
        cols = np.array([[[[0.1, 0.2, 0.3], [0.1, 0.2, 0.3]]]])
        good = attention_loss(np.array([[[0.8]], [[0.2]]]), cols, hat, self.obs)
        bad = attention_loss(np.array([[[0.2]], [[0.8]]]), cols, hat, self.obs)
        assert bad > good

    def test_valid_mask_selects_pixels(self, rng):
        masks = rng.dirichlet([1, 1], size=(2, 3)).transpose(2, 0, 1)
        cols = rng.uniform(size=(2, 3, 2, 3))
        hat = rng.uniform(0, 5, (2, 3, 2))
        obs = rng.uniform(size=(2, 3, 3))
        valid = np.zeros((2, 3), dtype=bool)
        valid[0, 1] = True
        one = attention_loss(masks[:, :1, 1:2], cols[:1, 1:2], hat[:1, 1:2], obs[:1, 1:2])
        assert attention_loss(masks, cols, hat, obs, valid=valid) == pytest.approx(one)

    def test_shape_check(self):
        with pytest.raises(DimMismatch):
            attention_loss(np.zeros((3, 1, 1)), self.cols, np.array([[[1.0, 1.0]]]), self.obs)


class TestScopeAndTotal:
    def test_scope(self):
        assert scope_loss(np.zeros((3, 3))) == 0.0
        assert scope_loss(np.full((2, 2), 0.5)) == 2.0
        assert scope_loss(np.ones((4, 5))) == 20.0

    def test_total(self):
        assert total_loss().total == 0.0
        b = total_loss(1, 2, 3, 4, 5, 6)
        assert b.total == 21.0
        assert (b.colour, b.depth, b.kl, b.where, b.att, b.scope) == (1, 2, 3, 4, 5, 6)

    @given(st.lists(st.floats(-1e6, 1e6), min_size=6, max_size=6))
    def test_additive(self, parts):
        b = total_loss(*parts)
        assert b.total == pytest.approx(sum(parts), abs=1e-6)
        assert set(b.as_dict()) == {"colour", "depth", "kl", "where", "att", "scope", "total"}

import numpy as np
import pytest

from lorec.exceptions import NumericError
from lorec.models import (
    gen_compound_symmetry,
    gen_factor,
    gen_spike,
    load_model,
    sample_gaussian,
    save_model,
)

ALL_GENERATORS = [
    (gen_factor, 12),
    (gen_compound_symmetry, 15),
    (gen_spike, 12),
]


@pytest.mark.parametrize("gen,p", ALL_GENERATORS)
class TestSharedInvariants:
    def test_exact_sum_and_symmetry(self, gen, p):
        m = gen(p, seed=5)
        assert np.array_equal(m.sigma, m.low_rank + m.sparse)
        assert np.array_equal(m.sigma, m.sigma.T)

    def test_positive_definite(self, gen, p):
        m = gen(p, seed=5)
        assert np.linalg.eigvalsh(m.sigma).min() > 0

    def test_true_rank_matches_low_rank_spectrum(self, gen, p):
        m = gen(p, seed=5)
        w = np.abs(np.linalg.eigvalsh(m.low_rank))
        assert int((w > 1e-8 * w.max()).sum()) == m.true_rank

    def test_pure_function_of_seed(self, gen, p):
        a, b = gen(p, seed=9), gen(p, seed=9)
        assert np.array_equal(a.sigma, b.sigma)
        c = gen(p, seed=10)
        assert not np.array_equal(a.sigma, c.sigma)


class TestFactor:
    def test_eigenvalues_three_nines_rest_ones(self):
        m = gen_factor(30, seed=1)
        w = np.sort(np.linalg.eigvalsh(m.sigma))
        assert np.allclose(w[:27], 1.0, atol=1e-10)
        assert np.allclose(w[27:], 9.0, atol=1e-10)

    def test_rank_and_support(self):
        m = gen_factor(10, seed=2)
        assert m.true_rank == 3
        assert m.true_support == {(i, i) for i in range(10)}

    def test_trace(self):
        m = gen_factor(25, seed=3)
        assert np.trace(m.sigma) == pytest.approx(25 + 24, abs=1e-9)

    def test_rejects_small_p(self):
        with pytest.raises(ValueError):
            gen_factor(3, seed=0)


class TestCompoundSymmetry:
    def test_diagonal_exactly_one(self):
        m = gen_compound_symmetry(20, seed=4)
        assert np.all(np.diag(m.sigma) == 1.0)

    def test_within_and_cross_block_values(self):
        m = gen_compound_symmetry(20, seed=4)
        off = m.sigma[~np.eye(20, dtype=bool)]
        assert set(np.round(off, 12)) <= {0.2, 0.6}
        within = (m.sparse != 0) & ~np.eye(20, dtype=bool)
        assert np.allclose(m.sigma[within], 0.6)

    def test_rank_and_support_size(self):
        m = gen_compound_symmetry(25, seed=7)
        assert m.true_rank == 1
        assert len(m.true_support) == 25 * 5

    def test_permutation_preserves_eigenvalues(self):
        m = gen_compound_symmetry(20, seed=8)
        base = gen_compound_symmetry(20, seed=9)
        assert np.allclose(
            np.sort(np.linalg.eigvalsh(m.sigma)),
            np.sort(np.linalg.eigvalsh(base.sigma)),
            atol=1e-9,
        )

    def test_rejects_indivisible_p(self):
        with pytest.raises(ValueError):
            gen_compound_symmetry(12, seed=0)


class TestSpike:
    def test_unit_spike_eigenvalue(self):
        m = gen_spike(16, seed=1)
        w = np.linalg.eigvalsh(m.low_rank)
        assert w[-1] == pytest.approx(16.0, abs=1e-12)
        assert np.allclose(w[:-1], 0.0, atol=1e-12)

    def test_sparse_block_values(self):
        m = gen_spike(16, seed=1)
        assert np.all(np.diag(m.sparse) == 1.0)
        within = (m.sparse != 0) & ~np.eye(16, dtype=bool)
        assert np.allclose(m.sparse[within], 0.4)

    def test_support_magnitude_at_p120(self):
        m = gen_spike(120, seed=2)
        nz = np.abs(m.low_rank[m.low_rank != 0.0])
        assert np.allclose(nz, 16.0 / 60.0, atol=1e-12)

    def test_rejects_indivisible_p(self):
        with pytest.raises(ValueError):
            gen_spike(10, seed=0)


class TestSampleGaussian:
    def test_deterministic(self):
        m = gen_factor(8, seed=3)
        a = sample_gaussian(m, 50, seed=4)
        b = sample_gaussian(m, 50, seed=4)
        assert np.array_equal(a, b)
        c = sample_gaussian(m, 50, seed=5)
        assert not np.array_equal(a, c)

    def test_large_sample_covariance_close(self):
        m = gen_factor(8, seed=6)
        x = sample_gaussian(m, 200_000, seed=6)
        emp = np.cov(x, rowvar=False)
        assert np.abs(emp - m.sigma).max() <= 0.05

    def test_mean_near_zero(self):
        m = gen_factor(8, seed=7)
        n = 50_000
        x = sample_gaussian(m, n, seed=7)
        assert np.abs(x.mean(axis=0)).max() <= 4.0 / np.sqrt(n) * np.sqrt(np.diag(m.sigma)).max()

    def test_rejects_nonpositive_n(self):
        m = gen_factor(8, seed=8)
        with pytest.raises(ValueError):
            sample_gaussian(m, 0, seed=0)

    def test_non_pd_model_raises(self):
        m = gen_factor(8, seed=9)
        object.__setattr__(m, "sigma", m.sigma - 2.0 * np.eye(8))
        with pytest.raises(NumericError):
            sample_gaussian(m, 5, seed=0)


class TestDirectorySerialization:
    @pytest.mark.parametrize("gen,p", ALL_GENERATORS)
    def test_round_trip(self, gen, p, tmp_path):
        m = gen(p, seed=11)
        save_model(m, tmp_path / "model")
        back = load_model(tmp_path / "model")
        assert np.array_equal(back.sigma, m.sigma)
        assert np.array_equal(back.low_rank, m.low_rank)
        assert np.array_equal(back.sparse, m.sparse)
        assert back.true_rank == m.true_rank
        assert back.true_support == m.true_support
        assert back.family == m.family

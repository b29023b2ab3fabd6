import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from glw.domains import (
    DomainSpec, derive_seed, draw_samples, export_domain_csv, export_world_csv, fit_autoencoder,
    fit_classifier, generate_world, import_domain_csv, import_world_csv, make_renderer, oracle_linear_module,
    render_domain, train_modules,
)
from glw.errors import ConfigError, DegenerateLabelsError, DimensionError, SeparationInfeasibleError


@pytest.fixture(scope="module")
def world():
    return generate_world(0, 16, 10, 2000)


class TestWorld:
    def test_empty_sample_matrix(self):
        w = generate_world(1, 4, 3, 0)
        assert w.samples.shape == (0, 4)
        assert w.means.shape == (3, 4) and np.all(np.isfinite(w.means))

    def test_same_seed_bit_identical(self):
        a, b = generate_world(5, 8, 4, 300), generate_world(5, 8, 4, 300)
        assert a.samples.tobytes() == b.samples.tobytes()
        assert a.labels.tobytes() == b.labels.tobytes()

    def test_min_distance_exhaustive(self, world):
        threshold = world.delta_sep * world.scales.mean()
        gaps = [np.sqrt(np.sum((world.means[a] - world.means[b]) ** 2))
                for a in range(10) for b in range(a + 1, 10)]
        assert len(gaps) == 45
        assert min(gaps) >= threshold
        assert min(gaps) >= 4.0 * 0.3

    def test_scales_and_labels(self, world):
        assert world.scales.min() >= 0.3 and world.scales.max() <= 1.0
        assert set(np.unique(world.labels)) <= set(range(10))
        assert len(world.labels) == world.n_samples

    def test_rejects_degenerate_sizes(self):
        with pytest.raises(ConfigError):
            generate_world(0, 1, 3, 10)
        with pytest.raises(ConfigError):
            generate_world(0, 4, 1, 10)

    def test_infeasible_separation(self):
        with pytest.raises(SeparationInfeasibleError):
            generate_world(0, 2, 40, 10, delta_sep=50.0)

    def test_draw_samples_is_a_separate_stream(self, world):
        z, labels = draw_samples(world, 50)
        assert z.shape == (50, 16)
        assert not np.array_equal(z, world.samples[:50])
        z2, _ = draw_samples(world, 50)
        np.testing.assert_array_equal(z, z2)


def test_derive_seed_stable_across_new_labels():
    a = derive_seed(3, "domain", "vision")
    assert derive_seed(3, "domain", "vision") == a
    assert derive_seed(3, "domain", "touch") != a
    assert derive_seed(4, "domain", "vision") != a


class TestRendering:
    def test_orthonormal_columns(self, world):
        r = make_renderer(DomainSpec("v", 32), 16, world.seed)
        np.testing.assert_allclose(r.matrix.T @ r.matrix, np.eye(16), atol=1e-10)

    def test_norm_preserved(self, world):
        d = render_domain(world, DomainSpec("v", 32))
        np.testing.assert_allclose(np.linalg.norm(d.x, axis=1), np.linalg.norm(world.samples, axis=1), atol=1e-10)

    def test_z_recoverable(self, world):
        d = render_domain(world, DomainSpec("v", 32))
        np.testing.assert_allclose(d.x @ d.renderer.matrix, world.samples, atol=1e-10)

    def test_zero_rows_leave_only_noise(self, world):
        spec = DomainSpec("n", 20, noise_std=0.5)
        z = np.zeros((300, 16))
        d = render_domain(world, spec, z=z)
        noise = np.random.default_rng(derive_seed(d.renderer.seed, "noise", "train")).normal(0.0, 0.5, (300, 20))
        np.testing.assert_array_equal(d.x, noise)

    def test_tanh_rendering(self, world):
        d = render_domain(world, DomainSpec("l", 24, "nonlinear-tanh"))
        np.testing.assert_allclose(d.x, np.tanh(world.samples @ d.renderer.matrix.T), atol=1e-15)

    def test_domain_seeds_independent_of_other_domains(self, world):
        a = render_domain(world, DomainSpec("a", 20)).x
        render_domain(world, DomainSpec("b", 20))
        np.testing.assert_array_equal(render_domain(world, DomainSpec("a", 20)).x, a)

    def test_spec_checks(self):
        with pytest.raises(ConfigError):
            DomainSpec("x", 8, rendering="spiral")
        with pytest.raises(ConfigError):
            DomainSpec("x", 8, noise_std=-1.0)
        with pytest.raises(ConfigError):
            make_renderer(DomainSpec("x", 3), 4, 0)


class TestModules:
    def test_oracle_linear_exact(self, world):
        d = render_domain(world, DomainSpec("v", 32))
        m = oracle_linear_module(d)
        assert m.final_loss < 1e-16
        np.testing.assert_allclose(m.decode(m.encode(d.x)), d.x, atol=1e-8)

    def test_oracle_linear_latent_is_rotated(self, world):
        d = render_domain(world, DomainSpec("v", 32))
        v = oracle_linear_module(d).encode(d.x)
        assert not np.allclose(v, world.samples, atol=1e-3)
        np.testing.assert_allclose(np.linalg.norm(v, axis=1), np.linalg.norm(world.samples, axis=1), atol=1e-10)

    def test_autoencoder_reconstructs(self):
        w = generate_world(0, 8, 4, 500)
        d = render_domain(w, DomainSpec("a", 12))
        m = fit_autoencoder(d, 8, 200, 0)
        assert m.final_loss < 1e-2
        # the latent carries the hidden sample: affine least squares recovers z
        v = np.c_[m.encode(d.x), np.ones(d.n)]
        fit = v @ np.linalg.lstsq(v, w.samples, rcond=None)[0]
        assert np.mean((fit - w.samples) ** 2) < 0.01 * w.samples.var()

    def test_more_epochs_never_worse(self):
        w = generate_world(2, 4, 3, 200)
        d = render_domain(w, DomainSpec("a", 6))
        one = fit_autoencoder(d, 4, 1, 0, hidden=16)
        many = fit_autoencoder(d, 4, 30, 0, hidden=16)
        assert many.final_loss <= one.final_loss
        assert many.final_loss == min(many.loss_curve)

    def test_batch_matches_rows(self):
        w = generate_world(3, 4, 3, 40)
        d = render_domain(w, DomainSpec("a", 6, "nonlinear-tanh"))
        m = fit_autoencoder(d, 4, 2, 0, hidden=8)
        batch = m.encode(d.x)
        rows = np.array([m.encode(x) for x in d.x])
        np.testing.assert_allclose(batch, rows, rtol=0, atol=1e-12)
        dec = m.decode(batch)
        np.testing.assert_allclose(dec, np.array([m.decode(v) for v in batch]), rtol=0, atol=1e-12)

    def test_zero_observation_finite(self):
        w = generate_world(3, 4, 3, 40)
        m = fit_autoencoder(render_domain(w, DomainSpec("a", 6)), 4, 1, 0, hidden=8)
        assert np.all(np.isfinite(m.encode(np.zeros(6))))

    def test_shape_mismatch(self, world):
        m = oracle_linear_module(render_domain(world, DomainSpec("v", 32)))
        with pytest.raises(DimensionError):
            m.encode(np.zeros((2, 31)))

    def test_bad_arguments(self):
        w = generate_world(3, 4, 3, 40)
        d = render_domain(w, DomainSpec("a", 6))
        with pytest.raises(ConfigError):
            fit_autoencoder(d, 3, 5, 0)
        with pytest.raises(ConfigError):
            fit_autoencoder(d, 4, 0, 0)
        with pytest.raises(ConfigError):
            oracle_linear_module(render_domain(w, DomainSpec("b", 6, "nonlinear-tanh")))

    def test_each_module_sees_only_its_own_domain(self, world):
        domains = [render_domain(world, DomainSpec(m, 20)) for m in ("a", "b", "c")]
        seen = []

        def stub(data, latent_dim, epochs, seed, **kw):
            seen.append(data)
            return oracle_linear_module(data, latent_dim, seed)

        modules = train_modules(domains, {}, 0, fitter=stub)
        assert [d.id for d in seen] == ["a", "b", "c"]
        for data in domains:
            assert sum(s is data for s in seen) == 1
        assert list(modules) == ["a", "b", "c"]


class TestClassifier:
    def test_separable_clusters(self):
        rng = np.random.default_rng(0)
        y = rng.integers(0, 2, 400)
        X = np.c_[np.where(y == 1, 3.0, -3.0), np.zeros(400)] + rng.uniform(-1, 1, (400, 2))
        # margin check: the hyperplane x0 = 0 separates the classes with margin 2
        assert np.min(np.where(y == 1, X[:, 0], -X[:, 0])) >= 2.0
        head = fit_classifier(X, y, epochs=200, seed=0)
        assert head.heldout_accuracy == 1.0

    def test_shuffled_labels_are_chance(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(1000, 16))
        y = rng.permutation(np.arange(1000) % 10)
        head = fit_classifier(X, y, epochs=200, seed=0)
        assert abs(head.heldout_accuracy - 0.1) <= 0.1

    def test_training_rows_as_test(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(200, 4))
        y = (X[:, 0] + 0.3 * rng.normal(size=200) > 0).astype(int)
        head = fit_classifier(X, y, epochs=100, seed=3)
        assert head.accuracy(X[head.train_idx], y[head.train_idx]) >= head.train_accuracy - 1e-9

    def test_split_is_80_20_and_seeded(self):
        X = np.random.default_rng(0).normal(size=(100, 3))
        y = np.arange(100) % 2
        a, b = fit_classifier(X, y, 5, seed=4), fit_classifier(X, y, 5, seed=4)
        assert len(a.test_idx) == 20 and len(a.train_idx) == 80
        np.testing.assert_array_equal(a.test_idx, b.test_idx)
        np.testing.assert_array_equal(a.W, b.W)

    def test_single_class(self):
        with pytest.raises(DegenerateLabelsError):
            fit_classifier(np.zeros((10, 2)), np.zeros(10, dtype=int))


class TestCsv:
    def test_world_round_trip(self, tmp_path):
        w = generate_world(0, 4, 3, 50)
        export_world_csv(w, tmp_path / "world.csv")
        back = import_world_csv(tmp_path / "world.csv")
        np.testing.assert_array_equal(back.samples, w.samples)
        np.testing.assert_array_equal(back.labels, w.labels)
        assert (tmp_path / "world.csv").read_text().splitlines()[0] == "z0,z1,z2,z3,label"

    def test_domain_round_trip(self, tmp_path):
        w = generate_world(0, 4, 3, 50)
        d = render_domain(w, DomainSpec("touch", 6, noise_std=0.1))
        export_domain_csv(d, tmp_path / "touch.csv")
        back = import_domain_csv(tmp_path / "touch.csv")
        assert back.id == "touch"
        np.testing.assert_array_equal(back.x, d.x)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), k=st.integers(2, 6), c=st.integers(2, 5))
def test_world_separation_property(seed, k, c):
    w = generate_world(seed, k, c, 20, delta_sep=1.0)
    assert w.min_mean_distance() >= w.separation_threshold()
    assert w.samples.shape == (20, k)

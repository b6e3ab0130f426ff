import numpy as np
import pytest

from helpers import adjusted_rand, gaussian_blobs
from priopipe import dimred
from priopipe.clustering import kmeans
from priopipe.embedding import EmbeddingMatrix


@pytest.fixture(scope="module")
def blob_data():
    rng = np.random.default_rng(4)
    centers = rng.normal(scale=9.0, size=(3, 10))
    X, y = gaussian_blobs(100, centers, scale=0.6, seed=21)
    return X, y


class TestConfig:
    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            dimred.ReducerConfig(kind="tsne").validate()

    def test_out_dims_must_shrink(self):
        cfg = dimred.ReducerConfig(kind="pca", out_dims=10)
        with pytest.raises(ValueError):
            cfg.validate(in_dims=10)

    def test_umap_needs_neighbors(self):
        with pytest.raises(ValueError):
            dimred.ReducerConfig(kind="umap", n_neighbors=1).validate()


class TestIdentity:
    def test_passthrough(self):
        m = EmbeddingMatrix(np.arange(12, dtype=np.float32).reshape(3, 4), ("a", "b", "c"))
        out, reducer = dimred.fit_transform(dimred.ReducerConfig(kind="none"), m)
        assert out is m
        assert np.array_equal(reducer.transform(m.data.astype(float)), m.data)


class TestPCA:
    def test_planar_data_reconstructs_exactly(self):
        rng = np.random.default_rng(0)
        basis = rng.normal(size=(2, 10))
        X = rng.normal(size=(200, 2)) @ basis + rng.normal(size=10)
        reducer = dimred.PCAReducer(2).fit(X)
        Z = reducer.transform(X)
        recon = Z @ reducer.components_ + reducer.mean_
        assert np.abs(recon - X).max() <= 1e-6

    def test_transform_matches_fit_transform(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(50, 6))
        reducer = dimred.PCAReducer(3)
        Z = reducer.fit_transform(X)
        assert np.abs(reducer.transform(X) - Z).max() <= 1e-6

    def test_component_variance_non_increasing(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(300, 8)) * np.array([5, 3, 2, 1, 1, 1, 0.5, 0.1])
        Z = dimred.PCAReducer(5).fit_transform(X)
        variances = Z.var(axis=0)
        assert all(variances[i] >= variances[i + 1] - 1e-12 for i in range(4))

    def test_deterministic_signs(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(40, 5))
        a = dimred.PCAReducer(2).fit_transform(X)
        b = dimred.PCAReducer(2).fit_transform(X.copy())
        assert np.array_equal(a, b)


class TestCurveFit:
    def test_reference_values_for_default_min_dist(self):
        a, b = dimred.find_curve_params(0.1)
        assert a == pytest.approx(1.577, abs=2e-2)
        assert b == pytest.approx(0.895, abs=2e-2)

    def test_fit_quality(self):
        for min_dist in (0.0, 0.1, 0.5):
            a, b = dimred.find_curve_params(min_dist)
            xs = np.linspace(1e-6, 3.0, 200)
            target = np.where(xs < min_dist, 1.0, np.exp(-(xs - min_dist)))
            fitted = 1.0 / (1.0 + a * xs ** (2 * b))
            assert np.abs(fitted - target).mean() < 0.05


class TestUmap:
    def test_blobs_recovered_after_reduction(self, blob_data):
        X, y = blob_data
        cfg = dimred.ReducerConfig(kind="umap", out_dims=2, epochs=200, seed=3)
        m = EmbeddingMatrix(X.astype(np.float32), tuple(str(i) for i in range(len(X))))
        reduced, _ = dimred.fit_transform(cfg, m)
        result = kmeans(reduced.data.astype(np.float64), 3, seed=0)
        assert adjusted_rand(result.labels, y) >= 0.9

    def test_same_seed_identical(self, blob_data):
        X, _ = blob_data
        r1 = dimred.UmapReducer(out_dims=2, epochs=60, seed=5).fit_transform(X)
        r2 = dimred.UmapReducer(out_dims=2, epochs=60, seed=5).fit_transform(X)
        assert np.array_equal(r1, r2)

    def test_local_structure_preserved(self, blob_data):
        X, y = blob_data
        Z = dimred.UmapReducer(out_dims=2, epochs=200, seed=3).fit_transform(X)
        intra = np.mean(
            [
                np.sqrt(((Z[y == c][:, None] - Z[y == c][None]) ** 2).sum(-1)).mean()
                for c in range(3)
            ]
        )
        inter = np.mean(
            [
                np.sqrt(((Z[y == a][:, None] - Z[y == b][None]) ** 2).sum(-1)).mean()
                for a in range(3)
                for b in range(a + 1, 3)
            ]
        )
        assert intra < inter

    def test_row_count_and_order_preserved(self, blob_data):
        X, _ = blob_data
        ids = tuple(f"row{i}" for i in range(len(X)))
        m = EmbeddingMatrix(X.astype(np.float32), ids)
        cfg = dimred.ReducerConfig(kind="umap", out_dims=2, epochs=30, seed=1)
        reduced, _ = dimred.fit_transform(cfg, m)
        assert reduced.rows == len(X)
        assert reduced.ids == ids
        assert reduced.dims == 2

    def test_too_few_rows_fatal(self):
        X = np.random.default_rng(0).normal(size=(10, 5))
        with pytest.raises(ValueError):
            dimred.UmapReducer(out_dims=2, n_neighbors=15).fit_transform(X)

    def test_non_finite_fatal(self):
        X = np.zeros((30, 5))
        X[3, 2] = np.inf
        with pytest.raises(ValueError):
            dimred.UmapReducer(out_dims=2, n_neighbors=5).fit_transform(X)

    def test_transform_duplicate_lands_in_neighbor_hull(self, blob_data):
        X, _ = blob_data
        reducer = dimred.UmapReducer(out_dims=2, epochs=60, seed=2)
        Z = reducer.fit_transform(X)
        probe = X[17:18].copy()
        placed = reducer.transform(probe)[0]
        # barycentric placement: inside the bounding box of the train images
        # of the probe's nearest neighbors
        d = np.sqrt(((X - probe) ** 2).sum(axis=1))
        nn = np.argsort(d, kind="stable")[: reducer.n_neighbors]
        hull_pts = Z[nn]
        assert (placed >= hull_pts.min(axis=0) - 1e-9).all()
        assert (placed <= hull_pts.max(axis=0) + 1e-9).all()

    def test_transform_zero_rows(self, blob_data):
        X, _ = blob_data
        reducer = dimred.UmapReducer(out_dims=2, epochs=30, seed=2)
        reducer.fit_transform(X)
        out = reducer.transform(np.zeros((0, X.shape[1])))
        assert out.shape == (0, 2)

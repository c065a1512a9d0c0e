import numpy as np
import pytest

from gandetect.data import (
    DataError,
    Dataset,
    SynthConfig,
    load_csv,
    normalize_fit_apply,
    save_csv,
    split,
    synthesize,
)


def write_csv(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestLoadCsv:
    def test_three_rows(self, tmp_path):
        path = write_csv(tmp_path, "1.0,2.0,0\n3.0,4.0,0\n5.0,6.0,1\n")
        ds = load_csv(path)
        assert ds.n == 3 and ds.d == 2
        assert ds.anomaly_count == 1

    def test_header_detected_and_label_by_name(self, tmp_path):
        path = write_csv(tmp_path, "a,b,target\n1,2,1\n3,4,0\n")
        ds = load_csv(path, label_column="target")
        assert ds.feature_names == ["a", "b"]
        assert list(ds.y) == [1, 0]

    def test_label_by_index(self, tmp_path):
        path = write_csv(tmp_path, "0,1.5\n1,2.5\n")
        ds = load_csv(path, label_column=0)
        assert list(ds.y) == [0, 1]
        assert ds.X.ravel().tolist() == [1.5, 2.5]

    def test_bad_label_names_row(self, tmp_path):
        path = write_csv(tmp_path, "1.0,0\n2.0,2\n")
        with pytest.raises(DataError, match="row 2"):
            load_csv(path)

    def test_non_numeric_cell_names_position(self, tmp_path):
        path = write_csv(tmp_path, "1.0,0\nfoo,1\n")
        with pytest.raises(DataError, match="row 2, column 1"):
            load_csv(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            load_csv(str(tmp_path / "nope.csv"))

    def test_round_trip_preserves_features(self, tmp_path):
        from gandetect.rng import SeededRng

        rng = SeededRng(3)
        ds = Dataset(rng.uniform(-5, 5, size=(20, 4)),
                     (rng.uniform(size=20) < 0.3).astype(np.int64))
        path = str(tmp_path / "rt.csv")
        save_csv(ds, path)
        back = load_csv(path)
        assert np.allclose(back.X, ds.X, atol=1e-12)
        assert np.array_equal(back.y, ds.y)


class TestNormalize:
    def test_basic_column(self):
        ds = Dataset(np.array([[2.0], [4.0], [6.0]]), np.array([0, 0, 1]))
        norm, _, state = normalize_fit_apply(ds)
        assert norm.X.ravel().tolist() == [0.0, 0.5, 1.0]

    def test_constant_column_maps_to_zero(self):
        ds = Dataset(np.array([[7.0, 1.0], [7.0, 2.0]]), np.array([0, 1]))
        norm, _, _ = normalize_fit_apply(ds)
        assert np.all(norm.X[:, 0] == 0.0)

    def test_out_of_range_values_preserved(self):
        train = Dataset(np.array([[2.0], [6.0]]), np.array([0, 1]))
        test = Dataset(np.array([[8.0], [0.0]]), np.array([0, 1]))
        _, [norm_test], _ = normalize_fit_apply(train, test)
        assert norm_test.X.ravel().tolist() == [1.5, -0.5]

    def test_train_columns_hit_exact_bounds(self):
        from gandetect.rng import SeededRng

        X = SeededRng(1).uniform(-3, 9, size=(50, 5))
        ds = Dataset(X, (SeededRng(2).uniform(size=50) < 0.5).astype(np.int64))
        norm, _, _ = normalize_fit_apply(ds)
        assert np.allclose(norm.X.min(axis=0), 0.0)
        assert np.allclose(norm.X.max(axis=0), 1.0)


class TestSplit:
    def make(self, n=10, anomalies=4):
        y = np.zeros(n, dtype=np.int64)
        y[:anomalies] = 1
        X = np.arange(n * 2, dtype=np.float64).reshape(n, 2)
        return Dataset(X, y)

    def test_stratified_sizes_and_ratio(self):
        tr, te = split(self.make(), 0.6, seed=0)
        assert tr.n == 6 and te.n == 4
        assert tr.anomaly_count in (2, 3)

    def test_same_seed_identical_partition(self):
        a = split(self.make(), 0.6, seed=5)
        b = split(self.make(), 0.6, seed=5)
        assert np.array_equal(a[0].X, b[0].X)
        assert np.array_equal(a[1].X, b[1].X)

    def test_partition_is_exact(self):
        ds = self.make(n=43, anomalies=7)
        tr, te = split(ds, 0.6, seed=1)
        seen = np.concatenate([tr.X[:, 0], te.X[:, 0]])
        assert sorted(seen.tolist()) == ds.X[:, 0].tolist()

    def test_class_stranding_raises(self):
        ds = self.make(n=20, anomalies=1)
        with pytest.raises(DataError, match="class"):
            split(ds, 0.03, seed=0)  # train side of 1 sample cannot hold both classes

    def test_plain_mode_partition(self):
        tr, te = split(self.make(n=30, anomalies=6), 0.5, seed=2, stratified=False)
        assert tr.n == 15 and te.n == 15

    def test_bad_fraction(self):
        with pytest.raises(DataError):
            split(self.make(), 1.5, seed=0)

    def test_stratified_ratio_within_one_sample(self):
        from gandetect.rng import SeededRng

        rng = SeededRng(0)
        for trial in range(20):
            n = int(rng.integers(20, 200))
            n_pos = int(rng.integers(2, n // 2))
            frac = float(rng.uniform(0.2, 0.8))
            y = np.zeros(n, dtype=np.int64)
            y[:n_pos] = 1
            ds = Dataset(np.arange(n, dtype=float)[:, None], y)
            tr, _ = split(ds, frac, seed=trial)
            expected_pos = tr.n * n_pos / n
            assert abs(tr.anomaly_count - expected_pos) <= 1.0


class TestSynthesize:
    def test_counts(self):
        ds = synthesize(SynthConfig("single_cluster", n=1000, d=2, anomaly_ratio=0.10, seed=1))
        assert ds.n == 1000
        assert ds.anomaly_count == 100

    def test_determinism(self):
        a = synthesize(SynthConfig("multi_cluster", n=1200, d=3, anomaly_ratio=0.05, seed=9))
        b = synthesize(SynthConfig("multi_cluster", n=1200, d=3, anomaly_ratio=0.05, seed=9))
        assert np.array_equal(a.X, b.X)
        assert np.array_equal(a.y, b.y)

    def test_single_cluster_gaussian_tail(self):
        ds = synthesize(SynthConfig("single_cluster", n=2000, d=2, anomaly_ratio=0.10, seed=4))
        normals = ds.X[ds.y == 0]
        center = normals.mean(axis=0)
        dist = np.linalg.norm(normals - center, axis=1)
        # direct counting against the Gaussian tail: 4 sigma in 2-D
        assert np.mean(dist <= 4.0) >= 0.99

    def test_multi_density_spreads(self):
        ds = synthesize(SynthConfig("multi_density", n=3000, d=2, anomaly_ratio=0.05, seed=2))
        assert ds.anomaly_count == 150

    def test_config_validation(self):
        with pytest.raises(DataError):
            SynthConfig("single_cluster", n=100, d=2, anomaly_ratio=0.10)
        with pytest.raises(DataError):
            SynthConfig("single_cluster", n=1000, d=1, anomaly_ratio=0.10)
        with pytest.raises(DataError):
            SynthConfig("single_cluster", n=1000, d=2, anomaly_ratio=0.5)
        with pytest.raises(DataError):
            SynthConfig("ring", n=1000, d=2, anomaly_ratio=0.1)


def test_dataset_rejects_bad_labels():
    with pytest.raises(DataError, match="labels"):
        Dataset(np.zeros((3, 2)), np.array([0, 1, 2]))

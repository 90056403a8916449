import io

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from bbgamma.data import (DataError, Dataset, SplitPlan, augment, inject_label_noise, inner_folds,
                          load_dataset, make_splits, parse_csv, parse_libsvm, standardize, write_libsvm)


def round_trip(data):
    buf = io.StringIO()
    write_libsvm(data, buf)
    buf.seek(0)
    return parse_libsvm(buf, dim=data.d)


class TestLibsvm:
    def test_format_definition(self):
        d = parse_libsvm(["+1 1:0.5 3:2\n"])
        assert d.y.tolist() == [1]
        np.testing.assert_array_equal(d.dense(), [[0.5, 0.0, 2.0]])

    def test_no_features(self):
        d = parse_libsvm(["+1 2:1\n", "-1\n"])
        assert d.y.tolist() == [1, 0]
        np.testing.assert_array_equal(d.dense()[1], 0.0)

    def test_comments_and_blank_lines(self):
        d = parse_libsvm(["# header\n", "\n", "0 1:2 # trailing\n"])
        assert d.n == 1 and d.y[0] == 0

    @pytest.mark.parametrize("line,lineno", [("+1 3:1 2:1", 2), ("+1 2:1 2:1", 2), ("+1 1:x", 2),
                                             ("+1 0:1", 2), ("+1 1", 2), ("abc 1:1", 2), ("+2 1:1", 2)])
    def test_errors_name_line(self, line, lineno):
        with pytest.raises(DataError, match=f"line {lineno}"):
            parse_libsvm(["-1 1:1\n", line + "\n"])

    def test_declared_dimension(self):
        assert parse_libsvm(["+1 2:1"], dim=5).d == 5
        with pytest.raises(DataError):
            parse_libsvm(["+1 6:1"], dim=5)

    def test_matches_sklearn_loader(self, tmp_path, rng):
        skl = pytest.importorskip("sklearn.datasets")
        X = sp.random(40, 12, density=0.3, format="csr", random_state=3) * 10
        data = Dataset(X, rng.integers(0, 2, 40))
        path = tmp_path / "d.svm"
        with open(path, "w") as fh:
            write_libsvm(data, fh)
        Xs, ys = skl.load_svmlight_file(str(path), n_features=12)
        ours = load_dataset(str(path), fmt="libsvm")
        np.testing.assert_array_equal(ours.dense(), Xs.toarray())
        np.testing.assert_array_equal(ours.y, (ys > 0).astype(int))

    @given(st.lists(st.tuples(st.booleans(),
                              st.dictionaries(st.integers(0, 29),
                                              st.floats(allow_nan=False, allow_infinity=False).filter(bool),
                                              max_size=8)),
                    min_size=1, max_size=15))
    @settings(max_examples=60, deadline=None)
    def test_round_trip(self, rows):
        X = np.zeros((len(rows), 30))
        for i, (_, feats) in enumerate(rows):
            for j, v in feats.items():
                X[i, j] = v
        data = Dataset(sp.csr_matrix(X), [int(lab) for lab, _ in rows])
        back = round_trip(data)
        assert back.equals(data)
        assert round_trip(back).equals(data)

    def test_dense_round_trip(self, rng):
        data = Dataset(rng.normal(size=(10, 4)), rng.integers(0, 2, 10))
        assert round_trip(data).equals(data)


class TestCsv:
    def test_two_by_three(self):
        d = parse_csv(io.StringIO("a,b,label\n1,2,0\n3,4,1\n"))
        assert (d.n, d.d) == (2, 2)
        assert d.y.tolist() == [0, 1] and d.feature_names == ["a", "b"]

    def test_breast_encoding(self):
        # UCI Breast marks benign 2 and malignant 4
        d = parse_csv(io.StringIO("x,class\n1,2\n5,4\n3,4\n"), "class", positive_label="4")
        assert d.y.tolist() == [0, 1, 1]

    def test_needs_mapping(self):
        with pytest.raises(DataError):
            parse_csv(io.StringIO("x,class\n1,2\n5,4\n"), "class")
        with pytest.raises(DataError):
            parse_csv(io.StringIO("x,class\n1,2\n5,4\n6,3\n"), "class", positive_label="4")

    @pytest.mark.parametrize("token", ["?", "", "NA"])
    def test_missing_is_error(self, token):
        with pytest.raises(DataError, match="line 3: missing"):
            parse_csv(io.StringIO(f"a,b,y\n1,2,0\n{token},4,1\n"))

    def test_ragged(self):
        with pytest.raises(DataError, match="ragged"):
            parse_csv(io.StringIO("a,b,y\n1,2,0\n4,1\n"))

    @pytest.mark.parametrize("name,rows,pos", [("heart", 270, 120), ("liver", 345, None),
                                               ("breast", 683, 239), ("pima", 768, 268)])
    def test_bundled(self, name, rows, pos):
        d = load_dataset(name)
        assert d.n == rows
        if pos is not None:
            assert d.class_counts()[0] == pos

    def test_unknown_dataset(self):
        with pytest.raises(FileNotFoundError):
            load_dataset("no-such-set")


class TestStandardize:
    def test_constant_feature_maps_to_zero(self, rng):
        X = np.c_[rng.normal(size=8), np.full(8, 3.0)]
        tr, (te,), _ = standardize(Dataset(X, rng.integers(0, 2, 8)), [Dataset(X[:3], [0, 1, 0])])
        np.testing.assert_array_equal(tr.X[:, 1], 0.0)
        np.testing.assert_array_equal(te.X[:, 1], 0.0)

    def test_train_moments(self, rng):
        tr, _, _ = standardize(Dataset(rng.normal(3, 5, size=(50, 4)), rng.integers(0, 2, 50)))
        np.testing.assert_allclose(tr.X.mean(axis=0), 0.0, atol=1e-14)
        np.testing.assert_allclose(tr.X.std(axis=0), 1.0, rtol=1e-13)

    def test_uses_training_statistics_only(self, rng):
        train = Dataset(rng.normal(size=(20, 2)), rng.integers(0, 2, 20))
        test = Dataset(rng.normal(100, 1, size=(5, 2)), rng.integers(0, 2, 5))
        _, (te,), sc = standardize(train, [test])
        np.testing.assert_allclose(te.X, (test.X - train.X.mean(0)) / train.X.std(0), rtol=1e-14)
        np.testing.assert_array_equal(sc.mean, train.X.mean(0))

    def test_double_application_guarded(self, rng):
        tr, _, sc = standardize(Dataset(rng.normal(size=(6, 2)), [0, 1] * 3))
        with pytest.raises(ValueError, match="already standardized"):
            sc.apply(tr)


class TestSplits:
    def test_ten_rows_five_folds(self):
        data = Dataset(np.arange(10.0), [0, 1] * 5)
        splits = make_splits(data, SplitPlan(seed=1, folds=5, repetitions=1))
        tests = [te for _, te in splits]
        assert all(te.size == 2 for te in tests)
        np.testing.assert_array_equal(np.sort(np.concatenate(tests)), np.arange(10))
        for tr, te in splits:
            assert np.intersect1d(tr, te).size == 0 and tr.size + te.size == 10

    def test_deterministic(self):
        data = Dataset(np.arange(30.0), [0, 0, 1] * 10)
        a = make_splits(data, SplitPlan(seed=4, folds=3, repetitions=2))
        b = make_splits(data, SplitPlan(seed=4, folds=3, repetitions=2))
        assert all(np.array_equal(x[1], y[1]) for x, y in zip(a, b))
        c = make_splits(data, SplitPlan(seed=5, folds=3, repetitions=2))
        assert not all(np.array_equal(x[1], y[1]) for x, y in zip(a, c))

    def test_stratified_balance(self):
        y = np.r_[np.ones(20), np.zeros(30)].astype(int)
        for _, te in make_splits(Dataset(np.zeros(50), y), SplitPlan(folds=5, repetitions=3)):
            assert y[te].sum() == 4

    def test_repetitions_count(self, rng):
        data = Dataset(rng.normal(size=(20, 1)), [0, 1] * 10)
        assert len(make_splits(data, SplitPlan(folds=5, repetitions=10))) == 50

    def test_class_absent(self):
        with pytest.raises(DataError):
            make_splits(Dataset(np.zeros(6), np.zeros(6, dtype=int)), SplitPlan())

    def test_inner_folds_partition(self):
        y = np.array([0, 1] * 6)
        folds = inner_folds(y, 3, 0)
        np.testing.assert_array_equal(np.sort(np.concatenate([v for _, v in folds])), np.arange(12))


class TestNoise:
    def test_rate_zero(self, rng):
        d = Dataset(rng.normal(size=(9, 1)), rng.integers(0, 2, 9))
        out = inject_label_noise(d, 0.0, 3)
        np.testing.assert_array_equal(out.y, d.y)
        assert out.y is not d.y

    def test_exact_count_and_reproducible(self, rng):
        d = Dataset(rng.normal(size=(100, 1)), rng.integers(0, 2, 100))
        a, b = inject_label_noise(d, 0.1, 11), inject_label_noise(d, 0.1, 11)
        assert np.sum(a.y != d.y) == 10
        np.testing.assert_array_equal(a.y, b.y)
        np.testing.assert_array_equal(a.X, d.X)

    def test_floor(self, rng):
        d = Dataset(rng.normal(size=(37, 1)), rng.integers(0, 2, 37))
        assert np.sum(inject_label_noise(d, 0.1, 0).y != d.y) == 3

    def test_involution(self, rng):
        d = Dataset(rng.normal(size=(50, 1)), rng.integers(0, 2, 50))
        twice = inject_label_noise(inject_label_noise(d, 0.2, 7), 0.2, 7)
        np.testing.assert_array_equal(twice.y, d.y)

    def test_bad_rate(self, rng):
        with pytest.raises(ValueError):
            inject_label_noise(Dataset(np.zeros(4), [0, 1, 0, 1]), 0.7, 0)


class TestAugment:
    def test_dense_and_sparse_agree(self, rng):
        X = rng.normal(size=(5, 3))
        np.testing.assert_array_equal(augment(sp.csr_matrix(X)).toarray(), augment(X))
        np.testing.assert_array_equal(augment(X)[:, -1], 1.0)

"""Dataset generation, CSV ingestion, standardization, splits, class shifts."""

import json

import numpy as np
import pytest

from cvaropt.data import (
    CsvParseError,
    Dataset,
    ShiftSpec,
    SplitSpec,
    apply_shift,
    gen_synthetic,
    load_csv,
    split,
    standardize,
    write_csv,
)


# ------------------------------------------------------------------ synthetic


def test_zero_noise_normal_admits_an_exact_linear_fit():
    ds = gen_synthetic("normal", n=50, d=4, noise=0.0, seed=3)
    theta = np.asarray(ds.meta["theta_true"])
    residual = ds.targets - ds.features @ theta
    assert np.max(np.abs(residual)) == 0.0
    assert ds.task == "regression"
    assert ds.feature_names == ["x0", "x1", "x2", "x3"]


def test_same_seed_gives_identical_datasets():
    for name in ("normal", "pareto", "sinc", "two-gaussians"):
        a = gen_synthetic(name, n=30, d=3, noise=0.5, seed=11)
        b = gen_synthetic(name, n=30, d=3, noise=0.5, seed=11)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.targets, b.targets)
        c = gen_synthetic(name, n=30, d=3, noise=0.5, seed=12)
        assert not np.array_equal(c.features, a.features)


def test_pareto_noise_is_centered():
    # Monte Carlo check that the location shift removes the Pareto mean.
    ds = gen_synthetic("pareto", n=10**6, d=1, noise=1.0, seed=123)
    theta = np.asarray(ds.meta["theta_true"])
    eps = ds.targets - ds.features @ theta
    assert abs(eps.mean()) <= 0.02
    assert eps.min() < -0.5  # shifted left of zero, not raw Pareto


def test_sinc_dataset_shape_and_values():
    ds = gen_synthetic("sinc", n=100, noise=0.0, seed=0)
    assert ds.d == 1
    x = ds.features[:, 0]
    assert x.min() >= -5.0 and x.max() <= 5.0
    assert np.allclose(ds.targets, np.sinc(x), atol=0.0)


def test_two_gaussians_class_means_are_separated():
    ds = gen_synthetic("two-gaussians", n=20000, d=4, seed=5, sep=2.0)
    assert ds.task == "classification"
    assert set(np.unique(ds.targets)) == {-1.0, 1.0}
    mu_pos = ds.features[ds.targets == 1.0].mean(axis=0)
    mu_neg = ds.features[ds.targets == -1.0].mean(axis=0)
    assert abs(np.linalg.norm(mu_pos - mu_neg) - 2.0) <= 0.1


def test_gen_synthetic_rejects_bad_arguments():
    with pytest.raises(ValueError):
        gen_synthetic("uniform", n=20)
    with pytest.raises(ValueError):
        gen_synthetic("normal", n=5)
    with pytest.raises(ValueError):
        gen_synthetic("normal", n=20, noise=-0.1)
    with pytest.raises(ValueError):
        gen_synthetic("normal", n=20, d=0)


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.zeros((0, 2)), np.zeros(0), ["a", "b"], "regression")
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 2)), np.zeros(4), ["a", "b"], "regression")
    with pytest.raises(ValueError):
        Dataset(np.array([[np.inf, 0.0]]), np.zeros(1), ["a", "b"], "regression")
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 2)), np.zeros(3), ["a", "b"], "ranking")
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 2)), np.zeros(3), ["a"], "regression")


# ------------------------------------------------------------------------ csv


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_load_csv_two_row_numeric_file(tmp_path):
    p = _write(tmp_path / "tiny.csv", "a,b,target\n1,2,3.5\n4,5,6.5\n")
    ds = load_csv(p)
    assert ds.n == 2 and ds.d == 2
    assert ds.task == "regression"
    assert ds.feature_names == ["a", "b"]
    assert np.array_equal(ds.features, [[1.0, 2.0], [4.0, 5.0]])
    assert np.array_equal(ds.targets, [3.5, 6.5])


def test_load_csv_categorical_column_expands_to_one_hot(tmp_path):
    p = _write(
        tmp_path / "cat.csv",
        "color,target\nred,1\ngreen,2\nblue,3\nred,4\n",
    )
    ds = load_csv(p)
    assert ds.feature_names == ["color=blue", "color=green", "color=red"]
    assert np.array_equal(
        ds.features,
        [[0, 0, 1], [0, 1, 0], [1, 0, 0], [0, 0, 1]],
    )


def test_load_csv_header_only_is_an_error(tmp_path):
    p = _write(tmp_path / "empty.csv", "a,b,target\n")
    with pytest.raises(CsvParseError):
        load_csv(p)
    with pytest.raises(CsvParseError):
        load_csv(_write(tmp_path / "blank.csv", ""))


def test_load_csv_ragged_row_reports_its_location(tmp_path):
    p = _write(tmp_path / "ragged.csv", "a,b,target\n1,2,3\n4,5\n")
    with pytest.raises(CsvParseError) as exc:
        load_csv(p)
    assert exc.value.row == 3


def test_load_csv_declared_numeric_bad_cell(tmp_path):
    p = _write(
        tmp_path / "bad.csv",
        "a,b,c,target\n1,2,x,0\n4,oops,y,1\n",
    )
    with pytest.raises(CsvParseError) as exc:
        load_csv(p, schema={"categorical": ["c"]})
    assert exc.value.column == "b"
    assert exc.value.row == 3


def test_load_csv_schema_target_and_labels(tmp_path):
    p = _write(tmp_path / "cls.csv", "x,label\n1,yes\n2,no\n3,yes\n")
    ds = load_csv(p, schema={"target": "label"})
    assert ds.task == "classification"
    assert ds.meta["classes"] == ["no", "yes"]
    assert np.array_equal(ds.targets, [1.0, -1.0, 1.0])

    flipped = load_csv(p, schema={"target": "label", "positive_label": "no"})
    assert np.array_equal(flipped.targets, [-1.0, 1.0, -1.0])

    with pytest.raises(CsvParseError):
        load_csv(p, schema={"target": "nope"})


def test_load_csv_numeric_binary_target_as_classification(tmp_path):
    p = _write(tmp_path / "bin.csv", "x,target\n1,0\n2,1\n3,0\n")
    ds = load_csv(p, schema={"task": "classification"})
    assert ds.task == "classification"
    assert np.array_equal(ds.targets, [-1.0, 1.0, -1.0])


def test_load_csv_multiclass_string_target(tmp_path):
    p = _write(tmp_path / "multi.csv", "x,kind\n1,cat\n2,dog\n3,bird\n4,cat\n")
    ds = load_csv(p, schema={"target": "kind"})
    assert ds.targets.dtype == np.int64
    assert ds.meta["classes"] == ["bird", "cat", "dog"]
    assert np.array_equal(ds.targets, [1, 2, 0, 1])


def test_load_csv_single_valued_classification_target(tmp_path):
    p = _write(tmp_path / "one.csv", "x,label\n1,same\n2,same\n")
    with pytest.raises(CsvParseError):
        load_csv(p, schema={"target": "label"})


def test_csv_round_trip_regression(tmp_path):
    ds = gen_synthetic("normal", n=20, d=3, noise=0.4, seed=2)
    path = tmp_path / "round.csv"
    write_csv(ds, path)
    assert not (tmp_path / "round.csv.schema.json").exists()
    back = load_csv(path)
    assert np.array_equal(back.features, ds.features)  # repr round-trips floats
    assert np.array_equal(back.targets, ds.targets)
    assert back.feature_names == ds.feature_names


def test_csv_round_trip_classification_with_sidecar(tmp_path):
    ds = gen_synthetic("two-gaussians", n=24, d=2, seed=4)
    path = tmp_path / "cls.csv"
    write_csv(ds, path)
    sidecar = tmp_path / "cls.csv.schema.json"
    assert sidecar.exists()
    schema = json.loads(sidecar.read_text(encoding="utf-8"))
    back = load_csv(path, schema=schema)
    assert back.task == "classification"
    assert np.array_equal(back.features, ds.features)
    assert np.array_equal(back.targets, ds.targets)


# -------------------------------------------------------------- standardize


def test_standardize_centers_and_scales_the_train_split():
    ds = Dataset(np.array([[1.0], [2.0], [3.0]]), np.zeros(3), ["a"], "regression")
    mean, scale = standardize(ds)
    assert abs(ds.features[:, 0].mean()) <= 1e-12
    assert abs(ds.features[:, 0].std() - 1.0) <= 1e-12
    assert mean[0] == 2.0
    assert abs(scale[0] - np.std([1.0, 2.0, 3.0])) <= 1e-15


def test_standardize_zero_variance_column_becomes_zeros():
    ds = Dataset(np.full((4, 1), 7.0), np.zeros(4), ["a"], "regression")
    standardize(ds)
    assert np.array_equal(ds.features, np.zeros((4, 1)))


def test_standardize_applies_train_statistics_to_other_splits():
    train = Dataset(np.array([[0.0], [2.0]]), np.zeros(2), ["a"], "regression")
    test = Dataset(np.array([[10.0]]), np.zeros(1), ["a"], "regression")
    mean, scale = standardize(train, [test])
    # (10 - 1) / 1 with train mean 1 and train std 1
    assert test.features[0, 0] == (10.0 - mean[0]) / scale[0] == 9.0


def test_standardize_is_idempotent():
    rng = np.random.default_rng(8)
    ds = Dataset(rng.normal(3.0, 2.0, (50, 3)), np.zeros(50), ["a", "b", "c"], "regression")
    standardize(ds)
    once = ds.features.copy()
    standardize(ds)
    assert np.max(np.abs(ds.features - once)) <= 1e-12


def test_standardize_rejects_mismatched_split_width():
    train = Dataset(np.zeros((3, 2)), np.zeros(3), ["a", "b"], "regression")
    other = Dataset(np.zeros((3, 1)), np.zeros(3), ["a"], "regression")
    with pytest.raises(ValueError):
        standardize(train, [other])


# -------------------------------------------------------------------- split


def _counted(n):
    # feature column 0 is a unique row id, handy for coverage checks
    X = np.column_stack([np.arange(n, dtype=np.float64), np.ones(n)])
    return Dataset(X, np.arange(n, dtype=np.float64), ["id", "one"], "regression")


def test_split_sizes_for_n_100():
    tr, va, te = split(_counted(100), SplitSpec())
    assert (tr.n, va.n, te.n) == (50, 30, 20)


def test_split_same_seed_is_identical_and_partitions_the_rows():
    ds = _counted(97)
    a = split(ds, SplitSpec(seed=5))
    b = split(ds, SplitSpec(seed=5))
    for x, y in zip(a, b):
        assert np.array_equal(x.features, y.features)
    ids = np.concatenate([part.features[:, 0] for part in a])
    assert len(ids) == 97
    assert np.array_equal(np.sort(ids), np.arange(97))
    c = split(ds, SplitSpec(seed=6))
    assert not np.array_equal(c[0].features, a[0].features)


def test_split_empty_part_is_an_error():
    with pytest.raises(ValueError):
        split(_counted(10), SplitSpec(fractions=(0.05, 0.05, 0.9)))


def test_split_spec_validation():
    with pytest.raises(ValueError):
        SplitSpec(fractions=(0.5, 0.5, 0.5))
    with pytest.raises(ValueError):
        SplitSpec(fractions=(0.5, -0.1, 0.6))


# -------------------------------------------------------------- class shifts


def _binary(n_pos, n_neg):
    n = n_pos + n_neg
    X = np.column_stack([np.arange(n, dtype=np.float64), np.ones(n)])
    y = np.concatenate([np.ones(n_pos), -np.ones(n_neg)])
    return Dataset(X, y, ["id", "one"], "classification")


def _counts(ds):
    labels, counts = np.unique(ds.targets, return_counts=True)
    return dict(zip(labels.tolist(), counts.tolist()))


def test_power_law_beta_one_keeps_every_row():
    ds = _binary(30, 70)
    out = apply_shift(ds, ShiftSpec(kind="power-law", beta=1.0), np.random.default_rng(0))
    assert np.array_equal(out.features, ds.features)
    assert np.array_equal(out.targets, ds.targets)


def test_binary_invert_turns_a_balanced_set_into_one_to_nine():
    ds = _binary(50, 50)
    out = apply_shift(
        ds, ShiftSpec(kind="binary-imbalance-invert", ratio=0.1), np.random.default_rng(1)
    )
    counts = _counts(out)
    minority = min(counts.values())
    majority = max(counts.values())
    assert majority == 50  # the tie-broken minority class is kept whole
    assert abs(minority - majority / 9.0) <= 1.0


def test_binary_invert_flips_a_ten_ninety_imbalance():
    ds = _binary(20, 180)  # +1 is the 10% minority
    out = apply_shift(
        ds, ShiftSpec(kind="binary-imbalance-invert", ratio=0.1), np.random.default_rng(2)
    )
    counts = _counts(out)
    assert counts[1.0] == 20  # minority kept whole, now the majority
    assert abs(counts[-1.0] - 0.1 * out.n) <= 1.0


def test_upsample_after_shift_equalizes_class_counts():
    ds = _binary(20, 180)
    spec = ShiftSpec(kind="binary-imbalance-invert", ratio=0.1, rebalance="upsample")
    out = apply_shift(ds, spec, np.random.default_rng(3))
    counts = _counts(out)
    assert counts[1.0] == counts[-1.0]
    assert counts[1.0] == max(counts.values())


def test_downsample_trims_to_the_smallest_class():
    ds = _binary(20, 180)
    out = apply_shift(ds, ShiftSpec(rebalance="downsample"), np.random.default_rng(4))
    counts = _counts(out)
    assert counts[1.0] == counts[-1.0] == 20


def test_power_law_quota_profile_on_balanced_classes():
    n = 100
    X = np.column_stack([np.arange(n, dtype=np.float64), np.ones(n)])
    y = np.concatenate([np.zeros(34), np.ones(33), np.full(33, 2.0)])
    ds = Dataset(X, y, ["id", "one"], "classification")
    beta = 0.3
    out = apply_shift(ds, ShiftSpec(kind="power-law", beta=beta), np.random.default_rng(5))
    counts = _counts(out)
    sizes = sorted(_counts(ds).values(), reverse=True)
    expect = [
        min(sz, max(1, int(round(sizes[0] * (c + 1) ** np.log(beta)))))
        for c, sz in enumerate(sizes)
    ]
    assert sorted(counts.values(), reverse=True) == sorted(expect, reverse=True)
    assert counts[0.0] == 34  # the largest class is never subsampled


def test_shift_never_fabricates_rows():
    ds = _binary(20, 180)
    in_ids = set(ds.features[:, 0].tolist())
    id_to_label = dict(zip(ds.features[:, 0].tolist(), ds.targets.tolist()))
    for spec in (
        ShiftSpec(kind="binary-imbalance-invert", ratio=0.2),
        ShiftSpec(kind="binary-imbalance-invert", ratio=0.1, rebalance="upsample"),
        ShiftSpec(kind="power-law", beta=0.5),
    ):
        out = apply_shift(ds, spec, np.random.default_rng(6))
        for row_id, label in zip(out.features[:, 0], out.targets):
            assert row_id in in_ids
            assert id_to_label[row_id] == label


def test_shift_is_deterministic_given_the_rng_seed():
    ds = _binary(40, 160)
    spec = ShiftSpec(kind="binary-imbalance-invert", ratio=0.25, rebalance="upsample")
    a = apply_shift(ds, spec, np.random.default_rng(9))
    b = apply_shift(ds, spec, np.random.default_rng(9))
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.targets, b.targets)


def test_shift_rejects_regression_and_non_binary_inputs():
    reg = gen_synthetic("normal", n=20, d=2, seed=0)
    with pytest.raises(ValueError):
        apply_shift(reg, ShiftSpec(kind="binary-imbalance-invert"), np.random.default_rng(0))
    three = Dataset(
        np.zeros((6, 1)), np.array([0.0, 0.0, 1.0, 1.0, 2.0, 2.0]), ["a"], "classification"
    )
    with pytest.raises(ValueError):
        apply_shift(three, ShiftSpec(kind="binary-imbalance-invert"), np.random.default_rng(0))


def test_no_shift_returns_an_independent_copy():
    ds = _binary(5, 5)
    out = apply_shift(ds, ShiftSpec(), np.random.default_rng(0))
    assert np.array_equal(out.features, ds.features)
    out.features[0, 0] = -99.0
    assert ds.features[0, 0] == 0.0


def test_shift_spec_validation():
    with pytest.raises(ValueError):
        ShiftSpec(kind="label-flip")
    with pytest.raises(ValueError):
        ShiftSpec(kind="binary-imbalance-invert", ratio=0.6)
    with pytest.raises(ValueError):
        ShiftSpec(kind="binary-imbalance-invert", ratio=0.0)
    with pytest.raises(ValueError):
        ShiftSpec(beta=0.0)
    with pytest.raises(ValueError):
        ShiftSpec(target="valid")
    with pytest.raises(ValueError):
        ShiftSpec(rebalance="smote")

"""Collocation sampling: determinism, region exactness, batching."""

import csv

import numpy as np
import pytest

from piezopinn.errors import ConfigurationError
from piezopinn.sampler import CollocationSet, export_csv, minibatch, sample


def test_default_counts():
    s = sample(seed=0)
    assert len(s.interior) == 20_000
    assert len(s.boundary) == 5_000
    assert len(s.initial) == 5_000


def test_zero_counts_give_empty_sets():
    s = sample(0, 0, 0, seed=4)
    assert s.interior.shape == (0, 2)
    assert s.boundary.shape == (0, 2)
    assert s.initial.shape == (0, 2)


def test_negative_count_rejected():
    with pytest.raises(ConfigurationError):
        sample(-1, 0, 0, seed=1)


def test_same_seed_identical_sets():
    a = sample(100, 50, 50, seed=7)
    b = sample(100, 50, 50, seed=7)
    np.testing.assert_array_equal(a.interior, b.interior)
    np.testing.assert_array_equal(a.boundary, b.boundary)
    np.testing.assert_array_equal(a.initial, b.initial)


def test_different_seeds_differ():
    a = sample(100, 0, 0, seed=1)
    b = sample(100, 0, 0, seed=2)
    assert not np.array_equal(a.interior, b.interior)


def test_region_membership_exact():
    s = sample(5_000, 2_000, 2_000, seed=3)
    xi, ti = s.interior[:, 0], s.interior[:, 1]
    assert np.all((xi > 0) & (xi < 1) & (ti > 0) & (ti < 1))
    xb = s.boundary[:, 0]
    assert np.all(xb * (1 - xb) == 0)
    assert np.all((s.boundary[:, 1] >= 0) & (s.boundary[:, 1] <= 1))
    assert np.all(s.initial[:, 1] == 0)
    assert np.all((s.initial[:, 0] >= 0) & (s.initial[:, 0] <= 1))


def test_boundary_sides_roughly_balanced():
    s = sample(0, 5_000, 0, seed=0)
    left = int((s.boundary[:, 0] == 0).sum())
    # pinned for seed 0; equal-probability draw puts it near half
    assert left == 2_489
    assert 2_200 <= left <= 2_800


def test_uniformity_sanity_pinned_seed():
    s = sample(seed=0)
    assert 0.48 <= s.interior[:, 0].mean() <= 0.52
    # frozen exact values for the default stream, regression guard
    assert s.interior[:, 0].mean() == pytest.approx(0.5008376799556263, abs=1e-12)
    assert s.interior[0, 0] == pytest.approx(0.6369616873214543, abs=1e-15)
    assert s.interior[0, 1] == pytest.approx(0.2697867137638703, abs=1e-15)


def test_sets_are_read_only():
    s = sample(10, 10, 10, seed=5)
    with pytest.raises(ValueError):
        s.interior[0, 0] = 0.5


def test_collocation_set_validates_membership():
    bad_boundary = np.array([[0.5, 0.2]])
    with pytest.raises(ConfigurationError):
        CollocationSet(
            interior=np.zeros((0, 2)),
            boundary=bad_boundary,
            initial=np.zeros((0, 2)),
            seed=0,
        )
    with pytest.raises(ConfigurationError):
        CollocationSet(
            interior=np.array([[0.0, 0.5]]),
            boundary=np.zeros((0, 2)),
            initial=np.zeros((0, 2)),
            seed=0,
        )


# -- mini-batches --------------------------------------------------------


def test_minibatch_size_and_distinctness():
    s = sample(seed=0)
    b = minibatch(s, 3_000, step_seed=1)
    assert b.shape == (3_000, 2)
    assert len(np.unique(b, axis=0)) == 3_000


def test_minibatch_rows_come_from_interior():
    s = sample(200, 0, 0, seed=9)
    b = minibatch(s, 50, step_seed=3)
    pool = {tuple(row) for row in s.interior}
    assert all(tuple(row) in pool for row in b)


def test_minibatch_full_size_is_permutation():
    s = sample(64, 0, 0, seed=11)
    b = minibatch(s, 64, step_seed=2)
    np.testing.assert_array_equal(
        np.sort(b, axis=0), np.sort(np.asarray(s.interior), axis=0)
    )


def test_minibatch_deterministic_per_step_seed():
    s = sample(500, 0, 0, seed=21)
    np.testing.assert_array_equal(minibatch(s, 100, 17), minibatch(s, 100, 17))
    assert not np.array_equal(minibatch(s, 100, 17), minibatch(s, 100, 18))


def test_minibatch_bad_sizes_rejected():
    s = sample(10, 0, 0, seed=1)
    with pytest.raises(ConfigurationError):
        minibatch(s, 11, step_seed=0)
    with pytest.raises(ConfigurationError):
        minibatch(s, 0, step_seed=0)


# -- CSV export ----------------------------------------------------------


def test_export_csv_roundtrip(tmp_path):
    s = sample(5, 3, 2, seed=13)
    path = tmp_path / "points.csv"
    export_csv(s, path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["region", "x", "t"]
    body = rows[1:]
    assert len(body) == 10
    regions = [r[0] for r in body]
    assert regions == ["interior"] * 5 + ["boundary"] * 3 + ["initial"] * 2
    # full-precision round trip of the first interior point
    assert float(body[0][1]) == s.interior[0, 0]
    assert float(body[0][2]) == s.interior[0, 1]

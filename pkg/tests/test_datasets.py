import struct

import numpy as np
import pytest

from lkdl.datasets import (
    LabeledDataset,
    load_csv,
    load_idx,
    normalize_unit,
    save_csv,
    split_per_class,
    subsample_fraction,
    synth_circles,
    synth_gaussian_mixture,
    synth_planted_sparse,
)


def _write_idx_pair(tmp_path, images, labels):
    """images: list of 2-D uint8 arrays of equal shape."""
    images = np.asarray(images, dtype=np.uint8)
    n, rows, cols = images.shape
    ip = tmp_path / "images.idx"
    lp = tmp_path / "labels.idx"
    ip.write_bytes(struct.pack(">IIII", 0x803, n, rows, cols) + images.tobytes())
    lp.write_bytes(
        struct.pack(">II", 0x801, len(labels)) + bytes(labels)
    )
    return ip, lp


def test_idx_round_trip_hand_values(tmp_path):
    img0 = np.array([[0, 255], [51, 102]], dtype=np.uint8)
    img1 = np.array([[255, 255], [0, 0]], dtype=np.uint8)
    ip, lp = _write_idx_pair(tmp_path, [img0, img1], [7, 2])
    ds = load_idx(ip, lp)
    assert ds.p == 4 and ds.n == 2
    assert ds.labels.tolist() == [7, 2]
    # row-major flattening, scaled to [0, 1]
    assert np.allclose(ds.samples[:, 0], [0.0, 1.0, 0.2, 0.4])
    assert np.allclose(ds.samples[:, 1], [1.0, 1.0, 0.0, 0.0])


def test_idx_bad_magic_rejected(tmp_path):
    ip, lp = _write_idx_pair(tmp_path, [np.zeros((2, 2), dtype=np.uint8)], [0])
    bad = tmp_path / "bad.idx"
    bad.write_bytes(struct.pack(">IIII", 0xDEAD, 1, 2, 2) + bytes(4))
    with pytest.raises(ValueError, match="magic"):
        load_idx(bad, lp)
    badlab = tmp_path / "badlab.idx"
    badlab.write_bytes(struct.pack(">II", 0xBEEF, 1) + bytes(1))
    with pytest.raises(ValueError, match="magic"):
        load_idx(ip, badlab)


def test_idx_truncation_rejected(tmp_path):
    ip, lp = _write_idx_pair(tmp_path, [np.zeros((3, 3), dtype=np.uint8)], [1])
    short = tmp_path / "short.idx"
    short.write_bytes(ip.read_bytes()[:-2])
    with pytest.raises(ValueError, match="truncated"):
        load_idx(short, lp)


def test_idx_count_mismatch_rejected(tmp_path):
    ip, _ = _write_idx_pair(tmp_path, [np.zeros((2, 2), dtype=np.uint8)], [0])
    lp = tmp_path / "two_labels.idx"
    lp.write_bytes(struct.pack(">II", 0x801, 2) + bytes([1, 2]))
    with pytest.raises(ValueError, match="mismatch"):
        load_idx(ip, lp)


def test_csv_fixture_and_round_trip(tmp_path):
    f = tmp_path / "data.csv"
    f.write_text("1,0.5,-2.0\n2,3.0,4.0\n1,0.0,1.5\n")
    ds = load_csv(f)
    assert ds.p == 2 and ds.n == 3
    assert ds.labels.tolist() == [1, 2, 1]
    assert np.allclose(ds.samples[:, 1], [3.0, 4.0])

    out = tmp_path / "out.csv"
    save_csv(ds, out)
    ds2 = load_csv(out)
    assert np.array_equal(ds.labels, ds2.labels)
    assert np.array_equal(ds.samples, ds2.samples)  # repr() is lossless


def test_csv_label_column_selection(tmp_path):
    f = tmp_path / "last.csv"
    f.write_text("0.5,-2.0,1\n3.0,4.0,2\n")
    ds = load_csv(f, label_column=-1)
    assert ds.labels.tolist() == [1, 2]
    assert np.allclose(ds.samples[:, 0], [0.5, -2.0])


def test_csv_ragged_row_rejected(tmp_path):
    f = tmp_path / "ragged.csv"
    f.write_text("1,2,3\n1,2\n")
    with pytest.raises(ValueError, match="ragged"):
        load_csv(f)


def test_csv_non_numeric_rejected(tmp_path):
    f = tmp_path / "alpha.csv"
    f.write_text("1,2,x\n")
    with pytest.raises(ValueError, match="non-numeric"):
        load_csv(f)


def test_csv_empty_rejected(tmp_path):
    f = tmp_path / "empty.csv"
    f.write_text("")
    with pytest.raises(ValueError, match="no data"):
        load_csv(f)


def test_normalize_unit():
    ds = LabeledDataset(np.array([[3.0, 0.0], [4.0, 2.0]]), np.array([1, 2]))
    nds = normalize_unit(ds)
    assert np.allclose(np.linalg.norm(nds.samples, axis=0), 1.0)
    assert np.allclose(nds.samples[:, 0], [0.6, 0.8])
    with pytest.raises(ValueError, match="zero"):
        normalize_unit(
            LabeledDataset(np.array([[0.0], [0.0]]), np.array([1]))
        )


def test_subsample_fraction_counts_and_errors():
    ds = synth_gaussian_mixture(50, 3, 4, seed=0)
    sub = subsample_fraction(ds, 0.5, seed=1)
    assert sub.n == 75
    assert set(sub.classes.tolist()) == {1, 2, 3}
    with pytest.raises(ValueError):
        subsample_fraction(ds, 0.0)
    # tiny fractions must lose some class and be rejected rather than
    # silently returning a degenerate dataset
    with pytest.raises(ValueError, match="lost"):
        subsample_fraction(ds, 1 / 150, seed=0)


def test_split_per_class_deterministic_partition():
    ds = synth_gaussian_mixture(10, 2, 3, seed=2)
    train, test = split_per_class(ds, 6)
    assert train.n == 12 and test.n == 8
    for lab in (1, 2):
        assert np.count_nonzero(train.labels == lab) == 6
        assert np.count_nonzero(test.labels == lab) == 4
    # train and test columns together recover the original class partition
    orig = ds.samples[:, ds.labels == 1]
    joined = np.concatenate(
        [train.samples[:, train.labels == 1], test.samples[:, test.labels == 1]],
        axis=1,
    )
    assert np.array_equal(orig, joined)
    with pytest.raises(ValueError):
        split_per_class(ds, 10)


def test_circles_radii_and_labels():
    ds = synth_circles(100, radii=(1.0, 2.0), noise_sigma=0.01, seed=3)
    assert ds.p == 2 and ds.n == 200
    r = np.linalg.norm(ds.samples, axis=0)
    assert np.all(np.abs(r[ds.labels == 1] - 1.0) < 0.1)
    assert np.all(np.abs(r[ds.labels == 2] - 2.0) < 0.1)


def test_gaussian_mixture_shapes_and_separation():
    ds = synth_gaussian_mixture(30, 4, 6, spread=0.1, separation=8.0, seed=4)
    assert ds.p == 6 and ds.n == 120
    means = np.stack(
        [ds.samples[:, ds.labels == c].mean(axis=1) for c in ds.classes], axis=1
    )
    # distinct, well-separated centers
    d = np.linalg.norm(means[:, :, None] - means[:, None, :], axis=0)
    np.fill_diagonal(d, np.inf)
    assert d.min() > 1.0


def test_planted_sparse_exact_factorization():
    ds, D0, Gamma0 = synth_planted_sparse(10, 50, 6, 2, seed=5,
                                          max_coherence=0.8)
    assert np.array_equal(ds.samples, D0 @ Gamma0)
    assert np.allclose(np.linalg.norm(D0, axis=0), 1.0)
    assert np.all(np.count_nonzero(Gamma0, axis=0) == 2)
    # nonzero coefficients bounded away from zero
    nz = np.abs(Gamma0[Gamma0 != 0])
    assert nz.min() >= 1.0 and nz.max() <= 2.0
    G = np.abs(D0.T @ D0)
    np.fill_diagonal(G, 0.0)
    assert G.max() <= 0.8


def test_planted_sparse_unreachable_coherence_raises():
    with pytest.raises(RuntimeError, match="coherence"):
        synth_planted_sparse(3, 10, 30, 1, seed=0, max_coherence=0.05,
                             max_tries=5)

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gripsense.errors import DatasetError, FormatError, InvalidArgumentError, NumericalError
from gripsense.features import HistogramLimits, DIR_SPEC
from gripsense.imaging import HistogramSpec
from gripsense.model import (Dataset, make_labels, predict, read_model, split_sequential, train,
                             write_model)
from gripsense.signal import FilterSpec


def _problem(rng, n=50, d=5, noise=0.1):
    X = rng.normal(size=(n, d)) * rng.uniform(0.5, 3, d) + rng.normal(size=d)
    w = rng.normal(size=d)
    y = X @ w + 2.0 + noise * rng.normal(size=n)
    return Dataset(X, y, np.arange(n))


def _eliminate(A, b):
    """Gaussian elimination with partial pivoting, written out."""
    A = [list(map(float, r)) + [float(v)] for r, v in zip(A, b)]
    n = len(A)
    for c in range(n):
        p = max(range(c, n), key=lambda r: abs(A[r][c]))
        A[c], A[p] = A[p], A[c]
        for r in range(c + 1, n):
            f = A[r][c] / A[c][c]
            for j in range(c, n + 1):
                A[r][j] -= f * A[c][j]
    x = [0.0] * n
    for r in range(n - 1, -1, -1):
        x[r] = (A[r][n] - sum(A[r][j] * x[j] for j in range(r + 1, n))) / A[r][r]
    return np.array(x)


# -- splitting -------------------------------------------------------------------------

def test_split_two_recordings():
    train_idx, test_idx = split_sequential(11990, 1500, segments=[5995, 5995])
    assert train_idx.size == 8990 and test_idx.size == 3000
    assert test_idx[0] == 4495 and test_idx[-1] == 11989
    assert np.intersect1d(train_idx, test_idx).size == 0


def test_split_degenerate():
    with pytest.raises(InvalidArgumentError):
        split_sequential(10, 10)
    with pytest.raises(InvalidArgumentError):
        split_sequential(100, 30, starts=[10, 20])
    with pytest.raises(InvalidArgumentError):
        split_sequential(100, 30, starts=[80])


@given(st.integers(20, 500), st.data())
def test_split_is_partition(n, data):
    block = data.draw(st.integers(1, n // 4))
    k = data.draw(st.integers(1, 3))
    slots = sorted(data.draw(st.lists(st.integers(0, n // block - 1), min_size=k, max_size=k, unique=True)))
    train_idx, test_idx = split_sequential(n, block, starts=[s * block for s in slots])
    assert np.intersect1d(train_idx, test_idx).size == 0
    assert np.array_equal(np.union1d(train_idx, test_idx), np.arange(n))
    assert test_idx.size == block * k


# -- labels -------------------------------------------------------------------------------

def test_labels():
    assert not make_labels(np.full(100, 300.0), "temporal").any()
    ramp = 2.5 * np.arange(600.0)
    d = make_labels(ramp, "temporal")
    assert np.abs(d[50:-50] - 2.5).max() < 0.025
    left, right = np.arange(10.0), np.arange(10.0) ** 2
    avg = 0.5 * (left + right)
    assert np.array_equal(make_labels(avg, "spatial"), (left + right) / 2)
    with pytest.raises(InvalidArgumentError):
        make_labels(avg, "colour")
    assert make_labels(ramp, "temporal", FilterSpec(3.0, 2, 59.95)).shape == ramp.shape


# -- ridge -------------------------------------------------------------------------------------

def test_ridge_matches_normal_equations(rng):
    ds = _problem(rng)
    m = train(ds, "ridge", lam=1.0)
    mean, sd = ds.X.mean(axis=0), ds.X.std(axis=0)
    Z = (ds.X - mean) / sd
    yc = ds.y - ds.y.mean()
    w = _eliminate(Z.T @ Z + np.eye(5), Z.T @ yc)
    np.testing.assert_allclose(m.weights, w, rtol=1e-10, atol=1e-12)
    assert m.bias == pytest.approx(ds.y.mean(), abs=1e-12)


def test_ridge_realisable_target(rng):
    ds = _problem(rng, noise=0.0)
    m = train(ds, "ridge", lam=1e-8)
    assert np.sqrt(np.mean((predict(m, ds.X) - ds.y) ** 2)) < 1e-6


def test_ridge_constant_target(rng):
    ds = _problem(rng)
    m = train(Dataset(ds.X, np.full(50, 4.25), ds.frames), "ridge")
    assert np.abs(m.weights).max() < 1e-12 and m.bias == 4.25
    assert predict(m, ds.X.mean(axis=0)) == pytest.approx(4.25, abs=1e-12)


def test_ridge_mean_input_gives_mean_label(rng):
    ds = _problem(rng)
    m = train(ds, "ridge")
    assert predict(m, ds.X.mean(axis=0)) == pytest.approx(ds.y.mean(), abs=1e-9)


def test_ridge_invariant_to_column_rescaling(rng):
    ds = _problem(rng)
    X2 = ds.X.copy()
    X2[:, 2] = 37.0 * X2[:, 2] - 5.0
    p1 = predict(train(ds, "ridge"), ds.X)
    p2 = predict(train(Dataset(X2, ds.y, ds.frames), "ridge"), X2)
    assert np.abs(p1 - p2).max() < 1e-9


def test_ridge_errors(rng):
    ds = _problem(rng, n=4)
    with pytest.raises(DatasetError):
        train(ds, "ridge")
    X = np.column_stack([np.ones(20), np.arange(20.0), 2 * np.arange(20.0)])
    with pytest.raises(NumericalError):
        train(Dataset(X, np.arange(20.0), np.arange(20)), "ridge", lam=0.0)
    with pytest.raises(InvalidArgumentError):
        train(ds, "forest")


# -- knn ------------------------------------------------------------------------------------------

def test_knn_own_label_with_k1(rng):
    ds = _problem(rng)
    m = train(ds, "knn", k=1)
    np.testing.assert_array_equal(predict(m, ds.X), ds.y)


def test_knn_inverse_distance(rng):
    X = np.array([[0.0], [1.0], [3.0], [10.0]])
    y = np.array([1.0, 2.0, 4.0, 100.0])
    m = train(Dataset(X, y, np.arange(4)), "knn", k=2)
    z = (np.array([0.5]) - m.mean) / m.scale
    d = np.abs(m.train_X[:, 0] - z[0])
    expected = (y[0] / d[0] + y[1] / d[1]) / (1 / d[0] + 1 / d[1])
    assert predict(m, [0.5]) == pytest.approx(expected, rel=1e-12)
    with pytest.raises(DatasetError):
        train(Dataset(X, y, np.arange(4)), "knn", k=5)


@pytest.mark.parametrize("kind", ["ridge", "knn"])
def test_batch_equals_single(rng, kind):
    ds = _problem(rng, n=80, d=6)
    m = train(ds, kind, k=7)
    Xq = rng.normal(size=(25, 6))
    batch = predict(m, Xq)
    single = np.array([predict(m, row) for row in Xq])
    assert batch.tobytes() == single.tobytes()
    with pytest.raises(InvalidArgumentError):
        predict(m, np.ones(5))


# -- model files ------------------------------------------------------------------------------------

LIMITS = HistogramLimits((HistogramSpec(20, -0.1, 0.2),) * 3, HistogramSpec(10, -0.5, 0.5), DIR_SPEC)


@pytest.mark.parametrize("kind", ["ridge", "knn"])
def test_model_round_trip_bit_exact(tmp_path, rng, kind):
    ds = _problem(rng, n=60, d=6)
    m = train(ds, kind, k=5, limits=LIMITS)
    write_model(tmp_path / "m.txt", m)
    text = (tmp_path / "m.txt").read_text()
    assert text.splitlines()[0] == f"gripsense-model v1 {kind} 6"
    back = read_model(tmp_path / "m.txt")
    assert back.limits == LIMITS and back.kind == kind
    Xq = rng.normal(size=(10, 6))
    assert predict(back, Xq).tobytes() == predict(m, Xq).tobytes()
    m2 = train(ds, kind, k=5, limits=LIMITS)
    write_model(tmp_path / "m2.txt", m2)
    assert (tmp_path / "m2.txt").read_bytes() == (tmp_path / "m.txt").read_bytes()


def test_model_file_errors(tmp_path):
    (tmp_path / "bad.txt").write_text("not a model\n")
    with pytest.raises(FormatError):
        read_model(tmp_path / "bad.txt")
    (tmp_path / "trunc.txt").write_text("gripsense-model v1 ridge 3\nstream spatial\nblock mean 3\n1 2\n")
    with pytest.raises(FormatError):
        read_model(tmp_path / "trunc.txt")

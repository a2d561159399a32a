import struct

import numpy as np
import pytest
from scipy import ndimage

from gripsense.errors import FormatError, InvalidArgumentError
from gripsense.flow import FlowField, FlowParams, dense_flow, read_flow, transform_flow, write_flow
from gripsense.transform import SimilarityTransform


def texture(shape, seed=0, sigma=2.0):
    rng = np.random.default_rng(seed)
    t = ndimage.gaussian_filter(rng.standard_normal(shape), sigma)
    t = (t - t.min()) / (t.max() - t.min())
    return (20 + 215 * t) / 255.0  # float frames are on the unit interval


@pytest.fixture(scope="module")
def translated():
    big = texture((140, 140), seed=3)
    moved = ndimage.shift(big, (-2.0, 3.0), order=3, mode="nearest")
    a, b = big[20:116, 20:116], moved[20:116, 20:116]
    return a, b, dense_flow(a, b)


def test_translation_recovered(translated):
    _, _, f = translated
    inner = (slice(8, -8), slice(8, -8))
    assert abs(np.median(f.u[inner]) - 3.0) < 0.2
    assert abs(np.median(f.v[inner]) + 2.0) < 0.2


def test_energy_monotone_per_level(translated):
    _, _, f = translated
    assert f.energy_trace
    for trace in f.energy_trace:
        assert np.all(np.diff(trace) <= 1e-8)


def test_zero_motion():
    a = texture((64, 80), seed=1)
    f = dense_flow(a, a)
    assert np.abs(f.magnitude).max() < 1e-3
    for trace in f.energy_trace:
        assert np.all(np.diff(trace) <= 1e-8)


def test_zoom_points_outward():
    n = 100
    big = texture((n, n), seed=5)
    c = (n - 1) / 2
    # the second frame is the first magnified by 1.02 about the centre
    zoom = ndimage.affine_transform(big, np.eye(2) / 1.02, offset=c - c / 1.02, order=3, mode="nearest")
    f = dense_flow(big, zoom)
    y, x = np.mgrid[0:n, 0:n] - c
    r = np.hypot(x, y)
    sel = (r > 20) & (r < c - 6)
    dot = f.u * x + f.v * y
    assert (dot[sel] > 0).mean() >= 0.9
    for trace in f.energy_trace:
        assert np.all(np.diff(trace) <= 1e-8)


def test_shift_equivariance():
    big = texture((130, 130), seed=9)
    moved = ndimage.shift(big, (1.0, 1.5), order=3, mode="nearest")
    f1 = dense_flow(big[10:106, 10:106], moved[10:106, 10:106])
    f2 = dense_flow(big[14:110, 17:113], moved[14:110, 17:113])
    # f2 at (r, c) looks at the same content as f1 at (r + 4, c + 7)
    a = f1.u[16:80, 16:80], f1.v[16:80, 16:80]
    b = f2.u[12:76, 9:73], f2.v[12:76, 9:73]
    assert np.abs(a[0] - b[0]).max() < 0.1 and np.abs(a[1] - b[1]).max() < 0.1


def test_rgb_input_and_extent_check():
    a = np.stack([texture((40, 48), seed=2) * 255] * 3, axis=-1).astype(np.uint8)
    f = dense_flow(a, a)
    assert f.shape == (40, 48)
    with pytest.raises(InvalidArgumentError):
        dense_flow(a, a[:-1])


def test_params_validation():
    for bad in (dict(ratio=1.0), dict(min_width=3), dict(n_sor=0), dict(alpha=0.0), dict(omega=2.0)):
        with pytest.raises(InvalidArgumentError):
            FlowParams(**bad)
    assert FlowParams() == FlowParams(0.012, 0.75, 20, 7, 1, 30, 1.8)


# -- transform_flow ---------------------------------------------------------------------

def test_transform_identity(rng):
    f = FlowField(rng.random((9, 11)), rng.random((9, 11)))
    g = transform_flow(f, SimilarityTransform(), f.shape)
    np.testing.assert_array_equal(g.u, f.u)
    np.testing.assert_array_equal(g.v, f.v)


def test_transform_rotates_uniform_field():
    f = FlowField(np.ones((10, 10)), np.zeros((10, 10)))
    g = transform_flow(f, SimilarityTransform(1.0, np.pi / 2, 9.0, 0.0), f.shape)
    # a positive quarter turn takes +x to +y
    np.testing.assert_allclose(g.u, 0.0, atol=1e-12)
    np.testing.assert_allclose(g.v, 1.0, atol=1e-12)


def test_transform_affine_field_pointwise(rng):
    h, w = 40, 50
    A = rng.normal(size=(2, 2)) * 0.05
    b = rng.normal(size=2)
    y, x = np.mgrid[0:h, 0:w].astype(float)
    f = FlowField(A[0, 0] * x + A[0, 1] * y + b[0], A[1, 0] * x + A[1, 1] * y + b[1])
    T = SimilarityTransform(1.3, 0.4, 5.0, -3.0)
    g = transform_flow(f, T, (60, 60))
    oy, ox = np.mgrid[0:60, 0:60].astype(float)
    sp = T.inverse().apply(np.stack([ox, oy], axis=-1))
    inside = (sp[..., 0] >= 0) & (sp[..., 0] <= w - 1) & (sp[..., 1] >= 0) & (sp[..., 1] <= h - 1)
    orig = np.einsum("ij,...j->...i", A, sp) + b
    expect = np.einsum("ij,...j->...i", T.linear(), orig)
    assert inside.sum() > 500
    np.testing.assert_allclose(g.u[inside], expect[..., 0][inside], atol=1e-9)
    np.testing.assert_allclose(g.v[inside], expect[..., 1][inside], atol=1e-9)


# -- cache files --------------------------------------------------------------------------

def test_flow_file_round_trip(tmp_path, rng):
    f = FlowField(rng.normal(size=(5, 7)), rng.normal(size=(5, 7)))
    p = tmp_path / "pair.flo"
    write_flow(p, f)
    data = p.read_bytes()
    assert struct.unpack("<ii", data[:8]) == (7, 5) and len(data) == 8 + 8 * 35
    g = read_flow(p)
    np.testing.assert_array_equal(g.u, f.u.astype(np.float32))
    np.testing.assert_array_equal(g.v, f.v.astype(np.float32))
    p.write_bytes(data[:-4])
    with pytest.raises(FormatError):
        read_flow(p)

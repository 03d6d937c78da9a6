import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from autocc_mil.errors import FormatError, TooFewShades
from autocc_mil.quantizer import (Codebook, ShadeSet, codebook_from_json, codebook_to_json,
                                  collect_unique_shades, nearest_centroid, quantize_raster,
                                  train_codebook)

from oracles import brute_nearest_centroid


def test_single_color_image_has_one_shade():
    img = np.empty((4, 5, 3), np.uint8)
    img[:] = (10, 20, 30)
    s = collect_unique_shades([img])
    assert s.count == 1
    assert s.shades.tolist() == [[10.0, 20.0, 30.0]]


def test_duplicate_images_dedupe():
    img = np.random.default_rng(1).integers(0, 4, (8, 8, 3), dtype=np.uint8)
    a = collect_unique_shades([img])
    b = collect_unique_shades([img, img.copy()])
    assert np.array_equal(a.shades, b.shades)


def test_unique_shades_match_set_oracle():
    img = np.random.default_rng(2).integers(0, 256, (32, 32, 3), dtype=np.uint8)
    oracle = {tuple(int(v) for v in p) for p in img.reshape(-1, 3)}
    s = collect_unique_shades([img])
    assert s.count == len(oracle)
    assert {tuple(int(v) for v in row) for row in s.shades} == oracle


def test_k_equal_to_shade_count_reproduces_shades():
    img = np.random.default_rng(4).integers(0, 256, (3, 5, 3), dtype=np.uint8)
    shades = collect_unique_shades([img])
    cb = train_codebook(shades, k=shades.count, seed=7)
    assert cb.training_sse == 0.0
    assert {tuple(r) for r in cb.centroids} == {tuple(r) for r in shades.shades}
    q = quantize_raster(img, cb)
    assert np.array_equal(cb.centroids[q].astype(np.uint8), img)


def test_k_one_is_the_mean():
    pts = np.random.default_rng(5).integers(0, 256, (40, 3)).astype(float)
    pts = np.unique(pts, axis=0)
    cb = train_codebook(ShadeSet(pts), k=1)
    assert np.allclose(cb.centroids[0], pts.mean(axis=0), atol=1e-9)


def test_too_few_shades():
    with pytest.raises(TooFewShades):
        train_codebook(ShadeSet(np.zeros((3, 3))), k=4)


@pytest.mark.parametrize("seed", range(5))
def test_sse_trace_non_increasing_and_canonical(seed):
    rng = np.random.default_rng(seed)
    img = rng.integers(0, 256, (40, 40, 3), dtype=np.uint8)
    cb = train_codebook(collect_unique_shades([img]), k=64, seed=seed)
    trace = np.array(cb.sse_trace)
    assert (np.diff(trace) <= 1e-9 * trace[0]).all()
    assert cb.k == 64
    keys = [tuple(r) for r in cb.centroids]
    assert keys == sorted(keys)
    assert cb.centroids.min() >= 0 and cb.centroids.max() <= 255


def test_training_is_deterministic():
    img = np.random.default_rng(9).integers(0, 256, (24, 24, 3), dtype=np.uint8)
    s = collect_unique_shades([img])
    a, b = train_codebook(s, 16, seed=3), train_codebook(s, 16, seed=3)
    assert codebook_to_json(a) == codebook_to_json(b)


def test_exact_centroid_and_tie():
    cents = np.zeros((8, 3))
    cents[:, 0] = np.arange(8) * 20.0
    cents[3] = (100, 0, 0)
    cents[7] = (110, 10, 0)
    # (105, 5, 0) is equidistant from centroids 3 and 7
    q = nearest_centroid(np.array([[105.0, 5.0, 0.0], [40.0, 0.0, 0.0]]), cents)
    assert q.tolist() == [3, 2]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 12))
def test_quantize_matches_linear_scan_with_planted_ties(seed, k):
    rng = np.random.default_rng(seed)
    cents = rng.integers(0, 128, (k, 3)).astype(float) * 2  # even: midpoints are integers
    img = rng.integers(0, 256, (6, 7, 3), dtype=np.uint8)
    if k >= 2:
        i, j = sorted(rng.choice(k, 2, replace=False))
        if not np.array_equal(cents[i], cents[j]):
            img[0, 0] = ((cents[i] + cents[j]) / 2).astype(np.uint8)
    cb = Codebook(cents)
    q = quantize_raster(img, cb)
    assert q.shape == img.shape[:2]
    for y in range(img.shape[0]):
        for x in range(img.shape[1]):
            assert q[y, x] == brute_nearest_centroid(img[y, x], cents)


def test_codebook_json_round_trip_bytes():
    img = np.random.default_rng(11).integers(0, 256, (16, 16, 3), dtype=np.uint8)
    cb = train_codebook(collect_unique_shades([img]), 8, seed=2)
    text = codebook_to_json(cb)
    back = codebook_from_json(text)
    assert np.array_equal(back.centroids, cb.centroids)
    assert codebook_to_json(back) == text


def test_codebook_json_rejects_bad_version():
    with pytest.raises(FormatError):
        codebook_from_json('{"version": 9, "k": 1, "centroids": [[0,0,0]], "sse": 0}')
    with pytest.raises(FormatError):
        codebook_from_json('{"version": 1, "k": 2, "centroids": [[0,0,0]], "sse": 0}')

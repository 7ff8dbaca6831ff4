import numpy as np
import pytest

from linedefect.cover import (
    EmptyZeroSetError,
    audit_coverage,
    audit_nesting,
    audit_vitali,
    build_cover,
    diameter_pair,
    packing_measure,
)


def segment_points(n=100001):
    z = np.linspace(-1, 1, n)[1:-1]
    return np.column_stack([0 * z, 0 * z, z])


def plane_points(step):
    g = np.arange(-1, 1, step) + step / 2
    X, Y = np.meshgrid(g, g)
    m = X**2 + Y**2 < 1
    return np.column_stack([X[m], Y[m], 0 * X[m]])


@pytest.fixture(scope="module")
def segment_tree():
    return build_cover(segment_points(), np.zeros(3), 1.0, 3)


def test_segment_packing_uniform(segment_tree):
    packs = segment_tree.packing_sums()[1:]
    assert max(packs) / min(packs) - 1 <= 0.10
    counts = [len(lv.centers) for lv in segment_tree.levels]
    for a, b in zip(counts[1:], counts[2:]):
        assert 8 <= b / a <= 12


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_segment_audits(segment_tree, k):
    assert audit_vitali(segment_tree, k)
    assert audit_coverage(segment_tree, k)
    assert audit_nesting(segment_tree, k)


def test_segment_line_case_tags(segment_tree):
    lv = segment_tree.levels[1]
    assert lv.lines and set(lv.tags) <= {"b", "fill"}
    assert lv.off_tube == 0


def test_single_point_case_a():
    tree = build_cover(np.array([[0.1, 0.0, 0.0]]), np.zeros(3), 1.0, 3)
    packs = tree.packing_sums()
    for k, lv in enumerate(tree.levels[1:], start=1):
        assert lv.tags == ["a"] and len(lv.centers) == 1
        assert packs[k] == pytest.approx(packs[k - 1] / 10)


def test_plane_packing_grows():
    tree = build_cover(plane_points(0.004), np.zeros(3), 1.0, 2)
    packs = tree.packing_sums()
    assert packs[2] >= 3 * packs[1]
    assert all(audit_vitali(tree, k) and audit_coverage(tree, k) for k in range(3))


def test_packing_measure_empty_level(segment_tree):
    assert packing_measure(segment_tree, 7) == 0.0
    assert packing_measure(segment_tree, 1) == segment_tree.packing_sums()[1]


def test_cover_errors():
    with pytest.raises(EmptyZeroSetError, match="empty zero set in ball"):
        build_cover(np.array([[5.0, 0, 0]]), np.zeros(3), 1.0, 2)
    with pytest.raises(ValueError):
        build_cover(np.array([[0.0, 0, 0]]), np.zeros(3), 1.0, 0)


def test_diameter_pair_matches_bruteforce(rng):
    p = rng.normal(size=(300, 3))
    d, i, j = diameter_pair(p)
    D = np.linalg.norm(p[:, None] - p[None], axis=-1)
    assert d == pytest.approx(D.max(), rel=1e-14)
    assert D[i, j] == pytest.approx(D.max(), rel=1e-14)


def test_diameter_pair_large_collinear():
    p = segment_points(20001)
    d, i, j = diameter_pair(p)
    assert d == pytest.approx(np.ptp(p[:, 2]), rel=1e-14)


def test_cover_deterministic():
    a = build_cover(segment_points(20001), np.zeros(3), 1.0, 2).to_record()
    b = build_cover(segment_points(20001), np.zeros(3), 1.0, 2).to_record()
    assert a == b

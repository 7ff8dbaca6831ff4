"""Hierarchical 1/10^k ball covers of a defect point set with Vitali and packing audits."""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.spatial import ConvexHull, cKDTree
from scipy.spatial import QhullError

from . import _kernels
from .errors import LineDefectError

BRUTE_DIAMETER = 5000


class EmptyZeroSetError(LineDefectError, ValueError):
    pass


@dataclass
class CoverLevel:
    level: int
    radius: float
    centers: np.ndarray
    tags: list
    parents: np.ndarray
    lines: list = field(default_factory=list)
    off_tube: int = 0
    fallback: int = 0
    dropped: int = 0

    @property
    def packing(self) -> float:
        return len(self.centers) * self.radius / 5.0


@dataclass
class CoverTree:
    x: np.ndarray
    r: float
    points: np.ndarray
    levels: list

    def packing_sums(self) -> list:
        return [lv.packing for lv in self.levels]

    def to_record(self) -> dict:
        return {
            "root": {"x": [float(c) for c in self.x], "r": float(self.r), "points": int(len(self.points))},
            "levels": [
                {
                    "level": lv.level,
                    "radius": lv.radius,
                    "count": int(len(lv.centers)),
                    "packing": lv.packing,
                    "centers": [[float(c) for c in p] for p in lv.centers],
                    "tags": list(lv.tags),
                    "parents": [int(p) for p in lv.parents],
                    "lines": [{"parent": int(i), "point": [float(c) for c in a], "direction": [float(c) for c in d]}
                              for i, a, d in lv.lines],
                    "off_tube": lv.off_tube,
                    "fallback": lv.fallback,
                    "dropped": lv.dropped,
                }
                for lv in self.levels
            ],
        }


def diameter_pair(p: np.ndarray) -> tuple[float, int, int]:
    """Exact farthest pair; hull vertices first for large sets."""
    m = len(p)
    if m == 1:
        return 0.0, 0, 0
    idx = np.arange(m)
    if m > BRUTE_DIAMETER:
        try:
            idx = np.unique(ConvexHull(p, qhull_options="QJ").vertices)
        except (QhullError, ValueError):
            # (near) collinear input: extremes along the principal axis hold the diameter
            c = p - p.mean(axis=0)
            ax = np.linalg.svd(c, full_matrices=False)[2][0]
            t = c @ ax
            o = np.argsort(t, kind="stable")
            idx = np.unique(np.concatenate([o[:64], o[-64:]]))
    best, bi, bj = _kernels.farthest_pair(np.ascontiguousarray(p[idx]))
    a, b = sorted((int(idx[bi]), int(idx[bj])))
    return math.sqrt(best), a, b


def _single_ball_center(p: np.ndarray, radius: float, tries: int = 2000) -> int | None:
    """Index of a point whose closed radius-ball holds all of ``p``, if any."""
    c = 0.5 * (p.min(axis=0) + p.max(axis=0))
    order = np.argsort(np.linalg.norm(p - c, axis=1), kind="stable")[:tries]
    for i in order:
        if np.max(np.linalg.norm(p - p[i], axis=1)) <= radius:
            return int(i)
    return None


def build_cover(points, x, r: float, depth: int, tube: float = 0.5) -> CoverTree:
    """Levels k = 0..depth of balls of radius r/10^k over the points in B_r(x).

    Per parent ball: if its points fit in one child ball centered at one of
    them, that child is emitted (single-ball case); otherwise the line through
    a farthest pair is fitted and the points within ``tube`` child radii of it
    become candidate centers, ordered along the line.  Candidates that would
    meet the radius/5 core of a single-ball parent are dropped.  Candidates
    are accepted greedily when farther than one child radius from every
    accepted center, which makes the radius/5 balls disjoint; a final scan over
    all points accepts any point still uncovered so coverage is exact.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    x = np.asarray(x, dtype=float)
    pts_all = np.asarray(points, dtype=float).reshape(-1, 3)
    P = pts_all[np.linalg.norm(pts_all - x, axis=1) < r]
    if len(P) == 0:
        raise EmptyZeroSetError("empty zero set in ball")
    tree = cKDTree(P)
    levels = [CoverLevel(0, float(r), x[None, :].copy(), ["root"], np.array([-1]))]
    for k in range(depth):
        parent = levels[-1]
        rk = parent.radius
        rn = r / 10.0 ** (k + 1)
        a_seed, a_centers, a_parent = [], [], []
        b_tube, b_off, lines = [], [], []
        for pi, c in enumerate(parent.centers):
            idx = np.array(sorted(tree.query_ball_point(c, rk)), dtype=np.int64)
            if idx.size == 0:
                continue
            sub = P[idx]
            diam, i1, i2 = diameter_pair(sub)
            zt = _single_ball_center(sub, rn) if diam <= 2.0 * rn else None
            if zt is not None:
                a_seed.append(idx[zt])
                a_centers.append(c)
                a_parent.append(pi)
                continue
            p1, p2 = sub[i1], sub[i2]
            e = (p2 - p1) / np.linalg.norm(p2 - p1)
            rel = sub - p1
            t = rel @ e
            dist = np.linalg.norm(rel - np.outer(t, e), axis=1)
            inside = dist <= tube * rn
            o = np.argsort(t, kind="stable")
            b_tube.append((pi, idx[o[inside[o]]]))
            b_off.append((pi, idx[o[~inside[o]]]))
            lines.append((pi, p1, e))
        dropped = 0
        a_seed = np.array(a_seed, dtype=np.int64)
        a_core = np.array(a_centers).reshape(-1, 3)
        core_tree = cKDTree(a_core) if len(a_core) else None

        def keep_far(ids):
            nonlocal dropped
            if core_tree is None or ids.size == 0:
                return ids
            d, _ = core_tree.query(P[ids])
            ok = d >= rn + rk / 5.0
            dropped += int(np.sum(~ok))
            return ids[ok]

        tube_lists = [(pi, keep_far(ids)) for pi, ids in b_tube]
        off_lists = [(pi, keep_far(ids)) for pi, ids in b_off]
        staged = [(pi, np.array([s], dtype=np.int64)) for s, pi in zip(a_seed, a_parent)] + tube_lists + off_lists
        owner = np.full(len(P), -1, dtype=np.int64)
        for pi, ids in reversed(staged):
            owner[ids] = pi
        n_first = len(a_seed) + sum(ids.size for _, ids in tube_lists)
        n_primary = n_first + sum(ids.size for _, ids in off_lists)
        seq = np.concatenate([a_seed] + [ids for _, ids in tube_lists] + [ids for _, ids in off_lists]
                             + [np.arange(len(P), dtype=np.int64)])
        keep = _kernels.greedy_net(P, seq, rn)
        # position of first appearance decides which stage accepted a center
        first = np.full(len(P), len(seq), dtype=np.int64)
        np.minimum.at(first, seq, np.arange(len(seq), dtype=np.int64))
        chosen = np.flatnonzero(keep)
        pos = first[chosen]
        srt = np.argsort(pos, kind="stable")
        chosen, pos = chosen[srt], pos[srt]
        stage = np.select([pos < len(a_seed), pos < n_first, pos < n_primary], [0, 1, 2], 3)
        tags = [("a", "b", "b-off", "fill")[s] for s in stage]
        off_tube = int(np.sum(stage == 2))
        fallback = int(np.sum(stage == 3))
        parents = owner[chosen]
        lost = parents < 0
        if np.any(lost):
            parents[lost] = cKDTree(parent.centers).query(P[chosen[lost]])[1]
        levels.append(CoverLevel(k + 1, float(rn), P[chosen].reshape(-1, 3), tags,
                                 parents, lines, off_tube, fallback, dropped))
    return CoverTree(x, float(r), P, levels)


def packing_measure(tree: CoverTree, level: int) -> float:
    if level >= len(tree.levels) or level < 0:
        return 0.0
    return tree.levels[level].packing


def audit_vitali(tree: CoverTree, level: int) -> bool:
    """Concentric radius/5 balls pairwise disjoint."""
    lv = tree.levels[level]
    if len(lv.centers) < 2:
        return True
    d, _ = cKDTree(lv.centers).query(lv.centers, k=2)
    return bool(np.min(d[:, 1]) >= 2.0 * lv.radius / 5.0)


def audit_coverage(tree: CoverTree, level: int) -> bool:
    """Every point of the root ball lies in a closed ball of the level."""
    lv = tree.levels[level]
    d, _ = cKDTree(lv.centers).query(tree.points)
    return bool(np.all(d <= lv.radius))


def audit_nesting(tree: CoverTree, level: int) -> bool:
    """Each child center lies in its parent ball."""
    if level == 0:
        return True
    lv, up = tree.levels[level], tree.levels[level - 1]
    d = np.linalg.norm(lv.centers - up.centers[lv.parents], axis=1)
    return bool(np.all(d <= up.radius))

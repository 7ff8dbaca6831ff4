"""Second moments, beta_2 numbers and the multiscale deviation integral of weighted point clouds."""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .errors import EmptyBallError
from .weiss import INNER, OUTER, pinching_scales


@dataclass(frozen=True)
class DiscreteMeasure:
    x: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(-1, 3)
        s = np.asarray(self.s, dtype=float).reshape(-1)
        if x.shape[0] != s.shape[0]:
            raise ValueError("one weight per atom required")
        if np.any(~(s > 0)) or not np.all(np.isfinite(s)):
            raise ValueError("weights must be positive and finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "s", s)

    @classmethod
    def from_zero_set(cls, zs) -> "DiscreteMeasure":
        return cls(zs.points, zs.weights)

    def __len__(self):
        return self.x.shape[0]

    def mass(self) -> float:
        return float(self.s.sum())

    def restrict(self, x0, r0: float) -> "DiscreteMeasure":
        keep = np.linalg.norm(self.x - np.asarray(x0, dtype=float), axis=1) < r0
        return DiscreteMeasure(self.x[keep], self.s[keep])


@dataclass(frozen=True)
class BetaResult:
    barycenter: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    beta2: float
    best_line: tuple
    mass: float

    CSV_HEADER = ("x1", "x2", "x3", "r0", "mass", "lambda1", "lambda2", "lambda3", "beta2")


def _jacobi_polish(A: np.ndarray, V: np.ndarray, sweeps: int = 8) -> tuple[np.ndarray, np.ndarray]:
    M = V.T @ A @ V
    scale = max(float(np.max(np.abs(A))), 1e-300)
    for _ in range(sweeps):
        off = abs(M[0, 1]) + abs(M[0, 2]) + abs(M[1, 2])
        if off <= 1e-17 * scale:
            break
        for p, q in ((0, 1), (0, 2), (1, 2)):
            if M[p, q] == 0.0:
                continue
            theta = (M[q, q] - M[p, p]) / (2.0 * M[p, q])
            t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
            c = 1.0 / math.sqrt(t * t + 1.0)
            s = t * c
            J = np.eye(3)
            J[p, p] = J[q, q] = c
            J[p, q] = s
            J[q, p] = -s
            M = J.T @ M @ J
            V = V @ J
    return np.diag(M).copy(), V


def _null_vector(A: np.ndarray, lam: float) -> np.ndarray | None:
    rows = A - lam * np.eye(3)
    cands = [np.cross(rows[0], rows[1]), np.cross(rows[0], rows[2]), np.cross(rows[1], rows[2])]
    norms = [float(np.linalg.norm(c)) for c in cands]
    i = int(np.argmax(norms))
    if norms[i] <= 1e-300:
        return None
    return cands[i] / norms[i]


def _orthonormal_to(v: np.ndarray) -> np.ndarray:
    a = np.eye(3)[int(np.argmin(np.abs(v)))]
    w = a - (a @ v) * v
    return w / np.linalg.norm(w)


def eigh_sym3(A) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and orthonormal eigenvectors (columns) of a symmetric 3x3 matrix.

    Trigonometric closed form for the eigenvalues, cross products for the
    vectors, then Jacobi rotations to clean up near-degenerate cases.
    """
    A = np.asarray(A, dtype=float)
    A = 0.5 * (A + A.T)
    p1 = A[0, 1] ** 2 + A[0, 2] ** 2 + A[1, 2] ** 2
    if p1 == 0.0:
        lam = np.diag(A).copy()
        V = np.eye(3)
    else:
        q = np.trace(A) / 3.0
        p2 = (A[0, 0] - q) ** 2 + (A[1, 1] - q) ** 2 + (A[2, 2] - q) ** 2 + 2.0 * p1
        p = math.sqrt(p2 / 6.0)
        B = (A - q * np.eye(3)) / p
        r = min(1.0, max(-1.0, float(np.linalg.det(B)) / 2.0))
        phi = math.acos(r) / 3.0
        l1 = q + 2.0 * p * math.cos(phi)
        l3 = q + 2.0 * p * math.cos(phi + 2.0 * math.pi / 3.0)
        v1 = _null_vector(A, l1)
        if v1 is None:
            v1 = np.array([1.0, 0.0, 0.0])
        v3 = _null_vector(A, l3)
        if v3 is None or abs(v3 @ v1) > 0.5:
            v3 = _orthonormal_to(v1)
        v3 = v3 - (v3 @ v1) * v1
        v3 /= np.linalg.norm(v3)
        v2 = np.cross(v3, v1)
        V = np.column_stack([v1, v2, v3])
        lam, V = _jacobi_polish(A, V)
    order = np.argsort(-lam, kind="stable")
    return lam[order], V[:, order]


def second_moment(mu: DiscreteMeasure, x0, r0: float) -> tuple[np.ndarray, np.ndarray, float]:
    """Barycenter, second-moment form and mass of mu restricted to the open ball B_r0(x0)."""
    sub = mu.restrict(x0, r0)
    if len(sub) == 0:
        raise EmptyBallError("empty ball")
    m = sub.mass()
    bary = (sub.s[:, None] * sub.x).sum(axis=0) / m
    d = sub.x - bary
    B = np.einsum("n,ni,nj->ij", sub.s, d, d)
    return bary, B, m


def beta2(mu: DiscreteMeasure, x0, r0: float) -> BetaResult:
    if not r0 > 0:
        raise ValueError("r0 must be positive")
    bary, B, m = second_moment(mu, x0, r0)
    lam, V = eigh_sym3(B)
    lam = np.maximum(lam, 0.0)
    b = float(lam[1] + lam[2]) / r0**3
    return BetaResult(bary, lam, V, b, (bary, V[:, 0].copy()), m)


def distortion_check(field, mu: DiscreteMeasure, x0, r: float, inner: float = INNER, outer: float = OUTER) -> dict:
    """beta_2 on B_{r/8}(x0) against (1/r) sum_j s_j W_{inner r}^{outer r}(x_j) over the same ball."""
    lhs = beta2(mu, x0, r / 8.0).beta2
    sub = mu.restrict(x0, r / 8.0)
    rhs = sum(float(s) * pinching_scales(field, p, r, inner, outer) for p, s in zip(sub.x, sub.s)) / r
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
    return {"lhs": lhs, "rhs_unscaled": rhs, "ratio": ratio}


def min_separation(mu: DiscreteMeasure) -> float:
    from scipy.spatial import cKDTree

    if len(mu) < 2:
        return math.inf
    d, _ = cKDTree(mu.x).query(mu.x, k=2)
    pos = d[:, 1][d[:, 1] > 0]
    return float(pos.min()) if pos.size else math.inf


def scale_ladder(r: float, s_min: float) -> np.ndarray:
    """r, r/2, r/4, ... down to the last value >= s_min."""
    out = [r]
    while out[-1] / 2.0 >= s_min:
        out.append(out[-1] / 2.0)
    return np.array(out)


def reifenberg_hypothesis(mu: DiscreteMeasure, x, r: float, s_min: float | None = None) -> float:
    """(1/r) sum_j s_j integral_{s_min}^{r} D_mu(x_j, s) ds/s over atoms x_j in B_r(x).

    The ds/s integral uses the trapezoid rule in log s on the dyadic ladder.
    """
    sub = mu.restrict(x, r)
    if len(sub) == 0:
        raise EmptyBallError("empty ball")
    if s_min is None:
        sep = min_separation(mu)
        s_min = 2.0 * sep if math.isfinite(sep) else r
    if not s_min > 0:
        raise ValueError("s_min must be positive")
    scales = scale_ladder(r, s_min)
    if len(scales) == 1:
        return 0.0
    w = np.full(len(scales), math.log(2.0))
    w[0] *= 0.5
    w[-1] *= 0.5
    total = 0.0
    for y, sy in zip(sub.x, sub.s):
        inner = 0.0
        for s, ws in zip(scales, w):
            inner += ws * beta2(mu, y, s).beta2
        total += sy * inner
    return total / r

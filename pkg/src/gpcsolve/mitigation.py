"""
Borland-Dennis polytope and the calibrated error-mitigation map.

Occupations are handled as the triple (n4, n5, n6); the other three follow
from the complement relations.  Mitigation is a composition of

1. a piecewise-affine correction in measured-occupation space (p1, p2, p3),
   calibrated on a grid of circuit parameters,
2. the analytic map from the ideal circuit surface onto the pinned plane
   n5 + n6 = n4, and
3. a Euclidean projection onto the pinned face of the polytope when noise has
   pushed the point outside it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .qdevice import THETA_DOMAIN, ideal_occupations

# Planes as (name, normal, offset), satisfied when normal . n >= offset.
PLANES = (
    ("n4>=n5", np.array([1.0, -1.0, 0.0]), 0.0),
    ("n5>=n6", np.array([0.0, 1.0, -1.0]), 0.0),
    ("n6>=0", np.array([0.0, 0.0, 1.0]), 0.0),
    ("n4<=1/2", np.array([-1.0, 0.0, 0.0]), -0.5),
    ("n5+n6>=n4", np.array([-1.0, 1.0, 1.0]), 0.0),
)
HF_VERTEX = (0.0, 0.0, 0.0)
VERTICES = (HF_VERTEX, (0.5, 0.5, 0.0), (0.5, 0.25, 0.25), (0.5, 0.5, 0.5))
# face of the polytope lying in the pinned plane n5 + n6 = n4
PINNED_FACE = np.array(VERTICES[:3])


class CalibrationError(RuntimeError):
    pass


class Membership(NamedTuple):
    inside: bool
    violated: tuple

    def __bool__(self):
        return self.inside


def polytope_membership(n4, n5, n6, tol: float = 1e-10) -> Membership:
    n = np.array([n4, n5, n6], dtype=float)
    bad = tuple(name for name, a, b in PLANES if a @ n < b - tol)
    return Membership(not bad, bad)


def surface_to_pinned(p) -> np.ndarray:
    """Map measured qubit occupations (p1, p2, p3) onto the pinned plane."""
    p = np.asarray(p, dtype=float)
    p2, p3 = p[..., 1], p[..., 2]
    return np.stack([p3, p2 * p3, p3 * (1.0 - p2)], axis=-1)


def _closest_on_segment(x, a, b):
    d = b - a
    t = np.clip((x - a) @ d / (d @ d), 0.0, 1.0)
    return a + t * d


def _closest_in_triangle(x, a, b, c):
    e1, e2 = b - a, c - a
    G = np.array([[e1 @ e1, e1 @ e2], [e1 @ e2, e2 @ e2]])
    s, t = np.linalg.solve(G, [e1 @ (x - a), e2 @ (x - a)])
    if s >= 0 and t >= 0 and s + t <= 1:
        return a + s * e1 + t * e2
    cands = [_closest_on_segment(x, u, v) for u, v in ((a, b), (b, c), (c, a))]
    return min(cands, key=lambda y: float(np.sum((y - x) ** 2)))


def project_to_pinned_face(n) -> np.ndarray:
    """Nearest point of the pinned face triangle to ``n``."""
    return _closest_in_triangle(np.asarray(n, dtype=float), *PINNED_FACE)


def _triangulate(k: int):
    """Grid of (k+1)^2 parameter points over the domain rectangle, 2k^2 triangles."""
    (t1lo, t1hi), (t2lo, t2hi) = THETA_DOMAIN
    t1 = np.linspace(t1lo, t1hi, k + 1)
    t2 = np.linspace(t2lo, t2hi, k + 1)
    points = np.array([(a, b) for a in t1 for b in t2])
    idx = lambda i, j: i * (k + 1) + j
    simplices = []
    for i in range(k):
        for j in range(k):
            simplices.append((idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)))
            simplices.append((idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)))
    return points, np.array(simplices)


def _homogeneous(tri):
    """4x4 columns [x; 1] for three points plus one off-plane point along the normal."""
    a, b, c = tri
    nrm = np.cross(b - a, c - a)
    area2 = np.linalg.norm(nrm)
    if area2 < 1e-12:
        raise CalibrationError("measured calibration triangle is degenerate")
    extra = (a + b + c) / 3.0 + nrm / area2 * np.sqrt(area2)
    return np.vstack([np.column_stack([a, b, c, extra]), np.ones(4)])


@dataclass(frozen=True)
class MitigationMap:
    """Piecewise-affine correction p_measured -> p_ideal over a triangulated parameter domain."""

    params: np.ndarray  # (m, 2) calibration circuit parameters
    measured: np.ndarray  # (m, 3)
    ideal: np.ndarray  # (m, 3)
    simplices: np.ndarray  # (k, 3) indices into params
    transforms: np.ndarray = field(repr=False)  # (k, 4, 4) homogeneous affine maps

    @classmethod
    def fit(cls, params, measured, ideal, simplices) -> "MitigationMap":
        params, measured, ideal = (np.asarray(x, dtype=float) for x in (params, measured, ideal))
        simplices = np.asarray(simplices, dtype=int)
        T = []
        for s in simplices:
            Q = _homogeneous(measured[s])
            G = _homogeneous(ideal[s])
            T.append(G @ np.linalg.inv(Q))
        return cls(params, measured, ideal, simplices, np.array(T))

    @classmethod
    def identity(cls, grid_order: int = 2) -> "MitigationMap":
        points, simplices = _triangulate(grid_order)
        p = ideal_occupations(points[:, 0], points[:, 1])
        return cls.fit(points, p, p, simplices)

    def simplex_for_params(self, theta) -> int:
        theta = np.asarray(theta, dtype=float)
        best, best_d = 0, np.inf
        for k, s in enumerate(self.simplices):
            a, b, c = self.params[s]
            M = np.column_stack([b - a, c - a])
            lam = np.linalg.solve(M, theta - a)
            bary = np.array([1.0 - lam.sum(), lam[0], lam[1]])
            d = -min(bary.min(), 0.0)
            if d == 0.0:
                return k
            if d < best_d:
                best, best_d = k, d
        return best

    def simplex_for_occupations(self, p) -> int:
        p = np.asarray(p, dtype=float)
        dist = []
        for s in self.simplices:
            a, b, c = self.measured[s]
            dist.append(np.sum((_closest_in_triangle(p, a, b, c) - p) ** 2))
        return int(np.argmin(dist))

    def apply(self, p, theta=None) -> np.ndarray:
        """Corrected occupations; the piece is chosen from ``theta`` when it is known."""
        p = np.asarray(p, dtype=float)
        k = self.simplex_for_params(theta) if theta is not None else self.simplex_for_occupations(p)
        return (self.transforms[k] @ np.append(p, 1.0))[:3]

    def to_json(self) -> str:
        return json.dumps({
            "params": self.params.tolist(),
            "measured": self.measured.tolist(),
            "ideal": self.ideal.tolist(),
            "simplices": self.simplices.tolist(),
            "transforms": self.transforms.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "MitigationMap":
        d = json.loads(text)
        return cls(*(np.asarray(d[k], dtype=float) for k in ("params", "measured", "ideal")),
                   np.asarray(d["simplices"], dtype=int), np.asarray(d["transforms"], dtype=float))


def calibrate(device, shots: int | None = None, seed=None, grid_order: int = 2) -> MitigationMap:
    """Measure the calibration grid on ``device`` and fit the piecewise-affine map.

    ``shots=None`` uses exact (infinite-shot) expectations.
    """
    if grid_order < 1:
        raise ValueError("grid_order must be at least 1")
    points, simplices = _triangulate(grid_order)
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seeds = seq.spawn(len(points))
    measured = np.array([
        device.measure(tuple(t), shots=shots, seed=s).occupations for t, s in zip(points, seeds)
    ])
    ideal = ideal_occupations(points[:, 0], points[:, 1])
    return MitigationMap.fit(points, measured, ideal, simplices)


def mitigate(map_: MitigationMap | None, record, clamp: bool = True) -> np.ndarray:
    """Mitigated pinned occupations (n4, n5, n6) for a measurement record.

    ``map_=None`` skips the affine correction (mitigation off) but still maps
    onto the pinned face.
    """
    p = np.asarray(record.occupations, dtype=float)
    if map_ is not None:
        p = map_.apply(p, getattr(record, "params", None))
    n = surface_to_pinned(p)
    if clamp and not polytope_membership(*n, tol=0.0):
        n = project_to_pinned_face(n)
    return n

"""Reference quadrature rules on intervals, rectangles and triangles."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss_interval(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre points and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def gauss_square(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss rule on [0, 1]^2, x index running fastest."""
    x, w = gauss_interval(n)
    X, Y = np.meshgrid(x, x)
    W = np.outer(w, w)
    return np.column_stack([X.ravel(), Y.ravel()]), W.ravel()


# Six-point degree-4 rule on the unit triangle (Dunavant), barycentric form.
_A1, _B1, _W1 = 0.445948490915965, 0.108103018168070, 0.223381589678011
_A2, _B2, _W2 = 0.091576213509771, 0.816847572980459, 0.109951743655322
TRIANGLE_BARY = np.array([
    [_B1, _A1, _A1], [_A1, _B1, _A1], [_A1, _A1, _B1],
    [_B2, _A2, _A2], [_A2, _B2, _A2], [_A2, _A2, _B2],
])
TRIANGLE_WEIGHTS = np.array([_W1] * 3 + [_W2] * 3)


def triangle_rule(a, b, c) -> tuple[np.ndarray, np.ndarray]:
    """Map the degree-4 rule onto the triangle (a, b, c)."""
    verts = np.array([a, b, c], dtype=float)
    area = 0.5 * abs((verts[1, 0] - verts[0, 0]) * (verts[2, 1] - verts[0, 1])
                     - (verts[2, 0] - verts[0, 0]) * (verts[1, 1] - verts[0, 1]))
    return TRIANGLE_BARY @ verts, TRIANGLE_WEIGHTS * area


def polygon_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def convex_polygon_rule(poly: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Fan-triangulate a convex polygon and apply the triangle rule."""
    pts, wts = [], []
    for k in range(1, len(poly) - 1):
        p, w = triangle_rule(poly[0], poly[k], poly[k + 1])
        pts.append(p)
        wts.append(w)
    if not pts:
        return np.empty((0, 2)), np.empty(0)
    return np.vstack(pts), np.concatenate(wts)

"""Geometry of the flat torus with period pi, one circle per circuit angle.

Points are plain float arrays with components in ``[0, pi)``; tangent vectors
(gradients, dual variables) are unconstrained float arrays of the same
length. The manifold is locally flat, so vector transport is the identity and
Riemannian gradients coincide with Euclidean ones.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericError, StructureError

PERIOD = np.pi

DEGENERACY_EPS = 1e-12


def project(theta) -> np.ndarray:
    """Componentwise reduction mod pi into ``[0, pi)``."""
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise NumericError("cannot project non-finite coordinates onto the torus")
    return np.mod(theta, PERIOD)


def wrap(theta) -> np.ndarray:
    """Minimal-magnitude representative mod pi, componentwise in [-pi/2, pi/2)."""
    theta = np.asarray(theta, dtype=float)
    return np.mod(theta + PERIOD / 2.0, PERIOD) - PERIOD / 2.0


def _check_same_length(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise StructureError(f"coordinate length mismatch: {a.shape} vs {b.shape}")


def distance(a, b) -> float:
    """Geodesic distance: L2 norm of the wrapped componentwise difference."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _check_same_length(a, b)
    return float(np.linalg.norm(wrap(a - b)))


def retract(base, tangent) -> np.ndarray:
    """Move from ``base`` along ``tangent`` and project back onto the torus."""
    base = np.asarray(base, dtype=float)
    tangent = np.asarray(tangent, dtype=float)
    _check_same_length(base, tangent)
    return project(base + tangent)


def logmap(base, target) -> np.ndarray:
    """Tangent vector at ``base`` pointing to ``target``.

    Returns the minimal-magnitude representative of ``target - base`` so that
    ``norm(logmap) == distance`` and dual updates take the short way around.
    """
    base = np.asarray(base, dtype=float)
    target = np.asarray(target, dtype=float)
    _check_same_length(base, target)
    return wrap(target - base)


def transport(tangent) -> np.ndarray:
    """Vector transport between any two points; the identity on a flat torus."""
    return np.asarray(tangent, dtype=float)


def inner(a, b) -> float:
    """Euclidean inner product of the wrapped representatives."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _check_same_length(a, b)
    return float(np.dot(wrap(a), wrap(b)))


def circular_mean(points, weights=None, with_flags: bool = False):
    """Karcher mean on the period-pi torus via resultant sums of doubled angles.

    Componentwise ``project(0.5 * atan2(sum_m w_m sin(2 p_m), sum_m w_m cos(2 p_m)))``.
    Antipodal-degenerate components (both resultant sums below
    ``DEGENERACY_EPS``) are tie-broken to 0 and flagged.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] < 1:
        raise StructureError("circular_mean needs at least one point")
    if weights is None:
        w = np.ones(pts.shape[0])
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (pts.shape[0],):
            raise StructureError("weights must match the number of points")
    doubled = 2.0 * pts
    sin_sum = w @ np.sin(doubled)
    cos_sum = w @ np.cos(doubled)
    degenerate = (np.abs(sin_sum) < DEGENERACY_EPS) & (np.abs(cos_sum) < DEGENERACY_EPS)
    mean = project(0.5 * np.arctan2(sin_sum, cos_sum))
    mean = np.where(degenerate, 0.0, mean)
    if with_flags:
        return mean, degenerate
    return mean

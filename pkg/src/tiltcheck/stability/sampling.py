"""Deterministic low-discrepancy point sets on spheres and in balls."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

__all__ = ["halton", "sphere_points", "ball_points"]


@lru_cache(maxsize=64)
def _halton(d: int, count: int) -> np.ndarray:
    # the first Halton point is the origin; skip it
    return qmc.Halton(d=d, scramble=False).random(count + 1)[1:]


def halton(d: int, count: int) -> np.ndarray:
    """The first ``count`` nonzero points of the unscrambled Halton sequence."""
    return _halton(d, count).copy()


def sphere_points(d: int, count: int) -> np.ndarray:
    """``count`` well-spread unit vectors in dimension ``d``.

    Uses evenly spaced angles in the plane, the Fibonacci lattice on the
    2-sphere, and Gaussian-mapped Halton points otherwise.
    """
    if d <= 0 or count <= 0:
        return np.zeros((0, max(d, 0)))
    if d == 1:
        return np.array([[1.0], [-1.0]])[: max(count, 2)]
    if d == 2:
        t = 2 * math.pi * (np.arange(count) + 0.5) / count
        return np.column_stack([np.cos(t), np.sin(t)])
    if d == 3:
        k = np.arange(count) + 0.5
        z = 1 - 2 * k / count
        r = np.sqrt(np.maximum(0.0, 1 - z * z))
        phi = math.pi * (3 - math.sqrt(5)) * k
        return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    U = halton(d, count)
    G = ndtri(np.clip(U, 1e-12, 1 - 1e-12))
    return G / np.linalg.norm(G, axis=1, keepdims=True)


def ball_points(d: int, count: int) -> np.ndarray:
    """``count`` points in the closed unit ball of dimension ``d``."""
    U = halton(d + 1, count)
    G = ndtri(np.clip(U[:, :d], 1e-12, 1 - 1e-12))
    nrm = np.linalg.norm(G, axis=1, keepdims=True)
    nrm[nrm == 0] = 1.0
    return G / nrm * (U[:, d:] ** (1.0 / d))

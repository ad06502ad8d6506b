"""Isotropic Gaussian kernel density estimation over subgoal vectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SIGMA_FLOOR = 1e-4


@dataclass
class Sampler:
    points: np.ndarray  # (n, d)
    bandwidth: float

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if len(pts) == 0:
            raise ValueError("sampler needs at least one point")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")

    @property
    def dim(self):
        return self.points.shape[1]

    def density(self, x):
        """Mixture of unit-weight Gaussians N(x_i, h^2 I)."""
        x = np.asarray(x, dtype=float).reshape(-1)
        n, d = self.points.shape
        h = self.bandwidth
        sq = np.sum((self.points - x) ** 2, axis=1)
        norm = (2.0 * np.pi * h * h) ** (-d / 2.0)
        return float(norm * np.mean(np.exp(-0.5 * sq / (h * h))))

    def draw(self, rng):
        """One sample: uniform data point plus isotropic Gaussian noise."""
        i = int(rng.integers(len(self.points)))
        return self.points[i] + rng.normal(0.0, self.bandwidth, size=self.dim)


def fit_sampler(goals):
    """Scott-style bandwidth: h = n^(-1/(d+4)) * median per-dim std.

    The median keeps the kernel width at the scale of the precise
    dimensions; a multimodal dimension (the same subgoal seen under
    different bindings) would otherwise inflate an averaged width far
    beyond the sampling precision the skills were trained at.
    """
    pts = np.atleast_2d(np.asarray(goals, dtype=float))
    n, d = pts.shape
    sigma_bar = max(float(np.median(pts.std(axis=0))), SIGMA_FLOOR)
    h = n ** (-1.0 / (d + 4)) * sigma_bar
    return Sampler(pts, h)

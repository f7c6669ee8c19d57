"""Admissible value sets: axis-aligned boxes and finite sets.

Impulse controls take values in a compact box (which makes the box convex,
so piecewise-linear interpolation between admissible values stays
admissible). Ordinary controls may take values in a box or in a finite set.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class Box:
    """Axis-aligned compact box {x : lo <= x <= hi} in R^d. d = 0 is allowed."""

    lo: np.ndarray
    hi: np.ndarray

    def __init__(self, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ConfigurationError("box bounds must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ConfigurationError("box bounds must be finite (compactness)")
        if np.any(lo > hi):
            raise ConfigurationError("box lower bound exceeds upper bound")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return self.lo.size

    @property
    def diameters(self):
        return self.hi - self.lo

    @property
    def center(self):
        return 0.5 * (self.lo + self.hi)

    def contains(self, x, tol=1e-9):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def clip(self, x):
        return np.clip(np.asarray(x, dtype=float), self.lo, self.hi)

    def sample(self, rng, n=1):
        """n uniform samples, shape (n, d)."""
        return self.lo + rng.random((n, self.dim)) * (self.hi - self.lo)

    def scale01(self, pts01):
        """Map points from [0,1]^d (shape (n, d)) into the box."""
        pts01 = np.asarray(pts01, dtype=float)
        return self.lo + pts01 * (self.hi - self.lo)

    def probe_lattice(self):
        """The 3^d lattice of corners, face/edge midpoints and the center.

        Deterministic structured probes; they hit symmetry sets (such as a
        coordinate axis through the middle of the box) that random or
        low-discrepancy samples miss almost surely. Capped for high d.
        """
        if self.dim == 0:
            return np.zeros((1, 0))
        if 3 ** self.dim > 4000:
            return np.vstack([self.lo, self.center, self.hi])
        axes = [np.array([lo, 0.5 * (lo + hi), hi]) for lo, hi in zip(self.lo, self.hi)]
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=-1)


@dataclass(frozen=True)
class FiniteSet:
    """A finite set of admissible values in R^d (rows of ``points``)."""

    points: np.ndarray = field(default=None)

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ConfigurationError("finite set needs at least one point")
        object.__setattr__(self, "points", pts)

    @property
    def dim(self):
        return self.points.shape[1]

    def contains(self, x, tol=1e-9):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            return False
        return bool(np.any(np.all(np.abs(self.points - x) <= tol, axis=1)))

    def sample(self, rng, n=1):
        idx = rng.integers(0, self.points.shape[0], size=n)
        return self.points[idx]


def empty_value_set():
    """The value set for systems without an ordinary control (l = 0)."""
    return FiniteSet(np.zeros((1, 0)))

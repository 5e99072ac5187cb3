"""Rectangular cell grids in one and two dimensions."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MIN_CELLS = 11


def _check_axis(lo, hi, n):
    if not (math.isfinite(lo) and math.isfinite(hi) and hi > lo):
        raise ValueError(f"grid needs finite lo < hi, got [{lo!r}, {hi!r}]")
    if int(n) != n or n < MIN_CELLS:
        raise ValueError(f"grid needs at least {MIN_CELLS} cells per axis, got {n!r}")


@dataclass(frozen=True)
class Grid1D:
    lo: float
    hi: float
    n: int = 161

    def __post_init__(self):
        _check_axis(self.lo, self.hi, self.n)

    dim = 1

    @property
    def width(self) -> float:
        return (self.hi - self.lo) / self.n

    @property
    def cell_volume(self) -> float:
        return self.width

    @property
    def n_total(self) -> int:
        return int(self.n)

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n + 1)

    @property
    def centers(self) -> np.ndarray:
        e = self.edges
        return (0.5 * (e[:-1] + e[1:]))[:, None]

    def cell_bounds(self, i):
        e = self.edges
        return np.array([e[i]]), np.array([e[i + 1]])

    def covers(self, radius: float) -> bool:
        return self.lo <= -radius and self.hi >= radius


@dataclass(frozen=True)
class Grid2D:
    """Tensor grid; cells are flattened with the first axis varying slowest."""

    lo: tuple
    hi: tuple
    n: tuple = (61, 61)

    def __post_init__(self):
        n = self.n if np.ndim(self.n) else (self.n, self.n)
        lo = tuple(float(v) for v in np.broadcast_to(self.lo, (2,)))
        hi = tuple(float(v) for v in np.broadcast_to(self.hi, (2,)))
        n = tuple(int(v) for v in n)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "n", n)
        for a, b, k in zip(lo, hi, n):
            _check_axis(a, b, k)

    dim = 2

    @property
    def widths(self) -> np.ndarray:
        return (np.array(self.hi) - np.array(self.lo)) / np.array(self.n)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.widths))

    @property
    def n_total(self) -> int:
        return self.n[0] * self.n[1]

    def axis_edges(self, k):
        return np.linspace(self.lo[k], self.hi[k], self.n[k] + 1)

    @property
    def centers(self) -> np.ndarray:
        c = [0.5 * (e[:-1] + e[1:]) for e in (self.axis_edges(0), self.axis_edges(1))]
        X, Y = np.meshgrid(c[0], c[1], indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])

    def cell_bounds(self, idx):
        i, j = divmod(int(idx), self.n[1])
        e0, e1 = self.axis_edges(0), self.axis_edges(1)
        return np.array([e0[i], e1[j]]), np.array([e0[i + 1], e1[j + 1]])

    def covers(self, radius: float) -> bool:
        return all(a <= -radius and b >= radius for a, b in zip(self.lo, self.hi))


def symmetric_grid(dim: int, half_width: float, n=None):
    """Grid on ``[-half_width, half_width]^dim`` with the default cell counts."""
    if dim == 1:
        return Grid1D(-half_width, half_width, 161 if n is None else n)
    if dim == 2:
        return Grid2D((-half_width,) * 2, (half_width,) * 2, (61, 61) if n is None else n)
    raise ValueError("oracle restricted to p <= 2")

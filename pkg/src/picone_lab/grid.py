"""Uniform 1-D meshes, grid functions and trapezoid quadrature."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .expr import Expression


def fmt(value):
    """Format a real with 17 significant digits (round-trip exact)."""
    return format(float(value), ".17g")


@dataclass(frozen=True)
class Grid:
    """Uniform mesh on ``[x_lo, x_hi]`` with ``n`` nodes."""

    x_lo: float
    x_hi: float
    n: int

    @property
    def h(self) -> float:
        return (self.x_hi - self.x_lo) / (self.n - 1)

    @property
    def x(self) -> np.ndarray:
        # x_lo + i*h, with the right endpoint pinned exactly
        pts = self.x_lo + np.arange(self.n) * self.h
        pts[-1] = self.x_hi
        return pts

    @property
    def weights(self) -> np.ndarray:
        """Composite trapezoid weights ``(h/2, h, ..., h, h/2)``."""
        w = np.full(self.n, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w


def make_grid(x_lo, x_hi, n) -> Grid:
    """Build a uniform grid.

    Parameters
    ----------
    x_lo, x_hi : float
        Interval endpoints, ``x_lo < x_hi``.
    n : int
        Number of nodes, at least 3.

    Raises
    ------
    ConfigurationError
        If the bounds are not ordered or finite, or ``n < 3``.
    """
    try:
        x_lo, x_hi = float(x_lo), float(x_hi)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"grid bounds must be real numbers: {exc}") from None
    if isinstance(n, bool) or int(n) != n:
        raise ConfigurationError(f"node count must be an integer, got {n!r}")
    n = int(n)
    if not (np.isfinite(x_lo) and np.isfinite(x_hi)) or not x_lo < x_hi:
        raise ConfigurationError(f"grid needs x_lo < x_hi, got ({x_lo!r}, {x_hi!r})")
    if n < 3:
        raise ConfigurationError(f"grid needs at least 3 nodes, got n={n}")
    return Grid(x_lo, x_hi, n)


class Field:
    """Values at the nodes of a grid.

    The value array is read-only so that fields can be shared freely.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        vals = np.array(values, dtype=float)
        if vals.ndim == 0:
            vals = np.full(grid.n, float(vals))
        if vals.shape != (grid.n,):
            raise ConfigurationError(f"field has {vals.size} values but the grid has {grid.n} nodes")
        vals.setflags(write=False)
        self.grid = grid
        self.values = vals

    def __len__(self):
        return self.grid.n

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __repr__(self):
        return f"Field(n={self.grid.n}, min={self.values.min():.6g}, max={self.values.max():.6g})"

    def with_values(self, values) -> "Field":
        return Field(self.grid, values)

    def to_csv(self) -> str:
        """Two-column CSV text ``x,value``."""
        lines = ["x,value"]
        lines += [f"{fmt(x)},{fmt(v)}" for x, v in zip(self.grid.x, self.values)]
        return "\n".join(lines) + "\n"


def sample(grid: Grid, f) -> Field:
    """Evaluate a coefficient expression at every node.

    ``f`` may be expression text, a compiled :class:`Expression` or a number.
    Evaluation failures raise :class:`DomainError` naming the first bad node.
    """
    if not isinstance(f, Expression):
        f = Expression(f if isinstance(f, str) else repr(float(f)))
    return Field(grid, f(grid.x))


def integrate(f: Field) -> float:
    """Composite trapezoid integral of a field over its grid."""
    return float(np.dot(f.grid.weights, f.values))

"""Discrete function-space arithmetic on a uniform interval grid.

States live on the interior nodes of a uniform grid over [0, L] with
homogeneous Dirichlet values at both walls.  Integrals use the rectangle
rule h * sum over interior nodes; because the wall values vanish this
coincides with the trapezoid rule.  Four norms are provided: the L2 norm
with its scalar product, the sup norm, the L1 norm (dual-space surrogate
for sup-norm-bounded maps), and the graph norm ||z|| + ||A z|| of a
linear operator.

All operations are pure functions on immutable inputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [0, L]: interior nodes x_j = j*h, j = 1..n, h = L/(n+1).

    Boundary nodes x_0 = 0 and x_{n+1} = L carry the value 0 implicitly.
    """

    length_L: float
    n_interior: int
    spacing_h: float = field(init=False)

    def __post_init__(self):
        if not self.length_L > 0:
            raise ValueError("length_L must be positive, got %r" % (self.length_L,))
        if self.n_interior < 3:
            raise ValueError("n_interior must be >= 3, got %r" % (self.n_interior,))
        object.__setattr__(self, "spacing_h", self.length_L / (self.n_interior + 1))

    def interior_nodes(self) -> np.ndarray:
        return self.spacing_h * np.arange(1, self.n_interior + 1)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Real-valued grid function given by its interior node values."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.n_interior,):
            raise GridMismatchError(
                "state has %r values, grid has %d interior nodes"
                % (vals.shape, self.grid.n_interior)
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("state values must all be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


def _require_same_grid(a, b):
    if a.grid != b.grid:
        raise GridMismatchError("operands live on different grids")


def inner_l2(a: StateVector, b: StateVector) -> float:
    """Discrete L2 scalar product h * sum_j a_j b_j."""
    _require_same_grid(a, b)
    return float(a.grid.spacing_h * np.dot(a.values, b.values))


def norm_l2(z: StateVector) -> float:
    return math.sqrt(max(inner_l2(z, z), 0.0))


def norm_l1(z: StateVector) -> float:
    return float(z.grid.spacing_h * np.sum(np.abs(z.values)))


def norm_linf(z: StateVector) -> float:
    return float(np.max(np.abs(z.values)))


def norm_graph(z: StateVector, op) -> float:
    """Graph norm ||z|| + ||A z|| for an operator with ``grid`` and ``matrix``."""
    if op.grid != z.grid:
        raise GridMismatchError("operator and state live on different grids")
    image = op.matrix @ z.values
    return norm_l2(z) + math.sqrt(z.grid.spacing_h * float(np.dot(image, image)))


def boundary_envelope(grid: Grid) -> np.ndarray:
    """Smooth window vanishing to fourth order at both walls, peak value 1.

    Multiplying a profile by this window flattens its jets at x = 0 and
    x = L, which keeps difference stencils with ghost-node closures
    pointwise consistent up to the walls.
    """
    u = grid.interior_nodes() / grid.length_L
    return 256.0 * u**4 * (1.0 - u) ** 4


def random_smooth_values(grid: Grid, rng, n_modes: int = 12,
                         mode_decay: float = 3.0, envelope: bool = False) -> np.ndarray:
    """Random truncated sine series with mode amplitudes decaying like j**-decay.

    The coefficient draws do not depend on the grid resolution, so the same
    ``rng`` state yields samples of one underlying function across grids.
    """
    coeffs = rng.standard_normal(n_modes)
    x = grid.interior_nodes()
    v = np.zeros(grid.n_interior)
    for j in range(1, n_modes + 1):
        v += coeffs[j - 1] * j ** (-mode_decay) * np.sin(j * np.pi * x / grid.length_L)
    if envelope:
        v = v * boundary_envelope(grid)
    return v

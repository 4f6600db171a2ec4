"""Uniform one-dimensional grids and the fields that live on them.

Conventions shared by the stationary and dynamic solvers:

* normalisation uses the plain node sum, ``h * sum(values)``;
* integrals of smooth integrands use trapezoidal quadrature;
* first derivatives use second-order central differences in the interior
  and second-order one-sided stencils at the two edge nodes
  (:func:`gradient` below, identical to ``numpy.gradient``).

Field values are immutable snapshots: arrays are copied on construction and
marked read-only, so fields can be shared freely between workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DENSITY_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class Grid1D:
    """Uniform grid with nodes ``origin + i * spacing``, i = 0..n_points-1."""

    n_points: int
    spacing: float
    origin: float = 0.0
    boundary: str = "dirichlet_zero"

    def __post_init__(self):
        if self.n_points < 3:
            raise ValueError("grid needs at least 3 nodes")
        if not self.spacing > 0:
            raise ValueError("grid spacing must be positive")
        if self.boundary != "dirichlet_zero":
            raise ValueError(f"unsupported boundary kind {self.boundary!r}")

    @classmethod
    def from_interval(cls, x_min: float, x_max: float, n_points: int) -> "Grid1D":
        if not x_max > x_min:
            raise ValueError("interval must have positive length")
        return cls(n_points=n_points, spacing=(x_max - x_min) / (n_points - 1),
                   origin=x_min)

    def nodes(self) -> np.ndarray:
        return self.origin + self.spacing * np.arange(self.n_points)

    def shifted(self, shift: float) -> "Grid1D":
        return Grid1D(self.n_points, self.spacing, self.origin + shift,
                      self.boundary)

    def compatible_with(self, other: "Grid1D") -> bool:
        return (self.n_points == other.n_points
                and abs(self.spacing - other.spacing) <= 1e-12 * self.spacing
                and abs(self.origin - other.origin) <= 1e-9)


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real field on a grid; ``kind`` selects the validation contract.

    density    values >= 0 and h * sum(values) = 1 within 1e-10
    action     defined modulo a global additive constant; NaN marks nodes
               where the phase it came from was undefined
    potential  no constraint beyond finiteness
    """

    grid: Grid1D
    values: np.ndarray
    kind: str = "potential"

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values, float))
        if self.values.shape != (self.grid.n_points,):
            raise ValueError("field length does not match grid")
        if self.kind not in ("density", "action", "potential"):
            raise ValueError(f"unknown field kind {self.kind!r}")
        if self.kind != "action" and not np.all(np.isfinite(self.values)):
            raise ValueError(f"{self.kind} field must be finite")
        if self.kind == "density":
            if np.any(self.values < 0):
                raise ValueError("density must be nonnegative")
            total = self.grid.spacing * float(self.values.sum())
            if abs(total - 1.0) > 1e-10:
                raise ValueError(f"density must be normalised, got {total!r}")


@dataclass(frozen=True, eq=False)
class WaveField:
    """Complex field; when ``normalized`` is set, h * sum|values|^2 = 1."""

    grid: Grid1D
    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values, complex))
        if self.values.shape != (self.grid.n_points,):
            raise ValueError("field length does not match grid")
        if self.normalized and abs(self.norm() - 1.0) > 1e-10:
            raise ValueError("wave field marked normalised but is not")

    def norm(self) -> float:
        return self.grid.spacing * float((np.abs(self.values) ** 2).sum())

    def density_values(self) -> np.ndarray:
        return np.abs(self.values) ** 2


def normalized_wave(grid: Grid1D, values) -> WaveField:
    """Scale ``values`` to unit norm and wrap them in a WaveField."""
    v = np.asarray(values, dtype=complex)
    nrm = np.sqrt(grid.spacing * float((np.abs(v) ** 2).sum()))
    if nrm == 0:
        raise ValueError("cannot normalise the zero field")
    return WaveField(grid, v / nrm, normalized=True)


def gradient(values: np.ndarray, spacing: float) -> np.ndarray:
    """Second-order first derivative (central interior, one-sided edges)."""
    return np.gradient(values, spacing)


def gradient_adjoint(weights: np.ndarray, spacing: float) -> np.ndarray:
    """Adjoint of :func:`gradient` as a linear map on node vectors."""
    h = spacing
    r = np.zeros_like(weights)
    r[2:] += weights[1:-1] / (2 * h)
    r[:-2] -= weights[1:-1] / (2 * h)
    r[0] += -1.5 * weights[0] / h
    r[1] += 2.0 * weights[0] / h
    r[2] += -0.5 * weights[0] / h
    r[-1] += 1.5 * weights[-1] / h
    r[-2] += -2.0 * weights[-1] / h
    r[-3] += 0.5 * weights[-1] / h
    return r


def trapezoid(values: np.ndarray, spacing: float) -> float:
    return float(np.trapezoid(values, dx=spacing))


def trapezoid_weights(n: int, spacing: float) -> np.ndarray:
    w = np.full(n, spacing)
    w[0] = w[-1] = spacing / 2
    return w

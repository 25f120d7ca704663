"""Axis-aligned box grids and the discrete fields living on them.

Cell-centered layout: cell (i1, .., id) has its center at
((i1 + 1/2) h1, .., (id + 1/2) hd).  Boundary faces are enumerated in a
fixed canonical order (axis-major, low side before high side, remaining
indices in C order) so that boundary data arrays are well defined.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError


@dataclass(frozen=True)
class Grid:
    """Structured axis-aligned box discretization in 2 or 3 dimensions."""

    dim: int
    extents: tuple[float, ...]
    cells: tuple[int, ...]

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if len(self.extents) != self.dim or len(self.cells) != self.dim:
            raise ValueError("extents and cells must have one entry per axis")
        if any(e <= 0 for e in self.extents):
            raise ValueError("extents must be positive")
        if any(n < 4 for n in self.cells):
            raise ValueError("need at least 4 cells per axis")

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(e / n for e, n in zip(self.extents, self.cells))

    @property
    def volume(self) -> float:
        v = 1.0
        for e in self.extents:
            v *= e
        return v

    @property
    def cell_volume(self) -> float:
        v = 1.0
        for s in self.h:
            v *= s
        return v

    @property
    def n_cells(self) -> int:
        n = 1
        for c in self.cells:
            n *= c
        return n

    def cell_centers(self) -> np.ndarray:
        """Coordinates of all cell centers, shape (n_cells, dim), C order."""
        axes = [
            (np.arange(n) + 0.5) * s for n, s in zip(self.cells, self.h)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)

    def axis_coords(self, axis: int) -> np.ndarray:
        return (np.arange(self.cells[axis]) + 0.5) * self.h[axis]

    # -- boundary enumeration ------------------------------------------------

    def boundary_faces(self) -> list[BoundaryPatch]:
        """The 2*dim boundary patches in canonical order."""
        patches = []
        for axis in range(self.dim):
            for side in (0, 1):
                patches.append(BoundaryPatch(self, axis, side))
        return patches

    @property
    def n_boundary_faces(self) -> int:
        total = 0
        for axis in range(self.dim):
            total += 2 * self.n_cells // self.cells[axis]
        return total

    @property
    def boundary_area(self) -> float:
        total = 0.0
        for axis in range(self.dim):
            total += 2.0 * self.volume / self.extents[axis]
        return total

    def boundary_face_centers(self) -> np.ndarray:
        """Centers of all boundary faces in canonical order, (n_faces, dim)."""
        pts = [p.face_centers() for p in self.boundary_faces()]
        return np.concatenate(pts, axis=0)

    def boundary_face_areas(self) -> np.ndarray:
        areas = []
        for p in self.boundary_faces():
            areas.append(np.full(p.n_faces, p.face_area))
        return np.concatenate(areas)

    def boundary_face_normals(self) -> np.ndarray:
        normals = []
        for p in self.boundary_faces():
            n = np.zeros((p.n_faces, self.dim))
            n[:, p.axis] = -1.0 if p.side == 0 else 1.0
            normals.append(n)
        return np.concatenate(normals, axis=0)


@dataclass(frozen=True)
class BoundaryPatch:
    """One face of the box: all boundary faces with a common outward normal."""

    grid: Grid
    axis: int
    side: int  # 0 = low coordinate end, 1 = high end

    @property
    def n_faces(self) -> int:
        return self.grid.n_cells // self.grid.cells[self.axis]

    @property
    def face_area(self) -> float:
        a = 1.0
        for ax, s in enumerate(self.grid.h):
            if ax != self.axis:
                a *= s
        return a

    @property
    def tangential_cells(self) -> tuple[int, ...]:
        return tuple(
            n for ax, n in enumerate(self.grid.cells) if ax != self.axis
        )

    def face_centers(self) -> np.ndarray:
        g = self.grid
        coords = []
        for ax in range(g.dim):
            if ax == self.axis:
                coords.append(np.array([0.0 if self.side == 0 else g.extents[ax]]))
            else:
                coords.append(g.axis_coords(ax))
        mesh = np.meshgrid(*coords, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)


def build_grid(dim: int, extents, cells) -> Grid:
    """Construct a Grid, validating sizes.

    Cell centers sit at midpoints; see the module docstring for layout.
    """
    return Grid(dim=int(dim), extents=tuple(float(e) for e in extents),
                cells=tuple(int(c) for c in cells))


# -- fields -----------------------------------------------------------------


def _check_values(grid, values, lead):
    arr = np.asarray(values, dtype=float)
    expect = lead + grid.cells
    if arr.shape != expect:
        raise ValueError(f"field shape {arr.shape} != expected {expect}")
    return np.ascontiguousarray(arr)


@dataclass
class Field:
    """Scalar cell values on a grid."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = _check_values(self.grid, self.values, ())

    def copy(self) -> Field:
        return Field(self.grid, self.values.copy())

    @classmethod
    def constant(cls, grid: Grid, value: float) -> Field:
        return cls(grid, np.full(grid.cells, float(value)))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> Field:
        return cls(grid, fn(grid.cell_centers()).reshape(grid.cells))


@dataclass
class VectorField:
    """dim-component vector cell values; values shape (dim, *cells)."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = _check_values(self.grid, self.values, (self.grid.dim,))

    def copy(self) -> VectorField:
        return VectorField(self.grid, self.values.copy())

    @classmethod
    def zero(cls, grid: Grid) -> VectorField:
        return cls(grid, np.zeros((grid.dim,) + grid.cells))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> VectorField:
        vals = np.asarray(fn(grid.cell_centers()))
        return cls(grid, vals.T.reshape((grid.dim,) + grid.cells))

    def component(self, k: int) -> Field:
        return Field(self.grid, self.values[k].copy())


@dataclass
class TensorField:
    """dim x dim tensor cell values; values shape (dim, dim, *cells)."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        d = self.grid.dim
        self.values = _check_values(self.grid, self.values, (d, d))

    def copy(self) -> TensorField:
        return TensorField(self.grid, self.values.copy())


def same_grid(*fields) -> Grid:
    grids = {id(f.grid): f.grid for f in fields}
    first = fields[0].grid
    for f in fields[1:]:
        if f.grid is not first and f.grid != first:
            raise GridMismatchError("fields live on different grids")
    return first

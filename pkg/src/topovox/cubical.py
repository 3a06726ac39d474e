"""Cubical sublevel filtrations of 3D grids.

A volume of shape (n0, n1, n2) becomes a filtered complex on the doubled grid
with extents (2*n0+1, 2*n1+1, 2*n2+1). Each grid position is one cell; its
dimension is the number of odd coordinates (voxels sit at all-odd positions
as top cubes). A cell's filtration value is the MIN over the top cubes it is
a face of, so every voxel enters the filtration together with its full
closure of 27 cells.

Cells are indexed two ways: by doubled coordinate triple (the public
:class:`CubicalCell` view) and by C-order linear index into the value grid
(the array view the persistence code consumes). Linear index order IS
lexicographic coordinate order.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import InternalInvariantError
from .volume_io import Volume3D


@dataclass(frozen=True)
class CubicalCell:
    """One cell of the doubled grid: coordinates, dimension, filtration value."""

    coords: tuple[int, int, int]
    dim: int
    value: float

    @property
    def sort_key(self) -> tuple[float, int, tuple[int, int, int]]:
        """Filtration order: value, then dimension, then lexicographic coords."""
        return (self.value, self.dim, self.coords)


def _min_expand_axis(arr: np.ndarray, axis: int) -> np.ndarray:
    """Double one axis of length n to 2n+1, filling even slots with the min
    of the two adjacent original slots (one at the borders)."""
    n = arr.shape[axis]
    shape = list(arr.shape)
    shape[axis] = 2 * n + 1
    out = np.empty(shape, dtype=np.float64)

    def ax(s):
        return tuple(s if i == axis else slice(None) for i in range(arr.ndim))

    out[ax(slice(1, 2 * n, 2))] = arr
    out[ax(slice(0, 1))] = arr[ax(slice(0, 1))]
    out[ax(slice(2 * n, 2 * n + 1))] = arr[ax(slice(n - 1, n))]
    if n > 1:
        np.minimum(arr[ax(slice(0, n - 1))], arr[ax(slice(1, n))], out=out[ax(slice(2, 2 * n - 1, 2))])
    return out


class FilteredCubicalComplex:
    """Filtered cubical complex over a voxel grid.

    ``values`` is the float64 grid of per-cell filtration values with shape
    ``extents``; it is read-only after construction.
    """

    def __init__(self, dims: tuple[int, int, int], values: np.ndarray):
        self.dims = tuple(int(d) for d in dims)
        self.extents = tuple(2 * d + 1 for d in self.dims)
        if values.shape != self.extents:
            raise InternalInvariantError(
                f"value grid shape {values.shape} does not match extents {self.extents}"
            )
        values = np.ascontiguousarray(values, dtype=np.float64)
        values.setflags(write=False)
        self.values = values
        e0, e1, e2 = self.extents
        self.strides = (e1 * e2, e2, 1)

    @property
    def n_cells(self) -> int:
        return self.values.size

    def census(self) -> dict[int, int]:
        """Cell count per dimension (closed-form, no grid scan)."""
        counts = {}
        for k in range(4):
            total = 0
            for odd_axes in combinations(range(3), k):
                prod = 1
                for i in range(3):
                    prod *= self.dims[i] if i in odd_axes else self.dims[i] + 1
                total += prod
            counts[k] = total
        return counts

    def cell_dim(self, coords: tuple[int, int, int]) -> int:
        return (coords[0] & 1) + (coords[1] & 1) + (coords[2] & 1)

    def cell_at(self, coords: tuple[int, int, int]) -> CubicalCell:
        coords = tuple(int(c) for c in coords)
        for c, e in zip(coords, self.extents):
            if not 0 <= c < e:
                raise IndexError(f"coords {coords} outside grid extents {self.extents}")
        return CubicalCell(coords=coords, dim=self.cell_dim(coords), value=float(self.values[coords]))

    def boundary(self, cell: CubicalCell | tuple[int, int, int]) -> list[CubicalCell]:
        """Facets of a cell: per odd axis, the two cells one step either way.

        Returned in lexicographic coordinate order. Every facet value is <=
        the cell value (min rule), so the boundary never enters later.
        """
        coords = cell.coords if isinstance(cell, CubicalCell) else tuple(int(c) for c in cell)
        facets = []
        for axis in range(3):
            if coords[axis] & 1:
                for delta in (-1, 1):
                    f = list(coords)
                    f[axis] += delta
                    facets.append(self.cell_at(tuple(f)))
        facets.sort(key=lambda c: c.coords)
        return facets

    def per_dim_filtration_order(self) -> list[np.ndarray]:
        """For each dimension, linear cell indices sorted by (value, lex coords).

        A stable value sort over ascending linear indices gives the lex
        tiebreak for free; splitting by dimension first makes the global
        (value, dim, lex) order recoverable by merging.
        """
        flat = self.values.ravel()
        dims_grid = self._dim_grid().ravel()
        orders = []
        for k in range(4):
            idx = np.flatnonzero(dims_grid == k)
            orders.append(idx[np.argsort(flat[idx], kind="stable")])
        return orders

    def _dim_grid(self) -> np.ndarray:
        e0, e1, e2 = self.extents
        p0 = (np.arange(e0, dtype=np.uint8) & 1)[:, None, None]
        p1 = (np.arange(e1, dtype=np.uint8) & 1)[None, :, None]
        p2 = (np.arange(e2, dtype=np.uint8) & 1)[None, None, :]
        return p0 + p1 + p2

    def linear_to_coords(self, idx: int) -> tuple[int, int, int]:
        s0, s1, _ = self.strides
        return (idx // s0, (idx % s0) // s1, idx % s1)

    def cells_in_filtration_order(self) -> Iterator[CubicalCell]:
        """Yield every cell ordered by (value, dim, lex coords).

        Materializes a full sort; intended for small grids and debugging.
        """
        flat = self.values.ravel()
        dims_grid = self._dim_grid().ravel()
        # lexsort: last key is primary; stability on equal (value, dim) keeps
        # ascending linear index, which is exactly lex coordinate order.
        order = np.lexsort((dims_grid, flat))
        for idx in order:
            coords = self.linear_to_coords(int(idx))
            yield CubicalCell(coords=coords, dim=int(dims_grid[idx]), value=float(flat[idx]))

    def validate(self):
        """Check facet monotonicity on the whole grid; raise on violation."""
        v = self.values
        for axis in range(3):
            def ax(s):
                return tuple(s if i == axis else slice(None) for i in range(3))

            odd = v[ax(slice(1, None, 2))]
            left = v[ax(slice(0, -1, 2))]
            right = v[ax(slice(2, None, 2))]
            if np.any(left > odd) or np.any(right > odd):
                raise InternalInvariantError(
                    f"facet along axis {axis} enters the filtration after its coface"
                )

    def dump_cells_csv(self, path: Path | str):
        """Write x,y,z,dim,value for every cell in filtration order."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y", "z", "dim", "value"])
            for cell in self.cells_in_filtration_order():
                writer.writerow([*cell.coords, cell.dim, repr(cell.value)])


def build_filtration(volume: Volume3D) -> FilteredCubicalComplex:
    """Build the min-rule sublevel filtration of a volume.

    Separable per-axis expansion: the min over a cell's incident top cubes
    factors across axes, so three 1D passes produce the full doubled grid.
    """
    grid = volume.data
    for axis in range(3):
        grid = _min_expand_axis(grid, axis)
    return FilteredCubicalComplex(dims=volume.dims, values=grid)

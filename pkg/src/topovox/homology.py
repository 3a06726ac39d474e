"""Persistence diagrams of filtered cubical complexes.

Two independent routes compute the same topology:

* :func:`compute_persistence`: union-find with the elder rule for dimension
  0; union-find on the dual complement graph for dimension 2 (equivalent to
  reducing the cube boundary matrix, but it never materializes surface
  columns, which dominate the cost at volume scale); GF(2) boundary-matrix
  reduction for dimension 1, with the dimension-2 pairing clearing every
  positive 2-cell column first.
* :func:`betti_rank_oracle`: brute-force Betti numbers per threshold from
  GF(2) boundary ranks, no pairing logic at all. Capped at small complexes;
  exists to cross-check the diagram route.

Diagrams keep finite pairs of positive persistence plus essential classes
(death = +inf). Zero-persistence pairs are dropped at construction but
counted, so audits can reconcile totals.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from ._reduction import (
    dual_union_find_dim2,
    gf2_rank,
    pack_columns,
    reduce_columns,
    union_find_dim0,
)
from .cubical import FilteredCubicalComplex
from .errors import FormatError, InternalInvariantError, OracleTooLargeError

ORACLE_MAX_CELLS = 10_000


@dataclass(frozen=True)
class PersistencePair:
    dim: int
    birth: float
    death: float  # math.inf for essential classes

    @property
    def persistence(self) -> float:
        return self.death - self.birth


@dataclass(frozen=True)
class PersistenceDiagram:
    """Pairs per dimension as parallel (births, deaths) arrays.

    Arrays are sorted by (birth, death); essential classes carry death
    +inf and sort last within their birth. ``dropped`` counts the
    zero-persistence pairs removed per dimension.
    """

    births: tuple[np.ndarray, np.ndarray, np.ndarray]
    deaths: tuple[np.ndarray, np.ndarray, np.ndarray]
    dropped: tuple[int, int, int] = (0, 0, 0)

    def __post_init__(self):
        for k in range(3):
            b, d = self.births[k], self.deaths[k]
            if b.shape != d.shape:
                raise InternalInvariantError(f"dim {k}: births/deaths length mismatch")
            if np.any(d[np.isfinite(d)] <= b[np.isfinite(d)]):
                raise InternalInvariantError(f"dim {k}: non-positive persistence pair")

    def n_pairs(self, dim: int) -> int:
        return int(self.births[dim].shape[0])

    def pairs_for_dim(self, dim: int) -> tuple[np.ndarray, np.ndarray]:
        return self.births[dim], self.deaths[dim]

    def n_essential(self, dim: int) -> int:
        return int(np.isinf(self.deaths[dim]).sum())

    def iter_pairs(self) -> Iterator[PersistencePair]:
        for k in range(3):
            for b, d in zip(self.births[k], self.deaths[k]):
                yield PersistencePair(dim=k, birth=float(b), death=float(d))

    def betti_at(self, t: float, dim: int) -> int:
        """Classes alive at t, counting birth <= t < death."""
        b, d = self.births[dim], self.deaths[dim]
        return int(np.sum((b <= t) & (t < d)))


def _canonical(births: np.ndarray, deaths: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.lexsort((deaths, births))
    return np.ascontiguousarray(births[order]), np.ascontiguousarray(deaths[order])


def _facet_ranks_dim3(cx: FilteredCubicalComplex, order3: np.ndarray, rank_all: np.ndarray) -> np.ndarray:
    s0, s1, s2 = cx.strides
    offsets = np.array([-s0, s0, -s1, s1, -s2, s2], dtype=np.int64)
    fac = order3[:, None] + offsets[None, :]
    ranks = rank_all[fac]
    ranks.sort(axis=1)
    return ranks


def _facet_ranks_dim2(cx: FilteredCubicalComplex, order2: np.ndarray, rank_all: np.ndarray) -> np.ndarray:
    s0, s1, _ = cx.strides
    a = order2 // s0
    rem = order2 - a * s0
    b = rem // s1
    c = rem - b * s1
    fac = np.empty((order2.shape[0], 4), dtype=np.int64)
    fill = np.zeros(order2.shape[0], dtype=np.int64)
    for parity, stride in ((a & 1, s0), (b & 1, s1), (c & 1, 1)):
        rows = np.nonzero(parity == 1)[0]
        fac[rows, fill[rows]] = order2[rows] - stride
        fac[rows, fill[rows] + 1] = order2[rows] + stride
        fill[rows] += 2
    ranks = rank_all[fac]
    ranks.sort(axis=1)
    return ranks


def _facet_ranks_dim1(cx: FilteredCubicalComplex, order1: np.ndarray, rank_all: np.ndarray) -> np.ndarray:
    s0, s1, _ = cx.strides
    a = order1 // s0
    rem = order1 - a * s0
    b = rem // s1
    stride = np.where((a & 1) == 1, s0, np.where((b & 1) == 1, s1, 1)).astype(np.int64)
    fac = np.stack([order1 - stride, order1 + stride], axis=1)
    ranks = rank_all[fac]
    ranks.sort(axis=1)
    return ranks


def compute_persistence(cx: FilteredCubicalComplex) -> PersistenceDiagram:
    """Persistence diagram of a filtered complex across dimensions 0-2.

    Results are cached on the complex, so repeated calls are free.
    """
    cached = getattr(cx, "_diagram_cache", None)
    if cached is not None:
        return cached

    flat = cx.values.ravel()
    orders = cx.per_dim_filtration_order()
    rank_all = np.empty(cx.n_cells, dtype=np.int64)
    for k in range(4):
        rank_all[orders[k]] = np.arange(orders[k].shape[0], dtype=np.int64)

    val1 = flat[orders[1]]
    val2 = flat[orders[2]]
    val3 = flat[orders[3]]
    n1 = orders[1].shape[0]
    n2 = orders[2].shape[0]

    # dimension 0: union-find over vertices, edges in filtration order
    b0, d0, dropped0, edge_negative = union_find_dim0(
        flat, orders[1], cx.extents[0], cx.extents[1], cx.extents[2]
    )
    n_verts = orders[0].shape[0]
    if b0.shape[0] + dropped0 != n_verts - 1:
        raise InternalInvariantError(
            f"dim 0 produced {b0.shape[0]} pairs + {dropped0} dropped; expected {n_verts - 1} merges"
        )
    essential0 = float(flat[orders[0][0]])
    births0 = np.append(b0, essential0)
    deaths0 = np.append(d0, math.inf)

    # dimension 2: dual union-find pairs every cube with a positive 2-cell
    n3 = orders[3].shape[0]
    n0v, n1v, n2v = cx.dims
    s0, s1, _ = cx.strides
    a3 = (orders[3] // s0) >> 1
    b3 = ((orders[3] % s0) // s1) >> 1
    c3 = (orders[3] % s1) >> 1
    cube_rank_of_node = np.empty(n3, dtype=np.int64)
    cube_rank_of_node[(a3 * n1v + b3) * n2v + c3] = np.arange(n3, dtype=np.int64)
    b2, d2, dropped2, cleared, n_merge = dual_union_find_dim2(
        flat, orders[2], cube_rank_of_node, val3, n0v, n1v, n2v, *cx.extents
    )
    if n_merge != n3:
        raise InternalInvariantError(
            f"dual union-find paired {n_merge} cubes of {n3}; the complement must end connected"
        )

    # dimension 1: reduce 2-cell columns, skipping the ones paired above
    skip2 = np.zeros(n2, dtype=np.bool_)
    skip2[cleared] = True
    ranks2 = _facet_ranks_dim2(cx, orders[2], rank_all)
    ptr2 = np.arange(n2 + 1, dtype=np.int64) * 4
    piv2, _zero2 = reduce_columns(ranks2.ravel(), ptr2, skip2, n1)
    paired_cols = np.nonzero(piv2 >= 0)[0]
    pivot_rows = piv2[paired_cols]
    if np.any(edge_negative[pivot_rows]):
        raise InternalInvariantError("an edge paired with both a vertex and a 2-cell")
    births1_all = val1[pivot_rows]
    deaths1_all = val2[paired_cols]
    keep1 = births1_all != deaths1_all
    dropped1 = int((~keep1).sum())

    # essential classes above dimension 0 cannot occur (the complete complex
    # is a solid box) but are collected rather than silently discarded
    claimed = np.zeros(n1, dtype=np.bool_)
    claimed[pivot_rows] = True
    ess1 = val1[~edge_negative & ~claimed]
    ess2 = val2[(piv2 < 0) & ~skip2]

    births1 = np.append(births1_all[keep1], ess1)
    deaths1 = np.append(deaths1_all[keep1], np.full(ess1.shape[0], math.inf))
    births2 = np.append(b2, ess2)
    deaths2 = np.append(d2, np.full(ess2.shape[0], math.inf))

    canon0 = _canonical(births0, deaths0)
    canon1 = _canonical(births1, deaths1)
    canon2 = _canonical(births2, deaths2)
    diagram = PersistenceDiagram(
        births=(canon0[0], canon1[0], canon2[0]),
        deaths=(canon0[1], canon1[1], canon2[1]),
        dropped=(dropped0, dropped1, dropped2),
    )
    cx._diagram_cache = diagram
    return diagram


def euler_curve(cx: FilteredCubicalComplex, thresholds: np.ndarray) -> np.ndarray:
    """Euler characteristic of each sublevel complex, straight from cell counts."""
    flat = cx.values.ravel()
    orders = cx.per_dim_filtration_order()
    out = np.zeros(len(thresholds), dtype=np.int64)
    for k in range(4):
        vals = flat[orders[k]]
        counts = np.searchsorted(vals, thresholds, side="right")
        out += counts if k % 2 == 0 else -counts
    return out


def betti_curve_from_diagram(diagram: PersistenceDiagram, thresholds: np.ndarray) -> np.ndarray:
    """(len(thresholds), 3) alive-class counts, birth <= t < death."""
    out = np.empty((len(thresholds), 3), dtype=np.int64)
    for k in range(3):
        b, d = diagram.pairs_for_dim(k)
        bs = np.sort(b)
        ds = np.sort(d[np.isfinite(d)])
        out[:, k] = np.searchsorted(bs, thresholds, side="right") - np.searchsorted(
            ds, thresholds, side="right"
        )
    return out


def betti_rank_oracle(cx: FilteredCubicalComplex, thresholds: np.ndarray) -> np.ndarray:
    """Betti numbers per threshold via GF(2) boundary ranks.

    beta_k(t) = #k-cells(t) - rank d_k(t) - rank d_{k+1}(t). Every rank is
    recomputed from a fresh packed matrix, so nothing is shared with the
    pairing route. Only for complexes with at most ORACLE_MAX_CELLS cells.
    """
    if cx.n_cells > ORACLE_MAX_CELLS:
        raise OracleTooLargeError(
            f"complex has {cx.n_cells} cells; the oracle is capped at {ORACLE_MAX_CELLS}"
        )
    flat = cx.values.ravel()
    orders = cx.per_dim_filtration_order()
    rank_all = np.empty(cx.n_cells, dtype=np.int64)
    for k in range(4):
        rank_all[orders[k]] = np.arange(orders[k].shape[0], dtype=np.int64)

    vals = [flat[o] for o in orders]
    counts_per_dim = [o.shape[0] for o in orders]
    facets = [
        None,
        _facet_ranks_dim1(cx, orders[1], rank_all),
        _facet_ranks_dim2(cx, orders[2], rank_all),
        _facet_ranks_dim3(cx, orders[3], rank_all),
    ]
    words = [None]
    for k in (1, 2, 3):
        n_words = (counts_per_dim[k - 1] + 63) // 64
        words.append(pack_columns(facets[k], n_words))

    out = np.empty((len(thresholds), 3), dtype=np.int64)
    prev_m = None
    for i, t in enumerate(thresholds):
        m = tuple(int(np.searchsorted(vals[k], t, side="right")) for k in range(4))
        if m == prev_m:
            out[i] = out[i - 1]
            continue
        r = [0, 0, 0, 0]
        for k in (1, 2, 3):
            r[k] = gf2_rank(words[k][: m[k]].copy()) if m[k] else 0
        out[i, 0] = m[0] - r[1]
        out[i, 1] = m[1] - r[1] - r[2]
        out[i, 2] = m[2] - r[2] - r[3]
        prev_m = m
    return out


def write_diagram_csv(diagram: PersistenceDiagram, path: Path | str):
    """dim,birth,death rows; essential deaths serialize as 'inf'."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dim", "birth", "death"])
        for k in range(3):
            b, d = diagram.pairs_for_dim(k)
            for bi, di in zip(b, d):
                writer.writerow([k, repr(float(bi)), "inf" if math.isinf(di) else repr(float(di))])


def read_diagram_csv(path: Path | str) -> PersistenceDiagram:
    births: list[list[float]] = [[], [], []]
    deaths: list[list[float]] = [[], [], []]
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["dim", "birth", "death"]:
            raise FormatError(f"{path}: diagram header must be 'dim,birth,death', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise FormatError(f"{path}:{lineno}: expected 3 columns")
            k = int(row[0])
            if k not in (0, 1, 2):
                raise FormatError(f"{path}:{lineno}: dimension {k} out of range")
            births[k].append(float(row[1]))
            deaths[k].append(math.inf if row[2] == "inf" else float(row[2]))
    b = tuple(np.asarray(x, dtype=np.float64) for x in births)
    d = tuple(np.asarray(x, dtype=np.float64) for x in deaths)
    canon = [_canonical(b[k], d[k]) for k in range(3)]
    return PersistenceDiagram(
        births=tuple(c[0] for c in canon),
        deaths=tuple(c[1] for c in canon),
    )

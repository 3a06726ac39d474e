"""Shared fixtures: a minimal NIfTI-1 writer, small reference volumes, and a
bottleneck-distance helper used by the stability tests."""
from __future__ import annotations

import math
import struct

import numpy as np
import pytest

from topovox.volume_io import Volume3D


def build_nifti_bytes(
    data: np.ndarray,
    datatype_code: int = 16,
    byte_order: str = "<",
    magic: bytes = b"n+1\x00",
    vox_offset: float = 352.0,
    scl_slope: float = 0.0,
    scl_inter: float = 0.0,
    ndim: int = 3,
    truncate_payload: int = 0,
) -> bytes:
    """Assemble a single-frame NIfTI-1 byte sequence field by field."""
    dtypes = {2: "u1", 4: "i2", 8: "i4", 16: "f4", 64: "f8"}
    np_dtype = np.dtype(byte_order + dtypes.get(datatype_code, "f4"))

    header = bytearray(348)
    struct.pack_into(f"{byte_order}i", header, 0, 348)
    dim = [ndim, *data.shape] + [1] * (7 - data.ndim)
    struct.pack_into(f"{byte_order}8h", header, 40, *dim)
    struct.pack_into(f"{byte_order}h", header, 70, datatype_code)
    struct.pack_into(f"{byte_order}h", header, 72, np_dtype.itemsize * 8)
    struct.pack_into(f"{byte_order}f", header, 108, vox_offset)
    struct.pack_into(f"{byte_order}f", header, 112, scl_slope)
    struct.pack_into(f"{byte_order}f", header, 116, scl_inter)
    header[344:348] = magic

    offset = int(vox_offset) if vox_offset >= 348 else 348
    blob = bytearray(header) + bytearray(offset - 348)
    payload = np.ascontiguousarray(data.astype(np_dtype)).tobytes()
    if truncate_payload:
        payload = payload[:-truncate_payload]
    return bytes(blob + payload)


@pytest.fixture
def nifti_builder():
    return build_nifti_bytes


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def make_volume(arr, slice_axis: int = 0) -> Volume3D:
    return Volume3D(data=np.asarray(arr, dtype=np.float64), slice_axis=slice_axis)


@pytest.fixture
def solid_block() -> Volume3D:
    """2x2x2 constant block at intensity 7."""
    return make_volume(np.full((2, 2, 2), 7.0))


@pytest.fixture
def ring_volume() -> Volume3D:
    """3x3x1 ring: 8 voxels at 10 around a center at 200."""
    arr = np.full((3, 3, 1), 10.0)
    arr[1, 1, 0] = 200.0
    return make_volume(arr)


@pytest.fixture
def shell_volume() -> Volume3D:
    """3x3x3 shell: 26 voxels at 10 around a center at 200."""
    arr = np.full((3, 3, 3), 10.0)
    arr[1, 1, 1] = 200.0
    return make_volume(arr)


def bottleneck_distance(pairs_a, pairs_b) -> float:
    """Bottleneck distance between (birth, death) multisets, diagonal allowed.

    Infinite-death points must match among themselves by birth. Solved by
    scanning candidate radii and testing for a perfect bipartite matching.
    """
    import networkx as nx

    inf_a = sorted(b for b, d in pairs_a if math.isinf(d))
    inf_b = sorted(b for b, d in pairs_b if math.isinf(d))
    if len(inf_a) != len(inf_b):
        return math.inf
    best_inf = max((abs(x - y) for x, y in zip(inf_a, inf_b)), default=0.0)

    fin_a = [(b, d) for b, d in pairs_a if math.isfinite(d)]
    fin_b = [(b, d) for b, d in pairs_b if math.isfinite(d)]
    n, m = len(fin_a), len(fin_b)

    def cost(p, q):
        return max(abs(p[0] - q[0]), abs(p[1] - q[1]))

    def diag(p):
        return (p[1] - p[0]) / 2.0

    candidates = {0.0, best_inf}
    for p in fin_a:
        candidates.add(diag(p))
        for q in fin_b:
            candidates.add(cost(p, q))
    for q in fin_b:
        candidates.add(diag(q))

    def feasible(delta):
        if best_inf > delta:
            return False
        left = [("a", i) for i in range(n)] + [("da", j) for j in range(m)]
        graph = nx.Graph()
        graph.add_nodes_from(left)
        graph.add_nodes_from([("b", j) for j in range(m)] + [("db", i) for i in range(n)])
        for i, p in enumerate(fin_a):
            for j, q in enumerate(fin_b):
                if cost(p, q) <= delta:
                    graph.add_edge(("a", i), ("b", j))
            if diag(p) <= delta:
                graph.add_edge(("a", i), ("db", i))
        for j, q in enumerate(fin_b):
            if diag(q) <= delta:
                graph.add_edge(("da", j), ("b", j))
        for i in range(n):
            for j in range(m):
                graph.add_edge(("da", j), ("db", i))
        matching = nx.bipartite.maximum_matching(graph, top_nodes=left)
        return len(matching) // 2 == n + m

    for delta in sorted(candidates):
        if feasible(delta):
            return delta
    return math.inf

"""Synthetic uint8 phantoms with controlled topology.

Class A (LGG) is a smooth dark blob on a bright background: its sublevel
sets are concentric balls, so the loop and cavity curves stay at zero.
Class B (HGG) embeds a dark ring whose hole is plugged bright, and a dark
closed shell around a bright interior, so loops and cavities are born early
and persist across a wide threshold band. Geometry scales with volume size;
intensities are fixed bands with small per-volume jitter.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import OutOfRangeError
from .volume_io import DatasetManifest, ManifestEntry, write_manifest

PHANTOM_KINDS = ("blob", "shell", "ring", "two-class-mix")

_BG_HIGH = 230.0
_BG_LOW = 20.0
_SHELL_VALUE = 50
_SHELL_INTERIOR = 190
_RING_VALUE = 60
_RING_PLUG = 180
_NOISE_SPAN = 4


def _check_shape(shape, minimum: int):
    shape = tuple(int(s) for s in shape)
    if len(shape) != 3:
        raise OutOfRangeError(f"shape must have 3 axes, got {shape}")
    if min(shape) < minimum:
        raise OutOfRangeError(f"every axis must be >= {minimum} for this phantom, got {shape}")
    return shape


def _distance_grid(shape, center):
    di = (np.arange(shape[0]) - center[0])[:, None, None]
    dj = (np.arange(shape[1]) - center[1])[None, :, None]
    dk = (np.arange(shape[2]) - center[2])[None, None, :]
    return np.sqrt(di * di + dj * dj + dk * dk)


def _base_blob(shape, rng) -> np.ndarray:
    m = min(shape)
    center = tuple((s - 1) / 2.0 for s in shape)
    radius = 0.55 * m * float(rng.uniform(0.9, 1.1))
    r = _distance_grid(shape, center)
    vals = _BG_LOW + (_BG_HIGH - _BG_LOW) * np.clip(r / radius, 0.0, 1.0)
    return np.rint(vals)


def _paint_shell(data, rng, center):
    """Dark closed shell with a bright interior: a (50, 190)-style cavity."""
    m = min(data.shape)
    radius = max(2.2, 0.14 * m)
    jitter = int(rng.integers(-3, 4))
    r = _distance_grid(data.shape, center)
    # interior first, band second, so the band always wins at the boundary
    data[r < radius - 1.2] = _SHELL_INTERIOR + jitter
    data[np.abs(r - radius) <= 1.2] = _SHELL_VALUE + jitter


def _paint_ring(data, rng, center):
    """Dark torus around a bright plug: a persistent loop."""
    shape = data.shape
    m = min(shape)
    major = max(2.2, 0.14 * m)
    minor = max(1.2, 0.06 * m)
    jitter = int(rng.integers(-3, 4))
    di = (np.arange(shape[0]) - center[0])[:, None, None]
    dj = (np.arange(shape[1]) - center[1])[None, :, None]
    dk = (np.arange(shape[2]) - center[2])[None, None, :]
    r_plane = np.sqrt(di * di + dj * dj)
    d_torus = np.sqrt((r_plane - major) ** 2 + dk * dk)
    plug = (r_plane <= major - minor + 0.5) & (np.abs(dk) <= minor)
    data[plug] = _RING_PLUG + jitter
    data[d_torus <= minor] = _RING_VALUE + jitter


def _finalize(data, rng, noise: bool) -> np.ndarray:
    if noise:
        data = data + rng.integers(-_NOISE_SPAN, _NOISE_SPAN + 1, size=data.shape)
    return np.clip(data, 0, 255).astype(np.uint8)


def make_blob(shape, rng) -> np.ndarray:
    """Class A: smooth dark blob, topologically trivial sublevels."""
    shape = _check_shape(shape, 8)
    return _finalize(_base_blob(shape, rng), rng, noise=False)


def make_shell_phantom(shape, rng) -> np.ndarray:
    """Blob plus a centered cavity; exercises the dimension-2 curve."""
    shape = _check_shape(shape, 8)
    data = _base_blob(shape, rng)
    center = tuple((s - 1) / 2.0 for s in shape)
    _paint_shell(data, rng, center)
    return _finalize(data, rng, noise=False)


def make_ring_phantom(shape, rng) -> np.ndarray:
    """Blob plus a centered ring; exercises the dimension-1 curve."""
    shape = _check_shape(shape, 8)
    data = _base_blob(shape, rng)
    center = tuple((s - 1) / 2.0 for s in shape)
    _paint_ring(data, rng, center)
    return _finalize(data, rng, noise=False)


def make_composite_phantom(shape, rng) -> np.ndarray:
    """Class B: blob with an off-center ring and cavity plus integer noise."""
    shape = _check_shape(shape, 16)
    data = _base_blob(shape, rng)
    m = min(shape)
    center = tuple((s - 1) / 2.0 for s in shape)
    off = 0.22 * m
    shell_center = (center[0] + off, center[1], center[2])
    ring_center = (center[0] - off, center[1], center[2])
    _paint_shell(data, rng, shell_center)
    _paint_ring(data, rng, ring_center)
    return _finalize(data, rng, noise=True)


def phantom_volume(kind: str, shape, rng, hgg: bool = False) -> tuple[np.ndarray, str]:
    """One phantom of the given kind; `hgg` picks the class within a mix."""
    if kind == "blob":
        return make_blob(shape, rng), "LGG"
    if kind == "shell":
        return make_shell_phantom(shape, rng), "HGG"
    if kind == "ring":
        return make_ring_phantom(shape, rng), "HGG"
    if kind == "two-class-mix":
        if hgg:
            return make_composite_phantom(shape, rng), "HGG"
        return make_blob(shape, rng), "LGG"
    raise OutOfRangeError(f"kind must be one of {PHANTOM_KINDS}, got {kind!r}")


def generate_dataset(kind: str, count: int, shape, out_dir: Path | str, seed: int = 0):
    """Write `count` raw phantoms plus a manifest; returns (manifest, path).

    A two-class-mix alternates LGG, HGG, ... so even counts are balanced.
    Volumes are seeded independently, one child seed per volume.
    """
    if kind not in PHANTOM_KINDS:
        raise OutOfRangeError(f"kind must be one of {PHANTOM_KINDS}, got {kind!r}")
    if count < 1:
        raise OutOfRangeError(f"count must be >= 1, got {count}")
    shape = _check_shape(shape, 16 if kind == "two-class-mix" else 8)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(count)):
        rng = np.random.default_rng(child)
        data, label = phantom_volume(kind, shape, rng, hgg=i % 2 == 1)
        path = out_dir / f"{kind}_{i:04d}.raw"
        path.write_bytes(data.tobytes(order="C"))
        entries.append(ManifestEntry(path=path, label=label, format_hint=None))
    manifest = DatasetManifest(entries=tuple(entries))
    manifest_path = out_dir / "manifest.csv"
    write_manifest(manifest, manifest_path, relative_to=out_dir)
    return manifest, manifest_path

"""Volume ingestion: NIfTI-1 and raw binary parsing, intensity normalization,
and slab extraction.

All parsing returns an immutable :class:`Volume3D` holding a dense float64
grid. Files may be gzip-compressed; compression is detected by magic bytes,
never by filename.
"""
from __future__ import annotations

import csv
import gzip
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    FormatError,
    InvalidDataError,
    OutOfRangeError,
    TruncationError,
    UnsupportedDatatypeError,
)

# NIfTI-1 datatype codes -> little-endian numpy dtypes. Byte order is swapped
# at read time when the header says so.
_NIFTI_DTYPES = {
    2: np.dtype("<u1"),   # uint8
    4: np.dtype("<i2"),   # int16
    8: np.dtype("<i4"),   # int32
    16: np.dtype("<f4"),  # float32
    64: np.dtype("<f8"),  # float64
}

SCALAR_KINDS = {
    "uint8": np.dtype("<u1"),
    "int16": np.dtype("<i2"),
    "int32": np.dtype("<i4"),
    "float32": np.dtype("<f4"),
    "float64": np.dtype("<f8"),
}

_GZIP_MAGIC = b"\x1f\x8b"
_NIFTI1_HEADER_SIZE = 348
_NIFTI_MAGICS = (b"n+1\x00", b"ni1\x00")

VALID_LABELS = ("LGG", "HGG")


def default_slice_axis(dims: tuple[int, int, int]) -> int:
    """Axis whose extent differs from the other two equal ones, else 0."""
    d0, d1, d2 = dims
    if d1 == d2 and d0 != d1:
        return 0
    if d0 == d2 and d1 != d0:
        return 1
    if d0 == d1 and d2 != d0:
        return 2
    return 0


@dataclass(frozen=True)
class Volume3D:
    """Dense 3D scalar grid with an anatomical-slice axis.

    ``data`` is a C-contiguous float64 array of shape ``dims``; ``slice_axis``
    names the axis along which slabs are windowed.
    """

    data: np.ndarray
    slice_axis: int = 0

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float64)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ValueError(f"expected a non-empty 3D grid, got shape {arr.shape}")
        if self.slice_axis not in (0, 1, 2):
            raise ValueError(f"slice_axis must be 0, 1, or 2, got {self.slice_axis}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def voxel_count(self) -> int:
        return self.data.size


def _maybe_decompress(raw: bytes) -> bytes:
    if raw[:2] == _GZIP_MAGIC:
        try:
            return gzip.decompress(raw)
        except (OSError, EOFError) as exc:
            raise FormatError(f"gzip payload is corrupt: {exc}") from exc
    return raw


def parse_nifti(raw: bytes, slice_axis: int | None = None) -> Volume3D:
    """Parse a single-frame NIfTI-1 byte sequence (optionally gzipped).

    Honors header byte order (via the dim[0] sanity check), datatype,
    dim[1..3], vox_offset, and scl_slope/scl_inter rescaling. Accepts 3D
    volumes and 4D volumes with a singleton 4th dimension.
    """
    raw = _maybe_decompress(raw)
    if len(raw) < _NIFTI1_HEADER_SIZE:
        raise TruncationError(
            f"file is {len(raw)} bytes, shorter than the {_NIFTI1_HEADER_SIZE}-byte header"
        )

    magic = raw[344:348]
    if magic not in _NIFTI_MAGICS:
        sizeof_hdr_le = struct.unpack_from("<i", raw, 0)[0]
        if sizeof_hdr_le == 540 or struct.unpack_from(">i", raw, 0)[0] == 540:
            raise FormatError("NIfTI-2 files are not supported; supply NIfTI-1")
        raise FormatError(f"bad magic {magic!r}; not a NIfTI-1 file")

    # Byte order: dim[0] must land in 1..7 when read with the right endianness.
    order = "<"
    ndim = struct.unpack_from("<h", raw, 40)[0]
    if not 1 <= ndim <= 7:
        order = ">"
        ndim = struct.unpack_from(">h", raw, 40)[0]
        if not 1 <= ndim <= 7:
            raise FormatError(f"dim[0]={ndim} fails the byte-order sanity check")

    dim = struct.unpack_from(f"{order}8h", raw, 40)
    datatype = struct.unpack_from(f"{order}h", raw, 70)[0]
    vox_offset = struct.unpack_from(f"{order}f", raw, 108)[0]
    scl_slope = struct.unpack_from(f"{order}f", raw, 112)[0]
    scl_inter = struct.unpack_from(f"{order}f", raw, 116)[0]

    if dim[0] == 4:
        if dim[4] != 1:
            raise FormatError(
                f"multi-frame volume (dim[4]={dim[4]}); only single-frame files are supported"
            )
    elif dim[0] != 3:
        raise FormatError(f"expected a 3D volume, header declares dim[0]={dim[0]}")

    dims = (int(dim[1]), int(dim[2]), int(dim[3]))
    if min(dims) < 1:
        raise FormatError(f"non-positive dimensions {dims}")

    if datatype not in _NIFTI_DTYPES:
        raise UnsupportedDatatypeError(f"NIfTI datatype code {datatype} is not supported")
    dtype = _NIFTI_DTYPES[datatype]
    if order == ">":
        dtype = dtype.newbyteorder(">")

    offset = int(vox_offset) if vox_offset >= _NIFTI1_HEADER_SIZE else _NIFTI1_HEADER_SIZE
    nvox = dims[0] * dims[1] * dims[2]
    need = nvox * dtype.itemsize
    payload = raw[offset : offset + need]
    if len(payload) < need:
        raise TruncationError(
            f"payload holds {len(payload) // dtype.itemsize} voxels, dims {dims} need {nvox}"
        )

    data = np.frombuffer(payload, dtype=dtype).astype(np.float64).reshape(dims)
    if scl_slope != 0.0 and np.isfinite(scl_slope):
        data = data * float(scl_slope) + float(scl_inter)

    axis = default_slice_axis(dims) if slice_axis is None else slice_axis
    return Volume3D(data=data, slice_axis=axis)


def parse_raw(
    raw: bytes,
    dims: tuple[int, int, int],
    scalar_kind: str,
    slice_axis: int | None = None,
) -> Volume3D:
    """Parse headerless little-endian voxel data in row-major order."""
    raw = _maybe_decompress(raw)
    if scalar_kind not in SCALAR_KINDS:
        raise UnsupportedDatatypeError(
            f"unknown scalar kind {scalar_kind!r}; expected one of {sorted(SCALAR_KINDS)}"
        )
    dtype = SCALAR_KINDS[scalar_kind]
    nvox = int(dims[0]) * int(dims[1]) * int(dims[2])
    need = nvox * dtype.itemsize
    if len(raw) != need:
        raise TruncationError(
            f"raw payload is {len(raw)} bytes; dims {tuple(dims)} of {scalar_kind} need {need}"
        )
    data = np.frombuffer(raw, dtype=dtype).astype(np.float64).reshape(dims)
    axis = default_slice_axis(tuple(dims)) if slice_axis is None else slice_axis
    return Volume3D(data=data, slice_axis=axis)


def to_raw_bytes(volume: Volume3D, scalar_kind: str = "float64") -> bytes:
    """Serialize to the raw format; float64 round-trips bit-identically."""
    if scalar_kind not in SCALAR_KINDS:
        raise UnsupportedDatatypeError(f"unknown scalar kind {scalar_kind!r}")
    return np.ascontiguousarray(volume.data.astype(SCALAR_KINDS[scalar_kind])).tobytes()


def normalize(volume: Volume3D) -> Volume3D:
    """Affinely rescale intensities onto [0, 255].

    A constant volume maps to all zeros. The scale factor is exactly 1.0 for
    an already-normalized volume, so normalization is idempotent there.
    """
    data = volume.data
    if not np.all(np.isfinite(data)):
        raise InvalidDataError("volume contains NaN or infinite intensities")
    lo = float(data.min())
    hi = float(data.max())
    if hi == lo:
        out = np.zeros_like(data)
    else:
        out = (data - lo) * (255.0 / (hi - lo))
        # Rounding in the scale factor can overshoot the top of the range by
        # one ulp; the output contract is a hard [0, 255].
        np.clip(out, 0.0, 255.0, out=out)
    return replace(volume, data=out)


def extract_slab(volume: Volume3D, lo: int | None = None, hi: int | None = None) -> Volume3D:
    """Keep slices lo..hi inclusive along the slice axis.

    With no window given, uses 30..90 when the axis has at least 91 slices
    and the full extent otherwise.
    """
    extent = volume.dims[volume.slice_axis]
    if lo is None and hi is None:
        lo, hi = (30, 90) if extent >= 91 else (0, extent - 1)
    if lo is None or hi is None:
        raise OutOfRangeError("slab window needs both endpoints or neither")
    if lo < 0 or hi >= extent or lo > hi:
        raise OutOfRangeError(
            f"window [{lo}, {hi}] is not a valid slice range on an axis of extent {extent}"
        )
    index = [slice(None)] * 3
    index[volume.slice_axis] = slice(lo, hi + 1)
    return replace(volume, data=volume.data[tuple(index)].copy())


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    label: str
    format_hint: str  # "nifti" | "raw"


@dataclass(frozen=True)
class DatasetManifest:
    """Labeled volume collection; the CSV contract is `path,label`."""

    entries: list[ManifestEntry] = field(default_factory=list)

    def labels(self) -> list[str]:
        return [e.label for e in self.entries]

    def class_counts(self) -> dict[str, int]:
        counts = {label: 0 for label in VALID_LABELS}
        for e in self.entries:
            counts[e.label] = counts.get(e.label, 0) + 1
        return counts


def _format_hint_for(path: Path) -> str:
    name = path.name.lower()
    if name.endswith(".nii") or name.endswith(".nii.gz"):
        return "nifti"
    return "raw"


def read_manifest(path: Path | str) -> DatasetManifest:
    """Read a `path,label` CSV; relative paths resolve against the CSV's directory."""
    path = Path(path)
    base = path.parent
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty manifest") from None
        if header != ["path", "label"]:
            raise FormatError(f"{path}: manifest header must be exactly 'path,label', got {header}")
        entries = []
        seen: set[str] = set()
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise FormatError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            raw_path, label = row
            if label not in VALID_LABELS:
                raise FormatError(
                    f"{path}:{lineno}: label {label!r} is not one of {VALID_LABELS} (case-sensitive)"
                )
            if raw_path in seen:
                raise FormatError(f"{path}:{lineno}: duplicate path {raw_path!r}")
            seen.add(raw_path)
            p = Path(raw_path)
            if not p.is_absolute():
                p = base / p
            entries.append(ManifestEntry(path=p, label=label, format_hint=_format_hint_for(p)))
    return DatasetManifest(entries=entries)


def write_manifest(manifest: DatasetManifest, path: Path | str, relative_to: Path | None = None):
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "label"])
        for e in manifest.entries:
            p = e.path
            if relative_to is not None:
                try:
                    p = p.relative_to(relative_to)
                except ValueError:
                    pass
            writer.writerow([str(p), e.label])


def load_volume_file(
    path: Path | str,
    format_hint: str | None = None,
    raw_dims: tuple[int, int, int] | None = None,
    raw_kind: str = "uint8",
    slice_axis: int | None = None,
) -> Volume3D:
    """Read one volume file, dispatching on its manifest format hint."""
    path = Path(path)
    raw = path.read_bytes()
    hint = format_hint or _format_hint_for(path)
    if hint == "nifti":
        return parse_nifti(raw, slice_axis=slice_axis)
    if hint == "raw":
        if raw_dims is None:
            raise FormatError(
                f"{path}: raw volumes need explicit dimensions (supply them in the config)"
            )
        return parse_raw(raw, raw_dims, raw_kind, slice_axis=slice_axis)
    raise FormatError(f"{path}: unknown format hint {hint!r}")

"""In-memory containers and on-disk formats for volumes, projections and 2D masks.

Volumes travel as a JSON sidecar plus a flat little-endian raw file; projected
images and mask footprints travel as binary (P5) PGM. PGM carries no metadata,
so loaders take the view and label id as parameters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np


class ValidationError(ValueError):
    """Input data or configuration violates a documented contract."""


class FormatError(ValidationError):
    """A file does not conform to its declared on-disk format."""


class View(str, Enum):
    """Projection direction: PA collapses the anterior axis, LL the lateral one."""

    PA = "PA"
    LL = "LL"


def _freeze(obj, name: str, arr: np.ndarray) -> None:
    # Containers are immutable by contract; a read-only buffer enforces it.
    arr.setflags(write=False)
    object.__setattr__(obj, name, arr)


def _check_spacing(spacing, n: int) -> tuple[float, ...]:
    sp = tuple(float(s) for s in spacing)
    if len(sp) != n:
        raise ValidationError(f"expected {n} spacing entries, got {len(sp)}")
    if not all(np.isfinite(s) and s > 0 for s in sp):
        raise ValidationError(f"spacing entries must be finite and positive: {sp}")
    return sp


@dataclass(frozen=True, eq=False)
class Volume:
    """Attenuation volume in Hounsfield units.

    Axes are (i, j, k): i runs right to left, j anterior to posterior,
    k superior to inferior.  ``spacing`` is (s_x, s_y, s_z) in millimetres
    along those axes.
    """

    data: np.ndarray                       # (H, W, D) numeric
    spacing: tuple[float, float, float]    # mm per voxel along (i, j, k)

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.data)
        if arr.ndim != 3:
            raise ValidationError(f"volume must be 3D, got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ValidationError("volume axes must all be nonempty")
        if not np.issubdtype(arr.dtype, np.number):
            raise ValidationError(f"volume dtype must be numeric, got {arr.dtype}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("volume contains non-finite values")
        _freeze(self, "data", arr)
        object.__setattr__(self, "spacing", _check_spacing(self.spacing, 3))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape


@dataclass(frozen=True, eq=False)
class LabelVolume:
    """Binary occupancy volume for one anatomical structure."""

    data: np.ndarray    # (H, W, D) uint8 of {0, 1}
    label_id: int

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.data, dtype=np.uint8)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ValidationError(f"label volume must be nonempty 3D, got shape {arr.shape}")
        if arr.max(initial=0) > 1:
            raise ValidationError("label volume voxels must be 0 or 1")
        _freeze(self, "data", arr)
        lid = int(self.label_id)
        if lid < 0:
            raise ValidationError(f"label id must be nonnegative, got {lid}")
        object.__setattr__(self, "label_id", lid)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape


@dataclass(frozen=True, eq=False)
class Projection:
    """A 2D projected radiograph.

    ``data`` is float64 while values are raw line integrals and uint8 once
    normalized; ``spacing`` is (row_mm, col_mm) for the current pixel grid.
    """

    data: np.ndarray
    view: View
    spacing: tuple[float, float]
    normalized: bool = False

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.data)
        if arr.ndim != 2 or min(arr.shape) < 1:
            raise ValidationError(f"projection must be nonempty 2D, got shape {arr.shape}")
        if self.normalized:
            if arr.dtype != np.uint8:
                raise ValidationError("normalized projection must be uint8")
        else:
            arr = arr.astype(np.float64, copy=False)
            if not np.all(np.isfinite(arr)):
                raise ValidationError("projection contains non-finite values")
        _freeze(self, "data", arr)
        object.__setattr__(self, "view", View(self.view))
        object.__setattr__(self, "spacing", _check_spacing(self.spacing, 2))


@dataclass(frozen=True, eq=False)
class Mask2D:
    """Binary footprint of one structure in a projected view."""

    data: np.ndarray    # (rows, cols) uint8 of {0, 1}
    view: View
    spacing: tuple[float, float]
    label_id: int = 0

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.data, dtype=np.uint8)
        if arr.ndim != 2 or min(arr.shape) < 1:
            raise ValidationError(f"mask must be nonempty 2D, got shape {arr.shape}")
        if arr.max(initial=0) > 1:
            raise ValidationError("mask pixels must be 0 or 1")
        _freeze(self, "data", arr)
        object.__setattr__(self, "view", View(self.view))
        object.__setattr__(self, "spacing", _check_spacing(self.spacing, 2))
        object.__setattr__(self, "label_id", int(self.label_id))


# ---------------------------------------------------------------------------
# volume files: <name>.json sidecar + <name>.raw payload


def _sidecar_paths(path) -> tuple[Path, Path]:
    p = Path(path)
    if p.suffix in (".json", ".raw"):
        p = p.with_suffix("")
    return p.with_suffix(".json"), p.with_suffix(".raw")


def _read_sidecar(json_path: Path) -> dict:
    try:
        meta = json.loads(json_path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{json_path}: sidecar is not valid JSON: {exc}") from exc
    if not isinstance(meta, dict):
        raise FormatError(f"{json_path}: sidecar must be a JSON object")
    dims = meta.get("dims")
    if (not isinstance(dims, list) or len(dims) != 3
            or not all(isinstance(d, int) and d >= 1 for d in dims)):
        raise FormatError(f"{json_path}: 'dims' must be three positive integers")
    return meta


def _read_raw(raw_path: Path, dims: list[int], dtype: str) -> np.ndarray:
    itemsize = np.dtype(dtype).itemsize
    expected = dims[0] * dims[1] * dims[2] * itemsize
    blob = raw_path.read_bytes()
    if len(blob) != expected:
        raise FormatError(
            f"{raw_path}: payload is {len(blob)} bytes, sidecar dims imply {expected}")
    # C order with k fastest, matching the (H, W, D) reshape below.
    return np.frombuffer(blob, dtype=dtype).reshape(dims)


def load_volume(path, spacing=None) -> Volume:
    """Load an int16 attenuation volume from its sidecar (or stem) path.

    ``spacing`` overrides the sidecar's ``spacing_mm`` when given.
    """
    json_path, raw_path = _sidecar_paths(path)
    meta = _read_sidecar(json_path)
    if meta.get("dtype") != "i16":
        raise FormatError(f"{json_path}: volume dtype must be 'i16', got {meta.get('dtype')!r}")
    if spacing is None:
        spacing = meta.get("spacing_mm")
        if spacing is None:
            raise FormatError(f"{json_path}: missing 'spacing_mm'")
    data = _read_raw(raw_path, meta["dims"], "<i2")
    return Volume(data=data, spacing=_check_spacing(spacing, 3))


def save_volume(vol: Volume, path) -> None:
    json_path, raw_path = _sidecar_paths(path)
    data = np.asarray(vol.data)
    if not np.issubdtype(data.dtype, np.integer):
        if not np.all(data == np.round(data)):
            raise ValidationError("volume values must be integral to store as i16")
    lo, hi = np.iinfo(np.int16).min, np.iinfo(np.int16).max
    if data.min() < lo or data.max() > hi:
        raise ValidationError("volume values out of int16 range")
    meta = {"dims": list(data.shape), "spacing_mm": list(vol.spacing), "dtype": "i16"}
    json_path.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    raw_path.write_bytes(np.ascontiguousarray(data, dtype="<i2").tobytes())


def load_label_volume(path) -> LabelVolume:
    """Load a uint8 binary label volume; nonzero voxels map to 1."""
    json_path, raw_path = _sidecar_paths(path)
    meta = _read_sidecar(json_path)
    if meta.get("dtype") != "u8":
        raise FormatError(f"{json_path}: label dtype must be 'u8', got {meta.get('dtype')!r}")
    label_id = meta.get("label_id")
    if not isinstance(label_id, int) or label_id < 0:
        raise FormatError(f"{json_path}: 'label_id' must be a nonnegative integer")
    data = _read_raw(raw_path, meta["dims"], "u1")
    return LabelVolume(data=(data != 0).astype(np.uint8), label_id=label_id)


def save_label_volume(lab: LabelVolume, path) -> None:
    json_path, raw_path = _sidecar_paths(path)
    meta = {"dims": list(lab.shape), "dtype": "u8", "label_id": lab.label_id}
    json_path.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    raw_path.write_bytes(np.ascontiguousarray(lab.data, dtype="u1").tobytes())


# ---------------------------------------------------------------------------
# binary PGM (P5), maxval 255


def _parse_pgm(blob: bytes, origin: str) -> np.ndarray:
    pos = 0
    n = len(blob)

    def next_token() -> bytes:
        nonlocal pos
        while pos < n:
            c = blob[pos:pos + 1]
            if c == b"#":                      # comment runs to end of line
                while pos < n and blob[pos:pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            elif c.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < n and not blob[pos:pos + 1].isspace() and blob[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise FormatError(f"{origin}: truncated PGM header")
        return blob[start:pos]

    if next_token() != b"P5":
        raise FormatError(f"{origin}: not a binary PGM (magic must be P5)")
    try:
        width = int(next_token())
        height = int(next_token())
        maxval = int(next_token())
    except ValueError as exc:
        raise FormatError(f"{origin}: malformed PGM header") from exc
    if width < 1 or height < 1:
        raise FormatError(f"{origin}: PGM dimensions must be positive")
    if maxval != 255:
        raise FormatError(f"{origin}: PGM maxval must be 255, got {maxval}")
    pos += 1    # exactly one whitespace byte separates header from payload
    payload = blob[pos:]
    if len(payload) != width * height:
        raise FormatError(
            f"{origin}: PGM payload is {len(payload)} bytes, header implies {width * height}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width)


def _encode_pgm(arr: np.ndarray) -> bytes:
    height, width = arr.shape
    header = f"P5\n{width} {height}\n255\n".encode("ascii")
    return header + np.ascontiguousarray(arr, dtype=np.uint8).tobytes()


def load_projection(path, view: View, spacing=(1.0, 1.0)) -> Projection:
    arr = _parse_pgm(Path(path).read_bytes(), str(path))
    return Projection(data=arr, view=view, spacing=spacing, normalized=True)


def save_projection(proj: Projection, path) -> None:
    if not proj.normalized:
        raise ValidationError("only normalized (uint8) projections can be saved as PGM")
    Path(path).write_bytes(_encode_pgm(proj.data))


def load_mask(path, view: View, label_id: int = 0, spacing=(1.0, 1.0)) -> Mask2D:
    """Load a PGM mask; any nonzero pixel counts as foreground."""
    arr = _parse_pgm(Path(path).read_bytes(), str(path))
    return Mask2D(data=(arr != 0).astype(np.uint8), view=view,
                  spacing=spacing, label_id=label_id)


def save_mask(mask: Mask2D, path) -> None:
    # Foreground stored as 255 so the files render sensibly in image viewers.
    Path(path).write_bytes(_encode_pgm(mask.data * np.uint8(255)))

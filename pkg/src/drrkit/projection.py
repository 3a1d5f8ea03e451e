"""Orthographic projection of attenuation volumes into 2D radiograph-like images.

The pipeline per view is: attenuation transform, axis-collapse projection,
resampling to isotropic pixels, orientation fix-up, then 8-bit normalization
for grayscale images. Mask footprints follow the same geometry with
nearest-neighbour sampling so they stay binary.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .io import LabelVolume, Mask2D, Projection, ValidationError, View, Volume

ORIENT_OPS = ("transpose", "flip_x", "flip_y")

_DEFAULT_ORIENTATION = {View.PA: ("transpose",), View.LL: ("transpose",)}


def _round_half_up(x):
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5)


@dataclass(frozen=True)
class ProjectionConfig:
    """Geometry settings shared by every projected image and mask of a study.

    output_size is (width, height) applied after resampling and orientation;
    None keeps the spacing-derived size. Orientation maps each view to a
    sequence of ops from ORIENT_OPS, applied left to right.
    """

    views: tuple[View, ...] = (View.PA, View.LL)
    target_pixel_spacing: float = 1.0
    output_size: tuple[int, int] | None = None
    orientation: Mapping[View, tuple[str, ...]] = field(
        default_factory=lambda: dict(_DEFAULT_ORIENTATION))

    def __post_init__(self) -> None:
        views = tuple(View(v) for v in self.views)
        if not views:
            raise ValidationError("at least one view is required")
        if len(set(views)) != len(views):
            raise ValidationError("duplicate views in configuration")
        object.__setattr__(self, "views", views)

        t = float(self.target_pixel_spacing)
        if not np.isfinite(t) or t <= 0:
            raise ValidationError(f"target_pixel_spacing must be positive, got {t}")
        object.__setattr__(self, "target_pixel_spacing", t)

        if self.output_size is not None:
            w, h = (int(v) for v in self.output_size)
            if w < 1 or h < 1:
                raise ValidationError(f"output_size must be positive, got {self.output_size}")
            object.__setattr__(self, "output_size", (w, h))

        orient = {}
        for view, ops in dict(self.orientation).items():
            view = View(view)
            ops = tuple(ops)
            for op in ops:
                if op not in ORIENT_OPS:
                    raise ValidationError(f"unknown orientation op {op!r}")
            orient[view] = ops
        for view in views:
            orient.setdefault(view, _DEFAULT_ORIENTATION[view])
        object.__setattr__(self, "orientation", orient)

    def to_dict(self) -> dict:
        return {
            "views": [v.value for v in self.views],
            "target_pixel_spacing": self.target_pixel_spacing,
            "output_size": list(self.output_size) if self.output_size else None,
            "orientation": {v.value: list(ops) for v, ops in sorted(self.orientation.items())},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ProjectionConfig":
        known = {"views", "target_pixel_spacing", "output_size", "orientation"}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown projection config keys: {sorted(unknown)}")
        kwargs = {}
        if "views" in d:
            kwargs["views"] = tuple(View(v) for v in d["views"])
        if "target_pixel_spacing" in d:
            kwargs["target_pixel_spacing"] = d["target_pixel_spacing"]
        if d.get("output_size") is not None:
            kwargs["output_size"] = tuple(d["output_size"])
        if "orientation" in d:
            kwargs["orientation"] = {View(v): tuple(ops) for v, ops in d["orientation"].items()}
        return cls(**kwargs)


def attenuation_transform(vol: Volume) -> Volume:
    """Map Hounsfield units to nonnegative relative attenuation.

    Water (0 HU) maps to 1, air (-1000 HU) to 0, and anything below air
    clamps to 0.
    """
    mu = np.maximum(1.0 + vol.data.astype(np.float64) / 1000.0, 0.0)
    return Volume(data=mu, spacing=vol.spacing)


def project_image(mu: Volume, view: View) -> Projection:
    """Line-integral projection of an attenuation volume along one axis.

    PA collapses the anterior-posterior axis j and scales by s_y; LL
    collapses the right-left axis i and scales by s_x, so values are
    path integrals in millimetre units.
    """
    view = View(view)
    sx, sy, sz = mu.spacing
    if view is View.PA:
        data = mu.data.astype(np.float64).sum(axis=1) * sy
        spacing = (sx, sz)      # rows follow i, columns follow k
    else:
        data = mu.data.astype(np.float64).sum(axis=0) * sx
        spacing = (sy, sz)      # rows follow j, columns follow k
    return Projection(data=data, view=view, spacing=spacing, normalized=False)


def project_mask(lab: LabelVolume, view: View,
                 spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)) -> Mask2D:
    """Footprint of a binary volume in a view: max over the collapsed axis.

    Label volumes carry no spacing of their own, so the owning volume's
    spacing is passed in to keep the 2D grid consistent with the image.
    """
    view = View(view)
    sx, sy, sz = (float(s) for s in spacing)
    axis = 1 if view is View.PA else 0
    data = lab.data.max(axis=axis)
    sp2 = (sx, sz) if view is View.PA else (sy, sz)
    return Mask2D(data=data, view=view, spacing=sp2, label_id=lab.label_id)


def _sample_coords(n_in: int, n_out: int) -> np.ndarray:
    # Pixel centers sit at integer coordinates; sampling is edge-clamped.
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    return np.clip(src, 0.0, n_in - 1)


def _resample_bilinear(arr: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    r_in, c_in = arr.shape
    r_out, c_out = shape
    sr = _sample_coords(r_in, r_out)
    sc = _sample_coords(c_in, c_out)
    r0 = np.floor(sr).astype(np.intp)
    c0 = np.floor(sc).astype(np.intp)
    r1 = np.minimum(r0 + 1, r_in - 1)
    c1 = np.minimum(c0 + 1, c_in - 1)
    fr = (sr - r0)[:, None]
    fc = (sc - c0)[None, :]
    a = arr.astype(np.float64)
    return ((a[np.ix_(r0, c0)] * (1 - fr) + a[np.ix_(r1, c0)] * fr) * (1 - fc)
            + (a[np.ix_(r0, c1)] * (1 - fr) + a[np.ix_(r1, c1)] * fr) * fc)


def _resample_nearest(arr: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    r_in, c_in = arr.shape
    r_out, c_out = shape
    ri = np.clip(_round_half_up(_sample_coords(r_in, r_out)), 0, r_in - 1).astype(np.intp)
    ci = np.clip(_round_half_up(_sample_coords(c_in, c_out)), 0, c_in - 1).astype(np.intp)
    return arr[np.ix_(ri, ci)]


def _out_count(n: int, s: float, t: float) -> int:
    return max(1, int(_round_half_up(n * s / t)))


def _apply_orientation(arr: np.ndarray, spacing: tuple[float, float],
                       ops: Sequence[str]) -> tuple[np.ndarray, tuple[float, float]]:
    for op in ops:
        if op == "transpose":
            arr = arr.T
            spacing = (spacing[1], spacing[0])
        elif op == "flip_x":
            arr = arr[:, ::-1]
        elif op == "flip_y":
            arr = arr[::-1, :]
        else:
            raise ValidationError(f"unknown orientation op {op!r}")
    return np.ascontiguousarray(arr), spacing


def resample_and_orient(obj, config: ProjectionConfig):
    """Resample to isotropic target spacing, orient, then apply output_size.

    Grayscale projections use bilinear sampling; masks use nearest neighbour
    and are re-binarized so they stay strictly {0, 1}. Returns the same
    container type that was passed in.
    """
    is_mask = isinstance(obj, Mask2D)
    if not is_mask and obj.normalized:
        raise ValidationError("resampling operates on raw projections, normalize afterwards")
    arr = obj.data
    rm, cm = obj.spacing
    t = config.target_pixel_spacing

    shape = (_out_count(arr.shape[0], rm, t), _out_count(arr.shape[1], cm, t))
    if shape != arr.shape:
        resample = _resample_nearest if is_mask else _resample_bilinear
        new = resample(arr, shape)
        spacing = (rm * arr.shape[0] / shape[0], cm * arr.shape[1] / shape[1])
        arr = new
    else:
        spacing = (rm, cm)

    arr, spacing = _apply_orientation(arr, spacing, config.orientation[obj.view])

    if config.output_size is not None:
        w, h = config.output_size
        if (h, w) != arr.shape:
            resample = _resample_nearest if is_mask else _resample_bilinear
            spacing = (spacing[0] * arr.shape[0] / h, spacing[1] * arr.shape[1] / w)
            arr = resample(arr, (h, w))

    if is_mask:
        arr = (arr >= 0.5).astype(np.uint8)
        return Mask2D(data=arr, view=obj.view, spacing=spacing, label_id=obj.label_id)
    return Projection(data=arr, view=obj.view, spacing=spacing, normalized=False)


def normalize_to_8bit(proj: Projection) -> Projection:
    """Image-wise min-max normalization to uint8 with round-half-up.

    A constant image has no contrast to stretch; it maps to all zeros and
    emits a RuntimeWarning rather than failing.
    """
    if proj.normalized:
        raise ValidationError("projection is already normalized")
    data = proj.data
    lo = float(data.min())
    hi = float(data.max())
    if hi == lo:
        warnings.warn("constant projection normalized to all zeros", RuntimeWarning,
                      stacklevel=2)
        out = np.zeros(data.shape, dtype=np.uint8)
    else:
        out = _round_half_up(255.0 * (data - lo) / (hi - lo)).astype(np.uint8)
    return Projection(data=out, view=proj.view, spacing=proj.spacing, normalized=True)


@dataclass(frozen=True, eq=False)
class StudyProjection:
    """All projected outputs for one study: per-view images and per-label masks."""

    images: Mapping[View, Projection]
    masks: Mapping[View, Mapping[int, Mask2D]]


def project_study(vol: Volume, labels: Sequence[LabelVolume],
                  config: ProjectionConfig | None = None,
                  max_workers: int | None = None) -> StudyProjection:
    """Project a volume and its label set into every configured view.

    Mask projection across (view, label) pairs can run on a thread pool;
    results are assembled in deterministic (view order, label order) so the
    worker count never changes the output.
    """
    config = config or ProjectionConfig()
    ids = [lab.label_id for lab in labels]
    if len(set(ids)) != len(ids):
        raise ValidationError(f"duplicate label ids in study: {ids}")

    mu = attenuation_transform(vol)
    images = {}
    for view in config.views:
        raw = project_image(mu, view)
        images[view] = normalize_to_8bit(resample_and_orient(raw, config))

    def one_mask(view: View, lab: LabelVolume) -> Mask2D:
        return resample_and_orient(project_mask(lab, view, spacing=vol.spacing), config)

    tasks = [(view, lab) for view in config.views for lab in labels]
    if max_workers is not None and max_workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(lambda vl: one_mask(*vl), tasks))
    else:
        results = [one_mask(view, lab) for view, lab in tasks]

    masks: dict[View, dict[int, Mask2D]] = {view: {} for view in config.views}
    for (view, lab), mask in zip(tasks, results):
        masks[view][lab.label_id] = mask
    return StudyProjection(images=images, masks=masks)

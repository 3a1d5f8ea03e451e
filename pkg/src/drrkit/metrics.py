"""Overlap, boundary-distance and detection metrics for 2D binary masks.

Conventions for degenerate pairs are fixed so batch evaluation never throws
midway: two empty masks are a perfect trivial match, a single empty side is
a total miss whose boundary distances saturate at the image diagonal. Both
cases are flagged in the report.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .io import Mask2D, ValidationError
from .stats import BootstrapCI, bootstrap_ci

_EIGHT_CONN = np.ones((3, 3), dtype=int)

AGGREGATE_METRICS = ("dice", "iou", "hd95", "asd", "nsd",
                     "precision", "recall", "f1")


@dataclass(frozen=True)
class MetricsReport:
    """All pairwise metrics for one (predicted, reference) mask pair."""

    dice: float
    iou: float
    hd95: float
    asd: float
    nsd: float
    precision: float
    recall: float
    f1: float
    n_pred_components: int
    n_ref_components: int
    n_matched: int
    flags: tuple[str, ...] = ()

    def to_json_dict(self) -> dict:
        return {
            "dice": self.dice, "iou": self.iou,
            "hd95": self.hd95, "asd": self.asd, "nsd": self.nsd,
            "precision": self.precision, "recall": self.recall, "f1": self.f1,
            "n_pred_components": self.n_pred_components,
            "n_ref_components": self.n_ref_components,
            "n_matched": self.n_matched,
            "flags": list(self.flags),
        }


def _as_binary(mask, name: str) -> np.ndarray:
    arr = mask.data if isinstance(mask, Mask2D) else np.asarray(mask)
    if arr.ndim != 2 or min(arr.shape) < 1:
        raise ValidationError(f"{name} mask must be nonempty 2D, got shape {arr.shape}")
    return arr != 0


def _check_pair(pred, ref) -> tuple[np.ndarray, np.ndarray]:
    p = _as_binary(pred, "predicted")
    r = _as_binary(ref, "reference")
    if p.shape != r.shape:
        raise ValidationError(
            f"mask geometry mismatch: predicted {p.shape} vs reference {r.shape}")
    return p, r


def dice_iou(pred, ref) -> tuple[float, float]:
    """Dice and IoU of two same-shape binary masks; both-empty scores 1."""
    p, r = _check_pair(pred, ref)
    inter = int(np.count_nonzero(p & r))
    np_, nr = int(np.count_nonzero(p)), int(np.count_nonzero(r))
    if np_ + nr == 0:
        return 1.0, 1.0
    union = np_ + nr - inter
    dice = 2.0 * inter / (np_ + nr)
    iou = inter / union if union else 1.0
    return dice, iou


def boundary_pixels(mask) -> np.ndarray:
    """Boolean map of foreground pixels with a 4-neighbour background pixel
    or lying on the image edge."""
    fg = _as_binary(mask, "input")
    pad = np.pad(fg, 1, constant_values=False)
    interior = (pad[1:-1, :-2] & pad[1:-1, 2:] & pad[:-2, 1:-1] & pad[2:, 1:-1])
    return fg & ~interior


def _directed_distances(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    # Euclidean distance from every src boundary pixel to the nearest dst
    # boundary pixel, in pixel units.
    src_pts = np.argwhere(src)
    dst_pts = np.argwhere(dst)
    if len(src_pts) == 0 or len(dst_pts) == 0:
        raise ValidationError("boundary distance needs nonempty boundaries")
    d, _ = cKDTree(dst_pts).query(src_pts, k=1)
    return np.asarray(d, dtype=np.float64)


def _percentile95(d: np.ndarray) -> float:
    return float(np.percentile(d, 95.0))    # linear interpolation


def boundary_distance_metrics(pred, ref, *, nsd_tolerance_px: float = 2.0,
                              ) -> tuple[float, float, float]:
    """(hd95, asd, nsd) between two nonempty same-shape masks.

    hd95 is the max of the two directed 95th percentiles, asd the mean over
    both directions pooled, nsd the pooled fraction within tolerance.
    """
    p, r = _check_pair(pred, ref)
    if not p.any() or not r.any():
        raise ValidationError("boundary metrics are undefined for empty masks; "
                              "use evaluate_pair for the degenerate conventions")
    bp, br = boundary_pixels(p), boundary_pixels(r)
    d_pr = _directed_distances(bp, br)
    d_rp = _directed_distances(br, bp)
    pooled = np.concatenate([d_pr, d_rp])
    hd95 = max(_percentile95(d_pr), _percentile95(d_rp))
    asd = float(pooled.mean())
    nsd = float(np.count_nonzero(pooled <= nsd_tolerance_px) / len(pooled))
    return hd95, asd, nsd


def component_detection(pred, ref, *, match_iou: float = 0.5,
                        ) -> tuple[float, float, float, int, int, int]:
    """Instance-style detection over 8-connected components.

    Components are matched one to one, greedily by descending IoU with ties
    broken on (pred index, ref index); a pair counts only at IoU at or above
    match_iou. Returns (precision, recall, f1, n_pred, n_ref, n_matched).
    """
    p, r = _check_pair(pred, ref)
    lp, n_p = ndimage.label(p, structure=_EIGHT_CONN)
    lr, n_r = ndimage.label(r, structure=_EIGHT_CONN)
    if n_p == 0 and n_r == 0:
        return 1.0, 1.0, 1.0, 0, 0, 0
    if n_p == 0 or n_r == 0:
        return 0.0, 0.0, 0.0, n_p, n_r, 0

    sizes_p = np.bincount(lp.ravel())
    sizes_r = np.bincount(lr.ravel())
    # Joint histogram of (pred component, ref component) over overlap pixels.
    both = (lp > 0) & (lr > 0)
    pairs_iou = {}
    if both.any():
        joint = lp[both].astype(np.int64) * (n_r + 1) + lr[both]
        uniq, counts = np.unique(joint, return_counts=True)
        for key, inter in zip(uniq, counts):
            i, j = int(key // (n_r + 1)), int(key % (n_r + 1))
            union = sizes_p[i] + sizes_r[j] - inter
            pairs_iou[(i, j)] = float(inter / union)

    order = sorted(pairs_iou.items(), key=lambda kv: (-kv[1], kv[0][0], kv[0][1]))
    used_p: set[int] = set()
    used_r: set[int] = set()
    matched = 0
    for (i, j), v in order:
        if v < match_iou:
            break
        if i in used_p or j in used_r:
            continue
        used_p.add(i)
        used_r.add(j)
        matched += 1
    precision = matched / n_p
    recall = matched / n_r
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1, n_p, n_r, matched


def evaluate_pair(pred, ref, *, nsd_tolerance_px: float = 2.0,
                  match_iou: float = 0.5) -> MetricsReport:
    """Full metric set for one mask pair, including degenerate conventions."""
    p, r = _check_pair(pred, ref)
    p_empty, r_empty = not p.any(), not r.any()
    if p_empty and r_empty:
        return MetricsReport(dice=1.0, iou=1.0, hd95=0.0, asd=0.0, nsd=1.0,
                             precision=1.0, recall=1.0, f1=1.0,
                             n_pred_components=0, n_ref_components=0, n_matched=0,
                             flags=("both_empty",))
    if p_empty or r_empty:
        diag = float(np.hypot(*p.shape))
        flag = "pred_empty" if p_empty else "ref_empty"
        _, _, _, n_p, n_r, _ = component_detection(p, r, match_iou=match_iou)
        return MetricsReport(dice=0.0, iou=0.0, hd95=diag, asd=diag, nsd=0.0,
                             precision=0.0, recall=0.0, f1=0.0,
                             n_pred_components=n_p, n_ref_components=n_r, n_matched=0,
                             flags=(flag,))
    dice, iou = dice_iou(p, r)
    hd95, asd, nsd = boundary_distance_metrics(p, r, nsd_tolerance_px=nsd_tolerance_px)
    precision, recall, f1, n_p, n_r, matched = component_detection(
        p, r, match_iou=match_iou)
    return MetricsReport(dice=dice, iou=iou, hd95=hd95, asd=asd, nsd=nsd,
                         precision=precision, recall=recall, f1=f1,
                         n_pred_components=n_p, n_ref_components=n_r,
                         n_matched=matched, flags=())


@dataclass(frozen=True)
class ClassSetReport:
    """Per-class metric reports plus bootstrap CIs of the across-class means."""

    per_class: Mapping[int, MetricsReport]
    aggregate: Mapping[str, BootstrapCI]

    def to_json_dict(self) -> dict:
        return {
            "per_class": {str(k): v.to_json_dict()
                          for k, v in sorted(self.per_class.items())},
            "aggregate": {name: ci.to_json_dict()
                          for name, ci in self.aggregate.items()},
        }


def evaluate_class_set(pairs: Sequence[tuple[int, object, object]], *,
                       nsd_tolerance_px: float = 2.0, match_iou: float = 0.5,
                       n_resamples: int = 10000, level: float = 0.95,
                       seed: int = 0) -> ClassSetReport:
    """Evaluate (class_id, pred, ref) pairs and aggregate across classes.

    Aggregates are percentile-bootstrap CIs of the mean over per-class
    values; a single class collapses the interval onto its value.
    """
    if not pairs:
        raise ValidationError("no mask pairs to evaluate")
    per_class: dict[int, MetricsReport] = {}
    for class_id, pred, ref in pairs:
        class_id = int(class_id)
        if class_id in per_class:
            raise ValidationError(f"duplicate class id {class_id}")
        try:
            per_class[class_id] = evaluate_pair(
                pred, ref, nsd_tolerance_px=nsd_tolerance_px, match_iou=match_iou)
        except ValidationError as exc:
            raise ValidationError(f"class {class_id}: {exc}") from exc
    aggregate = {}
    ordered = [per_class[k] for k in sorted(per_class)]
    for name in AGGREGATE_METRICS:
        values = [getattr(rep, name) for rep in ordered]
        aggregate[name] = bootstrap_ci(values, n_resamples=n_resamples,
                                       level=level, seed=seed)
    return ClassSetReport(per_class=per_class, aggregate=aggregate)

"""Synthetic side-view renderer of the segment chain.

Draws the chain silhouette the measurement pipeline expects to see:
filled rectangles per segment with shallow notch gaps on the top edge at
every joint, short ridge tabs hanging below each joint (the features the
bottom-profile peak detector picks up, standing in for the inter-chamber
ridges of the physical finger), and narrow end tabs at base and tip whose
bottom corners sit at the same vertical drop below the chain axis as the
ridge tips. That uniform drop makes the detected bottom features a
constant vertical offset of the true axis points, so the recovered angles
are exact up to rasterization.

Validated pose envelope: drooping-to-mildly-raised chains (cumulative angle
roughly within [-75 deg, +10 deg]); steep upward curl moves the end-face
corners past the end tabs and breaks the extreme-x conventions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import forward_kinematics
from .model import GripperModel
from .vision import RasterImage

DEFAULT_COLOR = (40, 80, 220)  # blue silicone, inside the default HSV band
DEFAULT_BACKGROUND = (255, 255, 255)


@dataclass(frozen=True)
class RenderInfo:
    """Ground-truth geometry of a rendered frame (pixel coordinates)."""

    px_per_m: float
    axis_px: np.ndarray      # chain points (base, joints, tip) in pixels
    joint_px: np.ndarray     # ridge tip pixels, one per joint
    base_px: np.ndarray      # bottom corner of the base tab
    tip_px: np.ndarray       # bottom corner of the tip tab
    feature_depth_px: float  # vertical drop of ridge tips below the axis


def _fill_polygon(mask: np.ndarray, pts: np.ndarray) -> None:
    """Even-odd scanline fill; pixel centers sit at integer coordinates."""
    h, w = mask.shape
    ys = pts[:, 1]
    row_lo = max(0, int(np.ceil(ys.min())))
    row_hi = min(h - 1, int(np.floor(ys.max())))
    n = len(pts)
    for row in range(row_lo, row_hi + 1):
        xs = []
        for i in range(n):
            x1, y1 = pts[i]
            x2, y2 = pts[(i + 1) % n]
            if (y1 <= row < y2) or (y2 <= row < y1):
                xs.append(x1 + (row - y1) / (y2 - y1) * (x2 - x1))
        xs.sort()
        for a, b in zip(xs[::2], xs[1::2]):
            lo = max(0, int(np.ceil(a)))
            hi = min(w - 1, int(np.floor(b)))
            if hi >= lo:
                mask[row, lo:hi + 1] = True


def render_chain(model: GripperModel, theta, px_per_m: float = 12000.0,
                 margin_px: int = 20,
                 half_height_top: float = 0.0020,
                 half_height_bottom: float = 0.0015,
                 feature_depth: float = 0.0050,
                 ridge_halfwidth: float = 0.0005,
                 notch_depth: float = 0.0010,
                 notch_halfwidth: float = 0.0007,
                 end_inset: float = 0.0070,
                 arm_halfheight: float = 0.00035,
                 color=DEFAULT_COLOR,
                 background=DEFAULT_BACKGROUND,
                 canvas=None):
    """Rasterize the chain silhouette at the given pose.

    Returns (RasterImage, RenderInfo). ``feature_depth`` is the vertical
    distance the joint ridges and end-tab corners hang below the chain
    axis; keep it above ``half_height_bottom`` so the ridges protrude.
    ``arm_halfheight`` must stay below ``ridge_halfwidth`` or the arm
    corners overtake the end tabs as extreme-x points at steep poses.
    ``canvas`` optionally fixes the world window as (x_lo, y_hi, width,
    height) so several frames share one pixel frame.
    """
    pts = forward_kinematics(model, theta)
    pad = feature_depth + half_height_top + 0.002
    if canvas is None:
        x_lo, x_hi = pts[:, 0].min() - pad, pts[:, 0].max() + pad
        y_lo, y_hi = pts[:, 1].min() - pad, pts[:, 1].max() + pad
        width = int(np.ceil((x_hi - x_lo) * px_per_m)) + 2 * margin_px
        height = int(np.ceil((y_hi - y_lo) * px_per_m)) + 2 * margin_px
    else:
        x_lo, y_hi, width, height = canvas

    def to_px(p):
        p = np.atleast_2d(p)
        out = np.empty_like(p, dtype=float)
        out[:, 0] = margin_px + (p[:, 0] - x_lo) * px_per_m
        out[:, 1] = margin_px + (y_hi - p[:, 1]) * px_per_m
        return out

    n_seg = model.n_segments
    tangents = np.diff(pts, axis=0)
    tangents /= np.linalg.norm(tangents, axis=1, keepdims=True)
    normals = np.column_stack([-tangents[:, 1], tangents[:, 0]])  # physical "up"

    mask = np.zeros((height, width), dtype=bool)

    def fill(quad_phys):
        _fill_polygon(mask, to_px(np.asarray(quad_phys)))

    # segment bodies, inset at every end: notch gaps between neighbors,
    # longer insets at base and tip so the end faces stay behind the tabs
    for kseg in range(n_seg):
        a, b = pts[kseg], pts[kseg + 1]
        t, nrm = tangents[kseg], normals[kseg]
        inset_p = notch_halfwidth if kseg > 0 else end_inset
        inset_d = notch_halfwidth if kseg < n_seg - 1 else end_inset
        fill([a + inset_p * t + half_height_top * nrm,
              b - inset_d * t + half_height_top * nrm,
              b - inset_d * t - half_height_bottom * nrm,
              a + inset_p * t - half_height_bottom * nrm])

    # bridges under the notches keep the silhouette connected at joints
    for j in range(1, n_seg):
        p = pts[j]
        t0, n0 = tangents[j - 1], normals[j - 1]
        t1, n1 = tangents[j], normals[j]
        fill([p - notch_halfwidth * t0 + (half_height_top - notch_depth) * n0,
              p + notch_halfwidth * t1 + (half_height_top - notch_depth) * n1,
              p + notch_halfwidth * t1 - half_height_bottom * n1,
              p - notch_halfwidth * t0 - half_height_bottom * n0])

    # thin arms reach from the inset end faces out to the base/tip points
    for p, t, nrm in ((pts[0], tangents[0], normals[0]),
                      (pts[-1], -tangents[-1], -normals[-1])):
        fill([p + arm_halfheight * nrm,
              p + end_inset * t + arm_halfheight * nrm,
              p + end_inset * t - arm_halfheight * nrm,
              p - arm_halfheight * nrm])

    # ridge tabs: vertical rectangles in image space, bottom edge exactly
    # feature_depth below the corresponding axis point
    depth_px = feature_depth * px_per_m
    half_w_px = ridge_halfwidth * px_per_m
    tab_points = to_px(pts[1:])  # joints and tip
    base_point = to_px(pts[0])[0]
    all_tabs = np.vstack([base_point, tab_points])
    for cx, cy in all_tabs:
        _fill_polygon(mask, np.array([
            [cx - half_w_px, cy - 1.0],
            [cx + half_w_px, cy - 1.0],
            [cx + half_w_px, cy + depth_px],
            [cx - half_w_px, cy + depth_px],
        ]))

    pixels = np.empty((height, width, 3), dtype=np.uint8)
    pixels[:] = np.asarray(background, dtype=np.uint8)
    pixels[mask] = np.asarray(color, dtype=np.uint8)

    axis_px = to_px(pts)
    joint_px = axis_px[1:-1] + [0.0, depth_px]
    info = RenderInfo(
        px_per_m=px_per_m,
        axis_px=axis_px,
        joint_px=joint_px,
        base_px=axis_px[0] + [-half_w_px, depth_px],
        tip_px=axis_px[-1] + [half_w_px, depth_px],
        feature_depth_px=depth_px,
    )
    return RasterImage(pixels), info


def render_sequence(model: GripperModel, theta_samples, px_per_m: float = 12000.0,
                    margin_px: int = 20, **kwargs):
    """Render one frame per row of ``theta_samples`` on a shared canvas.

    The canvas is sized to the union of all poses so pixel coordinates are
    directly comparable across frames. Returns (frames, infos).
    """
    theta_samples = np.atleast_2d(theta_samples)
    pad = kwargs.get("feature_depth", 0.0050) + kwargs.get("half_height_top", 0.0020) + 0.002
    all_pts = np.concatenate([forward_kinematics(model, th) for th in theta_samples])
    x_lo = all_pts[:, 0].min() - pad
    y_hi = all_pts[:, 1].max() + pad
    width = int(np.ceil((all_pts[:, 0].max() + pad - x_lo) * px_per_m)) + 2 * margin_px
    height = int(np.ceil((y_hi - (all_pts[:, 1].min() - pad)) * px_per_m)) + 2 * margin_px
    frames, infos = [], []
    for theta in theta_samples:
        img, info = render_chain(model, theta, px_per_m=px_per_m, margin_px=margin_px,
                                 canvas=(x_lo, y_hi, width, height), **kwargs)
        frames.append(img)
        infos.append(info)
    return frames, infos

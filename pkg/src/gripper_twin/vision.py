"""Image pipeline: from a side-view photo of the gripper to joint angles.

Steps mirror the measurement procedure used on the physical setup:
gray/HSV masking isolates the gripper silhouette, its outer contour is
traced, the contour is split into top and bottom profiles at the extreme
x positions, the joint ridges show up as peaks of the bottom profile, and
the chain angles follow from the peak positions. A per-frame variant
tracks the tip corner through a video's frames.

Images are handled as plain numpy arrays wrapped in RasterImage; the
required on-disk formats are binary PPM (color) and PGM (gray).
Pixel coordinates are (x right, y down).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.signal import find_peaks

from .dynamics import forward_kinematics, joint_angles_from_positions
from .errors import ModelError, VisionError
from .signal_metrics import TimeSeries

MIN_COMPONENT_AREA = 100  # px
MAX_TRACKING_GAP_FRACTION = 0.10

# default mask: blue silicone band
DEFAULT_HSV_LOW = (190.0, 0.3, 0.2)
DEFAULT_HSV_HIGH = (250.0, 1.0, 1.0)
DEFAULT_GRAY_THRESHOLD = 245.0


@dataclass
class RasterImage:
    """8-bit image, RGB (H, W, 3) or single-channel gray (H, W)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.dtype != np.uint8:
            px = px.astype(np.uint8)
        if px.ndim == 3 and px.shape[2] == 3:
            pass
        elif px.ndim == 2:
            pass
        else:
            raise ModelError(f"expected (H, W) or (H, W, 3) pixels, got {px.shape}")
        if px.shape[0] == 0 or px.shape[1] == 0:
            raise ModelError("image must contain at least one pixel")
        self.pixels = px

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def is_color(self) -> bool:
        return self.pixels.ndim == 3


def read_image(path) -> RasterImage:
    """Read a PPM (P6/P3) or PGM (P5/P2) file."""
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        magic = data[:2].decode("ascii")
    except UnicodeDecodeError as exc:
        raise ModelError(f"{path}: not a PPM/PGM file") from exc
    if magic not in ("P6", "P3", "P5", "P2"):
        raise ModelError(f"{path}: unsupported format {magic!r} (want PPM/PGM)")

    # header: magic, width, height, maxval, separated by whitespace/comments
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise ModelError(f"{path}: malformed header") from exc
    if maxval != 255:
        raise ModelError(f"{path}: only maxval 255 supported, got {maxval}")

    channels = 3 if magic in ("P6", "P3") else 1
    count = width * height * channels
    if magic in ("P6", "P5"):
        if len(data) - pos < count:
            raise ModelError(f"{path}: truncated pixel data")
        raw = np.frombuffer(data, dtype=np.uint8, count=count, offset=pos)
    else:
        tokens = data[pos:].split()
        if len(tokens) < count:
            raise ModelError(f"{path}: truncated pixel data")
        raw = np.array(tokens[:count], dtype=np.uint8)
    shape = (height, width, 3) if channels == 3 else (height, width)
    return RasterImage(raw.reshape(shape).copy())


def write_image(img: RasterImage, path) -> None:
    """Write binary PPM for color images, binary PGM for gray."""
    magic = b"P6" if img.is_color else b"P5"
    header = magic + f"\n{img.width} {img.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(img.pixels.tobytes())


@dataclass
class MaskSpec:
    """HSV band plus a gray threshold isolating the gripper from the scene.

    Hue is in degrees [0, 360); a low hue above the high hue denotes a
    wrapping band (e.g. red). Saturation and value are fractions in [0, 1].
    """

    hsv_low: tuple = DEFAULT_HSV_LOW
    hsv_high: tuple = DEFAULT_HSV_HIGH
    gray_threshold: float = DEFAULT_GRAY_THRESHOLD

    def __post_init__(self):
        lo, hi = tuple(self.hsv_low), tuple(self.hsv_high)
        if len(lo) != 3 or len(hi) != 3:
            raise ModelError("hsv bounds must be (h, s, v) triples")
        if not (0 <= lo[0] < 360 and 0 <= hi[0] < 360):
            raise ModelError("hue must lie in [0, 360)")
        for a, b, name in ((lo[1], hi[1], "saturation"), (lo[2], hi[2], "value")):
            if not (0 <= a <= 1 and 0 <= b <= 1):
                raise ModelError(f"{name} must lie in [0, 1]")
            if a > b:
                raise ModelError(f"{name} low must not exceed high")
        if not 0 <= self.gray_threshold <= 255:
            raise ModelError("gray_threshold must lie in [0, 255]")
        self.hsv_low, self.hsv_high = lo, hi
        self.gray_threshold = float(self.gray_threshold)

    @classmethod
    def from_json(cls, path) -> "MaskSpec":
        try:
            with open(path) as fh:
                data = json.load(fh)
            return cls(
                hsv_low=tuple(data.get("hsv_low", DEFAULT_HSV_LOW)),
                hsv_high=tuple(data.get("hsv_high", DEFAULT_HSV_HIGH)),
                gray_threshold=data.get("gray_threshold", DEFAULT_GRAY_THRESHOLD),
            )
        except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
            raise ModelError(f"cannot read mask spec {path}: {exc}") from exc

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump({"hsv_low": list(self.hsv_low), "hsv_high": list(self.hsv_high),
                       "gray_threshold": self.gray_threshold}, fh, indent=2)


def luminance(img: RasterImage) -> np.ndarray:
    """Rec.601 luma: 0.299 R + 0.587 G + 0.114 B (gray images pass through)."""
    if not img.is_color:
        return img.pixels.astype(float)
    px = img.pixels.astype(float)
    return 0.299 * px[..., 0] + 0.587 * px[..., 1] + 0.114 * px[..., 2]


def to_grayscale_mask(img: RasterImage, threshold: float) -> np.ndarray:
    """True where the pixel is darker than ``threshold`` (non-white content)."""
    return luminance(img) < threshold


def rgb_to_hsv(img: RasterImage) -> np.ndarray:
    """Vectorized RGB -> HSV with H in degrees [0, 360) and S, V in [0, 1]."""
    if not img.is_color:
        raise ModelError("rgb_to_hsv needs a color image")
    px = img.pixels.astype(float) / 255.0
    r, g, b = px[..., 0], px[..., 1], px[..., 2]
    v = px.max(axis=-1)
    delta = v - px.min(axis=-1)
    s = np.where(v > 0, delta / np.where(v > 0, v, 1.0), 0.0)
    h = np.zeros_like(v)
    nz = delta > 0
    rmax = nz & (v == r)
    gmax = nz & ~rmax & (v == g)
    bmax = nz & ~rmax & ~gmax
    h[rmax] = 60.0 * ((g[rmax] - b[rmax]) / delta[rmax])
    h[gmax] = 60.0 * ((b[gmax] - r[gmax]) / delta[gmax] + 2.0)
    h[bmax] = 60.0 * ((r[bmax] - g[bmax]) / delta[bmax] + 4.0)
    h = np.mod(h, 360.0)
    return np.stack([h, s, v], axis=-1)


def hsv_mask(img: RasterImage, spec: MaskSpec) -> np.ndarray:
    """HSV in-band mask combined (AND) with the gray non-white mask."""
    hsv = rgb_to_hsv(img)
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    h_lo, s_lo, v_lo = spec.hsv_low
    h_hi, s_hi, v_hi = spec.hsv_high
    if h_lo <= h_hi:
        h_ok = (h >= h_lo) & (h <= h_hi)
    else:  # wrapping hue band
        h_ok = (h >= h_lo) | (h <= h_hi)
    in_band = h_ok & (s >= s_lo) & (s <= s_hi) & (v >= v_lo) & (v <= v_hi)
    return in_band & to_grayscale_mask(img, spec.gray_threshold)


def morphology(mask: np.ndarray, op: str, radius: int) -> np.ndarray:
    """Binary dilation or erosion with a square element of side 2r + 1."""
    if radius < 1:
        raise ModelError("radius must be >= 1")
    structure = np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)
    if op == "dilate":
        return ndimage.binary_dilation(mask, structure=structure)
    if op == "erode":
        return ndimage.binary_erosion(mask, structure=structure)
    raise ModelError(f"op must be 'dilate' or 'erode', got {op!r}")


@dataclass
class Contour:
    """Ordered boundary pixels (x, y), 8-connected, optionally closed."""

    points: np.ndarray
    closed: bool = True

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=int)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ModelError("contour points must be an (N, 2) array")
        if self.closed and pts.shape[0] < 3:
            raise ModelError("a closed contour needs at least 3 points")
        steps = np.abs(np.diff(pts, axis=0))
        if steps.size and steps.max() > 1:
            raise ModelError("consecutive contour points must be 8-connected")
        if self.closed:
            wrap = np.abs(pts[0] - pts[-1])
            if wrap.max() > 1:
                raise ModelError("closed contour endpoints must be 8-connected")
        self.points = pts


# Moore neighborhood in clockwise order for y-down image coordinates.
_DIRS = np.array([(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)])


def extract_contour(mask: np.ndarray) -> Contour:
    """Closed outer boundary of the (largest) foreground component.

    Moore-neighbor border following, clockwise, starting at the
    top-left-most foreground pixel. If several components exist the largest
    is traced and a warning is issued; components below 100 px are rejected.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise VisionError("empty mask", stage="contour")
    labels, n_comp = ndimage.label(mask, structure=np.ones((3, 3), dtype=bool))
    if n_comp > 1:
        warnings.warn(f"mask has {n_comp} components; tracing the largest", stacklevel=2)
        sizes = np.bincount(labels.ravel())[1:]
        target = int(np.argmax(sizes)) + 1
        comp = labels == target
        area = sizes[target - 1]
    else:
        comp = mask
        area = int(mask.sum())
    if area < MIN_COMPONENT_AREA:
        raise VisionError(
            f"largest component has {area} px, below the {MIN_COMPONENT_AREA} px minimum",
            stage="contour")

    h, w = comp.shape
    flat = np.flatnonzero(comp)
    start = (int(flat[0] % w), int(flat[0] // w))  # (x, y), top-left-most

    def is_fg(p):
        return 0 <= p[0] < w and 0 <= p[1] < h and comp[p[1], p[0]]

    dir_index = {(int(dx), int(dy)): i for i, (dx, dy) in enumerate(_DIRS)}
    cur = start
    back = (start[0] - 1, start[1])  # west neighbor, background by construction
    state0 = (cur, back)
    points = []
    for _ in range(4 * comp.size):
        points.append(cur)
        idx = dir_index[(back[0] - cur[0], back[1] - cur[1])]
        nxt = None
        for j in range(1, 9):
            d = (idx + j) % 8
            cand = (cur[0] + _DIRS[d][0], cur[1] + _DIRS[d][1])
            if is_fg(cand):
                back = (cur[0] + _DIRS[(idx + j - 1) % 8][0],
                        cur[1] + _DIRS[(idx + j - 1) % 8][1])
                nxt = cand
                break
        if nxt is None:  # isolated pixel, cannot happen above the area minimum
            break
        cur = nxt
        # full traversal: the deterministic (pixel, backtrack) state recurred
        if (cur, back) == state0:
            break
    return Contour(points=np.array(points), closed=True)


def split_contour(contour: Contour):
    """Cut the closed contour at its extreme-x vertices into bottom and top.

    Ties on x are broken toward larger y (lower in the image). The arc with
    the greater mean y is the bottom profile; both are returned oriented
    from the min-x cut vertex to the max-x cut vertex and share those two
    vertices.
    """
    pts = contour.points
    xs, ys = pts[:, 0], pts[:, 1]
    if xs.min() == xs.max():
        raise VisionError("degenerate contour: all points share one x", stage="split")

    def pick(x_val):
        cand = np.flatnonzero(xs == x_val)
        return cand[np.argmax(ys[cand])]

    i_lo, i_hi = pick(xs.min()), pick(xs.max())
    n = len(pts)

    def arc(i, j):
        if i <= j:
            return pts[i:j + 1]
        return np.concatenate([pts[i:], pts[:j + 1]])

    arc_a = arc(i_lo, i_hi)   # runs min-x -> max-x in contour order
    arc_b = arc(i_hi, i_lo)[::-1]  # reversed to also run min-x -> max-x
    if arc_a[:, 1].mean() >= arc_b[:, 1].mean():
        bottom, top = arc_a, arc_b
    else:
        bottom, top = arc_b, arc_a
    return bottom, top


def _plateau_center(points: np.ndarray, index: int) -> np.ndarray:
    """Sub-pixel feature point: mean x over the equal-y run around ``index``."""
    y = points[:, 1]
    lo = index
    while lo > 0 and y[lo - 1] == y[index]:
        lo -= 1
    hi = index
    while hi + 1 < len(points) and y[hi + 1] == y[index]:
        hi += 1
    return np.array([points[lo:hi + 1, 0].mean(), float(y[index])])


def find_joint_peaks(bottom: np.ndarray, n_joints: int) -> np.ndarray:
    """Joint pixels: the ``n_joints`` most prominent maxima of the bottom profile.

    The hinge ridges hang below the segment bodies, so joints appear as
    local maxima of image y along the bottom polyline. Plateau peaks report
    their center (sub-pixel via the plateau mean). Raises if fewer than
    ``n_joints`` peaks exist.
    """
    bottom = np.asarray(bottom)
    y = bottom[:, 1].astype(float)
    peaks, props = find_peaks(y, prominence=0.0)
    if peaks.size < n_joints:
        raise VisionError(
            f"found {peaks.size} bottom-profile peaks, need {n_joints}", stage="peaks")
    order = np.argsort(-props["prominences"], kind="stable")[:n_joints]
    chosen = np.sort(peaks[order])
    return np.array([_plateau_center(bottom, p) for p in chosen])


def angles_from_image(img: RasterImage, spec: MaskSpec, model):
    """Full pipeline: mask, contour, split, peaks, angles.

    Returns (joint_angles, px_per_m). The angle computation frames the
    detected joint peaks with base and tip anchors taken from the bottom
    profile's leading and trailing flat runs (the end-feature undersides);
    the leading base-link heading is dropped, leaving one angle per joint.
    The pixel scale comes from the base-to-tip pixel distance matched
    against the model chain at the recovered pose.
    """
    try:
        mask = hsv_mask(img, spec)
    except ModelError as exc:
        raise VisionError(str(exc), stage="mask") from exc
    contour = extract_contour(mask)
    bottom, _top = split_contour(contour)
    peaks = find_joint_peaks(bottom, model.n_joints)
    try:
        base_pt = _plateau_center(bottom, 0)
        tip_pt = _plateau_center(bottom, len(bottom) - 1)
        pts = np.concatenate([[base_pt], peaks, [tip_pt]]).astype(float)
        all_angles = joint_angles_from_positions(pts)
    except Exception as exc:
        raise VisionError(str(exc), stage="angles") from exc
    angles = all_angles[1:]
    chain = forward_kinematics(model, angles)
    m_dist = float(np.hypot(*(chain[-1] - chain[0])))
    px_dist = float(np.hypot(*(pts[-1] - pts[0])))
    if m_dist <= 0:
        raise VisionError("degenerate chain span", stage="angles")
    return angles, px_dist / m_dist


def _tip_point(mask: np.ndarray) -> np.ndarray:
    contour = extract_contour(mask)
    pts = contour.points
    cand = np.flatnonzero(pts[:, 0] == pts[:, 0].max())
    return pts[cand[np.argmax(pts[cand, 1])]]


def track_tip(frames, spec: MaskSpec, fps: float, px_per_m: float) -> TimeSeries:
    """Vertical tip position over a frame sequence, in meters (y up).

    Per frame the contour point with the greatest x is taken as the tip;
    frames whose contour stage fails are recorded as gaps and interpolated,
    but more than 10% gaps is an error. The y origin is the image top, so
    only differences are physically meaningful.
    """
    frames = list(frames)
    if len(frames) < 2:
        raise ModelError("need at least 2 frames")
    if fps <= 0 or px_per_m <= 0:
        raise ModelError("fps and px_per_m must be positive")
    ys = np.full(len(frames), np.nan)
    failures = []
    for i, frame in enumerate(frames):
        try:
            mask = hsv_mask(frame, spec)
            ys[i] = _tip_point(mask)[1]
        except (VisionError, ModelError):
            failures.append(i)
    if len(failures) > MAX_TRACKING_GAP_FRACTION * len(frames):
        raise VisionError(
            f"{len(failures)} of {len(frames)} frames failed (> "
            f"{MAX_TRACKING_GAP_FRACTION:.0%})", stage="tracking")
    if failures:
        warnings.warn(f"interpolated {len(failures)} dropped frame(s)", stacklevel=2)
        good = np.flatnonzero(~np.isnan(ys))
        ys = np.interp(np.arange(len(frames)), good, ys[good])
    return TimeSeries(sample_rate=fps, values=-ys / px_per_m, t0=0.0)

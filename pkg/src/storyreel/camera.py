"""Camera keyframe math for animating a still image.

A keyframe is a zoom + crop center + rotation at a fractional time. The crop
window implied by (zoom, center) must always lie inside the image, so centers
are clamped at construction; linear interpolation between two valid keyframes
is then provably valid too (1/zoom is convex), but crop_rect clamps again as
a belt-and-braces measure.
"""

from dataclasses import dataclass, field

from .errors import ContractViolationError

MIN_ZOOM = 1.0
MAX_ZOOM = 4.0

# Default gentle motion: alternate a zoom-in and a zoom-out scene to scene.
DEFAULT_ZOOM_FAR = 1.0
DEFAULT_ZOOM_NEAR = 1.25


def _clamp_center(c: float, zoom: float) -> float:
    half = 0.5 / zoom
    return min(max(c, half), 1.0 - half)


@dataclass(frozen=True)
class CameraKeyframe:
    t: float
    zoom: float
    center_x: float = 0.5
    center_y: float = 0.5
    rotation: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.t <= 1.0:
            raise ContractViolationError(f"keyframe t={self.t} outside [0, 1]")
        if not MIN_ZOOM <= self.zoom <= MAX_ZOOM:
            raise ContractViolationError(
                f"zoom {self.zoom} outside [{MIN_ZOOM}, {MAX_ZOOM}]")
        object.__setattr__(self, "center_x", _clamp_center(self.center_x, self.zoom))
        object.__setattr__(self, "center_y", _clamp_center(self.center_y, self.zoom))

    def to_dict(self) -> dict:
        return {"t": self.t, "zoom": self.zoom, "center_x": self.center_x,
                "center_y": self.center_y, "rotation": self.rotation}

    @classmethod
    def from_dict(cls, d: dict) -> "CameraKeyframe":
        return cls(d["t"], d["zoom"], d["center_x"], d["center_y"], d["rotation"])


@dataclass(frozen=True)
class CameraPath:
    keyframes: tuple[CameraKeyframe, ...]
    easing: str = "linear"  # or "smoothstep"

    def __post_init__(self):
        kfs = tuple(self.keyframes)
        object.__setattr__(self, "keyframes", kfs)
        if len(kfs) < 2:
            raise ContractViolationError("camera path needs at least 2 keyframes")
        if kfs[0].t != 0.0 or kfs[-1].t != 1.0:
            raise ContractViolationError("camera path must start at t=0 and end at t=1")
        for a, b in zip(kfs, kfs[1:]):
            if b.t <= a.t:
                raise ContractViolationError("keyframe times must strictly increase")
        if self.easing not in ("linear", "smoothstep"):
            raise ContractViolationError(f"unknown easing {self.easing!r}")

    def to_dict(self) -> dict:
        return {"easing": self.easing,
                "keyframes": [k.to_dict() for k in self.keyframes]}

    @classmethod
    def from_dict(cls, d: dict) -> "CameraPath":
        return cls(tuple(CameraKeyframe.from_dict(k) for k in d["keyframes"]),
                   d.get("easing", "linear"))


def default_camera_path(scene_index: int) -> CameraPath:
    """Even scenes zoom in 1.0 -> 1.25, odd scenes zoom back out."""
    if scene_index % 2 == 0:
        z0, z1 = DEFAULT_ZOOM_FAR, DEFAULT_ZOOM_NEAR
    else:
        z0, z1 = DEFAULT_ZOOM_NEAR, DEFAULT_ZOOM_FAR
    return CameraPath((CameraKeyframe(0.0, z0), CameraKeyframe(1.0, z1)))


def _smoothstep(s: float) -> float:
    return s * s * (3.0 - 2.0 * s)


def interpolate_camera(path: CameraPath, t: float) -> CameraKeyframe:
    """Camera state at fractional time t, exact at keyframe times."""
    if not 0.0 <= t <= 1.0:
        raise ContractViolationError(f"t={t} outside [0, 1]")
    kfs = path.keyframes
    if t <= kfs[0].t:
        return kfs[0]
    if t >= kfs[-1].t:
        return kfs[-1]
    for a, b in zip(kfs, kfs[1:]):
        if a.t <= t <= b.t:
            if t == a.t:
                return a
            if t == b.t:
                return b
            s = (t - a.t) / (b.t - a.t)
            if path.easing == "smoothstep":
                s = _smoothstep(s)
            return CameraKeyframe(
                t=t,
                zoom=a.zoom + (b.zoom - a.zoom) * s,
                center_x=a.center_x + (b.center_x - a.center_x) * s,
                center_y=a.center_y + (b.center_y - a.center_y) * s,
                rotation=a.rotation + (b.rotation - a.rotation) * s,
            )
    raise AssertionError("unreachable: t within [0,1] but no bracketing segment")


def _even(v: int) -> int:
    return v - (v % 2)


def crop_rect(image_w: int, image_h: int, kf: CameraKeyframe) -> tuple[int, int, int, int]:
    """Pixel crop rectangle (x, y, w, h) for a keyframe.

    Width/height are image size divided by zoom; the rectangle is centered on
    the keyframe center then translated minimally to stay in bounds. All four
    values are quantized to even integers (codec chroma subsampling).
    """
    if image_w <= 0 or image_h <= 0:
        raise ContractViolationError("image dimensions must be positive")
    w = max(2, _even(int(image_w / kf.zoom + 0.5)))
    h = max(2, _even(int(image_h / kf.zoom + 0.5)))
    w = min(w, _even(image_w))
    h = min(h, _even(image_h))
    x = int(kf.center_x * image_w - w / 2.0 + 0.5)
    y = int(kf.center_y * image_h - h / 2.0 + 0.5)
    x = min(max(x, 0), image_w - w)
    y = min(max(y, 0), image_h - h)
    x = min(_even(x), _even(image_w - w))
    y = min(_even(y), _even(image_h - h))
    return x, y, w, h

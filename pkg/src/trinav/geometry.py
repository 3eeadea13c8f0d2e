"""Camera model, pixel unprojection, planar frame transforms.

Conventions used everywhere in this package:

- Camera frame: z forward, x right, y down (depth d is the z coordinate,
  not the ray length).
- World frame: planar (x, z) with y up; heading in radians, counter
  clockwise, 0 along world +x, normalized to [-pi, pi).
- A pixel (u, v) with depth d unprojects to ``d * K^-1 * [u, v, 1]^T``.
- A camera point maps to the world plane as

      [x_w, z_w] = [x_a, z_a] + R(heading) @ [z_cam, -x_cam]

  so the camera's forward axis lies along the heading and camera-right is
  to the agent's right. The height coordinate is computed, then dropped
  when projecting onto the 2D map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidDepthError, NoValidDepthError

TWO_PI = 2.0 * math.pi


def normalize_angle(theta: float) -> float:
    """Wrap an angle to [-pi, pi)."""
    return (theta + math.pi) % TWO_PI - math.pi


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


#: Default camera used by the simulator and most tests: 640x480, 90 degree
#: horizontal field of view.
DEFAULT_INTRINSICS = CameraIntrinsics(fx=320.0, fy=320.0, cx=320.0, cy=240.0, width=640, height=480)


@dataclass(frozen=True)
class PixelTarget:
    """A pixel position: u = column, v = row."""

    u: int
    v: int


@dataclass(frozen=True)
class CameraPoint:
    """3D point in the camera frame (meters)."""

    x: float
    y: float
    z: float


@dataclass(frozen=True)
class AgentPose:
    """Planar pose: position (x, z) in meters plus heading in radians.

    The heading is normalized on construction so two poses that differ by
    full turns compare equal in behaviour.
    """

    x: float
    z: float
    heading: float

    def __post_init__(self):
        object.__setattr__(self, "heading", normalize_angle(self.heading))

    @property
    def position(self) -> "WorldPoint":
        return WorldPoint(self.x, self.z)


@dataclass(frozen=True)
class WorldPoint:
    """Planar world-frame point (meters)."""

    x: float
    z: float

    def distance_to(self, other: "WorldPoint") -> float:
        return math.hypot(self.x - other.x, self.z - other.z)


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned pixel box [x1, y1, x2, y2] with x1 <= x2, y1 <= y2."""

    x1: int
    y1: int
    x2: int
    y2: int

    @staticmethod
    def normalized(x1: float, y1: float, x2: float, y2: float) -> "BoundingBox":
        """Build a box from possibly swapped corners."""
        xa, xb = sorted((int(round(x1)), int(round(x2))))
        ya, yb = sorted((int(round(y1)), int(round(y2))))
        return BoundingBox(xa, ya, xb, yb)

    def clamped(self, width: int, height: int) -> "BoundingBox":
        """Clamp all corners into the image bounds."""
        return BoundingBox(
            min(max(self.x1, 0), width - 1),
            min(max(self.y1, 0), height - 1),
            min(max(self.x2, 0), width - 1),
            min(max(self.y2, 0), height - 1),
        )

    @property
    def area(self) -> int:
        return (self.x2 - self.x1) * (self.y2 - self.y1)


class View(Enum):
    """The four egocentric view directions."""

    FRONT = "front"
    LEFT = "left"
    RIGHT = "right"
    BACK = "back"


_VIEW_OFFSETS = {
    View.FRONT: 0.0,
    View.LEFT: math.pi / 2.0,
    View.RIGHT: -math.pi / 2.0,
    View.BACK: math.pi,
}


def view_heading(pose: AgentPose, view: View) -> float:
    """Absolute heading of one of the four views, normalized to [-pi, pi)."""
    return normalize_angle(pose.heading + _VIEW_OFFSETS[view])


def unproject_pixel(k: CameraIntrinsics, p: PixelTarget, depth: float) -> CameraPoint:
    """Lift a pixel with a depth sample into the camera frame.

    Returns ``depth * K^-1 * [u, v, 1]^T``:

        x = d * (u - cx) / fx,  y = d * (v - cy) / fy,  z = d

    Raises InvalidDepthError for non-positive or non-finite depth; such
    samples are sensor holes (e.g. surfaces that return no range) and must
    be handled by the caller's fallback logic, never silently zeroed.
    """
    if not math.isfinite(depth) or depth <= 0.0:
        raise InvalidDepthError(f"invalid depth sample {depth!r} at ({p.u}, {p.v})")
    return CameraPoint(
        x=depth * (p.u - k.cx) / k.fx,
        y=depth * (p.v - k.cy) / k.fy,
        z=depth,
    )


def project_point(k: CameraIntrinsics, c: CameraPoint) -> tuple[float, float]:
    """Inverse of unproject_pixel: camera point back to (u, v)."""
    if c.z <= 0:
        raise ValueError("cannot project a point at or behind the camera plane")
    return (k.fx * c.x / c.z + k.cx, k.fy * c.y / c.z + k.cy)


def camera_to_world(c: CameraPoint, pose: AgentPose) -> WorldPoint:
    """Map a camera-frame point onto the 2D world plane.

    Applies the planar rotation of the pose heading to [z_cam, -x_cam] and
    translates by the agent position; the vertical coordinate is dropped.
    """
    cos_t = math.cos(pose.heading)
    sin_t = math.sin(pose.heading)
    fwd, lat = c.z, -c.x
    return WorldPoint(
        x=pose.x + cos_t * fwd - sin_t * lat,
        z=pose.z + sin_t * fwd + cos_t * lat,
    )


def world_to_camera(p: WorldPoint, pose: AgentPose) -> tuple[float, float]:
    """Inverse planar transform: returns (x_cam, z_cam) of a world point."""
    cos_t = math.cos(pose.heading)
    sin_t = math.sin(pose.heading)
    dx, dz = p.x - pose.x, p.z - pose.z
    fwd = cos_t * dx + sin_t * dz
    lat = -sin_t * dx + cos_t * dz
    return (-lat, fwd)


class PixelSelection(Enum):
    """How the navigation target pixel is chosen from a grounded box."""

    BOTTOM_CENTER = "bottom_center"
    MEDIAN_DEPTH = "median_depth"
    DIRECT_POINT = "direct_point"


def select_target_pixel(
    box: BoundingBox,
    depth_image: np.ndarray,
    strategy: PixelSelection = PixelSelection.BOTTOM_CENTER,
    point: PixelTarget | None = None,
) -> tuple[PixelTarget, float]:
    """Pick the target pixel and its depth from a grounded bounding box.

    - BOTTOM_CENTER: the bottom-center pixel of the box with the depth
      sampled at that pixel.
    - MEDIAN_DEPTH: the same pixel, but the depth is the median of all
      finite depths inside the box (robust to holes at the box edge).
    - DIRECT_POINT: ``point`` is used verbatim with the depth sampled
      there (for models asked to output a point instead of a box).

    ``box`` must already be clamped to the image. Raises NoValidDepthError
    when the strategy cannot produce a finite positive depth.
    """
    height, width = depth_image.shape
    if strategy is PixelSelection.DIRECT_POINT:
        if point is None:
            raise ValueError("DIRECT_POINT requires an explicit pixel")
        pixel = PixelTarget(min(max(point.u, 0), width - 1), min(max(point.v, 0), height - 1))
    else:
        pixel = PixelTarget((box.x1 + box.x2) // 2, box.y2)

    if strategy is PixelSelection.MEDIAN_DEPTH:
        patch = depth_image[box.y1 : box.y2 + 1, box.x1 : box.x2 + 1]
        finite = patch[np.isfinite(patch) & (patch > 0)]
        if finite.size == 0:
            raise NoValidDepthError("no finite depth inside box")
        return pixel, float(np.median(finite))

    d = float(depth_image[pixel.v, pixel.u])
    if not math.isfinite(d) or d <= 0.0:
        raise NoValidDepthError(f"invalid depth at selected pixel ({pixel.u}, {pixel.v})")
    return pixel, d

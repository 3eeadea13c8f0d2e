"""World-anchored occupancy grid built from depth observations.

Each depth sample is unprojected into the camera frame, mapped onto the
world plane with the observing view's heading, then classified by the
height of the 3D point: points in the obstacle band mark their cell
Occupied, floor-band points mark Free, and the 2D ray from the agent to
each hit marks the cells in between Free. Invalid samples (non-finite or
non-positive, i.e. sensor holes) are skipped and counted, never treated
as free space.

The grid grows on demand; growth never moves existing content relative to
the world. A cell needs a single hit to become Occupied and three
consecutive contradicting free observations to revert, so one noisy frame
cannot erase a wall.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np
from scipy import ndimage

from . import _kernels
from .errors import ContractError
from .geometry import AgentPose, CameraIntrinsics, View, WorldPoint, view_heading

#: Camera mount height above the floor (meters); zero pitch.
CAMERA_HEIGHT = 0.88

#: World-height band (meters) classified as obstacle / as walkable floor.
OBSTACLE_BAND = (0.10, 1.50)
FLOOR_BAND_MAX = 0.10

DEFAULT_RESOLUTION = 0.05
DEFAULT_INFLATION_RADIUS = 0.18

#: Free observations needed to flip an Occupied cell back to Free.
FREE_REVERT_HITS = 3

#: Radius around the agent marked free at every integration (the agent
#: demonstrably occupies it; the camera cannot see its own footprint).
AGENT_CLEAR_RADIUS = 0.15


class CellState(IntEnum):
    UNKNOWN = 0
    FREE = 1
    OCCUPIED = 2


@dataclass(frozen=True)
class GridCell:
    i: int
    j: int


@dataclass
class DepthImage:
    """A depth frame in meters; NaN or non-positive entries are invalid."""

    values: np.ndarray  # float32 (height, width)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass
class IntegrationStats:
    valid_samples: int = 0
    skipped_samples: int = 0
    occupied_cells: int = 0
    freed_cells: int = 0


_GROWTH_MARGIN = 16  # cells of slack added on every reallocation


class OccupancyGrid:
    """Dense 2D occupancy map with automatic growth and obstacle inflation."""

    def __init__(
        self,
        resolution: float = DEFAULT_RESOLUTION,
        inflation_radius: float = DEFAULT_INFLATION_RADIUS,
    ):
        if resolution <= 0:
            raise ValueError("resolution must be positive")
        self.resolution = resolution
        self.inflation_radius = inflation_radius
        self.origin = WorldPoint(0.0, 0.0)  # world coords of corner of cell (0, 0)
        self.states = np.zeros((0, 0), np.uint8)
        self._free_streak = np.zeros((0, 0), np.uint8)
        self._blocked: np.ndarray | None = None

    # -- indexing ---------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return self.states.shape

    def cell_index(self, p: WorldPoint) -> tuple[int, int]:
        """Cell indices containing ``p`` (may lie outside the current extent)."""
        return (
            int(np.floor((p.x - self.origin.x) / self.resolution)),
            int(np.floor((p.z - self.origin.z) / self.resolution)),
        )

    def in_bounds(self, i: int, j: int) -> bool:
        return 0 <= i < self.states.shape[0] and 0 <= j < self.states.shape[1]

    def cell_center(self, cell: GridCell) -> WorldPoint:
        return WorldPoint(
            self.origin.x + (cell.i + 0.5) * self.resolution,
            self.origin.z + (cell.j + 0.5) * self.resolution,
        )

    def state_at(self, p: WorldPoint) -> CellState:
        i, j = self.cell_index(p)
        if not self.in_bounds(i, j):
            return CellState.UNKNOWN
        return CellState(self.states[i, j])

    # -- growth -----------------------------------------------------------

    def ensure_contains(self, min_x: float, min_z: float, max_x: float, max_z: float):
        """Grow the backing arrays so the world rectangle fits inside."""
        res = self.resolution
        lo_i = int(np.floor((min_x - self.origin.x) / res))
        lo_j = int(np.floor((min_z - self.origin.z) / res))
        hi_i = int(np.floor((max_x - self.origin.x) / res))
        hi_j = int(np.floor((max_z - self.origin.z) / res))

        n0, n1 = self.states.shape
        if n0 > 0 and lo_i >= 0 and lo_j >= 0 and hi_i < n0 and hi_j < n1:
            return

        pad_lo_i = max(0, -lo_i) + _GROWTH_MARGIN
        pad_lo_j = max(0, -lo_j) + _GROWTH_MARGIN
        pad_hi_i = max(0, hi_i - n0 + 1) + _GROWTH_MARGIN
        pad_hi_j = max(0, hi_j - n1 + 1) + _GROWTH_MARGIN

        new_states = np.zeros((n0 + pad_lo_i + pad_hi_i, n1 + pad_lo_j + pad_hi_j), np.uint8)
        new_streak = np.zeros_like(new_states)
        if n0 > 0:
            new_states[pad_lo_i : pad_lo_i + n0, pad_lo_j : pad_lo_j + n1] = self.states
            new_streak[pad_lo_i : pad_lo_i + n0, pad_lo_j : pad_lo_j + n1] = self._free_streak
        self.states = new_states
        self._free_streak = new_streak
        self.origin = WorldPoint(
            self.origin.x - pad_lo_i * res,
            self.origin.z - pad_lo_j * res,
        )
        self._blocked = None

    # -- traversability ---------------------------------------------------

    def inflate(self) -> None:
        """Recompute the inflated obstacle mask used by traversability queries.

        Original cell states are untouched; inflation only affects which
        cells count as traversable.
        """
        occ = self.states == CellState.OCCUPIED
        rc = int(np.floor(self.inflation_radius / self.resolution))
        if rc <= 0:
            self._blocked = occ.copy()
            return
        span = np.arange(-rc, rc + 1)
        di, dj = np.meshgrid(span, span, indexing="ij")
        struct = (di * di + dj * dj) * self.resolution**2 <= self.inflation_radius**2
        self._blocked = ndimage.binary_dilation(occ, structure=struct)

    def blocked_mask(self) -> np.ndarray:
        if self._blocked is None or self._blocked.shape != self.states.shape:
            self.inflate()
        return self._blocked

    def traversable_mask(self) -> np.ndarray:
        """Free cells outside the inflation halo. Unknown is not traversable."""
        return (self.states == CellState.FREE) & ~self.blocked_mask()

    def is_traversable(self, p: WorldPoint) -> bool:
        i, j = self.cell_index(p)
        if not self.in_bounds(i, j):
            return False
        return bool(self.traversable_mask()[i, j])

    # -- export -----------------------------------------------------------

    def to_pgm(self, path) -> None:
        """Debug dump as binary PGM: 0 unknown, 128 free, 255 occupied."""
        lut = np.array([0, 128, 255], np.uint8)
        img = lut[self.states.T[::-1]]  # rows = z descending, cols = x
        with open(path, "wb") as f:
            f.write(b"P5\n%d %d\n255\n" % (img.shape[1], img.shape[0]))
            f.write(img.tobytes())


def integrate_depth(
    grid: OccupancyGrid,
    depth: DepthImage,
    k: CameraIntrinsics,
    pose: AgentPose,
    view: View = View.FRONT,
    camera_height: float = CAMERA_HEIGHT,
    stride: int = 1,
) -> IntegrationStats:
    """Fuse one depth view into the grid (mutates ``grid``).

    The view's absolute heading is resolved from the pose, every valid
    sample is unprojected and transformed to the world plane, and cells
    are updated under the occupied-wins / hysteresis rules described in
    the module docstring. ``stride`` subsamples the image for speed; at
    stride 2 the pixel spacing still out-resolves the default cell size
    inside the sensor range.
    """
    if depth.height != k.height or depth.width != k.width:
        raise ContractError(
            f"depth image {depth.width}x{depth.height} does not match intrinsics "
            f"{k.width}x{k.height}"
        )
    heading = view_heading(pose, view)
    stats = IntegrationStats()

    vals = depth.values
    if stride > 1:
        sampled = np.zeros(vals.shape, bool)
        sampled[::stride, ::stride] = True
        valid = np.isfinite(vals) & (vals > 0) & sampled
        considered = int(sampled.sum())
    else:
        valid = np.isfinite(vals) & (vals > 0)
        considered = vals.size
    stats.valid_samples = int(valid.sum())
    stats.skipped_samples = considered - stats.valid_samples
    if stats.valid_samples == 0:
        return stats

    vv, uu = np.nonzero(valid)
    d = vals[vv, uu].astype(np.float64)
    x_cam = d * (uu - k.cx) / k.fx
    y_cam = d * (vv - k.cy) / k.fy
    height_w = camera_height - y_cam

    obstacle = (height_w >= OBSTACLE_BAND[0]) & (height_w <= OBSTACLE_BAND[1])
    floor = height_w < FLOOR_BAND_MAX
    keep = obstacle | floor
    if not keep.any():
        return stats

    fwd = d[keep]
    lat = -x_cam[keep]
    cos_t, sin_t = np.cos(heading), np.sin(heading)
    wx = pose.x + cos_t * fwd - sin_t * lat
    wz = pose.z + sin_t * fwd + cos_t * lat
    obstacle = obstacle[keep]

    r = AGENT_CLEAR_RADIUS + grid.resolution
    grid.ensure_contains(
        min(wx.min(), pose.x - r),
        min(wz.min(), pose.z - r),
        max(wx.max(), pose.x + r),
        max(wz.max(), pose.z + r),
    )

    res = grid.resolution
    ci = np.floor((wx - grid.origin.x) / res).astype(np.int64)
    cj = np.floor((wz - grid.origin.z) / res).astype(np.int64)
    n0, n1 = grid.states.shape
    flat = ci * n1 + cj

    occ_flat = np.unique(flat[obstacle])
    floor_flat = np.unique(flat[~obstacle])

    # 2D ray traversal: everything between the agent and an observed cell
    # was seen through, so it is free.
    ai, aj = grid.cell_index(pose.position)
    seen_flat = np.unique(flat)
    free_mask = np.zeros((n0, n1), bool)
    _kernels.mark_free_rays(
        free_mask, ai, aj, (seen_flat // n1).astype(np.int64), (seen_flat % n1).astype(np.int64)
    )
    free_mask.ravel()[floor_flat] = True

    # the agent's own footprint is free by occupancy
    rc = int(np.ceil(AGENT_CLEAR_RADIUS / res))
    for di in range(-rc, rc + 1):
        for dj in range(-rc, rc + 1):
            if (di * di + dj * dj) * res * res <= AGENT_CLEAR_RADIUS**2:
                if grid.in_bounds(ai + di, aj + dj):
                    free_mask[ai + di, aj + dj] = True

    # occupied evidence wins within a single integration
    free_mask.ravel()[occ_flat] = False

    states = grid.states.ravel()
    streak = grid._free_streak.ravel()

    states[occ_flat] = CellState.OCCUPIED
    streak[occ_flat] = 0
    stats.occupied_cells = occ_flat.size

    free_flat = np.nonzero(free_mask.ravel())[0]
    cur = states[free_flat]
    newly_free = free_flat[cur == CellState.UNKNOWN]
    states[newly_free] = CellState.FREE

    contested = free_flat[cur == CellState.OCCUPIED]
    streak[contested] += 1
    reverted = contested[streak[contested] >= FREE_REVERT_HITS]
    states[reverted] = CellState.FREE
    streak[reverted] = 0

    stats.freed_cells = int(newly_free.size + reverted.size)
    grid._blocked = None
    return stats


def inflate(grid: OccupancyGrid) -> OccupancyGrid:
    """Recompute the inflation halo; returns the same grid for chaining."""
    grid.inflate()
    return grid


def is_traversable(grid: OccupancyGrid, p: WorldPoint) -> bool:
    """True iff the containing cell is Free and outside the inflation halo."""
    return grid.is_traversable(p)

"""Geodesic distance fields and discrete motion commands.

The distance field solves the unit-speed Eikonal equation on the grid's
traversable cells with a first-order two-neighbor upwind quadratic
update, marched in fast-marching order. Cells in a small visibility
checked ball around the goal are seeded with their exact Euclidean
distance; without this the near-goal truncation error of the first-order
update (about 21% at the diagonal neighbor) would dominate. Seeded cells
are boundary data, not marched values.

Paths are steepest-descent walks on the field; commands are produced by a
greedy tracker over fixed forward/turn magnitudes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from .errors import GoalUnreachableError, NoPathError
from .geometry import AgentPose, WorldPoint, normalize_angle
from .mapping import GridCell, OccupancyGrid

#: Low-level action magnitudes (VLN-style discrete control).
FORWARD_STEP = 0.25
TURN_ANGLE = math.radians(15.0)

#: Radius (in cells) of the exact-distance ball seeded around the goal.
EXACT_SEED_RADIUS = 3

UNREACHABLE = math.inf


class ControlCommand(Enum):
    MOVE_FORWARD = "move_forward"
    TURN_LEFT = "turn_left"
    TURN_RIGHT = "turn_right"
    STOP = "stop"


@dataclass
class Path:
    """Ordered world points from start to goal; length in meters."""

    points: list[WorldPoint]
    total_length: float


@dataclass
class DistanceField:
    """Grid-aligned geodesic distance to a goal cell (inf = unreachable)."""

    values: np.ndarray  # float64 (n0, n1)
    origin: WorldPoint
    resolution: float
    goal_cell: GridCell
    seed_mask: np.ndarray  # True where the value is boundary data

    def cell_index(self, p: WorldPoint) -> tuple[int, int]:
        return (
            int(np.floor((p.x - self.origin.x) / self.resolution)),
            int(np.floor((p.z - self.origin.z) / self.resolution)),
        )

    def cell_center(self, i: int, j: int) -> WorldPoint:
        return WorldPoint(
            self.origin.x + (i + 0.5) * self.resolution,
            self.origin.z + (j + 0.5) * self.resolution,
        )

    def value_at(self, p: WorldPoint) -> float:
        i, j = self.cell_index(p)
        if not (0 <= i < self.values.shape[0] and 0 <= j < self.values.shape[1]):
            return UNREACHABLE
        return float(self.values[i, j])

    def to_pgm(self, path) -> None:
        """Debug dump: reachable distances normalized to 1..255, 0 = unreachable."""
        v = self.values
        finite = np.isfinite(v)
        img = np.zeros(v.shape, np.uint8)
        if finite.any() and v[finite].max() > 0:
            img[finite] = 1 + (254 * v[finite] / v[finite].max()).astype(np.uint8)
        img = img.T[::-1]
        with open(path, "wb") as f:
            f.write(b"P5\n%d %d\n255\n" % (img.shape[1], img.shape[0]))
            f.write(img.tobytes())


def supercover_cells(i0: int, j0: int, i1: int, j1: int) -> list[tuple[int, int]]:
    """All cells the segment between two cell centers passes through.

    Unlike plain Bresenham this includes both side cells when the segment
    crosses exactly through a cell corner, so using it as a visibility
    test forbids corner-cutting between diagonal walls.
    """
    cells = [(i0, j0)]
    dx = abs(i1 - i0)
    dy = abs(j1 - j0)
    sx = 1 if i1 >= i0 else -1
    sy = 1 if j1 >= j0 else -1
    x, y = i0, j0
    if dx >= dy:
        err = dx
        for _ in range(dx):
            errprev = err
            x += sx
            err += 2 * dy
            if err > 2 * dx:
                y += sy
                err -= 2 * dx
                if err + errprev < 2 * dx:
                    cells.append((x, y - sy))
                elif err + errprev > 2 * dx:
                    cells.append((x - sx, y))
                else:
                    cells.append((x, y - sy))
                    cells.append((x - sx, y))
            cells.append((x, y))
    else:
        err = dy
        for _ in range(dy):
            errprev = err
            y += sy
            err += 2 * dx
            if err > 2 * dy:
                x += sx
                err -= 2 * dy
                if err + errprev < 2 * dy:
                    cells.append((x - sx, y))
                elif err + errprev > 2 * dy:
                    cells.append((x, y - sy))
                else:
                    cells.append((x - sx, y))
                    cells.append((x, y - sy))
            cells.append((x, y))
    return cells


def nearest_free_cell(grid: OccupancyGrid, p: WorldPoint, max_radius: float) -> GridCell:
    """Nearest traversable cell whose center lies within ``max_radius`` of ``p``.

    Ties on distance break deterministically by smaller i, then smaller j.
    Raises GoalUnreachableError when no traversable cell qualifies.
    """
    if max_radius <= 0:
        raise ValueError("max_radius must be positive")
    trav = grid.traversable_mask()
    ci, cj = grid.cell_index(p)
    if grid.in_bounds(ci, cj) and trav[ci, cj]:
        return GridCell(ci, cj)

    res = grid.resolution
    rc = int(math.ceil(max_radius / res)) + 1
    best: tuple[float, int, int] | None = None
    for di in range(-rc, rc + 1):
        for dj in range(-rc, rc + 1):
            i, j = ci + di, cj + dj
            if not grid.in_bounds(i, j) or not trav[i, j]:
                continue
            c = grid.cell_center(GridCell(i, j))
            d = c.distance_to(p)
            if d > max_radius:
                continue
            key = (d, i, j)
            if best is None or key < best:
                best = key
    if best is None:
        raise GoalUnreachableError(
            f"no traversable cell within {max_radius} m of ({p.x:.2f}, {p.z:.2f})"
        )
    return GridCell(best[1], best[2])


def _exact_seeds(trav: np.ndarray, gi: int, gj: int, h: float):
    """Goal cell plus a visibility-checked exact-Euclidean ball around it."""
    n0, n1 = trav.shape
    seeds_i, seeds_j, seeds_t = [gi], [gj], [0.0]
    r = EXACT_SEED_RADIUS
    for di in range(-r, r + 1):
        for dj in range(-r, r + 1):
            if di == 0 and dj == 0:
                continue
            if di * di + dj * dj > r * r:
                continue
            i, j = gi + di, gj + dj
            if not (0 <= i < n0 and 0 <= j < n1) or not trav[i, j]:
                continue
            visible = all(
                0 <= a < n0 and 0 <= b < n1 and trav[a, b]
                for a, b in supercover_cells(gi, gj, i, j)
            )
            if not visible:
                continue
            seeds_i.append(i)
            seeds_j.append(j)
            seeds_t.append(math.hypot(di, dj) * h)
    return (
        np.asarray(seeds_i, np.int64),
        np.asarray(seeds_j, np.int64),
        np.asarray(seeds_t, np.float64),
    )


def compute_distance_field(
    grid: OccupancyGrid,
    goal: WorldPoint,
    goal_project_radius: float = 0.5,
) -> DistanceField:
    """Fast-marching distance-to-goal over the grid's traversable cells.

    A goal landing on a non-traversable cell is projected to the nearest
    traversable cell within ``goal_project_radius``; failing that raises
    GoalUnreachableError.
    """
    trav = grid.traversable_mask()
    if trav.size == 0 or not trav.any():
        raise GoalUnreachableError("grid has no traversable cells")
    goal_cell = nearest_free_cell(grid, goal, goal_project_radius)

    si, sj, st = _exact_seeds(trav, goal_cell.i, goal_cell.j, grid.resolution)
    values = _kernels.eikonal_march(trav, si, sj, st, grid.resolution)
    values[values >= 0.5 * _kernels.BIG] = UNREACHABLE

    seed_mask = np.zeros(trav.shape, bool)
    seed_mask[si, sj] = True
    return DistanceField(
        values=values,
        origin=grid.origin,
        resolution=grid.resolution,
        goal_cell=goal_cell,
        seed_mask=seed_mask,
    )


_DESCENT_STEPS = (
    (-1, 0), (1, 0), (0, -1), (0, 1),
    (-1, -1), (-1, 1), (1, -1), (1, 1),
)


def extract_path(field: DistanceField, start: WorldPoint) -> Path:
    """Steepest-descent walk from ``start`` to the goal cell.

    Diagonal steps are only taken when both adjacent axis cells are
    reachable, so the path cannot cut a wall corner. The field value
    strictly decreases along the result.
    """
    v = field.values
    n0, n1 = v.shape
    i, j = field.cell_index(start)
    if not (0 <= i < n0 and 0 <= j < n1) or not math.isfinite(v[i, j]):
        raise NoPathError(f"start ({start.x:.2f}, {start.z:.2f}) cannot reach the goal")

    cells = [(i, j)]
    for _ in range(v.size):
        if v[i, j] <= 0.0:
            break
        best = None
        for di, dj in _DESCENT_STEPS:
            a, b = i + di, j + dj
            if not (0 <= a < n0 and 0 <= b < n1) or not math.isfinite(v[a, b]):
                continue
            if di != 0 and dj != 0:
                if not (math.isfinite(v[i + di, j]) and math.isfinite(v[i, j + dj])):
                    continue
            if best is None or v[a, b] < v[best[0], best[1]]:
                best = (a, b)
        if best is None or v[best[0], best[1]] >= v[i, j]:
            raise NoPathError("descent stalled before reaching the goal")
        i, j = best
        cells.append((i, j))

    points = [field.cell_center(a, b) for a, b in cells]
    length = sum(points[k].distance_to(points[k + 1]) for k in range(len(points) - 1))
    return Path(points=points, total_length=length)


def path_to_commands(
    path: Path,
    pose: AgentPose,
    forward_step: float = FORWARD_STEP,
    turn_angle: float = TURN_ANGLE,
    lookahead: float = FORWARD_STEP,
    max_commands: int = 40,
) -> list[ControlCommand]:
    """Greedy open-loop tracker: turn in fixed increments, then step forward.

    Re-evaluates after every simulated command against the first path
    point at least ``lookahead`` ahead. Heading ties at exactly 180
    degrees break to the left.
    """
    if not path.points:
        raise ValueError("path is empty")
    pts = path.points
    x, z, heading = pose.x, pose.z, pose.heading
    cmds: list[ControlCommand] = []
    idx = 0
    half_turn = turn_angle / 2.0 - 1e-12

    while len(cmds) < max_commands:
        while idx < len(pts) - 1 and math.hypot(pts[idx].x - x, pts[idx].z - z) < lookahead:
            idx += 1
        target = pts[idx]
        dist = math.hypot(target.x - x, target.z - z)
        if idx == len(pts) - 1 and dist < forward_step / 2.0:
            break

        err = normalize_angle(math.atan2(target.z - z, target.x - x) - heading)
        if err < -math.pi + 1e-12:
            err = math.pi  # exactly behind: break the tie to the left
        if abs(err) >= half_turn:
            if err > 0:
                cmds.append(ControlCommand.TURN_LEFT)
                heading = normalize_angle(heading + turn_angle)
            else:
                cmds.append(ControlCommand.TURN_RIGHT)
                heading = normalize_angle(heading - turn_angle)
        else:
            cmds.append(ControlCommand.MOVE_FORWARD)
            x += forward_step * math.cos(heading)
            z += forward_step * math.sin(heading)
    return cmds

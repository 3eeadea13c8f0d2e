"""Render a logged trajectory as a top-down raster image.

Legend: walls black on white free space, the driven trajectory as a red
line, recorded waypoints as blue dots, per-step navigation goals as green
crosses, and the agent's final pose as a red dot with a heading arrow.
"""

from __future__ import annotations

import math

from PIL import Image, ImageDraw

from .pipeline import TrajectoryLog, trajectory_poses
from .sim import World

WALL = (20, 20, 20)
FREE = (255, 255, 255)
TRAJECTORY = (220, 60, 60)
WAYPOINT = (60, 90, 220)
GOAL = (40, 160, 40)
AGENT = (220, 30, 30)


def render_replay(log: TrajectoryLog, world: World, out_path: str, scale: int = 6) -> None:
    ni, nj = world.walls.shape
    img = Image.new("RGB", (ni * scale, nj * scale), FREE)
    draw = ImageDraw.Draw(img)

    def to_px(x: float, z: float) -> tuple[float, float]:
        px = (x - world.origin.x) / world.resolution * scale
        py = (nj - (z - world.origin.z) / world.resolution) * scale
        return px, py

    for i in range(ni):
        for j in range(nj):
            if world.walls[i, j]:
                x0, y0 = i * scale, (nj - 1 - j) * scale
                draw.rectangle([x0, y0, x0 + scale - 1, y0 + scale - 1], fill=WALL)

    poses = trajectory_poses(log)
    if len(poses) > 1:
        draw.line([to_px(x, z) for x, z, _ in poses], fill=TRAJECTORY, width=max(1, scale // 3))

    r = scale * 0.7
    for step in log.steps:
        if step.get("goal"):
            gx, gy = to_px(*step["goal"])
            draw.line([gx - r, gy, gx + r, gy], fill=GOAL, width=2)
            draw.line([gx, gy - r, gx, gy + r], fill=GOAL, width=2)

    for step in log.steps:
        if "pose" in step:
            wx, wy = to_px(step["pose"][0], step["pose"][1])
            draw.ellipse([wx - r / 2, wy - r / 2, wx + r / 2, wy + r / 2], fill=WAYPOINT)

    fx, fz, heading = log.final_pose
    ax, ay = to_px(fx, fz)
    draw.ellipse([ax - r, ay - r, ax + r, ay + r], fill=AGENT)
    tip = to_px(fx + 0.45 * math.cos(heading), fz + 0.45 * math.sin(heading))
    draw.line([ax, ay, tip[0], tip[1]], fill=AGENT, width=max(2, scale // 3))

    img.save(out_path)

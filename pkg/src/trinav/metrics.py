"""Episode-level navigation metrics and cross-run aggregation.

- NE: geodesic distance (on the ground-truth world, not the agent's map)
  from the final pose to the goal.
- SR: the episode stopped deliberately and NE is strictly under the
  success radius. Running out of steps never counts as success.
- OSR: the closest point of the whole trajectory came within the radius.
- SPL: success * L / max(P, L) with L the ground-truth geodesic length
  and P the distance actually traveled.

Aggregation reports SR/OSR/SPL as percentages, NE in meters, each as
mean and sample (n-1) standard deviation across runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DataError
from .geometry import WorldPoint
from .pipeline import TrajectoryLog, trajectory_poses
from .sim import Episode, World, geodesic_distance

SUCCESS_RADIUS = 3.0


@dataclass
class EpisodeMetrics:
    episode_id: str
    ne: float
    success: bool
    oracle_success: bool
    spl: float
    path_length: float


@dataclass
class RunAggregate:
    """mean/std per metric over runs; SR, OSR and SPL in percent."""

    ne: tuple[float, float]
    osr: tuple[float, float]
    sr: tuple[float, float]
    spl: tuple[float, float]
    episode_count: int
    run_count: int

    def to_dict(self) -> dict:
        return {
            "episodes": self.episode_count,
            "runs": self.run_count,
            "ne": {"mean": self.ne[0], "std": self.ne[1]},
            "osr": {"mean": self.osr[0], "std": self.osr[1]},
            "sr": {"mean": self.sr[0], "std": self.sr[1]},
            "spl": {"mean": self.spl[0], "std": self.spl[1]},
        }


def episode_metrics(
    log: TrajectoryLog,
    episode: Episode,
    world: World,
    success_radius: float = SUCCESS_RADIUS,
) -> EpisodeMetrics:
    """Score one episode against ground truth."""
    if log.episode_id != episode.id:
        raise DataError(f"log is for {log.episode_id!r}, episode is {episode.id!r}")
    field = world.distance_field_to(episode.goal)

    fx, fz, _ = log.final_pose
    ne = world.field_value_at(field, WorldPoint(fx, fz))
    if not math.isfinite(ne):
        raise DataError(f"goal of {episode.id} unreachable from the final pose")

    closest = min(
        world.field_value_at(field, WorldPoint(x, z)) for x, z, _ in trajectory_poses(log)
    )
    success = log.termination == "stopped" and ne < success_radius
    oracle_success = closest < success_radius

    L = episode.gt_path_length
    P = log.path_length
    spl = (L / max(P, L)) if success else 0.0
    return EpisodeMetrics(
        episode_id=episode.id,
        ne=ne,
        success=success,
        oracle_success=oracle_success,
        spl=spl,
        path_length=P,
    )


def _mean_std(values: list[float]) -> tuple[float, float]:
    n = len(values)
    mean = sum(values) / n
    if n == 1:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var)


def aggregate(runs: list[list[EpisodeMetrics]]) -> RunAggregate:
    """Per-run episode means, then mean +/- sample std across runs."""
    if not runs or not runs[0]:
        raise DataError("need at least one run with at least one episode")
    ids = [sorted(m.episode_id for m in run) for run in runs]
    if any(run_ids != ids[0] for run_ids in ids[1:]):
        raise DataError("runs cover different episode sets")

    per_run = {"ne": [], "osr": [], "sr": [], "spl": []}
    for run in runs:
        n = len(run)
        per_run["ne"].append(sum(m.ne for m in run) / n)
        per_run["sr"].append(100.0 * sum(m.success for m in run) / n)
        per_run["osr"].append(100.0 * sum(m.oracle_success for m in run) / n)
        per_run["spl"].append(100.0 * sum(m.spl for m in run) / n)

    return RunAggregate(
        ne=_mean_std(per_run["ne"]),
        osr=_mean_std(per_run["osr"]),
        sr=_mean_std(per_run["sr"]),
        spl=_mean_std(per_run["spl"]),
        episode_count=len(runs[0]),
        run_count=len(runs),
    )


def format_table(agg: RunAggregate) -> str:
    """NE / OSR / SR / SPL columns as mean+/-std."""
    header = f"{'NE':>12} {'OSR':>12} {'SR':>12} {'SPL':>12}"
    cells = [
        f"{agg.ne[0]:.2f}±{agg.ne[1]:.2f}",
        f"{agg.osr[0]:.1f}±{agg.osr[1]:.1f}",
        f"{agg.sr[0]:.1f}±{agg.sr[1]:.1f}",
        f"{agg.spl[0]:.1f}±{agg.spl[1]:.1f}",
    ]
    row = " ".join(f"{c:>12}" for c in cells)
    return header + "\n" + row

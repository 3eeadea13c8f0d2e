"""Command-line entry points: generate, run, eval, replay.

Exit codes: 0 success, 2 usage/configuration error, 3 data error,
4 transport error. Credentials are never accepted as flags; HTTP clients
read them from the environment variable named in the config file, and a
missing credential fails the run before any episode starts.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import metrics as metrics_mod
from .client import HttpChatClient, UsageLedger, format_report, ledger_report
from .config import RunConfig, load_config
from .errors import ConfigError, DataError, TransportError, TrinavError
from .oracle import (
    AdversarialPlannerClient,
    ScriptedGrounderClient,
    ScriptedPlannerClient,
    WideBoxGrounderClient,
)
from .pipeline import run_episode, write_trajectories
from .replay import render_replay
from .sim import (
    DIFFICULTIES,
    Env,
    Episode,
    World,
    generate_episodes,
    load_episode_set,
    save_episode_set,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_TRANSPORT = 4


def _build_clients(cfg: RunConfig, env: Env):
    if cfg.planner == "oracle":
        planner = ScriptedPlannerClient(env, stop_radius=cfg.episode.success_radius)
    elif cfg.planner == "adversarial":
        planner = AdversarialPlannerClient(env, stop_radius=cfg.episode.success_radius)
    else:
        planner = HttpChatClient(cfg.planner_http)
    if cfg.grounder == "oracle":
        grounder = ScriptedGrounderClient(env)
    elif cfg.grounder == "widebox":
        grounder = WideBoxGrounderClient(env)
    else:
        grounder = HttpChatClient(cfg.grounder_http)
    return planner, grounder


def run_one_episode(episode: Episode, world: World, cfg: RunConfig, ledger: UsageLedger):
    env = Env(
        world,
        episode,
        forward_step=cfg.episode.forward_step,
        turn_angle=cfg.episode.turn_angle,
    )
    planner, grounder = _build_clients(cfg, env)
    return run_episode(env, cfg.episode, planner, grounder, ledger)


def _run_worker(args):
    episode, world, cfg = args
    ledger = UsageLedger()
    log = run_one_episode(episode, world, cfg, ledger)
    return log, ledger.records


def _cmd_generate(args) -> int:
    episodes, worlds = generate_episodes(args.seed, args.count, args.difficulty)
    os.makedirs(args.out, exist_ok=True)
    path = save_episode_set(args.out, episodes, worlds, args.seed, args.difficulty)
    print(f"wrote {len(episodes)} episode(s) to {path}")
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    episodes, worlds = load_episode_set(args.episodes)

    # fail fast on missing credentials before any episode runs
    if cfg.planner == "http":
        HttpChatClient(cfg.planner_http)
    if cfg.grounder == "http":
        HttpChatClient(cfg.grounder_http)

    os.makedirs(args.out, exist_ok=True)
    ledger = UsageLedger()
    for run_idx in range(args.runs):
        tasks = [(ep, worlds[ep.world_name], cfg) for ep in episodes]
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                results = list(pool.map(_run_worker, tasks))
            logs = []
            for log, records in results:
                logs.append(log)
                with ledger._lock:
                    ledger.records.extend(records)
        else:
            logs = [run_one_episode(ep, worlds[ep.world_name], cfg, ledger) for ep in episodes]
        out_path = os.path.join(args.out, f"run{run_idx}.jsonl")
        write_trajectories(out_path, logs)
        unrecoverable = sum(1 for l in logs if l.termination == "unrecoverable")
        note = f" ({unrecoverable} unrecoverable)" if unrecoverable else ""
        print(f"run {run_idx}: {len(logs)} episode(s) -> {out_path}{note}")

    report = ledger_report(ledger)
    with open(os.path.join(args.out, "usage_report.json"), "w") as f:
        json.dump(report, f, indent=1, sort_keys=True)
        f.write("\n")
    print(format_report(report))
    return EXIT_OK


def _cmd_eval(args) -> int:
    episodes, worlds = load_episode_set(args.episodes)
    by_id = {ep.id: ep for ep in episodes}
    runs = []
    for log_path in args.logs:
        from .pipeline import read_trajectories

        logs = read_trajectories(log_path)
        if not logs:
            raise DataError(f"log file {log_path} holds no episodes")
        run = []
        for log in logs:
            ep = by_id.get(log.episode_id)
            if ep is None:
                raise DataError(f"log references unknown episode {log.episode_id!r}")
            run.append(metrics_mod.episode_metrics(log, ep, worlds[ep.world_name]))
        runs.append(run)

    agg = metrics_mod.aggregate(runs)
    print(metrics_mod.format_table(agg))
    if args.out:
        with open(args.out, "w") as f:
            json.dump(agg.to_dict(), f, indent=1, sort_keys=True)
            f.write("\n")
        print(f"summary -> {args.out}")
    return EXIT_OK


def _cmd_replay(args) -> int:
    from .pipeline import read_trajectories

    episodes, worlds = load_episode_set(args.episodes)
    logs = {log.episode_id: log for log in read_trajectories(args.log)}
    log = logs.get(args.episode)
    if log is None:
        raise DataError(f"episode {args.episode!r} not present in {args.log}")
    ep = next((e for e in episodes if e.id == args.episode), None)
    if ep is None:
        raise DataError(f"episode {args.episode!r} not present in {args.episodes}")
    render_replay(log, worlds[ep.world_name], args.out)
    print(f"replay image -> {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="trinav", description="hierarchical navigation loop: generate, run, evaluate, replay"
    )
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a seeded episode set")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--difficulty", choices=DIFFICULTIES, default="corridor")
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=_cmd_generate)

    r = sub.add_parser("run", help="run the pipeline over an episode set")
    r.add_argument("--episodes", required=True, help="episodes.json path")
    r.add_argument("--config", default=None, help="run config file (INI)")
    r.add_argument("--runs", type=int, default=1)
    r.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    r.add_argument("--out", required=True, help="output directory")
    r.set_defaults(func=_cmd_run)

    e = sub.add_parser("eval", help="score trajectory logs against an episode set")
    e.add_argument("--episodes", required=True)
    e.add_argument("--out", default=None, help="optional JSON summary path")
    e.add_argument("logs", nargs="+", help="one JSONL per run")
    e.set_defaults(func=_cmd_eval)

    rp = sub.add_parser("replay", help="render one logged episode as an image")
    rp.add_argument("--episodes", required=True)
    rp.add_argument("--log", required=True)
    rp.add_argument("--episode", required=True, help="episode id")
    rp.add_argument("--out", required=True, help="output image path (PNG)")
    rp.set_defaults(func=_cmd_replay)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TransportError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except TrinavError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: declarative experiment configs in, reports out.

Commands: ``evaluate`` runs every (environment, policy) cohort of a config;
``optimize`` tunes each policy's search space before evaluating the winner;
``report`` compares stored runs; ``cache`` inspects or collects the episode
cache.  Exit codes: 0 success, 2 some tasks failed, 1 validation or system
error.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .core import SimulationSpec
from .errors import ConfigError, PomdpkitError
from .hyperopt import (
    CategoricalDomain,
    IntDomain,
    OptimizeBudget,
    RealDomain,
    SearchSpace,
    optimize_and_evaluate,
)
from .registry import DEFAULT_REGISTRY
from .rng import make_rng
from .taskman import (
    BackendSpec,
    EpisodeCache,
    TaskSet,
    execute,
    resolve_cache_dir,
    resolve_run_dir,
)


@dataclass
class PolicyEntry:
    id: str
    params: dict[str, Any] = field(default_factory=dict)
    search_space: dict[str, Any] | None = None
    budget: OptimizeBudget | None = None


@dataclass
class ExperimentConfig:
    experiment_name: str
    environment_id: str
    environment_params: dict[str, Any]
    belief_id: str
    belief_params: dict[str, Any]
    policies: list[PolicyEntry]
    num_episodes: int
    num_steps: int
    alpha: float
    seed: int
    backend: BackendSpec
    cache_dir: str | None = None
    run_dir: str | None = None


def _require(mapping: Mapping[str, Any], key: str, path: str):
    if key not in mapping:
        raise ConfigError(f"{path}.{key}: missing required field")
    return mapping[key]


def _as_mapping(value, path: str) -> dict:
    if not isinstance(value, Mapping):
        raise ConfigError(f"{path}: expected a mapping, got {type(value).__name__}")
    return dict(value)


def parse_config(raw: Mapping[str, Any]) -> ExperimentConfig:
    root = _as_mapping(raw, "config")
    env = _as_mapping(_require(root, "environment", "config"), "environment")
    belief = _as_mapping(root.get("belief", {"id": "weighted_pf"}), "belief")
    belief_params = _as_mapping(belief.get("params", {}), "belief.params")
    if "n_particles" in belief:
        belief_params["n_particles"] = int(belief["n_particles"])

    raw_policies = _require(root, "policies", "config")
    if not isinstance(raw_policies, list) or not raw_policies:
        raise ConfigError("config.policies: need a nonempty list of policy entries")
    policies = []
    for i, entry in enumerate(raw_policies):
        p = _as_mapping(entry, f"policies[{i}]")
        budget = None
        if "budget" in p:
            b = _as_mapping(p["budget"], f"policies[{i}].budget")
            try:
                budget = OptimizeBudget(
                    n_trials=int(_require(b, "n_trials", f"policies[{i}].budget")),
                    episodes_per_trial=int(_require(b, "episodes_per_trial", f"policies[{i}].budget")),
                    eval_episodes=int(_require(b, "eval_episodes", f"policies[{i}].budget")),
                )
            except ConfigError:
                raise
            except Exception as exc:
                raise ConfigError(f"policies[{i}].budget: {exc}") from exc
        policies.append(
            PolicyEntry(
                id=str(_require(p, "id", f"policies[{i}]")),
                params=_as_mapping(p.get("params", {}), f"policies[{i}].params"),
                search_space=(
                    _as_mapping(p["search_space"], f"policies[{i}].search_space")
                    if "search_space" in p
                    else None
                ),
                budget=budget,
            )
        )

    backend_raw = _as_mapping(root.get("backend", {"kind": "serial"}), "backend")
    try:
        backend = BackendSpec(
            kind=str(backend_raw.get("kind", "serial")),
            n_workers=int(backend_raw.get("n_workers", 1)),
        )
    except Exception as exc:
        raise ConfigError(f"config.backend: {exc}") from exc

    num_episodes = int(_require(root, "num_episodes", "config"))
    num_steps = int(_require(root, "num_steps", "config"))
    alpha = float(root.get("alpha", 0.05))
    if num_episodes < 1:
        raise ConfigError("config.num_episodes: must be positive")
    if num_steps < 1:
        raise ConfigError("config.num_steps: must be positive")
    if not 0.0 < alpha < 1.0:
        raise ConfigError("config.alpha: must lie in (0, 1)")

    return ExperimentConfig(
        experiment_name=str(root.get("experiment_name", "experiment")),
        environment_id=str(_require(env, "id", "environment")),
        environment_params=_as_mapping(env.get("params", {}), "environment.params"),
        belief_id=str(belief.get("id", "weighted_pf")),
        belief_params=belief_params,
        policies=policies,
        num_episodes=num_episodes,
        num_steps=num_steps,
        alpha=alpha,
        seed=int(root.get("seed", 0)),
        backend=backend,
        cache_dir=root.get("cache_dir"),
        run_dir=root.get("run_dir"),
    )


def config_to_mapping(cfg: ExperimentConfig) -> dict[str, Any]:
    """Inverse of parse_config; parse(emit(cfg)) == cfg field for field."""
    belief: dict[str, Any] = {"id": cfg.belief_id, "params": dict(cfg.belief_params)}
    if "n_particles" in belief["params"]:
        belief["n_particles"] = belief["params"].pop("n_particles")
    policies = []
    for p in cfg.policies:
        entry: dict[str, Any] = {"id": p.id, "params": dict(p.params)}
        if p.search_space is not None:
            entry["search_space"] = dict(p.search_space)
        if p.budget is not None:
            entry["budget"] = {
                "n_trials": p.budget.n_trials,
                "episodes_per_trial": p.budget.episodes_per_trial,
                "eval_episodes": p.budget.eval_episodes,
            }
        policies.append(entry)
    out = {
        "experiment_name": cfg.experiment_name,
        "environment": {"id": cfg.environment_id, "params": dict(cfg.environment_params)},
        "belief": belief,
        "policies": policies,
        "num_episodes": cfg.num_episodes,
        "num_steps": cfg.num_steps,
        "alpha": cfg.alpha,
        "seed": cfg.seed,
        "backend": {"kind": cfg.backend.kind, "n_workers": cfg.backend.n_workers},
    }
    if cfg.cache_dir is not None:
        out["cache_dir"] = cfg.cache_dir
    if cfg.run_dir is not None:
        out["run_dir"] = cfg.run_dir
    return out


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if raw is None:
        raise ConfigError(f"config {path} is empty")
    return parse_config(raw)


def parse_search_space(raw: Mapping[str, Any], path: str) -> SearchSpace:
    domains: dict[str, Any] = {}
    for name, spec in raw.items():
        p = _as_mapping(spec, f"{path}.{name}")
        kind = p.get("type")
        try:
            if kind == "real":
                domains[name] = RealDomain(
                    lo=float(_require(p, "lo", f"{path}.{name}")),
                    hi=float(_require(p, "hi", f"{path}.{name}")),
                    scale=str(p.get("scale", "linear")),
                )
            elif kind == "int":
                domains[name] = IntDomain(
                    lo=int(_require(p, "lo", f"{path}.{name}")),
                    hi=int(_require(p, "hi", f"{path}.{name}")),
                )
            elif kind == "categorical":
                domains[name] = CategoricalDomain(tuple(_require(p, "choices", f"{path}.{name}")))
            else:
                raise ConfigError(
                    f"{path}.{name}.type: expected real, int, or categorical, got {kind!r}"
                )
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(f"{path}.{name}: {exc}") from exc
    return SearchSpace(domains)


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if args.seed is not None:
        cfg.seed = args.seed
    if args.workers is not None:
        cfg.backend = BackendSpec(
            kind="worker_pool" if args.workers > 1 else "serial", n_workers=args.workers
        )
    if args.cache_dir is not None:
        cfg.cache_dir = args.cache_dir
    if args.run_dir is not None:
        cfg.run_dir = args.run_dir
    cfg.cache_dir = str(resolve_cache_dir(cfg.cache_dir))
    cfg.run_dir = str(resolve_run_dir(cfg.run_dir))
    return cfg


def _expand_specs(cfg: ExperimentConfig, entry: PolicyEntry, params: dict[str, Any]):
    env_params = DEFAULT_REGISTRY.resolve_environment_params(
        cfg.environment_id, cfg.environment_params
    )
    policy_params = DEFAULT_REGISTRY.resolve_policy_params(entry.id, params)
    # fail fast on unknown policy ids / bad params before any episode runs
    env = DEFAULT_REGISTRY.build_environment(cfg.environment_id, env_params)
    DEFAULT_REGISTRY.build_policy(entry.id, env, policy_params)
    return [
        SimulationSpec(
            environment_id=cfg.environment_id,
            environment_params=env_params,
            policy_id=entry.id,
            policy_params=policy_params,
            belief_id=cfg.belief_id,
            belief_params=cfg.belief_params,
            seed=cfg.seed,
            num_steps=cfg.num_steps,
            episode_index=i,
        )
        for i in range(cfg.num_episodes)
    ]


_STATS_COLUMNS = (
    ("cohort", 28), ("n", 6), ("mean", 10), ("std", 10), ("ci_low", 10), ("ci_high", 10),
    ("var", 10), ("cvar", 10), ("goal%", 7), ("viol%", 7),
)


def _print_stats(stats: Mapping[str, Any]) -> None:
    header = "".join(name.ljust(width) for name, width in _STATS_COLUMNS)
    print(header)
    print("-" * len(header))
    for label in sorted(stats):
        s = stats[label]
        cells = (
            label, str(s.n_episodes), f"{s.mean_return:.3f}", f"{s.std_return:.3f}",
            f"{s.ci_low:.3f}", f"{s.ci_high:.3f}", f"{s.var_alpha:.3f}", f"{s.cvar_alpha:.3f}",
            f"{100 * s.goal_rate:.1f}", f"{100 * s.violation_rate:.1f}",
        )
        print("".join(c.ljust(w) for c, (_n, w) in zip(cells, _STATS_COLUMNS)))


def cmd_evaluate(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    specs = []
    for entry in cfg.policies:
        specs.extend(_expand_specs(cfg, entry, entry.params))
    task_set = TaskSet(
        specs=specs,
        experiment_name=cfg.experiment_name,
        backend=cfg.backend,
        cache_dir=cfg.cache_dir,
        run_dir=cfg.run_dir,
    )
    result = execute(
        task_set,
        alpha=cfg.alpha,
        quiet=args.quiet,
        extra_params={"config": config_to_mapping(cfg)},
    )
    if not args.quiet:
        _print_stats(result.stats)
    print(f"run_id: {cfg.experiment_name}/{result.run_id}")
    if result.failures:
        print(f"{len(result.failures)} task(s) failed", file=sys.stderr)
        return 2
    return 0


def cmd_optimize(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    rng = make_rng(cfg.seed)
    exit_code = 0
    for i, entry in enumerate(cfg.policies):
        if entry.search_space is None or entry.budget is None:
            raise ConfigError(f"policies[{i}]: optimize needs both search_space and budget")
        space = parse_search_space(entry.search_space, f"policies[{i}].search_space")
        result = optimize_and_evaluate(
            cfg.environment_id,
            cfg.environment_params,
            entry.id,
            space,
            entry.budget,
            rng,
            belief_id=cfg.belief_id,
            belief_params=cfg.belief_params,
            fixed_policy_params=entry.params,
            seed=cfg.seed,
            num_steps=cfg.num_steps,
            alpha=cfg.alpha,
            backend=cfg.backend,
            cache_dir=cfg.cache_dir,
            run_dir=cfg.run_dir,
            experiment_name=f"{cfg.experiment_name}-{entry.id}",
        )
        if not args.quiet:
            print(f"policy {entry.id}: best trial #{result.best_trial.trial_index} "
                  f"objective {result.best_trial.objective_value:.4f}")
            for k, v in sorted(result.best_trial.params.items()):
                print(f"  {k} = {v}")
            _print_stats({f"{cfg.environment_id}/{entry.id}": result.eval_stats})
        if result.eval_run_id is not None:
            _write_trials_table(
                Path(cfg.run_dir) / f"{cfg.experiment_name}-{entry.id}" / result.eval_run_id,
                result.history,
            )
            print(f"run_id: {cfg.experiment_name}-{entry.id}/{result.eval_run_id}")
    return exit_code


def _write_trials_table(run_path: Path, history) -> None:
    if not run_path.is_dir():
        return
    names = sorted({name for trial in history for name in trial.params})
    with open(run_path / "trials.tsv", "w") as fh:
        fh.write("\t".join(["trial_index", *names, "objective"]) + "\n")
        for t in history:
            cells = [str(t.trial_index)]
            cells += [repr(t.params[n]) if n in t.params else "" for n in names]
            value = t.objective_value
            cells.append("-inf" if value == -math.inf else repr(value))
            fh.write("\t".join(cells) + "\n")


def cmd_report(args) -> int:
    run_root = resolve_run_dir(args.run_dir)
    if not run_root.is_dir():
        print(f"no run store at {run_root}", file=sys.stderr)
        return 1
    rows = []
    for exp_dir in sorted(run_root.iterdir()):
        if not exp_dir.is_dir():
            continue
        if args.experiment and exp_dir.name != args.experiment:
            continue
        for run in sorted(p for p in exp_dir.iterdir() if p.is_dir()):
            metrics = run / "metrics.tsv"
            if not metrics.is_file():
                continue
            lines = metrics.read_text().splitlines()
            header = lines[0].split("\t")
            for line in lines[1:]:
                row = dict(zip(header, line.split("\t")))
                rows.append((exp_dir.name, run.name, row))
    if not rows:
        print("no runs found", file=sys.stderr)
        return 1
    print(f"{'experiment':24}{'run':28}{'cohort':26}{'n':>5} {'mean':>10} {'cvar':>10} "
          f"{'goal%':>7} {'viol%':>7}")
    for exp, run, row in rows:
        print(
            f"{exp:24}{run:28}{row['cohort']:26}{row['n_episodes']:>5} "
            f"{float(row['mean_return']):>10.3f} {float(row['cvar_alpha']):>10.3f} "
            f"{100 * float(row['goal_rate']):>7.1f} {100 * float(row['violation_rate']):>7.1f}"
        )
    if args.histogram:
        for exp, run, _row in rows[:1]:
            _print_histogram(run_root / exp / run / "episodes.tsv")
    return 0


def _print_histogram(episodes_path: Path, bins: int = 20, width: int = 50) -> None:
    if not episodes_path.is_file():
        return
    lines = episodes_path.read_text().splitlines()
    header = lines[0].split("\t")
    idx = header.index("discounted_return")
    values = [float(line.split("\t")[idx]) for line in lines[1:]]
    if not values:
        return
    lo, hi = min(values), max(values)
    span = (hi - lo) or 1.0
    counts = [0] * bins
    for v in values:
        counts[min(int((v - lo) / span * bins), bins - 1)] += 1
    peak = max(counts)
    print(f"\nreturn histogram ({len(values)} episodes)")
    for i, count in enumerate(counts):
        left = lo + i * span / bins
        bar = "#" * (count * width // peak if peak else 0)
        print(f"{left:>10.2f} | {bar} {count}")


def cmd_cache(args) -> int:
    cache = EpisodeCache(resolve_cache_dir(args.cache_dir))
    if args.cache_command == "stats":
        stats = cache.stats()
        print(f"entries: {stats['entries']}")
        print(f"bytes: {stats['bytes']}")
        print(f"quarantined: {stats['quarantined']}")
        return 0
    removed = cache.gc(args.older_than)
    print(f"removed {removed} entries")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pomdpkit", description="POMDP planning and benchmarking toolkit"
    )
    parser.add_argument("--cache-dir", default=None, help="episode cache directory")
    parser.add_argument("--run-dir", default=None, help="run store directory")
    parser.add_argument("--workers", type=int, default=None, help="override backend worker count")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--quiet", action="store_true", help="suppress tables and progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("evaluate", help="run a direct-evaluation config")
    p_eval.add_argument("config")
    p_eval.set_defaults(func=cmd_evaluate)

    p_opt = sub.add_parser("optimize", help="run an optimize-and-evaluate config")
    p_opt.add_argument("config")
    p_opt.set_defaults(func=cmd_optimize)

    p_rep = sub.add_parser("report", help="compare stored runs")
    p_rep.add_argument("--experiment", default=None, help="filter by experiment name")
    p_rep.add_argument("--histogram", action="store_true", help="text histogram of returns")
    p_rep.set_defaults(func=cmd_report)

    p_cache = sub.add_parser("cache", help="episode cache tooling")
    cache_sub = p_cache.add_subparsers(dest="cache_command", required=True)
    cache_sub.add_parser("stats")
    p_gc = cache_sub.add_parser("gc")
    p_gc.add_argument("--older-than", type=float, default=0.0, help="age threshold in seconds")
    p_cache.set_defaults(func=cmd_cache)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except PomdpkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Fault-tolerant execution of simulation task sets.

Every episode is keyed by the SHA-256 hash of its spec.  Completed episodes
are written to a content-addressed on-disk cache with an atomic
write-to-temp-then-rename discipline, so readers only ever see whole entries
and interrupted campaigns resume exactly where they stopped.  Execution
happens through a pluggable backend (serial, or a local process pool); other
schedulers can be added by mapping independent tasks to results.

Results are summarized per (environment, policy) cohort and written to a
file-based run store: a params file, a metrics table, a per-episode results
table, and one plain-text trajectory dump per episode.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from .core import SimulationSpec, canonical_bytes, spec_hash
from .errors import ContractViolationError, PomdpkitError
from .evaluation import AggregateStats, EpisodeRecord, aggregate, run_episode

CACHE_DIR_ENV = "POMDPKIT_CACHE_DIR"
RUN_DIR_ENV = "POMDPKIT_RUN_DIR"
DEFAULT_CACHE_DIR = ".pomdpkit_cache"
DEFAULT_RUN_DIR = "runs"

TRAJECTORY_HEADER = "step\taction\tobservation\treward\tsafety_event"

EPISODE_COLUMNS = (
    "spec_hash",
    "cohort",
    "discounted_return",
    "undiscounted_return",
    "steps_taken",
    "goal_reached",
    "safety_event_count",
    "belief_resets",
    "wall_time",
)

METRIC_COLUMNS = (
    "cohort",
    "n_episodes",
    "mean_return",
    "std_return",
    "ci_low",
    "ci_high",
    "var_alpha",
    "cvar_alpha",
    "alpha",
    "goal_rate",
    "violation_rate",
    "total_violations",
)


def resolve_cache_dir(explicit: str | os.PathLike | None = None) -> Path:
    return Path(explicit or os.environ.get(CACHE_DIR_ENV, DEFAULT_CACHE_DIR))


def resolve_run_dir(explicit: str | os.PathLike | None = None) -> Path:
    return Path(explicit or os.environ.get(RUN_DIR_ENV, DEFAULT_RUN_DIR))


@dataclass(frozen=True)
class BackendSpec:
    kind: str = "serial"
    n_workers: int = 1

    def __post_init__(self) -> None:
        if self.kind not in ("serial", "worker_pool"):
            raise ContractViolationError(f"unknown backend {self.kind!r}")
        if self.kind == "worker_pool" and self.n_workers < 1:
            raise ContractViolationError("worker_pool needs at least one worker")


@dataclass
class TaskSet:
    specs: list[SimulationSpec]
    experiment_name: str = "experiment"
    backend: BackendSpec = field(default_factory=BackendSpec)
    cache_dir: str | os.PathLike | None = None
    run_dir: str | os.PathLike | None = None


# ---------------------------------------------------------------------------
# Content-addressed episode cache
# ---------------------------------------------------------------------------

class EpisodeCache:
    """One JSON entry per completed episode, fanned out over 2-hex-char dirs.

    Entries become visible only through an atomic rename, and every read
    verifies the embedded key and payload checksum; anything torn or
    mismatched is moved to ``quarantine/`` and treated as a miss.
    """

    def __init__(self, root: str | os.PathLike | None = None) -> None:
        self.root = resolve_cache_dir(root)

    def _entry_path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def _quarantine_dir(self) -> Path:
        return self.root / "quarantine"

    def get(self, key: str) -> EpisodeRecord | None:
        path = self._entry_path(key)
        try:
            raw = path.read_bytes()
        except OSError:
            return None
        try:
            payload = json.loads(raw)
            if payload["key"] != key:
                raise ValueError("key mismatch")
            record = payload["record"]
            digest = hashlib.sha256(canonical_bytes(record)).hexdigest()
            if digest != payload["checksum"]:
                raise ValueError("checksum mismatch")
            return EpisodeRecord.from_dict(record)
        except (ValueError, KeyError, TypeError):
            self._quarantine(path)
            return None

    def _quarantine(self, path: Path) -> None:
        qdir = self._quarantine_dir()
        qdir.mkdir(parents=True, exist_ok=True)
        target = qdir / f"{path.name}.{time.time_ns()}.bad"
        try:
            os.replace(path, target)
        except OSError:
            pass

    def put(self, key: str, record: EpisodeRecord) -> None:
        path = self._entry_path(key)
        if path.exists():
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        record_dict = record.to_dict()
        payload = {
            "key": key,
            "checksum": hashlib.sha256(canonical_bytes(record_dict)).hexdigest(),
            "record": record_dict,
        }
        data = json.dumps(payload, sort_keys=True).encode("utf-8")
        tmp = path.parent / f".tmp-{key}-{os.getpid()}-{time.time_ns()}"
        try:
            with open(tmp, "wb") as fh:
                fh.write(data)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
        finally:
            if tmp.exists():
                try:
                    os.unlink(tmp)
                except OSError:
                    pass

    def stats(self) -> dict[str, int]:
        entries = 0
        total_bytes = 0
        if self.root.is_dir():
            for sub in self.root.iterdir():
                if sub.is_dir() and len(sub.name) == 2:
                    for f in sub.glob("*.json"):
                        entries += 1
                        total_bytes += f.stat().st_size
        qdir = self._quarantine_dir()
        quarantined = sum(1 for _ in qdir.iterdir()) if qdir.is_dir() else 0
        return {"entries": entries, "bytes": total_bytes, "quarantined": quarantined}

    def gc(self, older_than_seconds: float) -> int:
        """Delete completed entries older than the threshold; returns the count."""
        cutoff = time.time() - older_than_seconds
        removed = 0
        if not self.root.is_dir():
            return 0
        for sub in self.root.iterdir():
            if sub.is_dir() and len(sub.name) == 2:
                for f in list(sub.glob("*.json")):
                    try:
                        if f.stat().st_mtime <= cutoff:
                            f.unlink()
                            removed += 1
                    except OSError:
                        pass
        return removed


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------

def cohort_key(spec: SimulationSpec) -> bytes:
    """Cohort identity: everything about the spec except seed and episode index."""
    m = spec.as_mapping()
    m.pop("seed")
    m.pop("episode_index")
    return canonical_bytes(m)


def cohort_labels(specs: Sequence[SimulationSpec]) -> dict[bytes, str]:
    labels: dict[bytes, str] = {}
    used: dict[str, int] = {}
    for spec in specs:
        key = cohort_key(spec)
        if key in labels:
            continue
        base = f"{spec.environment_id}/{spec.policy_id}"
        count = used.get(base, 0)
        used[base] = count + 1
        labels[key] = base if count == 0 else f"{base}#{count + 1}"
    return labels


def _run_and_cache(spec_mapping: dict, cache_root: str) -> tuple[str, str, Any]:
    """Worker entry point: compute one episode and persist it before returning."""
    from .registry import DEFAULT_REGISTRY

    spec = SimulationSpec.from_mapping(spec_mapping)
    key = spec_hash(spec)
    cache = EpisodeCache(cache_root)
    cached = cache.get(key)
    if cached is not None:
        return ("ok", key, cached.to_dict())
    try:
        record = run_episode(spec, DEFAULT_REGISTRY)
    except Exception as exc:  # failed tasks are reported, never cached
        return ("err", key, f"{type(exc).__name__}: {exc}")
    try:
        cache.put(key, record)
    except OSError as exc:
        return ("err", key, f"cache write failed: {exc}")
    return ("ok", key, record.to_dict())


@dataclass
class ExecutionResult:
    records: list[EpisodeRecord]
    stats: dict[str, AggregateStats]
    failures: list[tuple[str, str]]
    n_cache_hits: int
    n_executed: int
    run_id: str | None = None


def execute(
    task_set: TaskSet,
    alpha: float = 0.05,
    registry=None,
    quiet: bool = True,
    extra_params: Mapping[str, Any] | None = None,
) -> ExecutionResult:
    """Run every spec in the task set, reusing cached episodes.

    Failed tasks are collected and reported; the call raises only when every
    task failed.  Records come back in task-set order regardless of execution
    order, and per-cohort statistics are aggregated at the given alpha.
    """
    specs = task_set.specs
    if not specs:
        raise ContractViolationError("task set is empty")
    hashes = [spec_hash(s) for s in specs]
    if len(set(hashes)) != len(hashes):
        raise ContractViolationError("task set contains duplicate simulation specs")

    cache = EpisodeCache(task_set.cache_dir)
    done: dict[str, EpisodeRecord] = {}
    pending: list[tuple[SimulationSpec, str]] = []
    for spec, key in zip(specs, hashes):
        record = cache.get(key)
        if record is not None:
            done[key] = record
        else:
            pending.append((spec, key))
    n_hits = len(done)

    failures: list[tuple[str, str]] = []
    backend = task_set.backend
    if pending:
        if backend.kind == "serial" or backend.n_workers == 1:
            outcomes = (
                _run_and_cache(spec.as_mapping(), str(cache.root)) for spec, _key in pending
            )
            for status, key, payload in outcomes:
                _absorb(status, key, payload, done, failures)
        else:
            with ProcessPoolExecutor(max_workers=backend.n_workers) as pool:
                futures = [
                    pool.submit(_run_and_cache, spec.as_mapping(), str(cache.root))
                    for spec, _key in pending
                ]
                for fut in as_completed(futures):
                    status, key, payload = fut.result()
                    _absorb(status, key, payload, done, failures)

    if len(failures) == len(specs):
        raise PomdpkitError(
            f"every task in {task_set.experiment_name!r} failed; first error: {failures[0][1]}"
        )

    ordered = [done[key] for key in hashes if key in done]
    labels = cohort_labels(specs)
    by_cohort: dict[str, list[EpisodeRecord]] = {}
    cohort_of_hash: dict[str, str] = {}
    for spec, key in zip(specs, hashes):
        label = labels[cohort_key(spec)]
        cohort_of_hash[key] = label
        if key in done:
            by_cohort.setdefault(label, []).append(done[key])
    stats = {label: aggregate(records, alpha) for label, records in by_cohort.items() if records}

    run_id = None
    if task_set.run_dir is not None and ordered:
        params = dict(extra_params or {})
        params.setdefault("experiment_name", task_set.experiment_name)
        params.setdefault("alpha", alpha)
        params.setdefault("backend", backend.kind)
        run_id = run_store_write(
            task_set.run_dir,
            task_set.experiment_name,
            params,
            ordered,
            stats,
            cohorts={h: cohort_of_hash[h] for h in hashes},
            failures=failures,
        )
    if not quiet:
        print(
            f"{task_set.experiment_name}: {len(ordered)} episodes "
            f"({n_hits} cached, {len(specs) - n_hits - len(failures)} executed, {len(failures)} failed)"
        )
    return ExecutionResult(
        records=ordered,
        stats=stats,
        failures=failures,
        n_cache_hits=n_hits,
        n_executed=len(specs) - n_hits - len(failures),
        run_id=run_id,
    )


def _absorb(status, key, payload, done, failures) -> None:
    if status == "ok":
        done[key] = EpisodeRecord.from_dict(payload)
    else:
        failures.append((key, payload))


# ---------------------------------------------------------------------------
# File-based run store
# ---------------------------------------------------------------------------

def _flatten(prefix: str, value: Any, out: dict[str, Any]) -> None:
    if isinstance(value, Mapping):
        for k in sorted(value):
            _flatten(f"{prefix}.{k}" if prefix else str(k), value[k], out)
    else:
        out[prefix] = value


def _render(value: Any) -> str:
    if isinstance(value, str):
        return value
    return canonical_bytes(value).decode("utf-8")


def run_store_write(
    run_dir: str | os.PathLike,
    experiment_name: str,
    params: Mapping[str, Any],
    records: Sequence[EpisodeRecord],
    stats: Mapping[str, AggregateStats],
    cohorts: Mapping[str, str] | None = None,
    failures: Sequence[tuple[str, str]] = (),
) -> str:
    """Persist one run: params, metrics, per-episode table, trajectory dumps.

    Returns the run id (``<timestamp>-<short content hash>``, suffixed on
    collision).  Refuses an empty record list, mirroring aggregation.
    """
    if not records:
        raise ValueError("refusing to write a run with no episode records")
    root = resolve_run_dir(run_dir) / experiment_name
    root.mkdir(parents=True, exist_ok=True)
    content = hashlib.sha256("".join(r.spec_hash for r in records).encode()).hexdigest()[:8]
    base = f"{time.strftime('%Y%m%d-%H%M%S')}-{content}"
    run_id = base
    suffix = 0
    while (root / run_id).exists():
        suffix += 1
        run_id = f"{base}-{suffix}"
    out = root / run_id
    out.mkdir()

    flat: dict[str, Any] = {}
    _flatten("", dict(params), flat)
    with open(out / "params.txt", "w") as fh:
        for k in sorted(flat):
            fh.write(f"{k}={_render(flat[k])}\n")

    with open(out / "metrics.tsv", "w") as fh:
        fh.write("\t".join(METRIC_COLUMNS) + "\n")
        for label in sorted(stats):
            s = stats[label]
            row = (
                label, s.n_episodes, s.mean_return, s.std_return, s.ci_low, s.ci_high,
                s.var_alpha, s.cvar_alpha, s.alpha, s.goal_rate, s.violation_rate,
                s.total_violations,
            )
            fh.write("\t".join(_render(v) for v in row) + "\n")

    cohorts = cohorts or {}
    with open(out / "episodes.tsv", "w") as fh:
        fh.write("\t".join(EPISODE_COLUMNS) + "\n")
        for r in records:
            row = (
                r.spec_hash, cohorts.get(r.spec_hash, ""), r.discounted_return,
                r.undiscounted_return, r.steps_taken, r.goal_reached,
                r.safety_event_count, r.belief_resets, r.wall_time,
            )
            fh.write("\t".join(_render(v) for v in row) + "\n")

    traj_dir = out / "trajectories"
    traj_dir.mkdir()
    for r in records:
        with open(traj_dir / f"{r.spec_hash}.txt", "w") as fh:
            fh.write(TRAJECTORY_HEADER + "\n")
            for i, step in enumerate(r.per_step):
                fh.write(
                    f"{i}\t{step.action}\t{step.observation}\t"
                    f"{_render(step.reward)}\t{_render(step.safety_event)}\n"
                )

    if failures:
        with open(out / "failures.tsv", "w") as fh:
            fh.write("spec_hash\terror\n")
            for key, message in failures:
                fh.write(f"{key}\t{message}\n")
    return run_id

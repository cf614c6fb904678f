"""Experiment orchestration: YAML configs, multi-seed sweeps, CSV artifacts.

Each (mode, seed) run writes into its own directory:

    <out>/<mode>/seed_<n>/
        config.yaml     exact resolved config used (reproducibility contract)
        progress.csv    one diagnostics row per update, streamed incrementally
        meta.json       wall-clock metadata; its presence marks completion

Re-running a sweep skips any run whose directory is complete and whose
snapshot matches the requested config, so interrupted sweeps resume per
seed. CSV contents are byte-deterministic for a given (config, seed).
"""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from .advantage import GammaSet
from .diagnostics import DiagnosticsRecord, ReliabilitySummary, reliability_summary
from .envs import make_env
from .ppo import ACTOR_MODES, PpoHyper, Trainer

OUTPUT_ROOT_ENV = "GAMMAROUTE_OUT"
RELIABILITY_WINDOW = 0.1

CSV_BASE_COLUMNS = ("update", "mean_return", "hack_rate", "router_entropy")
CSV_TAIL_COLUMNS = ("long_adv_var", "policy_entropy", "diverged")


def csv_columns(n_heads: int) -> tuple:
    heads = tuple(f"w_mean_{i}" for i in range(n_heads))
    return CSV_BASE_COLUMNS + heads + CSV_TAIL_COLUMNS


@dataclass(frozen=True)
class TrainConfig:
    """Full description of one experiment (or sweep of modes x seeds)."""

    env_name: str = "mini_lander"
    env_params: dict = field(default_factory=dict)
    actor_mode: str = "attention"
    modes: tuple = ()            # sweep targets; empty means (actor_mode,)
    gammas: GammaSet = field(default_factory=GammaSet)
    ppo: PpoHyper = field(default_factory=PpoHyper)
    tau: float = 1.0
    td_error_refresh: str = "per_rollout"
    seeds: tuple = (0, 1, 2, 3, 4)
    out_dir: str = "runs"

    def __post_init__(self):
        if self.actor_mode not in ACTOR_MODES:
            raise ValueError(f"unknown actor mode {self.actor_mode!r}")
        for m in self.modes:
            if m not in ACTOR_MODES:
                raise ValueError(f"unknown sweep mode {m!r}")
        if self.td_error_refresh != "per_rollout":
            raise ValueError("only per-rollout TD-error refresh is supported")
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "env_params", dict(self.env_params))

    @property
    def sweep_modes(self) -> tuple:
        return self.modes if self.modes else (self.actor_mode,)

    def resolved_out_dir(self) -> Path:
        out = Path(self.out_dir)
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if root and not out.is_absolute():
            return Path(root) / out
        return out

    def to_dict(self) -> dict:
        return {
            "env": {"name": self.env_name, "params": dict(self.env_params)},
            "actor_mode": self.actor_mode,
            "modes": list(self.modes),
            "gammas": list(self.gammas.gammas),
            "tau": self.tau,
            "td_error_refresh": self.td_error_refresh,
            "seeds": list(self.seeds),
            "out_dir": str(self.out_dir),
            "ppo": {
                "clip_eps": self.ppo.clip_eps,
                "rollout_len": self.ppo.rollout_len,
                "epochs": self.ppo.epochs,
                "minibatch": self.ppo.minibatch,
                "entropy_coef": self.ppo.entropy_coef,
                "lr_actor": self.ppo.lr_actor,
                "lr_critic": self.ppo.lr_critic,
                "lr_router": self.ppo.lr_router,
                "lambda_aux": self.ppo.lambda_aux,
                "gae_lambda": self.ppo.gae_lambda,
                "updates": self.ppo.updates,
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        data = dict(data)
        env = data.get("env", {})
        ppo_section = data.get("ppo", {})
        return cls(
            env_name=env.get("name", "mini_lander"),
            env_params=env.get("params") or {},
            actor_mode=data.get("actor_mode", "attention"),
            modes=tuple(data.get("modes") or ()),
            gammas=GammaSet(tuple(data["gammas"])) if "gammas" in data else GammaSet(),
            ppo=PpoHyper(**ppo_section),
            tau=float(data.get("tau", 1.0)),
            td_error_refresh=data.get("td_error_refresh", "per_rollout"),
            seeds=tuple(data.get("seeds", (0, 1, 2, 3, 4))),
            out_dir=data.get("out_dir", "runs"),
        )

    def save(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=True))

    @classmethod
    def load(cls, path) -> "TrainConfig":
        return cls.from_dict(yaml.safe_load(Path(path).read_text()))


@dataclass(frozen=True)
class RunArtifact:
    """Pointers into one completed (mode, seed) run directory."""

    mode: str
    seed: int
    run_dir: Path

    @property
    def csv_path(self) -> Path:
        return self.run_dir / "progress.csv"

    @property
    def config_path(self) -> Path:
        return self.run_dir / "config.yaml"

    @property
    def meta_path(self) -> Path:
        return self.run_dir / "meta.json"

    def records(self) -> dict:
        return read_records(self.csv_path)

    def meta(self) -> dict:
        return json.loads(self.meta_path.read_text())


def _fmt(value) -> str:
    if value is None:
        return "nan"
    return repr(float(value))


def record_to_row(record: DiagnosticsRecord) -> list:
    row = [str(record.update), _fmt(record.mean_return), _fmt(record.hack_rate),
           _fmt(record.router_entropy)]
    row.extend(_fmt(w) for w in record.w_mean)
    row.extend([_fmt(record.long_adv_var), _fmt(record.policy_entropy),
                "1" if record.diverged else "0"])
    return row


def read_records(csv_path) -> dict:
    """Parse a progress.csv into {column: float array} ('update' as ints)."""
    csv_path = Path(csv_path)
    with csv_path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [line for line in reader if line]
    columns = {}
    for j, name in enumerate(header):
        vals = [row[j] for row in rows]
        if name == "update":
            columns[name] = np.array([int(v) for v in vals], dtype=np.int64)
        elif name == "diverged":
            columns[name] = np.array([v == "1" for v in vals], dtype=bool)
        else:
            columns[name] = np.array([float(v) for v in vals])
    return columns


def _run_snapshot(config: TrainConfig, mode: str, seed: int) -> TrainConfig:
    """The exact single-run config a (mode, seed) cell trains under."""
    return replace(config, actor_mode=mode, modes=(), seeds=(seed,))


def _is_complete(run_dir: Path) -> bool:
    return (run_dir / "meta.json").exists() and (run_dir / "progress.csv").exists()


def _snapshot_matches(run_dir: Path, snapshot: TrainConfig) -> bool:
    try:
        existing = TrainConfig.load(run_dir / "config.yaml")
    except (OSError, ValueError, KeyError, TypeError, yaml.YAMLError):
        return False
    return existing.to_dict() == snapshot.to_dict()


def run_single(config: TrainConfig, mode: str, seed: int) -> RunArtifact:
    """Train one (mode, seed) cell, or reuse its directory if already done."""
    run_dir = config.resolved_out_dir() / mode / f"seed_{seed}"
    snapshot = _run_snapshot(config, mode, seed)
    artifact = RunArtifact(mode=mode, seed=seed, run_dir=run_dir)

    if _is_complete(run_dir) and _snapshot_matches(run_dir, snapshot):
        return artifact

    run_dir.mkdir(parents=True, exist_ok=True)
    for stale in ("progress.csv", "meta.json"):
        try:
            (run_dir / stale).unlink()
        except FileNotFoundError:
            pass
    snapshot.save(run_dir / "config.yaml")

    env = make_env(config.env_name, config.env_params)
    trainer = Trainer(env, mode, gammas=config.gammas, hyper=config.ppo,
                      tau=config.tau, seed=seed)

    started = datetime.now(timezone.utc)
    t0 = time.monotonic()
    diverged = False
    n_rows = 0
    with (run_dir / "progress.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(csv_columns(trainer.n_heads))

        def on_record(record):
            nonlocal diverged, n_rows
            writer.writerow(record_to_row(record))
            fh.flush()
            n_rows += 1
            diverged = diverged or record.diverged

        trainer.run(on_record=on_record)

    meta = {
        "mode": mode,
        "seed": seed,
        "updates_recorded": n_rows,
        "diverged": diverged,
        "started_at": started.isoformat(),
        "wall_clock_seconds": time.monotonic() - t0,
    }
    (run_dir / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    return artifact


def _write_condition_summary(config: TrainConfig, mode: str, artifacts: list) -> None:
    curves, diverged = [], []
    for art in artifacts:
        records = art.records()
        curves.append(records["mean_return"])
        diverged.append(bool(records["diverged"].any()))
    summary = reliability_summary(curves, RELIABILITY_WINDOW, diverged)
    payload = {
        "mode": mode,
        "window_fraction": RELIABILITY_WINDOW,
        "per_seed": list(summary.per_seed),
        "mean": summary.mean,
        "std": summary.std,
        "worst": summary.worst,
        "diverged": list(summary.diverged),
    }
    path = config.resolved_out_dir() / mode / "summary.json"
    path.write_text(json.dumps(payload, indent=2) + "\n")


def run_experiment(config: TrainConfig, seed: int | None = None) -> list:
    """Run config.actor_mode for every seed (or one), writing artifacts.

    Completed seeds whose snapshots match are skipped, so an interrupted
    sweep picks up where it stopped.
    """
    seeds = config.seeds if seed is None else (seed,)
    artifacts = [run_single(config, config.actor_mode, s) for s in seeds]
    if artifacts and seed is None:
        _write_condition_summary(config, config.actor_mode, artifacts)
    return artifacts


def sweep(config: TrainConfig) -> dict:
    """All seeds x all listed modes; returns {mode: [RunArtifact, ...]}."""
    out = {}
    for mode in config.sweep_modes:
        mode_config = replace(config, actor_mode=mode)
        out[mode] = run_experiment(mode_config)
    return out


def condition_summary(artifacts: list, window_fraction: float = RELIABILITY_WINDOW) -> ReliabilitySummary:
    """Reliability statistics for one condition's artifacts."""
    curves, diverged = [], []
    for art in artifacts:
        records = art.records()
        curves.append(records["mean_return"])
        diverged.append(bool(records["diverged"].any()))
    return reliability_summary(curves, window_fraction, diverged)


def discover_runs(root) -> dict:
    """Scan an output root for completed runs, grouped by mode."""
    root = Path(root)
    found = {}
    if not root.exists():
        return found
    for mode_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        artifacts = []
        for run_dir in sorted(mode_dir.glob("seed_*")):
            if _is_complete(run_dir):
                try:
                    seed_val = int(run_dir.name.split("_", 1)[1])
                except ValueError:
                    continue
                artifacts.append(RunArtifact(mode=mode_dir.name, seed=seed_val,
                                             run_dir=run_dir))
        if artifacts:
            found[mode_dir.name] = artifacts
    return found

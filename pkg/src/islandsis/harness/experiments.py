"""Experiment drivers: replicated simulation, ODE runs, convergence studies.

Every output is a deterministic function of (config, master seed); wall-clock
timestamps appear only in the run manifest.  Replications fan out to a process
pool when the config asks for more than one worker; results are keyed by
replication index, so the schedule does not affect any output.
"""

from __future__ import annotations

import datetime as _dt
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import __version__
from ..meanfield import integrate
from ..micro import RNG_ALGORITHM, MacroCounts, MicroTrajectory, StrainParams, simulate
from ..topology import SuperNetwork
from .config import ConfigError, ExperimentConfig, canonical_hash
from .trajio import read_manifest, read_trajectory, write_manifest, write_micro_trajectory, write_ode_trajectory

MANIFEST_NAME = "manifest.json"
MEANFIELD_MANIFEST_NAME = "meanfield_manifest.json"  # keeps a shared out dir collision-free


def params_hash(params: StrainParams) -> str:
    return canonical_hash(
        {
            "num_strains": params.num_strains,
            "gamma": sorted((list(k), v) for k, v in params.gamma.items()),
            "mu": list(params.mu),
        }
    )


def _timestamp() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def _simulate_task(args) -> tuple[int, MicroTrajectory]:
    counts0, net, params, t_end, seed, grid, rep = args
    return rep, simulate(counts0, net, params, t_end, seed, grid, rep=rep)


def run_replications(
    counts0: MacroCounts,
    net: SuperNetwork,
    params: StrainParams,
    t_end: float,
    seed: int,
    grid: np.ndarray,
    reps: range,
    workers: int = 1,
) -> list[MicroTrajectory]:
    """Replications in index order regardless of execution order."""
    tasks = [(counts0, net, params, t_end, seed, grid, rep) for rep in reps]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = dict(pool.map(_simulate_task, tasks))
    else:
        results = dict(_simulate_task(t) for t in tasks)
    return [results[rep] for rep in reps]


def run_simulate(cfg: ExperimentConfig, out_dir: str | Path) -> dict:
    """Write one trajectory CSV per replication plus a manifest; return the manifest."""
    net = cfg.build_net()
    params = cfg.strain_params(net)
    counts0 = cfg.initial_counts(net)
    grid = cfg.grid_times()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    trajectories = run_replications(
        counts0, net, params, cfg.t_end, cfg.seed, grid,
        range(cfg.replications), workers=cfg.workers,
    )
    phash = params_hash(params)
    files = []
    for traj in trajectories:
        name = f"traj_rep{traj.rep:04d}.csv"
        write_micro_trajectory(out / name, traj, extra_meta={"params_hash": phash})
        files.append(name)
    manifest = {
        "format": "islandsis-manifest v1",
        "command": "simulate",
        "config_hash": canonical_hash(cfg.resolved()),
        "params_hash": phash,
        "library_version": __version__,
        "rng_algorithm": RNG_ALGORITHM,
        "master_seed": cfg.seed,
        "replications": cfg.replications,
        "integrator": None,
        "files": files,
        "created_at": _timestamp(),
    }
    write_manifest(out / MANIFEST_NAME, manifest)
    return manifest


def meanfield_run(cfg: ExperimentConfig, net: SuperNetwork, y0: np.ndarray, grid: np.ndarray):
    """Integrate the limiting dynamics in normalized time.

    A common healing rate mu is absorbed by running rates gamma/mu to horizon
    mu * t_end and reporting samples back at the caller's grid.
    """
    mu = cfg.common_mu()
    params = cfg.meanfield_params(net)
    traj = integrate(params, y0, mu * cfg.t_end, control=cfg.step_control(), t_eval=mu * grid)
    return params, traj


def run_meanfield(cfg: ExperimentConfig, out_dir: str | Path) -> dict:
    """Single ODE trajectory CSV plus manifest."""
    net = cfg.build_net()
    grid = cfg.grid_times()
    y0 = cfg.initial_fractions(net)
    params, traj = meanfield_run(cfg, net, y0, grid)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    regime = "symmetric" if params.is_symmetric_configuration else "unanalyzed-asymmetric"
    write_ode_trajectory(
        out / "meanfield.csv", traj, times=grid,
        extra_meta={"regime": regime, "healing_rate": cfg.common_mu()},
    )
    manifest = {
        "format": "islandsis-manifest v1",
        "command": "meanfield",
        "config_hash": canonical_hash(cfg.resolved()),
        "library_version": __version__,
        "rng_algorithm": None,
        "master_seed": cfg.seed,
        "integrator": traj.integrator_metadata(),
        "files": ["meanfield.csv"],
        "created_at": _timestamp(),
    }
    write_manifest(out / MEANFIELD_MANIFEST_NAME, manifest)
    return manifest


def sup_deviation(mean_fractions: np.ndarray, ode_states: np.ndarray):
    """Sup-norm gap over (time, island, strain) and the argmax index.

    Feeding the ODE samples back as the empirical mean gives exactly zero.
    """
    gap = np.abs(mean_fractions - ode_states)
    flat = int(np.argmax(gap))
    return float(gap.flat[flat]), np.unravel_index(flat, gap.shape)


@dataclass
class ConvergenceRecord:
    size: int
    replications: int
    deviation: float  # sup over grid times, islands, strains of |mean - ode|
    stderr: float  # standard error of the mean fraction at the sup location

    def to_dict(self) -> dict:
        return {
            "size": self.size,
            "replications": self.replications,
            "deviation": self.deviation,
            "stderr": self.stderr,
        }


@dataclass
class ConvergenceReport:
    records: list[ConvergenceRecord]
    monotone_trend: bool  # deviation at the largest size < deviation at the smallest
    tolerance_heuristic: str

    def to_dict(self) -> dict:
        return {
            "records": [r.to_dict() for r in self.records],
            "monotone_trend": self.monotone_trend,
            "tolerance_heuristic": self.tolerance_heuristic,
        }


def run_converge(cfg: ExperimentConfig, out_dir: str | Path) -> ConvergenceReport:
    """Empirical mean trajectories against the ODE across a size schedule.

    For each size, R replications start from the rounded counts and the ODE
    starts from the exact fractions those counts realize.  Replication RNG
    streams are disjoint across sizes.
    """
    sizes = cfg.size_schedule()
    grid = cfg.grid_times()
    reps = cfg.replications
    records = []
    for si, size in enumerate(sizes):
        net = cfg.build_net(size_override=size)
        params = cfg.strain_params(net)
        counts0 = MacroCounts.from_fractions(net, cfg.initial_fractions(net))
        trajectories = run_replications(
            counts0, net, params, cfg.t_end, cfg.seed, grid,
            range(si * reps, (si + 1) * reps), workers=cfg.workers,
        )
        fractions = np.stack([t.fractions() for t in trajectories])  # (R, T, M, K)
        mean = fractions.mean(axis=0)
        _, ode = meanfield_run(cfg, net, counts0.fractions(), grid)
        deviation, (t_idx, i_idx, k_idx) = sup_deviation(mean, ode.states)
        stderr = float(
            fractions[:, t_idx, i_idx, k_idx].std(ddof=1) / np.sqrt(reps)
        ) if reps > 1 else 0.0
        records.append(ConvergenceRecord(size, reps, deviation, stderr))
    report = ConvergenceReport(
        records=records,
        monotone_trend=records[-1].deviation < records[0].deviation,
        tolerance_heuristic="O(1/sqrt(N)) sampling fluctuation; heuristic, not a proved rate",
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(out / "convergence_report.json", report.to_dict())
    return report


def run_compare(cfg: ExperimentConfig, out_dir: str | Path) -> dict:
    """Compare previously simulated replications in out_dir with the ODE.

    Reads the simulate manifest, averages the replications, integrates the
    limiting dynamics on the same grid, and reports sup-norm deviations.  A
    `compare.max_deviation` config key makes the comparison pass/fail.
    """
    out = Path(out_dir)
    manifest_path = out / MANIFEST_NAME
    if not manifest_path.exists():
        raise ConfigError("out", f"no {MANIFEST_NAME} in {out}; run simulate first")
    manifest = read_manifest(manifest_path)
    data = [read_trajectory(out / name) for name in manifest["files"]]
    data = [d for d in data if d.kind == "micro"]
    if not data:
        raise ConfigError("out", "manifest lists no micro trajectory files")
    grid = data[0].times
    mean = np.stack([d.fractions for d in data]).mean(axis=0)

    net = cfg.build_net()
    y0 = data[0].counts[0] / np.asarray(net.sizes, dtype=float)[:, None]
    _, ode = meanfield_run(cfg, net, y0, grid)
    deviation, _ = sup_deviation(mean, ode.states)
    gap = np.abs(mean - ode.states)
    per_series = {
        f"island{i + 1}:strain{k + 1}": float(gap[:, i, k].max())
        for i in range(gap.shape[1])
        for k in range(gap.shape[2])
    }
    report = {
        "replications": len(data),
        "sup_deviation": deviation,
        "per_series_deviation": per_series,
    }
    section = cfg.raw.get("compare", {})
    if "max_deviation" in section:
        limit = float(section["max_deviation"])
        report["max_deviation"] = limit
        report["passed"] = report["sup_deviation"] <= limit
    write_manifest(out / "compare_report.json", report)
    return report

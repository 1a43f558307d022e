"""Trajectory file I/O.

One CSV schema serves both simulators and the ODE solver so columns can be
compared directly:

    # islandsis-trajectory v1
    # key: value ...            (metadata block)
    time,island,strain,count,fraction

Counts are integers for micro trajectories and empty for ODE rows.  Floats
are written with 17 significant digits so doubles round-trip losslessly.
Rows are emitted densely: for every time, every (island, strain) pair in
order.  Timestamps never appear in trajectory files; they live only in the
run manifest.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..meanfield import OdeTrajectory
from ..micro import MicroTrajectory

FORMAT_TAG = "islandsis-trajectory v1"
HEADER = ("time", "island", "strain", "count", "fraction")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass
class TrajectoryData:
    """A parsed trajectory file."""

    metadata: dict[str, str]
    times: np.ndarray  # (T,)
    fractions: np.ndarray  # (T, M, K)
    counts: np.ndarray | None  # (T, M, K) int64, None for ODE files

    @property
    def kind(self) -> str:
        return self.metadata.get("kind", "unknown")


def _render(times, fractions, counts, metadata: dict) -> str:
    buf = io.StringIO()
    buf.write(f"# {FORMAT_TAG}\n")
    for key, value in metadata.items():
        buf.write(f"# {key}: {value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    n_t, m, kk = fractions.shape
    for ti in range(n_t):
        t_str = _fmt(times[ti])
        for i in range(m):
            for k in range(kk):
                count = "" if counts is None else str(int(counts[ti, i, k]))
                writer.writerow([t_str, i + 1, k + 1, count, _fmt(fractions[ti, i, k])])
    return buf.getvalue()


def write_micro_trajectory(path: str | Path, traj: MicroTrajectory, extra_meta: dict | None = None) -> None:
    meta = {
        "kind": "micro",
        "simulator": traj.simulator,
        "seed": traj.seed,
        "rep": traj.rep,
        "rng": traj.rng_algorithm,
        "n_events": traj.n_events,
        "sizes": " ".join(str(s) for s in traj.sizes),
    }
    meta.update(extra_meta or {})
    Path(path).write_text(_render(traj.times, traj.fractions(), traj.counts, meta))


def write_ode_trajectory(
    path: str | Path,
    traj: OdeTrajectory,
    extra_meta: dict | None = None,
    times: np.ndarray | None = None,
) -> None:
    """Write an ODE trajectory with state shape (M, K).

    `times` overrides the recorded times (used when the caller rescaled the
    time axis for a non-unit healing rate).
    """
    states = traj.states
    if states.ndim != 3:
        raise ValueError("expected an unbatched trajectory with state shape (M, K)")
    meta = {"kind": "meanfield"}
    meta.update({f"integrator_{k}": v for k, v in traj.integrator_metadata().items()})
    meta.update(extra_meta or {})
    t = traj.times if times is None else np.asarray(times, dtype=float)
    Path(path).write_text(_render(t, states, None, meta))


def read_trajectory(path: str | Path) -> TrajectoryData:
    """Parse a trajectory CSV back into arrays.

    Raises:
        ValueError: on a missing format tag or malformed rows.
    """
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != f"# {FORMAT_TAG}":
        raise ValueError(f"{path}: not an islandsis trajectory file")
    metadata: dict[str, str] = {}
    body_start = 1
    for idx, line in enumerate(lines[1:], start=1):
        if not line.startswith("# "):
            body_start = idx
            break
        key, _, value = line[2:].partition(": ")
        metadata[key] = value
    rows = list(csv.reader(lines[body_start:]))
    if not rows or tuple(rows[0]) != HEADER:
        raise ValueError(f"{path}: missing column header {HEADER}")
    islands: set[int] = set()
    strains: set[int] = set()
    parsed = []
    for row in rows[1:]:
        t, i, k, count, frac = row
        islands.add(int(i))
        strains.add(int(k))
        parsed.append((float(t), int(i), int(k), count, float(frac)))
    m, kk = max(islands), max(strains)
    times = sorted({p[0] for p in parsed})
    t_index = {t: n for n, t in enumerate(times)}
    fractions = np.full((len(times), m, kk), np.nan)
    has_counts = any(p[3] != "" for p in parsed)
    counts = np.zeros((len(times), m, kk), dtype=np.int64) if has_counts else None
    for t, i, k, count, frac in parsed:
        ti = t_index[t]
        fractions[ti, i - 1, k - 1] = frac
        if has_counts:
            counts[ti, i - 1, k - 1] = int(count) if count else 0
    if np.any(np.isnan(fractions)):
        raise ValueError(f"{path}: sparse rows; every (time, island, strain) cell is required")
    return TrajectoryData(
        metadata=metadata, times=np.asarray(times), fractions=fractions, counts=counts
    )


def write_manifest(path: str | Path, manifest: dict) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def read_manifest(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())


PLOT_HEADER = ("time", "series", "value")


def emit_plot_data(
    inputs: list[str | Path], mode: str, out_path: str | Path
) -> int:
    """Merge trajectory files into a long-format (time, series, value) CSV.

    mode "series": one series per input file per (island, strain).
    mode "overlay": micro inputs are aggregated into mean and standard-error
    series per (island, strain); at most one ODE input adds an "ode" series.
    All inputs must share one time grid.  Returns the number of data rows.
    """
    if mode not in ("series", "overlay"):
        raise ValueError(f"unknown plotdata mode {mode!r}")
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(PLOT_HEADER)
    n_rows = 0
    if inputs:
        data = [read_trajectory(p) for p in inputs]
        base_times = data[0].times
        for d in data[1:]:
            if d.times.shape != base_times.shape or not np.allclose(d.times, base_times):
                raise ValueError("plotdata inputs disagree on the time grid")
        _, m, kk = data[0].fractions.shape
        if any(d.fractions.shape[1:] != (m, kk) for d in data):
            raise ValueError("plotdata inputs disagree on islands/strains")

        def emit(label: str, values: np.ndarray) -> None:
            nonlocal n_rows
            for ti, t in enumerate(base_times):
                for i in range(m):
                    for k in range(kk):
                        writer.writerow(
                            [_fmt(t), f"{label}:island{i + 1}:strain{k + 1}", _fmt(values[ti, i, k])]
                        )
                        n_rows += 1

        if mode == "series":
            for p, d in zip(inputs, data):
                emit(Path(p).stem, d.fractions)
        else:
            micro = [d for d in data if d.kind == "micro"]
            odes = [d for d in data if d.kind == "meanfield"]
            if len(odes) > 1:
                raise ValueError("overlay mode accepts at most one ODE input")
            if micro:
                stack = np.stack([d.fractions for d in micro])
                emit("mean", stack.mean(axis=0))
                if len(micro) > 1:
                    emit("stderr", stack.std(axis=0, ddof=1) / np.sqrt(len(micro)))
                else:
                    emit("stderr", np.zeros_like(stack[0]))
            if odes:
                emit("ode", odes[0].fractions)
    Path(out_path).write_text(out.getvalue())
    return n_rows

"""Experiment configuration: schema, loading, validation.

A single YAML document drives every subcommand.  Full key set:

    topology:
      generator: cycle | complete | star | bipartite | custom
      islands: <int>              # island count (generators; bipartite fixes 2)
      edges: [[j, i], ...]        # custom only; 1-based island labels
    sizes: <int> | [<int>, ...]   # nodes per island; a scalar is uniform
    size_schedule: [<int>, ...]   # converge only; strictly increasing uniform sizes
    strains:                      # one entry per strain
      - gamma: <float> | {"j->i": <float>, ...}   # uniform or per ordered pair
        mu: <float>               # healing rate, default 1.0
    initial:
      kind: uniform | matrix | single_island
      fraction: <float> | [<float>, ...]   # uniform: per strain
      values: [[...], ...]        # matrix: M rows x K columns of fractions
      island: <int>               # single_island
      strain: <int>               #   (defaults to 1)
    t_end: <float>
    grid: <int> | [<float>, ...]  # sample count (linspace incl. 0) or explicit times
    replications: <int>           # micro runs; default 1
    seed: <int>                   # master seed; default 0
    workers: <int>                # parallel replications; default 1
    out: <path>                   # output directory
    integrator:                   # optional overrides
      method: rk45 | rk4
      rtol: <float>
      atol: <float>
      fixed_step: <float>
    suite: <name> | [<name>, ...] # suite subcommand; omit to run all
    taylor_order: <int>           # taylor subcommand; <= 12
    compare:
      max_deviation: <float>      # compare subcommand failure threshold
    plotdata:
      inputs: [<csv path>, ...]
      mode: series | overlay
      output: <file name>

The output directory resolves as --out flag, then the ISLANDSIS_OUT
environment variable, then the `out` key (default "./out").  Validation
errors name the offending field path and exit with status 2 from the CLI.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from ..meanfield import MeanFieldParams, StepControl
from ..micro import MacroCounts, StrainParams
from ..topology import (
    SuperNetwork,
    TopologyError,
    bipartite_supernetwork,
    build_supernetwork,
    complete_supernetwork,
    cycle_supernetwork,
    star_supernetwork,
)

SUITE_NAMES = (
    "bipartite-single",
    "bipartite-bivirus",
    "regular-single",
    "regular-multivirus",
    "taylor",
    "appendix",
)


class ConfigError(ValueError):
    """Invalid configuration; `field` carries the offending key path."""

    def __init__(self, field_path: str, message: str):
        self.field = field_path
        super().__init__(f"{field_path}: {message}")


def _need(mapping: dict, key: str, path: str) -> Any:
    if key not in mapping:
        raise ConfigError(f"{path}.{key}" if path else key, "missing required key")
    return mapping[key]


def _as_positive_int(value, path: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
        raise ConfigError(path, f"expected a positive integer, got {value!r}")
    return value


def _as_positive_float(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or value <= 0:
        raise ConfigError(path, f"expected a positive number, got {value!r}")
    return float(value)


@dataclass
class ExperimentConfig:
    """Validated configuration plus helpers to materialize model objects."""

    raw: dict
    path: str | None = None

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        p = Path(path)
        if not p.exists():
            raise ConfigError("(file)", f"config file not found: {p}")
        try:
            data = yaml.safe_load(p.read_text())
        except yaml.YAMLError as exc:
            raise ConfigError("(file)", f"not valid YAML: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("(file)", "top level must be a mapping")
        return cls(raw=data, path=str(p))

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        return cls(raw=dict(data))

    # -- core sections ----------------------------------------------------

    @property
    def seed(self) -> int:
        seed = self.raw.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise ConfigError("seed", f"expected a non-negative integer, got {seed!r}")
        return seed

    @property
    def t_end(self) -> float:
        return _as_positive_float(_need(self.raw, "t_end", ""), "t_end")

    @property
    def replications(self) -> int:
        return _as_positive_int(self.raw.get("replications", 1), "replications")

    @property
    def workers(self) -> int:
        return _as_positive_int(self.raw.get("workers", 1), "workers")

    def num_islands(self) -> int:
        topo = _need(self.raw, "topology", "")
        if not isinstance(topo, dict):
            raise ConfigError("topology", "expected a mapping")
        gen = _need(topo, "generator", "topology")
        if gen == "bipartite":
            return 2
        if gen == "custom":
            sizes = _need(self.raw, "sizes", "")
            if not isinstance(sizes, list):
                raise ConfigError("sizes", "custom topology needs an explicit size list")
            return len(sizes)
        return _as_positive_int(_need(topo, "islands", "topology"), "topology.islands")

    def sizes(self, override_uniform: int | None = None) -> tuple[int, ...]:
        m = self.num_islands()
        if override_uniform is not None:
            return (override_uniform,) * m
        sizes = _need(self.raw, "sizes", "")
        if isinstance(sizes, int) and not isinstance(sizes, bool):
            return (_as_positive_int(sizes, "sizes"),) * m
        if isinstance(sizes, list):
            if len(sizes) != m:
                raise ConfigError("sizes", f"expected {m} entries, got {len(sizes)}")
            return tuple(_as_positive_int(s, f"sizes[{i}]") for i, s in enumerate(sizes))
        raise ConfigError("sizes", f"expected int or list, got {type(sizes).__name__}")

    def size_schedule(self) -> tuple[int, ...]:
        sched = _need(self.raw, "size_schedule", "")
        if not isinstance(sched, list) or len(sched) < 3:
            raise ConfigError("size_schedule", "need a list of at least 3 sizes")
        sizes = tuple(
            _as_positive_int(s, f"size_schedule[{i}]") for i, s in enumerate(sched)
        )
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ConfigError("size_schedule", f"sizes must be strictly increasing, got {sizes}")
        return sizes

    def build_net(self, size_override: int | None = None) -> SuperNetwork:
        topo = _need(self.raw, "topology", "")
        gen = _need(topo, "generator", "topology")
        sizes = self.sizes(size_override)
        try:
            if gen == "cycle":
                return cycle_supernetwork(len(sizes), sizes)
            if gen == "complete":
                return complete_supernetwork(len(sizes), sizes)
            if gen == "star":
                return star_supernetwork(len(sizes), sizes)
            if gen == "bipartite":
                return bipartite_supernetwork(sizes[0], sizes[1])
            if gen == "custom":
                edges = _need(topo, "edges", "topology")
                if not isinstance(edges, list):
                    raise ConfigError("topology.edges", "expected a list of [j, i] pairs")
                return build_supernetwork(sizes, [tuple(e) for e in edges])
        except TopologyError as exc:
            raise ConfigError("topology", str(exc)) from exc
        raise ConfigError(
            "topology.generator",
            f"unknown generator {gen!r} (cycle|complete|star|bipartite|custom)",
        )

    # -- strains -----------------------------------------------------------

    def strain_specs(self) -> list[dict]:
        strains = _need(self.raw, "strains", "")
        if not isinstance(strains, list) or not strains:
            raise ConfigError("strains", "expected a non-empty list")
        return strains

    def strain_params(self, net: SuperNetwork) -> StrainParams:
        gamma: dict[tuple[int, int, int], float] = {}
        mus: list[float] = []
        for k, section in enumerate(self.strain_specs(), start=1):
            path = f"strains[{k - 1}]"
            if not isinstance(section, dict):
                raise ConfigError(path, "expected a mapping with gamma (and optional mu)")
            g = _need(section, "gamma", path)
            mus.append(_as_positive_float(section.get("mu", 1.0), f"{path}.mu"))
            if isinstance(g, dict):
                for pair, rate in g.items():
                    try:
                        j, i = (int(x) for x in str(pair).split("->"))
                    except ValueError:
                        raise ConfigError(
                            f"{path}.gamma", f'pair keys look like "j->i", got {pair!r}'
                        ) from None
                    gamma[(k, j, i)] = _as_positive_float(rate, f"{path}.gamma[{pair}]")
            else:
                rate = _as_positive_float(g, f"{path}.gamma")
                for a, b in net.edges:
                    gamma[(k, a, b)] = rate
                    gamma[(k, b, a)] = rate
        params = StrainParams(num_strains=len(mus), gamma=gamma, mu=tuple(mus))
        try:
            params.validate_for(net)
        except ValueError as exc:
            raise ConfigError("strains", str(exc)) from exc
        return params

    def common_mu(self) -> float:
        """The shared healing rate; refuses strain-heterogeneous mu.

        Comparing against the limiting dynamics rescales time by mu and rates
        by 1/mu, which only makes sense when all strains share one mu.
        """
        mus = {float(section.get("mu", 1.0)) for section in self.strain_specs()}
        if len(mus) > 1:
            raise ConfigError(
                "strains.mu",
                f"strain-dependent healing rates {sorted(mus)} cannot be rescaled "
                "to a common normalized time",
            )
        return mus.pop()

    def meanfield_params(self, net: SuperNetwork) -> MeanFieldParams:
        """Effective ODE rates: micro gamma over the common mu, times size ratios."""
        mu = self.common_mu()
        params = self.strain_params(net)
        scaled = StrainParams(
            num_strains=params.num_strains,
            gamma={key: g / mu for key, g in params.gamma.items()},
            mu=(1.0,) * params.num_strains,
        )
        return MeanFieldParams.from_micro(net, scaled)

    # -- initial conditions -------------------------------------------------

    def initial_fractions(self, net: SuperNetwork) -> np.ndarray:
        section = _need(self.raw, "initial", "")
        if not isinstance(section, dict):
            raise ConfigError("initial", "expected a mapping")
        kind = section.get("kind", "uniform")
        m = net.num_islands
        kk = len(self.strain_specs())
        if kind == "uniform":
            frac = _need(section, "fraction", "initial")
            row = (
                [float(f) for f in frac]
                if isinstance(frac, list)
                else [float(frac)] * kk
            )
            if len(row) != kk:
                raise ConfigError("initial.fraction", f"expected {kk} per-strain entries")
            y0 = np.tile(np.asarray(row), (m, 1))
        elif kind == "matrix":
            values = _need(section, "values", "initial")
            y0 = np.asarray(values, dtype=float)
            if y0.shape != (m, kk):
                raise ConfigError("initial.values", f"expected shape ({m}, {kk}), got {y0.shape}")
        elif kind == "single_island":
            island = _as_positive_int(_need(section, "island", "initial"), "initial.island")
            strain = _as_positive_int(section.get("strain", 1), "initial.strain")
            if island > m or strain > kk:
                raise ConfigError("initial", f"island {island}/strain {strain} out of range")
            y0 = np.zeros((m, kk))
            y0[island - 1, strain - 1] = float(_need(section, "fraction", "initial"))
        else:
            raise ConfigError("initial.kind", f"unknown kind {kind!r}")
        if np.any(y0 < 0) or np.any(y0.sum(axis=1) > 1):
            raise ConfigError("initial", "fractions must be >= 0 with island totals <= 1")
        return y0

    def initial_counts(self, net: SuperNetwork) -> MacroCounts:
        return MacroCounts.from_fractions(net, self.initial_fractions(net))

    # -- numerics -----------------------------------------------------------

    def grid_times(self, t_end: float | None = None) -> np.ndarray:
        t_end = self.t_end if t_end is None else t_end
        grid = self.raw.get("grid", 101)
        if isinstance(grid, int) and not isinstance(grid, bool):
            if grid < 2:
                raise ConfigError("grid", "need at least 2 sample times")
            return np.linspace(0.0, t_end, grid)
        if isinstance(grid, list):
            times = np.asarray([float(t) for t in grid])
            if times.size == 0 or times[0] < 0 or np.any(np.diff(times) <= 0):
                raise ConfigError("grid", "times must be strictly increasing and >= 0")
            if times[-1] > t_end:
                raise ConfigError("grid", f"last time {times[-1]} exceeds t_end {t_end}")
            return times
        raise ConfigError("grid", f"expected int or list, got {type(grid).__name__}")

    def step_control(self) -> StepControl:
        section = self.raw.get("integrator", {})
        if not isinstance(section, dict):
            raise ConfigError("integrator", "expected a mapping")
        kwargs: dict[str, Any] = {}
        if "method" in section:
            if section["method"] not in ("rk45", "rk4"):
                raise ConfigError("integrator.method", f"unknown method {section['method']!r}")
            kwargs["method"] = section["method"]
        for key in ("rtol", "atol", "fixed_step"):
            if key in section:
                kwargs[key] = _as_positive_float(section[key], f"integrator.{key}")
        return StepControl(**kwargs)

    def suites(self) -> tuple[str, ...]:
        suite = self.raw.get("suite")
        if suite is None:
            return SUITE_NAMES
        names = [suite] if isinstance(suite, str) else list(suite)
        for name in names:
            if name not in SUITE_NAMES:
                raise ConfigError("suite", f"unknown suite {name!r}; choose from {SUITE_NAMES}")
        return tuple(names)

    def resolved(self) -> dict:
        """The configuration as run: raw keys minus output location."""
        out = {k: v for k, v in self.raw.items() if k != "out"}
        out["seed"] = self.seed
        return out


def canonical_hash(data: Any) -> str:
    """sha256 of the canonical JSON encoding (sorted keys, no whitespace)."""
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()

"""Exact event-driven simulation of multi-strain SIS contagion on island networks.

Each node is healthy or carries exactly one strain (a node already infected
cannot be infected again until it heals; an infection attempt on an infected
target is consumed with no effect).  An infected node of strain k in island U
heals at rate mu_k and, for every adjacent island V, fires infection attempts
at rate gamma_k(U,V), each aimed at a uniformly random node of V.

Whether the blocked attempt restarts any clock is immaterial: all clocks are
exponential, hence memoryless.

Because inter-island connections are all-to-all, the per-island per-strain
infected counts form a Markov process of their own, with

    infect rate into (i, k) = sum_{j ~ i} gamma_k(j, i) * Y[j, k] * (N_i - tot_i) / N_i
    heal  rate  at  (i, k) = mu_k * Y[i, k]

where tot_i is the total number of infected nodes in island i.  Both a
count-level simulator (`simulate`) and a full node-level one
(`node_level_simulate`, used as a cross-check of the count reduction) are
provided.  They induce the same law on count trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .topology import SuperNetwork

INFECT = "infect"
HEAL = "heal"

RNG_ALGORITHM = "philox4x64"


class Event(NamedTuple):
    kind: str  # INFECT or HEAL
    island: int  # 1-based
    strain: int  # 1-based


@dataclass(frozen=True)
class StrainParams:
    """Per-strain infection and healing rates.

    gamma maps (strain k, source island j, target island i) to the attempt
    rate gamma_k(j, i) for every ordered adjacent pair; mu[k-1] is the healing
    rate of strain k.  Two strains with identical (gamma, mu) profiles are
    behaviorally indistinguishable.
    """

    num_strains: int
    gamma: Mapping[tuple[int, int, int], float]
    mu: tuple[float, ...]

    def __post_init__(self):
        if self.num_strains < 1:
            raise ValueError("need at least one strain")
        if len(self.mu) != self.num_strains:
            raise ValueError(f"expected {self.num_strains} healing rates, got {len(self.mu)}")
        if any(not m > 0 for m in self.mu):
            raise ValueError("healing rates must be strictly positive")
        if any(not g > 0 for g in self.gamma.values()):
            raise ValueError("infection rates must be strictly positive")

    @classmethod
    def uniform(
        cls,
        net: SuperNetwork,
        gammas: float | Sequence[float],
        mus: float | Sequence[float] = 1.0,
    ) -> "StrainParams":
        """One rate per strain, applied to every ordered adjacent island pair."""
        gseq = _per_strain(gammas)
        mseq = _per_strain(mus)
        if len(mseq) == 1 and len(gseq) > 1:
            mseq = mseq * len(gseq)
        if len(gseq) != len(mseq):
            raise ValueError("gammas and mus must have matching strain counts")
        # Rates keep their numeric type (Fraction-valued rates stay exact).
        gamma = {}
        for k, g in enumerate(gseq, start=1):
            for a, b in net.edges:
                gamma[(k, a, b)] = g
                gamma[(k, b, a)] = g
        return cls(num_strains=len(gseq), gamma=gamma, mu=tuple(mseq))

    def validate_for(self, net: SuperNetwork) -> None:
        """Check the rate map covers exactly the ordered adjacent pairs of net."""
        want = set()
        for k in range(1, self.num_strains + 1):
            for a, b in net.edges:
                want.add((k, a, b))
                want.add((k, b, a))
        have = set(self.gamma)
        if have != want:
            missing = sorted(want - have)[:3]
            extra = sorted(have - want)[:3]
            raise ValueError(
                f"rate map does not match network adjacency (missing {missing}, extra {extra})"
            )


def _per_strain(value) -> list:
    if isinstance(value, (list, tuple, np.ndarray)):
        return list(value)
    return [value]


@dataclass(frozen=True)
class MacroCounts:
    """Per-island, per-strain infected counts; the Markov macrostate.

    y[i-1][k-1] is the number of k-infected nodes in island i.  Row sums may
    not exceed the island size (one strain per node).
    """

    y: tuple[tuple[int, ...], ...]
    sizes: tuple[int, ...]

    def __post_init__(self):
        if len(self.y) != len(self.sizes):
            raise ValueError("counts and sizes disagree on the number of islands")
        for row, n in zip(self.y, self.sizes):
            if any(c < 0 for c in row):
                raise ValueError(f"negative count in {row}")
            if sum(row) > n:
                raise ValueError(f"island holds {sum(row)} infected nodes but only {n} nodes")

    @property
    def num_islands(self) -> int:
        return len(self.sizes)

    @property
    def num_strains(self) -> int:
        return len(self.y[0])

    @classmethod
    def zeros(cls, net: SuperNetwork, num_strains: int) -> "MacroCounts":
        return cls(tuple((0,) * num_strains for _ in net.sizes), net.sizes)

    @classmethod
    def from_fractions(cls, net: SuperNetwork, fractions) -> "MacroCounts":
        """Round per-island fractions (M x K array-like, or length-M for one strain)."""
        arr = np.asarray(fractions, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        rows = []
        for frac_row, n in zip(arr, net.sizes):
            rows.append(tuple(int(round(f * n)) for f in frac_row))
        return cls(tuple(rows), net.sizes)

    def as_array(self) -> np.ndarray:
        return np.array(self.y, dtype=np.int64)

    def fractions(self) -> np.ndarray:
        return self.as_array() / np.asarray(self.sizes, dtype=float)[:, None]


@dataclass
class EventRateTable:
    """Events that can fire from a given macrostate, with their rates.

    Zero-rate events are omitted.  Rates keep the numeric type of the inputs,
    so Fraction-valued parameters yield exact rational rates.
    """

    entries: list[tuple[Event, float]]

    @property
    def total(self):
        return sum(r for _, r in self.entries)

    def rate_of(self, kind: str, island: int, strain: int):
        for ev, r in self.entries:
            if ev == (kind, island, strain):
                return r
        return 0


def event_rates(counts: MacroCounts, net: SuperNetwork, params: StrainParams) -> EventRateTable:
    """Rate table of the count-level Markov chain at `counts`.

    Args:
        counts: current macrostate (validated against net).
        net: island network.
        params: per-strain rates; gamma keys must cover net's adjacency.

    Returns:
        EventRateTable listing every infect/heal event with positive rate.

    Raises:
        ValueError: on island/strain dimension mismatch.
    """
    if counts.sizes != net.sizes:
        raise ValueError("counts were built for a different island size vector")
    if counts.num_strains != params.num_strains:
        raise ValueError("counts and params disagree on the number of strains")
    gamma = params.gamma
    entries: list[tuple[Event, float]] = []
    for i in range(1, net.num_islands + 1):
        row = counts.y[i - 1]
        n_i = counts.sizes[i - 1]
        healthy = n_i - sum(row)
        for k in range(1, params.num_strains + 1):
            if healthy > 0:
                pressure = sum(
                    gamma[(k, j, i)] * counts.y[j - 1][k - 1] for j in net.neighbors_of(i)
                )
                if pressure > 0:
                    entries.append((Event(INFECT, i, k), pressure * healthy / n_i))
            c = row[k - 1]
            if c > 0:
                entries.append((Event(HEAL, i, k), params.mu[k - 1] * c))
    return EventRateTable(entries)


def replication_rng(master_seed: int, rep: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by (master seed, replication index).

    Philox keys are 128-bit: the low word carries the master seed, the high
    word the replication index, so replications are independent streams and
    reproducible in any execution order.
    """
    if master_seed < 0 or rep < 0:
        raise ValueError("seed and replication index must be non-negative")
    key = (master_seed & 0xFFFFFFFFFFFFFFFF) | (rep << 64)
    return np.random.Generator(np.random.Philox(key=key))


def gillespie_step(
    counts: MacroCounts,
    net: SuperNetwork,
    params: StrainParams,
    rng: np.random.Generator,
) -> tuple[Event | None, float, MacroCounts]:
    """One exact jump of the count-level chain.

    Returns (event, waiting_time, new_counts); (None, inf, counts) from an
    absorbing state (no infected nodes anywhere).
    """
    table = event_rates(counts, net, params)
    total = float(table.total)
    if total <= 0.0:
        return None, math.inf, counts
    wait = rng.exponential(1.0 / total)
    u = rng.random() * total
    acc = 0.0
    chosen = table.entries[-1][0]
    for ev, r in table.entries:
        acc += float(r)
        if u < acc:
            chosen = ev
            break
    delta = 1 if chosen.kind == INFECT else -1
    rows = list(counts.y)
    row = list(rows[chosen.island - 1])
    row[chosen.strain - 1] += delta
    rows[chosen.island - 1] = tuple(row)
    return chosen, wait, MacroCounts(tuple(rows), counts.sizes)


@dataclass
class MicroTrajectory:
    """Counts sampled on a time grid (last value carried forward), plus provenance."""

    times: np.ndarray  # (T,)
    counts: np.ndarray  # (T, M, K) int64
    sizes: tuple[int, ...]
    params: StrainParams
    seed: int
    rep: int
    n_events: int
    event_totals: dict[tuple[str, int, int], int]
    rng_algorithm: str = RNG_ALGORITHM
    simulator: str = "count-level"

    def fractions(self) -> np.ndarray:
        return self.counts / np.asarray(self.sizes, dtype=float)[None, :, None]


def _prepare_grid(sample_grid, t_end: float) -> np.ndarray:
    grid = np.asarray(sample_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("sample grid must be a non-empty 1-d sequence of times")
    if grid[0] < 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("sample grid times must be strictly increasing and >= 0")
    if grid[-1] > t_end:
        raise ValueError("sample grid extends beyond t_end")
    return grid


def simulate(
    counts0: MacroCounts,
    net: SuperNetwork,
    params: StrainParams,
    t_end: float,
    seed: int,
    sample_grid,
    rep: int = 0,
) -> MicroTrajectory:
    """Run one replication of the count-level chain and sample it on a grid.

    The trajectory is piecewise constant; grid times take the value that was
    current just before any event occurring exactly at that instant.  Output
    is a deterministic function of (seed, rep).

    Args:
        counts0: initial macrostate.
        net: island network.
        params: strain rates.
        t_end: simulation horizon (> 0).
        seed: master seed.
        sample_grid: strictly increasing times in [0, t_end].
        rep: replication index mixed into the RNG key.
    """
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    params.validate_for(net)
    grid = _prepare_grid(sample_grid, t_end)
    rng = replication_rng(seed, rep)

    sampled = np.empty((grid.size, net.num_islands, params.num_strains), dtype=np.int64)
    gi = 0
    t = 0.0
    counts = counts0
    n_events = 0
    totals: dict[tuple[str, int, int], int] = {}
    while True:
        ev, wait, nxt = gillespie_step(counts, net, params, rng)
        t_next = t + wait
        while gi < grid.size and grid[gi] < t_next:
            sampled[gi] = counts.as_array()
            gi += 1
        if ev is None or t_next > t_end:
            break
        t = t_next
        counts = nxt
        n_events += 1
        key = (ev.kind, ev.island, ev.strain)
        totals[key] = totals.get(key, 0) + 1
    while gi < grid.size:
        sampled[gi] = counts.as_array()
        gi += 1
    return MicroTrajectory(
        times=grid,
        counts=sampled,
        sizes=net.sizes,
        params=params,
        seed=seed,
        rep=rep,
        n_events=n_events,
        event_totals=totals,
    )


def node_level_simulate(
    net: SuperNetwork,
    params: StrainParams,
    initial: Sequence[Sequence[int]],
    t_end: float,
    seed: int,
    sample_grid,
    rep: int = 0,
) -> MicroTrajectory:
    """Full node-resolution simulation; counts are derived by summing nodes.

    `initial[i-1][n]` is the state of node n of island i: 0 for healthy, or a
    strain label 1..K.  Infection attempts against already-infected targets
    advance time but change nothing.  Only effective events (actual state
    changes) enter `event_totals`, making them comparable with `simulate`.
    """
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    params.validate_for(net)
    grid = _prepare_grid(sample_grid, t_end)
    rng = replication_rng(seed, rep)

    m = net.num_islands
    kk = params.num_strains
    states = [list(map(int, row)) for row in initial]
    if len(states) != m or any(len(row) != n for row, n in zip(states, net.sizes)):
        raise ValueError("initial node states do not match island sizes")
    if any(s < 0 or s > kk for row in states for s in row):
        raise ValueError("node states must be 0 (healthy) or a strain label")

    counts = np.zeros((m, kk), dtype=np.int64)
    for i, row in enumerate(states):
        for s in row:
            if s:
                counts[i, s - 1] += 1

    # Per infected node: healing plus one attempt clock per neighbor island.
    attempt = {
        (k, u): [(v, params.gamma[(k, u, v)]) for v in net.neighbors_of(u)]
        for k in range(1, kk + 1)
        for u in range(1, m + 1)
    }

    sampled = np.empty((grid.size, m, kk), dtype=np.int64)
    gi = 0
    t = 0.0
    n_events = 0
    totals: dict[tuple[str, int, int], int] = {}
    while True:
        choices = []  # (island0, node, strain, target_island or 0 for heal, rate)
        total = 0.0
        for i0 in range(m):
            row = states[i0]
            for node, s in enumerate(row):
                if not s:
                    continue
                r = params.mu[s - 1]
                choices.append((i0, node, s, 0, r))
                total += r
                for v, g in attempt[(s, i0 + 1)]:
                    choices.append((i0, node, s, v, g))
                    total += g
        t_next = t + (rng.exponential(1.0 / total) if total > 0 else math.inf)
        while gi < grid.size and grid[gi] < t_next:
            sampled[gi] = counts
            gi += 1
        if total <= 0 or t_next > t_end:
            break
        t = t_next
        u = rng.random() * total
        acc = 0.0
        picked = choices[-1]
        for c in choices:
            acc += c[4]
            if u < acc:
                picked = c
                break
        i0, node, s, target, _ = picked
        if target == 0:
            states[i0][node] = 0
            counts[i0, s - 1] -= 1
            n_events += 1
            key = (HEAL, i0 + 1, s)
            totals[key] = totals.get(key, 0) + 1
        else:
            v0 = target - 1
            victim = int(rng.integers(net.sizes[v0]))
            if states[v0][victim] == 0:
                states[v0][victim] = s
                counts[v0, s - 1] += 1
                n_events += 1
                key = (INFECT, target, s)
                totals[key] = totals.get(key, 0) + 1
            # else: blocked attempt, state unchanged
    while gi < grid.size:
        sampled[gi] = counts
        gi += 1
    return MicroTrajectory(
        times=grid,
        counts=sampled,
        sizes=net.sizes,
        params=params,
        seed=seed,
        rep=rep,
        n_events=n_events,
        event_totals=totals,
        simulator="node-level",
    )

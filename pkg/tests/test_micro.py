from fractions import Fraction

import numpy as np
import pytest

from islandsis.meanfield import MeanFieldParams, integrate
from islandsis.micro import (
    HEAL,
    INFECT,
    MacroCounts,
    StrainParams,
    event_rates,
    gillespie_step,
    node_level_simulate,
    replication_rng,
    simulate,
)
from islandsis.topology import bipartite_supernetwork, build_supernetwork

BIP33 = bipartite_supernetwork(3, 3)


def unit_rates(net=BIP33):
    # gamma = mu = 1 as exact rationals, so rate arithmetic stays rational
    return StrainParams.uniform(net, Fraction(1), Fraction(1))


class TestEventRates:
    def test_one_and_two_infected(self):
        # Y = (1, 2): pressure into island 1 is 2*gamma on 2/3 healthy targets
        table = event_rates(MacroCounts(((1,), (2,)), (3, 3)), BIP33, unit_rates())
        assert table.rate_of(INFECT, 1, 1) == Fraction(4, 3)
        assert table.rate_of(INFECT, 2, 1) == Fraction(1, 3)
        infect_total = sum(r for ev, r in table.entries if ev.kind == INFECT)
        assert infect_total == Fraction(5, 3)
        assert table.rate_of(HEAL, 1, 1) == 1
        assert table.rate_of(HEAL, 2, 1) == 2

    def test_fully_infected_island(self):
        table = event_rates(MacroCounts(((0,), (3,)), (3, 3)), BIP33, unit_rates())
        assert table.rate_of(INFECT, 1, 1) == 3
        assert table.rate_of(INFECT, 2, 1) == 0
        assert sum(r for ev, r in table.entries if ev.kind == INFECT) == 3

    def test_all_zero_is_absorbing(self):
        table = event_rates(MacroCounts.zeros(BIP33, 1), BIP33, unit_rates())
        assert table.entries == []
        assert table.total == 0

    def test_scales_linearly_in_gamma(self):
        g = Fraction(7, 2)
        table = event_rates(
            MacroCounts(((1,), (2,)), (3, 3)), BIP33, StrainParams.uniform(BIP33, g, Fraction(1))
        )
        assert table.rate_of(INFECT, 1, 1) == g * Fraction(4, 3)

    def test_dimension_mismatch_rejected(self):
        other = bipartite_supernetwork(4, 4)
        with pytest.raises(ValueError):
            event_rates(MacroCounts(((1,), (2,)), (3, 3)), other, unit_rates(other))
        with pytest.raises(ValueError):
            event_rates(MacroCounts(((1, 0), (2, 0)), (3, 3)), BIP33, unit_rates())


class TestMacroCounts:
    def test_exclusion_enforced_at_construction(self):
        with pytest.raises(ValueError):
            MacroCounts(((2, 2),), (3,))
        with pytest.raises(ValueError):
            MacroCounts(((-1,), (0,)), (3, 3))

    def test_from_fractions_rounds(self):
        counts = MacroCounts.from_fractions(BIP33, [[0.34], [0.5]])
        assert counts.y == ((1,), (2,))


class TestGillespieStep:
    def test_absorbing_state(self):
        ev, wait, counts = gillespie_step(
            MacroCounts.zeros(BIP33, 1), BIP33, unit_rates(), replication_rng(0)
        )
        assert ev is None and wait == np.inf
        assert counts.y == ((0,), (0,))

    def test_single_possible_event(self):
        # From Y = (0, 3) with negligible healing the only move is Infect(1).
        params = StrainParams.uniform(BIP33, 1.0, 1e-12)
        rng = replication_rng(3)
        for _ in range(200):
            ev, _, counts = gillespie_step(MacroCounts(((0,), (3,)), (3, 3)), BIP33, params, rng)
            assert ev == (INFECT, 1, 1)
            assert counts.y == ((1,), (3,))

    def test_heal_probability(self):
        # Y=(1,2), gamma=3, mu=1: infect rates (4, 1), heal rates (1, 2);
        # P(first event heals) = 3/8.  Frequency over 1e5 draws within 3 sigma.
        params = StrainParams.uniform(BIP33, 3.0, 1.0)
        start = MacroCounts(((1,), (2,)), (3, 3))
        rng = replication_rng(2024)
        n = 100_000
        heals = sum(
            1 for _ in range(n) if gillespie_step(start, BIP33, params, rng)[0].kind == HEAL
        )
        p = 3 / 8
        sigma = (p * (1 - p) / n) ** 0.5
        assert abs(heals / n - p) < 3 * sigma

    def test_steps_change_one_cell_by_one(self):
        net = build_supernetwork([2, 3, 2], [(1, 2), (2, 3)])
        params = StrainParams.uniform(net, (1.5, 0.7), (1.0, 1.3))
        counts = MacroCounts(((1, 0), (0, 1), (1, 1)), (2, 3, 2))
        rng = replication_rng(11)
        for _ in range(300):
            ev, _, nxt = gillespie_step(counts, net, params, rng)
            if ev is None:
                break
            delta = nxt.as_array() - counts.as_array()
            assert np.abs(delta).sum() == 1
            assert delta[ev.island - 1, ev.strain - 1] == (1 if ev.kind == INFECT else -1)
            # local exclusion is re-validated by the MacroCounts constructor
            counts = nxt


class TestSimulate:
    def test_zero_initial_stays_zero(self):
        traj = simulate(
            MacroCounts.zeros(BIP33, 1), BIP33, unit_rates(), 5.0, 1, np.linspace(0, 5, 11)
        )
        assert traj.counts.sum() == 0 and traj.n_events == 0

    def test_same_seed_bit_identical(self):
        args = (MacroCounts(((2,), (1,)), (3, 3)), BIP33, StrainParams.uniform(BIP33, 2.0))
        a = simulate(*args, 4.0, 99, np.linspace(0, 4, 9), rep=3)
        b = simulate(*args, 4.0, 99, np.linspace(0, 4, 9), rep=3)
        assert np.array_equal(a.counts, b.counts)
        assert a.event_totals == b.event_totals
        c = simulate(*args, 4.0, 99, np.linspace(0, 4, 9), rep=4)
        assert not np.array_equal(a.counts, c.counts)

    def test_grid_validation(self):
        counts = MacroCounts.zeros(BIP33, 1)
        with pytest.raises(ValueError):
            simulate(counts, BIP33, unit_rates(), 1.0, 0, [0.0, 2.0])
        with pytest.raises(ValueError):
            simulate(counts, BIP33, unit_rates(), 1.0, 0, [0.5, 0.5])
        with pytest.raises(ValueError):
            simulate(counts, BIP33, unit_rates(), -1.0, 0, [0.0])

    def test_tracks_ode_at_large_sizes(self):
        # One replication at N=2000 per island should sit near the stable
        # point 1 - 1/gamma = 0.5, within the O(1/sqrt(N)) band.
        net = bipartite_supernetwork(2000, 2000)
        traj = simulate(
            MacroCounts(((1000,), (1000,)), (2000, 2000)),
            net,
            StrainParams.uniform(net, 2.0),
            10.0,
            5,
            [0.0, 10.0],
        )
        ode = integrate(MeanFieldParams.symmetric(net, 2.0), np.full((2, 1), 0.5), 10.0)
        assert np.abs(traj.fractions()[-1] - ode.final).max() < 0.05


class TestNodeLevel:
    def test_all_healthy_stays_zero(self):
        traj = node_level_simulate(
            BIP33, unit_rates(), [[0, 0, 0], [0, 0, 0]], 3.0, 0, [0.0, 3.0]
        )
        assert traj.counts.sum() == 0

    def test_without_healing_counts_never_drop(self):
        params = StrainParams.uniform(BIP33, 2.0, 1e-12)
        traj = node_level_simulate(
            BIP33, params, [[1, 0, 0], [0, 0, 0]], 6.0, 8, np.linspace(0, 6, 25)
        )
        totals = traj.counts.sum(axis=(1, 2))
        assert np.all(np.diff(totals) >= 0)

    def test_initial_state_validation(self):
        with pytest.raises(ValueError):
            node_level_simulate(BIP33, unit_rates(), [[0, 0], [0, 0, 0]], 1.0, 0, [0.0])
        with pytest.raises(ValueError):
            node_level_simulate(BIP33, unit_rates(), [[2, 0, 0], [0, 0, 0]], 1.0, 0, [0.0])

    def test_mean_trajectory_matches_count_level(self):
        # Same law: empirical means over 200 replications agree within 3 SE.
        params = StrainParams.uniform(BIP33, 1.5, 1.0)
        grid = np.linspace(0.0, 2.0, 5)
        reps = 200
        count_frac = np.stack(
            [
                simulate(
                    MacroCounts(((1,), (0,)), (3, 3)), BIP33, params, 2.0, 31, grid, rep=r
                ).fractions()
                for r in range(reps)
            ]
        )
        node_frac = np.stack(
            [
                node_level_simulate(
                    BIP33, params, [[1, 0, 0], [0, 0, 0]], 2.0, 47, grid, rep=r
                ).fractions()
                for r in range(reps)
            ]
        )
        gap = np.abs(count_frac.mean(axis=0) - node_frac.mean(axis=0))
        se = np.sqrt(
            count_frac.var(axis=0, ddof=1) / reps + node_frac.var(axis=0, ddof=1) / reps
        )
        assert np.all(gap <= 3 * se + 1e-12)


def test_replication_rng_streams_are_stable():
    a = replication_rng(123, 0).random(4)
    b = replication_rng(123, 0).random(4)
    c = replication_rng(123, 1).random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    with pytest.raises(ValueError):
        replication_rng(-1)

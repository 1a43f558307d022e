import json

import numpy as np
import pytest

from islandsis.harness.config import ConfigError, ExperimentConfig, canonical_hash
from islandsis.harness.experiments import (
    run_compare,
    run_converge,
    run_meanfield,
    run_simulate,
    sup_deviation,
)
from islandsis.harness.suites import run_theorem_suite
from islandsis.harness.trajio import (
    emit_plot_data,
    read_manifest,
    read_trajectory,
    write_micro_trajectory,
    write_ode_trajectory,
)
from islandsis.meanfield import MeanFieldParams, integrate
from islandsis.micro import MacroCounts, StrainParams, simulate
from islandsis.topology import bipartite_supernetwork

BASE = {
    "topology": {"generator": "bipartite"},
    "sizes": 30,
    "strains": [{"gamma": 2.0, "mu": 1.0}],
    "initial": {"kind": "uniform", "fraction": 0.2},
    "t_end": 3.0,
    "grid": 7,
    "replications": 3,
    "seed": 11,
}


def cfg_with(**overrides) -> ExperimentConfig:
    raw = json.loads(json.dumps(BASE))
    raw.update(overrides)
    return ExperimentConfig.from_dict(raw)


class TestConfig:
    def test_load_and_build(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text(
            "topology: {generator: cycle, islands: 4}\n"
            "sizes: [10, 10, 10, 10]\n"
            "strains:\n  - gamma: 1.5\n"
            "initial: {kind: uniform, fraction: 0.1}\n"
            "t_end: 2.0\n"
        )
        cfg = ExperimentConfig.load(path)
        net = cfg.build_net()
        assert net.num_islands == 4 and net.sizes == (10, 10, 10, 10)
        assert cfg.strain_params(net).num_strains == 1

    def test_missing_key_names_field(self):
        cfg = cfg_with()
        del cfg.raw["t_end"]
        with pytest.raises(ConfigError, match="t_end"):
            cfg.t_end

    def test_bad_gamma_names_field(self):
        cfg = cfg_with(strains=[{"gamma": -1.0}])
        with pytest.raises(ConfigError, match=r"strains\[0\].gamma"):
            cfg.strain_params(cfg.build_net())

    def test_pairwise_gamma_map(self):
        cfg = cfg_with(strains=[{"gamma": {"1->2": 2.0, "2->1": 3.0}}])
        net = cfg.build_net()
        params = cfg.strain_params(net)
        assert params.gamma[(1, 1, 2)] == 2.0
        assert params.gamma[(1, 2, 1)] == 3.0

    def test_incomplete_pair_map_rejected(self):
        cfg = cfg_with(strains=[{"gamma": {"1->2": 2.0}}])
        with pytest.raises(ConfigError, match="strains"):
            cfg.strain_params(cfg.build_net())

    def test_initial_matrix_shape_checked(self):
        cfg = cfg_with(initial={"kind": "matrix", "values": [[0.1], [0.2], [0.3]]})
        with pytest.raises(ConfigError, match="initial.values"):
            cfg.initial_fractions(cfg.build_net())

    def test_single_island_initial(self):
        cfg = cfg_with(initial={"kind": "single_island", "island": 2, "fraction": 0.5})
        y0 = cfg.initial_fractions(cfg.build_net())
        assert y0[1, 0] == 0.5 and y0.sum() == 0.5

    def test_heterogeneous_mu_refused_for_comparison(self):
        cfg = cfg_with(strains=[{"gamma": 2.0, "mu": 1.0}, {"gamma": 1.0, "mu": 2.0}])
        with pytest.raises(ConfigError, match="mu"):
            cfg.common_mu()

    def test_unknown_suite_rejected(self):
        with pytest.raises(ConfigError, match="suite"):
            cfg_with(suite="nonsense").suites()

    def test_size_schedule_must_increase(self):
        with pytest.raises(ConfigError, match="size_schedule"):
            cfg_with(size_schedule=[100, 100, 400]).size_schedule()

    def test_canonical_hash_is_order_insensitive(self):
        assert canonical_hash({"a": 1, "b": 2}) == canonical_hash({"b": 2, "a": 1})


class TestTrajIO:
    def test_micro_roundtrip_exact(self, tmp_path):
        net = bipartite_supernetwork(7, 5)
        traj = simulate(
            MacroCounts(((3,), (1,)), (7, 5)),
            net,
            StrainParams.uniform(net, 2.0),
            2.0,
            5,
            np.linspace(0, 2, 5),
        )
        path = tmp_path / "t.csv"
        write_micro_trajectory(path, traj, extra_meta={"params_hash": "x"})
        back = read_trajectory(path)
        assert back.kind == "micro"
        assert back.metadata["seed"] == "5"
        assert np.array_equal(back.counts, traj.counts)
        # 17 significant digits round-trip doubles exactly
        assert np.array_equal(back.fractions, traj.fractions())
        assert np.array_equal(back.times, traj.times)

    def test_ode_roundtrip(self, tmp_path):
        params = MeanFieldParams.symmetric(bipartite_supernetwork(1, 1), 2.0)
        grid = np.linspace(0, 5, 11)
        traj = integrate(params, np.array([[0.3], [0.7]]), 5.0, t_eval=grid)
        path = tmp_path / "ode.csv"
        write_ode_trajectory(path, traj)
        back = read_trajectory(path)
        assert back.kind == "meanfield" and back.counts is None
        assert np.array_equal(back.fractions, traj.states)
        assert back.metadata["integrator_method"] == "rk45"

    def test_reject_foreign_file(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("time,island\n0,1\n")
        with pytest.raises(ValueError, match="not an islandsis trajectory"):
            read_trajectory(path)


class TestPlotData:
    def _write_ode(self, path, y0=((0.3,), (0.7,))):
        params = MeanFieldParams.symmetric(bipartite_supernetwork(1, 1), 2.0)
        traj = integrate(params, np.asarray(y0), 2.0, t_eval=np.linspace(0, 2, 5))
        write_ode_trajectory(path, traj)

    def test_empty_inputs_header_only(self, tmp_path):
        out = tmp_path / "plot.csv"
        assert emit_plot_data([], "series", out) == 0
        assert out.read_text() == "time,series,value\n"

    def test_one_ode_one_series_per_cell(self, tmp_path):
        src = tmp_path / "ode.csv"
        self._write_ode(src)
        out = tmp_path / "plot.csv"
        rows = emit_plot_data([src], "series", out)
        lines = out.read_text().strip().splitlines()
        assert rows == 5 * 2 * 1 == len(lines) - 1
        labels = {line.split(",")[1] for line in lines[1:]}
        assert labels == {"ode:island1:strain1", "ode:island2:strain1"}

    def test_overlay_three_series_per_cell(self, tmp_path):
        net = bipartite_supernetwork(20, 20)
        params = StrainParams.uniform(net, 2.0)
        grid = np.linspace(0, 2, 5)
        micro_paths = []
        for rep in range(3):
            traj = simulate(MacroCounts(((4,), (4,)), (20, 20)), net, params, 2.0, 3, grid, rep)
            p = tmp_path / f"m{rep}.csv"
            write_micro_trajectory(p, traj)
            micro_paths.append(p)
        ode = tmp_path / "ode.csv"
        self._write_ode(ode, y0=((0.2,), (0.2,)))
        out = tmp_path / "plot.csv"
        emit_plot_data(micro_paths + [ode], "overlay", out)
        labels = {line.split(",")[1] for line in out.read_text().strip().splitlines()[1:]}
        assert labels == {
            f"{kind}:island{i}:strain1" for kind in ("mean", "stderr", "ode") for i in (1, 2)
        }

    def test_mismatched_grids_rejected(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        self._write_ode(a)
        params = MeanFieldParams.symmetric(bipartite_supernetwork(1, 1), 2.0)
        traj = integrate(params, np.array([[0.3], [0.7]]), 2.0, t_eval=np.linspace(0, 2, 9))
        write_ode_trajectory(b, traj)
        with pytest.raises(ValueError, match="time grid"):
            emit_plot_data([a, b], "series", tmp_path / "p.csv")


class TestRunSimulate:
    def test_outputs_and_manifest(self, tmp_path):
        manifest = run_simulate(cfg_with(), tmp_path)
        assert manifest["replications"] == 3
        assert manifest["rng_algorithm"] == "philox4x64"
        assert (tmp_path / "manifest.json").exists()
        for name in manifest["files"]:
            data = read_trajectory(tmp_path / name)
            assert data.counts[0].sum() == 2 * round(0.2 * 30)
        stored = read_manifest(tmp_path / "manifest.json")
        assert stored["config_hash"] == canonical_hash(cfg_with().resolved())

    def test_byte_identical_reruns(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run_simulate(cfg_with(), a)
        run_simulate(cfg_with(), b)
        for name in ("traj_rep0000.csv", "traj_rep0002.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()
        ma, mb = read_manifest(a / "manifest.json"), read_manifest(b / "manifest.json")
        ma.pop("created_at"), mb.pop("created_at")
        assert ma == mb

    def test_worker_pool_matches_serial(self, tmp_path):
        serial, pooled = tmp_path / "s", tmp_path / "p"
        run_simulate(cfg_with(), serial)
        run_simulate(cfg_with(workers=2), pooled)
        for name in read_manifest(serial / "manifest.json")["files"]:
            assert (serial / name).read_bytes() == (pooled / name).read_bytes()

    def test_zero_initial_zero_everywhere(self, tmp_path):
        run_simulate(cfg_with(initial={"kind": "uniform", "fraction": 0.0}), tmp_path)
        data = read_trajectory(tmp_path / "traj_rep0000.csv")
        assert data.counts.sum() == 0

    def test_seed_changes_output(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run_simulate(cfg_with(seed=1), a)
        run_simulate(cfg_with(seed=2), b)
        assert (a / "traj_rep0000.csv").read_bytes() != (b / "traj_rep0000.csv").read_bytes()

    def test_mean_final_fraction_tracks_ode(self, tmp_path):
        # N=500 per island, gamma=2, initial fraction 0.1: the mean final
        # fraction should sit within the sampling band of the ODE value.
        cfg = cfg_with(
            sizes=500,
            replications=6,
            t_end=10.0,
            grid=6,
            initial={"kind": "uniform", "fraction": 0.1},
        )
        run_simulate(cfg, tmp_path)
        finals = []
        for name in read_manifest(tmp_path / "manifest.json")["files"]:
            finals.append(read_trajectory(tmp_path / name).fractions[-1])
        net = bipartite_supernetwork(500, 500)
        ode = integrate(
            MeanFieldParams.symmetric(net, 2.0), np.full((2, 1), 0.1), 10.0
        ).final
        assert np.abs(np.mean(finals, axis=0) - ode).max() < 0.05


class TestMeanfieldRun:
    def test_writes_trajectory(self, tmp_path):
        run_meanfield(cfg_with(), tmp_path)
        data = read_trajectory(tmp_path / "meanfield.csv")
        assert data.kind == "meanfield"
        assert data.metadata["regime"] == "symmetric"
        assert data.fractions[0, 0, 0] == 0.2

    def test_healing_rate_rescaling(self, tmp_path):
        # gamma=4, mu=2 in micro units equals normalized gamma=2 at time mu*t
        fast = cfg_with(strains=[{"gamma": 4.0, "mu": 2.0}], t_end=3.0, grid=4)
        run_meanfield(fast, tmp_path)
        data = read_trajectory(tmp_path / "meanfield.csv")
        params = MeanFieldParams.symmetric(bipartite_supernetwork(1, 1), 2.0)
        direct = integrate(
            params, np.full((2, 1), 0.2), 6.0, t_eval=2.0 * data.times
        )
        assert np.abs(direct.states - data.fractions).max() < 1e-12
        assert np.array_equal(data.times, np.linspace(0, 3, 4))


class TestConverge:
    def test_self_comparison_is_zero(self):
        states = np.linspace(0, 1, 24).reshape(4, 3, 2)
        dev, idx = sup_deviation(states, states)
        assert dev == 0.0 and len(idx) == 3

    def test_small_schedule_report(self, tmp_path):
        cfg = cfg_with(size_schedule=[40, 80, 160], replications=6, t_end=2.0, grid=5)
        report = run_converge(cfg, tmp_path)
        assert [r.size for r in report.records] == [40, 80, 160]
        assert all(r.deviation >= 0 for r in report.records)
        assert all(r.replications == 6 for r in report.records)
        stored = read_manifest(tmp_path / "convergence_report.json")
        assert stored["records"][0]["size"] == 40
        assert "heuristic" in stored["tolerance_heuristic"]

    def test_schedule_required(self, tmp_path):
        with pytest.raises(ConfigError, match="size_schedule"):
            run_converge(cfg_with(), tmp_path)


class TestCompare:
    def test_compare_after_simulate(self, tmp_path):
        cfg = cfg_with(sizes=400, replications=4, t_end=2.0, grid=5)
        run_simulate(cfg, tmp_path)
        report = run_compare(cfg, tmp_path)
        assert report["replications"] == 4
        assert 0 <= report["sup_deviation"] < 0.2
        assert "passed" not in report

    def test_threshold_verdict(self, tmp_path):
        cfg = cfg_with(sizes=400, replications=4, t_end=2.0, grid=5)
        run_simulate(cfg, tmp_path)
        cfg.raw["compare"] = {"max_deviation": 1e-12}
        assert run_compare(cfg, tmp_path)["passed"] is False
        cfg.raw["compare"] = {"max_deviation": 0.5}
        assert run_compare(cfg, tmp_path)["passed"] is True

    def test_requires_manifest(self, tmp_path):
        with pytest.raises(ConfigError, match="manifest"):
            run_compare(cfg_with(), tmp_path)

    def test_shared_out_dir_with_meanfield(self, tmp_path):
        # a meanfield run into the same directory must not confuse compare
        cfg = cfg_with(sizes=200, replications=3, t_end=2.0, grid=5)
        run_simulate(cfg, tmp_path)
        run_meanfield(cfg, tmp_path)
        assert (tmp_path / "meanfield_manifest.json").exists()
        report = run_compare(cfg, tmp_path)
        assert report["replications"] == 3


def test_unknown_suite_name():
    with pytest.raises(ValueError, match="unknown suite"):
        run_theorem_suite("not-a-suite")

"""Simulation lab tests: generators, seed streams, grid runner, CSV output."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ffselect.errors import ConfigError, ReplicationBudgetExceeded, ShapeMismatch
from ffselect.simlab import (
    DEFAULT_THETAS,
    METHODS,
    REGIMES,
    SCENARIOS,
    CellResult,
    GridResult,
    ScenarioSpec,
    TruthRecord,
    _stream_seed,
    _worker_count,
    emit_frequency_curves,
    gen_errors,
    gen_scenario1,
    gen_scenario2,
    run_grid,
)


class TestGenerators:
    def test_scenario1_shape_and_truth(self):
        rng = np.random.default_rng(0)
        panel, truth = gen_scenario1(50, 7, 1.0, "e1", rng)
        assert panel.y.shape == (50, 7)
        assert truth.p0 == 2
        assert truth.factors.shape == (50, 2)
        assert truth.loadings.shape == (7, 2)
        np.testing.assert_array_equal(panel.column_means, np.zeros(7))
        np.testing.assert_array_equal(truth.u, panel.u)

    def test_scenario2_shape_and_truth(self):
        rng = np.random.default_rng(0)
        panel, truth = gen_scenario2(50, 7, 1.0, "e1", rng)
        assert panel.y.shape == (50, 7)
        assert truth.p0 == 3
        assert truth.factors.shape == (50, 3)
        assert truth.loadings.shape == (7, 3)
        np.testing.assert_array_equal(panel.column_means, np.zeros(7))

    def test_scenario1_factor_functions(self):
        rng = np.random.default_rng(3)
        panel, truth = gen_scenario1(40, 5, 0.5, "e1", rng)
        np.testing.assert_array_equal(truth.factors[:, 0], np.cos(2 * np.pi * panel.u))
        np.testing.assert_array_equal(truth.factors[:, 1], np.sin(2 * np.pi * panel.u))
        assert np.all(np.abs(panel.u) < 1.0)

    def test_scenario2_factor_functions(self):
        rng = np.random.default_rng(3)
        panel, truth = gen_scenario2(40, 5, 0.5, "e1", rng)
        u = panel.u
        np.testing.assert_array_equal(truth.factors[:, 0], u)
        np.testing.assert_array_equal(truth.factors[:, 1], u * u - 1.0)
        np.testing.assert_allclose(
            truth.factors[:, 2], 0.4 * (u**4 - 6.0 * u * u + 3.0), rtol=1e-15
        )

    @pytest.mark.parametrize("gen", [gen_scenario1, gen_scenario2])
    def test_noiseless_panel_is_exact_low_rank(self, gen):
        rng = np.random.default_rng(7)
        panel, truth = gen(60, 9, 0.0, "e1", rng)
        np.testing.assert_array_equal(panel.y, truth.factors @ truth.loadings.T)
        assert np.linalg.matrix_rank(panel.y) <= truth.p0

    def test_scenario2_one_zero_loading_per_row(self):
        rng = np.random.default_rng(11)
        _, truth = gen_scenario2(10, 200, 1.0, "e1", rng)
        zero_counts = (truth.loadings == 0.0).sum(axis=1)
        np.testing.assert_array_equal(zero_counts, np.ones(200, dtype=int))

    def test_scenario2_zero_position_uniform(self):
        scipy_stats = pytest.importorskip("scipy.stats")
        rng = np.random.default_rng(5)
        _, truth = gen_scenario2(3, 3000, 1.0, "e1", rng)
        pos = np.argmax(truth.loadings == 0.0, axis=1)
        counts = np.bincount(pos, minlength=3)
        _, pvalue = scipy_stats.chisquare(counts)
        assert pvalue > 0.001

    def test_scenario1_factor_moments(self):
        # population values: var cos = var sin = 1/2, cross moment 0
        n = 2000
        for seed in range(5):
            rng = np.random.default_rng(seed)
            _, truth = gen_scenario1(n, 5, 1.0, "e1", rng)
            f = truth.factors
            assert abs(np.mean(f[:, 0] ** 2) - 0.5) < 4.0 / math.sqrt(n)
            assert abs(np.mean(f[:, 1] ** 2) - 0.5) < 4.0 / math.sqrt(n)
            assert abs(np.mean(f[:, 0] * f[:, 1])) < 4.0 / math.sqrt(n)

    def test_scenario2_factors_pairwise_uncorrelated(self):
        # the quartic factor has heavy-tailed products, so single panels are
        # noisy; the moments are checked on the pool of several panels
        n, seeds = 2000, 20
        pooled = np.zeros(3)
        for seed in range(seeds):
            rng = np.random.default_rng(seed)
            _, truth = gen_scenario2(n, 5, 1.0, "e1", rng)
            f = truth.factors
            pooled += [
                np.mean(f[:, 0] * f[:, 1]),
                np.mean(f[:, 0] * f[:, 2]),
                np.mean(f[:, 1] * f[:, 2]),
            ]
        np.testing.assert_array_less(np.abs(pooled / seeds), 10.0 / math.sqrt(n))

    def test_minimum_size_enforced(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ConfigError):
            gen_scenario1(2, 5, 1.0, "e1", rng)
        with pytest.raises(ConfigError):
            gen_scenario2(5, 2, 1.0, "e1", rng)


class TestNoiseRegimes:
    def test_unknown_regime(self):
        with pytest.raises(ConfigError):
            gen_errors("e9", 10, 4, np.random.default_rng(0))

    def test_e1_is_standard(self):
        e = gen_errors("e1", 4000, 6, np.random.default_rng(2))
        assert abs(e.mean()) < 4.0 / math.sqrt(e.size)
        assert abs(e.var() - 1.0) < 0.1

    def test_e2_alternating_variances(self):
        e = gen_errors("e2", 4000, 6, np.random.default_rng(2))
        v = e.var(axis=0)
        np.testing.assert_allclose(v[[0, 2, 4]], 1.0, atol=0.25)
        np.testing.assert_allclose(v[[1, 3, 5]], 2.0, atol=0.5)

    def test_e3_geometric_cross_correlation(self):
        e = gen_errors("e3", 8000, 6, np.random.default_rng(2))
        corr = np.corrcoef(e, rowvar=False)
        for k in range(5):
            assert abs(corr[k, k + 1] - 0.5) < 0.1
        assert abs(corr[0, 2] - 0.25) < 0.1

    @pytest.mark.parametrize("regime", REGIMES)
    def test_shapes(self, regime):
        e = gen_errors(regime, 17, 5, np.random.default_rng(9))
        assert e.shape == (17, 5)
        assert np.all(np.isfinite(e))


class TestSpecsAndRecords:
    def test_scenario_spec_validation(self):
        with pytest.raises(ConfigError):
            ScenarioSpec("s9", "e1", 40, 5, 1.0)
        with pytest.raises(ConfigError):
            ScenarioSpec("s1", "e4", 40, 5, 1.0)
        with pytest.raises(ConfigError):
            ScenarioSpec("s1", "e1", 2, 5, 1.0)
        with pytest.raises(ConfigError):
            ScenarioSpec("s1", "e1", 40, 5, -1.0)
        with pytest.raises(ConfigError):
            ScenarioSpec("s1", "e1", 40, 5, float("nan"))

    def test_truth_record_shape_checks(self):
        with pytest.raises(ShapeMismatch):
            TruthRecord(p0=2, factors=np.zeros((5, 3)), loadings=np.zeros((4, 2)), u=np.zeros(5))
        with pytest.raises(ShapeMismatch):
            TruthRecord(p0=2, factors=np.zeros((5, 2)), loadings=np.zeros((4, 3)), u=np.zeros(5))

    def test_constants(self):
        assert SCENARIOS == ("s1", "s2")
        assert REGIMES == ("e1", "e2", "e3")
        assert METHODS == ("icp", "ladle", "ftcv1", "ftcv10")
        assert len(DEFAULT_THETAS) == 6


class TestSeedStreams:
    def test_same_coordinates_same_panel(self):
        spec = ScenarioSpec("s1", "e1", 30, 5, 1.0)
        a = np.random.default_rng(_stream_seed(7, spec, 3, 0))
        b = np.random.default_rng(_stream_seed(7, spec, 3, 0))
        pa, _ = gen_scenario1(30, 5, 1.0, "e1", a)
        pb, _ = gen_scenario1(30, 5, 1.0, "e1", b)
        np.testing.assert_array_equal(pa.y, pb.y)

    @given(
        rep=st.integers(0, 50),
        stage=st.integers(0, 2),
        other_rep=st.integers(0, 50),
        other_stage=st.integers(0, 2),
    )
    @settings(max_examples=40, deadline=None)
    def test_distinct_coordinates_distinct_states(self, rep, stage, other_rep, other_stage):
        spec = ScenarioSpec("s1", "e1", 30, 5, 1.0)
        a = _stream_seed(7, spec, rep, stage).generate_state(2)
        b = _stream_seed(7, spec, other_rep, other_stage).generate_state(2)
        if (rep, stage) == (other_rep, other_stage):
            np.testing.assert_array_equal(a, b)
        else:
            assert not np.array_equal(a, b)

    def test_theta_outside_the_key(self):
        # noise levels share the underlying draws: signal parts identical,
        # noise parts proportional
        spec_lo = ScenarioSpec("s1", "e1", 40, 6, 0.25)
        spec_hi = ScenarioSpec("s1", "e1", 40, 6, 4.0)
        rng_lo = np.random.default_rng(_stream_seed(11, spec_lo, 0, 0))
        rng_hi = np.random.default_rng(_stream_seed(11, spec_hi, 0, 0))
        p_lo, t_lo = gen_scenario1(40, 6, 0.25, "e1", rng_lo)
        p_hi, t_hi = gen_scenario1(40, 6, 4.0, "e1", rng_hi)
        np.testing.assert_array_equal(t_lo.u, t_hi.u)
        np.testing.assert_array_equal(t_lo.loadings, t_hi.loadings)
        signal = t_lo.factors @ t_lo.loadings.T
        np.testing.assert_allclose(
            p_hi.y - signal,
            math.sqrt(4.0 / 0.25) * (p_lo.y - signal),
            rtol=1e-12, atol=1e-12,
        )


class TestRunGrid:
    def small_grid(self):
        return [ScenarioSpec("s1", "e1", 40, 6, 0.5)]

    def test_validation(self):
        with pytest.raises(ConfigError):
            run_grid([], replications=2, master_seed=0)
        with pytest.raises(ConfigError):
            run_grid(self.small_grid(), replications=0, master_seed=0)
        with pytest.raises(ConfigError):
            run_grid(self.small_grid(), replications=2, master_seed=0, methods=("nope",))
        with pytest.raises(ConfigError):
            run_grid(self.small_grid(), replications=2, master_seed=0, methods=())
        with pytest.raises(ConfigError):
            run_grid(["s1"], replications=2, master_seed=0)
        with pytest.raises(ConfigError):
            run_grid(self.small_grid(), replications=2, master_seed=0, workers=0)
        with pytest.raises(ConfigError):
            # order cap is m - 1 = 5 when cross-validation methods run
            run_grid(self.small_grid(), replications=2, master_seed=0, p_max=8)

    def test_deterministic_across_worker_counts(self):
        grid = self.small_grid()
        kwargs = dict(replications=4, master_seed=3, methods=("icp", "ftcv10"), p_max=4)
        serial = run_grid(grid, workers=1, **kwargs)
        threaded = run_grid(grid, workers=4, **kwargs)
        assert len(serial.cells) == len(threaded.cells) == 2
        for a, b in zip(serial.cells, threaded.cells):
            assert a.picks == b.picks
            assert a.frequency == b.frequency

    def test_worker_count_from_environment(self, monkeypatch):
        monkeypatch.setenv("FFSELECT_THREADS", "3")
        assert _worker_count(None) == 3
        assert _worker_count(2) == 2
        monkeypatch.setenv("FFSELECT_THREADS", "zero")
        with pytest.raises(ConfigError):
            _worker_count(None)
        monkeypatch.setenv("FFSELECT_THREADS", "0")
        with pytest.raises(ConfigError):
            _worker_count(None)
        monkeypatch.delenv("FFSELECT_THREADS")
        assert _worker_count(None) == 1

    def test_noiseless_cell_all_methods_exact(self):
        res = run_grid(
            [ScenarioSpec("s1", "e1", 150, 150, 0.0)], replications=1, master_seed=42
        )
        assert {c.method: c.frequency for c in res.cells} == {
            "icp": 1.0, "ladle": 1.0, "ftcv1": 1.0, "ftcv10": 1.0,
        }
        assert all(c.failures == 0 for c in res.cells)

    def test_result_bookkeeping(self):
        res = run_grid(self.small_grid(), replications=3, master_seed=5, methods=("icp",), p_max=4)
        assert isinstance(res, GridResult)
        assert res.replications == 3
        assert res.master_seed == 5
        assert res.kernel_family == "gaussian"
        assert "spawn_key" in res.seed_scheme
        cell = res.cells[0]
        assert isinstance(cell, CellResult)
        assert len(cell.picks) == 3
        assert all(isinstance(p, int) for p in cell.picks)
        assert cell.frequency == sum(1 for p in cell.picks if p == 2) / 3

    def test_failure_budget_aborts_run(self):
        # a compact kernel with a rule of thumb bandwidth leaves isolated
        # tail points of an unbounded covariate without neighbors
        spec = ScenarioSpec("s2", "e1", 60, 12, 1.0)
        with pytest.raises(ReplicationBudgetExceeded):
            run_grid(
                [spec], replications=4, master_seed=0,
                methods=("icp",), kernel_family="epanechnikov",
            )


class TestFrequencyCurves:
    def run_small(self):
        cells = [
            ScenarioSpec("s1", "e1", 40, 6, 0.5),
            ScenarioSpec("s1", "e2", 40, 6, 0.25),
        ]
        return run_grid(cells, replications=2, master_seed=8, methods=("icp", "ladle"), p_max=4)

    def test_header_rows_and_sidecar(self, tmp_path):
        res = self.run_small()
        path = tmp_path / "curves.csv"
        emit_frequency_curves(res, str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == "n,m,theta,regime,method,frequency,replications,failures"
        assert len(lines) == 1 + 4
        keys = [tuple(line.split(",")[:5]) for line in lines[1:]]
        assert keys == sorted(keys)
        for line in lines[1:]:
            fields = line.split(",")
            assert fields[0] == "40" and fields[1] == "6"
            float(fields[2])
            float(fields[5])
            assert fields[6] == "2"
        sidecar = json.loads((tmp_path / "curves.json").read_text())
        assert sidecar["master_seed"] == 8
        assert sidecar["replications"] == 2
        assert sidecar["p_min"] == 1 and sidecar["p_max"] == 4
        assert sidecar["kernel_family"] == "gaussian"
        assert len(sidecar["cells"]) == 4
        assert {c["scenario"] for c in sidecar["cells"]} == {"s1"}

    def test_emission_is_reproducible(self, tmp_path):
        res = self.run_small()
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        emit_frequency_curves(res, str(a))
        emit_frequency_curves(res, str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_no_leftover_temp_files(self, tmp_path):
        res = self.run_small()
        emit_frequency_curves(res, str(tmp_path / "c.csv"))
        names = {p.name for p in tmp_path.iterdir()}
        assert names == {"c.csv", "c.json"}

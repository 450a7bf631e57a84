import json
import math

import numpy as np
import pytest

from difflab import harness
from difflab.harness import (
    CURVE_HEADER,
    ConfigError,
    ExperimentConfig,
    SimulationError,
    StrategyCurve,
    build_model,
    excess_risk,
    fit_decade_slope,
    format_curve_csv,
    gap_db,
    metadata_path,
    prediction_rows,
    read_curve_csv,
    read_dataset_csv,
    recording_grid,
    run_monte_carlo,
    theory_inputs,
    weighted_er_approx,
    write_curve_csv,
    write_dataset_csv,
)
from difflab.models import HessianSpectrum, LogisticModel, QuadraticModel, quad_spectrum, synthetic_logistic_dataset

SMALL = dict(n_nodes=5, dim=2, iterations=300, runs=4)


def curve_from(iters, values):
    iters = np.asarray(iters)
    return StrategyCurve(iters, np.asarray(values, dtype=float), np.zeros(len(iters)), 1)


class TestExcessRisk:
    def test_at_optimum(self):
        m = QuadraticModel(np.array([0.3, -0.2]))
        assert excess_risk(m, m.w_opt) == 0.0

    def test_hand_value(self):
        m = QuadraticModel(np.zeros(2))
        assert excess_risk(m, np.array([0.1, 0.0])) == pytest.approx(0.01, rel=1e-14)

    def test_weighted_hand_value(self):
        spectrum = HessianSpectrum(np.array([1.0, 4.0]), np.eye(2))
        assert weighted_er_approx(np.array([1.0, 1.0]), spectrum) == pytest.approx(2.5)
        assert weighted_er_approx(np.zeros(2), spectrum) == 0.0

    def test_quadratic_weighted_form_exact(self):
        cov = np.array([[2.0, 0.5], [0.5, 1.0]])
        m = QuadraticModel(np.array([1.0, -1.0]), 1.0, feature_cov=cov)
        spectrum = quad_spectrum(m)
        for w in np.random.default_rng(0).standard_normal((10, 2)):
            assert excess_risk(m, w) == pytest.approx(weighted_er_approx(m.w_opt - w, spectrum), rel=1e-12)

    def test_logistic_ratio_tends_to_one(self):
        h, y = synthetic_logistic_dataset(400, 3, np.random.default_rng(1))
        m = LogisticModel.fit(h, y, 1.0)
        spectrum = m.spectrum()
        direction = np.array([0.6, -0.3, 0.74])
        ratios = [excess_risk(m, m.w_opt + s * direction) / weighted_er_approx(s * direction, spectrum)
                  for s in (1e-1, 1e-2, 1e-3)]
        gaps = [abs(r - 1) for r in ratios]
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 1e-2


class TestMonteCarlo:
    def test_noiseless_start_at_optimum_is_zero(self):
        cfg = ExperimentConfig(runs=1, iterations=2, strategies=("noncoop",), sigma_v_sq=0.0, init="optimum")
        curve = run_monte_carlo(cfg)
        np.testing.assert_array_equal(curve["noncoop"].er_mean, [0.0, 0.0])

    def test_same_seed_same_bytes(self):
        cfg = ExperimentConfig(**SMALL)
        assert format_curve_csv(run_monte_carlo(cfg)) == format_curve_csv(run_monte_carlo(cfg))

    def test_different_seed_differs(self):
        cfg = ExperimentConfig(**SMALL)
        other = cfg.replace(master_seed=1)
        assert format_curve_csv(run_monte_carlo(cfg)) != format_curve_csv(run_monte_carlo(other))

    def test_thread_count_does_not_matter(self):
        cfg = ExperimentConfig(**SMALL, init="gaussian")
        assert format_curve_csv(run_monte_carlo(cfg, threads=1)) == format_curve_csv(run_monte_carlo(cfg, threads=2))

    def test_logistic_thread_count_does_not_matter(self):
        cfg = ExperimentConfig(model_kind="logistic", n_nodes=4, dim=3, iterations=100, runs=3, dataset_size=300)
        assert format_curve_csv(run_monte_carlo(cfg, threads=1)) == format_curve_csv(run_monte_carlo(cfg, threads=3))

    def test_non_negative_everywhere(self):
        for kind in ("quadratic", "logistic"):
            cfg = ExperimentConfig(**SMALL, model_kind=kind, dataset_size=300)
            curve = run_monte_carlo(cfg)
            for c in curve.strategies.values():
                assert (c.er_mean >= 0).all()

    def test_identity_combiner_matches_noncoop(self):
        cfg = ExperimentConfig(**SMALL, combiner="identity", init="gaussian")
        curve = run_monte_carlo(cfg)
        for name in ("diffusion", "consensus"):
            assert np.array_equal(curve[name].er_mean, curve["noncoop"].er_mean)

    def test_single_node_all_match(self):
        cfg = ExperimentConfig(n_nodes=1, iterations=200, runs=3, init="gaussian")
        curve = run_monte_carlo(cfg)
        for name in ("diffusion", "consensus", "centralized"):
            assert np.array_equal(curve[name].er_mean, curve["noncoop"].er_mean)

    def test_nan_aborts_with_iteration(self):
        cfg = ExperimentConfig(n_nodes=3, iterations=2000, runs=1, mu=1e6, strategies=("noncoop",))
        with pytest.raises(SimulationError, match="iteration [0-9]+"):
            run_monte_carlo(cfg)

    def test_non_primitive_aborts(self, monkeypatch):
        class Flat:
            is_primitive = False
        monkeypatch.setattr(harness, "spectral_summary", lambda a: Flat())
        with pytest.raises(SimulationError, match="not primitive"):
            run_monte_carlo(ExperimentConfig(**SMALL))

    def test_metadata(self):
        cfg = ExperimentConfig(**SMALL)
        meta = run_monte_carlo(cfg).metadata
        assert meta["master_seed"] == 0
        assert meta["common_random_numbers"] is True
        assert meta["config_hash"] == cfg.config_hash()
        assert meta["config"]["n_nodes"] == 5
        assert meta["version"].startswith("v")

    def test_stderr_zero_for_one_run(self):
        curve = run_monte_carlo(ExperimentConfig(n_nodes=3, iterations=50, runs=1))
        assert (curve["diffusion"].er_stderr == 0).all()

    def test_centralized_beats_noncoop(self):
        cfg = ExperimentConfig(n_nodes=10, iterations=2000, runs=20, strategies=("noncoop", "centralized"))
        curve = run_monte_carlo(cfg)
        assert gap_db(curve["noncoop"], curve["centralized"], (1000, 2000)) > 7


class TestGridAndStats:
    def test_geometric_grid_hits_round_numbers(self):
        grid = recording_grid(ExperimentConfig())
        for i in (1, 2, 5, 10, 100, 1000, 2000, 5000, 10000):
            assert i in grid
        assert grid[-1] == 10000 and np.all(np.diff(grid) > 0)

    def test_linear_grid(self):
        grid = recording_grid(ExperimentConfig(iterations=10, record="linear", record_stride=3))
        np.testing.assert_array_equal(grid, [1, 4, 7, 10])

    def test_gap_identical(self):
        c = curve_from([1, 2, 3], [1.0, 0.5, 0.25])
        assert gap_db(c, c, (1, 3)) == 0.0

    def test_gap_twenty(self):
        i = np.arange(1, 101)
        assert gap_db(curve_from(i, 1 / i), curve_from(i, 1 / (20 * i)), (10, 100)) == pytest.approx(13.0103, abs=1e-4)

    def test_gap_grid_mismatch(self):
        with pytest.raises(ValueError):
            gap_db(curve_from([1, 2], [1, 1]), curve_from([1, 3], [1, 1]), (1, 3))

    def test_gap_empty_window(self):
        c = curve_from([1, 2], [1, 1])
        with pytest.raises(ValueError):
            gap_db(c, c, (5, 9))

    @pytest.mark.parametrize("power,slope", [(1, -10.0), (2, -20.0)])
    def test_power_law_slopes(self, power, slope):
        i = np.unique(np.geomspace(1, 1e4, 60).astype(int))
        assert fit_decade_slope(curve_from(i, 3.0 / i**power), 100, 10000) == pytest.approx(slope, abs=1e-9)

    def test_slope_window_too_narrow(self):
        i = np.arange(1, 1001)
        with pytest.raises(ValueError):
            fit_decade_slope(curve_from(i, 1 / i), 100, 900)
        with pytest.raises(ValueError):
            fit_decade_slope(curve_from(i, 1 / i), 100, 2000)


class TestConfig:
    @pytest.mark.parametrize("bad", [dict(iterations=1), dict(runs=0), dict(strategies=()),
                                     dict(record_stride=0), dict(mu=-1.0), dict(model_kind="svm"),
                                     dict(combiner="random"), dict(strategies=("diffusion", "gossip")),
                                     dict(n_nodes=2.5), dict(w_opt=(1.0,)), dict(topology_per_run="yes")])
    def test_rejects(self, bad):
        with pytest.raises((ConfigError, ValueError)):
            ExperimentConfig(**bad)

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown config keys: colour"):
            ExperimentConfig.from_dict({"colour": 1})

    def test_strategy_string_and_round_trip(self):
        cfg = ExperimentConfig(strategies="diffusion,noncoop", w_opt=[1, 2], dim=2)
        assert cfg.strategies == ("diffusion", "noncoop")
        assert ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg

    def test_hash_tracks_content(self):
        assert ExperimentConfig().config_hash() == ExperimentConfig().config_hash()
        assert ExperimentConfig().config_hash() != ExperimentConfig(mu=1.4).config_hash()


class TestTheoryBridge:
    def test_benchmark_inputs(self):
        inputs = theory_inputs(ExperimentConfig())
        np.testing.assert_allclose(inputs.rate.eigenvalues, [2.0, 2.0])
        np.testing.assert_allclose(inputs.rate.projected_noise, [4.0, 4.0])
        assert inputs.trace_rv == pytest.approx(8.0)
        assert 1 / 20 <= inputs.rate.perron_norm_sq < 0.06

    def test_prediction_rows(self):
        cfg = ExperimentConfig(combiner="identity", n_nodes=1)
        rows = prediction_rows(cfg, [1, 1000])
        assert math.isnan(rows[0][1])
        i, exact, mlsp, lo, hi, cr = rows[1]
        assert exact == pytest.approx(3.6e-3, rel=1e-12)
        assert mlsp == pytest.approx(3e-3, rel=1e-12)
        assert lo <= hi
        assert cr == pytest.approx(2e-3)

    def test_noiseless_has_no_floor(self):
        rows = prediction_rows(ExperimentConfig(sigma_v_sq=0.0), [100])
        assert math.isnan(rows[0][5])


class TestCsv:
    def test_curve_round_trip(self, tmp_path):
        curve = run_monte_carlo(ExperimentConfig(**SMALL))
        path = tmp_path / "curve.csv"
        write_curve_csv(curve, path)
        back = read_curve_csv(path)
        for name, c in curve.strategies.items():
            np.testing.assert_array_equal(back[name].er_mean, c.er_mean)
            np.testing.assert_array_equal(back[name].iterations, c.iterations)
        meta = json.loads(open(metadata_path(path)).read())
        assert meta["config_hash"] == curve.metadata["config_hash"]
        assert open(path).readline().strip() == ",".join(CURVE_HEADER)

    def test_dataset_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        h = rng.standard_normal((25, 4)) * 10.0 ** rng.integers(-8, 8, (25, 4))
        y = np.where(rng.random(25) < 0.5, -1.0, 1.0)
        for header in (True, False):
            path = tmp_path / f"d{header}.csv"
            write_dataset_csv(h, y, path, header=header)
            h2, y2 = read_dataset_csv(path)
            np.testing.assert_array_equal(h2, h)
            np.testing.assert_array_equal(y2, y)

    def test_handwritten_file(self, tmp_path):
        path = tmp_path / "tiny.csv"
        path.write_text("label,a,b\n1,0.5,2\n-1,-1.25,0\n1,3,-4e-1\n")
        h, y = read_dataset_csv(path)
        np.testing.assert_array_equal(y, [1, -1, 1])
        np.testing.assert_array_equal(h, [[0.5, 2], [-1.25, 0], [3, -0.4]])

    def test_label_zero_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1,0.5,2\n0,1,1\n")
        with pytest.raises(ValueError, match=r"bad.csv:2: label"):
            read_dataset_csv(path)

    def test_width_mismatch(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("1,0.5,2\n-1,1\n")
        with pytest.raises(ValueError, match=r":2: expected 3 fields"):
            read_dataset_csv(path)

    def test_dataset_drives_logistic_model(self, tmp_path):
        h, y = synthetic_logistic_dataset(200, 3, np.random.default_rng(0))
        path = tmp_path / "data.csv"
        write_dataset_csv(h, y, path)
        m = build_model(ExperimentConfig(model_kind="logistic", dim=3, dataset_path=str(path)))
        assert m.n_samples == 200
        with pytest.raises(ConfigError):
            build_model(ExperimentConfig(model_kind="logistic", dim=4, dataset_path=str(path)))

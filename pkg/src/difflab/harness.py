"""Seeded Monte Carlo runner, learning-curve statistics and CSV persistence."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .models import (
    LogisticModel,
    QuadraticModel,
    dot_last,
    estimate_noise_stats,
    quad_noise_stats,
    quad_spectrum,
    synthetic_logistic_dataset,
    fim_quadratic,
)
from .netgraph import (
    CombinationMatrix,
    build_combiner,
    random_connected_topology,
    spectral_summary,
)
from .strategies import (
    NetworkState,
    StepSchedule,
    StrategyKind,
    centralized_step,
    consensus_step,
    diffusion_step,
    noncoop_step,
)
from .theory import (
    RateParams,
    TransientParams,
    asymptotic_er_predictor,
    cramer_rao_msd,
    initial_mode_energy,
    mlsp_approx,
    transient_bounds,
)

# Iterations drawn per block from a run's data stream.  Part of the stream
# definition: changing it changes which numbers each iteration sees.
SAMPLE_BLOCK = 256
LOGISTIC_NOISE_SAMPLES = 100_000

# spawn-key prefixes under the master seed
_KEY_MODEL, _KEY_RUN, _KEY_SHARED_TOPOLOGY, _KEY_NOISE_ESTIMATE = 0, 1, 2, 3
_SUB_TOPOLOGY, _SUB_DATA, _SUB_INIT = 0, 1, 2


class ConfigError(ValueError):
    pass


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    model_kind: str = "quadratic"
    n_nodes: int = 20
    dim: int = 2
    mu: float = 1.5
    sigma_v_sq: float = 1.0
    regularizer: float = 1.0
    iterations: int = 10_000
    runs: int = 100
    strategies: tuple[str, ...] = ("noncoop", "centralized", "consensus", "diffusion")
    combiner: str = "metropolis"
    topology_edge_prob: float = 0.3
    topology_per_run: bool = True
    master_seed: int = 0
    record: str = "geometric"
    points_per_decade: int = 10
    record_stride: int = 1
    init: str = "zero"
    init_radius: float = 1.0
    w_opt: tuple[float, ...] | None = None
    feature_dist: str = "gaussian"
    dataset_path: str | None = None
    dataset_size: int = 5000
    planted_norm: float = 2.0
    label_noise: float = 0.5

    def __post_init__(self):
        strategies = self.strategies
        if isinstance(strategies, str):
            strategies = strategies.split(",")
        object.__setattr__(self, "strategies", tuple(StrategyKind.parse(s).value for s in strategies)
                           if strategies else ())
        if self.w_opt is not None:
            object.__setattr__(self, "w_opt", tuple(float(x) for x in self.w_opt))
        self.validate()

    def validate(self) -> None:
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.model_kind in ("quadratic", "logistic"), f"model_kind must be quadratic or logistic, got {self.model_kind!r}")
        need(_is_int(self.n_nodes) and self.n_nodes >= 1, "n_nodes must be an integer >= 1")
        need(_is_int(self.dim) and self.dim >= 1, "dim must be an integer >= 1")
        need(_is_num(self.mu) and self.mu > 0, "mu must be positive")
        need(_is_num(self.sigma_v_sq) and self.sigma_v_sq >= 0, "sigma_v_sq must be >= 0")
        need(_is_num(self.regularizer) and self.regularizer > 0, "regularizer must be positive")
        need(_is_int(self.iterations) and self.iterations >= 2, "iterations must be an integer >= 2")
        need(_is_int(self.runs) and self.runs >= 1, "runs must be an integer >= 1")
        need(len(self.strategies) > 0, "strategies must be non-empty")
        need(len(set(self.strategies)) == len(self.strategies), "strategies must not repeat")
        need(self.combiner in ("metropolis", "uniform", "identity"), f"unknown combiner {self.combiner!r}")
        need(_is_num(self.topology_edge_prob) and 0 < self.topology_edge_prob <= 1, "topology_edge_prob must be in (0, 1]")
        need(isinstance(self.topology_per_run, bool), "topology_per_run must be a boolean")
        need(_is_int(self.master_seed) and self.master_seed >= 0, "master_seed must be a non-negative integer")
        need(self.record in ("geometric", "linear"), "record must be geometric or linear")
        need(_is_int(self.points_per_decade) and self.points_per_decade >= 1, "points_per_decade must be >= 1")
        need(_is_int(self.record_stride) and self.record_stride >= 1, "record_stride must be >= 1")
        need(self.init in ("zero", "gaussian", "optimum"), "init must be zero, gaussian or optimum")
        need(_is_num(self.init_radius) and self.init_radius >= 0, "init_radius must be >= 0")
        need(self.w_opt is None or len(self.w_opt) == self.dim, "w_opt must have dim entries")
        need(self.feature_dist in ("gaussian", "rademacher"), "feature_dist must be gaussian or rademacher")
        need(_is_int(self.dataset_size) and self.dataset_size >= 1, "dataset_size must be >= 1")
        need(self.model_kind == "logistic" or self.dataset_path is None, "dataset_path applies to logistic models only")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError("unknown config keys: " + ", ".join(unknown))
        try:
            return cls(**d)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["strategies"] = list(self.strategies)
        if self.w_opt is not None:
            d["w_opt"] = list(self.w_opt)
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _is_int(x) -> bool:
    return isinstance(x, (int, np.integer)) and not isinstance(x, bool)


def _is_num(x) -> bool:
    return isinstance(x, (int, float, np.integer, np.floating)) and not isinstance(x, bool) and math.isfinite(x)


# -- curves --------------------------------------------------------------------------


@dataclass
class StrategyCurve:
    iterations: np.ndarray
    er_mean: np.ndarray
    er_stderr: np.ndarray
    runs: int
    msd_mean: np.ndarray | None = None
    msd_stderr: np.ndarray | None = None

    @property
    def er_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 10.0 * np.log10(self.er_mean)


@dataclass
class LearningCurve:
    iterations: np.ndarray
    strategies: dict[str, StrategyCurve]
    runs: int
    metadata: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> StrategyCurve:
        return self.strategies[name]


def _window_mask(iters: np.ndarray, window) -> np.ndarray:
    lo, hi = window
    mask = (iters >= lo) & (iters <= hi)
    if not mask.any():
        raise ValueError(f"no recorded iterations in window [{lo}, {hi}]")
    return mask


def gap_db(curve_a: StrategyCurve, curve_b: StrategyCurve, i_window) -> float:
    """Mean of er_db_a - er_db_b over recorded iterations inside the window."""
    if not np.array_equal(curve_a.iterations, curve_b.iterations):
        raise ValueError("curves are recorded on different iteration grids")
    mask = _window_mask(curve_a.iterations, i_window)
    return float(np.mean(curve_a.er_db[mask] - curve_b.er_db[mask]))


def fit_decade_slope(curve: StrategyCurve, i_lo: int, i_hi: int) -> float:
    """Least-squares slope of er_db against log10(i), in dB per decade."""
    if i_hi < 10 * i_lo:
        raise ValueError("the fit window must span at least one decade")
    iters = curve.iterations
    if i_lo < iters[0] or i_hi > iters[-1]:
        raise ValueError(f"window [{i_lo}, {i_hi}] outside recorded range [{iters[0]}, {iters[-1]}]")
    mask = _window_mask(iters, (i_lo, i_hi))
    slope, _ = np.polyfit(np.log10(iters[mask]), curve.er_db[mask], 1)
    return float(slope)


def recording_grid(config: ExperimentConfig) -> np.ndarray:
    n = config.iterations
    if config.record == "linear":
        grid = np.arange(1, n + 1, config.record_stride)
    else:
        k_max = int(math.floor(config.points_per_decade * math.log10(n)))
        geometric = np.rint(10.0 ** (np.arange(k_max + 1) / config.points_per_decade))
        # 1-2-5 anchors so round iteration counts are always on the grid
        anchors = np.outer(10.0 ** np.arange(int(math.log10(n)) + 1), [1, 2, 5]).ravel()
        grid = np.unique(np.concatenate([geometric, anchors]).astype(np.int64))
    grid = grid[grid <= n]
    if grid[-1] != n:
        grid = np.append(grid, n)
    return grid


# -- excess risk -----------------------------------------------------------------------


def excess_risk(model, w):
    """J(w) - J(w_opt) for one or many weight vectors (last axis = M)."""
    return model.excess_risk(w)


def weighted_er_approx(w_err, spectrum) -> float:
    """0.5 * w_err^T Phi Lambda Phi^T w_err."""
    proj = spectrum.eigenvectors.T @ np.asarray(w_err, dtype=float)
    return 0.5 * float(np.dot(spectrum.eigenvalues, proj * proj))


# -- model and network construction ------------------------------------------------------


def _seed(config: ExperimentConfig, *key) -> np.random.SeedSequence:
    return np.random.SeedSequence(config.master_seed, spawn_key=tuple(key))


def build_model(config: ExperimentConfig):
    if config.model_kind == "quadratic":
        w_opt = (np.full(config.dim, 1.0 / math.sqrt(config.dim)) if config.w_opt is None
                 else np.asarray(config.w_opt))
        return QuadraticModel(w_opt, config.sigma_v_sq, feature_dist=config.feature_dist)
    if config.dataset_path is not None:
        h, y = read_dataset_csv(config.dataset_path)
        if h.shape[1] != config.dim:
            raise ConfigError(f"dataset has {h.shape[1]} features but dim={config.dim}")
    else:
        rng = np.random.default_rng(_seed(config, _KEY_MODEL))
        h, y = synthetic_logistic_dataset(config.dataset_size, config.dim, rng,
                                          config.planted_norm, config.label_noise)
    return LogisticModel.fit(h, y, config.regularizer)


def topology_for_run(config: ExperimentConfig, run: int = 0):
    """The topology run ``run`` uses (the shared one unless topology_per_run)."""
    key = (_KEY_RUN, run, _SUB_TOPOLOGY) if config.topology_per_run else (_KEY_SHARED_TOPOLOGY,)
    return random_connected_topology(config.n_nodes, config.topology_edge_prob,
                                     np.random.default_rng(_seed(config, *key)))


def _combiner_for(config: ExperimentConfig, run: int) -> np.ndarray:
    if config.combiner == "identity":
        return np.eye(config.n_nodes)
    c = build_combiner(config.combiner, topology_for_run(config, run))
    c.check()
    if not spectral_summary(c).is_primitive:
        raise SimulationError(f"run {run}: combination matrix is not primitive")
    return np.array(c.a)


def combiners(config: ExperimentConfig, run_indices) -> np.ndarray:
    """Combination matrices for the given runs, shape (len(runs), N, N)."""
    run_indices = list(run_indices)
    if not config.topology_per_run:
        a = _combiner_for(config, 0)
        return np.broadcast_to(a, (len(run_indices),) + a.shape).copy()
    return np.stack([_combiner_for(config, r) for r in run_indices])


# -- simulation core -----------------------------------------------------------------------


class _SampleStream:
    """Per-run data streams, served one iteration at a time, stacked across runs."""

    def __init__(self, model, gens, n_nodes):
        self.model = model
        self.gens = gens
        self.n_nodes = n_nodes
        self._pos = SAMPLE_BLOCK
        self._h = self._y = None

    def next(self):
        if self._pos == SAMPLE_BLOCK:
            blocks = [self.model.sample(g, (SAMPLE_BLOCK, self.n_nodes)) for g in self.gens]
            self._h = np.stack([b[0] for b in blocks], axis=1)  # (block, R, N, M)
            self._y = np.stack([b[1] for b in blocks], axis=1)
            self._pos = 0
        out = self._h[self._pos], self._y[self._pos]
        self._pos += 1
        return out


def _initial_estimates(config, model, run_indices) -> np.ndarray:
    r, n, m = len(run_indices), config.n_nodes, model.dim
    if config.init == "zero":
        return np.zeros((r, n, m))
    if config.init == "optimum":
        return np.broadcast_to(model.w_opt, (r, n, m)).copy()
    return np.stack([
        config.init_radius * np.random.default_rng(_seed(config, _KEY_RUN, k, _SUB_INIT)).standard_normal((n, m))
        for k in run_indices
    ])


def _network_average(values: np.ndarray) -> np.ndarray:
    """Mean over the node axis (last), summed in ascending node order."""
    acc = values[..., 0]
    for k in range(1, values.shape[-1]):
        acc = acc + values[..., k]
    return acc / values.shape[-1]


def _record(model, w: np.ndarray):
    """Network-average excess risk and squared deviation, per run."""
    err = w - model.w_opt
    return _network_average(model.excess_risk(w)), _network_average(dot_last(err, err))


def simulate_runs(config: ExperimentConfig, model, run_indices) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Run a batch of Monte Carlo runs; returns {strategy: (er, msd)} arrays of shape (runs, records)."""
    run_indices = list(run_indices)
    kinds = [StrategyKind(s) for s in config.strategies]
    needs_a = any(k in (StrategyKind.DIFFUSION, StrategyKind.CONSENSUS) for k in kinds)
    a = combiners(config, run_indices) if needs_a else None
    gens = [np.random.default_rng(_seed(config, _KEY_RUN, r, _SUB_DATA)) for r in run_indices]
    stream = _SampleStream(model, gens, config.n_nodes)
    schedule = StepSchedule(config.mu)
    grid = recording_grid(config)
    w0 = _initial_estimates(config, model, run_indices)

    states = {}
    for k in kinds:
        if k is StrategyKind.CENTRALIZED:
            # the fusion center starts from the network-average initial estimate
            states[k] = _network_average(np.swapaxes(w0, -1, -2))
        else:
            states[k] = NetworkState(w0.copy())
    out = {k: (np.empty((len(run_indices), grid.size)), np.empty((len(run_indices), grid.size))) for k in kinds}

    slot = 0
    for i in range(1, config.iterations + 1):
        if slot < grid.size and grid[slot] == i:
            for k in kinds:
                if k is StrategyKind.CENTRALIZED:
                    w = states[k][:, None, :]
                else:
                    w = states[k].estimates
                if not np.isfinite(w).all():
                    raise SimulationError(f"non-finite estimate in {k.value} at iteration {i}")
                out[k][0][:, slot], out[k][1][:, slot] = _record(model, w)
            slot += 1
        if i == config.iterations:
            break
        samples = stream.next()
        for k in kinds:
            if k is StrategyKind.NONCOOP:
                noncoop_step(states[k], model, schedule, samples=samples)
            elif k is StrategyKind.DIFFUSION:
                diffusion_step(states[k], a, model, schedule, samples=samples)
            elif k is StrategyKind.CONSENSUS:
                consensus_step(states[k], a, model, schedule, samples=samples)
            else:
                states[k] = centralized_step(states[k], model, schedule, config.n_nodes,
                                             samples=samples, iteration=i)
    return {k.value: v for k, v in out.items()}


def _worker(args):
    config, model, runs = args
    return _simulate_quietly(config, model, runs)


def _simulate_quietly(config, model, runs):
    # divergence surfaces as a SimulationError at the next recorded iteration
    with np.errstate(over="ignore", invalid="ignore"):
        return simulate_runs(config, model, runs)


def _chunks(n: int, parts: int):
    parts = max(1, min(parts, n))
    bounds = np.linspace(0, n, parts + 1).astype(int)
    return [range(bounds[j], bounds[j + 1]) for j in range(parts)]


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        env = os.environ.get("DIFFLAB_THREADS")
        threads = int(env) if env else 1
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    return threads


def run_monte_carlo(config: ExperimentConfig, threads: int | None = None, model=None) -> LearningCurve:
    """Simulate ``config.runs`` independent runs and aggregate learning curves.

    Results do not depend on ``threads``: every run owns its streams and the
    per-run records are concatenated in run order before averaging.
    """
    threads = resolve_threads(threads)
    model = build_model(config) if model is None else model
    chunks = _chunks(config.runs, threads)
    if len(chunks) == 1:
        parts = [_simulate_quietly(config, model, chunks[0])]
    else:
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(_worker, [(config, model, c) for c in chunks]))
    grid = recording_grid(config)
    curves = {}
    for name in config.strategies:
        er = np.concatenate([p[name][0] for p in parts], axis=0)
        msd = np.concatenate([p[name][1] for p in parts], axis=0)
        curves[name] = StrategyCurve(grid, *_mean_and_stderr(er), config.runs, *_mean_and_stderr(msd))
    meta = {
        "config": config.to_dict(),
        "master_seed": config.master_seed,
        "config_hash": config.config_hash(),
        "version": f"v{__version__}",
        "common_random_numbers": True,
        "sample_block": SAMPLE_BLOCK,
    }
    return LearningCurve(grid, curves, config.runs, meta)


def _mean_and_stderr(x: np.ndarray):
    mean = x.mean(axis=0)
    if x.shape[0] < 2:
        return mean, np.zeros_like(mean)
    return mean, x.std(axis=0, ddof=1) / math.sqrt(x.shape[0])


# -- theory bridge ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TheoryInputs:
    rate: RateParams
    transient: TransientParams
    trace_rv: float
    fim: np.ndarray | None


def theory_inputs(config: ExperimentConfig, model=None, topology_samples: int = 20) -> TheoryInputs:
    """Assemble predictor inputs matching a simulation config.

    ``perron_norm_sq`` is averaged over the topologies the runs would use
    (the predictor is linear in it).
    """
    model = build_model(config) if model is None else model
    if isinstance(model, QuadraticModel):
        spectrum, noise = quad_spectrum(model), quad_noise_stats(model)
        fim = fim_quadratic(model) if model.sigma_v_sq > 0 else None
    else:
        spectrum = model.spectrum()
        rng = np.random.default_rng(_seed(config, _KEY_NOISE_ESTIMATE))
        noise = estimate_noise_stats(model, model.w_opt, spectrum, LOGISTIC_NOISE_SAMPLES, rng)
        fim = None
    n = config.n_nodes
    if config.combiner == "identity":
        p_sq = 1.0
    else:
        runs = range(min(topology_samples, config.runs)) if config.topology_per_run else range(1)
        p_sq = float(np.mean([spectral_summary(CombinationMatrix(a)).perron_norm_sq
                              for a in combiners(config, runs)]))
    rate = RateParams(spectrum.eigenvalues, config.mu, noise.projected_diag, min(max(p_sq, 1.0 / n), 1.0), n)
    if config.init == "optimum":
        energy = np.zeros(model.dim)
    else:
        var = config.init_radius**2 if config.init == "gaussian" else 0.0
        energy = initial_mode_energy(spectrum.eigenvectors, model.w_opt, p_sq, w0_var=var)
    transient = TransientParams(energy, spectrum.eigenvalues, config.mu)
    return TheoryInputs(rate, transient, noise.trace, fim)


def prediction_rows(config: ExperimentConfig, iterations, inputs: TheoryInputs | None = None):
    inputs = theory_inputs(config) if inputs is None else inputs
    rows = []
    for i in iterations:
        i = int(i)
        exact = asymptotic_er_predictor(inputs.rate, i) if i >= 2 else math.nan
        mlsp = mlsp_approx(config.mu, inputs.trace_rv, inputs.rate.perron_norm_sq, i)
        if i >= inputs.transient.min_iteration():
            lo, hi = transient_bounds(inputs.transient, i)
        else:
            lo = hi = math.nan
        cr = cramer_rao_msd(inputs.fim, config.n_nodes, i) if inputs.fim is not None else math.nan
        rows.append((i, exact, mlsp, lo, hi, cr))
    return rows


PREDICT_HEADER = ("i", "predictor_exact", "predictor_mlsp", "transient_lower", "transient_upper", "cramer_rao")


def format_prediction_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PREDICT_HEADER)
    for i, *vals in rows:
        w.writerow([i] + [_fmt(v) for v in vals])
    return buf.getvalue()


def write_prediction_csv(rows, path) -> None:
    with open(path, "w", newline="") as f:
        f.write(format_prediction_csv(rows))


# -- CSV persistence -------------------------------------------------------------------------

CURVE_HEADER = ("iteration", "strategy", "er_mean", "er_db", "er_stderr", "runs")


def _fmt(x: float) -> str:
    return "%.17g" % x


def format_curve_csv(curve: LearningCurve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_HEADER)
    for name, c in curve.strategies.items():
        for it, m, db, se in zip(c.iterations.tolist(), c.er_mean.tolist(), c.er_db.tolist(), c.er_stderr.tolist()):
            w.writerow([it, name, _fmt(m), _fmt(db), _fmt(se), c.runs])
    return buf.getvalue()


def write_curve_csv(curve: LearningCurve, path, write_metadata: bool = True) -> None:
    """Write the curve CSV and, next to it, a ``.meta.json`` sidecar."""
    with open(path, "w", newline="") as f:
        f.write(format_curve_csv(curve))
    if write_metadata:
        with open(metadata_path(path), "w") as f:
            json.dump(curve.metadata, f, indent=2, sort_keys=True)
            f.write("\n")


def metadata_path(path) -> str:
    root, _ = os.path.splitext(str(path))
    return root + ".meta.json"


def read_curve_csv(path) -> LearningCurve:
    rows: dict[str, list] = {}
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if tuple(header) != CURVE_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(CURVE_HEADER):
                raise ValueError(f"{path}:{line_no}: expected {len(CURVE_HEADER)} fields, got {len(row)}")
            rows.setdefault(row[1], []).append((int(row[0]), float(row[2]), float(row[4]), int(row[5])))
    curves = {}
    for name, recs in rows.items():
        arr = np.array([r[:3] for r in recs])
        curves[name] = StrategyCurve(arr[:, 0].astype(np.int64), arr[:, 1], arr[:, 2], recs[0][3])
    first = next(iter(curves.values()))
    return LearningCurve(first.iterations, curves, first.runs)


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def read_dataset_csv(path):
    """Label (+1/-1) in column one, then the features; optional header row."""
    features, labels = [], []
    width = None
    with open(path, newline="") as f:
        for line_no, row in enumerate(csv.reader(f), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if line_no == 1 and not _is_number(row[0].strip()):
                continue
            if width is None:
                width = len(row)
                if width < 2:
                    raise ValueError(f"{path}:{line_no}: need a label and at least one feature")
            elif len(row) != width:
                raise ValueError(f"{path}:{line_no}: expected {width} fields, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise ValueError(f"{path}:{line_no}: non-numeric field") from None
            if vals[0] not in (1.0, -1.0):
                raise ValueError(f"{path}:{line_no}: label must be +1 or -1, got {row[0].strip()}")
            labels.append(vals[0])
            features.append(vals[1:])
    if not labels:
        raise ValueError(f"{path}: no samples")
    return np.array(features), np.array(labels)


def write_dataset_csv(features, labels, path, header: bool = True) -> None:
    features = np.asarray(features, dtype=float)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        if header:
            w.writerow(["label"] + [f"x{j}" for j in range(features.shape[1])])
        for y, h in zip(np.asarray(labels).tolist(), features.tolist()):
            w.writerow([int(y)] + [_fmt(v) for v in h])

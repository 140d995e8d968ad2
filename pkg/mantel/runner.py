"""Orchestration behind ``manage.py adamant``.

Each ``run_*`` function takes a RunConfig, reads and writes files, and
returns what it wrote. Settings are resolved by the management command;
nothing here reads Django settings.
"""
import logging
import math
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from . import simgen
from .adamant import (
    MetricPair,
    MetricPairList,
    PermutationPlan,
    adamant_grams,
    classical_mantel_test,
    lambda_grid_from_heritability,
    metric_grams,
)
from .exceptions import (
    DegenerateSimilarityError,
    DimensionMismatchError,
    EmptyMetricListError,
    InvalidConfigError,
)
from .kernels import (
    DEFAULT_RANK_TOLERANCE,
    ColumnState,
    DataMatrix,
    KernelSpec,
    center_columns,
    residualize,
    standardize_columns,
)
from .readers import FLOAT_FORMAT, load_epochs_dir, load_matrix, write_epochs, write_matrix
from .reports import PairResult, TestReport
from .spectral import DEFAULT_BANDS, BandSpec, coherence_features, pair_labels
from .stats import rv_coefficient

logger = logging.getLogger(__name__)

COMMANDS = ("test", "simulate", "coherence", "power")

DESIGNS = ("mvvc", "univariate-random", "univariate-fixed", "rotation", "eeg-bernoulli", "eeg-vc")

ADAMANT_METHOD = "adamant"
CLASSICAL_METHOD = "classical"
POWER_COLUMNS = ["effect_size", "method", "power", "replicates", "mc_se"]


@dataclass(frozen=True)
class DesignDefaults:
    n: int
    p: int
    q: int
    lambda_x: tuple
    lambda_y: tuple
    effect_sizes: tuple


DESIGN_DEFAULTS = {
    "mvvc": DesignDefaults(200, 40, 20, ("10", "100", "inf"), ("10", "100", "500", "1000", "inf"),
                           (0.0, 0.01, 0.02, 0.03, 0.04)),
    "univariate-random": DesignDefaults(200, 100, 1, ("100", "1000", "2500", "5000", "7500", "10000", "25000", "inf"),
                                        ("inf",), (0.0, 0.035 ** 2)),
    "univariate-fixed": DesignDefaults(200, 100, 1, ("100", "1000", "2500", "5000", "7500", "10000", "25000", "inf"),
                                       ("inf",), (0.0, 0.05)),
    "rotation": DesignDefaults(100, 2, 1, ("0", "10", "inf"), ("inf",), (0.0, 0.12 * math.pi, 0.3 * math.pi)),
    "eeg-bernoulli": DesignDefaults(200, 300, 20, ("10", "100", "inf"), ("10", "100", "inf"), (0.0, 0.5, 1.0)),
    "eeg-vc": DesignDefaults(200, 300, 20, ("10", "100", "inf"), ("10", "100", "inf"),
                             (0.0, 2.5e-6, 5e-6, 7.5e-6, 1e-5)),
}


@dataclass(frozen=True)
class RunConfig:
    command: str = "test"
    x_path: str = None
    y_path: str = None
    lambda_x: tuple = None
    lambda_y: tuple = None
    pairs: tuple = ()
    heritability_grid: tuple = ()
    permutations: int = 1000
    seed: int = 42
    standardize_x: bool = False
    standardize_y: bool = False
    covariates_path: str = None
    bands: tuple = ()
    output_path: str = None
    n_jobs: int = 1
    literal_formula: bool = False
    rank_tolerance: float = DEFAULT_RANK_TOLERANCE

    # simulate / power / coherence
    design: str = "mvvc"
    n: int = None
    p: int = None
    q: int = None
    effect_sizes: tuple = ()
    sigma2: float = 1.0
    design_rho: float = 0.1
    offdiag_factor: float = 0.1
    trials: int = 100
    series_length: int = 1000
    sample_rate_hz: float = 256.0
    epochs_dir: str = None
    out_x: str = None
    out_y: str = None
    replicates: int = 200
    alpha: float = 0.05

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InvalidConfigError(f"unknown command {self.command!r}; choose from {COMMANDS}")
        if self.design not in DESIGNS:
            raise InvalidConfigError(f"unknown design {self.design!r}; choose from {DESIGNS}")
        if int(self.permutations) != self.permutations or self.permutations < 1:
            raise InvalidConfigError(f"number of permutations must be >= 1, got {self.permutations!r}")
        if self.command == "power" and (int(self.replicates) != self.replicates or self.replicates < 1):
            raise InvalidConfigError(f"a power study needs at least one replicate, got {self.replicates!r}")
        if not 0.0 < self.alpha < 1.0:
            raise InvalidConfigError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        for name in ("lambda_x", "lambda_y"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, tuple(str(token) for token in value))
        object.__setattr__(self, "pairs", tuple(tuple(str(t) for t in pair) for pair in self.pairs))
        object.__setattr__(self, "heritability_grid", tuple(float(h) for h in self.heritability_grid))
        object.__setattr__(self, "effect_sizes", tuple(float(e) for e in self.effect_sizes))
        object.__setattr__(
            self, "bands", tuple(band if isinstance(band, BandSpec) else BandSpec.parse(band) for band in self.bands)
        )

    @property
    def defaults(self):
        return DESIGN_DEFAULTS[self.design]

    def echo(self):
        """JSON-ready copy of the configuration, enough to rerun the command."""
        data = asdict(self)
        for key, value in data.items():
            if isinstance(value, Path):
                data[key] = str(value)
            elif isinstance(value, tuple):
                data[key] = [list(item) if isinstance(item, tuple) else item for item in value]
        data["bands"] = [f"{band.name}:{band.low_hz:g}:{band.high_hz:g}" for band in self.bands]
        # n_jobs is stored on the report, not in the config echo
        data.pop("n_jobs")
        return data


# ==================== TEST ====================

def prepare(X, standardize, covariates=None, rank_tolerance=DEFAULT_RANK_TOLERANCE):
    """Center (or standardize) and optionally residualize on centered covariates."""
    X = standardize_columns(X) if standardize else center_columns(X)
    if covariates is not None:
        X = center_columns(residualize(X, center_columns(covariates), rank_tolerance))
    return X


def _specs(tokens):
    return [KernelSpec.from_token(token) for token in tokens]


def expand_metrics(config, p_x, lambda_x=None, lambda_y=None):
    """Explicit pairs, or the cross product of the X and Y grids (heritability values join the X grid)."""
    if config.pairs:
        return MetricPairList(tuple(MetricPair(*_specs(pair)) for pair in config.pairs))
    lambda_x = config.lambda_x if lambda_x is None else lambda_x
    lambda_y = config.lambda_y if lambda_y is None else lambda_y
    x_specs = _specs(lambda_x or ())
    if config.heritability_grid:
        x_specs += [KernelSpec.from_token(lam) for lam in lambda_grid_from_heritability(p_x, config.heritability_grid)]
    x_specs = list(dict.fromkeys(x_specs))
    y_specs = list(dict.fromkeys(_specs(lambda_y or ())))
    if not x_specs or not y_specs:
        raise EmptyMetricListError("empty lambda grid: give --lambda-x/--heritability and --lambda-y, or --pairs")
    metrics = MetricPairList.cross_product(x_specs, y_specs)
    logger.info("expanded %d x %d lambda grid into %d kernel pairs", len(x_specs), len(y_specs), len(metrics))
    return metrics


def _rv(H, K):
    try:
        return rv_coefficient(H, K).statistic
    except DegenerateSimilarityError:
        return None


def resolve_test_grids(config):
    """Grids for the test command: the linear kernel unless a grid (or heritability values) is given."""
    lambda_x = config.lambda_x
    if lambda_x is None:
        lambda_x = () if config.heritability_grid else ("inf",)
    return lambda_x, ("inf",) if config.lambda_y is None else config.lambda_y


def analyze(X, Y, config, metrics):
    """AdaMant on prepared matrices; returns the AdaMant result and the per-pair RV coefficients."""
    H_list, K_list = metric_grams(X, Y, metrics, rank_tolerance=config.rank_tolerance)
    plan = PermutationPlan(config.permutations, config.seed)
    result = adamant_grams(H_list, K_list, plan, config.n_jobs, config.literal_formula, metrics)
    return result, [_rv(H, K) for H, K in zip(H_list, K_list)]


def run_test(config):
    start = time.perf_counter()
    X, Y = load_matrix(config.x_path), load_matrix(config.y_path)
    if X.n != Y.n:
        raise DimensionMismatchError(f"X has {X.n} observations, Y has {Y.n}")
    covariates = load_matrix(config.covariates_path) if config.covariates_path else None
    X = prepare(X, config.standardize_x, covariates, config.rank_tolerance)
    Y = prepare(Y, config.standardize_y, covariates, config.rank_tolerance)

    metrics = expand_metrics(config, X.p, *resolve_test_grids(config))
    result, rvs = analyze(X, Y, config, metrics)
    pairs = [
        PairResult(pair.x_spec.token, pair.y_spec.token, float(stat), float(p_value), rv)
        for pair, stat, p_value, rv in zip(metrics, result.per_metric_stat, result.per_metric_p, rvs)
    ]
    report = TestReport(
        config=config.echo(),
        n=X.n,
        p=X.p,
        q=Y.p,
        seed=config.seed,
        permutations=result.B,
        pairs=pairs,
        adaptive_p=result.adaptive_p,
        selected_pair=result.selected_metric,
        runtime_ms=(time.perf_counter() - start) * 1000.0,
        n_jobs=config.n_jobs,
        literal_formula=config.literal_formula,
    )
    logger.info("adamant finished: adaptive p = %.6g, selected %s", report.adaptive_p, report.selected.label)
    if config.output_path:
        report.write(config.output_path)
    return report


# ==================== SIMULATE ====================

def design_config(config, effect):
    """Generator configuration for ``config.design`` at one effect size."""
    defaults = config.defaults
    n, p, q = config.n or defaults.n, config.p or defaults.p, config.q or defaults.q
    design = config.design
    if design == "mvvc":
        return simgen.MultivariateVcConfig(n, p, q, sigma_A2=effect, offdiag_factor=config.offdiag_factor)
    if design == "univariate-random":
        return simgen.UnivariateSimConfig(n, p, simgen.RandomEffects(effect), config.sigma2, config.design_rho)
    if design == "univariate-fixed":
        return simgen.UnivariateSimConfig(n, p, simgen.FixedEffects(effect), config.sigma2, config.design_rho)
    if design == "rotation":
        return simgen.RotationDemoConfig(n, 2, theta=effect, sigma2=config.sigma2)
    scheme = simgen.BernoulliWeights(w_scale=effect) if design == "eeg-bernoulli" else simgen.VcWeights(effect)
    return simgen.EegGeneticsConfig(
        n=n, p=p, q=q, sample_rate_hz=config.sample_rate_hz, series_length=config.series_length,
        trials=config.trials, null_channels=q // 2, weight_scheme=scheme,
    )


def simulate_dataset(config, effect, seed):
    """(X, Y) for one replicate; EEG designs also return the per-subject recordings."""
    sim = design_config(config, effect)
    x_seed, y_seed = (int(s) for s in np.random.SeedSequence(seed).generate_state(2))
    design = config.design
    if design == "rotation":
        demo = simgen.gen_rotation_demo(sim, y_seed)
        return demo.X, DataMatrix(demo.y, ColumnState.RAW, ("y",)), None
    if design.startswith("eeg"):
        X = simgen.gen_snp_groups(sim, x_seed)
        return X, None, simgen.gen_ar2_mixture_eeg(sim, X, y_seed)
    X = simgen.gen_design(sim.n, sim.p, config.design_rho, x_seed)
    if design == "mvvc":
        return X, simgen.gen_multivariate_vc(X, sim, y_seed), None
    return X, DataMatrix(simgen.gen_univariate(X, sim, y_seed), ColumnState.RAW, ("y",)), None


def coherence_outcome(recordings, bands):
    """n x Q(Q-1)/2 coherence matrix per band, subjects in order."""
    rows = {band.name: [] for band in bands}
    channels = None
    for trials in recordings:
        if channels is None:
            channels = trials[0].channel_names
        for name, features in coherence_features(trials, bands).items():
            rows[name].append(features)
    labels = tuple(pair_labels(channels))
    return {name: DataMatrix(np.vstack(values), ColumnState.RAW, labels) for name, values in rows.items()}


def run_simulate(config):
    effect = config.effect_sizes[0] if config.effect_sizes else config.defaults.effect_sizes[-1]
    X, Y, recordings = simulate_dataset(config, effect, config.seed)
    written = []
    if config.out_x:
        written.append(write_matrix(X, config.out_x))
    if Y is not None and config.out_y:
        written.append(write_matrix(Y, config.out_y))
    if recordings is not None:
        if config.epochs_dir:
            directory = Path(config.epochs_dir)
            directory.mkdir(parents=True, exist_ok=True)
            width = len(str(len(recordings)))
            for index, trials in enumerate(recordings, start=1):
                written.append(write_epochs(trials, directory / f"subject{index:0{width}d}.csv"))
        if config.out_y:
            theta = coherence_outcome(recordings, [DEFAULT_BANDS["theta"]])["theta"]
            written.append(write_matrix(theta, config.out_y))
    if not written:
        raise InvalidConfigError("nothing to write: give --out-x, --out-y or --epochs-dir")
    logger.info("simulated %s (effect %g, seed %d): %d files", config.design, effect, config.seed, len(written))
    return written


# ==================== COHERENCE ====================

def band_output_path(output_path, band, several):
    path = str(output_path)
    if "{band}" in path:
        return Path(path.format(band=band.name))
    if not several:
        return Path(path)
    path = Path(path)
    return path.with_name(f"{path.stem}_{band.name}{path.suffix}")


def run_coherence(config):
    bands = config.bands or (DEFAULT_BANDS["theta"],)
    subjects = load_epochs_dir(config.epochs_dir, config.sample_rate_hz)
    first = next(iter(subjects.values()))[0]
    for name, trials in subjects.items():
        shape = trials[0].samples.shape
        if shape != first.samples.shape:
            raise DimensionMismatchError(f"subject {name!r} has Q x T = {shape}, expected {first.samples.shape}")
    outcomes = coherence_outcome(subjects.values(), bands)
    written = []
    for band in bands:
        path = band_output_path(config.output_path, band, len(bands) > 1)
        written.append(write_matrix(outcomes[band.name], path))
        logger.info("%s coherence: %d subjects x %d pairs -> %s", band.name, *outcomes[band.name].values.shape, path)
    return written


# ==================== POWER ====================

def replicate_seed(seed, effect_index, replicate):
    return int(np.random.SeedSequence([seed, effect_index, replicate]).generate_state(1)[0])


def power_replicate(config, effect, seed, metrics):
    """Rejections (method -> bool) for one simulated dataset."""
    X, Y, recordings = simulate_dataset(config, effect, seed)
    if recordings is not None:
        Y = coherence_outcome(recordings, [DEFAULT_BANDS["theta"]])["theta"]
    X, Y = center_columns(X), center_columns(Y)
    replicate_config = replace(config, seed=seed, n_jobs=1)
    result, _ = analyze(X, Y, replicate_config, metrics)
    rejections = {ADAMANT_METHOD: result.adaptive_p <= config.alpha}
    for pair, p_value in zip(metrics, result.per_metric_p):
        rejections[f"mantel {pair.x_spec.token}/{pair.y_spec.token}"] = p_value <= config.alpha
    classical = classical_mantel_test(X, Y, PermutationPlan(config.permutations, seed))
    rejections[CLASSICAL_METHOD] = classical.p_value <= config.alpha
    return rejections


def run_power(config):
    effects = config.effect_sizes or config.defaults.effect_sizes
    first_design = design_config(config, effects[0])
    metrics = expand_metrics(
        config, first_design.p, config.lambda_x or config.defaults.lambda_x, config.lambda_y or config.defaults.lambda_y
    )

    rows = []
    for effect_index, effect in enumerate(effects):
        outcomes = Parallel(n_jobs=config.n_jobs, prefer="threads")(
            delayed(power_replicate)(config, effect, replicate_seed(config.seed, effect_index, r), metrics)
            for r in range(config.replicates)
        )
        for method in outcomes[0]:
            power = sum(outcome[method] for outcome in outcomes) / config.replicates
            rows.append({
                "effect_size": effect,
                "method": method,
                "power": power,
                "replicates": config.replicates,
                "mc_se": math.sqrt(power * (1.0 - power) / config.replicates),
            })
        logger.info("power %s effect %g: adamant %.3f over %d replicates",
                    config.design, effect, rows[-len(outcomes[0])]["power"], config.replicates)

    table = pd.DataFrame(rows, columns=POWER_COLUMNS)
    if config.output_path:
        table.to_csv(config.output_path, index=False, float_format=FLOAT_FORMAT)
    return table


RUNNERS = {
    "test": run_test,
    "simulate": run_simulate,
    "coherence": run_coherence,
    "power": run_power,
}


def run(config):
    return RUNNERS[config.command](config)

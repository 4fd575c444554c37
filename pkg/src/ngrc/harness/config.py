"""Experiment configuration: strict JSON round-tripping plus presets.

Every field has a default; unknown keys are rejected so typos fail loudly.
All integer seeds are offset by master_seed at use time, which is what the
NGRC_SEED environment variable overrides.
"""

import dataclasses
import json
import math
from dataclasses import dataclass, field

from ngrc.errors import ConfigError

SYSTEM_KINDS = ("lorenz", "rossler", "rossler_ou")


@dataclass
class SystemBlock:
    kind: str = "lorenz"
    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0
    a: float = 0.2
    b: float = 0.4
    c: float = 5.7
    ou_tau: float = 5.0
    ou_rho: float = 0.5 * math.sqrt(2.0)
    # rossler_ou only: keep the eta drive out of the observed channels
    hide_eta: bool = False


@dataclass
class IntegrationBlock:
    sample_step: float = 0.025
    internal_step: float = 0.0  # 0 means sample_step / 5
    transient: int = 1000
    initial_train: tuple = (1.0, 1.0, 1.0)
    initial_val: tuple = (-3.0, 2.0, 0.5)
    initial_test: tuple = (2.0, -1.0, 0.75)


@dataclass
class EmbeddingBlock:
    H: int = 25
    epsilon: float = 0.01


@dataclass
class ProjectionBlock:
    m: int = 1000
    seed: int = 42


@dataclass
class TrainingBlock:
    T: int = 100000
    noise_level: float = 0.01
    lam: float = 0.0
    noise_seed: int = 101
    val_noise_seed: int = 202
    data_seed: int = 11  # OU drive seed for the training trajectory
    val_data_seed: int = 12
    test_data_seed: int = 13
    output_channels: tuple = ()  # empty means every observed channel
    input_channels: tuple = ()
    # constant-offset training set: one trajectory per value, recorded as
    # an extra constant input channel named "eta"
    eta_values: tuple = ()
    block_cols: int = 4096


@dataclass
class ErrorCurveBlock:
    m_grid: tuple = (100, 200, 500, 1000)
    noise_levels: tuple = (0.0, 0.01)


@dataclass
class BifurcationBlock:
    eta_min: float = -0.75
    eta_max: float = 0.75
    n_eta: int = 31
    # ~200 maxima per eta: chaotic bands need dense sampling or the
    # Hausdorff comparison picks up gaps between sampled peaks; the long
    # transient lets the model settle after each continuation jump
    steps_per_eta: int = 12000
    transient: int = 3000
    oracle: bool = True
    oracle_samples: int = 12000
    oracle_transient: int = 3000


@dataclass
class PhaseBlock:
    n_states: int = 200
    max_steps: int = 20000
    tol: float = 1e-3
    test_T: int = 4000
    n_consistency: int = 10


@dataclass
class RolloutBlock:
    n_steps: int = 100000
    threshold: float = 0.3
    test_T: int = 2000


@dataclass
class HistogramBlock:
    bins: int = 50
    T: int = 10000


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    master_seed: int = 0
    out_dir: str = "artifacts"
    tasks: tuple = ("generate", "train", "feature-hist", "rollout")
    system: SystemBlock = field(default_factory=SystemBlock)
    integration: IntegrationBlock = field(default_factory=IntegrationBlock)
    embedding: EmbeddingBlock = field(default_factory=EmbeddingBlock)
    projection: ProjectionBlock = field(default_factory=ProjectionBlock)
    training: TrainingBlock = field(default_factory=TrainingBlock)
    error_curve: ErrorCurveBlock = field(default_factory=ErrorCurveBlock)
    bifurcation: BifurcationBlock = field(default_factory=BifurcationBlock)
    phase: PhaseBlock = field(default_factory=PhaseBlock)
    rollout: RolloutBlock = field(default_factory=RolloutBlock)
    histogram: HistogramBlock = field(default_factory=HistogramBlock)

    def seed(self, base):
        """Offset a configured seed by the master seed."""
        return int(base) + int(self.master_seed)

    def internal_step(self):
        step = self.integration.internal_step
        return step if step > 0 else self.integration.sample_step / 5.0


_BLOCK_TYPES = {
    f.name: f.default_factory
    for f in dataclasses.fields(ExperimentConfig)
    if f.default_factory is not dataclasses.MISSING
}


def _coerce(value, template):
    # JSON has no tuples; every sequence-valued field is a tuple internally
    if isinstance(template, tuple):
        return tuple(_coerce(v, None) for v in value)
    if isinstance(value, list):
        return tuple(_coerce(v, None) for v in value)
    return value


def _block_from_dict(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
    defaults = cls()
    kwargs = {}
    for key, value in data.items():
        kwargs[key] = _coerce(value, getattr(defaults, key))
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}")


def config_from_dict(data):
    """Build a config from a (possibly partial) plain dict."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"config: unknown key(s) {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if key in _BLOCK_TYPES:
            kwargs[key] = _block_from_dict(_BLOCK_TYPES[key], value, key)
        else:
            kwargs[key] = _coerce(value, getattr(ExperimentConfig(), key))
    cfg = ExperimentConfig(**kwargs)
    validate_config(cfg)
    return cfg


def config_to_dict(cfg):
    """Plain-dict form; tuples become lists, so it is JSON-ready."""

    def convert(value):
        if dataclasses.is_dataclass(value):
            return {f.name: convert(getattr(value, f.name))
                    for f in dataclasses.fields(value)}
        if isinstance(value, tuple):
            return [convert(v) for v in value]
        return value

    return convert(cfg)


def validate_config(cfg):
    if cfg.system.kind not in SYSTEM_KINDS:
        raise ConfigError(
            f"system.kind must be one of {SYSTEM_KINDS}, got {cfg.system.kind!r}"
        )
    if cfg.training.T < cfg.embedding.H + 2:
        raise ConfigError("training.T too small for the delay depth")
    if cfg.embedding.H < 0 or cfg.projection.m < 1:
        raise ConfigError("need H >= 0 and projection.m >= 1")
    if not (cfg.integration.sample_step > 0):
        raise ConfigError("integration.sample_step must be positive")
    if cfg.system.kind != "rossler" and cfg.training.eta_values:
        raise ConfigError("training.eta_values applies to the rossler system only")
    return cfg


def load_config(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}")
    return config_from_dict(data)


def save_config(cfg, path):
    with open(path, "w") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")


def apply_desk_scale(cfg):
    """Shrink the training length for fast runs; everything else stands."""
    cfg.training.T = min(cfg.training.T, 20000)
    return cfg


def lorenz_config():
    """Lorenz attractor reconstruction from the scalar x channel."""
    cfg = ExperimentConfig(name="lorenz-x")
    cfg.system = SystemBlock(kind="lorenz")
    cfg.integration = IntegrationBlock(sample_step=0.025)
    cfg.training.output_channels = ("x",)
    cfg.tasks = ("generate", "train", "feature-hist", "rollout")
    return validate_config(cfg)


def rossler_config():
    """Rossler attractor reconstruction from the scalar x channel."""
    cfg = ExperimentConfig(name="rossler-x")
    cfg.system = SystemBlock(kind="rossler")
    cfg.integration = IntegrationBlock(
        sample_step=0.1, initial_train=(0.0, -6.0, 0.0),
        initial_val=(1.0, -4.0, 0.1), initial_test=(-2.0, -5.0, 0.05))
    cfg.training.output_channels = ("x",)
    cfg.rollout.test_T = 1200
    cfg.tasks = ("generate", "train", "feature-hist", "rollout")
    return validate_config(cfg)


def error_curve_config():
    """Train/validation error versus projection dimension, Lorenz x."""
    cfg = lorenz_config()
    cfg.name = "lorenz-error-curve"
    cfg.tasks = ("generate", "error-curve")
    return validate_config(cfg)


def bifurcation_config():
    """Rossler bifurcation diagram from four constant-offset training runs."""
    cfg = ExperimentConfig(name="rossler-bifurcation")
    cfg.system = SystemBlock(kind="rossler")
    cfg.integration = IntegrationBlock(
        sample_step=0.1, initial_train=(0.0, -6.0, 0.0),
        initial_val=(1.0, -4.0, 0.1), initial_test=(-2.0, -5.0, 0.05))
    cfg.projection = ProjectionBlock(m=6000, seed=42)
    cfg.training.output_channels = ("x", "y", "z")
    cfg.training.input_channels = ("eta",)
    cfg.training.eta_values = (-0.75, -0.25, 0.25, 0.75)
    cfg.tasks = ("generate", "train", "bifurcate")
    return validate_config(cfg)


def bifurcation_ou_config():
    """Rossler bifurcation diagram from one OU-driven training run."""
    cfg = ExperimentConfig(name="rossler-ou-bifurcation")
    # drive std 0.3; the parameter band has periodic windows as narrow as
    # 0.03 in eta, and stronger drives push the trusted +-1 std band onto
    # window edges the surrogate cannot place exactly from finite data
    cfg.system = SystemBlock(kind="rossler_ou", ou_rho=0.3 * math.sqrt(2.0))
    cfg.integration = IntegrationBlock(
        sample_step=0.1, initial_train=(0.0, -6.0, 0.0),
        initial_val=(1.0, -4.0, 0.1), initial_test=(-2.0, -5.0, 0.05))
    cfg.projection = ProjectionBlock(m=6000, seed=42)
    cfg.training.output_channels = ("x", "y", "z")
    cfg.training.input_channels = ("eta",)
    # sweep to +-2 std with fine steps so the continuation tracks each
    # attractor branch through the band's bistable window edges
    cfg.bifurcation.eta_min = -0.6
    cfg.bifurcation.eta_max = 0.6
    cfg.bifurcation.n_eta = 25
    cfg.tasks = ("generate", "train", "bifurcate")
    return validate_config(cfg)


def phase_config():
    """Asymptotic phase of the period-1 Rossler limit cycle (b = 1.6)."""
    cfg = ExperimentConfig(name="rossler-phase")
    # drive std 0.25: strong enough to explore off-cycle states, weak
    # enough that the averaged model keeps a period-1 attractor
    cfg.system = SystemBlock(kind="rossler_ou", b=1.6, hide_eta=True,
                             ou_rho=0.25 * math.sqrt(2.0))
    cfg.integration = IntegrationBlock(
        sample_step=0.1, initial_train=(0.0, -6.0, 0.0),
        initial_val=(1.0, -4.0, 0.1), initial_test=(-2.0, -5.0, 0.05))
    cfg.training.output_channels = ("x", "y", "z")
    cfg.tasks = ("generate", "train", "phase")
    return validate_config(cfg)


PRESETS = {
    "lorenz": lorenz_config,
    "rossler": rossler_config,
    "error-curve": error_curve_config,
    "bifurcation": bifurcation_config,
    "bifurcation-ou": bifurcation_ou_config,
    "phase": phase_config,
}

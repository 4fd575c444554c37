"""Benchmark systems, fixed-step RK4 integration, noise injection, maxima.

Systems are small frozen dataclasses acting as variant tags with
parameters; ``derivative`` and ``integrate`` dispatch on the type. The
Rossler variants accept an additive offset ``eta`` on dy/dt, either
constant or driven by an exact-discretized Ornstein-Uhlenbeck process.
"""

import math
from dataclasses import dataclass

import numpy as np

from ngrc import _kernels
from ngrc.errors import ConfigError, IntegrationError


def _check_finite_params(obj, names):
    for name in names:
        v = getattr(obj, name)
        if not math.isfinite(v):
            raise ConfigError(f"{type(obj).__name__}.{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class Lorenz:
    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0

    channels = ("x", "y", "z")

    def __post_init__(self):
        _check_finite_params(self, ("sigma", "rho", "beta"))


@dataclass(frozen=True)
class Rossler:
    a: float = 0.2
    b: float = 0.4
    c: float = 5.7

    channels = ("x", "y", "z")

    def __post_init__(self):
        _check_finite_params(self, ("a", "b", "c"))


@dataclass(frozen=True)
class RosslerOU:
    """Rossler with dy/dt += eta(t), eta an Ornstein-Uhlenbeck process.

    Stationary std of eta is ou_rho / sqrt(2) under the AR(1) update used
    by ``integrate``; the default ou_rho makes that 0.5.
    """

    a: float = 0.2
    b: float = 0.4
    c: float = 5.7
    ou_tau: float = 5.0
    ou_rho: float = 0.5 * math.sqrt(2.0)
    noise_seed: int = 0

    channels = ("x", "y", "z", "eta")

    def __post_init__(self):
        _check_finite_params(self, ("a", "b", "c", "ou_tau", "ou_rho"))
        if self.ou_tau <= 0:
            raise ConfigError(f"ou_tau must be positive, got {self.ou_tau!r}")


@dataclass(frozen=True)
class LinearDecay:
    """Scalar test system dx/dt = -rate * x with a known closed form."""

    rate: float = 1.0

    channels = ("x",)

    def __post_init__(self):
        _check_finite_params(self, ("rate",))


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled multichannel series; row n is the state at
    start_time + n * sample_step. Values are immutable."""

    sample_step: float
    channels: tuple
    values: np.ndarray
    start_time: float = 0.0

    def __post_init__(self):
        # copy so freezing the array never affects the caller's buffer
        values = np.array(self.values, dtype=float, order="C")
        if values.ndim != 2:
            raise ConfigError("trajectory values must be a 2-D array")
        if values.shape[1] != len(self.channels):
            raise ConfigError(
                f"{values.shape[1]} columns but {len(self.channels)} channel names"
            )
        if values.shape[1] < 1:
            raise ConfigError("trajectory needs at least one channel")
        if values.size and not np.all(np.isfinite(values)):
            raise ConfigError("trajectory values must be finite")
        if not (self.sample_step > 0):
            raise ConfigError(f"sample_step must be positive, got {self.sample_step!r}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "channels", tuple(self.channels))

    @property
    def n_samples(self):
        return self.values.shape[0]

    @property
    def n_channels(self):
        return self.values.shape[1]

    @property
    def times(self):
        return self.start_time + self.sample_step * np.arange(self.n_samples)

    def channel(self, name):
        """Return one channel as a 1-D array."""
        try:
            idx = self.channels.index(name)
        except ValueError:
            raise ConfigError(f"no channel named {name!r}; have {self.channels}")
        return self.values[:, idx]


def select_channels(traj, names):
    """Project a trajectory onto a subset of its channels, in the given order."""
    idx = [traj.channels.index(n) if n in traj.channels else -1 for n in names]
    if -1 in idx:
        missing = [n for n in names if n not in traj.channels]
        raise ConfigError(f"channels {missing} not in trajectory {traj.channels}")
    return Trajectory(traj.sample_step, tuple(names),
                      traj.values[:, idx], traj.start_time)


def derivative(spec, state, eta=0.0):
    """Right-hand side of the system at ``state``; eta offsets dy/dt for
    the Rossler variants and is ignored elsewhere."""
    state = np.asarray(state, dtype=float)
    dim = 1 if isinstance(spec, LinearDecay) else 3
    if state.shape != (dim,):
        raise ConfigError(f"state must have shape ({dim},), got {state.shape}")
    if isinstance(spec, Lorenz):
        x, y, z = state
        return np.array([spec.sigma * (y - x),
                         x * (spec.rho - z) - y,
                         x * y - spec.beta * z])
    if isinstance(spec, (Rossler, RosslerOU)):
        x, y, z = state
        return np.array([-y - z,
                         x + spec.a * y + eta,
                         spec.b + z * (x - spec.c)])
    if isinstance(spec, LinearDecay):
        return np.array([-spec.rate * state[0]])
    raise ConfigError(f"unknown system spec {type(spec).__name__}")


def _integrate_linear_decay(rate, x, h, n_sub, n_keep, n_transient, out):
    # same RK4 layout as the compiled kernels, kept here because the test
    # system never needs speed
    total = n_transient + n_keep
    for s in range(total):
        for _ in range(n_sub):
            k1 = -rate * x
            k2 = -rate * (x + 0.5 * h * k1)
            k3 = -rate * (x + 0.5 * h * k2)
            k4 = -rate * (x + h * k3)
            x = x + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        if not math.isfinite(x):
            return s
        if s >= n_transient:
            out[s - n_transient, 0] = x
    return -1


def _resolve_substeps(internal_step, sample_step):
    if not (internal_step > 0 and sample_step > 0):
        raise ConfigError("steps must be positive")
    n_sub = int(round(sample_step / internal_step))
    if n_sub < 1 or abs(n_sub * internal_step - sample_step) > 1e-9 * sample_step:
        raise ConfigError(
            f"sample_step {sample_step!r} is not an integer multiple "
            f"of internal_step {internal_step!r}"
        )
    return n_sub


def integrate(spec, initial, internal_step, sample_step, n_samples,
              transient_samples=0, noise_seed=None, eta=0.0):
    """Advance the system with classical RK4 and return sampled states.

    Row n of the result is the state after (transient_samples + n + 1)
    sample steps from ``initial``; the first transient_samples samples are
    discarded. For RosslerOU the eta variable follows the exact AR(1)
    discretization of the OU process per internal step (frozen during RK
    substeps) and is recorded as a fourth channel; ``noise_seed`` overrides
    the seed carried by the spec. For the other systems ``eta`` is a
    constant offset passed through to ``derivative``.
    """
    if n_samples < 1:
        raise ConfigError(f"n_samples must be >= 1, got {n_samples}")
    if transient_samples < 0:
        raise ConfigError("transient_samples must be >= 0")
    n_sub = _resolve_substeps(internal_step, sample_step)
    initial = np.asarray(initial, dtype=float)

    if isinstance(spec, RosslerOU):
        if initial.shape not in ((3,), (4,)):
            raise ConfigError("RosslerOU initial state must have 3 or 4 components")
        eta0 = float(initial[3]) if initial.shape == (4,) else 0.0
        out = np.empty((n_samples, 4))
        total_sub = (transient_samples + n_samples) * n_sub
        seed = spec.noise_seed if noise_seed is None else noise_seed
        xi = np.random.default_rng(seed).standard_normal(total_sub)
        alpha = math.exp(-internal_step / spec.ou_tau)
        noise_scale = spec.ou_rho * math.sqrt((1.0 - alpha * alpha) / 2.0)
        bad = _kernels.integrate_rossler_ou(
            spec.a, spec.b, spec.c,
            float(initial[0]), float(initial[1]), float(initial[2]),
            eta0, alpha, noise_scale, xi,
            internal_step, n_sub, n_samples, transient_samples, out)
    elif isinstance(spec, Lorenz):
        if initial.shape != (3,):
            raise ConfigError("Lorenz initial state must have 3 components")
        out = np.empty((n_samples, 3))
        bad = _kernels.integrate_lorenz(
            spec.sigma, spec.rho, spec.beta,
            float(initial[0]), float(initial[1]), float(initial[2]),
            internal_step, n_sub, n_samples, transient_samples, out)
    elif isinstance(spec, Rossler):
        if initial.shape != (3,):
            raise ConfigError("Rossler initial state must have 3 components")
        out = np.empty((n_samples, 3))
        bad = _kernels.integrate_rossler(
            spec.a, spec.b, spec.c, float(eta),
            float(initial[0]), float(initial[1]), float(initial[2]),
            internal_step, n_sub, n_samples, transient_samples, out)
    elif isinstance(spec, LinearDecay):
        if initial.shape != (1,):
            raise ConfigError("LinearDecay initial state must have 1 component")
        out = np.empty((n_samples, 1))
        bad = _integrate_linear_decay(
            spec.rate, float(initial[0]),
            internal_step, n_sub, n_samples, transient_samples, out)
    else:
        raise ConfigError(f"unknown system spec {type(spec).__name__}")

    if bad >= 0:
        raise IntegrationError(bad)
    start_time = (transient_samples + 1) * sample_step
    return Trajectory(sample_step, spec.channels, out, start_time)


def stepper(spec, initial, internal_step, sample_step, eta=0.0):
    """Closure advancing one sample step per call, returning the state row.

    Deterministic systems only; the OU variant carries a noise stream and
    needs a full ``integrate`` call.
    """
    if isinstance(spec, RosslerOU):
        raise ConfigError("stepper supports the deterministic systems only")
    n_sub = _resolve_substeps(internal_step, sample_step)
    dim = 1 if isinstance(spec, LinearDecay) else 3
    state = np.asarray(initial, dtype=float).reshape(-1).copy()
    if state.shape != (dim,):
        raise ConfigError(f"initial state must have {dim} components")
    out = np.empty((1, dim))
    count = [0]

    def advance():
        if isinstance(spec, Lorenz):
            bad = _kernels.integrate_lorenz(
                spec.sigma, spec.rho, spec.beta,
                state[0], state[1], state[2],
                internal_step, n_sub, 1, 0, out)
        elif isinstance(spec, Rossler):
            bad = _kernels.integrate_rossler(
                spec.a, spec.b, spec.c, float(eta),
                state[0], state[1], state[2],
                internal_step, n_sub, 1, 0, out)
        else:
            bad = _integrate_linear_decay(
                spec.rate, state[0], internal_step, n_sub, 1, 0, out)
        if bad >= 0:
            raise IntegrationError(count[0])
        count[0] += 1
        state[:] = out[0]
        return out[0].copy()

    return advance


def add_measurement_noise(traj, level, seed):
    """Add per-channel Gaussian noise with std = level * std(channel).

    level 0 returns the trajectory unchanged; a constant channel stays
    constant (its std is zero).
    """
    if level < 0:
        raise ConfigError(f"noise level must be >= 0, got {level!r}")
    if level == 0:
        return traj
    stds = traj.values.std(axis=0)
    rng = np.random.default_rng(seed)
    noisy = traj.values + rng.standard_normal(traj.values.shape) * (level * stds)
    return Trajectory(traj.sample_step, traj.channels, noisy, traj.start_time)


def local_maxima(series):
    """Strict local maxima of a scalar series, in order of occurrence.

    Plateau points do not count; series shorter than 3 yields an empty
    result.
    """
    s = np.asarray(series, dtype=float).ravel()
    if s.size < 3:
        return np.empty(0)
    mid = s[1:-1]
    return mid[(mid > s[:-2]) & (mid > s[2:])]


def write_trajectory_csv(traj, path):
    """Write `t,<ch1>,...` rows at 17 significant digits."""
    cols = np.column_stack([traj.times, traj.values])
    header = ",".join(("t",) + traj.channels)
    np.savetxt(path, cols, fmt="%.17g", delimiter=",",
               header=header, comments="")


def read_trajectory_csv(path, sample_step=None):
    """Read a trajectory CSV written by ``write_trajectory_csv``.

    sample_step is inferred from the time column when not given; a
    single-row file needs it passed explicitly.
    """
    with open(path) as fh:
        header = fh.readline().strip()
    names = header.split(",")
    if not names or names[0] != "t" or len(names) < 2:
        raise ConfigError(f"{path}: expected header 't,<channel>,...', got {header!r}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != len(names):
        raise ConfigError(f"{path}: row width does not match header")
    if data.shape[0] < 1:
        raise ConfigError(f"{path}: no data rows")
    if sample_step is None:
        if data.shape[0] < 2:
            raise ConfigError(
                f"{path}: cannot infer sample_step from a single row; pass it"
            )
        sample_step = float(data[1, 0] - data[0, 0])
    return Trajectory(sample_step, tuple(names[1:]), data[:, 1:], float(data[0, 0]))

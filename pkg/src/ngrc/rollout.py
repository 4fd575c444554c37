"""Closed-loop surrogate: free runs, parameter sweeps, asymptotic phase.

A model composes normalizer, projection plan and readout. Rollouts keep a
ring buffer of the last H+1 normalized rows; predicted rows are clipped
back into [epsilon, 1-epsilon] before entering the buffer so the feature
map stays inside its domain, while reported outputs are the raw, unclipped
denormalized predictions.
"""

import math
from dataclasses import dataclass

import numpy as np

from ngrc import dynamics, embed, project
from ngrc.errors import ConfigError, DivergenceError, PhaseConvergenceError

# a normalized output beyond this magnitude counts as divergence
DIVERGENCE_LIMIT = 5.0


@dataclass(frozen=True)
class NgrcModel:
    """Trained one-step predictor plus everything needed to run it."""

    normalizer: object
    plan: object
    weights: object
    H: int
    sample_step: float
    output_channels: tuple
    input_channels: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "output_channels", tuple(self.output_channels))
        object.__setattr__(self, "input_channels", tuple(self.input_channels))
        if not self.output_channels:
            raise ConfigError("model needs at least one output channel")
        if self.H < 0:
            raise ConfigError(f"H must be >= 0, got {self.H}")
        if not (self.sample_step > 0):
            raise ConfigError("sample_step must be positive")
        n = self.n_channels
        if self.normalizer.n_channels != n:
            raise ConfigError(
                f"normalizer covers {self.normalizer.n_channels} channels, "
                f"model has {n}"
            )
        if self.plan.input_len != n * (self.H + 1):
            raise ConfigError(
                f"plan input_len {self.plan.input_len} != "
                f"{n} channels x (H+1) = {n * (self.H + 1)}"
            )
        if self.weights.weights.shape != (self.n_out, self.plan.m):
            raise ConfigError(
                f"weights shape {self.weights.weights.shape} != "
                f"({self.n_out}, {self.plan.m})"
            )

    @property
    def n_out(self):
        return len(self.output_channels)

    @property
    def n_in(self):
        return len(self.input_channels)

    @property
    def n_channels(self):
        return self.n_out + self.n_in

    @property
    def channels(self):
        return self.output_channels + self.input_channels


class HistoryBuffer:
    """Ring of the last H+1 normalized rows, newest-first on extraction."""

    def __init__(self, rows):
        rows = np.array(rows, dtype=float, order="C")
        if rows.ndim != 2 or rows.shape[0] < 1:
            raise ConfigError("history needs a (H+1) x N array of rows")
        self._buf = rows
        self._head = rows.shape[0] - 1  # last given row is the newest
        self._steps = np.arange(rows.shape[0])

    @property
    def depth(self):
        return self._buf.shape[0]

    @property
    def n_channels(self):
        return self._buf.shape[1]

    def copy(self):
        other = HistoryBuffer(self._buf)
        other._buf = self._buf.copy()
        other._head = self._head
        return other

    def push(self, row):
        self._head = (self._head + 1) % self.depth
        self._buf[self._head] = row

    def newest(self):
        return self._buf[self._head].copy()

    def write_newest(self, col_start, values):
        self._buf[self._head, col_start:] = values

    def fill_columns(self, col_start, values):
        self._buf[:, col_start:] = values

    def rows_newest_first(self):
        idx = (self._head - self._steps) % self.depth
        return self._buf[idx]

    def embedded(self):
        """Channel-major embedded vector, newest sample of each channel first."""
        return np.ascontiguousarray(self.rows_newest_first().T).reshape(-1)


def seed_history(model, traj, end_row=None):
    """History buffer holding rows end_row-H .. end_row of a raw trajectory."""
    if traj.channels != model.channels:
        raise ConfigError(
            f"trajectory channels {traj.channels} != model channels "
            f"{model.channels}"
        )
    if end_row is None:
        end_row = traj.n_samples - 1
    if end_row < model.H or end_row >= traj.n_samples:
        raise ConfigError(
            f"end_row {end_row} lacks H = {model.H} rows of history"
        )
    rows = traj.values[end_row - model.H:end_row + 1]
    return HistoryBuffer(embed.normalize(model.normalizer, rows))


def _channel_slice_norm(model, values, col_start, col_stop):
    """Affine-normalize values that live on a slice of the model's channels."""
    norm = model.normalizer
    lo = norm.lo[col_start:col_stop]
    hi = norm.hi[col_start:col_stop]
    eps = norm.epsilon
    y = eps + (1.0 - 2.0 * eps) * (np.asarray(values, dtype=float) - lo) / (hi - lo)
    return np.clip(y, eps, 1.0 - eps)


def _norm_inputs(model, values):
    return _channel_slice_norm(model, values, model.n_out, model.n_channels)


def _denorm_outputs(model, out_norm):
    norm = model.normalizer
    lo = norm.lo[:model.n_out]
    hi = norm.hi[:model.n_out]
    return lo + (out_norm - norm.epsilon) * (hi - lo) / (1.0 - 2.0 * norm.epsilon)


def _advance(model, history, exo_norm):
    """One prediction in normalized units; does not touch the buffer."""
    if exo_norm is not None:
        history.write_newest(model.n_out, exo_norm)
    features = project.apply(model.plan, history.embedded())
    return model.weights.weights @ features


def _push_prediction(model, history, out_norm, exo_norm):
    eps = model.normalizer.epsilon
    row = np.empty(model.n_channels)
    row[:model.n_out] = np.clip(out_norm, eps, 1.0 - eps)
    if model.n_in:
        # placeholder; the next step overwrites it with its own exogenous row
        row[model.n_out:] = exo_norm
    history.push(row)


def _check_exogenous(model, exogenous):
    if model.n_in == 0:
        if exogenous is not None and np.size(exogenous) != 0:
            raise ConfigError("model has no input channels")
        return None
    if exogenous is None:
        raise ConfigError(
            f"need values for input channels {model.input_channels}"
        )
    exo = np.asarray(exogenous, dtype=float).reshape(-1)
    if exo.shape != (model.n_in,):
        raise ConfigError(
            f"expected {model.n_in} exogenous values, got shape {exo.shape}"
        )
    return _norm_inputs(model, exo)


def step(model, history, exogenous=None):
    """One prediction in raw units; pushes the new row into the history.

    Exogenous values are for the current time (the newest history row).
    """
    if history.n_channels != model.n_channels or history.depth != model.H + 1:
        raise ConfigError("history does not match the model's layout")
    exo_norm = _check_exogenous(model, exogenous)
    out_norm = _advance(model, history, exo_norm)
    if not np.all(np.isfinite(out_norm)):
        raise DivergenceError(None, message="one-step prediction is non-finite")
    _push_prediction(model, history, out_norm, exo_norm)
    return _denorm_outputs(model, out_norm)


def _norm_exo_series(model, exogenous_series, n_steps):
    if model.n_in == 0:
        if exogenous_series is not None:
            raise ConfigError("model has no input channels")
        return None
    if exogenous_series is None:
        if n_steps == 0:
            return None
        raise ConfigError("model has input channels; pass exogenous_series")
    exo = np.asarray(exogenous_series, dtype=float)
    if exo.ndim == 1:
        exo = exo[:, None]
    if exo.ndim != 2 or exo.shape[1] != model.n_in or exo.shape[0] < n_steps:
        raise ConfigError(
            f"exogenous series must be at least {n_steps} x {model.n_in}, "
            f"got {exo.shape}"
        )
    return _norm_inputs(model, exo)


def free_run(model, initial_history, n_steps, exogenous_series=None):
    """Iterate the model on its own outputs for n_steps.

    The history buffer is advanced in place. Returns the raw output
    trajectory (row k at time (k+1) * sample_step relative to the newest
    seeded row). Divergence (non-finite or a normalized output beyond
    DIVERGENCE_LIMIT) raises DivergenceError carrying the partial result.
    """
    if n_steps < 0:
        raise ConfigError("n_steps must be >= 0")
    history = initial_history
    if history.n_channels != model.n_channels or history.depth != model.H + 1:
        raise ConfigError("history does not match the model's layout")
    exo_norm = _norm_exo_series(model, exogenous_series, n_steps)
    out = np.empty((n_steps, model.n_out))

    def partial(k):
        return dynamics.Trajectory(
            model.sample_step, model.output_channels, out[:k],
            start_time=model.sample_step,
        ) if k else None

    for k in range(n_steps):
        row_exo = exo_norm[k] if exo_norm is not None else None
        out_norm = _advance(model, history, row_exo)
        if (not np.all(np.isfinite(out_norm))
                or np.max(np.abs(out_norm)) > DIVERGENCE_LIMIT):
            raise DivergenceError(k, partial=partial(k))
        out[k] = _denorm_outputs(model, out_norm)
        _push_prediction(model, history, out_norm, row_exo)
    return dynamics.Trajectory(model.sample_step, model.output_channels,
                               out, start_time=model.sample_step)


def valid_prediction_time(model, test_traj, threshold):
    """Time until the free-running prediction drifts past the threshold.

    The history is seeded from the first H+1 rows of the test trajectory;
    the error at each step is ||pred - true|| / ||std(true)|| over the
    output channels. Returns the duration of the valid stretch, or the
    full compared duration if the threshold is never crossed.
    """
    if threshold < 0:
        raise ConfigError("threshold must be >= 0")
    H = model.H
    if test_traj.n_samples < H + 2:
        raise ConfigError("test trajectory too short to seed the history")
    history = seed_history(model, test_traj, end_row=H)
    true_out = test_traj.values[:, :model.n_out]
    std_norm = np.linalg.norm(true_out.std(axis=0))
    if std_norm == 0:
        raise ConfigError("test trajectory has zero variance")
    n_steps = test_traj.n_samples - H - 1
    if model.n_in:
        exo_norm = _norm_inputs(model, test_traj.values[H:H + n_steps,
                                                        model.n_out:])
    else:
        exo_norm = None
    tau = model.sample_step
    for k in range(n_steps):
        row_exo = exo_norm[k] if exo_norm is not None else None
        out_norm = _advance(model, history, row_exo)
        if (not np.all(np.isfinite(out_norm))
                or np.max(np.abs(out_norm)) > DIVERGENCE_LIMIT):
            return k * tau
        pred = _denorm_outputs(model, out_norm)
        err = np.linalg.norm(pred - true_out[H + 1 + k]) / std_norm
        if err > threshold:
            return k * tau
        _push_prediction(model, history, out_norm, row_exo)
    return n_steps * tau


@dataclass(frozen=True)
class SweepEntry:
    eta: float
    maxima: np.ndarray
    diverged: bool


def bifurcation_sweep(model, eta_values, steps_per_eta, transient,
                      seed_history_buffer):
    """Quasi-continuation over a parameter grid.

    Each eta runs with the exogenous channel pinned to it (all delay slots
    included) for transient + steps_per_eta steps, starting from the final
    history of the previous eta; the recorded maxima come from the first
    output channel over the post-transient window. A diverged eta is
    marked failed and the next one restarts from the last good history.
    """
    if model.n_in != 1:
        raise ConfigError(
            f"sweep needs exactly one input channel, model has {model.n_in}"
        )
    if steps_per_eta < 1 or transient < 0:
        raise ConfigError("need steps_per_eta >= 1 and transient >= 0")
    history = seed_history_buffer.copy()
    entries = []
    for eta in np.asarray(eta_values, dtype=float):
        eta_norm = _norm_inputs(model, np.array([eta]))
        snapshot = history.copy()
        history.fill_columns(model.n_out, eta_norm)
        series = np.empty(steps_per_eta)
        diverged = False
        for k in range(transient + steps_per_eta):
            out_norm = _advance(model, history, eta_norm)
            if (not np.all(np.isfinite(out_norm))
                    or np.max(np.abs(out_norm)) > DIVERGENCE_LIMIT):
                diverged = True
                break
            if k >= transient:
                series[k - transient] = _denorm_outputs(model, out_norm)[0]
            _push_prediction(model, history, out_norm, eta_norm)
        if diverged:
            entries.append(SweepEntry(float(eta), np.empty(0), True))
            history = snapshot  # reseed the next eta from the last good state
        else:
            entries.append(SweepEntry(float(eta),
                                      dynamics.local_maxima(series), False))
    return entries


def write_bifurcation_csv(entries, path):
    with open(path, "w") as fh:
        fh.write("eta,maximum\n")
        for entry in entries:
            for v in entry.maxima:
                fh.write("%.17g,%.17g\n" % (entry.eta, v))


@dataclass(frozen=True)
class PhaseEstimate:
    phase: float
    period: float
    n_events: int
    n_steps: int


def phase_from_stepper(step_fn, to_norm, sample_step, max_steps=20000,
                       tol=1e-3, min_events=5, chunk=500):
    """Asymptotic phase of the state a stepper starts from.

    step_fn() advances the underlying system by one sample step and
    returns the raw output row; to_norm maps a raw row into normalized
    units for the convergence test. The reference event is the upward
    crossing of the first output channel through the mean of the second
    half of the collected series; the phase maps the first event time back
    to the starting state.
    """
    if max_steps < 2:
        raise ConfigError("max_steps must be >= 2")
    rows = []
    while True:
        todo = min(chunk, max_steps - len(rows))
        if todo <= 0:
            raise PhaseConvergenceError(
                f"no limit-cycle convergence within {max_steps} steps"
            )
        for _ in range(todo):
            rows.append(np.asarray(step_fn(), dtype=float).reshape(-1))
        est = _phase_attempt(rows, to_norm, sample_step, tol, min_events)
        if est is not None:
            return est


def _phase_attempt(rows, to_norm, sample_step, tol, min_events):
    arr = np.asarray(rows)
    s = arr[:, 0]
    if s.size < 4:
        return None
    center = float(s[s.size // 2:].mean())
    hit = (s[:-1] < center) & (s[1:] >= center)
    idx = np.flatnonzero(hit)
    if idx.size < min_events:
        return None
    frac = (center - s[idx]) / (s[idx + 1] - s[idx])
    # row i holds the state at time (i+1) * sample_step after the start
    t_events = (idx + 1 + frac) * sample_step
    states = arr[idx] + frac[:, None] * (arr[idx + 1] - arr[idx])
    a = np.asarray(to_norm(states[-2]), dtype=float)
    b = np.asarray(to_norm(states[-1]), dtype=float)
    if np.linalg.norm(a - b) > tol:
        return None
    recent = t_events[-min(min_events, idx.size):]
    period = float(np.mean(np.diff(recent)))
    if not (period > 0):
        return None
    phase = 2.0 * math.pi * ((-t_events[0]) % period) / period
    return PhaseEstimate(phase=float(phase), period=period,
                         n_events=int(idx.size), n_steps=len(rows))


def normalize_outputs(model, y):
    """Raw output row mapped through the model's affine, with clipping."""
    return _channel_slice_norm(model, y, 0, model.n_out)


def hausdorff_1d(a, b):
    """Hausdorff distance between two 1-D point sets; inf if either is empty."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        return math.inf
    gaps = np.abs(a[:, None] - b[None, :])
    return float(max(gaps.min(axis=1).max(), gaps.min(axis=0).max()))


def estimate_phase(model, state_history, max_steps=20000, tol=1e-3):
    """Asymptotic phase of the state held in a history buffer."""
    return estimate_phase_detailed(model, state_history, max_steps, tol).phase


def estimate_phase_detailed(model, state_history, max_steps=20000, tol=1e-3):
    history = state_history.copy()

    def step_fn():
        return step(model, history)

    try:
        return phase_from_stepper(step_fn, lambda y: normalize_outputs(model, y),
                                  model.sample_step, max_steps, tol)
    except DivergenceError as exc:
        raise PhaseConvergenceError(f"model diverged while converging: {exc}")

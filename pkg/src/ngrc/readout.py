"""Training dataset assembly and the linear least-squares readout.

The readout solves min ||U - W P||^2 + lambda ||W||^2 through the normal
equations with a Cholesky factorization of the M x M Gram matrix, falling
back to an SVD least-squares solve when the factorization fails. A
streaming variant accumulates the Gram matrix over column blocks so the
full feature matrix never has to exist in memory.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.linalg import blas as _blas

from ngrc import dynamics, embed, project
from ngrc.errors import ConfigError, NgrcError, SingularFitError


@dataclass(frozen=True)
class Dataset:
    """Feature columns and the normalized next-step targets they predict."""

    features: np.ndarray  # M x T_eff
    targets: np.ndarray  # N_out x T_eff
    output_channels: tuple
    input_channels: tuple

    def __post_init__(self):
        features = np.ascontiguousarray(self.features, dtype=float)
        targets = np.ascontiguousarray(self.targets, dtype=float)
        if features.ndim != 2 or targets.ndim != 2:
            raise ConfigError("features and targets must be 2-D")
        if features.shape[1] != targets.shape[1]:
            raise ConfigError(
                f"feature columns {features.shape[1]} != target columns "
                f"{targets.shape[1]}"
            )
        if targets.shape[0] != len(self.output_channels):
            raise ConfigError("target rows must match output channel names")
        if not (np.all(np.isfinite(features)) and np.all(np.isfinite(targets))):
            raise ConfigError("dataset entries must be finite")
        if features.size and not (
            np.all(features > 0.0) and np.all(features < 1.0)
        ):
            raise ConfigError("feature entries must lie strictly inside (0, 1)")
        features.setflags(write=False)
        targets.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "output_channels", tuple(self.output_channels))
        object.__setattr__(self, "input_channels", tuple(self.input_channels))

    @property
    def n_columns(self):
        return self.features.shape[1]


@dataclass(frozen=True)
class ReadoutMatrix:
    """Trained linear readout: one row of weights per output channel."""

    weights: np.ndarray  # N_out x M
    lam: float = 0.0

    def __post_init__(self):
        weights = np.ascontiguousarray(self.weights, dtype=float)
        if weights.ndim != 2:
            raise ConfigError("weights must be 2-D")
        if not np.all(np.isfinite(weights)):
            raise ConfigError("weights must be finite")
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)


def _split_channels(channels, output_channels, input_channels):
    output_channels = tuple(output_channels)
    input_channels = tuple(input_channels)
    if not output_channels:
        raise ConfigError("need at least one output channel")
    if tuple(channels) != output_channels + input_channels:
        raise ConfigError(
            f"trajectory channels {tuple(channels)} must equal output "
            f"channels {output_channels} followed by input channels "
            f"{input_channels}; reorder or select channels first"
        )
    return output_channels, input_channels


def assemble_dataset(traj, norm, plan, H, output_channels, input_channels=()):
    """Features and next-step targets for every usable row of a trajectory.

    Row n contributes the features of the embedded vector at n and the
    normalized output-channel values at n+1, for n = H .. T-2. Exogenous
    input channels are embedded alongside the outputs but never predicted.
    """
    output_channels, input_channels = _split_channels(
        traj.channels, output_channels, input_channels)
    n_out = len(output_channels)
    T = traj.n_samples
    if T < H + 2:
        raise ConfigError(
            f"need at least H + 2 = {H + 2} samples to form one training "
            f"pair, got {T}"
        )
    cfg = embed.DelayConfig(H, traj.n_channels)
    if cfg.embedded_len != plan.input_len:
        raise ConfigError(
            f"plan input_len {plan.input_len} != embedded length "
            f"{cfg.embedded_len}"
        )
    normalized = embed.normalize(norm, traj.values)
    block = embed.embed_block(normalized, cfg, H, T - 2)
    features = project.apply_block(plan, block)
    targets = np.ascontiguousarray(normalized[H + 1:, :n_out].T)
    return Dataset(features, targets, output_channels, input_channels)


def _accumulate_gram(gram, block):
    # gram is Fortran-order M x M; syrk writes only its lower triangle
    _blas.dsyrk(1.0, block.T, beta=1.0, c=gram, trans=1, lower=1,
                overwrite_c=1)


def _symmetrize_lower(gram):
    m = gram.shape[0]
    for r in range(m):
        gram[r, r + 1:] = gram[r + 1:, r]


def _solve_normal_equations(gram, cross, lam):
    """Solve (gram + lam I) X = cross for X (M x N_out).

    Cholesky first; on failure an SVD-based least-squares solve takes over
    so near-singular systems still yield the minimum-norm solution. Only a
    non-finite result is an error.
    """
    if lam < 0:
        raise ConfigError(f"ridge parameter must be >= 0, got {lam!r}")
    if not np.all(np.isfinite(gram)):
        raise SingularFitError("Gram matrix has non-finite entries")
    a = gram
    if lam > 0:
        a = gram + lam * np.eye(gram.shape[0])
    try:
        factor = scipy.linalg.cho_factor(a, lower=True)
        x = scipy.linalg.cho_solve(factor, cross)
    except scipy.linalg.LinAlgError:
        x, _, _, _ = np.linalg.lstsq(a, cross, rcond=None)
    if not np.all(np.isfinite(x)):
        raise SingularFitError()
    return x


def fit(dataset, lam=0.0):
    """Least-squares readout for an in-memory dataset."""
    if dataset.n_columns < 1:
        raise ConfigError("dataset has no columns")
    features = dataset.features
    gram = np.zeros((features.shape[0],) * 2, order="F")
    _accumulate_gram(gram, features)
    _symmetrize_lower(gram)
    cross = features @ dataset.targets.T
    x = _solve_normal_equations(gram, cross, lam)
    return ReadoutMatrix(x.T, lam)


def one_step_mse(weights, dataset):
    """Mean squared one-step error E over the dataset, normalized units."""
    if weights.weights.shape != (len(dataset.output_channels),
                                 dataset.features.shape[0]):
        raise ConfigError(
            f"weights shape {weights.weights.shape} does not match dataset"
        )
    resid = dataset.targets - weights.weights @ dataset.features
    return float(np.mean(np.sum(resid * resid, axis=0)))


def _stream_blocks(traj, norm, plan, H, block_cols):
    """Yield (features, targets) column blocks without keeping them all."""
    cfg = embed.DelayConfig(H, traj.n_channels)
    normalized = embed.normalize(norm, traj.values)
    T = traj.n_samples
    for lo in range(H, T - 1, block_cols):
        hi = min(lo + block_cols - 1, T - 2)
        emb = embed.embed_block(normalized, cfg, lo, hi)
        features = project.apply_block(plan, emb)
        # all channels; callers slice the output rows they need
        targets = np.ascontiguousarray(normalized[lo + 1:hi + 2, :].T)
        yield features, targets


def fit_trajectories(trajs, norm, plan, H, output_channels, input_channels=(),
                     lam=0.0, block_cols=4096):
    """Streaming fit over one or more trajectories.

    Accumulates the Gram matrix and cross terms block by block, solves
    once, then makes a second pass for the exact training error. Returns
    (ReadoutMatrix, E_train).
    """
    trajs = list(trajs)
    if not trajs:
        raise ConfigError("need at least one training trajectory")
    for traj in trajs:
        _split_channels(traj.channels, output_channels, input_channels)
        if traj.n_samples < H + 2:
            raise ConfigError(
                f"trajectory too short for H = {H}: {traj.n_samples} samples"
            )
    n_out = len(tuple(output_channels))
    m = plan.m
    gram = np.zeros((m, m), order="F")
    cross = np.zeros((m, n_out))
    n_total = 0
    for traj in trajs:
        for features, targets in _stream_blocks(traj, norm, plan, H, block_cols):
            _accumulate_gram(gram, features)
            cross += features @ targets[:n_out].T
            n_total += features.shape[1]
    _symmetrize_lower(gram)
    x = _solve_normal_equations(gram, cross, lam)
    weights = ReadoutMatrix(x.T, lam)
    err = mse_trajectories(weights, trajs, norm, plan, H,
                           output_channels, input_channels, block_cols)
    return weights, err


def mse_trajectories(weights, trajs, norm, plan, H, output_channels,
                     input_channels=(), block_cols=4096):
    """Streaming one-step MSE over one or more trajectories."""
    trajs = list(trajs)
    n_out = len(tuple(output_channels))
    total = 0.0
    n_total = 0
    for traj in trajs:
        _split_channels(traj.channels, output_channels, input_channels)
        for features, targets in _stream_blocks(traj, norm, plan, H, block_cols):
            resid = targets[:n_out] - weights.weights @ features
            total += float(np.sum(resid * resid))
            n_total += features.shape[1]
    if n_total == 0:
        raise ConfigError("no usable training columns")
    return total / n_total


def error_curve(traj_train, traj_val, norm, seed, H, m_grid, lam=0.0,
                noise_level=0.0, noise_seeds=(101, 202), epsilon=0.01,
                output_channels=None, input_channels=()):
    """Train/validation one-step errors across projection dimensions.

    Noise at ``noise_level`` is injected into both trajectories (separate
    seeds); when ``norm`` is None a normalizer is fitted on the noisy
    training data. Each M builds its own plan from the same seed. Fit
    failures mark their row instead of aborting the sweep. Returns a list
    of (M, E_train, E_val, status) tuples.
    """
    m_grid = list(m_grid)
    if not m_grid:
        raise ConfigError("m_grid must be nonempty")
    if any(b <= a for a, b in zip(m_grid, m_grid[1:])):
        raise ConfigError("m_grid must be strictly ascending")
    if output_channels is None:
        output_channels = traj_train.channels
    noisy_train = dynamics.add_measurement_noise(
        traj_train, noise_level, noise_seeds[0])
    noisy_val = dynamics.add_measurement_noise(
        traj_val, noise_level, noise_seeds[1])
    if norm is None:
        norm = embed.fit_normalizer(noisy_train, epsilon)
    input_len = embed.DelayConfig(H, noisy_train.n_channels).embedded_len
    rows = []
    for m in m_grid:
        try:
            plan = project.build_plan(input_len, m, seed)
            ds_train = assemble_dataset(noisy_train, norm, plan, H,
                                        output_channels, input_channels)
            ds_val = assemble_dataset(noisy_val, norm, plan, H,
                                      output_channels, input_channels)
            weights = fit(ds_train, lam)
            e_train = one_step_mse(weights, ds_train)
            e_val = one_step_mse(weights, ds_val)
            rows.append((m, e_train, e_val, "ok"))
        except NgrcError as exc:
            rows.append((m, math.nan, math.nan, f"error: {exc}"))
    return rows


def write_error_curve_csv(rows, path):
    with open(path, "w") as fh:
        fh.write("M,E_train,E_val,status\n")
        for m, e_train, e_val, status in rows:
            fh.write("%d,%.17g,%.17g,%s\n" % (m, e_train, e_val, status))

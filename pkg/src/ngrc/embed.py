"""Per-channel normalization onto (epsilon, 1-epsilon) and delay embedding.

The embedded vector is channel-major with newest samples first:
[u1(t), u1(t-tau), ..., u1(t-H*tau), u2(t), ...]; its length is always
n_channels * (H+1).
"""

from dataclasses import dataclass

import numpy as np

from ngrc.errors import ConfigError, DegenerateChannelError


@dataclass(frozen=True)
class Normalizer:
    """Affine map x -> epsilon + (1-2*epsilon)*(x-lo)/(hi-lo), per channel."""

    lo: np.ndarray
    hi: np.ndarray
    epsilon: float = 0.01

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ConfigError("lo and hi must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ConfigError("normalizer bounds must be finite")
        if not np.all(hi > lo):
            raise DegenerateChannelError(
                "every channel needs hi > lo; got a degenerate range"
            )
        if not (0.0 < self.epsilon < 0.5):
            raise ConfigError(f"epsilon must be in (0, 0.5), got {self.epsilon!r}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def n_channels(self):
        return self.lo.shape[0]


def fit_normalizer(traj, epsilon=0.01):
    """Fit per-channel lo/hi as the min/max over a trajectory (or a T x N
    array). A constant channel has no usable range and is an error."""
    values = traj.values if hasattr(traj, "values") else np.asarray(traj, dtype=float)
    if values.ndim != 2 or values.shape[0] < 1:
        raise ConfigError("need a nonempty T x N array to fit a normalizer")
    lo = values.min(axis=0)
    hi = values.max(axis=0)
    if not np.all(hi > lo):
        flat = np.flatnonzero(hi <= lo)
        raise DegenerateChannelError(
            f"channel(s) {flat.tolist()} are constant over the trajectory"
        )
    return Normalizer(lo, hi, epsilon)


def normalize(norm, x):
    """Map into [epsilon, 1-epsilon], clipping out-of-range values.

    Works on single rows (N,) and stacked rows (T, N) alike.
    """
    x = np.asarray(x, dtype=float)
    span = norm.hi - norm.lo
    y = norm.epsilon + (1.0 - 2.0 * norm.epsilon) * (x - norm.lo) / span
    return np.clip(y, norm.epsilon, 1.0 - norm.epsilon)


def denormalize(norm, y):
    """Exact affine inverse of ``normalize``; never clips."""
    y = np.asarray(y, dtype=float)
    span = norm.hi - norm.lo
    return norm.lo + (y - norm.epsilon) * span / (1.0 - 2.0 * norm.epsilon)


@dataclass(frozen=True)
class DelayConfig:
    """Delay depth H and channel count; embedded length is n_channels*(H+1)."""

    H: int
    n_channels: int

    def __post_init__(self):
        if self.H < 0:
            raise ConfigError(f"H must be >= 0, got {self.H}")
        if self.n_channels < 1:
            raise ConfigError(f"n_channels must be >= 1, got {self.n_channels}")

    @property
    def embedded_len(self):
        return self.n_channels * (self.H + 1)


def embed(values, config, n):
    """Embedded vector at row n: needs rows n-H ... n to exist."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[1] != config.n_channels:
        raise ConfigError(
            f"values must be T x {config.n_channels}, got {values.shape}"
        )
    if n < config.H or n >= values.shape[0]:
        raise ConfigError(
            f"row {n} lacks {config.H} rows of history in a length-"
            f"{values.shape[0]} series"
        )
    window = values[n - config.H:n + 1][::-1]  # newest first
    return np.ascontiguousarray(window.T).reshape(-1)


def embed_block(values, config, n_lo, n_hi):
    """Embedded vectors for rows n_lo..n_hi as columns of one matrix.

    Returns an embedded_len x (n_hi - n_lo + 1) array; all rows must have
    full history available.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[1] != config.n_channels:
        raise ConfigError(
            f"values must be T x {config.n_channels}, got {values.shape}"
        )
    if n_lo < config.H or n_hi >= values.shape[0] or n_lo > n_hi:
        raise ConfigError(
            f"rows {n_lo}..{n_hi} invalid for H={config.H}, T={values.shape[0]}"
        )
    ns = np.arange(n_lo, n_hi + 1)
    H = config.H
    out = np.empty((config.embedded_len, ns.size))
    for c in range(config.n_channels):
        for d in range(H + 1):
            out[c * (H + 1) + d] = values[ns - d, c]
    return out

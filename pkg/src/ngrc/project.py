"""Seeded pseudorandom projection onto an M-dimensional feature space.

Features are built iteratively: the k-th feature combines two elements of
the pool (original embedded components plus features 1..k-1) as
p = (1 - p_i) ** p_j. Pairs use the signed indexing where the originals
sit at -(input_len-1)..0 and features at 1..m; the plan and its PRNG are
the reproducibility contract, so the recurrence below must never change.
"""

from dataclasses import dataclass

import numpy as np

from ngrc import _kernels
from ngrc.errors import ConfigError, PlanExhaustedError, ProjectionDomainError

_MASK64 = (1 << 64) - 1
_MULT = 6364136223846793005
_INC = 1442695040888963407


class Prng:
    """64-bit LCG with 31-bit output, identical on every platform."""

    def __init__(self, seed):
        self.state = int(seed) & _MASK64

    def next_value(self):
        self.state = (_MULT * self.state + _INC) & _MASK64
        return self.state >> 33

    def next_index(self, pool_size):
        # plain modulo reduction; bias is negligible for pool sizes << 2**31
        return self.next_value() % pool_size


@dataclass(frozen=True)
class ProjectionPlan:
    """Ordered pair list defining the projection; pairs use signed indices."""

    input_len: int
    m: int
    pairs: tuple
    seed: int

    def __post_init__(self):
        if self.input_len < 2:
            raise ConfigError(f"input_len must be >= 2, got {self.input_len}")
        if self.m < 1:
            raise ConfigError(f"m must be >= 1, got {self.m}")
        pairs = tuple((int(i), int(j)) for i, j in self.pairs)
        if len(pairs) != self.m:
            raise ConfigError(f"expected {self.m} pairs, got {len(pairs)}")
        if len(set(pairs)) != len(pairs):
            raise ConfigError("duplicate (i, j) pair in plan")
        lo = -self.input_len + 1
        for k, (i, j) in enumerate(pairs, start=1):
            if not (lo <= i <= k - 1 and lo <= j <= k - 1):
                raise ConfigError(
                    f"pair {k} = ({i}, {j}) out of range [{lo}, {k - 1}]"
                )
        object.__setattr__(self, "pairs", pairs)
        # pool positions for the kernels: originals 0..input_len-1, then features
        pos = np.asarray(pairs, dtype=np.intp) + (self.input_len - 1)
        pos.setflags(write=False)
        object.__setattr__(self, "_positions", pos)

    def positions(self):
        """Pairs as 0-based pool positions, the kernels' indexing."""
        return self._positions


def build_plan(input_len, m, seed):
    """Draw m index pairs from the growing pool, rejecting exact repeats.

    The k-th pair is drawn uniformly (modulo reduction) from the pool of
    input_len + k - 1 elements available at that point; a pair identical to
    an earlier one is redrawn, both indices together.
    """
    if input_len < 2:
        raise ConfigError(f"input_len must be >= 2, got {input_len}")
    if m < 1:
        raise ConfigError(f"m must be >= 1, got {m}")
    prng = Prng(seed)
    seen = set()
    pairs = []
    base = input_len - 1
    for k in range(1, m + 1):
        pool_size = input_len + k - 1
        # the pool always holds more unordered slots than used pairs, so
        # this terminates; the cap only guards against a broken invariant
        for _ in range(1000 * pool_size * pool_size):
            i = prng.next_index(pool_size) - base
            j = prng.next_index(pool_size) - base
            if (i, j) not in seen:
                break
        else:
            raise PlanExhaustedError(
                f"no fresh (i, j) pair available for feature {k}"
            )
        seen.add((i, j))
        pairs.append((i, j))
    return ProjectionPlan(input_len, m, tuple(pairs), seed)


def _check_domain(embedded):
    if not (np.all(embedded > 0.0) and np.all(embedded < 1.0)):
        raise ProjectionDomainError(
            "projection inputs must lie strictly inside (0, 1); "
            "normalize the data first"
        )


def apply(plan, embedded):
    """Feature vector for one embedded input; inputs must sit in (0, 1)."""
    embedded = np.ascontiguousarray(embedded, dtype=float)
    if embedded.shape != (plan.input_len,):
        raise ConfigError(
            f"embedded length {embedded.shape} does not match plan "
            f"input_len {plan.input_len}"
        )
    _check_domain(embedded)
    out = np.empty(plan.m)
    _kernels.apply_pairs(embedded, plan.positions(), out)
    return out


def apply_block(plan, embedded_block):
    """Feature matrix (m x T) for a block of embedded columns (input_len x T)."""
    block = np.ascontiguousarray(embedded_block, dtype=float)
    if block.ndim != 2 or block.shape[0] != plan.input_len:
        raise ConfigError(
            f"embedded block must be {plan.input_len} x T, got {block.shape}"
        )
    _check_domain(block)
    out = np.empty((plan.m, block.shape[1]))
    _kernels.apply_pairs_batch(block, plan.positions(), out)
    return out


@dataclass(frozen=True)
class FeatureHistogram:
    """Pooled histogram of feature values over (0, 1), bins half-open."""

    edges: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float).copy()
        counts = np.asarray(self.counts, dtype=np.int64).copy()
        if edges.ndim != 1 or counts.ndim != 1 or edges.size != counts.size + 1:
            raise ConfigError("histogram needs len(edges) == len(counts) + 1")
        edges.setflags(write=False)
        counts.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "counts", counts)

    @property
    def total(self):
        return int(self.counts.sum())


def feature_histogram(plan, features, bins):
    """Histogram all feature values pooled over time, over (0, 1)."""
    if bins < 2:
        raise ConfigError(f"bins must be >= 2, got {bins}")
    values = np.asarray(features, dtype=float)
    if values.size == 0:
        raise ConfigError("no feature values to histogram")
    if values.size % plan.m != 0:
        raise ConfigError(
            f"feature count {values.size} is not a multiple of m = {plan.m}"
        )
    counts, edges = np.histogram(values.ravel(), bins=bins, range=(0.0, 1.0))
    return FeatureHistogram(edges, counts)


def write_histogram_csv(hist, path):
    with open(path, "w") as fh:
        fh.write("bin_lo,bin_hi,count\n")
        for lo, hi, c in zip(hist.edges[:-1], hist.edges[1:], hist.counts):
            fh.write("%.17g,%.17g,%d\n" % (lo, hi, c))


def read_histogram_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 3:
        raise ConfigError(f"{path}: expected 3 columns")
    edges = np.append(data[:, 0], data[-1, 1])
    return FeatureHistogram(edges, data[:, 2].astype(np.int64))

"""Bit agreement between the compiled and pure kernel backends."""

import subprocess
import sys

import numpy as np
import pytest

from ngrc._kernels import pure

compiled = pytest.importorskip(
    "ngrc._kernels._core", reason="compiled extension not built")


def random_block(rng, n_in, t):
    return rng.uniform(0.02, 0.98, size=(n_in, t))


def random_positions(rng, n_in, m):
    # grow-the-pool indexing: pair k may reference slots 0 .. n_in+k-1
    pos = np.empty((m, 2), dtype=np.intp)
    for k in range(m):
        pos[k] = rng.integers(0, n_in + k, size=2)
    return pos


def test_backend_tags():
    assert pure.BACKEND == "pure"
    assert compiled.BACKEND == "compiled"


def test_apply_pairs_bitwise_identical():
    rng = np.random.default_rng(12)
    for _ in range(20):
        n_in = int(rng.integers(2, 40))
        m = int(rng.integers(1, 120))
        emb = rng.uniform(0.01, 0.99, size=n_in)
        pos = random_positions(rng, n_in, m)
        a = np.empty(m)
        b = np.empty(m)
        pure.apply_pairs(emb, pos, a)
        compiled.apply_pairs(emb, pos, b)
        assert np.array_equal(a, b)


def test_apply_pairs_batch_bitwise_identical():
    rng = np.random.default_rng(13)
    n_in, m, t = 26, 200, 64
    emb = random_block(rng, n_in, t)
    pos = random_positions(rng, n_in, m)
    a = np.empty((m, t))
    b = np.empty((m, t))
    pure.apply_pairs_batch(emb, pos, a)
    compiled.apply_pairs_batch(emb, pos, b)
    assert np.array_equal(a, b)


def test_batch_matches_per_column_chain():
    rng = np.random.default_rng(14)
    n_in, m, t = 8, 30, 17
    emb = random_block(rng, n_in, t)
    pos = random_positions(rng, n_in, m)
    batch = np.empty((m, t))
    compiled.apply_pairs_batch(emb, pos, batch)
    col = np.empty(m)
    for k in range(t):
        compiled.apply_pairs(np.ascontiguousarray(emb[:, k]), pos, col)
        assert np.array_equal(batch[:, k], col)


def test_integrate_lorenz_bitwise_identical():
    a = np.empty((200, 3))
    b = np.empty((200, 3))
    ra = pure.integrate_lorenz(10.0, 28.0, 8.0 / 3.0, 1.0, 1.0, 1.0,
                               0.005, 5, 200, 50, a)
    rb = compiled.integrate_lorenz(10.0, 28.0, 8.0 / 3.0, 1.0, 1.0, 1.0,
                                   0.005, 5, 200, 50, b)
    assert ra == rb == -1
    assert np.array_equal(a, b)


def test_integrate_rossler_bitwise_identical():
    a = np.empty((200, 3))
    b = np.empty((200, 3))
    ra = pure.integrate_rossler(0.2, 0.4, 5.7, 0.25, 0.0, -6.0, 0.0,
                                0.02, 5, 200, 50, a)
    rb = compiled.integrate_rossler(0.2, 0.4, 5.7, 0.25, 0.0, -6.0, 0.0,
                                    0.02, 5, 200, 50, b)
    assert ra == rb == -1
    assert np.array_equal(a, b)


def test_integrate_rossler_ou_bitwise_identical():
    rng = np.random.default_rng(3)
    n_keep, n_transient, n_sub = 150, 30, 5
    xi = rng.standard_normal((n_keep + n_transient) * n_sub)
    a = np.empty((n_keep, 4))
    b = np.empty((n_keep, 4))
    args = (0.2, 0.4, 5.7, 0.0, -6.0, 0.0, 0.1, 0.98, 0.07, xi,
            0.02, n_sub, n_keep, n_transient)
    ra = pure.integrate_rossler_ou(*args, a)
    rb = compiled.integrate_rossler_ou(*args, b)
    assert ra == rb == -1
    assert np.array_equal(a, b)


def test_integrators_report_blowup_index_identically():
    a = np.empty((50, 3))
    b = np.empty((50, 3))
    # an absurd step size sends the state to infinity almost immediately
    ra = pure.integrate_lorenz(10.0, 28.0, 8.0 / 3.0, 1.0, 1.0, 1.0,
                               10.0, 1, 50, 0, a)
    rb = compiled.integrate_lorenz(10.0, 28.0, 8.0 / 3.0, 1.0, 1.0, 1.0,
                                   10.0, 1, 50, 0, b)
    assert ra == rb
    assert ra >= 0


def _backend_of(env_value):
    code = "from ngrc import _kernels; print(_kernels.BACKEND)"
    proc = subprocess.run([sys.executable, "-c", code], capture_output=True,
                          text=True, env=_env_with(env_value))
    return proc


def _env_with(value):
    import os
    env = dict(os.environ)
    if value is None:
        env.pop("NGRC_BACKEND", None)
    else:
        env["NGRC_BACKEND"] = value
    return env


@pytest.mark.parametrize("value,expect", [
    (None, "compiled"),
    ("auto", "compiled"),
    ("compiled", "compiled"),
    ("pure", "pure"),
    ("PURE", "pure"),
])
def test_backend_selection(value, expect):
    proc = _backend_of(value)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip() == expect


def test_backend_rejects_unknown_value():
    proc = _backend_of("fancy")
    assert proc.returncode != 0
    assert "NGRC_BACKEND" in proc.stderr

"""Pure NumPy/Python kernels, the fallback twin of ``ngrc._kernels._core``.

Each function mirrors the compiled signature and arithmetic order exactly,
so both backends produce the same numbers (up to libm rounding of ``pow``).
"""

import math

import numpy as np

BACKEND = "pure"


def apply_pairs(embedded, positions, out):
    """Evaluate the feature chain for one embedded vector.

    ``positions`` holds (i, j) pool positions: slots below ``len(embedded)``
    address the embedded components, later slots address features already
    produced. ``out`` receives the ``m`` feature values.
    """
    n_in = embedded.shape[0]
    pool = embedded.tolist()
    append = pool.append
    fpow = math.pow
    for i, j in positions.tolist():
        append(fpow(1.0 - pool[i], pool[j]))
    out[:] = pool[n_in:]


def apply_pairs_batch(embedded, positions, out):
    """Evaluate the feature chain for a block of time points.

    ``embedded`` is (n_in, T); ``out`` is (m, T), one row per feature.
    Runs the scalar chain column by column: numpy's vectorized ``power``
    rounds differently from libm ``pow`` in the last ulp, which would break
    agreement with the compiled backend and with ``apply_pairs``.
    """
    n_in = embedded.shape[0]
    pairs = positions.tolist()
    fpow = math.pow
    cols = np.empty((embedded.shape[1], positions.shape[0]))
    for t, col in enumerate(embedded.T.tolist()):
        pool = col
        append = pool.append
        for i, j in pairs:
            append(fpow(1.0 - pool[i], pool[j]))
        cols[t] = pool[n_in:]
    out[:] = cols.T


def integrate_lorenz(sigma, rho, beta, x, y, z, h, n_sub, n_keep, n_transient, out):
    """Classical RK4 for the Lorenz system; returns -1 or the bad sample index."""
    isfinite = math.isfinite
    total = n_transient + n_keep
    for s in range(total):
        for _ in range(n_sub):
            k1x = sigma * (y - x)
            k1y = x * (rho - z) - y
            k1z = x * y - beta * z
            ax = x + 0.5 * h * k1x
            ay = y + 0.5 * h * k1y
            az = z + 0.5 * h * k1z
            k2x = sigma * (ay - ax)
            k2y = ax * (rho - az) - ay
            k2z = ax * ay - beta * az
            ax = x + 0.5 * h * k2x
            ay = y + 0.5 * h * k2y
            az = z + 0.5 * h * k2z
            k3x = sigma * (ay - ax)
            k3y = ax * (rho - az) - ay
            k3z = ax * ay - beta * az
            ax = x + h * k3x
            ay = y + h * k3y
            az = z + h * k3z
            k4x = sigma * (ay - ax)
            k4y = ax * (rho - az) - ay
            k4z = ax * ay - beta * az
            x = x + h * (k1x + 2.0 * k2x + 2.0 * k3x + k4x) / 6.0
            y = y + h * (k1y + 2.0 * k2y + 2.0 * k3y + k4y) / 6.0
            z = z + h * (k1z + 2.0 * k2z + 2.0 * k3z + k4z) / 6.0
        if not (isfinite(x) and isfinite(y) and isfinite(z)):
            return s
        if s >= n_transient:
            r = s - n_transient
            out[r, 0] = x
            out[r, 1] = y
            out[r, 2] = z
    return -1


def integrate_rossler(a, b, c, eta, x, y, z, h, n_sub, n_keep, n_transient, out):
    """RK4 for the Rossler system with a constant offset ``eta`` on dy/dt."""
    isfinite = math.isfinite
    total = n_transient + n_keep
    for s in range(total):
        for _ in range(n_sub):
            k1x = -y - z
            k1y = x + a * y + eta
            k1z = b + z * (x - c)
            ax = x + 0.5 * h * k1x
            ay = y + 0.5 * h * k1y
            az = z + 0.5 * h * k1z
            k2x = -ay - az
            k2y = ax + a * ay + eta
            k2z = b + az * (ax - c)
            ax = x + 0.5 * h * k2x
            ay = y + 0.5 * h * k2y
            az = z + 0.5 * h * k2z
            k3x = -ay - az
            k3y = ax + a * ay + eta
            k3z = b + az * (ax - c)
            ax = x + h * k3x
            ay = y + h * k3y
            az = z + h * k3z
            k4x = -ay - az
            k4y = ax + a * ay + eta
            k4z = b + az * (ax - c)
            x = x + h * (k1x + 2.0 * k2x + 2.0 * k3x + k4x) / 6.0
            y = y + h * (k1y + 2.0 * k2y + 2.0 * k3y + k4y) / 6.0
            z = z + h * (k1z + 2.0 * k2z + 2.0 * k3z + k4z) / 6.0
        if not (isfinite(x) and isfinite(y) and isfinite(z)):
            return s
        if s >= n_transient:
            r = s - n_transient
            out[r, 0] = x
            out[r, 1] = y
            out[r, 2] = z
    return -1


def integrate_rossler_ou(a, b, c, x, y, z, eta, alpha, noise_scale, xi,
                         h, n_sub, n_keep, n_transient, out):
    """RK4 Rossler driven through dy/dt by an AR(1) sequence ``eta``.

    ``eta`` is held frozen within each internal step and updated afterwards
    as ``eta*alpha + noise_scale*xi[k]``; the recorded row carries the value
    in effect after the step, aligned with the state sample.
    """
    isfinite = math.isfinite
    total = n_transient + n_keep
    idx = 0
    for s in range(total):
        for _ in range(n_sub):
            k1x = -y - z
            k1y = x + a * y + eta
            k1z = b + z * (x - c)
            ax = x + 0.5 * h * k1x
            ay = y + 0.5 * h * k1y
            az = z + 0.5 * h * k1z
            k2x = -ay - az
            k2y = ax + a * ay + eta
            k2z = b + az * (ax - c)
            ax = x + 0.5 * h * k2x
            ay = y + 0.5 * h * k2y
            az = z + 0.5 * h * k2z
            k3x = -ay - az
            k3y = ax + a * ay + eta
            k3z = b + az * (ax - c)
            ax = x + h * k3x
            ay = y + h * k3y
            az = z + h * k3z
            k4x = -ay - az
            k4y = ax + a * ay + eta
            k4z = b + az * (ax - c)
            x = x + h * (k1x + 2.0 * k2x + 2.0 * k3x + k4x) / 6.0
            y = y + h * (k1y + 2.0 * k2y + 2.0 * k3y + k4y) / 6.0
            z = z + h * (k1z + 2.0 * k2z + 2.0 * k3z + k4z) / 6.0
            eta = eta * alpha + noise_scale * xi[idx]
            idx += 1
        if not (isfinite(x) and isfinite(y) and isfinite(z) and isfinite(eta)):
            return s
        if s >= n_transient:
            r = s - n_transient
            out[r, 0] = x
            out[r, 1] = y
            out[r, 2] = z
            out[r, 3] = eta
    return -1

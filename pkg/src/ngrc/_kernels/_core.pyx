# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: feature-chain evaluation and fixed-step RK4 integrators.

Arithmetic order matches ``ngrc._kernels.pure`` statement for statement so
the two backends agree to the last few ulps.
"""

from libc.math cimport pow, isfinite

BACKEND = "compiled"


def apply_pairs(const double[::1] embedded, const Py_ssize_t[:, ::1] positions,
                double[::1] out):
    """Evaluate the feature chain for one embedded vector."""
    cdef Py_ssize_t n_in = embedded.shape[0]
    cdef Py_ssize_t m = positions.shape[0]
    cdef Py_ssize_t k, i, j
    cdef double base, expo
    for k in range(m):
        i = positions[k, 0]
        j = positions[k, 1]
        base = embedded[i] if i < n_in else out[i - n_in]
        expo = embedded[j] if j < n_in else out[j - n_in]
        out[k] = pow(1.0 - base, expo)


def apply_pairs_batch(const double[:, ::1] embedded,
                      const Py_ssize_t[:, ::1] positions,
                      double[:, ::1] out):
    """Evaluate the feature chain for a block of time points."""
    cdef Py_ssize_t n_in = embedded.shape[0]
    cdef Py_ssize_t n_t = embedded.shape[1]
    cdef Py_ssize_t m = positions.shape[0]
    cdef Py_ssize_t k, t, i, j
    cdef const double *brow
    cdef const double *erow
    cdef double *orow
    for k in range(m):
        i = positions[k, 0]
        j = positions[k, 1]
        if i < n_in:
            brow = &embedded[i, 0]
        else:
            brow = <const double *> &out[i - n_in, 0]
        if j < n_in:
            erow = &embedded[j, 0]
        else:
            erow = <const double *> &out[j - n_in, 0]
        orow = &out[k, 0]
        for t in range(n_t):
            orow[t] = pow(1.0 - brow[t], erow[t])


def integrate_lorenz(double sigma, double rho, double beta,
                     double x, double y, double z,
                     double h, Py_ssize_t n_sub, Py_ssize_t n_keep,
                     Py_ssize_t n_transient, double[:, ::1] out):
    """Classical RK4 for the Lorenz system; returns -1 or the bad sample index."""
    cdef Py_ssize_t total = n_transient + n_keep
    cdef Py_ssize_t s, u, r
    cdef double k1x, k1y, k1z, k2x, k2y, k2z, k3x, k3y, k3z, k4x, k4y, k4z
    cdef double ax, ay, az
    for s in range(total):
        for u in range(n_sub):
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


def integrate_rossler(double a, double b, double c, double eta,
                      double x, double y, double z,
                      double h, Py_ssize_t n_sub, Py_ssize_t n_keep,
                      Py_ssize_t n_transient, double[:, ::1] out):
    """RK4 for the Rossler system with a constant offset ``eta`` on dy/dt."""
    cdef Py_ssize_t total = n_transient + n_keep
    cdef Py_ssize_t s, u, r
    cdef double k1x, k1y, k1z, k2x, k2y, k2z, k3x, k3y, k3z, k4x, k4y, k4z
    cdef double ax, ay, az
    for s in range(total):
        for u in range(n_sub):
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


def integrate_rossler_ou(double a, double b, double c,
                         double x, double y, double z,
                         double eta, double alpha, double noise_scale,
                         const double[::1] xi,
                         double h, Py_ssize_t n_sub, Py_ssize_t n_keep,
                         Py_ssize_t n_transient, double[:, ::1] out):
    """RK4 Rossler driven through dy/dt by an AR(1) sequence ``eta``."""
    cdef Py_ssize_t total = n_transient + n_keep
    cdef Py_ssize_t s, u, r, idx
    cdef double k1x, k1y, k1z, k2x, k2y, k2z, k3x, k3y, k3z, k4x, k4y, k4z
    cdef double ax, ay, az
    idx = 0
    for s in range(total):
        for u in range(n_sub):
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

"""Independent reference computations used by the tests.

Deliberately naive: loops, sorting and general-purpose minimizers instead of
the closed forms used by the package.
"""

import numpy as np
from scipy.optimize import minimize


def simplex_sort(y):
    """Sort-and-threshold Euclidean projection onto the unit simplex."""
    y = np.asarray(y, dtype=float)
    u = np.sort(y)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, y.size + 1)
    rho = np.nonzero(u - (css - 1.0) / k > 0)[0][-1]
    theta = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(y - theta, 0.0)


def periodic_convolution(img, psf):
    """Direct sum ``out[i,j] = sum_{a,b} psf[a,b] img[i-a+ca, j-b+cb]`` with
    wraparound and the kernel centered at ``(ca, cb) = (kh//2, kw//2)``."""
    m, n = img.shape
    kh, kw = psf.shape
    ca, cb = kh // 2, kw // 2
    out = np.zeros_like(img, dtype=float)
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for a in range(kh):
                for b in range(kw):
                    acc += psf[a, b] * img[(i - a + ca) % m, (j - b + cb) % n]
            out[i, j] = acc
    return out


def periodic_laplacian(img):
    """Five-point periodic Laplacian by explicit loops."""
    m, n = img.shape
    out = np.zeros_like(img, dtype=float)
    for i in range(m):
        for j in range(n):
            out[i, j] = (img[(i + 1) % m, j] + img[(i - 1) % m, j] + img[i, (j + 1) % n]
                         + img[i, (j - 1) % n] - 4.0 * img[i, j])
    return out


def central_difference(fun, x, h=None):
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        hi = h if h is not None else 1e-6 * max(1.0, abs(x[i]))
        e = np.zeros_like(x)
        e[i] = hi
        g[i] = (fun(x + e) - fun(x - e)) / (2.0 * hi)
    return g


def minimize_q(kind, y_in, grad, alpha, d, rho=0.0):
    """Minimize ``g(z) + grad^T (z - y) + ||z - y||_D^2 / (2 alpha)`` with a
    general-purpose constrained solver."""
    y_in, grad, d = (np.asarray(v, dtype=float) for v in (y_in, grad, d))
    n = y_in.size

    def q(z):
        r = z - y_in
        lin = rho * np.sum(z) if kind == "nonneg_plus_l1" else 0.0
        return lin + grad @ r + np.sum(d * r * r) / (2.0 * alpha)

    def dq(z):
        lin = rho if kind == "nonneg_plus_l1" else 0.0
        return lin + grad + d * (z - y_in) / alpha

    bounds = [(0.0, None)] * n
    if kind == "simplex_indicator":
        res = minimize(q, np.full(n, 1.0 / n), jac=dq, method="SLSQP", bounds=bounds,
                       constraints=[{"type": "eq", "fun": lambda z: np.sum(z) - 1.0,
                                     "jac": lambda z: np.ones_like(z)}],
                       options={"ftol": 1e-15, "maxiter": 1000})
    else:
        res = minimize(q, np.maximum(y_in, 0.0), jac=dq, method="L-BFGS-B", bounds=bounds,
                       options={"ftol": 1e-15, "gtol": 1e-13, "maxiter": 5000})
    return res.x

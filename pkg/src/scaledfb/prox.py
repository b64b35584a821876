"""Scaled proximity operators, simplex projection and feasible sets.

All metrics are diagonal: ``d`` is the vector of diagonal entries of D, and
``||v||_D^2 = sum(d * v**2)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ALPHA_MIN = 1e-300


def _diag(D, n):
    d = np.asarray(getattr(D, "d", D), dtype=float)
    if d.ndim == 0:
        d = np.full(n, float(d))
    if d.shape != (n,):
        raise ValueError(f"metric has {d.size} entries, vector has {n}")
    if not np.all(d > 0):
        raise ValueError("metric entries must be positive")
    return d


def _check_alpha(alpha):
    if not alpha > ALPHA_MIN:
        raise ValueError(f"steplength must be positive, got {alpha!r}")


# --- simplex -----------------------------------------------------------------

def _simplex_root(u, d, total=1.0, max_iter=200):
    """Solve ``phi(lam) = sum(max(0, u - lam/d)) - total = 0``.

    phi is piecewise linear and nonincreasing.  A bracket is shrunk by secant
    steps on the current linear piece, falling back to bisection when a
    step leaves the bracket.
    """
    n = u.size
    inv_d = 1.0 / d

    def phi(lam):
        return float(np.sum(np.maximum(u - lam * inv_d, 0.0))) - total

    lo = float(np.min(d * (u - total / n)))
    hi = float(np.max(d * u))
    f_lo, f_hi = phi(lo), phi(hi)
    if f_lo == 0.0:
        return lo
    lam = hi
    for _ in range(max_iter):
        # active-set step: exact root of the piece containing the secant point
        lam_s = lo - f_lo * (hi - lo) / (f_hi - f_lo) if f_hi != f_lo else 0.5 * (lo + hi)
        if not lo < lam_s < hi:
            lam_s = 0.5 * (lo + hi)
        act = u - lam_s * inv_d > 0
        if np.any(act):
            lam_n = (float(np.sum(u[act])) - total) / float(np.sum(inv_d[act]))
            if lo < lam_n < hi:
                lam_s = lam_n
        lam = lam_s
        f = phi(lam)
        if abs(f) < 1e-14:
            return lam
        if f > 0:
            lo, f_lo = lam, f
        else:
            hi, f_hi = lam, f
        if hi - lo < 1e-15 * (1.0 + abs(lam)):
            break
    return lam


def project_simplex(y):
    """Euclidean projection onto ``{x >= 0, sum(x) = 1}``."""
    y = np.asarray(y, dtype=float).reshape(-1)
    return _weighted_simplex(y, np.ones_like(y))


def _weighted_simplex(u, d):
    lam = _simplex_root(u, d)
    x = np.maximum(u - lam / d, 0.0)
    s = x.sum()
    if s > 0 and abs(s - 1.0) > 1e-13:
        # the root is exact to rounding; absorb the residue in the active set
        act = x > 0
        x[act] += (1.0 - s) / d[act] / np.sum(1.0 / d[act])
        x = np.maximum(x, 0.0)
    return x


# --- nonsmooth terms -----------------------------------------------------------

class NonsmoothTerm:
    """Convex, lower semicontinuous g with a closed-form scaled prox.

    ``prox(u, alpha, d)`` returns ``argmin_z g(z) + ||z - u||_D^2 / (2 alpha)``.
    """

    def value(self, x):
        raise NotImplementedError

    def prox(self, u, alpha, d):
        raise NotImplementedError

    def contains(self, x):
        return bool(np.isfinite(self.value(x)))


@dataclass(frozen=True)
class NonnegIndicator(NonsmoothTerm):
    kind = "nonneg_indicator"

    def value(self, x):
        return 0.0 if np.all(np.asarray(x) >= 0) else np.inf

    def prox(self, u, alpha, d):
        return np.maximum(u, 0.0)


@dataclass(frozen=True)
class NonnegL1(NonsmoothTerm):
    """``rho * ||x||_1`` restricted to the nonnegative orthant."""

    rho: float = 1e-3
    kind = "nonneg_plus_l1"

    def value(self, x):
        x = np.asarray(x)
        return float(self.rho * np.sum(x)) if np.all(x >= 0) else np.inf

    def prox(self, u, alpha, d):
        return np.maximum(u - alpha * self.rho / d, 0.0)


@dataclass(frozen=True)
class L1Norm(NonsmoothTerm):
    """``rho * ||x||_1`` on the whole space; the scaled prox soft-thresholds
    entry i at ``alpha * rho / d_i``."""

    rho: float = 1e-3
    kind = "l1"

    def value(self, x):
        return float(self.rho * np.sum(np.abs(x)))

    def prox(self, u, alpha, d):
        return np.sign(u) * np.maximum(np.abs(u) - alpha * self.rho / d, 0.0)


@dataclass(frozen=True)
class SimplexIndicator(NonsmoothTerm):
    kind = "simplex_indicator"
    tol: float = 1e-9

    def value(self, x):
        x = np.asarray(x)
        ok = np.all(x >= 0) and abs(float(np.sum(x)) - 1.0) <= self.tol
        return 0.0 if ok else np.inf

    def prox(self, u, alpha, d):
        # the scaled prox onto the simplex does not depend on alpha
        return _weighted_simplex(u, d)


def scaled_prox(g, y_in, grad, alpha, D):
    """Minimizer of ``g(z) + grad^T (z - y_in) + ||z - y_in||_D^2 / (2 alpha)``,
    i.e. the prox of g in the D-norm at ``y_in - alpha * D^{-1} grad``."""
    _check_alpha(alpha)
    y_in = np.asarray(y_in, dtype=float).reshape(-1)
    grad = np.asarray(grad, dtype=float).reshape(-1)
    d = _diag(D, y_in.size)
    return g.prox(y_in - alpha * grad / d, alpha, d)


# --- feasible sets Y -----------------------------------------------------------

class FeasibleSet:
    def project(self, x, D=None):
        raise NotImplementedError


@dataclass(frozen=True)
class WholeSpace(FeasibleSet):
    kind = "whole_space"

    def project(self, x, D=None):
        return np.asarray(x, dtype=float)

    def contains(self, x):
        return True


@dataclass(frozen=True)
class NonnegOrthant(FeasibleSet):
    kind = "nonneg_orthant"

    def project(self, x, D=None):
        # for a diagonal metric the projection onto the orthant is a clamp
        return np.maximum(np.asarray(x, dtype=float), 0.0)

    def contains(self, x):
        return bool(np.all(np.asarray(x) >= 0))


def scaled_projection(Y, x, D=None):
    """``argmin_{y in Y} ||y - x||_D^2``."""
    if not isinstance(Y, (WholeSpace, NonnegOrthant)):
        raise NotImplementedError(f"projection onto {type(Y).__name__} is not supported")
    x = np.asarray(x, dtype=float).reshape(-1)
    if D is not None:
        _diag(D, x.size)
    return Y.project(x, D)

"""Smooth terms f of the composite objective.

Every term exposes ``value``, ``gradient`` and ``split``; the latter returns
nonnegative arrays ``(U, V)`` with ``U - V = -grad f(x)``, which is what the
split-gradient scaling needs.
"""

from __future__ import annotations

import numpy as np

from .linops import DenseOperator, DiscreteGradient, LinearOperator


class DomainError(ValueError):
    """Raised when a point lies outside the domain of a smooth term."""


class SmoothTerm:
    lipschitz = None

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def split(self, x):
        raise NotImplementedError

    def value_and_gradient(self, x):
        return self.value(x), self.gradient(x)

    def __add__(self, other):
        return SumOfTerms([(1.0, self), (1.0, other)])

    def __rmul__(self, weight):
        return SumOfTerms([(float(weight), self)])


class KullbackLeibler(SmoothTerm):
    """Generalized KL divergence ``sum b ln(b/(Ax+bg)) + (Ax+bg) - b``.

    Entries with ``b_i = 0`` contribute only ``(Ax+bg)_i`` (0 ln 0 = 0).
    """

    def __init__(self, A, b, bg):
        if not isinstance(A, LinearOperator):
            A = DenseOperator(A, nonneg=True)
        b = np.asarray(b, dtype=float).reshape(-1)
        if b.size != A.shape[0]:
            raise ValueError("data length does not match operator rows")
        if np.any(b < 0):
            raise ValueError("data must be nonnegative")
        if not bg > 0:
            raise ValueError("background must be positive")
        self.A = A
        self.b = b
        self.bg = float(bg)
        self._pos = b > 0
        self._blogb = np.where(self._pos, b * np.log(np.where(self._pos, b, 1.0)), 0.0)
        self._colsum = A.adjoint(np.ones(A.shape[0]))

    def _forward(self, x):
        z = self.A.apply(x) + self.bg
        if np.any(z[self._pos] <= 0):
            raise DomainError("Ax + bg must be positive where data is positive")
        return z

    def _value_from(self, z):
        logz = np.log(np.where(self._pos, z, 1.0))
        return float(np.sum(self._blogb - self.b * logz + z - self.b))

    def value(self, x):
        return self._value_from(self._forward(x))

    def gradient(self, x):
        z = self._forward(x)
        return self._colsum - self.A.adjoint(self.b / z)

    def value_and_gradient(self, x):
        z = self._forward(x)
        return self._value_from(z), self._colsum - self.A.adjoint(self.b / z)

    def split(self, x):
        z = self._forward(x)
        return self.A.adjoint(self.b / z), self._colsum.copy()


class HypersurfacePotential(SmoothTerm):
    """Smoothed total variation ``sum_ij sqrt(|(Dx)_ij|^2 + delta^2)`` on an
    m-by-m periodic grid."""

    def __init__(self, m, hs_delta):
        if not hs_delta >= 0:
            raise ValueError("hs_delta must be nonnegative")
        self.m = int(m)
        self.hs_delta = float(hs_delta)
        self.grad_op = DiscreteGradient(self.m)

    def _weights(self, x):
        n = self.m * self.m
        g = self.grad_op.apply(x)
        w = np.sqrt(g[:n] ** 2 + g[n:] ** 2 + self.hs_delta ** 2)
        return g, w

    def value(self, x):
        _, w = self._weights(x)
        return float(np.sum(w))

    def gradient(self, x):
        g, w = self._weights(x)
        return self.grad_op.adjoint(g / np.concatenate([w, w]))

    def value_and_gradient(self, x):
        g, w = self._weights(x)
        return float(np.sum(w)), self.grad_op.adjoint(g / np.concatenate([w, w]))

    def split(self, x):
        # grad_ij = c_ij x_ij - nb_ij with
        #   c_ij  = 2/w_ij + 1/w_{i-1,j} + 1/w_{i,j-1}
        #   nb_ij = (x_{i+1,j} + x_{i,j+1})/w_ij + x_{i-1,j}/w_{i-1,j} + x_{i,j-1}/w_{i,j-1}
        _, w = self._weights(x)
        m = self.m
        img = np.asarray(x, dtype=float).reshape(m, m)
        r = 1.0 / w.reshape(m, m)
        r_up = np.roll(r, 1, axis=0)
        r_left = np.roll(r, 1, axis=1)
        c = 2.0 * r + r_up + r_left
        nb = ((np.roll(img, -1, axis=0) + np.roll(img, -1, axis=1)) * r
              + np.roll(img, 1, axis=0) * r_up
              + np.roll(img, 1, axis=1) * r_left)
        return nb.reshape(-1), (c * img).reshape(-1)


class QuadraticForm(SmoothTerm):
    """``f(x) = x^T C x / 2 - p^T x`` with symmetric positive semidefinite C."""

    def __init__(self, C, p):
        C = np.asarray(C, dtype=float)
        p = np.asarray(p, dtype=float).reshape(-1)
        if C.ndim != 2 or C.shape[0] != C.shape[1] or C.shape[0] != p.size:
            raise ValueError("C must be square and match p")
        if np.max(np.abs(C - C.T)) > 1e-12:
            raise ValueError("C must be symmetric")
        self.C = C
        self.p = p
        self._Cpos = np.maximum(C, 0.0)
        self._Cneg = np.maximum(-C, 0.0)
        self._has_neg = bool(np.any(C < 0))

    def _check(self, x):
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.p.size:
            raise ValueError(f"expected {self.p.size} entries, got {x.size}")
        return x

    def value(self, x):
        x = self._check(x)
        return float(0.5 * x @ (self.C @ x) - self.p @ x)

    def gradient(self, x):
        x = self._check(x)
        return self.C @ x - self.p

    def value_and_gradient(self, x):
        x = self._check(x)
        Cx = self.C @ x
        return float(0.5 * x @ Cx - self.p @ x), Cx - self.p

    def split(self, x):
        x = self._check(x)
        pp, pn = np.maximum(self.p, 0.0), np.maximum(-self.p, 0.0)
        if not self._has_neg:
            return pp, self.C @ x + pn
        return pp + self._Cneg @ x, self._Cpos @ x + pn


class SumOfTerms(SmoothTerm):
    """Weighted sum of smooth terms seen by the solver as a single f."""

    def __init__(self, terms):
        self.terms = []
        for w, t in terms:
            if isinstance(t, SumOfTerms):
                self.terms.extend((w * w2, t2) for w2, t2 in t.terms)
            else:
                self.terms.append((float(w), t))

    def value(self, x):
        return float(sum(w * t.value(x) for w, t in self.terms))

    def gradient(self, x):
        return sum(w * t.gradient(x) for w, t in self.terms)

    def value_and_gradient(self, x):
        val, grad = 0.0, 0.0
        for w, t in self.terms:
            v, g = t.value_and_gradient(x)
            val += w * v
            grad = grad + w * g
        return float(val), grad

    def split(self, x):
        U, V = 0.0, 0.0
        for w, t in self.terms:
            u, v = t.split(x)
            U = U + w * u
            V = V + w * v
        return U, V

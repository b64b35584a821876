"""Linear operators acting on flat real vectors.

Images are m-by-m arrays stored row-major as vectors of length m*m; all
boundary handling is periodic.
"""

from __future__ import annotations

import numpy as np


class LinearOperator:
    """Base class: subclasses set ``shape = (n_out, n_in)`` and implement
    ``_apply`` / ``_adjoint`` on 1-D float arrays."""

    shape: tuple[int, int]

    def apply(self, x):
        x = _as_vector(x, self.shape[1], "apply")
        return self._apply(x)

    def adjoint(self, y):
        y = _as_vector(y, self.shape[0], "adjoint")
        return self._adjoint(y)

    def __matmul__(self, x):
        return self.apply(x)

    def _apply(self, x):
        raise NotImplementedError

    def _adjoint(self, y):
        raise NotImplementedError


def _as_vector(v, n, where):
    v = np.asarray(v, dtype=float)
    if v.size != n:
        raise ValueError(f"{where}: expected {n} entries, got {v.size}")
    return v.reshape(-1)


class DenseOperator(LinearOperator):
    """Explicit m-by-n matrix.

    With ``nonneg=True`` the matrix is checked to have nonnegative entries
    and at least one positive entry in every row and every column, which is
    what the Poisson data terms need for ``A x + bg > 0`` and ``A^T 1 > 0``.
    """

    def __init__(self, entries, nonneg=False):
        entries = np.ascontiguousarray(entries, dtype=float)
        if entries.ndim != 2:
            raise ValueError("DenseOperator needs a 2-D array")
        if nonneg:
            if np.any(entries < 0):
                raise ValueError("negative entry in a nonnegative operator")
            if not (np.all(entries.max(axis=1) > 0) and np.all(entries.max(axis=0) > 0)):
                raise ValueError("every row and column must hold a positive entry")
        self.entries = entries
        self.nonneg = bool(nonneg)
        self.shape = entries.shape

    def _apply(self, x):
        return self.entries @ x

    def _adjoint(self, y):
        # .T is a view; no transposed copy is made
        return self.entries.T @ y


def center_psf(psf, m):
    """Embed a centered kernel into an m-by-m array with its center at (0, 0).

    The center of a kh-by-kw kernel is taken at index (kh // 2, kw // 2).
    """
    psf = np.asarray(psf, dtype=float)
    kh, kw = psf.shape
    if kh > m or kw > m:
        raise ValueError(f"psf of shape {psf.shape} does not fit an {m}x{m} grid")
    big = np.zeros((m, m))
    big[:kh, :kw] = psf
    return np.roll(big, (-(kh // 2), -(kw // 2)), axis=(0, 1))


class CirculantConvolution(LinearOperator):
    """Periodic 2-D convolution with a point-spread function, via FFT.

    The forward transform is unscaled and the inverse carries 1/(m*m), so a
    delta PSF gives the identity exactly.
    """

    def __init__(self, psf, m):
        self.m = int(m)
        self.shape = (self.m * self.m, self.m * self.m)
        self.psf = np.asarray(psf, dtype=float)
        self.psf_spectrum = np.fft.rfft2(center_psf(self.psf, self.m))

    def _apply(self, x):
        X = np.fft.rfft2(x.reshape(self.m, self.m))
        return np.fft.irfft2(X * self.psf_spectrum, s=(self.m, self.m)).reshape(-1)

    def _adjoint(self, y):
        Y = np.fft.rfft2(y.reshape(self.m, self.m))
        return np.fft.irfft2(Y * np.conj(self.psf_spectrum), s=(self.m, self.m)).reshape(-1)


class DiscreteGradient(LinearOperator):
    """Forward differences with wraparound.

    Output layout is ``[vertical diffs (m*m), horizontal diffs (m*m)]`` where
    the vertical component at (i, j) is ``x[i+1, j] - x[i, j]`` and the
    horizontal one is ``x[i, j+1] - x[i, j]``.
    """

    def __init__(self, m):
        self.m = int(m)
        self.shape = (2 * self.m * self.m, self.m * self.m)

    def _apply(self, x):
        img = x.reshape(self.m, self.m)
        dv = np.roll(img, -1, axis=0) - img
        dh = np.roll(img, -1, axis=1) - img
        return np.concatenate([dv.reshape(-1), dh.reshape(-1)])

    def _adjoint(self, y):
        n = self.m * self.m
        pv = y[:n].reshape(self.m, self.m)
        ph = y[n:].reshape(self.m, self.m)
        out = (np.roll(pv, 1, axis=0) - pv) + (np.roll(ph, 1, axis=1) - ph)
        return out.reshape(-1)

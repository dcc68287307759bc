"""Hot inner loops: numba-jitted kernels with pure-numpy fallbacks.

The heavy lifting (FFTs, dense eigensolves) lives in pocketfft/LAPACK; what
remains hot in Python are the O(N^2) gather loops that scatter per-column
Fourier coefficients into operator matrices, and the O(N^2) column-energy
scans behind the modulation diagnostics.  Those run here.

Backend selection: numba is used when importable unless the environment
variable ``RESIDUELAB_NO_NUMBA`` is set to a non-empty value other than
``0``/``false``; the active backend is reported in ``BACKEND``.  Both paths
compute identical values (tests cross-check them; ``benchmarks/`` times
them against each other).
"""

from __future__ import annotations

import os

import numpy as np


def _numba_disabled() -> bool:
    flag = os.environ.get("RESIDUELAB_NO_NUMBA", "").strip().lower()
    return flag not in ("", "0", "false")


HAVE_NUMBA = False
if not _numba_disabled():
    try:
        from numba import njit

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - environment without numba
        HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# numpy reference implementations


def gather_matrix_numpy(colcoef, row_freqs, col_freqs, G):
    """entries[a, b] = colcoef[flat((m_a - m_b) mod G), b] * (-1)^{sum(m_a - m_b)}.

    ``colcoef`` holds, per column b, the d-dimensional FFT of the symbol
    sampled on the uniform grid over [-pi, pi)^d, flattened in C order;
    the sign is the phase shift from the grid starting at -pi.
    """
    diff = row_freqs[:, None, :] - col_freqs[None, :, :]
    flat = np.zeros(diff.shape[:2], dtype=np.int64)
    for i in range(diff.shape[-1]):
        flat = flat * G + np.mod(diff[..., i], G)
    sign = 1.0 - 2.0 * (np.mod(diff.sum(axis=-1), 2)).astype(np.float64)
    cols = np.arange(colcoef.shape[1])
    return colcoef[flat, cols[None, :]] * sign


def toeplitz_gather_numpy(coef_flat, row_freqs, col_freqs, G):
    """entries[a, b] = coef_flat[flat((m_a - m_b) mod G)] * sign; shared column table."""
    diff = row_freqs[:, None, :] - col_freqs[None, :, :]
    flat = np.zeros(diff.shape[:2], dtype=np.int64)
    for i in range(diff.shape[-1]):
        flat = flat * G + np.mod(diff[..., i], G)
    sign = 1.0 - 2.0 * (np.mod(diff.sum(axis=-1), 2)).astype(np.float64)
    return coef_flat[flat] * sign


def column_energies_numpy(entries):
    """Squared Euclidean norm of every column."""
    return (entries.real**2 + entries.imag**2).sum(axis=0)


# ---------------------------------------------------------------------------
# numba kernels

if HAVE_NUMBA:

    @njit(cache=True)
    def _gather_matrix_nb(colcoef, row_freqs, col_freqs, G):  # pragma: no cover - jitted
        N = row_freqs.shape[0]
        B = col_freqs.shape[0]
        d = row_freqs.shape[1]
        out = np.empty((N, B), dtype=np.complex128)
        for a in range(N):
            for b in range(B):
                flat = 0
                tot = 0
                for i in range(d):
                    k = row_freqs[a, i] - col_freqs[b, i]
                    tot += k
                    flat = flat * G + (k % G)
                sign = 1.0 if tot % 2 == 0 else -1.0
                out[a, b] = colcoef[flat, b] * sign
        return out

    @njit(cache=True)
    def _toeplitz_gather_nb(coef_flat, row_freqs, col_freqs, G):  # pragma: no cover
        N = row_freqs.shape[0]
        B = col_freqs.shape[0]
        d = row_freqs.shape[1]
        out = np.empty((N, B), dtype=np.complex128)
        for a in range(N):
            for b in range(B):
                flat = 0
                tot = 0
                for i in range(d):
                    k = row_freqs[a, i] - col_freqs[b, i]
                    tot += k
                    flat = flat * G + (k % G)
                sign = 1.0 if tot % 2 == 0 else -1.0
                out[a, b] = coef_flat[flat] * sign
        return out

    @njit(cache=True)
    def _column_energies_nb(entries):  # pragma: no cover - jitted
        N, B = entries.shape
        out = np.zeros(B, dtype=np.float64)
        for b in range(B):
            acc = 0.0
            for a in range(N):
                v = entries[a, b]
                acc += v.real * v.real + v.imag * v.imag
            out[b] = acc
        return out


def gather_matrix(colcoef, row_freqs, col_freqs, G):
    colcoef = np.ascontiguousarray(colcoef, dtype=np.complex128)
    row_freqs = np.ascontiguousarray(row_freqs, dtype=np.int64)
    col_freqs = np.ascontiguousarray(col_freqs, dtype=np.int64)
    if HAVE_NUMBA:
        return _gather_matrix_nb(colcoef, row_freqs, col_freqs, np.int64(G))
    return gather_matrix_numpy(colcoef, row_freqs, col_freqs, int(G))


def toeplitz_gather(coef_flat, row_freqs, col_freqs, G):
    coef_flat = np.ascontiguousarray(coef_flat, dtype=np.complex128)
    row_freqs = np.ascontiguousarray(row_freqs, dtype=np.int64)
    col_freqs = np.ascontiguousarray(col_freqs, dtype=np.int64)
    if HAVE_NUMBA:
        return _toeplitz_gather_nb(coef_flat, row_freqs, col_freqs, np.int64(G))
    return toeplitz_gather_numpy(coef_flat, row_freqs, col_freqs, int(G))


def column_energies(entries):
    entries = np.ascontiguousarray(entries, dtype=np.complex128)
    if HAVE_NUMBA:
        return _column_energies_nb(entries)
    return column_energies_numpy(entries)

"""Eigenvalue/singular-value sequences and finite-scale sequence diagnostics.

Ordering rule used everywhere: |lambda| non-increasing, ties broken by
descending real part then descending imaginary part, so runs are
reproducible and partial sums well defined.  Sequences shorter than a
comparison partner are zero-padded (matching the convention that
eigenvalues of a finite-rank tail are zero).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from . import _kernels
from .quadrature import DEFAULT_QUAD, QuadSpec
from .quantize import OperatorMatrix
from .sequences import TrendReport, log_trend_report, trend_report
from .symbols import Symbol, _ball_integral_log


class EigensolverError(RuntimeError):
    """Dense eigensolver failed to converge."""


def _order_values(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=complex)
    order = np.lexsort((-values.imag, -values.real, -np.abs(values)))
    return values[order]


@dataclass(frozen=True)
class EigenSequence:
    """Complex eigenvalues (or nonnegative singular values) in canonical order."""

    values: np.ndarray
    kind: str = "eigen"

    def __post_init__(self):
        if self.kind not in ("eigen", "singular"):
            raise ValueError(f"unknown sequence kind {self.kind!r}")
        if self.kind == "singular":
            v = self.values
            if np.any(v.imag != 0) or np.any(v.real < -1e-15):
                raise ValueError("singular values must be real and nonnegative")

    def __len__(self) -> int:
        return len(self.values)

    def abs_values(self) -> np.ndarray:
        return np.abs(self.values)

    def partial_sums(self) -> np.ndarray:
        return np.cumsum(self.values)


def from_values(values, kind: str = "eigen") -> EigenSequence:
    return EigenSequence(values=_order_values(values), kind=kind)


def _entries_of(T) -> tuple[np.ndarray, str]:
    if isinstance(T, OperatorMatrix):
        return T.entries, T.label
    return np.asarray(T, dtype=complex), "array"


def eigenvalue_sequence(T) -> EigenSequence:
    """All eigenvalues from a dense backward-stable solve, canonically ordered."""
    entries, label = _entries_of(T)
    try:
        vals = la.eigvals(entries)
    except la.LinAlgError as exc:
        raise EigensolverError(f"eigensolver failed on {label!r}: {exc}") from exc
    return EigenSequence(values=_order_values(vals), kind="eigen")


def singular_values(T) -> EigenSequence:
    entries, label = _entries_of(T)
    try:
        vals = la.svdvals(entries)
    except la.LinAlgError as exc:
        raise EigensolverError(f"svd failed on {label!r}: {exc}") from exc
    return EigenSequence(values=np.asarray(vals, dtype=complex), kind="singular")


def weak_lp_seminorm(seq: EigenSequence, p: float) -> float:
    """sup_n n^{1/p} a*_n over the decreasing rearrangement of |values|."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if len(seq) == 0:
        raise ValueError("empty sequence")
    a = np.sort(seq.abs_values())[::-1]
    n = np.arange(1, len(a) + 1, dtype=float)
    return float((n ** (1.0 / p) * a).max())


def lidskii_check(T) -> float:
    """|trace(T) - sum of eigenvalues|: exact identity in finite dimension."""
    entries, _ = _entries_of(T)
    seq = eigenvalue_sequence(entries)
    return abs(complex(np.trace(entries)) - complex(seq.values.sum()))


def product_trace_check(A, S, hermitian_tol: float = 1e-10) -> float:
    """|trace(AS) - sum_n (A e_n, e_n) lambda_n(S)| over S's eigenvector sequence.

    S must be Hermitian; its eigenpairs are ordered by the canonical
    eigenvalue-sequence rule before the Fredholm-style sum is formed.
    """
    a_entries, _ = _entries_of(A)
    s_entries, s_label = _entries_of(S)
    if a_entries.shape != s_entries.shape:
        raise ValueError("operators must share the basis")
    dev = np.abs(s_entries - s_entries.conj().T).max()
    if dev > hermitian_tol * max(1.0, np.abs(s_entries).max()):
        raise ValueError(f"S is not Hermitian (deviation {dev:.2e}) in {s_label!r}")
    lam, vecs = la.eigh(s_entries)
    order = np.lexsort((-lam, -np.abs(lam)))
    lam = lam[order]
    vecs = vecs[:, order]
    fre = np.einsum("na,nm,ma->a", vecs.conj(), a_entries, vecs)
    lhs = complex(np.trace(a_entries @ s_entries))
    return abs(lhs - complex((fre * lam).sum()))


@dataclass
class DeviationReport:
    """Partial eigenvalue sums against the symbol's ball integrals."""

    n_grid: np.ndarray
    deviations: np.ndarray
    trend: TrendReport

    @property
    def max_abs(self) -> float:
        return self.trend.max_abs


def eigensum_vs_symbol(
    T: OperatorMatrix,
    sym: Symbol,
    n_grid,
    quad: QuadSpec = DEFAULT_QUAD,
    slope_threshold: float = 0.05,
    eigenseq: EigenSequence | None = None,
) -> DeviationReport:
    """D(n) = sum_{j<=n} lambda_j(T) - (2pi)^{-d} V(n^{1/d}) over n_grid.

    n_grid is guarded to N/2: beyond half the matrix size truncation error
    dominates and the comparison is meaningless.  A precomputed eigenvalue
    sequence may be passed to amortise the solve across diagnostics.
    """
    n_grid = np.asarray(sorted(int(n) for n in n_grid), dtype=np.int64)
    if n_grid[0] < 1 or n_grid[-1] > T.size // 2:
        raise ValueError(f"n_grid must lie in [1, N/2] = [1, {T.size // 2}]")
    seq = eigenseq if eigenseq is not None else eigenvalue_sequence(T)
    csum = seq.partial_sums()
    d = sym.d
    dev = np.empty(len(n_grid), dtype=complex)
    for i, n in enumerate(n_grid):
        ball = _ball_integral_log(sym, math.log(n) / d, quad)
        dev[i] = csum[n - 1] - ball / (2.0 * math.pi) ** d
    trend = log_trend_report(n_grid, dev, slope_threshold)
    return DeviationReport(n_grid=n_grid, deviations=dev, trend=trend)


@dataclass
class CommutatorDifferenceReport:
    """Delta(n) = sum_{j<=n}(a_j - b_j); bounded Delta marks equal traces."""

    delta: np.ndarray
    trend: TrendReport

    @property
    def verdict(self) -> str:
        return self.trend.verdict

    @property
    def max_abs(self) -> float:
        return self.trend.max_abs


def commutator_difference_diagnostic(
    a: EigenSequence,
    b: EigenSequence,
    slope_threshold: float = 0.05,
) -> CommutatorDifferenceReport:
    """Finite-scale commutator-subspace test on two eigenvalue sequences.

    The shorter sequence is zero-padded.  A bounded-trend Delta is the
    finite-scale signature that the two operators receive the same value
    from every normalised trace; a slope beyond the threshold marks
    log-divergent difference.
    """
    va, vb = np.asarray(a.values), np.asarray(b.values)
    n = max(len(va), len(vb))
    va = np.pad(va, (0, n - len(va)))
    vb = np.pad(vb, (0, n - len(vb)))
    delta = np.cumsum(va - vb)
    trend = log_trend_report(np.arange(1, n + 1), delta, slope_threshold)
    return CommutatorDifferenceReport(delta=delta, trend=trend)


@dataclass
class ModulationReport:
    """2^{n/2} ||T chi_{[0, 2^-n]}(V)||_HS per level, with trend."""

    levels: np.ndarray
    values: np.ndarray
    scale: float
    trend: TrendReport
    truncated: bool = False
    note: str = ""

    @property
    def sup(self) -> float:
        return float(self.values.max()) if len(self.values) else 0.0


def modulation_profile(
    T: OperatorMatrix,
    V: OperatorMatrix,
    levels: int,
    slope_threshold: float = 0.1,
) -> ModulationReport:
    """Finite-scale V-modulation test: c_n = 2^{n/2} ||T P_n||_HS.

    P_n masks basis vectors with (rescaled) V-eigenvalue at most 2^{-n};
    bounded c_n across levels is the modulation criterion.  V must be
    diagonal and nonnegative in the working basis; it is rescaled to norm
    one and the scale reported.
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    ventries = V.entries
    offdiag = ventries - np.diag(np.diagonal(ventries))
    if np.abs(offdiag).max() > 1e-12 * max(1.0, np.abs(ventries).max()):
        raise ValueError("V must be diagonal in the working basis")
    vdiag = np.diagonal(ventries).real
    if np.any(vdiag < -1e-14) or np.abs(np.diagonal(ventries).imag).max() > 1e-14:
        raise ValueError("V must be nonnegative")
    scale = float(vdiag.max())
    if scale <= 0:
        raise ValueError("V vanishes; modulation profile undefined")
    v = vdiag / scale

    energies = _kernels.column_energies(T.entries)
    vals, used = [], []
    truncated = False
    note = ""
    for n in range(1, levels + 1):
        mask = v <= 2.0 ** (-n)
        if not mask.any():
            truncated = True
            note = f"level {n}: threshold 2^-{n} fell below the smallest V eigenvalue"
            break
        vals.append(2.0 ** (n / 2.0) * math.sqrt(float(energies[mask].sum())))
        used.append(n)
    vals = np.asarray(vals)
    used = np.asarray(used, dtype=int)
    trend = trend_report(used.astype(float), vals, slope_threshold)
    return ModulationReport(
        levels=used, values=vals, scale=scale, trend=trend, truncated=truncated, note=note
    )


@dataclass
class TailEnergyReport:
    """e(n) = n sum_{k>n} ||T e_k||^2 over the ordered basis."""

    n_grid: np.ndarray
    values: np.ndarray
    trend: TrendReport

    @property
    def sup(self) -> float:
        return float(self.values.max()) if len(self.values) else 0.0


def tail_energy(
    T: OperatorMatrix, n_grid, slope_threshold: float = 0.1
) -> TailEnergyReport:
    """Column-energy tails; O(1) values are the V-modulation fingerprint."""
    n_grid = np.asarray(sorted(int(n) for n in n_grid), dtype=np.int64)
    N = T.size
    if n_grid[0] < 1 or n_grid[-1] >= N:
        raise ValueError(f"n_grid must lie in [1, N-1] = [1, {N - 1}]")
    energies = _kernels.column_energies(T.entries)
    suffix = np.concatenate([np.cumsum(energies[::-1])[::-1], [0.0]])
    vals = n_grid * suffix[n_grid]
    trend = log_trend_report(n_grid, vals, slope_threshold)
    return TailEnergyReport(n_grid=n_grid, values=vals, trend=trend)

"""Threshold tomography: Gini threshold, measurement selection and input encodings.

Flat record layout (length ``4**n``): the ``2**n`` diagonal outcomes, then for
every pair ``i < j`` in row-major order ``(0,1), (0,2), ..., (1,2), ...`` the
outcomes of the two off-diagonal projectors

* ``|+_ij> = (|i> + |j>)/sqrt(2)``:   ``r = (rho_ii + rho_jj)/2 + Re rho_ij``
* ``|L_ij> = (|i> + i|j>)/sqrt(2)``:  ``s = (rho_ii + rho_jj)/2 - Im rho_ij``

Skipped measurements hold the sentinel :data:`SKIPPED` (valid outcomes lie
in ``[0, 1]``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import AllZero, InconsistentReport, OutOfRange, ShapeMismatch
from .qstate import NoiseSpec, apply_noise, dim_of, n_qubits_of

SKIPPED = 2.0
DIAG_SUM_TOL = 1e-6


@lru_cache(maxsize=None)
def pair_index(dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Row-major ``(i, j)`` index arrays of the upper triangle, ``i < j``."""
    i, j = np.triu_indices(dim, 1)
    i.setflags(write=False)
    j.setflags(write=False)
    return i, j


def pairs(dim: int) -> list[tuple[int, int]]:
    i, j = pair_index(dim)
    return list(zip(i.tolist(), j.tolist()))


def gini_index(c) -> float:
    """Gini sparsity index of a nonnegative vector; 0 for uniform, ``1 - 1/N`` for a spike."""
    c = np.asarray(c, dtype=float)
    if np.any(c < 0):
        raise OutOfRange("Gini index needs nonnegative entries")
    total = c.sum()
    if total <= 0:
        raise AllZero("Gini index of an all-zero vector is undefined")
    n = c.size
    k = np.arange(1, n + 1)
    weights = (n - k + 0.5) / n
    return float(1.0 - 2.0 * np.sum(np.sort(c) / total * weights))


@dataclass(frozen=True)
class ThresholdReport:
    diag: np.ndarray
    gini: float
    threshold: float
    selected_pairs: list[tuple[int, int]] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.diag.size

    @property
    def n_measurements(self) -> int:
        return self.dim + 2 * len(self.selected_pairs)

    def mask(self) -> np.ndarray:
        """Boolean mask over the flat ``4**n`` layout: True where measured."""
        d = self.dim
        m = np.zeros(d * d, dtype=bool)
        m[:d] = True
        index = {p: k for k, p in enumerate(pairs(d))}
        for p in self.selected_pairs:
            k = index[p]
            m[d + 2 * k] = m[d + 2 * k + 1] = True
        return m


def select_measurements(diag, threshold: float | None = None) -> ThresholdReport:
    """Choose the off-diagonal pairs to measure from the diagonal outcomes.

    A pair ``(i, j)`` is measured when ``sqrt(diag_i diag_j) >= t``. By
    default ``t = GI(diag) / (N - 1)``; pass ``threshold`` to override.
    """
    diag = np.asarray(diag, dtype=float).ravel()
    n_qubits_of(diag.size)
    if np.any(diag < -1e-12):
        raise OutOfRange("diagonal outcomes must be nonnegative")
    diag = np.clip(diag, 0.0, None)
    total = diag.sum()
    if total <= 0:
        raise AllZero("all diagonal outcomes are zero")
    if abs(total - 1.0) > DIAG_SUM_TOL:
        raise OutOfRange(f"diagonal outcomes sum to {total}, expected 1")
    diag = diag / total
    gi = gini_index(diag)
    t = gi / (diag.size - 1) if threshold is None else float(threshold)
    i, j = pair_index(diag.size)
    keep = np.sqrt(diag[i] * diag[j]) >= t
    selected = list(zip(i[keep].tolist(), j[keep].tolist()))
    return ThresholdReport(diag=diag, gini=gi, threshold=t, selected_pairs=selected)


@dataclass(frozen=True)
class MeasurementRecord:
    n_qubits: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (4**self.n_qubits,):
            raise ShapeMismatch(f"record for {self.n_qubits} qubits needs {4**self.n_qubits} values, got {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return dim_of(self.n_qubits)

    @property
    def diag(self) -> np.ndarray:
        return self.values[: self.dim]

    @property
    def performed(self) -> np.ndarray:
        return self.values != SKIPPED

    @property
    def n_performed(self) -> int:
        return int(np.count_nonzero(self.performed))

    def validate(self) -> None:
        v = self.values
        ok = (v == SKIPPED) | ((v >= 0.0) & (v <= 1.0))
        if not np.all(ok):
            raise OutOfRange("record values must lie in [0, 1] or equal the sentinel 2")
        if np.any(self.diag == SKIPPED):
            raise OutOfRange("diagonal outcomes are always measured")
        off = v[self.dim :].reshape(-1, 2)
        if np.any((off[:, 0] == SKIPPED) != (off[:, 1] == SKIPPED)):
            raise OutOfRange("real/imaginary outcomes of a pair must be measured together")


def simulate_outcomes(
    rho: np.ndarray,
    report: ThresholdReport,
    shots: int | None = None,
    rng: np.random.Generator | None = None,
) -> MeasurementRecord:
    """Outcomes of the selected projective measurements on ``rho``.

    Exact expectation values by default; with ``shots`` each projector's
    frequency is sampled (the diagonal as one multinomial experiment).
    """
    rho = np.asarray(rho)
    d = rho.shape[-1]
    if report.dim != d:
        raise InconsistentReport(f"report for dim {report.dim} applied to dim {d}")
    diag = rho.diagonal().real
    i, j = pair_index(d)
    mean = 0.5 * (diag[i] + diag[j])
    r = mean + rho[i, j].real
    s = mean - rho[i, j].imag
    if shots is not None:
        if rng is None:
            raise ValueError("shot sampling needs an rng")
        p = np.clip(diag, 0.0, None)
        diag = rng.multinomial(shots, p / p.sum()) / shots
        r = rng.binomial(shots, np.clip(r, 0.0, 1.0)) / shots
        s = rng.binomial(shots, np.clip(s, 0.0, 1.0)) / shots
    mask = report.mask()
    values = np.empty(d * d)
    values[:d] = diag
    values[d::2] = r
    values[d + 1 :: 2] = s
    values = np.clip(values, 0.0, 1.0)
    values[~mask] = SKIPPED
    return MeasurementRecord(n_qubits_of(d), values)


def encode_values(values: np.ndarray) -> np.ndarray:
    """Flat records ``(..., 4**n)`` to grids ``(..., N, N, 2)``."""
    values = np.asarray(values, dtype=float)
    d = int(round(np.sqrt(values.shape[-1])))
    if d * d != values.shape[-1]:
        raise ShapeMismatch(f"record length {values.shape[-1]} is not 4**n")
    grid = np.zeros(values.shape[:-1] + (d, d, 2))
    k = np.arange(d)
    grid[..., k, k, 0] = values[..., :d]
    i, j = pair_index(d)
    off = values[..., d:].reshape(values.shape[:-1] + (-1, 2))
    grid[..., i, j, :] = off
    grid[..., j, i, :] = off
    return grid


def decode_values(grid: np.ndarray) -> np.ndarray:
    """Inverse of :func:`encode_values` (reads the diagonal and upper triangle)."""
    grid = np.asarray(grid, dtype=float)
    d = grid.shape[-2]
    if grid.shape[-3:] != (d, d, 2):
        raise ShapeMismatch(f"expected (..., N, N, 2) grid, got {grid.shape}")
    i, j = pair_index(d)
    k = np.arange(d)
    off = grid[..., i, j, :].reshape(grid.shape[:-3] + (-1,))
    return np.concatenate([grid[..., k, k, 0], off], axis=-1)


def encode_input(rec: MeasurementRecord) -> np.ndarray:
    """Equivariant-network input: ``(N, N, 2)`` grid with the pair outcomes placed symmetrically."""
    return encode_values(rec.values)


def decode_input(grid: np.ndarray) -> MeasurementRecord:
    values = decode_values(grid)
    return MeasurementRecord(n_qubits_of(grid.shape[-2]), values)


def noisy_pipeline(
    rng: np.random.Generator,
    rho_clean: np.ndarray,
    noise: NoiseSpec,
    threshold: float | None = None,
) -> tuple[MeasurementRecord, np.ndarray]:
    """Measure a noisy version of ``rho_clean``; returns ``(noisy record, clean target)``.

    The threshold and selection come from the noisy diagonal, so the number of
    performed measurements can differ from the noiseless case.
    """
    noisy = apply_noise(rng, rho_clean, noise)
    report = select_measurements(noisy.diagonal().real, threshold)
    return simulate_outcomes(noisy, report), rho_clean

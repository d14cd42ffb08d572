"""Turn network outputs into physical states and admissible purities.

Output layout (length ``4**n``): the ``2**n`` real diagonal entries, then
``Re rho_ij, Im rho_ij`` for each pair ``i < j`` in row-major order.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateTrace, ShapeMismatch
from .numerics import from_eig, hermitian_eig, hermitian_part
from .qstate import dim_of
from .tqst import pair_index

TRACE_FLOOR = 1e-9


def _dim_for(length: int) -> int:
    d = int(round(np.sqrt(length)))
    if d < 2 or d * d != length or d & (d - 1):
        raise ShapeMismatch(f"parameter vector of length {length} is not 4**n")
    return d


def matrix_to_params(rho: np.ndarray) -> np.ndarray:
    """Flatten a Hermitian matrix (stack) into the output layout."""
    rho = np.asarray(rho)
    d = rho.shape[-1]
    i, j = pair_index(d)
    k = np.arange(d)
    off = np.stack([rho[..., i, j].real, rho[..., i, j].imag], axis=-1)
    return np.concatenate([rho[..., k, k].real, off.reshape(rho.shape[:-2] + (-1,))], axis=-1)


def params_to_matrix(params: np.ndarray) -> np.ndarray:
    """Hermitian matrix from the output layout, without trace normalisation."""
    params = np.asarray(params, dtype=float)
    d = _dim_for(params.shape[-1])
    lead = params.shape[:-1]
    mu = np.zeros(lead + (d, d), dtype=complex)
    k = np.arange(d)
    mu[..., k, k] = params[..., :d]
    i, j = pair_index(d)
    off = params[..., d:].reshape(lead + (-1, 2))
    z = off[..., 0] + 1j * off[..., 1]
    mu[..., i, j] = z
    mu[..., j, i] = np.conj(z)
    return mu


def vector_to_hermitian(params: np.ndarray) -> np.ndarray:
    """Hermitian, trace-one ``mu`` from a raw output vector (or stack).

    Raises:
        DegenerateTrace: if the decoded trace is below 1e-9 in magnitude.
    """
    mu = params_to_matrix(params)
    tr = np.trace(mu, axis1=-2, axis2=-1).real
    if np.any(np.abs(tr) < TRACE_FLOOR):
        raise DegenerateTrace("decoded matrix has (near) zero trace")
    return mu / tr[..., None, None]


def redistribute_eigenvalues(w: np.ndarray) -> np.ndarray:
    """Zero negative eigenvalues, sharing their sum equally among the survivors, until none is negative.

    Works row-wise on ``(..., d)`` arrays; the sum of each row is preserved.
    """
    w = np.array(w, dtype=float)
    alive = np.ones(w.shape, dtype=bool)
    for _ in range(w.shape[-1]):
        neg = alive & (w < 0.0)
        if not neg.any():
            break
        deficit = np.sum(np.where(neg, w, 0.0), axis=-1, keepdims=True)
        w[neg] = 0.0
        alive &= ~neg
        count = np.maximum(alive.sum(axis=-1, keepdims=True), 1)
        w = np.where(alive, w + deficit / count, w)
    return w


def project_psd(mu: np.ndarray) -> np.ndarray:
    """Closest-in-eigenvalue physical state: eigenvectors kept, spectrum redistributed."""
    w, v = hermitian_eig(mu)
    return hermitian_part(from_eig(redistribute_eigenvalues(w), v))


def reconstruct_state(params: np.ndarray) -> np.ndarray:
    """Decode and project: network output vector(s) to density matrix(es)."""
    return project_psd(vector_to_hermitian(params))


def clamp_purity(raw, n_qubits: int):
    """Clip purity estimates to the admissible range ``[1/2**n, 1]``."""
    out = np.clip(raw, 1.0 / dim_of(n_qubits), 1.0)
    return float(out) if np.ndim(out) == 0 else out

"""Dense complex linear algebra and seedable randomness.

Every routine accepts a single matrix ``(N, N)`` or a stack ``(..., N, N)``;
stacks are processed in lock-step, which is what makes the pure-numpy Jacobi
solver fast enough for dataset-scale evaluation.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import NegativeEigenvalue, NonHermitian, NonSquare

HERMITIAN_TOL = 1e-8
CLAMP_TOL = 1e-10
_MAX_SWEEPS = 60


class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray
    """Real, ascending along the last axis."""
    eigenvectors: np.ndarray
    """Unitary; column ``k`` belongs to ``eigenvalues[..., k]``."""


def _check_square(m: np.ndarray) -> None:
    if m.ndim < 2 or m.shape[-1] != m.shape[-2] or m.shape[-1] < 1:
        raise NonSquare(f"expected square matrix (stack), got shape {m.shape}")


def hermitian_part(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + np.conj(np.swapaxes(m, -1, -2)))


def _jacobi(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic complex Jacobi on a stack ``(B, N, N)`` of Hermitian matrices.

    Each (p, q) rotation first removes the phase of ``a_pq`` and then applies
    the classical real rotation, so the combined unitary is
    ``J = [[c, s], [-s e^{-i phi}, c e^{-i phi}]]`` on the (p, q) plane.
    """
    b, n, _ = a.shape
    v = np.broadcast_to(np.eye(n, dtype=complex), (b, n, n)).copy()
    if n == 1:
        return a[:, :, 0].real.copy(), v
    iu = np.triu_indices(n, 1)
    scale = np.sqrt(np.sum(np.abs(a) ** 2, axis=(1, 2)))
    for _ in range(_MAX_SWEEPS):
        off = np.sqrt(2.0 * np.sum(np.abs(a[:, iu[0], iu[1]]) ** 2, axis=1))
        if np.all(off <= 1e-15 * scale):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[:, p, q]
                mag = np.abs(apq)
                active = mag > 1e-300
                if not np.any(active):
                    continue
                safe = np.where(active, mag, 1.0)
                phase = np.where(active, apq / safe, 1.0)
                theta = (a[:, q, q].real - a[:, p, p].real) / (2.0 * safe)
                t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.hypot(theta, 1.0))
                t = np.where(active, t, 0.0)
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                e = np.conj(phase)

                cp = a[:, :, p].copy()
                cq = a[:, :, q]
                a[:, :, p] = c[:, None] * cp - (s * e)[:, None] * cq
                a[:, :, q] = s[:, None] * cp + (c * e)[:, None] * cq
                rp = a[:, p, :].copy()
                rq = a[:, q, :]
                a[:, p, :] = c[:, None] * rp - (s * phase)[:, None] * rq
                a[:, q, :] = s[:, None] * rp + (c * phase)[:, None] * rq
                a[:, p, q] = 0.0
                a[:, q, p] = 0.0
                a[:, p, p] = a[:, p, p].real
                a[:, q, q] = a[:, q, q].real

                vp = v[:, :, p].copy()
                vq = v[:, :, q]
                v[:, :, p] = c[:, None] * vp - (s * e)[:, None] * vq
                v[:, :, q] = s[:, None] * vp + (c * e)[:, None] * vq
    return np.diagonal(a, axis1=1, axis2=2).real.copy(), v


def hermitian_eig(m: np.ndarray) -> EigenDecomposition:
    """Eigendecomposition of a Hermitian matrix or stack of them.

    Raises:
        NonSquare: if the trailing two axes are not square.
        NonHermitian: if any ``|m_ij - conj(m_ji)|`` exceeds 1e-8.
    """
    m = np.asarray(m)
    _check_square(m)
    dev = np.abs(m - np.conj(np.swapaxes(m, -1, -2)))
    if dev.size and dev.max() > HERMITIAN_TOL:
        raise NonHermitian(f"max |m_ij - conj(m_ji)| = {dev.max():.3e}")
    n = m.shape[-1]
    lead = m.shape[:-2]
    a = hermitian_part(m.astype(complex)).reshape(-1, n, n).copy()
    w, v = _jacobi(a)
    order = np.argsort(w, axis=1, kind="stable")
    w = np.take_along_axis(w, order, axis=1)
    v = np.take_along_axis(v, order[:, None, :], axis=2)
    return EigenDecomposition(w.reshape(*lead, n), v.reshape(*lead, n, n))


def from_eig(w: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rebuild ``V diag(w) V^dagger``."""
    return (v * w[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def matrix_sqrt_psd(m: np.ndarray) -> np.ndarray:
    """Principal square root of a positive semi-definite Hermitian matrix.

    Eigenvalues in ``[-1e-10, 0)`` are treated as round-off and clamped to 0.
    """
    w, v = hermitian_eig(m)
    if w.size and w.min() < -CLAMP_TOL:
        raise NegativeEigenvalue(f"eigenvalue {w.min():.3e} below -{CLAMP_TOL}")
    return from_eig(np.sqrt(np.clip(w, 0.0, None)), v)


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based (Philox) generator; identical seeds give identical streams."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent stream for a sub-task (e.g. one dataset sample)."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, *(int(k) for k in keys)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def rand_uniform(rng: np.random.Generator, shape) -> np.ndarray:
    """Uniform samples on the open interval (0, 1)."""
    k = rng.integers(0, 2**53, size=shape, dtype=np.int64)
    return (k.astype(np.float64) + 0.5) / 2.0**53


def rand_uniform_matrix(rng: np.random.Generator, dim: int) -> np.ndarray:
    if dim < 1:
        raise ValueError("dim must be >= 1")
    return rand_uniform(rng, (dim, dim))

"""Classical reconstruction from threshold-protocol records.

``direct_invert`` reads the state straight off the outcomes (unmeasured
coherences set to zero) and projects it onto the physical set.
``mle_refine`` then minimises the least-squares misfit
``sum_k (f_k - Tr[P_k rho])^2`` over the performed projectors ``P_k`` by
projected gradient descent with step halving.

Both functions accept one record or a stack ``(B, 4**n)`` of raw values.
"""

from __future__ import annotations

import numpy as np

from .errors import NonFinite
from .reconstruct import project_psd
from .tqst import SKIPPED, MeasurementRecord, pair_index


def _values(rec) -> np.ndarray:
    if isinstance(rec, MeasurementRecord):
        return rec.values
    return np.asarray(rec, dtype=float)


def _dim(values: np.ndarray) -> int:
    return int(round(np.sqrt(values.shape[-1])))


def expected_outcomes(rho: np.ndarray) -> np.ndarray:
    """All ``4**n`` projector expectation values of ``rho`` in the record layout (no masking)."""
    d = rho.shape[-1]
    i, j = pair_index(d)
    k = np.arange(d)
    diag = rho[..., k, k].real
    mean = 0.5 * (diag[..., i] + diag[..., j])
    r = mean + rho[..., i, j].real
    s = mean - rho[..., i, j].imag
    off = np.stack([r, s], axis=-1).reshape(rho.shape[:-2] + (-1,))
    return np.concatenate([diag, off], axis=-1)


def _incidence(d: int) -> np.ndarray:
    i, j = pair_index(d)
    m = np.zeros((len(i), d))
    m[np.arange(len(i)), i] = 1.0
    m[np.arange(len(i)), j] = 1.0
    return m


def _adjoint(v: np.ndarray, d: int) -> np.ndarray:
    """``sum_k v_k P_k`` for coefficient vectors ``v`` in the record layout."""
    i, j = pair_index(d)
    k = np.arange(d)
    lead = v.shape[:-1]
    out = np.zeros(lead + (d, d), dtype=complex)
    out[..., k, k] = v[..., :d]
    off = v[..., d:].reshape(lead + (-1, 2))
    vr, vs = off[..., 0], off[..., 1]
    half = 0.5 * (vr + vs)
    # each pair projector carries weight 1/2 on both of its diagonal entries
    out[..., k, k] += half @ _incidence(d)
    out[..., i, j] += 0.5 * vr - 0.5j * vs
    out[..., j, i] += 0.5 * vr + 0.5j * vs
    return out


def direct_invert(rec) -> np.ndarray:
    """Linear inversion of the measured outcomes followed by physical projection."""
    v = _values(rec)
    d = _dim(v)
    i, j = pair_index(d)
    k = np.arange(d)
    lead = v.shape[:-1]
    diag = v[..., :d]
    rho = np.zeros(lead + (d, d), dtype=complex)
    rho[..., k, k] = diag
    off = v[..., d:].reshape(lead + (-1, 2))
    measured = off[..., 0] != SKIPPED
    mean = 0.5 * (diag[..., i] + diag[..., j])
    z = np.where(measured, (off[..., 0] - mean) + 1j * (mean - off[..., 1]), 0.0)
    rho[..., i, j] = z
    rho[..., j, i] = np.conj(z)
    tr = diag.sum(axis=-1)
    rho = rho / np.where(tr > 0, tr, 1.0)[..., None, None]
    return project_psd(rho)


def misfit(rho: np.ndarray, values: np.ndarray) -> np.ndarray:
    mask = values != SKIPPED
    res = np.where(mask, values - expected_outcomes(rho), 0.0)
    return np.sum(res**2, axis=-1)


def mle_refine(
    rec,
    init: np.ndarray | None = None,
    iters: int = 500,
    step: float = 0.5,
    tol: float = 1e-14,
    return_history: bool = False,
):
    """Projected-gradient least-squares refinement of a physical starting state.

    Each trial step ``project_psd(rho - eta * G)`` is accepted only if it
    does not increase the misfit; otherwise ``eta`` is halved, so the
    objective sequence is monotone nonincreasing.

    Raises:
        NonFinite: if the objective stops being finite.
    """
    v = _values(rec)
    single = v.ndim == 1
    v = np.atleast_2d(v)
    d = _dim(v)
    rho = direct_invert(v) if init is None else np.array(np.broadcast_to(init, v.shape[:-1] + (d, d)), dtype=complex)
    mask = v != SKIPPED
    eta = np.full(len(v), float(step))
    obj = misfit(rho, v)
    history = [obj.copy()]
    eye = np.eye(d)
    for _ in range(iters):
        if not np.all(np.isfinite(obj)):
            raise NonFinite("least-squares objective is not finite")
        active = (obj > tol) & (eta > 1e-12)
        if not active.any():
            break
        res = np.where(mask, v - expected_outcomes(rho), 0.0)
        grad = -2.0 * _adjoint(res, d)
        grad -= (np.trace(grad, axis1=-2, axis2=-1) / d)[..., None, None] * eye
        trial = project_psd(rho - eta[:, None, None] * grad)
        new = misfit(trial, v)
        better = active & (new <= obj)
        rho = np.where(better[:, None, None], trial, rho)
        obj = np.where(better, new, obj)
        eta = np.where(active & ~better, eta * 0.5, eta)
        history.append(obj.copy())
    out = rho[0] if single else rho
    if return_history:
        hist = np.array(history)
        return out, (hist[:, 0] if single else hist)
    return out

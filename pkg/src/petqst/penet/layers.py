"""Layers with hand-written reverse-mode gradients.

Every layer caches what it needs during ``forward`` and consumes the cache in
``backward``, which returns the gradient with respect to the layer input and
accumulates parameter gradients into :attr:`Param.grad`.
"""

from __future__ import annotations

import numpy as np

from ..errors import GraphNotBuilt, ShapeMismatch
from ..tqst import encode_values, pair_index

PE_TERMS = 15


class Param:
    """A trainable array together with its gradient buffer."""

    def __init__(self, value: np.ndarray, name: str = ""):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    @property
    def size(self) -> int:
        return self.value.size

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def __repr__(self):
        return f"Param({self.name!r}, shape={self.value.shape})"


class Module:
    training = True

    def params(self) -> list[Param]:
        return []

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)

    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.params():
            p.zero_grad()

    def n_params(self) -> int:
        return sum(p.size for p in self.params())

    def _cached(self, name: str):
        value = getattr(self, name, None)
        if value is None:
            raise GraphNotBuilt(f"{type(self).__name__}.backward called before forward")
        return value


class Linear(Module):
    """Dense layer ``y = x W^T + b`` with ``W`` of shape ``(out, in)``."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator):
        bound = 1.0 / np.sqrt(in_features)
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Param(rng.uniform(-bound, bound, (out_features, in_features)), "weight")
        self.bias = Param(rng.uniform(-bound, bound, out_features), "bias")
        self._x = None

    def params(self):
        return [self.weight, self.bias]

    def forward(self, x):
        if x.shape[-1] != self.in_features:
            raise ShapeMismatch(f"Linear expects {self.in_features} features, got {x.shape[-1]}")
        self._x = x
        return x @ self.weight.value.T + self.bias.value

    def backward(self, grad):
        x = self._cached("_x")
        self.weight.grad += grad.T @ x
        self.bias.grad += grad.sum(axis=0)
        self._x = None
        return grad @ self.weight.value


class PELinear(Module):
    """Permutation-equivariant linear map on ``(B, N, N, c)`` tensors.

    Output element ``(i, j)`` combines, through fifteen ``c x d`` matrices,
    the element itself, its transpose partner, the row/column sums of rows
    and columns ``i`` and ``j``, the total sum, the trace, the two diagonal
    entries ``x_ii`` and ``x_jj``, plus five diagonal-only terms. Two bias
    vectors are added: one everywhere and one on the diagonal only.

    Weight index ``k`` of :attr:`weight` follows the classical ordering
    ``w0 x_ij, w1 x_ji, w2 rowsum_i, w3 colsum_i, w4 colsum_j, w5 rowsum_j,
    w6 total, w7 trace, w8 x_ii, w9 x_jj`` and, on the diagonal,
    ``w10 x_ii, w11 trace, w12 total, w13 rowsum_i, w14 colsum_i``.
    """

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator):
        bound = 1.0 / np.sqrt(PE_TERMS * in_channels)
        c, d = in_channels, out_channels
        self.in_channels = c
        self.out_channels = d
        self.weight = Param(rng.uniform(-bound, bound, (PE_TERMS, c, d)), "weight")
        self.bias_all = Param(rng.uniform(-bound, bound, d), "bias_all")
        self.bias_diag = Param(rng.uniform(-bound, bound, d), "bias_diag")
        self._cache = None

    def params(self):
        return [self.weight, self.bias_all, self.bias_diag]

    def forward(self, x):
        if x.ndim != 4 or x.shape[1] != x.shape[2] or x.shape[3] != self.in_channels:
            raise ShapeMismatch(f"PELinear expects (B, N, N, {self.in_channels}), got {x.shape}")
        w = self.weight.value
        n = x.shape[1]
        k = np.arange(n)
        xt = x.transpose(0, 2, 1, 3)
        row = x.sum(axis=2)
        col = x.sum(axis=1)
        diag = x[:, k, k, :]
        total = row.sum(axis=1)
        trace = diag.sum(axis=1)

        out = x @ w[0] + xt @ w[1]
        out += (row @ w[2] + col @ w[3] + diag @ w[8])[:, :, None, :]
        out += (col @ w[4] + row @ w[5] + diag @ w[9])[:, None, :, :]
        out += (total @ w[6] + trace @ w[7] + self.bias_all.value)[:, None, None, :]
        on_diag = (
            diag @ w[10]
            + (trace @ w[11] + total @ w[12])[:, None, :]
            + row @ w[13]
            + col @ w[14]
            + self.bias_diag.value
        )
        out[:, k, k, :] += on_diag
        self._cache = (x, xt, row, col, diag, total, trace)
        return out

    def backward(self, grad):
        x, xt, row, col, diag, total, trace = self._cached("_cache")
        self._cache = None
        w = self.weight.value
        gw = self.weight.grad
        k = np.arange(x.shape[1])

        g_i = grad.sum(axis=2)
        g_j = grad.sum(axis=1)
        g_all = g_i.sum(axis=1)
        g_d = grad[:, k, k, :]
        g_dsum = g_d.sum(axis=1)

        def outer(a, b):
            return a.reshape(-1, a.shape[-1]).T @ b.reshape(-1, b.shape[-1])

        gw[0] += outer(x, grad)
        gw[1] += outer(xt, grad)
        gw[2] += outer(row, g_i)
        gw[3] += outer(col, g_i)
        gw[8] += outer(diag, g_i)
        gw[4] += outer(col, g_j)
        gw[5] += outer(row, g_j)
        gw[9] += outer(diag, g_j)
        gw[6] += total.T @ g_all
        gw[7] += trace.T @ g_all
        gw[10] += outer(diag, g_d)
        gw[11] += trace.T @ g_dsum
        gw[12] += total.T @ g_dsum
        gw[13] += outer(row, g_d)
        gw[14] += outer(col, g_d)
        self.bias_all.grad += g_all.sum(axis=0)
        self.bias_diag.grad += g_dsum.sum(axis=0)

        g_row = g_i @ w[2].T + g_j @ w[5].T + g_d @ w[13].T
        g_col = g_i @ w[3].T + g_j @ w[4].T + g_d @ w[14].T
        g_diag = g_i @ w[8].T + g_j @ w[9].T + g_d @ w[10].T
        g_total = g_all @ w[6].T + g_dsum @ w[12].T
        g_trace = g_all @ w[7].T + g_dsum @ w[11].T
        g_row += g_total[:, None, :]
        g_diag += g_trace[:, None, :]

        dx = grad @ w[0].T + (grad @ w[1].T).transpose(0, 2, 1, 3)
        dx += g_row[:, :, None, :]
        dx += g_col[:, None, :, :]
        dx[:, k, k, :] += g_diag
        return dx


class ReLU(Module):
    def __init__(self):
        self._mask = None

    def forward(self, x):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, grad):
        mask = self._cached("_mask")
        self._mask = None
        return grad * mask


class Dropout(Module):
    """Inverted dropout; identity in eval mode."""

    def __init__(self, p: float, rng: np.random.Generator):
        if not 0.0 <= p < 1.0:
            raise ValueError("dropout probability must lie in [0, 1)")
        self.p = p
        self.rng = rng
        self._scale = None

    def forward(self, x):
        if not self.training or self.p == 0.0:
            self._scale = np.ones_like(x)
            return x
        keep = self.rng.random(x.shape) >= self.p
        self._scale = keep / (1.0 - self.p)
        return x * self._scale

    def backward(self, grad):
        scale = self._cached("_scale")
        self._scale = None
        return grad * scale


class GridEncode(Module):
    """Flat ``4**n`` records to ``(N, N, 2)`` grids; the graph starts here, so no input gradient."""

    def forward(self, x):
        return encode_values(x)

    def backward(self, grad):
        return None


class GridReadout(Module):
    """``(B, N, N, 2)`` grids to the ``4**n`` output layout.

    Takes channel 0 of the diagonal and both channels of the upper triangle,
    row-major, matching :func:`petqst.reconstruct.params_to_matrix`.
    """

    def __init__(self):
        self._shape = None

    def forward(self, x):
        if x.ndim != 4 or x.shape[-1] != 2:
            raise ShapeMismatch(f"GridReadout expects (B, N, N, 2), got {x.shape}")
        n = x.shape[1]
        i, j = pair_index(n)
        k = np.arange(n)
        self._shape = x.shape
        off = x[:, i, j, :].reshape(x.shape[0], -1)
        return np.concatenate([x[:, k, k, 0], off], axis=1)

    def backward(self, grad):
        shape = self._cached("_shape")
        self._shape = None
        n = shape[1]
        i, j = pair_index(n)
        k = np.arange(n)
        dx = np.zeros(shape)
        dx[:, k, k, 0] = grad[:, :n]
        dx[:, i, j, :] = grad[:, n:].reshape(shape[0], -1, 2)
        return dx


class Sequential(Module):
    def __init__(self, *layers: Module):
        self.layers = list(layers)

    def params(self):
        return [p for layer in self.layers for p in layer.params()]

    def train(self, mode: bool = True):
        self.training = mode
        for layer in self.layers:
            layer.train(mode)
        return self

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, grad):
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
            if grad is None:
                break
        return grad


class MSELoss:
    """Mean squared error over every element, as used for both regression tasks."""

    def __init__(self):
        self._diff = None

    def __call__(self, pred: np.ndarray, target: np.ndarray) -> float:
        return self.forward(pred, target)

    def forward(self, pred, target):
        if pred.shape != target.shape:
            raise ShapeMismatch(f"prediction {pred.shape} vs target {target.shape}")
        self._diff = pred - target
        return float(np.mean(self._diff**2))

    def backward(self) -> np.ndarray:
        if self._diff is None:
            raise GraphNotBuilt("MSELoss.backward called before forward")
        diff, self._diff = self._diff, None
        return 2.0 * diff / diff.size

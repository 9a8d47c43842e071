"""Feed-forward ReLU classifier with hand-written backward passes.

This small MLP replaces a residual convolutional network. The losses only
see the logit matrix, so the comparison between them does not depend on the
architecture.
"""

from __future__ import annotations

import numpy as np

from .numeric import Rng, as_matrix


class AffineLayer:
    def __init__(self, weights: np.ndarray, bias: np.ndarray):
        if weights.ndim != 2 or bias.shape != (weights.shape[1],):
            raise ValueError(
                f"bias shape {bias.shape} does not match weights {weights.shape}"
            )
        self.weights = weights
        self.bias = bias
        self._input: np.ndarray | None = None

    @property
    def in_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[1]

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._input = x
        return x @ self.weights + self.bias

    def backward(self, grad_out: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (grad_input, grad_weights, grad_bias), summed over the batch."""
        x = self._input
        self._input = None
        return grad_out @ self.weights.T, x.T @ grad_out, grad_out.sum(axis=0)


class ReLU:
    def __init__(self):
        self._mask: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0
        return np.where(self._mask, x, 0)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        mask = self._mask
        self._mask = None
        return grad_out * mask


class MlpModel:
    """Affine layers separated by ReLUs; the last affine layer emits logits.

    ``forward`` caches what ``backward`` needs. Each forward must be followed
    by exactly one backward before the next backward is allowed.
    """

    def __init__(self, affines: list[AffineLayer]):
        if not affines:
            raise ValueError("model needs at least one affine layer")
        for prev, nxt in zip(affines, affines[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ValueError(
                    f"layer dimensions do not chain: {prev.out_dim} -> {nxt.in_dim}"
                )
        self.affines = affines
        self.layers: list[AffineLayer | ReLU] = []
        for i, layer in enumerate(affines):
            if i:
                self.layers.append(ReLU())
            self.layers.append(layer)
        self._batch_size: int | None = None

    @property
    def dims(self) -> list[int]:
        return [self.affines[0].in_dim] + [a.out_dim for a in self.affines]

    @property
    def num_classes(self) -> int:
        return self.affines[-1].out_dim

    def parameters(self) -> list[np.ndarray]:
        """Parameter arrays in the order [W0, b0, W1, b1, ...]; updated in place."""
        params = []
        for a in self.affines:
            params += [a.weights, a.bias]
        return params

    def forward(self, batch) -> np.ndarray:
        x = as_matrix(batch, "batch")
        if x.shape[1] != self.affines[0].in_dim:
            raise ValueError(
                f"batch has {x.shape[1]} features, model expects {self.affines[0].in_dim}"
            )
        for layer in self.layers:
            x = layer.forward(x)
        self._batch_size = x.shape[0]
        return x

    def predict(self, batch) -> np.ndarray:
        """Logits without leaving a pending backward."""
        out = self.forward(batch)
        self._batch_size = None
        return out

    def backward(self, grad_logits) -> list[np.ndarray]:
        """Mean-reduced parameter gradients, aligned with ``parameters()``.

        ``grad_logits`` holds per-sample gradients (batch x C); the result is
        their batch mean propagated to every weight and bias.
        """
        if self._batch_size is None:
            raise RuntimeError("backward called without a preceding forward")
        g = np.asarray(grad_logits)
        if g.shape != (self._batch_size, self.num_classes):
            raise ValueError(
                f"grad_logits shape {g.shape} does not match logits "
                f"({self._batch_size}, {self.num_classes})"
            )
        g = g / self._batch_size
        self._batch_size = None
        grads: list[np.ndarray] = []
        for layer in reversed(self.layers):
            if isinstance(layer, ReLU):
                g = layer.backward(g)
            else:
                g, dw, db = layer.backward(g)
                grads = [dw, db] + grads
        return grads

    def copy(self, dtype=None) -> MlpModel:
        return MlpModel([
            AffineLayer(a.weights.astype(dtype or a.weights.dtype, copy=True),
                        a.bias.astype(dtype or a.bias.dtype, copy=True))
            for a in self.affines
        ])


def init_model(layer_dims: list[int], rng: Rng) -> MlpModel:
    """He-initialised MLP: weights ~ N(0, sqrt(2 / in_dim)), biases zero."""
    dims = list(layer_dims)
    if len(dims) < 2:
        raise ValueError(f"need at least 2 layer dimensions, got {dims}")
    if any(int(d) != d or d < 1 for d in dims):
        raise ValueError(f"layer dimensions must be positive integers, got {dims}")
    affines = []
    for fan_in, fan_out in zip(dims, dims[1:]):
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
        affines.append(AffineLayer(w, np.zeros(fan_out)))
    return MlpModel(affines)

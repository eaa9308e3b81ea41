"""Q-value network: numpy forward/backward pass and Adam updates.

Architecture: three 4x4 same-padded convolutions over the (feature, time)
plane with workers as input channels, each followed by a rectifier and 2x2
max-pooling, then two affine layers squeezing through `hidden` units down to
one Q-value per action.  Gradients are computed analytically in double
precision; tests cross-check them against central finite differences.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

KERNEL = 4
_PAD_LO = (KERNEL - 1) // 2      # 1
_PAD_HI = KERNEL - 1 - _PAD_LO   # 2


def _conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Same-padded 4x4 convolution. x: (B,C,H,W); w: (O,C,4,4); out: (B,O,H,W)."""
    xp = np.pad(x, ((0, 0), (0, 0), (_PAD_LO, _PAD_HI), (_PAD_LO, _PAD_HI)))
    win = sliding_window_view(xp, (KERNEL, KERNEL), axis=(2, 3))  # (B,C,H,W,4,4)
    out = np.tensordot(win, w, axes=([1, 4, 5], [1, 2, 3]))       # (B,H,W,O)
    out = np.ascontiguousarray(out.transpose(0, 3, 1, 2)) + b[None, :, None, None]
    return out, (x.shape, win)


def _conv_backward(dout: np.ndarray, w: np.ndarray, cache):
    x_shape, win = cache
    B, C, H, W = x_shape
    dw = np.tensordot(dout, win, axes=([0, 2, 3], [0, 2, 3]))  # (O,C,4,4)
    db = dout.sum(axis=(0, 2, 3))
    dxp = np.zeros((B, C, H + KERNEL - 1, W + KERNEL - 1), dtype=dout.dtype)
    for u in range(KERNEL):
        for v in range(KERNEL):
            contrib = np.tensordot(dout, w[:, :, u, v], axes=([1], [0]))  # (B,H,W,C)
            dxp[:, :, u:u + H, v:v + W] += contrib.transpose(0, 3, 1, 2)
    dx = dxp[:, :, _PAD_LO:_PAD_LO + H, _PAD_LO:_PAD_LO + W]
    return dx, dw, db


def _pool_forward(x: np.ndarray):
    """2x2 max-pool with stride 2; dimensions below 2 are left unpooled."""
    B, C, H, W = x.shape
    ph = 2 if H >= 2 else 1
    pw = 2 if W >= 2 else 1
    Ho, Wo = H // ph, W // pw
    xc = x[:, :, : Ho * ph, : Wo * pw]
    xw = xc.reshape(B, C, Ho, ph, Wo, pw).transpose(0, 1, 2, 4, 3, 5).reshape(B, C, Ho, Wo, ph * pw)
    idx = np.argmax(xw, axis=-1)
    out = np.take_along_axis(xw, idx[..., None], axis=-1)[..., 0]
    return out, (x.shape, (ph, pw), idx)


def _pool_backward(dout: np.ndarray, cache):
    x_shape, (ph, pw), idx = cache
    B, C, H, W = x_shape
    Ho, Wo = H // ph, W // pw
    dxw = np.zeros((B, C, Ho, Wo, ph * pw), dtype=dout.dtype)
    np.put_along_axis(dxw, idx[..., None], dout[..., None], axis=-1)
    dxc = dxw.reshape(B, C, Ho, Wo, ph, pw).transpose(0, 1, 2, 4, 3, 5).reshape(B, C, Ho * ph, Wo * pw)
    dx = np.zeros(x_shape, dtype=dout.dtype)
    dx[:, :, : Ho * ph, : Wo * pw] = dxc
    return dx


class QNetwork:
    """Maps a (features x workers x time) state tensor to one Q-value per action."""

    def __init__(self, input_shape: tuple[int, int, int], n_actions: int = 7,
                 conv_channels: tuple[int, ...] = (8, 16, 32), hidden: int = 256,
                 seed: int = 0, dtype=np.float64):
        # input_shape is the state layout (features, workers, time); workers
        # become convolution channels, the (feature, time) plane is spatial.
        self.input_shape = tuple(input_shape)
        self.n_actions = n_actions
        self.conv_channels = tuple(conv_channels)
        self.hidden = hidden
        self.dtype = dtype
        rng = np.random.default_rng(seed)

        n_feat, n_workers, n_time = self.input_shape
        self.params: dict[str, np.ndarray] = {}
        c_in, h, w = n_workers, n_feat, n_time
        for i, c_out in enumerate(self.conv_channels):
            fan_in = c_in * KERNEL * KERNEL
            self.params[f"conv{i}_w"] = rng.normal(
                0.0, np.sqrt(2.0 / fan_in), (c_out, c_in, KERNEL, KERNEL)
            ).astype(dtype)
            self.params[f"conv{i}_b"] = np.zeros(c_out, dtype=dtype)
            c_in = c_out
            h = h // 2 if h >= 2 else h
            w = w // 2 if w >= 2 else w
        flat = c_in * h * w
        self.flat_size = flat
        self.params["fc0_w"] = rng.normal(0.0, np.sqrt(2.0 / flat), (flat, hidden)).astype(dtype)
        self.params["fc0_b"] = np.zeros(hidden, dtype=dtype)
        self.params["fc1_w"] = rng.normal(0.0, np.sqrt(1.0 / hidden), (hidden, n_actions)).astype(dtype)
        self.params["fc1_b"] = np.zeros(n_actions, dtype=dtype)

    # -- inference -----------------------------------------------------------

    def _to_net(self, states: np.ndarray) -> np.ndarray:
        # (B, features, workers, time) -> (B, workers, features, time)
        return np.ascontiguousarray(states.transpose(0, 2, 1, 3)).astype(self.dtype, copy=False)

    def forward(self, states: np.ndarray, keep_cache: bool = False):
        x = self._to_net(states)
        caches = []
        for i in range(len(self.conv_channels)):
            x, conv_cache = _conv_forward(x, self.params[f"conv{i}_w"], self.params[f"conv{i}_b"])
            relu_mask = x > 0
            x = x * relu_mask
            x, pool_cache = _pool_forward(x)
            caches.append((conv_cache, relu_mask, pool_cache))
        B = x.shape[0]
        flat = x.reshape(B, -1)
        h_lin = flat @ self.params["fc0_w"] + self.params["fc0_b"]
        h_mask = h_lin > 0
        h = h_lin * h_mask
        q = h @ self.params["fc1_w"] + self.params["fc1_b"]
        if keep_cache:
            return q, (caches, x.shape, flat, h_mask, h)
        return q

    def q_values(self, state: np.ndarray) -> np.ndarray:
        """Q-vector for a single (features, workers, time) state."""
        return self.forward(state[None])[0]

    # -- training ------------------------------------------------------------

    def loss_and_gradient(self, states: np.ndarray, actions: np.ndarray,
                          targets: np.ndarray):
        """Summed squared Bellman error over the batch, and its parameter gradient.

        Targets are treated as constants; no gradient flows through them.
        """
        q, (caches, conv_out_shape, flat, h_mask, h) = self.forward(states, keep_cache=True)
        B = q.shape[0]
        idx = np.arange(B)
        diff = q[idx, actions] - targets
        loss = float(np.sum(diff * diff))

        grads: dict[str, np.ndarray] = {}
        dq = np.zeros_like(q)
        dq[idx, actions] = 2.0 * diff
        grads["fc1_w"] = h.T @ dq
        grads["fc1_b"] = dq.sum(axis=0)
        dh = (dq @ self.params["fc1_w"].T) * h_mask
        grads["fc0_w"] = flat.T @ dh
        grads["fc0_b"] = dh.sum(axis=0)
        dflat = dh @ self.params["fc0_w"].T
        dx = dflat.reshape(conv_out_shape)
        for i in reversed(range(len(self.conv_channels))):
            conv_cache, relu_mask, pool_cache = caches[i]
            dx = _pool_backward(dx, pool_cache)
            dx = dx * relu_mask
            dx, dw, db = _conv_backward(dx, self.params[f"conv{i}_w"], conv_cache)
            grads[f"conv{i}_w"] = dw
            grads[f"conv{i}_b"] = db
        return loss, grads

    def clone(self) -> "QNetwork":
        other = QNetwork.__new__(QNetwork)
        other.input_shape = self.input_shape
        other.n_actions = self.n_actions
        other.conv_channels = self.conv_channels
        other.hidden = self.hidden
        other.dtype = self.dtype
        other.flat_size = self.flat_size
        other.params = {k: v.copy() for k, v in self.params.items()}
        return other


class AdamState:
    """First/second moment accumulators, one pair per parameter array."""

    def __init__(self, params: dict[str, np.ndarray]):
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              alpha: float, state: AdamState,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """In-place adaptive moment update with bias correction; returns params."""
    state.t += 1
    t = state.t
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for k, g in grads.items():
        m = state.m[k]
        v = state.v[k]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        params[k] -= alpha * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return params


def flatten_params(params: dict[str, np.ndarray]) -> np.ndarray:
    return np.concatenate([params[k].ravel() for k in sorted(params)])


def load_flat_params(params: dict[str, np.ndarray], flat: np.ndarray) -> None:
    off = 0
    for k in sorted(params):
        n = params[k].size
        params[k][...] = flat[off:off + n].reshape(params[k].shape)
        off += n
    if off != flat.size:
        raise ValueError(f"parameter size mismatch: expected {off}, got {flat.size}")

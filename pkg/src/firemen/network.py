"""A small convolutional Q-network, written directly in numpy.

Topology is fixed: two 3x3 valid convolutions (stride 1) with ReLU, one
ReLU fully-connected layer, and a linear head over the discrete actions.
Parameters live in ONE flat float vector; per-layer arrays are reshaped
views into it, so the optimizer, checkpointing and gradient checking all
operate on a single contiguous buffer.

The double-estimator update rule is implemented here as well: targets pick
the argmax under the online parameters and evaluate it under the target
parameters, the loss is the weighted mean of squared Bellman residuals,
and each sample carries a weight in [0, 1] supplied by the caller (the
hysteretic/lenient/interval learners use it to damp or drop negative
updates).

Everything is deterministic given a seed, and ``gradient_check`` verifies
the analytic gradients against central finite differences.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .replay import Transition

__all__ = [
    "NetworkSpec",
    "ParameterSet",
    "Adam",
    "init_parameters",
    "forward",
    "ddqn_targets",
    "td_errors",
    "optimize_batch",
    "sync_target",
    "gradient_check",
    "save_checkpoint",
    "load_checkpoint",
]


@dataclass(frozen=True)
class NetworkSpec:
    """Shape of the Q-network. The defaults (32 and 64 kernels, 1024-wide
    fully connected layer, 5 actions) are the full-scale configuration;
    desk-scale presets shrink them."""

    in_channels: int
    in_height: int
    in_width: int
    conv_kernels: tuple[int, int] = (32, 64)
    fc_width: int = 1024
    n_actions: int = 5
    kernel_size: int = 3

    def __post_init__(self) -> None:
        if len(self.conv_kernels) != 2:
            raise ValueError("exactly two conv layers are supported")
        if min(self.conv_kernels) <= 0 or self.fc_width <= 0:
            raise ValueError("layer widths must be positive")
        if self.n_actions < 2:
            raise ValueError("need at least two actions")
        if self.kernel_size != 3:
            raise ValueError("kernel size is fixed at 3")
        shrink = 2 * (self.kernel_size - 1)
        if self.in_height <= shrink or self.in_width <= shrink:
            raise ValueError(
                f"input {self.in_height}x{self.in_width} too small for two "
                f"valid {self.kernel_size}x{self.kernel_size} convolutions"
            )

    # spatial sizes after each valid conv
    @property
    def conv1_hw(self) -> tuple[int, int]:
        k = self.kernel_size
        return self.in_height - k + 1, self.in_width - k + 1

    @property
    def conv2_hw(self) -> tuple[int, int]:
        k = self.kernel_size
        h, w = self.conv1_hw
        return h - k + 1, w - k + 1

    @property
    def flat_dim(self) -> int:
        h, w = self.conv2_hw
        return self.conv_kernels[1] * h * w

    def layer_shapes(self) -> dict[str, tuple[int, ...]]:
        c = self.in_channels
        k1, k2 = self.conv_kernels
        ks = self.kernel_size
        return {
            "conv1/W": (k1, c, ks, ks),
            "conv1/b": (k1,),
            "conv2/W": (k2, k1, ks, ks),
            "conv2/b": (k2,),
            "fc/W": (self.flat_dim, self.fc_width),
            "fc/b": (self.fc_width,),
            "head/W": (self.fc_width, self.n_actions),
            "head/b": (self.n_actions,),
        }

    @property
    def n_parameters(self) -> int:
        return sum(
            int(np.prod(shape)) for shape in self.layer_shapes().values()
        )


class ParameterSet:
    """Flat parameter vector plus named per-layer views into it."""

    def __init__(self, spec: NetworkSpec, dtype=np.float32):
        self.spec = spec
        self.dtype = np.dtype(dtype)
        self.flat = np.zeros(spec.n_parameters, dtype=self.dtype)
        self.views: dict[str, np.ndarray] = {}
        offset = 0
        for name, shape in spec.layer_shapes().items():
            size = int(np.prod(shape))
            self.views[name] = self.flat[offset : offset + size].reshape(shape)
            offset += size

    def copy(self) -> "ParameterSet":
        other = ParameterSet(self.spec, self.dtype)
        other.flat[:] = self.flat
        return other

    def zeros_like_flat(self) -> np.ndarray:
        return np.zeros_like(self.flat)


def init_parameters(
    spec: NetworkSpec, rng: np.random.Generator, dtype=np.float32
) -> ParameterSet:
    """He-style uniform fan-in init for weights, zeros for biases."""
    params = ParameterSet(spec, dtype)
    fan_in = {
        "conv1/W": spec.in_channels * spec.kernel_size**2,
        "conv2/W": spec.conv_kernels[0] * spec.kernel_size**2,
        "fc/W": spec.flat_dim,
        "head/W": spec.fc_width,
    }
    for name, view in params.views.items():
        if name.endswith("/W"):
            limit = np.sqrt(6.0 / fan_in[name])
            view[...] = rng.uniform(-limit, limit, size=view.shape).astype(
                params.dtype
            )
    return params


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    """(B, C, H, W) -> (B, P, C*k*k) patches for valid correlation."""
    windows = sliding_window_view(x, (k, k), axis=(2, 3))
    b, c, ho, wo, _, _ = windows.shape
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(b, ho * wo, c * k * k)
    return np.ascontiguousarray(cols)


def _conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Valid 3x3 correlation via one matmul. Returns (out, cols)."""
    kout, cin, k, _ = w.shape
    cols = _im2col(x, k)
    out = cols @ w.reshape(kout, cin * k * k).T + b
    batch, p, _ = cols.shape
    ho = x.shape[2] - k + 1
    wo = x.shape[3] - k + 1
    return out.transpose(0, 2, 1).reshape(batch, kout, ho, wo), cols


def _conv_input_grad(dy: np.ndarray, w: np.ndarray, hw: tuple[int, int]):
    """Gradient wrt the conv input: full correlation with flipped kernels."""
    kout, cin, k, _ = w.shape
    pad = k - 1
    dy_p = np.pad(dy, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = _im2col(dy_p, k)  # (B, H*W, kout*k*k)
    w_flip = w[:, :, ::-1, ::-1].transpose(1, 0, 2, 3).reshape(cin, kout * k * k)
    dx = cols @ w_flip.T  # (B, H*W, cin)
    b = dy.shape[0]
    return dx.transpose(0, 2, 1).reshape(b, cin, hw[0], hw[1])


def forward(
    params: ParameterSet, obs: np.ndarray, cache: bool = False
):
    """Q-values for a batch of observations.

    ``obs`` is (B, C, H, W) in any integer or float dtype; it is cast to the
    parameter dtype. Returns (B, n_actions), or (q, cache_dict) when
    ``cache`` is true.
    """
    v = params.views
    x = np.ascontiguousarray(obs, dtype=params.dtype)
    if x.ndim != 4:
        raise ValueError(f"expected (B, C, H, W) observations, got {x.shape}")
    z1, cols1 = _conv_forward(x, v["conv1/W"], v["conv1/b"])
    a1 = np.maximum(z1, 0)
    z2, cols2 = _conv_forward(a1, v["conv2/W"], v["conv2/b"])
    a2 = np.maximum(z2, 0)
    flat2 = a2.reshape(a2.shape[0], -1)
    zf = flat2 @ v["fc/W"] + v["fc/b"]
    af = np.maximum(zf, 0)
    q = af @ v["head/W"] + v["head/b"]
    if not cache:
        return q
    return q, {
        "cols1": cols1,
        "z1": z1,
        "cols2": cols2,
        "z2": z2,
        "flat2": flat2,
        "zf": zf,
        "af": af,
    }


def _backward(
    params: ParameterSet, cache: dict, dq: np.ndarray
) -> np.ndarray:
    """Gradient of a scalar loss wrt the flat vector, given dL/dq."""
    spec = params.spec
    v = params.views
    grad = ParameterSet(spec, params.dtype)
    g = grad.views

    af, zf, flat2 = cache["af"], cache["zf"], cache["flat2"]
    g["head/W"][...] = af.T @ dq
    g["head/b"][...] = dq.sum(axis=0)
    daf = dq @ v["head/W"].T
    dzf = daf * (zf > 0)
    g["fc/W"][...] = flat2.T @ dzf
    g["fc/b"][...] = dzf.sum(axis=0)
    dflat2 = dzf @ v["fc/W"].T

    k2h, k2w = spec.conv2_hw
    k1h, k1w = spec.conv1_hw
    kern1, kern2 = spec.conv_kernels
    ks = spec.kernel_size

    da2 = dflat2.reshape(-1, kern2, k2h, k2w)
    dz2 = da2 * (cache["z2"] > 0)
    dz2_mat = dz2.transpose(0, 2, 3, 1).reshape(-1, kern2)
    cols2 = cache["cols2"].reshape(-1, kern1 * ks * ks)
    g["conv2/W"][...] = (cols2.T @ dz2_mat).T.reshape(kern2, kern1, ks, ks)
    g["conv2/b"][...] = dz2.sum(axis=(0, 2, 3))

    da1 = _conv_input_grad(dz2, v["conv2/W"], (k1h, k1w))
    dz1 = da1 * (cache["z1"] > 0)
    dz1_mat = dz1.transpose(0, 2, 3, 1).reshape(-1, kern1)
    cols1 = cache["cols1"].reshape(-1, spec.in_channels * ks * ks)
    g["conv1/W"][...] = (cols1.T @ dz1_mat).T.reshape(
        kern1, spec.in_channels, ks, ks
    )
    g["conv1/b"][...] = dz1.sum(axis=(0, 2, 3))
    return grad.flat


class Adam:
    """Standard Adam on the flat parameter vector."""

    def __init__(
        self,
        n_parameters: int,
        alpha: float = 0.0001,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        dtype=np.float32,
    ):
        self.alpha = alpha
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = np.zeros(n_parameters, dtype=dtype)
        self.v = np.zeros(n_parameters, dtype=dtype)

    def step(self, params: ParameterSet, grad: np.ndarray) -> None:
        self.t += 1
        g = np.asarray(grad, dtype=self.m.dtype)
        # in-place first-/second-moment updates; this is the training hot path
        self.m *= self.beta1
        self.m += (1 - self.beta1) * g
        self.v *= self.beta2
        self.v += (1 - self.beta2) * (g * g)
        scale = self.alpha / (1 - self.beta1**self.t)
        denom = np.sqrt(self.v / (1 - self.beta2**self.t))
        denom += self.eps
        update = self.m * scale
        update /= denom
        params.flat -= update.astype(params.dtype, copy=False)


def _stack_batch(transitions: Sequence[Transition], dtype):
    o_prev = np.stack([t.o_prev for t in transitions]).astype(dtype)
    o_next = np.stack([t.o_next for t in transitions]).astype(dtype)
    actions = np.array([t.action for t in transitions], dtype=np.int64)
    rewards = np.array([t.reward for t in transitions], dtype=dtype)
    terminal = np.array([t.terminal for t in transitions], dtype=bool)
    return o_prev, actions, rewards, o_next, terminal


def ddqn_targets(
    online: ParameterSet,
    target: ParameterSet,
    rewards: np.ndarray,
    o_next: np.ndarray,
    terminal: np.ndarray,
    gamma: float,
) -> np.ndarray:
    """Double-estimator bootstrap targets.

    The greedy action is chosen by the online network (lowest index wins
    ties, per argmax), its value is read from the target network. Terminal
    transitions do not bootstrap.
    """
    q_online_next = forward(online, o_next)
    greedy = np.argmax(q_online_next, axis=1)
    q_target_next = forward(target, o_next)
    boot = q_target_next[np.arange(len(greedy)), greedy]
    boot = boot * (~terminal)  # terminal transitions do not bootstrap
    return rewards + gamma * boot


def td_errors(
    online: ParameterSet,
    target: ParameterSet,
    transitions: Sequence[Transition],
    gamma: float,
) -> np.ndarray:
    """delta_i = Y_i - Q_online(o_i, a_i) for a batch, without updating."""
    o_prev, actions, rewards, o_next, terminal = _stack_batch(
        transitions, online.dtype
    )
    y = ddqn_targets(online, target, rewards, o_next, terminal, gamma)
    q = forward(online, o_prev)
    return y - q[np.arange(len(actions)), actions]


def optimize_batch(
    online: ParameterSet,
    target: ParameterSet,
    opt: Adam,
    transitions: Sequence[Transition],
    gamma: float,
    weight_fn: Callable[[np.ndarray, Sequence[Transition]], np.ndarray]
    | None = None,
) -> tuple[float, np.ndarray, np.ndarray]:
    """One Adam step on the weighted mean squared Bellman residual.

    ``weight_fn`` maps the per-sample residual vector delta (and the batch)
    to weights in [0, 1]; omitted means all ones. Weight 0 removes a sample
    from the update entirely; the gradient contribution of each sample
    scales linearly with its weight. Returns (loss, delta, weights).

    Raises RuntimeError when the loss stops being finite (diverged run).
    """
    o_prev, actions, rewards, o_next, terminal = _stack_batch(
        transitions, online.dtype
    )
    y = ddqn_targets(online, target, rewards, o_next, terminal, gamma)
    q, cache = forward(online, o_prev, cache=True)
    rows = np.arange(len(actions))
    delta = y - q[rows, actions]

    if weight_fn is None:
        w = np.ones_like(delta)
    else:
        w = np.asarray(weight_fn(delta, transitions), dtype=online.dtype)
        if w.shape != delta.shape:
            raise ValueError("weight_fn must return one weight per sample")
        if (w < 0).any() or (w > 1).any():
            raise ValueError("sample weights must lie in [0, 1]")

    loss = float(np.mean(w * delta * delta))
    if not np.isfinite(loss):
        raise RuntimeError(
            f"non-finite loss {loss}; |delta| max "
            f"{np.max(np.abs(delta))}, run diverged"
        )

    batch = len(transitions)
    dq = np.zeros_like(q)
    dq[rows, actions] = (-2.0 / batch) * w * delta
    grad = _backward(online, cache, dq)
    opt.step(online, grad)
    return loss, delta, w


def sync_target(online: ParameterSet, target: ParameterSet) -> None:
    """Copy the online parameters over the target parameters."""
    if target.spec != online.spec:
        raise ValueError("online/target specs differ")
    target.flat[:] = online.flat


def loss_and_grad(
    online: ParameterSet,
    target: ParameterSet,
    transitions: Sequence[Transition],
    gamma: float,
    weights: np.ndarray,
) -> tuple[float, np.ndarray]:
    """Loss and analytic flat gradient without taking a step (for checks)."""
    o_prev, actions, rewards, o_next, terminal = _stack_batch(
        transitions, online.dtype
    )
    y = ddqn_targets(online, target, rewards, o_next, terminal, gamma)
    q, cache = forward(online, o_prev, cache=True)
    rows = np.arange(len(actions))
    delta = y - q[rows, actions]
    w = np.asarray(weights, dtype=online.dtype)
    loss = float(np.mean(w * delta * delta))
    dq = np.zeros_like(q)
    dq[rows, actions] = (-2.0 / len(transitions)) * w * delta
    return loss, _backward(online, cache, dq)


def gradient_check(
    spec: NetworkSpec,
    n_probes: int = 100,
    h: float = 1e-5,
    seed: int = 0,
    batch: int = 8,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Runs in float64 on a randomly initialised network and random binary
    observations, with random sample weights, probing ``n_probes`` random
    coordinates of the flat vector. Bootstrap targets are held fixed while
    probing (they are constants of the loss).
    """
    rng = np.random.default_rng(seed)
    online = init_parameters(spec, rng, dtype=np.float64)
    target = init_parameters(spec, rng, dtype=np.float64)
    transitions = []
    for _ in range(batch):
        transitions.append(
            Transition(
                o_prev=rng.integers(
                    0, 2, size=(spec.in_channels, spec.in_height, spec.in_width)
                ).astype(np.uint8),
                action=int(rng.integers(spec.n_actions)),
                reward=float(rng.normal()),
                o_next=rng.integers(
                    0, 2, size=(spec.in_channels, spec.in_height, spec.in_width)
                ).astype(np.uint8),
                terminal=bool(rng.random() < 0.3),
            )
        )
    weights = rng.uniform(0.1, 1.0, size=batch)
    gamma = 0.95

    # freeze the targets: perturbing theta must not move Y
    o_prev, actions, rewards, o_next, terminal = _stack_batch(
        transitions, np.float64
    )
    y_fixed = ddqn_targets(online, target, rewards, o_next, terminal, gamma)

    def loss_at(flat: np.ndarray) -> float:
        saved = online.flat.copy()
        online.flat[:] = flat
        q = forward(online, o_prev)
        delta = y_fixed - q[np.arange(batch), actions]
        value = float(np.mean(weights * delta * delta))
        online.flat[:] = saved
        return value

    q, cache = forward(online, o_prev, cache=True)
    delta = y_fixed - q[np.arange(batch), actions]
    dq = np.zeros_like(q)
    dq[np.arange(batch), actions] = (-2.0 / batch) * weights * delta
    analytic = _backward(online, cache, dq)

    idx = rng.choice(spec.n_parameters, size=min(n_probes, spec.n_parameters),
                     replace=False)
    worst = 0.0
    base = online.flat.copy()
    for i in idx:
        up = base.copy()
        up[i] += h
        down = base.copy()
        down[i] -= h
        numeric = (loss_at(up) - loss_at(down)) / (2 * h)
        denom = max(1e-8, abs(analytic[i]) + abs(numeric))
        worst = max(worst, abs(analytic[i] - numeric) / denom)
    return worst


# -- checkpoint ------------------------------------------------------------

_CKPT_MAGIC = b"FMCK"
_CKPT_VERSION = 1


def save_checkpoint(
    path: str | Path,
    online: ParameterSet,
    target: ParameterSet | None = None,
    opt: Adam | None = None,
) -> None:
    """Versioned binary checkpoint: spec echo, flat vectors, Adam state."""
    spec = online.spec
    meta = {
        "in_channels": spec.in_channels,
        "in_height": spec.in_height,
        "in_width": spec.in_width,
        "conv_kernels": list(spec.conv_kernels),
        "fc_width": spec.fc_width,
        "n_actions": spec.n_actions,
        "dtype": online.dtype.name,
        "has_target": target is not None,
        "has_opt": opt is not None,
    }
    raw = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_CKPT_MAGIC)
        f.write(struct.pack("<HI", _CKPT_VERSION, len(raw)))
        f.write(raw)
        f.write(online.flat.tobytes())
        if target is not None:
            f.write(target.flat.tobytes())
        if opt is not None:
            f.write(struct.pack("<Qd", opt.t, opt.alpha))
            f.write(opt.m.astype(online.dtype).tobytes())
            f.write(opt.v.astype(online.dtype).tobytes())


def load_checkpoint(
    path: str | Path,
) -> tuple[ParameterSet, ParameterSet | None, Adam | None]:
    with open(path, "rb") as f:
        if f.read(4) != _CKPT_MAGIC:
            raise ValueError("not a parameter checkpoint (bad magic)")
        version, meta_len = struct.unpack("<HI", f.read(6))
        if version != _CKPT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        meta = json.loads(f.read(meta_len).decode("utf-8"))
        spec = NetworkSpec(
            in_channels=meta["in_channels"],
            in_height=meta["in_height"],
            in_width=meta["in_width"],
            conv_kernels=tuple(meta["conv_kernels"]),
            fc_width=meta["fc_width"],
            n_actions=meta["n_actions"],
        )
        dtype = np.dtype(meta["dtype"])
        n = spec.n_parameters
        itemsize = dtype.itemsize
        online = ParameterSet(spec, dtype)
        online.flat[:] = np.frombuffer(f.read(n * itemsize), dtype=dtype)
        target = None
        if meta["has_target"]:
            target = ParameterSet(spec, dtype)
            target.flat[:] = np.frombuffer(f.read(n * itemsize), dtype=dtype)
        opt = None
        if meta["has_opt"]:
            t, alpha = struct.unpack("<Qd", f.read(16))
            opt = Adam(n, alpha=alpha, dtype=dtype)
            opt.t = t
            opt.m = np.frombuffer(f.read(n * itemsize), dtype=dtype).copy()
            opt.v = np.frombuffer(f.read(n * itemsize), dtype=dtype).copy()
    return online, target, opt

"""The coefficient network ``phi``: scalar ``s`` to ``N-1`` warp coefficients.

Four fully connected layers with ReLU and a dense skip into the third layer::

    h1 = relu(W1 s + b1)
    h2 = relu(W2 h1 + b2)
    h3 = relu(W3 [s, h1, h2] + b3)
    out = W4 h3 + b4

Forward and reverse passes are batched over grid points (rows).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

PARAM_NAMES = ("W1", "b1", "W2", "b2", "W3", "b3", "W4", "b4")
DEFAULT_HIDDEN = (512, 512, 1025)
CHECKPOINT_VERSION = 1


class DivergenceError(RuntimeError):
    """Raised when a loss, activation or parameter becomes non-finite."""

    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"{message} (update {step})")
        self.step = step


class TapeError(RuntimeError):
    """Reverse pass requested without a matching forward record."""


class WarpNet:
    def __init__(self, params: dict, n_out: int):
        self.params = params
        self.n_out = n_out

    @property
    def hidden(self) -> tuple[int, int, int]:
        return (self.params["W1"].shape[0], self.params["W2"].shape[0], self.params["W3"].shape[0])

    def copy(self) -> "WarpNet":
        return WarpNet({k: v.copy() for k, v in self.params.items()}, self.n_out)

    def __call__(self, s):
        out, _ = forward(self, s, record=False)
        return out


@dataclass
class NetTape:
    s: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    c: np.ndarray
    h3: np.ndarray


def init_net(n_series: int, seed: int = 0, hidden=DEFAULT_HIDDEN) -> WarpNet:
    """Hidden layers uniform in ``+-1/sqrt(fan_in)``; output layer exactly zero."""
    if n_series < 2:
        raise ValueError(f"need at least 2 series, got {n_series}")
    h1, h2, h3 = hidden
    if h3 != 1 + h1 + h2:
        raise ValueError(f"third hidden width must be 1 + {h1} + {h2}, got {h3}")
    rng = np.random.default_rng(seed)

    def uniform(shape, fan_in):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    params = {
        "W1": uniform((h1, 1), 1),
        "b1": uniform((h1,), 1),
        "W2": uniform((h2, h1), h1),
        "b2": uniform((h2,), h1),
        "W3": uniform((h3, h3), h3),
        "b3": uniform((h3,), h3),
        "W4": np.zeros((n_series - 1, h3)),
        "b4": np.zeros(n_series - 1),
    }
    return WarpNet(params, n_series - 1)


def forward(net: WarpNet, s, record: bool = True):
    """Evaluate the network on a 1-D array of inputs.

    Returns ``(out, tape)`` with ``out`` of shape ``(G, N-1)``; ``tape`` is
    None when ``record`` is false.
    """
    p = net.params
    s = np.atleast_1d(np.asarray(s, dtype=np.float64))
    col = s[:, None]
    h1 = np.maximum(col @ p["W1"].T + p["b1"], 0.0)
    h2 = np.maximum(h1 @ p["W2"].T + p["b2"], 0.0)
    c = np.concatenate([col, h1, h2], axis=1)
    h3 = np.maximum(c @ p["W3"].T + p["b3"], 0.0)
    out = h3 @ p["W4"].T + p["b4"]
    if not np.all(np.isfinite(out)):
        raise DivergenceError("non-finite network output")
    tape = NetTape(s, h1, h2, c, h3) if record else None
    return out, tape


def forward_chunked(net: WarpNet, s, chunk: int = 2048) -> np.ndarray:
    """Forward pass over a long grid without keeping activations."""
    s = np.asarray(s, dtype=np.float64)
    parts = [forward(net, s[i:i + chunk], record=False)[0] for i in range(0, s.size, chunk)]
    return np.concatenate(parts, axis=0)


def backward(net: WarpNet, tape: NetTape, out_grads) -> dict:
    """Accumulate parameter gradients given ``dL/d out`` for every taped row.

    The ReLU subgradient at zero is taken as zero.
    """
    if tape is None:
        raise TapeError("no forward record available")
    g = np.asarray(out_grads, dtype=np.float64)
    if g.shape != (tape.s.size, net.n_out):
        raise TapeError(f"output gradients of shape {g.shape} do not match taped "
                        f"forward of shape {(tape.s.size, net.n_out)}")
    p = net.params
    h1_dim = tape.h1.shape[1]
    grads = {"W4": g.T @ tape.h3, "b4": g.sum(axis=0)}

    d3 = (g @ p["W4"]) * (tape.h3 > 0)
    grads["W3"] = d3.T @ tape.c
    grads["b3"] = d3.sum(axis=0)
    dc = d3 @ p["W3"]

    d2 = dc[:, 1 + h1_dim:] * (tape.h2 > 0)
    grads["W2"] = d2.T @ tape.h1
    grads["b2"] = d2.sum(axis=0)

    dh1 = dc[:, 1:1 + h1_dim] + d2 @ p["W2"]
    d1 = dh1 * (tape.h1 > 0)
    grads["W1"] = d1.T @ tape.s[:, None]
    grads["b1"] = d1.sum(axis=0)
    return grads


def save_checkpoint(net: WarpNet, path, metadata: dict | None = None) -> Path:
    """Write parameters as a ``.npz`` archive.

    Arrays are stored under their layer names; ``metadata`` is stored as a
    JSON string under ``__meta__`` together with a format version.
    """
    path = Path(path)
    meta = {"version": CHECKPOINT_VERSION, "n_out": net.n_out, **(metadata or {})}
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=np.array(json.dumps(meta, sort_keys=True)), **net.params)
    return path


def load_checkpoint(path) -> tuple[WarpNet, dict]:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["__meta__"]))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')!r} in {path}")
        params = {name: data[name].copy() for name in PARAM_NAMES}
    return WarpNet(params, int(meta["n_out"])), meta

"""Fast learning network: a fixed random hidden layer beside a direct linear path.

Outputs are linear in the trainable weights, one 77-component row per action.
Rows are updated online by SGD and kept bounded by max-norm rescaling: the
largest row norm ever seen is recorded, and any row longer than 1 after an
update is divided by that historical maximum.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

N_INPUTS = 27
N_HIDDEN = 50
N_ACTIONS = 19

SNAPSHOT_VERSION = 1


def logistic(z):
    """Elementwise 1 / (1 + exp(-z)), clipped to avoid overflow."""
    z = np.clip(z, -500.0, 500.0)
    return 1.0 / (1.0 + np.exp(-z))


@dataclass
class FlnNetwork:
    """One Q-network: fixed hidden weights, learned output rows, max-norm record."""

    w_hidden: np.ndarray  # (n_hidden, n_inputs), immutable after init
    w_out: np.ndarray  # (n_actions, n_inputs + n_hidden), one row per action
    maxw: float = 1.0  # historical max output-row norm, shared by all rows

    @property
    def n_inputs(self) -> int:
        return self.w_hidden.shape[1]

    @property
    def n_hidden(self) -> int:
        return self.w_hidden.shape[0]

    @property
    def n_actions(self) -> int:
        return self.w_out.shape[0]


def init_network(
    rng: np.random.Generator,
    n_inputs: int = N_INPUTS,
    n_hidden: int = N_HIDDEN,
    n_actions: int = N_ACTIONS,
) -> FlnNetwork:
    """Draw a fresh network: uniform [-1, 1] weights, unit-norm hidden rows.

    Output rows are left unnormalised; the max-norm record starts at 1.
    """
    w_hidden = rng.uniform(-1.0, 1.0, size=(n_hidden, n_inputs))
    if n_hidden:
        w_hidden /= np.linalg.norm(w_hidden, axis=1, keepdims=True)
    w_hidden.flags.writeable = False
    w_out = rng.uniform(-1.0, 1.0, size=(n_actions, n_inputs + n_hidden))
    return FlnNetwork(w_hidden, w_out)


def activate(net: FlnNetwork, feat: np.ndarray) -> np.ndarray:
    """Extended input [feat | g(W_hidden feat)]; also the gradient of any Q row."""
    return np.concatenate([feat, logistic(net.w_hidden @ feat)])


def q_values(net: FlnNetwork, extended: np.ndarray) -> np.ndarray:
    """Q(s, a) for every action: one dot product per output row."""
    return net.w_out @ extended


def sgd_update(
    net: FlnNetwork,
    action: int,
    alpha: float,
    td_target: float,
    q_sa: float,
    extended: np.ndarray,
) -> None:
    """One SGD step on the chosen action's output row, then max-norm rescale.

    The row moves by alpha * (td_target - q_sa) * extended. The max-norm
    record is raised first, so a row that just set a new record is rescaled
    to length exactly 1, while a shorter row that still exceeds 1 shrinks
    below 1. Only the chosen row changes.
    """
    if not math.isfinite(td_target):
        raise ValueError(f"non-finite TD target {td_target!r}; update rejected")
    row = net.w_out[action]
    row += alpha * (td_target - q_sa) * extended
    norm = float(np.linalg.norm(row))
    if norm > net.maxw:
        net.maxw = norm
    if norm > 1.0:
        row /= net.maxw


def snapshot(net: FlnNetwork, seed=None) -> dict:
    """Serialisable view of a network: flat row-major weights plus metadata."""
    return {
        "format_version": SNAPSHOT_VERSION,
        "n_inputs": net.n_inputs,
        "n_hidden": net.n_hidden,
        "n_actions": net.n_actions,
        "maxw": float(net.maxw),
        "seed": seed,
        "w_hidden": [float(v) for v in net.w_hidden.ravel()],
        "w_out": [float(v) for v in net.w_out.ravel()],
    }


def from_snapshot(data: dict) -> FlnNetwork:
    version = data.get("format_version")
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {version!r}")
    n_inputs = data["n_inputs"]
    n_hidden = data["n_hidden"]
    n_actions = data["n_actions"]
    w_hidden = np.asarray(data["w_hidden"], dtype=np.float64).reshape(n_hidden, n_inputs)
    w_hidden.flags.writeable = False
    w_out = np.asarray(data["w_out"], dtype=np.float64).reshape(
        n_actions, n_inputs + n_hidden
    )
    return FlnNetwork(w_hidden, w_out, float(data["maxw"]))


def save_snapshot(net: FlnNetwork, path, seed=None) -> None:
    with open(path, "w") as fh:
        json.dump(snapshot(net, seed=seed), fh)


def load_snapshot(path) -> FlnNetwork:
    with open(path) as fh:
        return from_snapshot(json.load(fh))

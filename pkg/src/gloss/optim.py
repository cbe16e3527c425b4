"""Adam with global gradient-norm clipping, written against plain numpy arrays."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from gloss.decoder import Gradients

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


def global_norm(blocks: Sequence[np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(np.square(g))) for g in blocks)))


def clip_global_norm(grads, max_norm: float):
    """Scale every block by ``max_norm / norm`` when the joint L2 norm exceeds ``max_norm``.

    ``grads`` may be a :class:`Gradients` or a list of arrays; the same kind is returned.
    """
    if not max_norm > 0:
        raise ValueError("max_norm must be positive")
    if isinstance(grads, Gradients):
        norm = global_norm(grads.blocks())
        if norm <= max_norm:
            return grads
        s = max_norm / norm
        return Gradients(
            dW=grads.dW * s,
            db=grads.db * s,
            dz=grads.dz * s,
            dP=None if grads.dP is None else grads.dP * s,
        )
    blocks = list(grads)
    norm = global_norm(blocks)
    if norm <= max_norm:
        return blocks
    s = max_norm / norm
    return [g * s for g in blocks]


def clip_rows(G: np.ndarray, max_norm: float) -> np.ndarray:
    """Clip each row of ``G`` to L2 norm ``max_norm`` independently."""
    norms = np.linalg.norm(G, axis=1, keepdims=True)
    scale = np.where(norms > max_norm, max_norm / np.where(norms > 0, norms, 1.0), 1.0)
    return G * scale


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = BETA1
    beta2: float = BETA2
    eps: float = EPS

    @classmethod
    def like(cls, param: np.ndarray) -> "AdamState":
        return cls(m=np.zeros_like(param, dtype=np.float64), v=np.zeros_like(param, dtype=np.float64))


def adam_step(state: AdamState, param: np.ndarray, grad: np.ndarray, lr: float):
    """One bias-corrected Adam update, applied in place. Returns ``(state, param)``."""
    if param.shape != grad.shape or state.m.shape != param.shape:
        raise ValueError(f"shape mismatch: param {param.shape}, grad {grad.shape}, state {state.m.shape}")
    if not lr > 0:
        raise ValueError("lr must be positive")
    state.t += 1
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * grad
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * np.square(grad)
    m_hat = state.m / (1.0 - state.beta1**state.t)
    v_hat = state.v / (1.0 - state.beta2**state.t)
    param -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return state, param


@dataclass
class RowAdamState:
    """Independent Adam state for every row of a matrix; rows step only when visited."""

    m: np.ndarray
    v: np.ndarray
    t: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.t is None:
            self.t = np.zeros(self.m.shape[0], dtype=np.int64)

    @classmethod
    def like(cls, param: np.ndarray) -> "RowAdamState":
        return cls(m=np.zeros_like(param, dtype=np.float64), v=np.zeros_like(param, dtype=np.float64))


def adam_rows(state: RowAdamState, param: np.ndarray, rows: np.ndarray, grad: np.ndarray, lr: float) -> None:
    """Adam step on ``param[rows]`` with per-row step counters. ``rows`` must be unique."""
    t = state.t[rows] + 1
    state.t[rows] = t
    m = BETA1 * state.m[rows] + (1.0 - BETA1) * grad
    v = BETA2 * state.v[rows] + (1.0 - BETA2) * np.square(grad)
    state.m[rows] = m
    state.v[rows] = v
    m_hat = m / (1.0 - BETA1**t)[:, None]
    v_hat = v / (1.0 - BETA2**t)[:, None]
    param[rows] -= lr * m_hat / (np.sqrt(v_hat) + EPS)

"""Greedy generation from latents, interpolation inside the ball and neighbour lookup."""

from __future__ import annotations

import numpy as np

from gloss.decoder import PosDecoder
from gloss.latent import project_ball
from gloss.trainer import Model


def greedy_decode(model: Model, z: np.ndarray, length: int) -> list[str]:
    """Argmax token at each of ``length`` positions; ties go to the lowest id."""
    dec = model.decoder
    if not isinstance(dec, PosDecoder):
        raise ValueError("generation requires positional model")
    if not 1 <= length <= dec.L_max:
        raise ValueError(f"length must be in [1, {dec.L_max}]")
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (dec.d,):
        raise ValueError(f"latent has shape {z.shape}, expected ({dec.d},)")
    # argmax of the softmax equals argmax of the logits
    logits = (z + dec.P[:length]) @ dec.W.T + dec.b
    return model.vocab.decode(np.argmax(logits, axis=1).tolist())


def interpolate(z_src: np.ndarray, z_tgt: np.ndarray, t: float, r: float) -> np.ndarray:
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    z_src = np.asarray(z_src, dtype=np.float64)
    z_tgt = np.asarray(z_tgt, dtype=np.float64)
    if t == 0.0:
        return z_src.copy()
    if t == 1.0:
        return z_tgt.copy()
    # weights come from whichever of t, 1 - t is >= 0.5 so that 1 - big is exact;
    # this makes interpolate(a, b, t) and interpolate(b, a, 1 - t) bit-identical
    if t >= 0.5:
        w_tgt = t
        w_src = 1.0 - w_tgt
    else:
        w_src = 1.0 - t
        w_tgt = 1.0 - w_src
    mix = w_src * z_src + w_tgt * z_tgt
    return project_ball(mix, r)


def nearest_neighbors(model: Model, z: np.ndarray, k: int) -> list[tuple[int, float]]:
    """Training latents ranked by descending cosine to ``z``; ties by ascending index."""
    if model.latents is None:
        raise ValueError("model has no stored training latents")
    Z = model.latents.z
    if not 1 <= k <= len(Z):
        raise ValueError(f"k must be in [1, {len(Z)}], got {k}")
    z = np.asarray(z, dtype=np.float64)
    nz = np.linalg.norm(z)
    if nz == 0:
        raise ValueError("query latent is zero")
    norms = np.linalg.norm(Z, axis=1)
    sims = (Z @ z) / (np.where(norms > 0, norms, 1.0) * nz)
    sims = np.clip(np.where(norms > 0, sims, 0.0), -1.0, 1.0)
    order = np.lexsort((np.arange(len(Z)), -sims))[:k]
    return [(int(i), float(sims[i])) for i in order]

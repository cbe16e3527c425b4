"""Linear decoders: bag-of-words (sigmoid + BCE) and positional (softmax + CE).

Gradients are written out by hand. The single-example functions follow the
per-position formulas directly; the ``*_batch`` variants compute the same
quantities over many sentences at once and are what the trainer uses.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import expit

PROB_FLOOR = 1e-12
# bound on (tokens x V) entries materialised per chunk in the positional batch path
_CHUNK_ELEMS = 1 << 22


@dataclass
class BowDecoder:
    W: np.ndarray
    b: np.ndarray

    kind = "bow"

    @property
    def V(self) -> int:
        return self.W.shape[0]

    @property
    def d(self) -> int:
        return self.W.shape[1]

    def blocks(self) -> list[np.ndarray]:
        return [self.W, self.b]

    def copy(self) -> "BowDecoder":
        return BowDecoder(self.W.copy(), self.b.copy())


@dataclass
class PosDecoder:
    W: np.ndarray
    b: np.ndarray
    P: np.ndarray

    kind = "pos"

    @property
    def V(self) -> int:
        return self.W.shape[0]

    @property
    def d(self) -> int:
        return self.W.shape[1]

    @property
    def L_max(self) -> int:
        return self.P.shape[0]

    def blocks(self) -> list[np.ndarray]:
        return [self.W, self.b, self.P]

    def copy(self) -> "PosDecoder":
        return PosDecoder(self.W.copy(), self.b.copy(), self.P.copy())


Decoder = BowDecoder | PosDecoder


@dataclass
class Gradients:
    dW: np.ndarray
    db: np.ndarray
    dz: np.ndarray
    dP: np.ndarray | None = None

    def blocks(self) -> list[np.ndarray]:
        return [g for g in (self.dW, self.db, self.dP, self.dz) if g is not None]

    def decoder_blocks(self) -> list[np.ndarray]:
        return [g for g in (self.dW, self.db, self.dP) if g is not None]


def init_decoder(kind: str, V: int, d: int, L_max: int = 64, std: float = 0.0, rng=None) -> Decoder:
    """Fresh decoder. ``std=0`` gives the all-zero initialisation."""
    if V < 1 or d < 1 or L_max < 1:
        raise ValueError("V, d and L_max must be positive")

    def draw(*shape):
        if std == 0.0:
            return np.zeros(shape)
        return (rng if rng is not None else np.random.default_rng()).normal(0.0, std, size=shape)

    if kind == "bow":
        return BowDecoder(W=draw(V, d), b=np.zeros(V))
    if kind == "pos":
        return PosDecoder(W=draw(V, d), b=np.zeros(V), P=draw(L_max, d))
    raise ValueError(f"unknown model kind {kind!r}")


def _check_z(dec: Decoder, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (dec.d,):
        raise ValueError(f"latent has shape {z.shape}, decoder expects ({dec.d},)")
    return z


def multi_hot(word_set: Sequence[int], V: int) -> np.ndarray:
    t = np.zeros(V)
    t[list(word_set)] = 1.0
    return t


# -- bag of words ----------------------------------------------------------

def bow_forward(dec: BowDecoder, z: np.ndarray) -> np.ndarray:
    z = _check_z(dec, z)
    return expit(dec.W @ z + dec.b)


def bow_loss(o: np.ndarray, t: np.ndarray) -> float:
    o = np.asarray(o, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    pos = np.log(np.maximum(o, PROB_FLOOR))
    neg = np.log(np.maximum(1.0 - o, PROB_FLOOR))
    return float(-np.sum(t * pos + (1.0 - t) * neg))


def bow_grads(dec: BowDecoder, z: np.ndarray, t: np.ndarray) -> tuple[float, Gradients]:
    z = _check_z(dec, z)
    t = np.asarray(t, dtype=np.float64)
    if t.shape != (dec.V,):
        raise ValueError(f"target has shape {t.shape}, decoder expects ({dec.V},)")
    o = expit(dec.W @ z + dec.b)
    e = o - t
    return bow_loss(o, t), Gradients(dW=np.outer(e, z), db=e, dz=dec.W.T @ e)


def bow_batch(dec: BowDecoder, Z: np.ndarray, T: np.ndarray):
    """Per-example losses, summed decoder gradients and per-example latent gradients.

    Returns ``(losses (B,), dW_sum, db_sum, dZ (B, d))``.
    """
    O = expit(Z @ dec.W.T + dec.b)
    pos = np.log(np.maximum(O, PROB_FLOOR))
    neg = np.log(np.maximum(1.0 - O, PROB_FLOOR))
    losses = -np.sum(T * pos + (1.0 - T) * neg, axis=1)
    E = O - T
    return losses, E.T @ Z, E.sum(axis=0), E @ dec.W


def bow_latent_grad(dec: BowDecoder, Z: np.ndarray, T: np.ndarray):
    """Losses and latent gradients only (frozen decoder)."""
    O = expit(Z @ dec.W.T + dec.b)
    pos = np.log(np.maximum(O, PROB_FLOOR))
    neg = np.log(np.maximum(1.0 - O, PROB_FLOOR))
    losses = -np.sum(T * pos + (1.0 - T) * neg, axis=1)
    return losses, (O - T) @ dec.W


# -- positional ------------------------------------------------------------

def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=-1, keepdims=True)


def pos_forward(dec: PosDecoder, z: np.ndarray, l: int) -> np.ndarray:
    z = _check_z(dec, z)
    if not 0 <= l < dec.L_max:
        raise ValueError(f"position {l} outside [0, {dec.L_max})")
    return _softmax(dec.W @ (z + dec.P[l]) + dec.b)


def _check_ids(dec: PosDecoder, ids: Sequence[int]) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim != 1 or len(ids) == 0:
        raise ValueError("ids must be a non-empty 1-D sequence")
    if len(ids) > dec.L_max:
        raise ValueError(f"sentence length {len(ids)} exceeds L_max={dec.L_max}")
    if ids.min() < 0 or ids.max() >= dec.V:
        raise ValueError(f"token id out of range [0, {dec.V})")
    return ids


def pos_grads(dec: PosDecoder, z: np.ndarray, ids: Sequence[int]) -> tuple[float, Gradients]:
    z = _check_z(dec, z)
    ids = _check_ids(dec, ids)
    dW = np.zeros_like(dec.W)
    db = np.zeros_like(dec.b)
    dP = np.zeros_like(dec.P)
    dz = np.zeros_like(z)
    loss = 0.0
    for l, tok in enumerate(ids):
        h = z + dec.P[l]
        logits = dec.W @ h + dec.b
        m = logits.max()
        lse = m + np.log(np.sum(np.exp(logits - m)))
        loss += lse - logits[tok]
        e = np.exp(logits - lse)
        e[tok] -= 1.0
        dW += np.outer(e, h)
        db += e
        dP[l] = dec.W.T @ e
        dz += dP[l]
    return float(loss), Gradients(dW=dW, db=db, dz=dz, dP=dP)


def _flatten(seqs: Sequence[Sequence[int]]):
    lengths = np.fromiter((len(s) for s in seqs), dtype=np.int64, count=len(seqs))
    ex = np.repeat(np.arange(len(seqs)), lengths)
    pos = np.concatenate([np.arange(n) for n in lengths]) if len(seqs) else np.zeros(0, np.int64)
    tok = np.fromiter((t for s in seqs for t in s), dtype=np.int64, count=int(lengths.sum()))
    return ex, pos, tok


def _pos_chunks(n_tokens: int, V: int):
    step = max(1, _CHUNK_ELEMS // max(V, 1))
    for start in range(0, n_tokens, step):
        yield slice(start, min(start + step, n_tokens))


def pos_batch(dec: PosDecoder, Z: np.ndarray, seqs: Sequence[Sequence[int]], decoder_grads: bool = True):
    """Batched positional loss and gradients over sentences ``seqs`` with latents ``Z``.

    Returns ``(losses (B,), dW_sum, db_sum, dP_sum, dZ (B, d))``; the three
    decoder sums are ``None`` when ``decoder_grads`` is false.
    """
    B = Z.shape[0]
    ex, pos, tok = _flatten(seqs)
    losses = np.zeros(B)
    dZ = np.zeros_like(Z)
    dW = np.zeros_like(dec.W) if decoder_grads else None
    db = np.zeros_like(dec.b) if decoder_grads else None
    dP = np.zeros_like(dec.P) if decoder_grads else None
    for sl in _pos_chunks(len(tok), dec.V):
        e_i, p_i, t_i = ex[sl], pos[sl], tok[sl]
        H = Z[e_i] + dec.P[p_i]
        logits = H @ dec.W.T + dec.b
        m = logits.max(axis=1, keepdims=True)
        lse = m[:, 0] + np.log(np.exp(logits - m).sum(axis=1))
        rows = np.arange(len(t_i))
        np.add.at(losses, e_i, lse - logits[rows, t_i])
        E = np.exp(logits - lse[:, None])
        E[rows, t_i] -= 1.0
        G = E @ dec.W
        np.add.at(dZ, e_i, G)
        if decoder_grads:
            dW += E.T @ H
            db += E.sum(axis=0)
            np.add.at(dP, p_i, G)
    return losses, dW, db, dP, dZ

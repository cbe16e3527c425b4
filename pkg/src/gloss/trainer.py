"""Joint optimisation of decoder parameters and per-sentence latents, and
inference of latents for new sentences with the decoder frozen."""

from __future__ import annotations

import hashlib
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from gloss.corpus import EncodedCorpus, EncodedSentence, Vocab, build_vocab, encode, encode_corpus
from gloss.decoder import (
    BowDecoder,
    Decoder,
    PosDecoder,
    bow_batch,
    bow_latent_grad,
    init_decoder,
    pos_batch,
)
from gloss.latent import LatentStore, project_ball, sample_latents
from gloss.optim import AdamState, RowAdamState, adam_rows, adam_step, clip_global_norm, clip_rows

MODEL_KINDS = ("bow", "pos")


@dataclass(frozen=True)
class TrainConfig:
    model_kind: str = "bow"
    d: int = 100
    r: float = 2.0
    lr: float = 3e-4
    clip: float = 25.0
    epochs: int = 210
    batch_size: int = 128
    seed: int = 0
    L_max: int = 64
    threads: int = 1
    init_std: float = 0.0

    def __post_init__(self):
        if self.model_kind not in MODEL_KINDS:
            raise ValueError(f"model_kind must be one of {MODEL_KINDS}, got {self.model_kind!r}")
        for name in ("d", "epochs", "batch_size", "L_max", "threads"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        for name in ("r", "lr", "clip"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.init_std < 0:
            raise ValueError("init_std must be non-negative")


@dataclass
class Model:
    vocab: Vocab
    decoder: Decoder
    latents: LatentStore | None
    config: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        dec = self.decoder
        if dec.kind != self.config.model_kind:
            raise ValueError(f"decoder kind {dec.kind!r} does not match config {self.config.model_kind!r}")
        if dec.V != self.vocab.V:
            raise ValueError(f"decoder V={dec.V} but vocab has {self.vocab.V} tokens")
        if dec.d != self.config.d:
            raise ValueError(f"decoder d={dec.d} but config d={self.config.d}")
        if isinstance(dec, PosDecoder) and dec.L_max != self.config.L_max:
            raise ValueError(f"decoder L_max={dec.L_max} but config L_max={self.config.L_max}")
        if self.latents is not None and self.latents.d != dec.d:
            raise ValueError(f"latents d={self.latents.d} but decoder d={dec.d}")

    @property
    def kind(self) -> str:
        return self.config.model_kind

    @property
    def r(self) -> float:
        return self.config.r

    def encode(self, sentence: str) -> EncodedSentence:
        return encode(sentence, self.vocab, self.config.L_max)


def _targets(sents: Sequence[EncodedSentence], V: int) -> np.ndarray:
    T = np.zeros((len(sents), V))
    for i, s in enumerate(sents):
        T[i, list(s.word_set)] = 1.0
    return T


def sentence_losses(model: Model, Z: np.ndarray, sents: Sequence[EncodedSentence]) -> np.ndarray:
    """Reconstruction loss of each sentence under the given latents."""
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    if isinstance(model.decoder, BowDecoder):
        return bow_latent_grad(model.decoder, Z, _targets(sents, model.vocab.V))[0]
    return pos_batch(model.decoder, Z, [s.ids for s in sents], decoder_grads=False)[0]


def _batch_grads(dec: Decoder, Z: np.ndarray, sents: Sequence[EncodedSentence]):
    """Returns (losses, decoder gradient sums as a list, dZ)."""
    if isinstance(dec, BowDecoder):
        losses, dW, db, dZ = bow_batch(dec, Z, _targets(sents, dec.V))
        return losses, [dW, db], dZ
    losses, dW, db, dP, dZ = pos_batch(dec, Z, [s.ids for s in sents])
    return losses, [dW, db, dP], dZ


def _parallel_grads(pool: ThreadPoolExecutor | None, dec: Decoder, Z: np.ndarray, sents, n_chunks: int):
    if pool is None or n_chunks == 1 or len(sents) < 2:
        return _batch_grads(dec, Z, sents)
    bounds = np.linspace(0, len(sents), min(n_chunks, len(sents)) + 1).astype(int)
    parts = [(Z[a:b], sents[a:b]) for a, b in zip(bounds[:-1], bounds[1:])]
    results = list(pool.map(lambda p: _batch_grads(dec, *p), parts))
    losses = np.concatenate([res[0] for res in results])
    sums = [sum(res[1][k] for res in results) for k in range(len(results[0][1]))]
    dZ = np.concatenate([res[2] for res in results])
    return losses, sums, dZ


StepHook = Callable[[np.ndarray, LatentStore], None]


def train(
    corpus: EncodedCorpus,
    cfg: TrainConfig,
    vocab: Vocab,
    on_step: StepHook | None = None,
    progress: bool = False,
) -> tuple[Model, list[float]]:
    """Fit decoder and latents jointly with minibatch Adam.

    Returns the model and the mean per-sentence training loss of each epoch
    (measured on each batch before its update). ``on_step`` is called after
    every optimizer step with the touched row indices and the latent store.
    """
    N = len(corpus)
    for s in corpus.sentences:
        if len(s) > cfg.L_max or max(s.ids) >= vocab.V:
            raise ValueError("corpus was encoded with a different vocab or L_max")
    rng = np.random.default_rng(cfg.seed)
    latents = LatentStore(z=sample_latents(rng, N, cfg.d, cfg.r), r=cfg.r)
    dec = init_decoder(cfg.model_kind, vocab.V, cfg.d, cfg.L_max, std=cfg.init_std, rng=rng)
    dec_states = [AdamState.like(p) for p in dec.blocks()]
    row_state = RowAdamState.like(latents.z)
    sents = corpus.sentences
    trace: list[float] = []
    pool = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None
    try:
        for epoch in range(cfg.epochs):
            order = rng.permutation(N)
            total = 0.0
            for start in range(0, N, cfg.batch_size):
                rows = np.sort(order[start : start + cfg.batch_size])
                batch = [sents[i] for i in rows]
                losses, dec_sums, dZ = _parallel_grads(pool, dec, latents.z[rows], batch, cfg.threads)
                total += float(losses.sum())

                dec_grads = clip_global_norm([g / len(rows) for g in dec_sums], cfg.clip)
                for state, param, grad in zip(dec_states, dec.blocks(), dec_grads):
                    adam_step(state, param, grad, cfg.lr)
                adam_rows(row_state, latents.z, rows, clip_rows(dZ, cfg.clip), cfg.lr)
                latents.z[rows] = project_ball(latents.z[rows], cfg.r)
                if on_step is not None:
                    on_step(rows, latents)
            mean = total / N
            trace.append(mean)
            if progress:
                print(f"epoch {epoch} loss {mean:.6f}", file=sys.stderr, flush=True)
    finally:
        if pool is not None:
            pool.shutdown()
    return Model(vocab=vocab, decoder=dec, latents=latents, config=cfg), trace


def fit(
    lines: Sequence[str],
    cfg: TrainConfig,
    min_count: int = 1,
    **kwargs,
) -> tuple[Model, list[float]]:
    """Build the vocabulary from raw ``lines``, encode them and train."""
    vocab = build_vocab(lines, min_count)
    corpus = encode_corpus(lines, vocab, cfg.L_max)
    return train(corpus, cfg, vocab, **kwargs)


def sentence_seed(sentence: str) -> int:
    return int.from_bytes(hashlib.sha256(sentence.encode("utf-8")).digest()[:8], "little")


def infer_latents(
    model: Model,
    sentences: Sequence[str],
    steps: int = 250,
    lr: float = 1.0,
    plain_sgd: bool = False,
) -> np.ndarray:
    """Embed ``sentences`` by optimising fresh latents against the frozen decoder.

    Each latent starts from the training initialisation scheme seeded by a
    hash of its sentence, then takes ``steps`` clipped Adam (or plain
    gradient) steps, projected onto the ball after each one. Rows are
    independent, so batching does not change the optimisation of any row.
    """
    if steps < 0:
        raise ValueError("steps must be non-negative")
    if not lr > 0:
        raise ValueError("lr must be positive")
    cfg = model.config
    encoded = [model.encode(s) for s in sentences]
    if not encoded:
        return np.zeros((0, cfg.d))
    Z = np.concatenate([sample_latents(np.random.default_rng(sentence_seed(s)), 1, cfg.d, cfg.r) for s in sentences])
    dec = model.decoder
    if isinstance(dec, BowDecoder):
        T = _targets(encoded, dec.V)
        grad_fn = lambda Z: bow_latent_grad(dec, Z, T)[1]  # noqa: E731
    else:
        seqs = [s.ids for s in encoded]
        grad_fn = lambda Z: pos_batch(dec, Z, seqs, decoder_grads=False)[4]  # noqa: E731
    rows = np.arange(len(encoded))
    state = RowAdamState.like(Z)
    for _ in range(steps):
        G = clip_rows(grad_fn(Z), cfg.clip)
        if plain_sgd:
            Z -= lr * G
        else:
            adam_rows(state, Z, rows, G, lr)
        Z = project_ball(Z, cfg.r)
    return Z


def infer_latent(model: Model, sentence: str, steps: int = 250, lr: float = 1.0, plain_sgd: bool = False) -> np.ndarray:
    return infer_latents(model, [sentence], steps=steps, lr=lr, plain_sgd=plain_sgd)[0]

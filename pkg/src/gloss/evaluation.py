"""STS-style similarity correlation and a logistic-regression probe on frozen embeddings."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from gloss.trainer import Model, infer_latents


@dataclass(frozen=True)
class StsPair:
    sent_a: str
    sent_b: str
    gold: float

    def __post_init__(self):
        if not self.sent_a.strip() or not self.sent_b.strip():
            raise ValueError("STS sentences must be non-empty")
        if not math.isfinite(self.gold):
            raise ValueError("gold score must be finite")


class FileFormatError(ValueError):
    def __init__(self, path, lineno: int, msg: str):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.lineno = lineno


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine undefined for a zero vector")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"pearson needs two equal-length 1-D sequences, got {x.shape} and {y.shape}")
    if len(x) < 2:
        raise ValueError("pearson needs at least 2 points")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = dx @ dx, dy @ dy
    if sxx == 0 or syy == 0:
        raise ValueError("pearson undefined for a constant sequence")
    return float(np.clip(dx @ dy / math.sqrt(sxx * syy), -1.0, 1.0))


def embed(model: Model, sentences: Sequence[str], threads: int = 1, **infer_kwargs) -> np.ndarray:
    """Infer latents for ``sentences``, computing each distinct sentence once.

    With ``threads > 1`` the distinct sentences are split into contiguous
    chunks optimised concurrently.
    """
    uniq = list(dict.fromkeys(sentences))
    if threads > 1 and len(uniq) > 1:
        bounds = np.linspace(0, len(uniq), min(threads, len(uniq)) + 1).astype(int)
        chunks = [uniq[a:b] for a, b in zip(bounds[:-1], bounds[1:])]
        with ThreadPoolExecutor(threads) as pool:
            Z = np.concatenate(list(pool.map(lambda c: infer_latents(model, c, **infer_kwargs), chunks)))
    else:
        Z = infer_latents(model, uniq, **infer_kwargs)
    where = {s: i for i, s in enumerate(uniq)}
    return Z[[where[s] for s in sentences]].reshape(len(sentences), model.config.d)


def sts_scores(model: Model, pairs: Sequence[StsPair], **infer_kwargs) -> np.ndarray:
    Z = embed(model, [s for p in pairs for s in (p.sent_a, p.sent_b)], **infer_kwargs)
    return np.array([cosine(Z[2 * i], Z[2 * i + 1]) for i in range(len(pairs))])


def eval_sts(model: Model, pairs: Sequence[StsPair], **infer_kwargs) -> float:
    """Pearson correlation x 100 between cosine similarities and gold scores."""
    if len(pairs) < 2:
        raise ValueError("need at least 2 pairs")
    scores = sts_scores(model, pairs, **infer_kwargs)
    return 100.0 * pearson(scores, [p.gold for p in pairs])


def read_sts(path: str | Path) -> list[StsPair]:
    """``sent_a<TAB>sent_b<TAB>score`` per line; blank lines are skipped."""
    pairs = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").split("\n"), 1):
        if not line.strip():
            continue
        fields = line.rstrip("\r").split("\t")
        if len(fields) != 3:
            raise FileFormatError(path, lineno, f"expected 3 tab-separated fields, got {len(fields)}")
        try:
            gold = float(fields[2])
        except ValueError:
            raise FileFormatError(path, lineno, f"unparseable score {fields[2]!r}") from None
        try:
            pairs.append(StsPair(fields[0], fields[1], gold))
        except ValueError as exc:
            raise FileFormatError(path, lineno, str(exc)) from None
    return pairs


# -- probe -----------------------------------------------------------------

@dataclass
class ProbeDataset:
    embeddings: np.ndarray
    labels: np.ndarray
    C: int

    def __post_init__(self):
        self.embeddings = np.asarray(self.embeddings, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.embeddings.ndim != 2 or self.labels.shape != (self.embeddings.shape[0],):
            raise ValueError("embeddings must be N x d with one label per row")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.C):
            raise ValueError(f"labels must lie in 0..{self.C - 1}")


@dataclass
class ProbeWeights:
    W: np.ndarray  # C x d
    b: np.ndarray  # C


def probe_loss_and_grad(weights: ProbeWeights, data: ProbeDataset, l2: float):
    """Mean cross-entropy plus ``l2/2 * ||W||^2`` and its gradient (dW, db)."""
    X, y = data.embeddings, data.labels
    logits = X @ weights.W.T + weights.b
    m = logits.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(logits - m).sum(axis=1))
    rows = np.arange(len(y))
    loss = float(np.mean(lse - logits[rows, y]) + 0.5 * l2 * np.sum(weights.W**2))
    E = np.exp(logits - lse[:, None])
    E[rows, y] -= 1.0
    E /= len(y)
    return loss, E.T @ X + l2 * weights.W, E.sum(axis=0)


def probe_train(data: ProbeDataset, l2: float = 1e-3, steps: int = 1000, lr: float = 0.1, trace: list | None = None) -> ProbeWeights:
    """Multinomial logistic regression by full-batch gradient descent from zero.

    The cross-entropy term takes an explicit gradient step and the L2 term an
    implicit one, ``W <- (W - lr * dCE) / (1 + lr * l2)``; same minimiser as
    plain gradient descent, but stable however large ``l2`` is.
    """
    if l2 < 0:
        raise ValueError("l2 must be non-negative")
    present = np.unique(data.labels)
    if len(present) < 2:
        raise ValueError("probe needs at least two classes in the training data")
    if len(present) != data.C:
        raise ValueError(f"every class 0..{data.C - 1} must appear in the training data")
    w = ProbeWeights(W=np.zeros((data.C, data.embeddings.shape[1])), b=np.zeros(data.C))
    for _ in range(steps):
        loss, dW, db = probe_loss_and_grad(w, data, 0.0)
        if trace is not None:
            trace.append(loss + 0.5 * l2 * float(np.sum(w.W**2)))
        w.W = (w.W - lr * dW) / (1.0 + lr * l2)
        w.b -= lr * db
    return w


def probe_predict(weights: ProbeWeights, X: np.ndarray) -> np.ndarray:
    # argmax returns the first maximum, i.e. ties go to the lowest class index
    return np.argmax(np.asarray(X) @ weights.W.T + weights.b, axis=1)


def probe_eval(weights: ProbeWeights, data: ProbeDataset) -> float:
    if len(data.labels) == 0:
        return 0.0
    return float(np.mean(probe_predict(weights, data.embeddings) == data.labels))


def read_labelled(path: str | Path) -> tuple[list[str], list[str]]:
    """``label<TAB>sentence`` per line; returns (labels, sentences)."""
    labels, sents = [], []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").split("\n"), 1):
        if not line.strip():
            continue
        fields = line.rstrip("\r").split("\t", 1)
        if len(fields) != 2 or not fields[0].strip() or not fields[1].strip():
            raise FileFormatError(path, lineno, "expected label<TAB>sentence")
        labels.append(fields[0].strip())
        sents.append(fields[1])
    return labels, sents

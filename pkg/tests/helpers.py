"""Toy corpora and independent numerical oracles shared by the tests."""

import math

import numpy as np


def slot_corpus(n=200, pool=15, min_len=4, max_len=10, seed=0):
    """Sentences where position l always draws from its own word pool ``s<l>w*``.

    Word classes are tied to positions, like a tiny template grammar; V is
    about ``max_len * pool``.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        L = int(rng.integers(min_len, max_len + 1))
        out.append(" ".join(f"s{l}w{rng.integers(pool)}" for l in range(L)))
    return out


PARAPHRASE_TEMPLATES = [
    "the {0} {1} {2} {3}",
    "{2} {3} , said the {0} {1}",
    "a {1} {0} with {2} and {3}",
    "{0} {1} is {3} {2} .",
    "why {2} the {0} {3} {1} ?",
]


def paraphrase_clusters(n_clusters=100, per_cluster=4, pool=300, seed=0):
    """Each cluster shares four content words rendered through different templates."""
    rng = np.random.default_rng(seed)
    words = [f"c{i}" for i in range(pool)]
    clusters = []
    for _ in range(n_clusters):
        w = rng.choice(words, size=4, replace=False)
        ts = rng.choice(len(PARAPHRASE_TEMPLATES), size=per_cluster, replace=False)
        clusters.append([PARAPHRASE_TEMPLATES[t].format(*w) for t in ts])
    return clusters


def central_diff(f, x, h=1e-5):
    """Central finite-difference gradient of scalar ``f`` w.r.t. array ``x`` (perturbed in place)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f()
        x[i] = old - h
        fm = f()
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / denom)


def ref_bow_loss(W, b, z, t):
    """Summed BCE, evaluated term by term with math.* (no numpy vector ops)."""
    total = 0.0
    for j in range(W.shape[0]):
        a = sum(W[j, k] * z[k] for k in range(len(z))) + b[j]
        o = 1.0 / (1.0 + math.exp(-a))
        total -= t[j] * math.log(o) + (1 - t[j]) * math.log(1 - o)
    return total


def ref_pos_loss(W, b, P, z, ids):
    total = 0.0
    for l, tok in enumerate(ids):
        h = [z[k] + P[l, k] for k in range(len(z))]
        logits = [sum(W[j, k] * h[k] for k in range(len(h))) + b[j] for j in range(W.shape[0])]
        m = max(logits)
        lse = m + math.log(sum(math.exp(x - m) for x in logits))
        total += lse - logits[tok]
    return total


def ref_pearson(x, y):
    n = len(x)
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    cov = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    vx = math.fsum((a - mx) ** 2 for a in x)
    vy = math.fsum((b - my) ** 2 for b in y)
    return cov / math.sqrt(vx * vy)


def ranking_auc(pos, neg):
    """P(score of a positive > score of a negative), ties counted half, by brute force."""
    pos = np.asarray(pos)[:, None]
    neg = np.asarray(neg)[None, :]
    return float(((pos > neg).sum() + 0.5 * (pos == neg).sum()) / (pos.size * neg.size))

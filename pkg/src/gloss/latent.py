"""Per-sentence latent codes constrained to the Euclidean ball of radius r."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NORM_TOL = 1e-6


def project_ball(z: np.ndarray, r: float) -> np.ndarray:
    """Project ``z`` onto ``{x : ||x||_2 <= r}``.

    Accepts a single vector or a 2-D array, in which case every row is
    projected independently. Points already inside the ball are returned
    unchanged (as a copy).
    """
    z = np.asarray(z, dtype=np.float64)
    norms = np.linalg.norm(z, axis=-1, keepdims=True)
    # aim a few ulps inside r so that rounding in any later norm computation
    # still sees a point in the ball, and a second projection is a no-op
    target = r * (1.0 - 8.0 * np.finfo(np.float64).eps)
    scale = np.where(norms > r, target / np.where(norms > 0, norms, 1.0), 1.0)
    out = z * scale
    for _ in range(64):
        over = np.linalg.norm(out, axis=-1, keepdims=True) > target
        over &= norms > r
        if not np.any(over):
            break
        out = np.where(over, out * (1.0 - 2.0**-52), out)
    return out


@dataclass
class LatentStore:
    z: np.ndarray
    r: float

    def __post_init__(self):
        if self.z.ndim != 2 or self.z.shape[0] < 1 or self.z.shape[1] < 1:
            raise ValueError(f"latents must be a non-empty N x d array, got shape {self.z.shape}")
        if not self.r > 0:
            raise ValueError("radius must be positive")

    @property
    def N(self) -> int:
        return self.z.shape[0]

    @property
    def d(self) -> int:
        return self.z.shape[1]

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.z, axis=1)

    def check(self, tol: float = NORM_TOL) -> None:
        worst = float(self.norms().max())
        if worst > self.r + tol:
            raise ValueError(f"latent norm {worst:.6g} exceeds radius {self.r}")


def sample_latents(rng: np.random.Generator, n: int, d: int, r: float) -> np.ndarray:
    z = rng.normal(0.0, 1.0 / np.sqrt(d), size=(n, d))
    return project_ball(z, r)


def init_latents(N: int, d: int, r: float = 2.0, seed: int = 0) -> LatentStore:
    if N < 1 or d < 1:
        raise ValueError("N and d must be positive")
    if not r > 0:
        raise ValueError("radius must be positive")
    rng = np.random.default_rng(seed)
    return LatentStore(z=sample_latents(rng, N, d, r), r=float(r))

"""Binary model files.

Layout (all little-endian)::

    b"GLOS"                 magic
    u32 version             = 1
    u8  kind                0 = bow, 1 = pos
    u32 d, V, L_max, N
    f32 r
    u32 vocab count         (= V), then per token: u32 byte length + UTF-8 bytes
    f32 W[V, d]             row-major
    f32 b[V]
    f32 P[L_max, d]         positional models only
    u8  has_latents         1 when latents follow
    f32 Z[N, d]             only if has_latents

Parameters are stored at 32-bit precision; loading gives float64 arrays
holding exactly the stored values, so save(load(path)) reproduces the file.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from gloss.corpus import Vocab
from gloss.decoder import BowDecoder, PosDecoder
from gloss.latent import NORM_TOL, LatentStore
from gloss.trainer import Model, TrainConfig

MAGIC = b"GLOS"
VERSION = 1
KIND_CODES = {"bow": 0, "pos": 1}
_HEADER = struct.Struct("<4sIBIIIIf")


class ModelFileError(ValueError):
    pass


class BadHeaderError(ModelFileError):
    pass


class TruncatedFileError(ModelFileError):
    pass


class InvalidModelError(ModelFileError):
    pass


def _f32(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<f4").tobytes()


def dumps(model: Model) -> bytes:
    dec = model.decoder
    cfg = model.config
    z = model.latents.z if model.latents is not None else None
    N = 0 if z is None else z.shape[0]
    parts = [_HEADER.pack(MAGIC, VERSION, KIND_CODES[cfg.model_kind], cfg.d, dec.V, cfg.L_max, N, cfg.r)]
    parts.append(struct.pack("<I", model.vocab.V))
    for tok in model.vocab.tokens:
        raw = tok.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
    parts.append(_f32(dec.W))
    parts.append(_f32(dec.b))
    if isinstance(dec, PosDecoder):
        parts.append(_f32(dec.P))
    parts.append(struct.pack("<B", 0 if z is None else 1))
    if z is not None:
        parts.append(_f32(z))
    return b"".join(parts)


def save(model: Model, path: str | Path) -> None:
    """Write ``model`` to ``path`` atomically; no partial file is left on failure."""
    path = Path(path)
    data = dumps(model)
    fd, tmp = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise OSError(exc.errno, f"cannot write model file {path}: {exc.strerror}") from exc


class _Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, n: int, what: str) -> memoryview:
        if self.pos + n > len(self.data):
            raise TruncatedFileError(f"unexpected end of file while reading {what}")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size, what))

    def floats(self, shape: tuple[int, ...], what: str) -> np.ndarray:
        n = int(np.prod(shape))
        arr = np.frombuffer(self.take(4 * n, what), dtype="<f4").astype(np.float64).reshape(shape)
        if not np.all(np.isfinite(arr)):
            raise InvalidModelError(f"non-finite values in {what}")
        return arr


def loads(data: bytes) -> Model:
    rd = _Reader(data)
    magic, version, kind_code, d, V, L_max, N, r = _HEADER.unpack(rd.take(_HEADER.size, "header"))
    if magic != MAGIC or version != VERSION:
        raise BadHeaderError("bad magic/version")
    kinds = {v: k for k, v in KIND_CODES.items()}
    if kind_code not in kinds:
        raise BadHeaderError(f"unknown model kind code {kind_code}")
    kind = kinds[kind_code]
    if d < 1 or V < 1 or L_max < 1:
        raise InvalidModelError(f"invalid shape d={d} V={V} L_max={L_max}")
    if not (np.isfinite(r) and r > 0):
        raise InvalidModelError(f"invalid radius {r}")

    (count,) = rd.unpack("<I", "vocab count")
    if count != V:
        raise InvalidModelError(f"vocab count {count} does not match V={V}")
    tokens = []
    for i in range(count):
        (n,) = rd.unpack("<I", f"length of token {i}")
        raw = bytes(rd.take(n, f"token {i}"))
        try:
            tokens.append(raw.decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise InvalidModelError(f"token {i} is not valid UTF-8") from exc
    try:
        vocab = Vocab(tokens=tuple(tokens))
    except ValueError as exc:
        raise InvalidModelError(f"invalid vocab: {exc}") from exc

    W = rd.floats((V, d), "W")
    b = rd.floats((V,), "b")
    if kind == "pos":
        dec = PosDecoder(W=W, b=b, P=rd.floats((L_max, d), "P"))
    else:
        dec = BowDecoder(W=W, b=b)

    (flag,) = rd.unpack("<B", "latent flag")
    if flag not in (0, 1) or (flag == 1) != (N > 0):
        raise InvalidModelError(f"latent flag {flag} inconsistent with N={N}")
    latents = None
    if flag:
        Z = rd.floats((N, d), "latents")
        worst = float(np.linalg.norm(Z, axis=1).max())
        if worst > r + NORM_TOL:
            raise InvalidModelError(f"latent norm {worst:.6g} exceeds radius {r}")
        latents = LatentStore(z=Z, r=float(r))
    if rd.pos != len(rd.data):
        raise InvalidModelError(f"{len(rd.data) - rd.pos} trailing bytes after model data")

    cfg = TrainConfig(model_kind=kind, d=d, r=float(r), L_max=L_max)
    return Model(vocab=vocab, decoder=dec, latents=latents, config=cfg)


def load(path: str | Path) -> Model:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise OSError(exc.errno, f"cannot read model file {path}: {exc.strerror}") from exc
    try:
        return loads(data)
    except ModelFileError as exc:
        raise type(exc)(f"{path}: {exc}") from None

"""Sentence embeddings from free per-sentence latent codes and a linear decoder."""

from gloss.corpus import EncodedCorpus, EncodedSentence, Vocab, build_vocab, encode, encode_corpus, tokenize
from gloss.latent import LatentStore, init_latents, project_ball
from gloss.trainer import Model, TrainConfig, infer_latent, infer_latents, train

__version__ = "0.1.0"

__all__ = [
    "EncodedCorpus",
    "EncodedSentence",
    "LatentStore",
    "Model",
    "TrainConfig",
    "Vocab",
    "build_vocab",
    "encode",
    "encode_corpus",
    "infer_latent",
    "infer_latents",
    "init_latents",
    "project_ball",
    "tokenize",
    "train",
]

"""``gloss`` command line: train, embed, eval-sts, probe, interpolate, nn, sweep.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from gloss import persistence
from gloss.corpus import build_vocab, encode_corpus, read_corpus
from gloss.evaluation import ProbeDataset, embed, eval_sts, probe_eval, probe_train, read_labelled, read_sts
from gloss.genlab import greedy_decode, interpolate, nearest_neighbors
from gloss.trainer import Model, TrainConfig, infer_latent, train


def _positive_checks(parser: argparse.ArgumentParser, args, names):
    for attr, label in names:
        value = getattr(args, attr, None)
        if value is not None and not value > 0:
            parser.error(f"{label} must be positive")


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("GLOSS_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise ValueError(f"GLOSS_SEED must be an integer, got {env!r}") from None


def _add_train_flags(p: argparse.ArgumentParser, model_required: bool = True):
    p.add_argument("--model", choices=("bow", "pos"), required=model_required, help="decoder variant")
    p.add_argument("--corpus", required=True, help="training text, one sentence per line")
    p.add_argument("--radius", type=float, default=2.0)
    p.add_argument("--lr", type=float, default=3e-4)
    p.add_argument("--clip", type=float, default=25.0)
    p.add_argument("--epochs", type=int, default=210)
    p.add_argument("--batch", type=int, default=128)
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--max-len", type=int, default=64)
    p.add_argument("--seed", type=int, default=None, help="falls back to $GLOSS_SEED, then 0")
    p.add_argument("--threads", type=int, default=1)


def _add_infer_flags(p: argparse.ArgumentParser):
    p.add_argument("--steps", type=int, default=250, help="inference steps per sentence")
    p.add_argument("--infer-lr", "--lr", dest="infer_lr", type=float, default=1.0, help="inference learning rate")
    p.add_argument("--infer-plain-sgd", action="store_true", help="plain gradient steps instead of Adam")


def _infer_kwargs(args) -> dict:
    return dict(steps=args.steps, lr=args.infer_lr, plain_sgd=args.infer_plain_sgd)


TRAIN_CHECKS = [
    ("radius", "radius"), ("lr", "lr"), ("clip", "clip"), ("epochs", "epochs"), ("batch", "batch"),
    ("min_count", "min-count"), ("max_len", "max-len"), ("threads", "threads"),
]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gloss", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    parser.subcommands = sub.choices

    p = sub.add_parser("train", help="train a model on a corpus")
    _add_train_flags(p)
    p.add_argument("--dim", type=int, default=100)
    p.add_argument("--loss-csv", help="write the per-epoch loss trace as CSV")
    p.add_argument("--out", required=True, help="model file to write")

    p = sub.add_parser("embed", help="infer embeddings for sentences")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    _add_infer_flags(p)
    p.add_argument("--binary", action="store_true", help="emit a raw little-endian float32 matrix")
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("eval-sts", help="Pearson x 100 on a sentence-pair file")
    p.add_argument("--model", required=True)
    p.add_argument("--pairs", required=True)
    _add_infer_flags(p)
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("probe", help="logistic-regression probe accuracy")
    p.add_argument("--model", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--l2", type=float, default=1e-3)
    p.add_argument("--probe-steps", type=int, default=1000)
    p.add_argument("--probe-lr", type=float, default=0.1)
    _add_infer_flags(p)
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("interpolate", help="decode interpolations between two sentences")
    p.add_argument("--model", required=True)
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--points", type=int, default=4)
    p.add_argument("--corpus", help="training corpus; sentences found there use their stored latents")
    _add_infer_flags(p)

    p = sub.add_parser("nn", help="nearest training sentences to a query")
    p.add_argument("--model", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("-k", type=int, default=5)
    p.add_argument("--corpus", help="training corpus, for printing sentences and stored-latent lookup")
    _add_infer_flags(p)

    p = sub.add_parser("sweep", help="probe accuracy across latent dimensionalities (CSV)")
    _add_train_flags(p)
    p.add_argument("--dims", default="100,300,700", help="comma-separated list")
    p.add_argument("--train", dest="probe_train", required=True)
    p.add_argument("--test", dest="probe_test", required=True)
    p.add_argument("--pairs", help="optional STS pair file, adds a pearson_x100 column")
    p.add_argument("--l2", type=float, default=1e-3)
    p.add_argument("--probe-steps", type=int, default=1000)
    p.add_argument("--probe-lr", type=float, default=0.1)
    p.add_argument("--steps", type=int, default=250)
    p.add_argument("--infer-lr", type=float, default=1.0)
    p.add_argument("--infer-plain-sgd", action="store_true")
    p.add_argument("--csv", help="output path (default stdout)")
    return parser


def _train_model(args, dim: int) -> tuple[Model, list[float]]:
    lines = read_corpus(args.corpus)
    if not lines:
        raise ValueError(f"{args.corpus}: empty corpus")
    vocab = build_vocab(lines, args.min_count)
    corpus = encode_corpus(lines, vocab, args.max_len)
    cfg = TrainConfig(
        model_kind=args.model, d=dim, r=args.radius, lr=args.lr, clip=args.clip, epochs=args.epochs,
        batch_size=args.batch, seed=_seed(args), L_max=args.max_len, threads=args.threads,
    )
    return train(corpus, cfg, vocab, progress=True)


def cmd_train(args) -> int:
    model, trace = _train_model(args, args.dim)
    persistence.save(model, args.out)
    if args.loss_csv:
        with open(args.loss_csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "loss"])
            w.writerows((k, repr(v)) for k, v in enumerate(trace))
    return 0


def _read_sentences(path) -> list[str]:
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            raise ValueError(f"{path}:{lineno}: blank line")
    return [line.rstrip("\r") for line in lines]


def _embed_checked(model: Model, sentences, path, **kwargs) -> np.ndarray:
    for lineno, s in enumerate(sentences, 1):
        try:
            model.encode(s)
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
    return embed(model, sentences, **kwargs)


def cmd_embed(args) -> int:
    model = persistence.load(args.model)
    sentences = _read_sentences(args.input)
    Z = _embed_checked(model, sentences, args.input, threads=args.threads, **_infer_kwargs(args))
    if args.binary:
        data = np.ascontiguousarray(Z, dtype="<f4").tobytes()
        if args.out:
            Path(args.out).write_bytes(data)
        else:
            sys.stdout.buffer.write(data)
            sys.stdout.buffer.flush()
        return 0
    text = "".join(" ".join(repr(x) for x in row) + "\n" for row in Z.tolist())
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_eval_sts(args) -> int:
    model = persistence.load(args.model)
    pairs = read_sts(args.pairs)
    if len(pairs) < 2:
        raise ValueError("need at least 2 pairs")
    score = eval_sts(model, pairs, threads=args.threads, **_infer_kwargs(args))
    print(f"pearson_x100 {score:.1f}")
    return 0


def _probe_data(model: Model, path, label_ids, kwargs) -> ProbeDataset:
    labels, sents = read_labelled(path)
    unknown = sorted(set(labels) - set(label_ids))
    if unknown:
        raise ValueError(f"{path}: labels not seen in training data: {unknown}")
    X = _embed_checked(model, sents, path, **kwargs)
    return ProbeDataset(X, np.array([label_ids[x] for x in labels], dtype=np.int64), len(label_ids))


def run_probe(model: Model, train_path, test_path, l2, probe_steps, probe_lr, **kwargs) -> float:
    train_labels, _ = read_labelled(train_path)
    label_ids = {lab: i for i, lab in enumerate(sorted(set(train_labels)))}
    tr = _probe_data(model, train_path, label_ids, kwargs)
    te = _probe_data(model, test_path, label_ids, kwargs)
    weights = probe_train(tr, l2=l2, steps=probe_steps, lr=probe_lr)
    return probe_eval(weights, te)


def cmd_probe(args) -> int:
    model = persistence.load(args.model)
    acc = run_probe(model, args.train, args.test, args.l2, args.probe_steps, args.probe_lr,
                    threads=args.threads, **_infer_kwargs(args))
    print(f"accuracy {acc:.4f}")
    return 0


def _latent_for(model: Model, sentence: str, corpus_lines, kwargs) -> np.ndarray:
    """Stored latent when ``sentence`` is a training sentence, else an inferred one."""
    if corpus_lines is not None and model.latents is not None:
        try:
            return model.latents.z[corpus_lines.index(sentence.strip())]
        except ValueError:
            pass
    return infer_latent(model, sentence, **kwargs)


def _corpus_for(model: Model, path) -> list[str] | None:
    if path is None:
        return None
    lines = read_corpus(path)
    if model.latents is None or len(lines) != model.latents.N:
        raise ValueError(f"{path}: corpus does not match the model's training sentences")
    return lines


def point_labels(n: int) -> list[str]:
    if n <= 26:
        return [f"({chr(ord('a') + i)})" for i in range(n)]
    return [f"({i + 1})" for i in range(n)]


def interpolation_table(model: Model, src: str, tgt: str, points: int, corpus_lines=None, **kwargs):
    """Rows of (label, decoded text): src, the interpolation points, tgt."""
    z_src = _latent_for(model, src, corpus_lines, kwargs)
    z_tgt = _latent_for(model, tgt, corpus_lines, kwargs)
    n_src = len(model.encode(src))
    n_tgt = len(model.encode(tgt))
    rows = [("src", greedy_decode(model, z_src, n_src))]
    for k, label in enumerate(point_labels(points), 1):
        z = interpolate(z_src, z_tgt, k / (points + 1), model.r)
        rows.append((label, greedy_decode(model, z, n_src)))
    rows.append(("tgt", greedy_decode(model, z_tgt, n_tgt)))
    return rows


def cmd_interpolate(args) -> int:
    model = persistence.load(args.model)
    if model.kind != "pos":
        raise ValueError("generation requires positional model")
    corpus_lines = _corpus_for(model, args.corpus)
    for label, toks in interpolation_table(model, args.src, args.tgt, args.points, corpus_lines, **_infer_kwargs(args)):
        print(f"{label}\t{' '.join(toks)}")
    return 0


def cmd_nn(args) -> int:
    model = persistence.load(args.model)
    corpus_lines = _corpus_for(model, args.corpus)
    z = _latent_for(model, args.query, corpus_lines, _infer_kwargs(args))
    for rank, (idx, cos) in enumerate(nearest_neighbors(model, z, args.k), 1):
        text = f"\t{corpus_lines[idx]}" if corpus_lines is not None else ""
        print(f"{rank}\t{idx}\t{cos:.6f}{text}")
    return 0


def cmd_sweep(args) -> int:
    try:
        dims = [int(x) for x in args.dims.split(",") if x.strip()]
    except ValueError:
        raise ValueError(f"--dims must be comma-separated integers, got {args.dims!r}") from None
    if not dims or min(dims) < 1:
        raise ValueError("--dims must list positive integers")
    pairs = read_sts(args.pairs) if args.pairs else None
    kwargs = dict(steps=args.steps, lr=args.infer_lr, plain_sgd=args.infer_plain_sgd, threads=args.threads)
    out = open(args.csv, "w", newline="") if args.csv else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["dim", "accuracy"] + (["pearson_x100"] if pairs else []))
        for dim in dims:
            model, _ = _train_model(args, dim)
            acc = run_probe(model, args.probe_train, args.probe_test, args.l2, args.probe_steps, args.probe_lr, **kwargs)
            row = [dim, f"{acc:.4f}"]
            if pairs:
                row.append(f"{eval_sts(model, pairs, **kwargs):.1f}")
            w.writerow(row)
            out.flush()
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


COMMANDS = {
    "train": cmd_train,
    "embed": cmd_embed,
    "eval-sts": cmd_eval_sts,
    "probe": cmd_probe,
    "interpolate": cmd_interpolate,
    "nn": cmd_nn,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    sub = parser.subcommands[args.command]
    if args.command in ("train", "sweep"):
        _positive_checks(sub, args, TRAIN_CHECKS + [("dim", "dim")])
    _positive_checks(sub, args, [
        ("steps", "steps"), ("infer_lr", "lr"), ("points", "points"), ("k", "k"), ("threads", "threads"),
        ("probe_steps", "probe-steps"), ("probe_lr", "probe-lr"),
    ])
    if getattr(args, "l2", 0) < 0:
        sub.error("l2 must be non-negative")
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"gloss {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

import csv

import numpy as np
import pytest

from gloss import persistence
from gloss.cli import main
from gloss.evaluation import StsPair, sts_scores
from gloss.genlab import greedy_decode
from gloss.trainer import infer_latent


@pytest.fixture(scope="module")
def files(tmp_path_factory, tiny_lines, tiny_bow, tiny_pos):
    d = tmp_path_factory.mktemp("cli")
    (d / "corpus.txt").write_text("\n".join(tiny_lines) + "\n", encoding="utf-8")
    persistence.save(tiny_bow, d / "bow.glos")
    persistence.save(tiny_pos, d / "pos.glos")
    return d


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_train_happy_path(tmp_path, files, capsys):
    out = tmp_path / "m.glos"
    loss = tmp_path / "loss.csv"
    code, _, err = run(capsys, "train", "--model", "bow", "--corpus", files / "corpus.txt", "--dim", 64,
                       "--epochs", 50, "--out", out, "--loss-csv", loss)
    assert code == 0
    assert persistence.load(out).config.d == 64
    assert "epoch 49 loss " in err
    rows = list(csv.reader(loss.open()))
    assert rows[0] == ["epoch", "loss"] and len(rows) == 51


def test_train_missing_model_flag(tmp_path, files, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["train", "--corpus", str(files / "corpus.txt"), "--out", str(tmp_path / "m")])
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_train_dim_zero(tmp_path, files, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["train", "--model", "bow", "--corpus", str(files / "corpus.txt"), "--dim", "0", "--out", str(tmp_path / "m")])
    assert exc.value.code == 2
    assert "dim must be positive" in capsys.readouterr().err


def test_train_missing_corpus_is_runtime_error(tmp_path, capsys):
    code, _, err = run(capsys, "train", "--model", "bow", "--corpus", tmp_path / "nope.txt", "--out", tmp_path / "m")
    assert code == 1 and "nope.txt" in err


def test_train_seed_from_env(tmp_path, files, capsys, monkeypatch):
    args = ["train", "--model", "bow", "--corpus", files / "corpus.txt", "--dim", 4, "--epochs", 2]
    monkeypatch.setenv("GLOSS_SEED", "5")
    run(capsys, *args, "--out", tmp_path / "a")
    run(capsys, *args, "--seed", 5, "--out", tmp_path / "b")
    run(capsys, *args, "--seed", 6, "--out", tmp_path / "c")
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()
    assert (tmp_path / "a").read_bytes() != (tmp_path / "c").read_bytes()


def test_embed_lines_and_determinism(tmp_path, files, capsys, tiny_lines):
    inp = tmp_path / "in.txt"
    inp.write_text("\n".join(tiny_lines[:3]) + "\n", encoding="utf-8")
    code, out1, _ = run(capsys, "embed", "--model", files / "bow.glos", "--input", inp)
    assert code == 0
    rows = out1.splitlines()
    assert len(rows) == 3 and all(len(r.split()) == 16 for r in rows)
    _, out2, _ = run(capsys, "embed", "--model", files / "bow.glos", "--input", inp)
    assert out1 == out2
    model = persistence.load(files / "bow.glos")
    parsed = np.array([[float(x) for x in r.split()] for r in rows])
    np.testing.assert_allclose(parsed[0], infer_latent(model, tiny_lines[0]), rtol=1e-12, atol=1e-14)


def test_embed_binary(tmp_path, files, capsys, tiny_lines):
    inp = tmp_path / "in.txt"
    inp.write_text("\n".join(tiny_lines[:2]), encoding="utf-8")
    out = tmp_path / "emb.f32"
    assert run(capsys, "embed", "--model", files / "pos.glos", "--input", inp, "--binary", "--out", out)[0] == 0
    Z = np.frombuffer(out.read_bytes(), dtype="<f4").reshape(2, 32)
    model = persistence.load(files / "pos.glos")
    np.testing.assert_allclose(Z[1], infer_latent(model, tiny_lines[1]).astype(np.float32), rtol=1e-6)


def test_embed_blank_line_names_line(tmp_path, files, capsys):
    inp = tmp_path / "in.txt"
    inp.write_text("s0w1 s1w2\n\ns0w3\n", encoding="utf-8")
    code, _, err = run(capsys, "embed", "--model", files / "bow.glos", "--input", inp)
    assert code == 1 and "in.txt:2" in err


def test_embed_unreadable(tmp_path, files, capsys):
    code, _, _ = run(capsys, "embed", "--model", tmp_path / "missing.glos", "--input", tmp_path / "x")
    assert code == 1


def test_embed_plain_sgd_flag(tmp_path, files, capsys):
    inp = tmp_path / "in.txt"
    inp.write_text("s0w1 s1w2\n", encoding="utf-8")
    code, out, _ = run(capsys, "embed", "--model", files / "pos.glos", "--input", inp, "--infer-plain-sgd",
                       "--lr", 0.05, "--steps", 10)
    assert code == 0 and len(out.split()) == 32


def test_eval_sts_perfect(tmp_path, files, capsys, tiny_lines):
    model = persistence.load(files / "bow.glos")
    raw = [StsPair(tiny_lines[i], tiny_lines[i + 3], 0.0) for i in range(10)]
    scores = sts_scores(model, raw)
    p = tmp_path / "sts.tsv"
    p.write_text("".join(f"{x.sent_a}\t{x.sent_b}\t{repr(5 * float(s))}\n" for x, s in zip(raw, scores)), encoding="utf-8")
    code, out, err = run(capsys, "eval-sts", "--model", files / "bow.glos", "--pairs", p)
    assert code == 0, err
    assert out == "pearson_x100 100.0\n"


def test_eval_sts_single_pair(tmp_path, files, capsys):
    p = tmp_path / "sts.tsv"
    p.write_text("s0w1\ts0w2\t3.0\n", encoding="utf-8")
    code, _, err = run(capsys, "eval-sts", "--model", files / "bow.glos", "--pairs", p)
    assert code == 1 and "need at least 2 pairs" in err


def test_eval_sts_malformed(tmp_path, files, capsys):
    p = tmp_path / "sts.tsv"
    p.write_text("s0w1\ts0w2\t3.0\ns0w1\ts0w2\tabc\n", encoding="utf-8")
    code, _, err = run(capsys, "eval-sts", "--model", files / "bow.glos", "--pairs", p)
    assert code == 1 and "sts.tsv:2" in err


def test_probe_command(tmp_path, files, capsys, tiny_lines):
    # label by the first word's pool index parity: recoverable from the latent
    def label(s):
        return "even" if int(s.split()[0][3:]) % 2 == 0 else "odd"

    tr = tmp_path / "tr.tsv"
    tr.write_text("".join(f"{label(s)}\t{s}\n" for s in tiny_lines), encoding="utf-8")
    code, out, _ = run(capsys, "probe", "--model", files / "bow.glos", "--train", tr, "--test", tr)
    assert code == 0
    assert out.startswith("accuracy ")
    assert 0.0 <= float(out.split()[1]) <= 1.0


def test_probe_unknown_test_label(tmp_path, files, capsys):
    tr = tmp_path / "tr.tsv"
    tr.write_text("a\ts0w1\nb\ts0w2\n", encoding="utf-8")
    te = tmp_path / "te.tsv"
    te.write_text("c\ts0w1\n", encoding="utf-8")
    code, _, err = run(capsys, "probe", "--model", files / "bow.glos", "--train", tr, "--test", te)
    assert code == 1 and "not seen" in err


def test_interpolate_shape(files, capsys, tiny_lines, tiny_pos):
    src, tgt = tiny_lines[0], tiny_lines[1]
    code, out, _ = run(capsys, "interpolate", "--model", files / "pos.glos", "--src", src, "--tgt", tgt, "--points", 4)
    assert code == 0
    lines = out.splitlines()
    assert [ln.split("\t")[0] for ln in lines] == ["src", "(a)", "(b)", "(c)", "(d)", "tgt"]
    model = persistence.load(files / "pos.glos")
    z_src = infer_latent(model, src)
    assert lines[0].split("\t")[1].split() == greedy_decode(model, z_src, len(model.encode(src)))


def test_interpolate_rejects_bow(files, capsys):
    code, _, err = run(capsys, "interpolate", "--model", files / "bow.glos", "--src", "s0w1", "--tgt", "s0w2")
    assert code == 1 and "positional" in err


def test_nn_query_training_sentence_first(files, capsys, tiny_lines):
    q = tiny_lines[7]
    code, out, _ = run(capsys, "nn", "--model", files / "bow.glos", "--query", q, "-k", 3, "--corpus", files / "corpus.txt")
    assert code == 0
    first = out.splitlines()[0].split("\t")
    assert first[0] == "1" and tiny_lines[int(first[1])] == q and first[3] == q


def test_nn_inferred_query(files, capsys, tiny_lines):
    code, out, _ = run(capsys, "nn", "--model", files / "pos.glos", "--query", tiny_lines[7], "-k", 5)
    assert code == 0 and len(out.splitlines()) == 5


def test_nn_k_too_large(files, capsys):
    code, _, err = run(capsys, "nn", "--model", files / "bow.glos", "--query", "s0w1", "-k", 1000)
    assert code == 1 and "k must be" in err


def test_sweep_csv(tmp_path, files, capsys, tiny_lines):
    tr = tmp_path / "tr.tsv"
    tr.write_text("".join(f"{i % 2}\t{s}\n" for i, s in enumerate(tiny_lines)), encoding="utf-8")
    sts = tmp_path / "sts.tsv"
    sts.write_text("".join(f"{tiny_lines[i]}\t{tiny_lines[i + 1]}\t{i % 3}\n" for i in range(6)), encoding="utf-8")
    out = tmp_path / "sweep.csv"
    code, _, _ = run(capsys, "sweep", "--model", "bow", "--corpus", files / "corpus.txt", "--dims", "4,8",
                     "--epochs", 3, "--train", tr, "--test", tr, "--pairs", sts, "--steps", 5, "--csv", out)
    assert code == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["dim", "accuracy", "pearson_x100"]
    assert [r[0] for r in rows[1:]] == ["4", "8"]


def test_module_entry_point():
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "gloss", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "interpolate" in res.stdout

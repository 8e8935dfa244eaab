import json

from faqembed.cli import main


def write_pairs(path, pairs):
    with open(path, "w", encoding="utf-8") as f:
        for query, positive in pairs:
            f.write(json.dumps({"query": query, "positive": positive}) + "\n")


def test_train_export_cycle(tmp_path, capsys):
    pairs = [(f"tok{i} tok{i + 1}", f"tok{i} tok{i + 1} tok{i + 2}") for i in range(12)]
    train_path = tmp_path / "train.jsonl"
    val_path = tmp_path / "val.jsonl"
    write_pairs(train_path, pairs[:9])
    write_pairs(val_path, pairs[9:])

    checkpoint = tmp_path / "ckpt"
    rc = main([
        "train", "--train-pairs", str(train_path), "--val-pairs", str(val_path),
        "--model", "intfloat/e5-small", "--out", str(checkpoint),
        "--max-steps", "6", "--eval-steps", "3", "--hash-buckets", "256",
        "--learning-rate", "1e-3",
    ])
    assert rc == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["steps_run"] == 6
    assert (checkpoint / "weights.pt").exists()

    texts_path = tmp_path / "texts.jsonl"
    with open(texts_path, "w", encoding="utf-8") as f:
        f.write(json.dumps({"_id": "d1", "text": "tok1 tok2"}) + "\n")
        f.write(json.dumps({"_id": "d2", "text": "tok3 tok4"}) + "\n")
    out_vec = tmp_path / "docs.vec"
    rc = main([
        "export", "--checkpoint", str(checkpoint), "--texts", str(texts_path),
        "--kind", "passage", "--out", str(out_vec),
    ])
    assert rc == 0
    lines = out_vec.read_text(encoding="utf-8").splitlines()
    assert json.loads(lines[0])["count"] == 2


def test_train_unknown_model_exits_2(tmp_path, capsys):
    pairs_path = tmp_path / "p.jsonl"
    write_pairs(pairs_path, [("a b", "a b c")] * 4)
    rc = main([
        "train", "--train-pairs", str(pairs_path), "--val-pairs", str(pairs_path),
        "--model", "missing/model", "--out", str(tmp_path / "x"),
    ])
    assert rc == 2
    assert "unknown model" in capsys.readouterr().err

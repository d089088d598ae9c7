import json

import pytest

from ctaparse.cli import main, read_config
from ctaparse.corpus import FormatError

from conftest import run_pipeline


@pytest.mark.slow
def test_pipeline_outputs(cli_run):
    for d in ("graphs", "matches", "datasets", "models", "predictions", "kg", "reports"):
        assert any((cli_run / d).iterdir()), d
    man = json.loads((cli_run / "datasets" / "manifest.json").read_text())
    assert man["seed"] == 13 and man["k"] == 2 and man["portion"] == "4:2:1"
    assert set(man["sha256"]) >= {"split.json", "seq-train.jsonl", "pairs-train.jsonl"}
    assert man["counts"]["train"]["pairs"]["if"] == man["counts"]["train"]["pairs_before_sampling"]["if"]
    report = json.loads((cli_run / "reports" / "metrics.json").read_text())
    assert report["mention"]["f1"] >= 0.95 and report["relation"]["micro_f1"] >= 0.95
    assert report["matching"]["mention_accuracy"] == 1.0
    assert (cli_run / "reports" / "confusion.png").stat().st_size > 0
    assert (cli_run / "reports" / "metrics.tsv").read_text().startswith("metric\tvalue\n")


def test_predict_records(cli_run):
    split = json.loads((cli_run / "datasets" / "split.json").read_text())
    for doc in split["test"]:
        rec = json.loads((cli_run / "predictions" / f"{doc}.json").read_text())
        n = len(rec["spans"])
        assert len(rec["relations"]) == n * (n - 1)
        rows = [json.loads(x) for x in (cli_run / "predictions" / f"{doc}.pairs.jsonl").read_text().splitlines()]
        assert len(rows) == n * (n - 1)
        assert all(abs(sum(r["scores"].values()) - 1) < 1e-9 for r in rows)


def test_usage_error_exits_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["match", "--bogus"])
    assert exc.value.code == 1


def test_missing_input_exits_2(tmp_path, capsys):
    assert main(["train-seq", "--workdir", str(tmp_path)]) == 2
    assert "ctaparse:" in capsys.readouterr().err


def test_invalid_config_exits_3(tmp_path, capsys):
    assert main(["make-fixtures", "--workdir", str(tmp_path), "--threshold", "2"]) == 3
    assert main(["make-fixtures", "--workdir", str(tmp_path), "--seed", "abc"]) == 3


def test_malformed_protocol_exits_2(tmp_path, capsys):
    proto = tmp_path / "protocols"
    proto.mkdir()
    (proto / "d.txt").write_text("1. step one\n  1.1 child\n")
    assert main(["parse-protocol", "--workdir", str(tmp_path), "--protocols", str(proto)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nseed = 7\nmax-distance = none\nthreshold = 0.6  # inline\n")
    assert read_config(cfg) == {"seed": 7, "max_distance": None, "threshold": 0.6}
    cfg.write_text("colour = blue\n")
    with pytest.raises(FormatError):
        read_config(cfg)
    cfg.write_text("seed 7\n")
    with pytest.raises(FormatError):
        read_config(cfg)
    assert main(["make-fixtures", "--workdir", str(tmp_path), "--config", str(cfg)]) == 2


def test_config_precedence(tmp_path, monkeypatch):
    from ctaparse.cli import build_parser, resolve_config

    cfg = tmp_path / "run.cfg"
    cfg.write_text("seed = 7\nk = 1\n")
    args = build_parser().parse_args(["match", "--config", str(cfg)])
    assert (resolve_config(args).seed, resolve_config(args).k) == (7, 1)
    monkeypatch.setenv("CTAPARSE_SEED", "21")
    assert resolve_config(args).seed == 21
    args = build_parser().parse_args(["match", "--config", str(cfg), "--seed", "3", "--k", "3"])
    assert (resolve_config(args).seed, resolve_config(args).k) == (3, 3)


def test_env_overrides(tmp_path, monkeypatch):
    fx = tmp_path / "elsewhere"
    monkeypatch.setenv("CTAPARSE_FIXTURES", str(fx))
    monkeypatch.setenv("CTAPARSE_SEED", "5")
    assert main(["make-fixtures", "--workdir", str(tmp_path), "--n-docs", "4"]) == 0
    assert (fx / "transcripts").is_dir() and not (tmp_path / "fixtures").exists()
    other = tmp_path / "default"
    monkeypatch.delenv("CTAPARSE_FIXTURES")
    monkeypatch.delenv("CTAPARSE_SEED")
    main(["make-fixtures", "--workdir", str(other), "--n-docs", "4"])
    a = sorted(p.read_text() for p in (fx / "transcripts").iterdir())
    b = sorted(p.read_text() for p in (other / "fixtures" / "transcripts").iterdir())
    assert a != b


def test_train_re_rejects_k_mismatch(cli_run, tmp_path):
    out = tmp_path / "re.json"
    assert main(["train-re", "--workdir", str(cli_run), "--k", "1", "--out", str(out)]) == 3
    assert not out.exists()


def test_exact_match_method(tmp_path):
    codes = run_pipeline(tmp_path, ("make-fixtures", "parse-protocol", "match"), ("--match-method", "exact"))
    assert codes == [0, 0, 0]
    rows = [json.loads(x) for p in (tmp_path / "matches").iterdir() for x in p.read_text().splitlines()]
    assert rows and all(r["method"] in ("exact", None) for r in rows)


@pytest.mark.slow
def test_sweep_cli(tmp_path, capsys):
    assert run_pipeline(tmp_path, ("make-fixtures", "parse-protocol", "match"), ()) == [0, 0, 0]
    code = main(["sweep", "--workdir", str(tmp_path), "--ks", "0", "2", "--portions", "1:1:1", "--seeds", "2",
                 "--poolings", "masked-max", "--re-epochs", "20"])
    assert code == 0
    out = capsys.readouterr().out
    assert "Sampling portion 1:1:1" in out and "MaskMAX K=2" in out
    assert "monotone check skipped" in out
    for name in ("sweep-runs.tsv", "sweep-summary.tsv", "sweep.txt", "sweep-context.png"):
        assert (tmp_path / "reports" / name).stat().st_size > 0
    runs = (tmp_path / "reports" / "sweep-runs.tsv").read_text().splitlines()
    assert len(runs) == 1 + 2 * 2 * 2  # header + K x seeds x test sets

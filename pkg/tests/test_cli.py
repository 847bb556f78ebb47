import json

import pytest

from cli.main import EXIT_DATA, EXIT_OK, EXIT_USAGE, run_cli
from core.ast_tree import to_json
from core.minilang import parse_source

from .conftest import EMPTY_METHOD, LOOP_METHOD


def run(capsys, *argv):
    code = run_cli([str(arg) for arg in argv])
    return code, capsys.readouterr().out


def test_gen_is_stable_across_runs(tmp_path, capsys):
    first, second = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert run(capsys, "gen", "--n", 40, "--seed", 42, "--out", first)[0] == EXIT_OK
    assert run(capsys, "gen", "--n", 40, "--seed", 42, "--out", second)[0] == EXIT_OK
    assert first.read_bytes() == second.read_bytes()
    assert len(first.read_text().splitlines()) == 40


def test_gen_with_workers_matches_single_process(tmp_path, capsys):
    _, single = run(capsys, "gen", "--n", 30, "--workers", 1)
    _, pooled = run(capsys, "gen", "--n", 30, "--workers", 2)
    assert single == pooled


def test_unknown_flag_is_a_usage_error(tmp_path, capsys):
    out = tmp_path / "c.jsonl"
    assert run(capsys, "gen", "--n", 5, "--bogus", "--out", out)[0] == EXIT_USAGE
    assert not out.exists()


def test_missing_subcommand(capsys):
    assert run(capsys)[0] == EXIT_USAGE


def test_parse_prints_ast(tmp_path, capsys):
    source = tmp_path / "f.mini"
    source.write_text(EMPTY_METHOD)
    code, out = run(capsys, "parse", source)
    assert code == EXIT_OK
    assert json.loads(out) == {"kind": "MethodDeclaration", "value": "f", "children": [
        {"kind": "TypeName", "value": "void", "children": []}, {"kind": "Block", "children": []}]}


def test_parse_error_is_a_data_error(tmp_path, capsys):
    source = tmp_path / "bad.mini"
    source.write_text("void f( {")
    out_file = tmp_path / "ast.json"
    assert run(capsys, "parse", source, "--out", out_file)[0] == EXIT_DATA
    assert not out_file.exists()


def test_linearize_single_source(tmp_path, capsys):
    source = tmp_path / "f.mini"
    source.write_text(EMPTY_METHOD)
    code, out = run(capsys, "linearize", "--source", source, "--method", "sbt")
    record = json.loads(out)
    assert code == EXIT_OK
    assert record["method"] == "sbt"
    assert len(record["tokens"]) == 12


def test_linearize_corpus(corpus_file, small_corpus, capsys):
    code, out = run(capsys, "linearize", "--corpus", corpus_file, "--method", "pd")
    records = [json.loads(line) for line in out.splitlines()]
    assert code == EXIT_OK
    assert [r["id"] for r in records] == [ex.id for ex in small_corpus]


def test_relations_stats(tmp_path, capsys):
    source = tmp_path / "loop.mini"
    source.write_text(LOOP_METHOD)
    code, out = run(capsys, "relations", "--source", source, "--k-anc", 2, "--k-sib", 2, "--stats")
    report = json.loads(out)
    assert code == EXIT_OK
    assert {"n", "allowed_anc", "allowed_sib", "allowed_union", "reduction"} <= set(report)
    assert 0.0 < report["reduction"] < 1.0


def test_relations_pairs(tmp_path, capsys):
    source = tmp_path / "f.mini"
    source.write_text(EMPTY_METHOD)
    _, out = run(capsys, "relations", "--source", source)
    record = json.loads(out)
    assert [0, 1, 1] in record["anc"]
    assert [1, 2, 1] in record["sib"]


def test_relations_rejects_zero_k(tmp_path, capsys):
    source = tmp_path / "f.mini"
    source.write_text(EMPTY_METHOD)
    assert run(capsys, "relations", "--source", source, "--k-anc", 0)[0] == EXIT_USAGE


def test_stats(corpus_file, capsys):
    code, out = run(capsys, "stats", "--corpus", corpus_file, "--count-scores")
    report = json.loads(out)
    assert code == EXIT_OK
    lengths = report["lengths"]
    assert lengths["sbt"]["mean_length"] == pytest.approx(4 * lengths["mean_nodes"])
    assert lengths["pot"]["mean_length"] == pytest.approx(lengths["mean_nodes"])
    counted = report["sparsity"]["counted"]
    assert counted["unmasked"] <= counted["dense"] <= counted["materialized"]


def test_train_eval_summarize(tmp_path, corpus_file, config_file, capsys):
    checkpoint = tmp_path / "ckpt"
    code, out = run(capsys, "train", "--config", config_file, "--corpus", corpus_file, "--out", checkpoint,
                    "--quiet")
    assert code == EXIT_OK
    assert json.loads(out)["steps"] == 3

    predictions = tmp_path / "pred.jsonl"
    code, first = run(capsys, "eval", "--checkpoint", checkpoint, "--corpus", corpus_file,
                      "--predictions", predictions, "--quiet")
    assert code == EXIT_OK
    report = json.loads(first)
    assert set(report) == {"bleu", "meteor_exact", "rouge_l", "n_pairs"}
    assert report["n_pairs"] == len(predictions.read_text().splitlines())
    _, second = run(capsys, "eval", "--checkpoint", checkpoint, "--corpus", corpus_file, "--quiet")
    assert first == second

    source = tmp_path / "f.mini"
    source.write_text(LOOP_METHOD)
    code, out = run(capsys, "summarize", "--checkpoint", checkpoint, "--source", source)
    assert code == EXIT_OK
    assert out.endswith("\n")


def test_train_flags_override_config(tmp_path, corpus_file, config_file, capsys):
    code, out = run(capsys, "train", "--config", config_file, "--corpus", corpus_file,
                    "--out", tmp_path / "ck", "--steps", 2, "--method", "sbt", "--quiet")
    assert code == EXIT_OK
    assert json.loads(out)["steps"] == 2
    stored = json.loads((tmp_path / "ck" / "config.json").read_text())
    assert stored["training"]["method"] == "sbt"


def test_train_with_unknown_config_key(tmp_path, corpus_file, capsys):
    config = tmp_path / "c.json"
    config.write_text(json.dumps({"model": {"depth": 2}}))
    code, _ = run(capsys, "train", "--config", config, "--corpus", corpus_file, "--out", tmp_path / "ck")
    assert code == EXIT_DATA
    assert not (tmp_path / "ck").exists()


def test_eval_missing_checkpoint(tmp_path, corpus_file, capsys):
    assert run(capsys, "eval", "--checkpoint", tmp_path / "none", "--corpus", corpus_file)[0] == EXIT_DATA


def test_gradcheck(capsys):
    code, out = run(capsys, "gradcheck", "--max-coords", 20)
    assert code == EXIT_OK
    assert json.loads(out)["passed"] is True


def test_timing(capsys):
    code, out = run(capsys, "timing", "--n", 30, "--max-nodes", 40)
    rows = json.loads(out)["rows"]
    assert code == EXIT_OK
    assert [row["method"] for row in rows] == ["pot", "sbt", "pd"]
    assert all(row["trees"] == 30 for row in rows)


def test_parse_deep_expression(tmp_path, capsys):
    source = tmp_path / "deep.mini"
    source.write_text("int f(int a){return " + "+".join(["a"] * 1500) + ";}")
    code, out = run(capsys, "parse", source)
    assert code == EXIT_OK
    assert out == to_json(parse_source(source.read_text())) + "\n"

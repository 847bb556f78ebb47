from __future__ import annotations

import json

import pytest

from core.ast_tree import build_tree
from core.corpus import generate_corpus, write_corpus
from core.trainer import tiny_model_config

EMPTY_METHOD = "void f(){}"

SUM_METHOD = """
int add(int a, int b) {
    return a + b;
}
"""

LOOP_METHOD = """
int total(int n) {
    int acc = 0;
    int i = 0;
    while (i < n) {
        acc = acc + i;
        i = i + 1;
    }
    return acc;
}
"""


@pytest.fixture
def three_node_tree():
    # MethodDeclaration -> [TypeName, Block]
    return build_tree([("MethodDeclaration", "f", [1, 2]), ("TypeName", "void", []), ("Block", None, [])])


@pytest.fixture
def chain_tree():
    return build_tree([("A", None, [1]), ("B", None, [2]), ("C", None, [3]), ("D", None, [])])


@pytest.fixture
def tiny_config():
    return tiny_model_config()


@pytest.fixture
def small_corpus():
    return generate_corpus(24, seed=7, size_class="small")


@pytest.fixture
def corpus_file(tmp_path, small_corpus):
    path = tmp_path / "corpus.jsonl"
    write_corpus(path, small_corpus)
    return path


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({
        "model": {"d_model": 16, "heads": 2, "enc_layers": 1, "dec_layers": 1, "d_ff": 32,
                  "max_summary_len": 24, "dropout": 0.0},
        "training": {"steps": 3, "batch_size": 4, "min_freq": 1},
    }), encoding="utf-8")
    return path

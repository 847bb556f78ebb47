import json

import pytest

from core.ast_tree import (
    build_tree,
    from_json,
    from_obj,
    is_ancestor,
    random_tree,
    root_path,
    to_json,
    to_obj,
)
from core.errors import CycleError, DanglingChildError, ForestError, SchemaError


def test_build_tree_computes_depth_and_size(three_node_tree):
    assert three_node_tree.n == 3
    assert three_node_tree.depth == (0, 1, 1)
    assert three_node_tree.size == (3, 1, 1)
    assert three_node_tree.child_index == (0, 0, 1)
    assert three_node_tree.root.label == "MethodDeclaration:f"
    assert three_node_tree.leaves() == [1, 2]


def test_build_tree_renumbers_to_preorder():
    # root listed last, children out of order in storage
    tree = build_tree([("Leaf", "x", []), ("Mid", None, [0]), ("Root", None, [1, 3]), ("Other", None, [])])
    assert [node.kind for node in tree.nodes] == ["Root", "Mid", "Leaf", "Other"]
    assert tree.nodes[2].parent == 1
    assert tree.nodes[3].parent == 0


def test_single_node_tree():
    tree = build_tree([("Block", None, [])])
    assert tree.n == 1
    assert tree.height() == 0
    assert tree.leaves() == [0]


def test_self_loop_is_a_cycle():
    with pytest.raises(CycleError):
        build_tree([("A", None, [0])])


def test_two_node_cycle():
    with pytest.raises(CycleError):
        build_tree([("A", None, [1]), ("B", None, [0])])


def test_shared_child_is_a_forest_error():
    with pytest.raises(ForestError):
        build_tree([("A", None, [1, 2]), ("B", None, [2]), ("C", None, [])])


def test_two_roots_is_a_forest_error():
    with pytest.raises(ForestError):
        build_tree([("A", None, []), ("B", None, [])])


def test_empty_input_is_a_forest_error():
    with pytest.raises(ForestError):
        build_tree([])


def test_dangling_child():
    with pytest.raises(DanglingChildError) as info:
        build_tree([("A", None, [5])])
    assert info.value.child == 5


def test_bad_kind_type():
    with pytest.raises(SchemaError):
        build_tree([(3, None, [])])


def test_is_ancestor_is_strict(chain_tree):
    assert is_ancestor(chain_tree, 0, 3)
    assert is_ancestor(chain_tree, 1, 2)
    assert not is_ancestor(chain_tree, 2, 2)
    assert not is_ancestor(chain_tree, 3, 0)


def test_is_ancestor_out_of_range(chain_tree):
    with pytest.raises(IndexError):
        is_ancestor(chain_tree, 0, 9)


def test_root_path(chain_tree):
    assert root_path(chain_tree, 3) == [0, 1, 2, 3]
    assert root_path(chain_tree, 0) == [0]


def test_to_obj_key_order(three_node_tree):
    obj = to_obj(three_node_tree)
    assert list(obj) == ["kind", "value", "children"]
    assert list(obj["children"][1]) == ["kind", "children"]


def test_json_round_trip_preserves_tree():
    tree = random_tree(3, 40, 4)
    assert from_json(to_json(tree)) == tree


def test_from_obj_reports_path():
    with pytest.raises(SchemaError) as info:
        from_obj({"kind": "A", "children": [{"kind": "B"}, {"value": "x"}]})
    assert info.value.path == "$.children[1]"


def test_from_obj_rejects_non_string_value():
    with pytest.raises(SchemaError):
        from_obj({"kind": "A", "value": 3})


def test_from_json_invalid_text():
    with pytest.raises(SchemaError):
        from_json("{not json")


def test_from_json_accepts_missing_children():
    tree = from_json(json.dumps({"kind": "Identifier", "value": "x"}))
    assert tree.n == 1
    assert tree.root.label == "Identifier:x"


@pytest.mark.parametrize("seed", range(5))
def test_random_tree_is_deterministic_and_bounded(seed):
    tree = random_tree(seed, 60, 3)
    assert tree == random_tree(seed, 60, 3)
    assert tree.n == 60
    assert all(len(node.children) <= 3 for node in tree.nodes)
    for node in tree.nodes:
        for child in node.children:
            assert is_ancestor(tree, node.id, child)


def test_to_json_matches_json_dumps(three_node_tree):
    tree = random_tree(8, 60, 3)
    for sample in (three_node_tree, tree):
        assert to_json(sample) == json.dumps(to_obj(sample), ensure_ascii=False)


def test_deep_chain_round_trips_without_recursion():
    depth = 5000
    tree = build_tree([("Block", None, [i + 1]) for i in range(depth - 1)] + [("Identifier", "x", [])])
    assert tree.height() == depth - 1
    assert from_obj(to_obj(tree)) == tree
    text = to_json(tree)
    assert text.count('{"kind": ') == depth
    assert text.endswith("]}" * depth)


def test_to_obj_of_a_subtree(three_node_tree):
    assert to_obj(three_node_tree, 2) == {"kind": "Block", "children": []}

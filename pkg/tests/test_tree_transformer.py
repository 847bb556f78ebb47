import math
from dataclasses import replace

import numpy as np
import pytest

from core.ast_tree import build_tree, random_tree
from core.errors import ConfigError, LengthError, ShapeError
from core.linearizer import pot, sbt
from core.relations import build_relations, clip
from core.tensor import Adam, Tensor, mul, no_grad, sum_all
from core.trainer import gradcheck_tiny_model, tiny_batch
from core.tree_transformer import (
    AttentionCounter,
    ForwardTrace,
    ModelConfig,
    ModelInput,
    collate,
    compute_loss,
    decoder_forward,
    encoder_forward,
    greedy_decode,
    init_params,
    parameter_shapes,
    train_step,
    tree_mha,
)
from core.vocab import BOS_ID, EOS_ID, PAD_ID


def make_input(seed, nodes, config, linearize=pot, summary_len=4):
    rng = np.random.default_rng(seed)
    tree = random_tree(seed, nodes, 3)
    seq = linearize(tree)
    code = tuple(int(i) for i in rng.integers(4, config.code_vocab_size, size=len(seq)))
    words = tuple(int(i) for i in rng.integers(4, config.summary_vocab_size, size=summary_len))
    return ModelInput(code, build_relations(tree, seq, config.k_anc, config.k_sib), (BOS_ID,) + words + (EOS_ID,))


def test_config_validation():
    with pytest.raises(ConfigError):
        ModelConfig(d_model=10, heads=4, code_vocab_size=5, summary_vocab_size=5).validate()
    with pytest.raises(ConfigError) as info:
        ModelConfig(code_vocab_size=5, summary_vocab_size=5, score_mode="dense").validate()
    assert info.value.key == "score_mode"
    with pytest.raises(ConfigError):
        ModelConfig.from_dict({"d_model": 8, "width": 3})


def test_relative_tables_have_two_k_plus_one_rows(tiny_config):
    config = replace(tiny_config, k_anc=3, k_sib=2)
    shapes = parameter_shapes(config)
    assert shapes["enc0.anc.rel_key"] == (7, config.d_head)
    assert shapes["enc0.sib.rel_query"] == (5, config.d_head)
    assert shapes["enc0.wo"] == (2 * config.d_model, config.d_model)


def test_shared_relative_tables(tiny_config):
    config = replace(tiny_config, enc_layers=2, share_relative_tables=True)
    names = list(parameter_shapes(config))
    assert "enc.anc.rel_key" in names
    assert not any(name.startswith("enc1.anc.rel_") for name in names)


def test_shaw_mode_omits_query_side_tables(tiny_config):
    default = parameter_shapes(tiny_config)
    shaw = parameter_shapes(replace(tiny_config, score_mode="shaw"))
    assert set(default) - set(shaw) == {name for name in default if name.endswith(".rel_query")}
    assert set(shaw) <= set(default)
    assert all(shaw[name] == default[name] for name in shaw)
    shared = parameter_shapes(replace(tiny_config, score_mode="shaw", share_relative_tables=True))
    assert not any(name.endswith(".rel_query") for name in shared)


def test_shaw_mode_trains_every_parameter(tiny_config):
    config = replace(tiny_config, score_mode="shaw")
    params = init_params(config, 0)
    compute_loss(tiny_batch(config), params, config).backward()
    assert all(params[name].grad is not None for name in params)


def test_init_is_seeded(tiny_config):
    first, second = init_params(tiny_config, 3), init_params(tiny_config, 3)
    for (name, a), (_, b) in zip(first.items(), second.items()):
        assert np.array_equal(a.data, b.data), name
    assert first["enc0.ln1.gain"].data.tolist() == [1.0] * tiny_config.d_model
    assert not first["out_bias"].data.any()


def test_collate_pads_outside_allowed_sets(tiny_config):
    short, long = make_input(0, 5, tiny_config), make_input(1, 9, tiny_config)
    batch = collate([short, long], tiny_config.k_anc, tiny_config.k_sib)
    assert batch.code_ids.shape == (2, 9)
    assert batch.code_ids[0, 5:].tolist() == [PAD_ID] * 4
    assert not batch.anc_mask[0, 5:].any() and not batch.anc_mask[0, :, 5:].any()
    assert not batch.sib_mask[0, 5:].any()
    assert batch.summary_in[0, 0] == BOS_ID
    assert EOS_ID in batch.summary_out[0].tolist()


def test_collate_truncates_summary_but_keeps_eos(tiny_config):
    item = make_input(0, 5, tiny_config, summary_len=20)
    batch = collate([item], tiny_config.k_anc, tiny_config.k_sib, max_summary_len=6)
    assert batch.summary_in.shape == (1, 6)
    assert batch.summary_out[0, -1] == EOS_ID


def test_collate_rejects_short_pad(tiny_config):
    with pytest.raises(ShapeError):
        collate([make_input(0, 9, tiny_config)], 5, 5, pad_to=4)


def test_model_input_checks_relation_size(tiny_config):
    item = make_input(0, 5, tiny_config)
    with pytest.raises(ShapeError):
        ModelInput(item.code_ids[:-1], item.relations, item.summary_ids)


@pytest.mark.parametrize("mode", ["disentangled", "shaw"])
def test_attention_rows_sum_to_one_and_masked_weights_are_zero(tiny_config, mode):
    config = replace(tiny_config, score_mode=mode)
    params = init_params(config, 1)
    batch = collate([make_input(2, 7, config), make_input(3, 12, config, sbt)], config.k_anc, config.k_sib)
    trace = ForwardTrace()
    with no_grad():
        encoder_forward(batch, params, config, trace=trace)
    for branch, mask in (("anc", batch.anc_mask), ("sib", batch.sib_mask)):
        probs = trace.probabilities[f"enc0.{branch}"]
        real = batch.code_mask
        sums = probs.sum(axis=-1)
        assert np.all(np.abs(sums - 1.0) < 1e-9)
        disallowed = ~mask & real[:, :, None]
        assert np.all(probs.transpose(0, 2, 3, 1)[disallowed] == 0.0)


def test_padding_does_not_change_real_rows(tiny_config):
    params = init_params(tiny_config, 4)
    item = make_input(5, 10, tiny_config)
    with no_grad():
        alone = encoder_forward(collate([item], 5, 5), params, tiny_config).data
        padded = encoder_forward(collate([item], 5, 5, pad_to=17), params, tiny_config).data
    assert np.abs(alone[0] - padded[0, :10]).max() < 1e-9


@pytest.mark.parametrize("seed", range(8))
def test_output_rows_do_not_depend_on_disallowed_positions(tiny_config, seed):
    config = replace(tiny_config, k_anc=1, k_sib=1)
    params = init_params(config, seed)
    item = make_input(seed, 14, config)
    batch = collate([item], config.k_anc, config.k_sib)
    allowed = item.relations.allowed_union
    row = seed % len(item.code_ids)
    x = Tensor(np.random.default_rng(seed).normal(size=(1, len(item.code_ids), config.d_model)),
               requires_grad=True)
    out = encoder_forward(batch, params, config, embedded=x)
    selector = np.zeros(out.shape)
    selector[0, row] = np.random.default_rng(seed + 1).normal(size=config.d_model)
    sum_all(mul(out, Tensor(selector))).backward()
    for col in range(len(item.code_ids)):
        if (row, col) not in allowed:
            assert np.abs(x.grad[0, col]).max() <= 1e-9


def test_counter_matches_relation_counts(tiny_config):
    item = make_input(6, 20, tiny_config)
    batch = collate([item], 5, 5, pad_to=25)
    counter = AttentionCounter()
    with no_grad():
        encoder_forward(batch, init_params(tiny_config), tiny_config, counter=counter)
    assert counter.anc_scores == len(item.relations.allowed_anc)
    assert counter.sib_scores == len(item.relations.allowed_sib)
    assert counter.dense_scores == 2 * 20 * 20
    # Scores are built for every head and every padded pair before masking
    assert counter.materialized == 2 * tiny_config.heads * 25 * 25
    assert counter.unmasked < counter.dense_scores < counter.materialized
    assert counter.layers == 1
    assert 0.0 < counter.reduction < 1.0


def test_decoder_rejects_long_prefix(tiny_config):
    params = init_params(tiny_config)
    memory = Tensor(np.zeros((1, 3, tiny_config.d_model)))
    with pytest.raises(LengthError):
        decoder_forward(memory, np.ones((1, 3), dtype=bool), np.full((1, 9), BOS_ID), params, tiny_config)


def test_initial_loss_is_near_uniform():
    config = ModelConfig(d_model=16, heads=2, enc_layers=1, dec_layers=1, d_ff=32, code_vocab_size=50,
                         summary_vocab_size=200, max_summary_len=12, dropout=0.0)
    params = init_params(config, 0)
    batch = collate([make_input(s, 12, config, summary_len=8) for s in range(4)], 5, 5)
    with no_grad():
        loss = compute_loss(batch, params, config).item()
    assert abs(loss - math.log(200)) < 0.1 * math.log(200)


def test_greedy_decode_respects_max_len(tiny_config):
    params = init_params(tiny_config, 2)
    batch = tiny_batch(tiny_config)
    with no_grad():
        memory = encoder_forward(batch, params, tiny_config)
    output = greedy_decode(memory, params, tiny_config, max_len=3)
    assert len(output) <= 3
    assert EOS_ID not in output


def test_tiny_model_gradients_match_finite_differences():
    assert gradcheck_tiny_model(seed=0, max_coords=60) < 1e-3


def test_tree_mha_keeps_shape_and_counts_once(tiny_config):
    params = init_params(tiny_config, 3)
    batch = collate([make_input(3, 9, tiny_config), make_input(4, 6, tiny_config)], 5, 5)
    counter = AttentionCounter()
    x = Tensor(np.random.default_rng(3).normal(size=(2, 9, tiny_config.d_model)))
    with no_grad():
        out = tree_mha(x, batch, params, tiny_config, 0, counter=counter)
    assert out.shape == (2, 9, tiny_config.d_model)
    assert counter.layers == 1


def test_greedy_decode_with_zero_max_len(tiny_config):
    params = init_params(tiny_config, 2)
    with no_grad():
        memory = encoder_forward(tiny_batch(tiny_config), params, tiny_config)
    assert greedy_decode(memory, params, tiny_config, max_len=0) == []


def test_train_step_loss_of_repeated_batch(tiny_config):
    item = make_input(6, 10, tiny_config)
    single = init_params(tiny_config, 6)
    repeated = init_params(tiny_config, 6)
    loss_single = train_step(collate([item], 5, 5), single, Adam(single.tensors()), tiny_config)
    loss_repeated = train_step(collate([item] * 3, 5, 5), repeated, Adam(repeated.tensors()), tiny_config)
    assert abs(loss_single - loss_repeated) < 1e-9


def test_train_step_overfits_a_single_example():
    config = ModelConfig(d_model=16, heads=2, enc_layers=1, dec_layers=1, d_ff=32, code_vocab_size=20,
                         summary_vocab_size=20, max_summary_len=8, dropout=0.0)
    params = init_params(config, 0)
    item = make_input(8, 10, config)
    batch = collate([item], config.k_anc, config.k_sib)
    optimizer = Adam(params.tensors(), lr=0.01)
    for _ in range(200):
        loss = train_step(batch, params, optimizer, config)
    assert loss < 0.1
    with no_grad():
        memory = encoder_forward(batch, params, config)
    assert greedy_decode(memory, params, config, max_len=8) == list(item.summary_ids[1:-1])


def test_decoder_is_causal(tiny_config):
    params = init_params(tiny_config, 4)
    batch = tiny_batch(tiny_config)
    target = np.array([[BOS_ID, 5, 6, 7, 8, 9]])
    with no_grad():
        memory = encoder_forward(batch, params, tiny_config)
        before = decoder_forward(memory, batch.code_mask, target, params, tiny_config).data
        changed = target.copy()
        changed[0, 3:] = [12, 13, 14]
        after = decoder_forward(memory, batch.code_mask, changed, params, tiny_config).data
    np.testing.assert_allclose(after[:, :3], before[:, :3], rtol=0, atol=1e-12)
    assert not np.allclose(after[:, 3:], before[:, 3:])


def test_encoder_is_equivariant_on_a_star_tree(tiny_config):
    # Root with four leaves; relabel positions and relations together
    tree = build_tree([("Root", None, [1, 2, 3, 4])] + [("Leaf", str(i), []) for i in range(4)])
    seq = pot(tree)
    relset = build_relations(tree, seq, 5, 5)
    code = (4, 7, 7, 9, 11)
    order = [3, 0, 4, 2, 1]
    relabel = {old: new for new, old in enumerate(order)}
    anc = {(relabel[i], relabel[j]): d for (i, j), d in relset.anc.items()}
    sib = {(relabel[i], relabel[j]): d for (i, j), d in relset.sib.items()}
    moved = ModelInput(tuple(code[old] for old in order), clip(anc, sib, 5, 5, len(order)))
    params = init_params(tiny_config, 6)
    with no_grad():
        out = encoder_forward(collate([ModelInput(code, relset)], 5, 5), params, tiny_config).data
        out_moved = encoder_forward(collate([moved], 5, 5), params, tiny_config).data
    np.testing.assert_allclose(out_moved[0], out[0, order], rtol=0, atol=1e-10)
    # Leaves 1 and 2 share a token but not a sibling offset pattern
    assert not np.allclose(out[0, 1], out[0, 2])


def test_encoder_without_layers_returns_embeddings(tiny_config):
    config = replace(tiny_config, enc_layers=0)
    params = init_params(config, 1)
    batch = tiny_batch(config)
    with no_grad():
        out = encoder_forward(batch, params, config)
    assert np.array_equal(out.data, params["code_embed"].data[batch.code_ids])


def test_encoder_memory_is_reproducible_per_seed(tiny_config):
    config = replace(tiny_config, enc_layers=2, dropout=0.2)
    batch = tiny_batch(config, seed=3)
    runs = []
    for _ in range(2):
        with no_grad():
            memory = encoder_forward(batch, init_params(config, 8), config, np.random.default_rng(11))
        runs.append(memory.data)
    assert np.array_equal(runs[0], runs[1])

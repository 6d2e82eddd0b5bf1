"""Full-model assembly: forward, variants, loss, gradients, checkpoints."""

import math

import numpy as np
import pytest

from rumornet import autodiff as ad
from rumornet import layers
from rumornet.gradsuite import full_model_report, micro_config
from rumornet.model import (
    EventFeatures,
    content_output_dim,
    forward,
    init_params,
    loss,
    structure_output_dim,
    uses_attention,
)
from rumornet.synthgen import SynthSpec, generate
from rumornet.trainer import build_features


def _features(config, n_events=4, seed=0, mode="both"):
    events = generate(
        SynthSpec(n_events=n_events, mode=mode, seed=seed, posts_mean=10.0, span_seconds=7200.0)
    )
    rng = np.random.default_rng(seed)
    vectors = {p.post_id: rng.normal(0, 0.3, size=config.d_w) for e in events for p in e.posts}
    return events, build_features(events, config, vectors)


def test_zero_parameters_give_half():
    config = micro_config()
    events, features = _features(config)
    params = init_params(config, np.random.default_rng(0))
    for t in params.tensors():
        t.values[...] = 0.0
    for event in events:
        y_hat, _ = forward(features[event.event_id], params, config)
        assert y_hat.item() == 0.5


def test_y_hat_in_open_unit_interval():
    config = micro_config()
    events, features = _features(config, n_events=6)
    params = init_params(config, np.random.default_rng(1))
    for event in events:
        y_hat, _ = forward(features[event.event_id], params, config)
        assert 0.0 < y_hat.item() < 1.0


def test_forward_matches_hand_chained_blocks():
    config = micro_config()
    events, features = _features(config, n_events=2)
    params = init_params(config, np.random.default_rng(2))
    feat = features[events[0].event_id]
    y_hat, alphas = forward(feat, params, config)

    # Hand-chain the same blocks.
    ws = feat.structure
    mat = ws.feature_matrix()
    xs = [layers.embed_substructure(mat[t], params.embed_w, params.embed_b)
          for t in range(mat.shape[0])]
    hs = layers.bigru_forward(xs, ws.mask.tolist(), params.gru_fwd, params.gru_bwd,
                              config.candidate_nl)
    s_vec, a = layers.temporal_attention(hs, ws.mask.tolist(), params.attention,
                                         config.attend_over)
    c_vec = layers.content_forward(ad.constant(feat.content), params.content, config.k)
    fused = ad.concat([c_vec, s_vec])
    hidden = ad.relu(fused @ params.fusion_w1 + params.fusion_b1)
    logit = hidden @ params.fusion_w2 + params.fusion_b2
    expected = ad.sigmoid(logit.reshape(())).item()
    assert abs(y_hat.item() - expected) < 1e-15
    np.testing.assert_allclose(alphas, a.values, atol=1e-15)


def test_variant_dimensions():
    base = micro_config()
    for variant in ("full", "structure_only", "structure_only_no_attention", "content_only"):
        config = base.with_overrides(variant=variant)
        params = init_params(config, np.random.default_rng(3))
        expected = 0
        if variant != "content_only":
            expected += structure_output_dim(config)
        if variant in ("full", "content_only"):
            expected += content_output_dim(config)
        assert params.fusion_w1.shape == (expected, config.fusion_hidden)
        assert (params.content is None) == (variant.startswith("structure_only"))
        assert (params.attention is None) == (not uses_attention(config.variant))


def test_content_only_ignores_structure():
    config = micro_config().with_overrides(variant="content_only")
    events, features = _features(config)
    params = init_params(config, np.random.default_rng(4))
    feat = features[events[0].event_id]
    y1, alphas = forward(feat, params, config)
    assert alphas is None
    # Mangle the structure features entirely; prediction must not move.
    wrecked = EventFeatures(
        event_id=feat.event_id, label=feat.label, structure=None, content=feat.content
    )
    y2, _ = forward(wrecked, params, config)
    assert y1.item() == y2.item()


def test_structure_only_ignores_content():
    config = micro_config().with_overrides(variant="structure_only")
    events, features = _features(config)
    params = init_params(config, np.random.default_rng(5))
    feat = features[events[0].event_id]
    y1, _ = forward(feat, params, config)
    wrecked = EventFeatures(
        event_id=feat.event_id,
        label=feat.label,
        structure=feat.structure,
        content=np.full((8, config.d_w), 123.0),
    )
    y2, _ = forward(wrecked, params, config)
    assert y1.item() == y2.item()


def test_no_attention_variant_uses_masked_mean():
    config = micro_config().with_overrides(variant="structure_only_no_attention")
    events, features = _features(config)
    params = init_params(config, np.random.default_rng(6))
    feat = features[events[0].event_id]
    padded = EventFeatures(
        event_id=feat.event_id,
        label=feat.label,
        structure=feat.structure.pad_to(feat.structure.padded_length + 3),
        content=None,
    )
    _, alphas = forward(padded, params, config)
    mask = padded.structure.mask
    assert abs(alphas.sum() - 1.0) < 1e-12
    assert not alphas[~mask].any()
    np.testing.assert_allclose(alphas[mask], 1.0 / mask.sum(), atol=1e-12)


def test_alphas_sum_to_one_over_unmasked():
    config = micro_config()
    events, features = _features(config, n_events=6)
    params = init_params(config, np.random.default_rng(7))
    for event in events:
        feat = features[event.event_id]
        padded = EventFeatures(
            event_id=feat.event_id,
            label=feat.label,
            structure=feat.structure.pad_to(feat.structure.padded_length + 2),
            content=feat.content,
        )
        _, alphas = forward(padded, params, config)
        assert abs(alphas.sum() - 1.0) < 1e-12
        assert not alphas[~padded.structure.mask].any()


def test_dropout_only_at_train_time():
    config = micro_config().with_overrides(dropout=0.5)
    events, features = _features(config)
    params = init_params(config, np.random.default_rng(8))
    feat = features[events[0].event_id]
    eval_a = forward(feat, params, config, train=False)[0].item()
    eval_b = forward(feat, params, config, train=False)[0].item()
    assert eval_a == eval_b
    rng = np.random.default_rng(9)
    train_vals = {forward(feat, params, config, train=True, rng=rng)[0].item() for _ in range(8)}
    assert len(train_vals) > 1


def test_loss_hand_values():
    half = ad.constant(0.5)
    assert abs(loss([half], [1]).item() - (-math.log(0.5))) < 1e-12
    assert abs(loss([half], [1]).item() - 0.6931) < 1e-4
    near_one = ad.constant(1.0 - 1e-12)
    assert loss([near_one], [1]).item() < 1e-9
    two = loss([ad.constant(0.5), ad.constant(0.5)], [0, 1])
    assert abs(two.item() - 2.0 * (-math.log(0.5))) < 1e-12  # sum, not mean


def test_loss_clips_extreme_probabilities():
    assert np.isfinite(loss([ad.constant(0.0)], [1]).item())
    assert np.isfinite(loss([ad.constant(1.0)], [0]).item())


def test_loss_length_mismatch():
    with pytest.raises(ValueError):
        loss([ad.constant(0.5)], [0, 1])


def test_full_model_grad_check_micro_batch():
    report = full_model_report(seed=0, tolerance=1e-3)
    assert report.passed, report


def test_grad_check_each_variant():
    for variant in ("structure_only", "structure_only_no_attention", "content_only"):
        config = micro_config().with_overrides(variant=variant)
        events, features = _features(config, n_events=2, seed=11)
        params = init_params(config, np.random.default_rng(12))
        feats = [features[e.event_id] for e in events]
        labels = [e.label for e in events]

        def f():
            return loss([forward(x, params, config)[0] for x in feats], labels)

        report = ad.grad_check(f, params.tensors(), tolerance=1e-3)
        assert report.passed, f"{variant}: {report}"


def test_grad_check_literal_mode_switches():
    # The alternate candidate nonlinearity and hidden-state pooling
    # need correct gradients too.
    config = micro_config().with_overrides(candidate_nl="sigmoid", attend_over="hidden")
    events, features = _features(config, n_events=2, seed=21)
    params = init_params(config, np.random.default_rng(22))
    feats = [features[e.event_id] for e in events]
    labels = [e.label for e in events]

    def f():
        return loss([forward(x, params, config)[0] for x in feats], labels)

    report = ad.grad_check(f, params.tensors(), tolerance=1e-3)
    assert report.passed, report


def test_checkpoint_roundtrip_through_model(tmp_path):
    config = micro_config()
    events, features = _features(config)
    rng = np.random.default_rng(13)
    params = init_params(config, rng)
    path = tmp_path / "model.bin"
    layers.save_arrays(path, params.to_arrays(), meta=config.to_dict())
    arrays, meta = layers.load_arrays(path)
    fresh = init_params(config, np.random.default_rng(99))
    fresh.load_arrays(arrays)
    assert meta["variant"] == "full"
    feat = features[events[0].event_id]
    assert forward(feat, params, config)[0].item() == forward(feat, fresh, config)[0].item()


def test_checkpoint_shape_mismatch_rejected(tmp_path):
    config = micro_config()
    params = init_params(config, np.random.default_rng(14))
    arrays = params.to_arrays()
    arrays["fusion.W1"] = np.zeros((2, 2))
    with pytest.raises(ValueError, match="fusion.W1"):
        params.load_arrays(arrays)

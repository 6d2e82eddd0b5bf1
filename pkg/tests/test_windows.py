"""Window assignment and structural featurization oracles."""

import math

import numpy as np
import pytest

from rumornet.events import Event, Post
from rumornet.synthgen import SynthSpec, generate
from rumornet.windows import assign_windows, featurize, raw_feature_vector


def _event(spec):
    """spec: list of (post_id, parent_id, offset_seconds)."""
    posts = tuple(Post(pid, parent, float(t), "x") for pid, parent, t in spec)
    return Event(event_id="w", label=0, posts=posts)


# The worked example used throughout: root(0) -> A(5 min, depth 1),
# A -> B(25 min, depth 2), root -> C(30 min, depth 1); 20-minute unit.
WORKED = [("r", None, 0), ("A", "r", 300), ("B", "A", 1500), ("C", "r", 1800)]


def test_assign_windows_floor_formula():
    event = _event([("r", None, 0), ("a", "r", 300), ("b", "r", 1500), ("c", "r", 1900)])
    w = assign_windows(event, 1200.0, 100)
    assert [w["r"], w["a"], w["b"], w["c"]] == [1, 1, 2, 2]


def test_assign_windows_burst_at_zero():
    event = _event([("r", None, 0), ("a", "r", 0), ("b", "r", 0)])
    assert set(assign_windows(event, 1200.0, 100).values()) == {1}


def test_assign_windows_clamps_to_max():
    event = _event([("r", None, 0), ("a", "r", 10 * 600)])
    assert assign_windows(event, 600.0, 5)["a"] == 5


def test_featurize_worked_example():
    ws = featurize(_event(WORKED), 1200.0, 100, layer_cap=3)
    assert ws.n_windows == 2
    assert ws.counts[0].tolist() == [1, 0, 0]
    assert ws.counts[1].tolist() == [1, 1, 0]
    assert ws.shares[0].tolist() == [1.0, 0.0, 0.0]
    assert ws.shares[1].tolist() == [0.5, 0.5, 0.0]
    assert ws.ratios[1].tolist() == [0.0, 1.0, 0.0]


def test_featurize_root_only():
    ws = featurize(_event([("r", None, 0)]), 1200.0, 100, layer_cap=3)
    assert ws.n_windows == 1
    assert not ws.counts.any()
    assert not ws.shares.any()
    assert not ws.ratios.any()


def test_featurize_depth_clamped_to_layer_cap():
    chain = [("r", None, 0), ("a", "r", 1), ("b", "a", 2), ("c", "b", 3)]
    ws = featurize(_event(chain), 1200.0, 100, layer_cap=2)
    assert ws.counts[0].tolist() == [1, 2]  # depth-3 post counted at layer 2


def test_featurize_adjacent_window_mode():
    spec = [("r", None, 0), ("a", "r", 10), ("b", "r", 20), ("c", "r", 1300)]
    ws = featurize(_event(spec), 1200.0, 100, layer_cap=2, ratio_mode="adjacent_window")
    assert ws.ratios[0].tolist() == [0.0, 0.0]
    assert ws.ratios[1].tolist() == [0.5, 0.0]  # 1 post at layer 1 vs 2 before


def test_share_rows_sum_to_one_or_zero():
    events = generate(SynthSpec(n_events=30, mode="dynamic_structure", seed=2, posts_mean=25.0))
    for event in events:
        ws = featurize(event, 1200.0, 100, layer_cap=5)
        sums = ws.shares.sum(axis=1)
        occupied = ws.counts.sum(axis=1) > 0
        np.testing.assert_allclose(sums[occupied], 1.0, atol=1e-9)
        assert not sums[~occupied].any()


def test_count_conservation():
    events = generate(SynthSpec(n_events=30, mode="dynamic_structure", seed=5, posts_mean=25.0))
    for event in events:
        ws = featurize(event, 1200.0, 1000, layer_cap=50)
        assert ws.counts.sum() == len(event.posts) - 1


def test_window_clamping_folds_late_posts_into_last_window():
    spec = [("r", None, 0), ("a", "r", 100), ("b", "r", 9e9), ("c", "b", 9.5e9)]
    ws = featurize(_event(spec), 1200.0, max_windows=4, layer_cap=2)
    assert ws.n_windows == 4
    assert ws.counts.sum() == 3  # clamped posts still counted
    assert ws.counts[3].tolist() == [1, 1]


def test_translation_invariance():
    rng = np.random.default_rng(8)
    events = generate(SynthSpec(n_events=100, mode="dynamic_structure", seed=7, posts_mean=20.0))
    for event in events:
        shift = float(rng.uniform(1, 1e6))
        shifted = Event(
            event_id=event.event_id,
            label=event.label,
            posts=tuple(
                Post(p.post_id, p.parent_id, p.timestamp + shift, p.text, p.kind)
                for p in event.posts
            ),
        )
        a = featurize(event, 1200.0, 100, layer_cap=5)
        b = featurize(shifted, 1200.0, 100, layer_cap=5)
        assert np.array_equal(a.counts, b.counts)
        assert np.array_equal(a.shares, b.shares)
        assert np.array_equal(a.ratios, b.ratios)


def test_time_scaling_invariance():
    events = generate(SynthSpec(n_events=100, mode="dynamic_structure", seed=9, posts_mean=20.0))
    for i, event in enumerate(events):
        k = [2.0, 4.0, 8.0][i % 3]
        scaled = Event(
            event_id=event.event_id,
            label=event.label,
            posts=tuple(
                Post(p.post_id, p.parent_id, p.timestamp * k, p.text, p.kind)
                for p in event.posts
            ),
        )
        assert assign_windows(event, 1200.0, 100) == assign_windows(scaled, 1200.0 * k, 100)


def test_featurize_deterministic():
    event = _event(WORKED)
    a = featurize(event, 1200.0, 100, layer_cap=3)
    b = featurize(event, 1200.0, 100, layer_cap=3)
    assert np.array_equal(a.counts, b.counts)
    assert np.array_equal(a.ratios, b.ratios)


def test_raw_feature_vector_worked_example():
    ws = featurize(_event(WORKED), 1200.0, 100, layer_cap=3)
    log2 = math.log(2.0)
    expect = [0.5, 0.5, 0.0, 0.0, 1.0, 0.0, log2, log2, 0.0]
    np.testing.assert_allclose(raw_feature_vector(ws, 2), expect, atol=1e-15)


def test_raw_feature_vector_single_post_l1():
    ws = featurize(_event([("r", None, 0), ("a", "r", 10)]), 1200.0, 100, layer_cap=1)
    np.testing.assert_allclose(raw_feature_vector(ws, 1), [1.0, 0.0, math.log(2.0)], atol=1e-15)


def test_raw_feature_vector_empty_window_is_zero():
    spec = [("r", None, 0), ("a", "r", 3000)]  # lands in window 3, window 2 stays empty
    ws = featurize(_event(spec), 1200.0, 100, layer_cap=3)
    assert ws.n_windows == 3
    assert not raw_feature_vector(ws, 2).any()
    assert len(raw_feature_vector(ws, 2)) == 9


def test_raw_feature_vector_out_of_range():
    ws = featurize(_event(WORKED), 1200.0, 100, layer_cap=3)
    with pytest.raises(IndexError):
        raw_feature_vector(ws, 3)
    with pytest.raises(IndexError):
        raw_feature_vector(ws, 0)


def test_pad_to_extends_mask_and_zeroes():
    ws = featurize(_event(WORKED), 1200.0, 100, layer_cap=3)
    padded = ws.pad_to(5)
    assert padded.padded_length == 5
    assert padded.mask.tolist() == [True, True, False, False, False]
    assert not padded.counts[2:].any()
    assert padded.feature_matrix().shape == (5, 9)
    with pytest.raises(ValueError):
        ws.pad_to(1)

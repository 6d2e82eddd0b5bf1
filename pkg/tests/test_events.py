"""Event loading, validation, folds, and deadline truncation."""

import json

import numpy as np
import pytest

from rumornet.events import (
    Event,
    EventFormatError,
    EventValidationError,
    Post,
    event_from_dict,
    load_events,
    make_folds,
    truncate_at_deadline,
    write_events,
)


def _post(pid, parent, t, text="hi"):
    return {"id": pid, "parent": parent, "t": t, "text": text, "kind": None}


def _event_line(event_id, label, posts):
    return json.dumps({"event_id": event_id, "label": label, "posts": posts})


def _write(tmp_path, lines, name="events.jsonl"):
    path = tmp_path / name
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_load_minimal_event(tmp_path):
    path = _write(tmp_path, [_event_line("e1", 1, [_post("r", None, 0), _post("a", "r", 300)])])
    events = load_events(path)
    assert len(events) == 1
    assert len(events[0].posts) == 2
    assert events[0].root.post_id == "r"


def test_load_orphan_parent_names_event(tmp_path):
    path = _write(
        tmp_path, [_event_line("bad_evt", 0, [_post("r", None, 0), _post("a", "ghost", 10)])]
    )
    with pytest.raises(EventValidationError, match="bad_evt"):
        load_events(path)


def test_load_chain_in_timestamp_order_with_depths(tmp_path):
    # 4-post chain root -> A -> B -> C, strictly increasing timestamps.
    posts = [
        _post("c", "b", 30),
        _post("r", None, 0),
        _post("a", "r", 10),
        _post("b", "a", 20),
    ]
    path = _write(tmp_path, [_event_line("chain", 1, posts)])
    event = load_events(path)[0]
    assert [p.post_id for p in event.posts] == ["r", "a", "b", "c"]
    depths = event.depths()
    assert [depths[p.post_id] for p in event.posts] == [0, 1, 2, 3]


def test_malformed_json_reports_line(tmp_path):
    path = _write(tmp_path, [_event_line("e1", 0, [_post("r", None, 0)]), "not json {"])
    with pytest.raises(EventFormatError, match=":2"):
        load_events(path)


def test_duplicate_post_id_rejected():
    with pytest.raises(EventValidationError, match="duplicate post id"):
        event_from_dict(
            {"event_id": "e", "label": 0, "posts": [_post("r", None, 0), _post("r", "r", 1)]}
        )


def test_missing_root_rejected():
    with pytest.raises(EventValidationError, match="exactly one root"):
        event_from_dict({"event_id": "e", "label": 0, "posts": [_post("a", "b", 1), _post("b", "a", 2)]})


def test_two_roots_rejected():
    with pytest.raises(EventValidationError, match="exactly one root"):
        event_from_dict(
            {"event_id": "e", "label": 0, "posts": [_post("r", None, 0), _post("s", None, 1)]}
        )


def test_cycle_rejected():
    posts = [_post("r", None, 0), _post("a", "b", 1), _post("b", "a", 2)]
    with pytest.raises(EventValidationError, match="connected"):
        event_from_dict({"event_id": "cyc", "label": 1, "posts": posts})


def test_bad_label_rejected():
    with pytest.raises(EventValidationError, match="label"):
        event_from_dict({"event_id": "e", "label": 2, "posts": [_post("r", None, 0)]})


def test_clock_skew_clamped_up_to_parent(tmp_path, caplog):
    posts = [_post("r", None, 100), _post("a", "r", 40)]
    path = _write(tmp_path, [_event_line("skew", 0, posts)])
    with caplog.at_level("WARNING"):
        event = load_events(path)[0]
    assert event.posts[1].timestamp == 100.0
    assert "clamped 1" in caplog.text


def test_depths_survive_timestamp_ties_against_id_order():
    # Clamping creates parent/child timestamp ties; if the child's id
    # sorts first, depth computation must still follow parent pointers.
    event = event_from_dict(
        {
            "event_id": "tie",
            "label": 0,
            "posts": [
                _post("r", None, 0),
                _post("z_parent", "r", 50),
                _post("a_child", "z_parent", 10),  # clamped up to t=50
            ],
        }
    )
    assert [p.post_id for p in event.posts] == ["r", "a_child", "z_parent"]
    assert event.depths() == {"r": 0, "z_parent": 1, "a_child": 2}


def test_featurize_on_tied_timestamps():
    from rumornet.windows import featurize

    event = event_from_dict(
        {
            "event_id": "tie2",
            "label": 1,
            "posts": [
                _post("r", None, 0),
                _post("y", "r", 600),
                _post("x", "y", 600),
                _post("w", "x", 600),
            ],
        }
    )
    ws = featurize(event, 1200.0, 100, layer_cap=5)
    assert ws.counts[0].tolist() == [1, 1, 1, 0, 0]


def test_round_trip(tmp_path):
    posts = [
        _post("r", None, 0, "root text"),
        {"id": "a", "parent": "r", "t": 5.5, "text": "回复了", "kind": "reply"},
        {"id": "b", "parent": "r", "t": 9.0, "text": "", "kind": "repost"},
    ]
    path = _write(tmp_path, [_event_line("rt", 1, posts)])
    events = load_events(path)
    out = tmp_path / "again.jsonl"
    write_events(out, events)
    assert load_events(out) == events


def test_make_folds_balanced_10_events():
    events = _balanced_events(10)
    plan = make_folds(events, 5, seed=0)
    for fold in range(5):
        members = [e for e in events if plan.assignment[e.event_id] == fold]
        assert len(members) == 2
        assert sum(e.label for e in members) == 1


def test_make_folds_deterministic():
    events = _balanced_events(30)
    assert make_folds(events, 5, seed=9) == make_folds(events, 5, seed=9)


def test_make_folds_100_events_exact_stratification():
    events = _balanced_events(100)
    for seed in (0, 1, 2):
        plan = make_folds(events, 5, seed=seed)
        for fold in range(5):
            members = [e for e in events if plan.assignment[e.event_id] == fold]
            assert len(members) == 20
            assert sum(e.label for e in members) == 10


def test_make_folds_is_partition():
    events = _balanced_events(34)
    plan = make_folds(events, 4, seed=3)
    assert sorted(plan.assignment) == sorted(e.event_id for e in events)
    sizes = [sum(1 for f in plan.assignment.values() if f == k) for k in range(4)]
    assert sum(sizes) == 34


def test_make_folds_too_few_per_class():
    events = _balanced_events(6)  # 3 per class
    with pytest.raises(ValueError, match="class"):
        make_folds(events, 5, seed=0)


def test_make_folds_imbalanced_proportions_within_five_points():
    events = []
    for i in range(100):
        posts = (Post(f"i{i}_r", None, 0.0, "x"),)
        events.append(Event(event_id=f"i{i}", label=1 if i < 57 else 0, posts=posts))
    plan = make_folds(events, 5, seed=2)
    global_share = 0.57
    for fold in range(5):
        members = [e for e in events if plan.assignment[e.event_id] == fold]
        share = sum(e.label for e in members) / len(members)
        assert abs(share - global_share) <= 0.05


def _balanced_events(n):
    events = []
    for i in range(n):
        posts = (Post(f"e{i}_r", None, 0.0, "x"), Post(f"e{i}_a", f"e{i}_r", 60.0, "y"))
        events.append(Event(event_id=f"e{i}", label=i % 2, posts=posts))
    return events


def _offsets_event(offsets):
    posts = [Post("r", None, 0.0, "root")]
    for i, off in enumerate(offsets[1:], start=1):
        posts.append(Post(f"p{i}", "r", float(off), "t"))
    return Event(event_id="off", label=0, posts=tuple(posts))


def test_truncate_keeps_posts_within_deadline():
    event = _offsets_event([0, 300, 1500, 7200])
    cut = truncate_at_deadline(event, 1800)
    assert len(cut.posts) == 3


def test_truncate_zero_keeps_root_only():
    event = _offsets_event([0, 300, 1500])
    cut = truncate_at_deadline(event, 0)
    assert [p.post_id for p in cut.posts] == ["r"]


def test_truncate_beyond_span_is_identity():
    event = _offsets_event([0, 300, 1500])
    assert truncate_at_deadline(event, 1500) is event
    assert truncate_at_deadline(event, 99999) is event


def test_truncate_negative_deadline_rejected():
    with pytest.raises(ValueError):
        truncate_at_deadline(_offsets_event([0, 10]), -1)


def test_truncation_monotone_in_deadline():
    from rumornet.synthgen import SynthSpec, generate

    events = generate(SynthSpec(n_events=20, mode="dynamic_structure", seed=4, posts_mean=15.0))
    rng = np.random.default_rng(0)
    for event in events:
        span = event.span_seconds()
        d1, d2 = sorted(rng.uniform(0, span * 1.2, size=2))
        ids1 = {p.post_id for p in truncate_at_deadline(event, d1).posts}
        ids2 = {p.post_id for p in truncate_at_deadline(event, d2).posts}
        assert ids1 <= ids2

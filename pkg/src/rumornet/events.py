"""Labeled propagation-tree events: loading, validation, folds, truncation.

The on-disk format is JSON Lines, one event per line:

    {"event_id": str, "label": 0|1,
     "posts": [{"id": str, "parent": str|null, "t": number,
                "text": str, "kind": "repost"|"reply"|null}]}

Every event is a single tree rooted at the one post with a null parent.
Child timestamps that precede their parent (clock skew in the public
dumps) are clamped up to the parent's timestamp at load time and counted
in a warning.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable

import numpy as np

log = logging.getLogger(__name__)

RUMOR = 1
NON_RUMOR = 0

_KINDS = ("repost", "reply")


class EventFormatError(ValueError):
    """A line of the event file could not be parsed."""


class EventValidationError(ValueError):
    """An event violates the tree invariants; the message names it."""


@dataclass(frozen=True)
class Post:
    post_id: str
    parent_id: str | None
    timestamp: float
    text: str
    kind: str | None = None


@dataclass(frozen=True)
class Event:
    event_id: str
    label: int
    posts: tuple[Post, ...]

    @property
    def root(self) -> Post:
        return self.posts[0]

    def depths(self) -> dict[str, int]:
        """Depth of each post in the tree (root = 0).

        Walks parent pointers, so it is safe even when timestamp ties
        put a child ahead of its parent in the sorted post order.
        """
        parent = {p.post_id: p.parent_id for p in self.posts}
        depth = {self.root.post_id: 0}
        for post in self.posts[1:]:
            pid = post.post_id
            chain = []
            while pid not in depth:
                chain.append(pid)
                pid = parent[pid]
            d = depth[pid]
            for node in reversed(chain):
                d += 1
                depth[node] = d
        return depth

    def span_seconds(self) -> float:
        return self.posts[-1].timestamp - self.root.timestamp


@dataclass(frozen=True)
class FoldPlan:
    n_folds: int
    assignment: dict[str, int]

    def fold_of(self, event_id: str) -> int:
        return self.assignment[event_id]

    def split(self, events: list[Event], fold: int) -> tuple[list[Event], list[Event]]:
        """(rest, members-of-fold) for a held-out-fold protocol."""
        rest = [e for e in events if self.assignment[e.event_id] != fold]
        held = [e for e in events if self.assignment[e.event_id] == fold]
        return rest, held


def _build_event(raw: dict, clamp_counter: list[int]) -> Event:
    event_id = raw.get("event_id")
    if not isinstance(event_id, str) or not event_id:
        raise EventFormatError("event_id missing or not a string")
    label = raw.get("label")
    if label not in (0, 1):
        raise EventValidationError(f"event {event_id}: label must be 0 or 1, got {label!r}")
    posts_raw = raw.get("posts")
    if not isinstance(posts_raw, list) or not posts_raw:
        raise EventValidationError(f"event {event_id}: posts missing or empty")

    posts = []
    for p in posts_raw:
        kind = p.get("kind")
        if kind is not None and kind not in _KINDS:
            raise EventValidationError(f"event {event_id}: bad kind {kind!r}")
        t = p.get("t")
        if not isinstance(t, (int, float)) or t < 0:
            raise EventValidationError(f"event {event_id}: post {p.get('id')!r} has bad timestamp {t!r}")
        posts.append(Post(str(p["id"]), p.get("parent"), float(t), str(p.get("text", "")), kind))

    ids = [p.post_id for p in posts]
    if len(set(ids)) != len(ids):
        dup = next(i for i in ids if ids.count(i) > 1)
        raise EventValidationError(f"event {event_id}: duplicate post id {dup!r}")
    roots = [p for p in posts if p.parent_id is None]
    if len(roots) != 1:
        raise EventValidationError(f"event {event_id}: expected exactly one root, found {len(roots)}")
    by_id = {p.post_id: p for p in posts}
    for p in posts:
        if p.parent_id is not None and p.parent_id not in by_id:
            raise EventValidationError(
                f"event {event_id}: post {p.post_id!r} references unknown parent {p.parent_id!r}"
            )

    # Reach every node from the root; unreached nodes mean a cycle or forest.
    children: dict[str, list[str]] = {p.post_id: [] for p in posts}
    for p in posts:
        if p.parent_id is not None:
            children[p.parent_id].append(p.post_id)
    root = roots[0]
    clamped: dict[str, Post] = {root.post_id: root}
    frontier = [root.post_id]
    while frontier:
        pid = frontier.pop()
        parent_t = clamped[pid].timestamp
        for cid in children[pid]:
            child = by_id[cid]
            if child.timestamp < parent_t:
                child = replace(child, timestamp=parent_t)
                clamp_counter[0] += 1
            clamped[cid] = child
            frontier.append(cid)
    if len(clamped) != len(posts):
        raise EventValidationError(f"event {event_id}: posts not connected to the root (cycle?)")

    ordered = [clamped[root.post_id]] + sorted(
        (p for p in clamped.values() if p.parent_id is not None),
        key=lambda p: (p.timestamp, p.post_id),
    )
    return Event(event_id=event_id, label=int(label), posts=tuple(ordered))


def event_from_dict(raw: dict) -> Event:
    """Validate and normalize one event given as a schema dict."""
    counter = [0]
    return _build_event(raw, counter)


def load_events(path: str | Path) -> list[Event]:
    """Load and validate a JSON-Lines event file.

    Posts come back sorted by timestamp (root first, ties by post id).
    Raises EventFormatError with the offending line number on malformed
    JSON and EventValidationError naming the event on invariant
    violations.
    """
    path = Path(path)
    events: list[Event] = []
    seen_ids: set[str] = set()
    clamp_counter = [0]
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as err:
                raise EventFormatError(f"{path}:{lineno}: malformed JSON ({err.msg})") from err
            try:
                event = _build_event(raw, clamp_counter)
            except EventFormatError as err:
                raise EventFormatError(f"{path}:{lineno}: {err}") from err
            if event.event_id in seen_ids:
                raise EventValidationError(f"duplicate event id {event.event_id!r}")
            seen_ids.add(event.event_id)
            events.append(event)
    if clamp_counter[0]:
        log.warning("clamped %d child timestamps up to their parents", clamp_counter[0])
    return events


def event_to_json(event: Event) -> str:
    return json.dumps(
        {
            "event_id": event.event_id,
            "label": event.label,
            "posts": [
                {
                    "id": p.post_id,
                    "parent": p.parent_id,
                    "t": p.timestamp,
                    "text": p.text,
                    "kind": p.kind,
                }
                for p in event.posts
            ],
        },
        ensure_ascii=False,
    )


def write_events(path: str | Path, events: Iterable[Event]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for event in events:
            fh.write(event_to_json(event) + "\n")


def make_folds(events: list[Event], n_folds: int, seed: int) -> FoldPlan:
    """Stratified fold assignment, deterministic for a fixed seed.

    Events of each class are shuffled and dealt round-robin, so fold
    sizes and class balance differ by at most one event.
    """
    if n_folds < 2:
        raise ValueError(f"n_folds must be >= 2, got {n_folds}")
    by_class: dict[int, list[str]] = {0: [], 1: []}
    for e in events:
        by_class[e.label].append(e.event_id)
    for label, ids in by_class.items():
        if len(ids) < n_folds:
            raise ValueError(
                f"class {label} has only {len(ids)} events, need at least {n_folds}"
            )
    rng = np.random.default_rng(seed)
    assignment: dict[str, int] = {}
    for label in (0, 1):
        ids = sorted(by_class[label])
        rng.shuffle(ids)
        for i, event_id in enumerate(ids):
            assignment[event_id] = i % n_folds
    return FoldPlan(n_folds=n_folds, assignment=assignment)


def truncate_at_deadline(event: Event, deadline: float) -> Event:
    """Keep only posts within ``deadline`` seconds of the root post.

    The root is always retained; ancestors of retained posts are
    retained by construction because parent timestamps never exceed
    child timestamps after load-time clamping.
    """
    if deadline < 0:
        raise ValueError(f"deadline must be >= 0, got {deadline}")
    root_t = event.root.timestamp
    kept = tuple(p for p in event.posts if p.timestamp - root_t <= deadline)
    if len(kept) == len(event.posts):
        return event
    return Event(event_id=event.event_id, label=event.label, posts=kept)

"""Adapters from the public microblog dumps to the event JSON-Lines format.

Two layouts are supported:

weibo: a directory with ``Weibo.txt`` (lines ``eid:<id> label:<0|1> ...``)
    and one ``<eid>.json`` per event (searched in the directory itself
    and in ``Weibo/`` or ``json/`` subdirectories), each an array of
    posts with keys ``mid``, ``parent``, ``t``, ``text``.

twitter: a label file (lines ``<label>:<event id>``) plus a tree
    directory with ``<eid>.txt`` files of edges
    ``['uid', 'tweet id', 'delay minutes']->[...]`` and an optional
    tab-separated source-tweets file supplying root texts. Delays are
    minutes relative to the source tweet. Deleted tweets simply have no
    text.

Both adapters skip events they cannot parse or that fail validation,
and report what was skipped.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .events import Event, EventValidationError, event_from_dict

_TWITTER_NODE_RE = re.compile(r"\['([^']*)',\s*'([^']*)',\s*'([^']*)'\]")

RUMOR_LABELS = {"1", "false", "rumor", "rumour", "rumours", "fake"}
NON_RUMOR_LABELS = {"0", "true", "non-rumor", "nonrumor", "non-rumours", "real"}


@dataclass
class ConversionStats:
    converted: int = 0
    skipped: int = 0
    messages: list[str] = field(default_factory=list)

    def skip(self, message: str) -> None:
        self.skipped += 1
        self.messages.append(message)


def _normalize_label(raw: str) -> int | None:
    s = raw.strip().lower()
    if s in RUMOR_LABELS:
        return 1
    if s in NON_RUMOR_LABELS:
        return 0
    return None


def convert_weibo(root: str | Path) -> tuple[list[Event], ConversionStats]:
    root = Path(root)
    index = root / "Weibo.txt"
    if not index.exists():
        raise FileNotFoundError(f"weibo index not found: {index}")
    stats = ConversionStats()
    events: list[Event] = []
    for line in index.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        fields = dict(
            part.split(":", 1) for part in line.split() if ":" in part
        )
        eid = fields.get("eid")
        label = _normalize_label(fields.get("label", ""))
        if eid is None or label is None:
            stats.skip(f"unparseable index line: {line[:60]}")
            continue
        post_file = None
        for candidate in (root / f"{eid}.json", root / "Weibo" / f"{eid}.json", root / "json" / f"{eid}.json"):
            if candidate.exists():
                post_file = candidate
                break
        if post_file is None:
            stats.skip(f"event {eid}: post file missing")
            continue
        try:
            posts_raw = json.loads(post_file.read_text(encoding="utf-8"))
            posts = [
                {
                    "id": str(p["mid"]),
                    "parent": (str(p["parent"]) if p.get("parent") not in (None, "", "null") else None),
                    "t": float(p["t"]),
                    "text": str(p.get("text", "")),
                    "kind": None,
                }
                for p in posts_raw
            ]
            event = event_from_dict({"event_id": str(eid), "label": label, "posts": posts})
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as err:
            stats.skip(f"event {eid}: {err}")
            continue
        events.append(event)
        stats.converted += 1
    return events, stats


def _parse_twitter_tree(text: str) -> list[tuple[str | None, str, float]]:
    """(parent tweet id or None, tweet id, seconds) per node."""
    root_id: str | None = None
    root_t = 0.0
    children: dict[str, tuple[str, float]] = {}
    for line in text.splitlines():
        found = _TWITTER_NODE_RE.findall(line)
        if len(found) != 2:
            continue
        (puid, ptid, _pdelay), (_cuid, ctid, cdelay) = found
        if puid == "ROOT":
            root_id = ctid
            root_t = float(cdelay) * 60.0
            continue
        if ctid == ptid:
            continue  # the dumps contain occasional self loops
        if ctid not in children:
            children[ctid] = (ptid, float(cdelay) * 60.0)
    if root_id is None:
        return []
    nodes: list[tuple[str | None, str, float]] = [(None, root_id, root_t)]
    for tid, (parent, t) in children.items():
        if tid != root_id:
            nodes.append((parent, tid, t))
    return nodes


def convert_twitter(
    label_file: str | Path,
    tree_dir: str | Path,
    source_tweets: str | Path | None = None,
) -> tuple[list[Event], ConversionStats]:
    label_file = Path(label_file)
    tree_dir = Path(tree_dir)
    if not label_file.exists():
        raise FileNotFoundError(f"label file not found: {label_file}")
    if not tree_dir.is_dir():
        raise FileNotFoundError(f"tree directory not found: {tree_dir}")
    texts: dict[str, str] = {}
    if source_tweets is not None:
        for line in Path(source_tweets).read_text(encoding="utf-8").splitlines():
            if "\t" in line:
                tid, text = line.split("\t", 1)
                texts[tid.strip()] = text
    stats = ConversionStats()
    events: list[Event] = []
    for line in label_file.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or ":" not in line:
            continue
        raw_label, eid = line.split(":", 1)
        eid = eid.strip()
        label = _normalize_label(raw_label)
        if label is None:
            stats.skip(f"event {eid}: unsupported label {raw_label!r}")
            continue
        tree_file = tree_dir / f"{eid}.txt"
        if not tree_file.exists():
            stats.skip(f"event {eid}: tree file missing")
            continue
        try:
            nodes = _parse_twitter_tree(tree_file.read_text(encoding="utf-8"))
            if not nodes:
                raise EventValidationError(f"event {eid}: no parseable edges")
            posts = [
                {
                    "id": tid,
                    "parent": parent,
                    "t": max(0.0, t),
                    "text": texts.get(tid, ""),
                    "kind": None,
                }
                for parent, tid, t in nodes
            ]
            event = event_from_dict({"event_id": eid, "label": label, "posts": posts})
        except (ValueError, EventValidationError) as err:
            stats.skip(f"event {eid}: {err}")
            continue
        events.append(event)
        stats.converted += 1
    return events, stats

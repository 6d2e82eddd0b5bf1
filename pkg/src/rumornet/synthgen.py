"""Deterministic synthetic cascades with a plantable class signal.

Modes:
  dynamic_structure: both classes draw tree shapes from the same
      uniform-attachment branching process, but class 1 posts burst
      early (80% of posts inside the first 20% of the span) while class
      0 spreads uniformly. Texts carry no signal.
  content: identical timing for both classes, class-specific token
      pools in the texts.
  both: timing and token signals combined.
  null: identical distributions everywhere (control).

An optional quiet phase makes both classes behave identically for the
first ``quiet_seconds`` of the span before the timing signal kicks in,
which is what an early-detection experiment needs to show a deadline
effect.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .events import Event, Post

MODES = ("dynamic_structure", "content", "both", "null")

_POOL_RUMOR = (
    "unverified", "breaking", "shocking", "warning", "exposed", "hoax", "panic", "secret",
)
_POOL_NEWS = (
    "confirmed", "official", "statement", "report", "update", "source", "verified", "details",
)
_POOL_NEUTRAL = (
    "today", "people", "city", "photo", "video", "story", "share", "comment",
)
_STOPWORDS = ("the", "a", "is", "at", "on", "this")


@dataclass(frozen=True)
class SynthSpec:
    n_events: int
    mode: str = "dynamic_structure"
    rumor_fraction: float = 0.5
    seed: int = 0
    posts_mean: float = 40.0
    span_seconds: float = 14400.0  # 4 hours
    quiet_seconds: float = 0.0
    tokens_per_post: int = 6

    def validate(self) -> "SynthSpec":
        if self.n_events < 2:
            raise ValueError(f"n_events must be >= 2, got {self.n_events}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0.0 < self.rumor_fraction < 1.0:
            raise ValueError(f"rumor_fraction must be in (0, 1), got {self.rumor_fraction}")
        n_rumor = round(self.n_events * self.rumor_fraction)
        if n_rumor == 0 or n_rumor == self.n_events:
            raise ValueError("spec must produce at least one event of each class")
        if self.posts_mean < 4:
            raise ValueError(f"posts_mean must be >= 4, got {self.posts_mean}")
        if self.span_seconds <= 0:
            raise ValueError(f"span_seconds must be positive, got {self.span_seconds}")
        if not 0.0 <= self.quiet_seconds < self.span_seconds:
            raise ValueError("quiet_seconds must be in [0, span_seconds)")
        return self


def _post_times(spec: SynthSpec, label: int, n_posts: int, rng: np.random.Generator) -> np.ndarray:
    """Arrival offsets in (0, span]; the timing signal lives here."""
    span = spec.span_seconds
    quiet = spec.quiet_seconds
    timing_signal = spec.mode in ("dynamic_structure", "both") and label == 1
    n_quiet = int(round(n_posts * quiet / span)) if quiet > 0 else 0
    n_quiet = min(n_quiet, n_posts)
    times = [rng.uniform(0.0, quiet, size=n_quiet)]
    rest = n_posts - n_quiet
    if timing_signal:
        # 80% of posts burst inside the first 20% of the (post-quiet)
        # span; the remaining 20% spread over the whole of it, so the
        # burst region ends up holding ~84% and a 20%-of-span truncation
        # removes ~5x more posts from the uniform class.
        burst_end = quiet + 0.2 * (span - quiet)
        n_burst = int(round(0.8 * rest))
        times.append(rng.uniform(quiet, burst_end, size=n_burst))
        times.append(rng.uniform(quiet, span, size=rest - n_burst))
    else:
        times.append(rng.uniform(quiet, span, size=rest))
    return np.sort(np.concatenate(times))


def _post_text(spec: SynthSpec, label: int, rng: np.random.Generator) -> str:
    content_signal = spec.mode in ("content", "both")
    if content_signal:
        pool = _POOL_RUMOR if label == 1 else _POOL_NEWS
    else:
        pool = _POOL_NEUTRAL
    words = []
    for _ in range(spec.tokens_per_post):
        if rng.random() < 0.3:
            words.append(_STOPWORDS[rng.integers(len(_STOPWORDS))])
        else:
            words.append(pool[rng.integers(len(pool))])
    return " ".join(words)


def _one_event(spec: SynthSpec, index: int, label: int) -> Event:
    rng = np.random.default_rng([spec.seed, index])
    n_posts = max(4, int(rng.poisson(spec.posts_mean)))
    times = _post_times(spec, label, n_posts, rng)
    event_id = f"synth{spec.seed}_{index}"
    root = Post(f"{event_id}_p0", None, 0.0, _post_text(spec, label, rng), None)
    posts = [root]
    # Uniform attachment over posts already present: shapes depend only
    # on arrival order, never on the clock, so both classes share one
    # final-shape distribution.
    for j, t in enumerate(times, start=1):
        parent = posts[int(rng.integers(len(posts)))]
        kind = "repost" if rng.random() < 0.5 else "reply"
        posts.append(Post(f"{event_id}_p{j}", parent.post_id, float(t), _post_text(spec, label, rng), kind))
    ordered = [root] + sorted(posts[1:], key=lambda p: (p.timestamp, p.post_id))
    return Event(event_id=event_id, label=label, posts=tuple(ordered))


def generate(spec: SynthSpec) -> list[Event]:
    """Generate labeled events, deterministic per seed.

    The first round(n * rumor_fraction) events are rumors; each event
    draws from its own (spec.seed, event index) stream, so events are
    independent of one another.
    """
    spec.validate()
    n_rumor = round(spec.n_events * spec.rumor_fraction)
    out = []
    for i in range(spec.n_events):
        label = 1 if i < n_rumor else 0
        out.append(_one_event(spec, i, label))
    return out

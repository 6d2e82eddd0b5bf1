"""Partition a propagation tree into fixed-duration time windows.

Each window holds per-layer statistics of the posts that arrived in it:
counts n[t][j], the share of the window's posts per layer p[t][j], and a
growth ratio l[t][j] (layer j vs j-1 within the window, or layer j in
window t vs t-1, selectable). The root is excluded from the counts; it
exists in every event and carries no signal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .events import Event

RATIO_MODES = ("adjacent_layer", "adjacent_window")


@dataclass(frozen=True)
class WindowedStructure:
    """Per-window layer statistics plus a padding mask.

    Arrays have shape (T, layer_cap) where T >= n_windows; rows past
    n_windows are zero padding with mask False. Window indices are
    1-based in the public API to match the chronological numbering
    t_1..t_n of the partition.
    """

    layer_cap: int
    n_windows: int
    counts: np.ndarray  # int64 (T, L)
    shares: np.ndarray  # float64 (T, L)
    ratios: np.ndarray  # float64 (T, L)
    mask: np.ndarray  # bool (T,)

    @property
    def padded_length(self) -> int:
        return self.mask.shape[0]

    def pad_to(self, length: int) -> "WindowedStructure":
        """Append zero windows (mask False) up to ``length``."""
        t = self.padded_length
        if length < t:
            raise ValueError(f"cannot pad {t} windows down to {length}")
        if length == t:
            return self
        extra = length - t
        pad2 = ((0, extra), (0, 0))
        return WindowedStructure(
            layer_cap=self.layer_cap,
            n_windows=self.n_windows,
            counts=np.pad(self.counts, pad2),
            shares=np.pad(self.shares, pad2),
            ratios=np.pad(self.ratios, pad2),
            mask=np.pad(self.mask, (0, extra)),
        )

    def feature_matrix(self) -> np.ndarray:
        """(T, 3L) matrix of raw feature vectors; zero rows where padded."""
        return np.concatenate(
            [self.shares, self.ratios, np.log1p(self.counts.astype(np.float64))], axis=1
        )


def assign_windows(event: Event, unit_seconds: float, max_windows: int) -> dict[str, int]:
    """Map each post to its 1-based time window.

    window = floor((t - root.t) / unit_seconds) + 1, clamped into
    [1, max_windows]; the root lands in window 1.
    """
    if unit_seconds <= 0:
        raise ValueError(f"unit_seconds must be positive, got {unit_seconds}")
    if max_windows < 1:
        raise ValueError(f"max_windows must be >= 1, got {max_windows}")
    root_t = event.root.timestamp
    out = {}
    for post in event.posts:
        w = int(math.floor((post.timestamp - root_t) / unit_seconds)) + 1
        out[post.post_id] = min(max(w, 1), max_windows)
    return out


def featurize(
    event: Event,
    unit_seconds: float,
    max_windows: int,
    layer_cap: int,
    ratio_mode: str = "adjacent_layer",
) -> WindowedStructure:
    """Count non-root posts per (window, clamped layer) and derive shares and ratios.

    Layers are tree depths (root = 0); depths beyond layer_cap are
    counted at layer_cap. Divisions by zero yield 0, keeping all
    features finite.
    """
    if layer_cap < 1:
        raise ValueError(f"layer_cap must be >= 1, got {layer_cap}")
    if ratio_mode not in RATIO_MODES:
        raise ValueError(f"ratio_mode must be one of {RATIO_MODES}, got {ratio_mode!r}")
    window_of = assign_windows(event, unit_seconds, max_windows)
    depths = event.depths()

    last_occupied = 1
    for post in event.posts[1:]:
        last_occupied = max(last_occupied, window_of[post.post_id])
    n_windows = min(max_windows, max(1, last_occupied))

    counts = np.zeros((n_windows, layer_cap), dtype=np.int64)
    for post in event.posts[1:]:
        t = window_of[post.post_id]
        j = min(depths[post.post_id], layer_cap)
        counts[t - 1, j - 1] += 1

    totals = counts.sum(axis=1)
    shares = np.zeros_like(counts, dtype=np.float64)
    nonempty = totals > 0
    shares[nonempty] = counts[nonempty] / totals[nonempty, np.newaxis]

    cf = counts.astype(np.float64)
    ratios = np.zeros_like(cf)
    if ratio_mode == "adjacent_layer":
        prev = cf[:, :-1]
        np.divide(cf[:, 1:], prev, out=ratios[:, 1:], where=prev > 0)
    else:
        prev = cf[:-1, :]
        np.divide(cf[1:, :], prev, out=ratios[1:, :], where=prev > 0)

    return WindowedStructure(
        layer_cap=layer_cap,
        n_windows=n_windows,
        counts=counts,
        shares=shares,
        ratios=ratios,
        mask=np.ones(n_windows, dtype=bool),
    )


def raw_feature_vector(ws: WindowedStructure, t: int) -> np.ndarray:
    """[p_t(1..L) || l_t(1..L) || log(1 + n_t(1..L))] for 1-based window t."""
    if not 1 <= t <= ws.n_windows:
        raise IndexError(f"window {t} out of range [1, {ws.n_windows}]")
    i = t - 1
    return np.concatenate(
        [ws.shares[i], ws.ratios[i], np.log1p(ws.counts[i].astype(np.float64))]
    )

"""Training configuration: one dataclass mirrored by the JSON config file.

Paper-stated defaults: 20-minute windows, word dimension 50, filter
heights 5/6/7 with 30 maps each, dropout 0.5. Everything else is an
engineering default, exposed here so experiments can override it.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

VARIANTS = ("full", "structure_only", "structure_only_no_attention", "content_only")


@dataclass(frozen=True)
class TrainConfig:
    # windowing
    unit_seconds: float = 1200.0
    max_windows: int = 100
    layer_cap: int = 5
    ratio_mode: str = "adjacent_layer"
    # structure network
    d_s: int = 32
    hidden_size: int = 64
    attention_size: int = 64
    candidate_nl: str = "tanh"
    attend_over: str = "projected"
    # content network
    d_w: int = 50
    heights: tuple[int, ...] = (5, 6, 7)
    maps_per_height: int = 30
    k: int = 3
    n_max: int = 128
    # paragraph-vector training
    pv_epochs: int = 20
    pv_negatives: int = 5
    pv_lr: float = 0.025
    min_token_freq: int = 2
    # fusion head
    fusion_hidden: int = 64
    dropout: float = 0.5
    # optimization
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0
    variant: str = "full"

    def validate(self) -> "TrainConfig":
        positives = (
            "unit_seconds", "max_windows", "layer_cap", "d_s", "hidden_size",
            "attention_size", "d_w", "maps_per_height", "k", "n_max", "pv_epochs",
            "pv_negatives", "pv_lr", "min_token_freq", "fusion_hidden", "lr",
            "epochs", "batch_size",
        )
        for name in positives:
            if getattr(self, name) <= 0:
                raise ValueError(f"config: {name} must be positive, got {getattr(self, name)}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"config: dropout must be in [0, 1), got {self.dropout}")
        if self.variant not in VARIANTS:
            raise ValueError(f"config: variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.candidate_nl not in ("tanh", "sigmoid"):
            raise ValueError(f"config: candidate_nl must be tanh or sigmoid, got {self.candidate_nl!r}")
        if self.attend_over not in ("projected", "hidden"):
            raise ValueError(f"config: attend_over must be projected or hidden, got {self.attend_over!r}")
        if self.ratio_mode not in ("adjacent_layer", "adjacent_window"):
            raise ValueError(f"config: bad ratio_mode {self.ratio_mode!r}")
        if not self.heights or any(h < 1 for h in self.heights):
            raise ValueError(f"config: bad filter heights {self.heights}")
        if self.k > self.n_max - max(self.heights) + 1:
            raise ValueError(
                f"config: k={self.k} too large for n_max={self.n_max} and heights {self.heights}"
            )
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["heights"] = list(self.heights)
        return d

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    def with_overrides(self, **overrides) -> "TrainConfig":
        clean = {k: v for k, v in overrides.items() if v is not None}
        if "heights" in clean:
            clean["heights"] = tuple(clean["heights"])
        return replace(self, **clean).validate()


def config_from_dict(raw: dict) -> TrainConfig:
    known = {f.name for f in fields(TrainConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"config: unknown fields {sorted(unknown)}")
    if "heights" in raw:
        raw = dict(raw, heights=tuple(raw["heights"]))
    return TrainConfig(**raw).validate()


def load_config(path: str | Path) -> TrainConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise ValueError(f"config file {path}: malformed JSON ({err.msg})") from err
    return config_from_dict(raw)

"""Adam optimization, the training loop, cross-validation, and the
early-detection sweep.

Per-fold determinism: every random choice (weight init, batch order,
dropout masks, paragraph-vector training) draws from generators seeded
by (config.seed, fold index, purpose), so a rerun with the same config
reproduces results bit for bit. Embedding stores and vocabularies are
fit on training texts only; held-out posts are embedded by frozen-word
inference.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import model as model_mod
from .autodiff import Tensor, backward
from .config import TrainConfig
from .events import Event, make_folds, truncate_at_deadline
from .metrics import MetricsReport, aggregate_folds, evaluate
from .model import EventFeatures, ModelParams, forward, init_params, loss
from .textrep import PvDbow, tokenize
from .windows import featurize


@dataclass
class AdamState:
    """First/second moment estimates keyed by parameter name."""

    lr: float
    beta1: float
    beta2: float
    eps: float
    step_count: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_config(cls, config: TrainConfig) -> "AdamState":
        return cls(lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.eps)


def adam_step(named_params: list[tuple[str, Tensor]], state: AdamState) -> None:
    """One Adam update over every named parameter, in place.

    m <- b1 m + (1-b1) g; v <- b2 v + (1-b2) g^2; bias-corrected by the
    step count; w -= lr * m_hat / (sqrt(v_hat) + eps). Parameters with
    no gradient this step are treated as having g = 0.
    """
    state.step_count += 1
    t = state.step_count
    for name, p in named_params:
        g = p.grad if p.grad is not None else np.zeros_like(p.values)
        if g.shape != p.values.shape:
            raise ValueError(f"adam_step: grad shape {g.shape} != param shape {p.values.shape}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p.values)
            state.v[name] = np.zeros_like(p.values)
        state.m[name] = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        state.v[name] = state.beta2 * state.v[name] + (1.0 - state.beta2) * g * g
        m_hat = state.m[name] / (1.0 - state.beta1**t)
        v_hat = state.v[name] / (1.0 - state.beta2**t)
        p.values -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


@dataclass
class FoldResult:
    params: ModelParams
    loss_curve: list[float]
    report: MetricsReport
    best_epoch: int
    predictions: list[tuple[str, float, int]]  # event_id, y_hat, label
    final_arrays: dict[str, np.ndarray]
    pv: "PvDbow | None" = None


def _rng(config: TrainConfig, stream: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng([config.seed, stream, purpose])


def _content_matrix(
    event: Event, vectors: dict[str, np.ndarray], config: TrainConfig
) -> np.ndarray:
    """Post vectors in chronological order, capped and zero-padded.

    Keeps the earliest n_max posts (the oldest are the last to go) and
    pads with zero rows so the longest filter always fits and k-max has
    at least k positions.
    """
    rows = [vectors[p.post_id] for p in event.posts[: config.n_max]]
    min_len = max(config.heights) + config.k - 1
    while len(rows) < min_len:
        rows.append(np.zeros(config.d_w))
    return np.stack(rows)


def build_features(
    events: list[Event],
    config: TrainConfig,
    vectors: dict[str, np.ndarray] | None,
) -> dict[str, EventFeatures]:
    """Model-ready features for each event under the active variant."""
    out = {}
    need_structure = model_mod.uses_structure(config.variant)
    need_content = model_mod.uses_content(config.variant)
    for event in events:
        ws = None
        if need_structure:
            ws = featurize(
                event, config.unit_seconds, config.max_windows, config.layer_cap,
                config.ratio_mode,
            )
        content = _content_matrix(event, vectors, config) if need_content else None
        out[event.event_id] = EventFeatures(
            event_id=event.event_id, label=event.label, structure=ws, content=content
        )
    return out


def fit_embeddings(
    train_events: list[Event], config: TrainConfig, stream: int = 0
) -> PvDbow:
    """Train paragraph vectors on the training posts only."""
    corpus = [
        (post.post_id, tokenize(post.text)) for event in train_events for post in event.posts
    ]
    pv = PvDbow(
        dimension=config.d_w,
        epochs=config.pv_epochs,
        negatives=config.pv_negatives,
        lr=config.pv_lr,
        min_count=config.min_token_freq,
        seed=int(_rng(config, stream, 3).integers(2**31)),
    )
    pv.fit(corpus)
    return pv


def _embed_all(
    pv: PvDbow, events: list[Event]
) -> dict[str, np.ndarray]:
    pairs = [(post.post_id, tokenize(post.text)) for event in events for post in event.posts]
    return pv.embed_posts(pairs)


def _pad_batch(features: list[EventFeatures]) -> list[EventFeatures]:
    """Pad window sequences to the batch maximum (masked padding)."""
    if features[0].structure is None:
        return features
    longest = max(f.structure.padded_length for f in features)
    return [
        EventFeatures(
            event_id=f.event_id,
            label=f.label,
            structure=f.structure.pad_to(longest),
            content=f.content,
        )
        for f in features
    ]


def _bce(predictions: list[tuple[float, int]]) -> float:
    """Mean binary cross-entropy of (probability, label) pairs."""
    probs = np.clip([y for y, _ in predictions], 1e-12, 1.0 - 1e-12)
    labels = np.array([lbl for _, lbl in predictions], dtype=np.float64)
    return float(-(labels * np.log(probs) + (1.0 - labels) * np.log(1.0 - probs)).mean())


def _predict(
    events: list[Event],
    features: dict[str, EventFeatures],
    params: ModelParams,
    config: TrainConfig,
) -> list[tuple[str, float, int]]:
    out = []
    for event in events:
        y_hat, _ = forward(features[event.event_id], params, config, train=False)
        out.append((event.event_id, y_hat.item(), event.label))
    return out


def train_fold(
    train_events: list[Event],
    valid_events: list[Event],
    config: TrainConfig,
    stream: int = 0,
) -> FoldResult:
    """Train one model; return the best-validation-accuracy checkpoint.

    The loss curve records the summed batch cross-entropy per epoch
    (the optimization objective over the whole training set).
    """
    config.validate()
    labels = {e.label for e in train_events}
    if labels != {0, 1}:
        raise ValueError("train_fold: training split must contain both classes")

    pv = None
    vectors = None
    if model_mod.uses_content(config.variant):
        pv = fit_embeddings(train_events, config, stream)
        vectors = _embed_all(pv, list(train_events) + list(valid_events))
    features = build_features(list(train_events) + list(valid_events), config, vectors)

    init_rng = _rng(config, stream, 0)
    shuffle_rng = _rng(config, stream, 1)
    dropout_rng = _rng(config, stream, 2)
    params = init_params(config, init_rng)
    state = AdamState.for_config(config)
    named = list(params.named())

    best_key = (-1.0, -np.inf)
    best_epoch = -1
    best_arrays: dict[str, np.ndarray] = params.to_arrays()
    curve: list[float] = []
    train_ids = [e.event_id for e in train_events]
    label_of = {e.event_id: e.label for e in train_events}

    for epoch in range(config.epochs):
        order = list(train_ids)
        shuffle_rng.shuffle(order)
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            batch_ids = order[start : start + config.batch_size]
            batch = _pad_batch([features[eid] for eid in batch_ids])
            params.zero_grads()
            y_hats = [forward(f, params, config, train=True, rng=dropout_rng)[0] for f in batch]
            batch_loss = loss(y_hats, [label_of[eid] for eid in batch_ids])
            backward(batch_loss)
            adam_step(named, state)
            epoch_loss += batch_loss.item()
        curve.append(epoch_loss)

        preds = _predict(valid_events, features, params, config)
        accuracy = evaluate([(y, lbl) for _, y, lbl in preds]).accuracy
        # Equal accuracies (tiny validation sets saturate fast) resolve
        # toward the lower validation loss, not the earliest epoch.
        key = (accuracy, -_bce([(y, lbl) for _, y, lbl in preds]))
        if key > best_key:
            best_key = key
            best_epoch = epoch
            best_arrays = params.to_arrays()

    final_arrays = params.to_arrays()
    params.load_arrays(best_arrays)
    predictions = _predict(valid_events, features, params, config)
    report = evaluate([(y, lbl) for _, y, lbl in predictions])
    return FoldResult(
        params=params,
        loss_curve=curve,
        report=report,
        best_epoch=best_epoch,
        predictions=predictions,
        final_arrays=final_arrays,
        pv=pv,
    )


def predict_events(
    events: list[Event],
    params: ModelParams,
    pv,
    config: TrainConfig,
) -> list[tuple[str, float, int]]:
    """Score events that played no part in training.

    Post vectors for unseen posts come from frozen-word inference on
    the training-fitted paragraph-vector model.
    """
    vectors = _embed_all(pv, events) if model_mod.uses_content(config.variant) else None
    features = build_features(events, config, vectors)
    return _predict(events, features, params, config)


@dataclass
class CvResult:
    report: MetricsReport  # pooled test counts, per-fold breakdown attached
    fold_results: list[FoldResult]
    predictions: list[tuple[str, float, int, int]]  # event_id, y_hat, label, fold


def _inner_split(
    rest: list[Event], config: TrainConfig, fold: int
) -> tuple[list[Event], list[Event]]:
    """Carve a validation slice out of the training portion.

    Checkpoint selection must never see the held-out test fold, so the
    validation events come from ``rest``. When a class is too small to
    split (toy-sized inputs), training doubles as validation.
    """
    counts = {0: 0, 1: 0}
    for e in rest:
        counts[e.label] += 1
    inner_k = min(5, counts[0], counts[1])
    if inner_k < 2:
        return rest, rest
    seed = int(np.random.default_rng([config.seed, fold, 7]).integers(2**31))
    plan = make_folds(rest, inner_k, seed)
    train_events, valid_events = plan.split(rest, 0)
    return train_events, valid_events


def _run_fold(args: tuple) -> tuple[FoldResult, MetricsReport, list[tuple[str, float, int]]]:
    rest, test_events, config, fold = args
    inner_train, inner_valid = _inner_split(rest, config, fold)
    result = train_fold(inner_train, inner_valid, config, stream=fold)
    test_predictions = predict_events(test_events, result.params, result.pv, config)
    test_report = evaluate([(y, lbl) for _, y, lbl in test_predictions])
    return result, test_report, test_predictions


def cross_validate(
    events: list[Event],
    config: TrainConfig,
    n_folds: int = 5,
    parallel: int = 1,
) -> CvResult:
    """Held-out-fold protocol: each fold is tested exactly once.

    The remaining folds are the training pool; checkpoint selection
    uses an inner validation slice of that pool, never the test fold.
    """
    plan = make_folds(events, n_folds, config.seed)
    tasks = []
    for fold in range(n_folds):
        rest, test_events = plan.split(events, fold)
        tasks.append((rest, test_events, config, fold))
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            outcomes = list(pool.map(_run_fold, tasks))
    else:
        outcomes = [_run_fold(t) for t in tasks]
    fold_results = [r for r, _, _ in outcomes]
    report = aggregate_folds([rep for _, rep, _ in outcomes])
    predictions = [
        (eid, y, lbl, fold)
        for fold, (_, _, preds) in enumerate(outcomes)
        for eid, y, lbl in preds
    ]
    return CvResult(report=report, fold_results=fold_results, predictions=predictions)


def early_detection_sweep(
    events: list[Event],
    config: TrainConfig,
    deadlines: list[float],
    n_folds: int = 5,
    parallel: int = 1,
) -> list[tuple[float, float, MetricsReport]]:
    """Cross-validate at each detection deadline (seconds; inf = no cut).

    Returns (deadline, mean accuracy, report) per deadline. Deadlines
    must be sorted ascending.
    """
    if any(b < a for a, b in zip(deadlines, deadlines[1:])):
        raise ValueError("early_detection_sweep: deadlines must be sorted ascending")
    curve = []
    for deadline in deadlines:
        if math.isinf(deadline):
            cut = events
        else:
            cut = [truncate_at_deadline(e, deadline) for e in events]
        result = cross_validate(cut, config, n_folds=n_folds, parallel=parallel)
        curve.append((deadline, result.report.mean_accuracy(), result.report))
    return curve

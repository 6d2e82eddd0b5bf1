"""Randomized finite-difference verification of every autodiff primitive
and of the assembled model.

Inputs are drawn in [-2, 2]; ops with non-smooth points (relu, kmax,
clip) get inputs nudged away from their kinks so the central difference
is meaningful. Dropout is checked with a per-trial frozen mask.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import GradCheckReport, grad_check
from .config import TrainConfig
from .model import forward, init_params, loss
from .synthgen import SynthSpec, generate
from .trainer import build_features


@dataclass
class SuiteEntry:
    name: str
    report: GradCheckReport


def _merge(reports: list[GradCheckReport], tolerance: float) -> GradCheckReport:
    failures = [f for r in reports for f in r.failures]
    return GradCheckReport(
        passed=all(r.passed for r in reports),
        max_rel_error=max(r.max_rel_error for r in reports),
        tolerance=tolerance,
        n_checked=sum(r.n_checked for r in reports),
        failures=failures,
    )


def _smooth(rng: np.random.Generator, *shape) -> np.ndarray:
    return rng.uniform(-2.0, 2.0, size=shape)


def _away_from(rng: np.random.Generator, n: int, gap: float = 0.05) -> np.ndarray:
    """n values in [-2, 2] with pairwise gaps and distance from 0 >= gap."""
    grid = np.linspace(-2.0, 2.0, 81)
    grid = grid[np.abs(grid) >= gap]
    return rng.permutation(grid)[:n]


def primitive_suite(
    trials: int = 100, seed: int = 0, epsilon: float = 1e-5, tolerance: float = 1e-4
) -> list[SuiteEntry]:
    """Run ``trials`` randomized shape/value draws through every primitive."""
    rng = np.random.default_rng(seed)
    entries = []

    def run(name, make_case):
        reports = []
        for _ in range(trials):
            f, leaves = make_case()
            reports.append(grad_check(f, leaves, epsilon=epsilon, tolerance=tolerance))
        entries.append(SuiteEntry(name, _merge(reports, tolerance)))

    def elementwise_case(op, positive=False, nudged=False):
        def make():
            n = int(rng.integers(2, 7))
            if nudged:
                vals = _away_from(rng, n)
            elif positive:
                vals = rng.uniform(0.1, 2.0, size=n)
            else:
                vals = _smooth(rng, n)
            x = ad.parameter(vals)
            return (lambda: op(x).sum()), [x]

        return make

    run("sigmoid", elementwise_case(ad.sigmoid))
    run("tanh", elementwise_case(ad.tanh))
    run("relu", elementwise_case(ad.relu, nudged=True))
    run("exp", elementwise_case(ad.exp))
    run("log", elementwise_case(ad.log, positive=True))

    def add_case():
        mode = int(rng.integers(3))
        if mode == 0:
            n = int(rng.integers(2, 6))
            a, b = ad.parameter(_smooth(rng, n)), ad.parameter(_smooth(rng, n))
        elif mode == 1:
            a, b = ad.parameter(_smooth(rng, 3)), ad.parameter(_smooth(rng))
        else:
            a = ad.parameter(_smooth(rng, 3, 4))
            b = ad.parameter(_smooth(rng, 4))
        return (lambda: (a + b).sum()), [a, b]

    run("add", add_case)

    def sub_case():
        f, leaves = add_case()
        a, b = leaves
        return (lambda: (a - b).sum()), leaves

    run("sub", sub_case)

    def mul_case():
        mode = int(rng.integers(3))
        if mode == 0:
            n = int(rng.integers(2, 6))
            a, b = ad.parameter(_smooth(rng, n)), ad.parameter(_smooth(rng, n))
        elif mode == 1:
            a, b = ad.parameter(_smooth(rng, 2, 3)), ad.parameter(_smooth(rng))
        else:
            a, b = ad.parameter(_smooth(rng, 3, 2)), ad.parameter(_smooth(rng, 2))
        return (lambda: ad.mul(a, b).sum()), [a, b]

    run("elementwise_mul", mul_case)

    def matmul_case():
        mode = int(rng.integers(4))
        n, d, m = (int(rng.integers(2, 5)) for _ in range(3))
        if mode == 0:
            a, b = ad.parameter(_smooth(rng, n, d)), ad.parameter(_smooth(rng, d, m))
        elif mode == 1:
            a, b = ad.parameter(_smooth(rng, d)), ad.parameter(_smooth(rng, d, m))
        elif mode == 2:
            a, b = ad.parameter(_smooth(rng, n, d)), ad.parameter(_smooth(rng, d))
        else:
            a, b = ad.parameter(_smooth(rng, d)), ad.parameter(_smooth(rng, d))
        return (lambda: (a @ b).sum() if a.values.ndim + b.values.ndim > 2 else a @ b), [a, b]

    run("matmul", matmul_case)

    def softmax_case():
        n = int(rng.integers(2, 7))
        mask = rng.random(n) < 0.7
        if not mask.any():
            mask[int(rng.integers(n))] = True
        x = ad.parameter(_smooth(rng, n))
        w = ad.constant(_smooth(rng, n))
        return (lambda: ad.mul(ad.softmax_masked(x, mask), w).sum()), [x]

    run("softmax_masked", softmax_case)

    def concat_case():
        parts = [ad.parameter(_smooth(rng, int(rng.integers(1, 4)))) for _ in range(3)]
        w = ad.constant(_smooth(rng, sum(p.size for p in parts)))
        return (lambda: ad.mul(ad.concat(parts), w).sum()), parts

    run("concat", concat_case)

    def slice_case():
        n = int(rng.integers(4, 8))
        x = ad.parameter(_smooth(rng, n))
        lo = int(rng.integers(0, n - 1))
        hi = int(rng.integers(lo + 1, n + 1))
        return (lambda: ad.tensor_slice(x, slice(lo, hi)).sum()), [x]

    run("slice", slice_case)

    def reshape_case():
        x = ad.parameter(_smooth(rng, 2, 3))
        w = ad.constant(_smooth(rng, 6))
        return (lambda: ad.mul(x.reshape((6,)), w).sum()), [x]

    run("reshape", reshape_case)

    def sum_case():
        x = ad.parameter(_smooth(rng, 3, 4))
        axis = [None, 0, 1][int(rng.integers(3))]
        if axis is None:
            return (lambda: x.sum()), [x]
        w = ad.constant(_smooth(rng, x.shape[1 - axis]))
        return (lambda: ad.mul(x.sum(axis=axis), w).sum()), [x]

    run("sum", sum_case)

    def mean_case():
        x = ad.parameter(_smooth(rng, 3, 4))
        axis = [None, 0, 1][int(rng.integers(3))]
        if axis is None:
            return (lambda: x.mean()), [x]
        w = ad.constant(_smooth(rng, x.shape[1 - axis]))
        return (lambda: ad.mul(x.mean(axis=axis), w).sum()), [x]

    run("mean", mean_case)

    def clip_case():
        vals = _away_from(rng, 5)
        x = ad.parameter(vals)
        return (lambda: ad.clip(x, -1.5 + 1e-3, 1.5 - 1e-3).sum()), [x]

    run("clip", clip_case)

    def dropout_case():
        n = int(rng.integers(3, 8))
        x = ad.parameter(_smooth(rng, n))
        mask_seed = int(rng.integers(2**31))

        def f():
            local = np.random.default_rng(mask_seed)
            return ad.dropout(x, 0.4, train=True, rng=local).sum()

        return f, [x]

    run("dropout", dropout_case)

    def conv_case():
        d = int(rng.integers(1, 4))
        h = int(rng.integers(1, 4))
        n = h + int(rng.integers(1, 5))
        x = ad.parameter(_smooth(rng, n, d))
        filt = ad.parameter(_smooth(rng, h, d))
        w = ad.constant(_smooth(rng, n - h + 1))
        return (lambda: ad.mul(ad.conv1d_valid(x, filt), w).sum()), [x, filt]

    run("conv1d_valid", conv_case)

    def kmax_case():
        n = int(rng.integers(3, 9))
        x = ad.parameter(_away_from(rng, n))
        k = int(rng.integers(1, n + 1))
        w = ad.constant(_smooth(rng, k))
        return (lambda: ad.mul(ad.kmax_pool(x, k), w).sum()), [x]

    run("kmax_pool", kmax_case)

    return entries


def micro_config() -> TrainConfig:
    """Smallest full-variant configuration that exercises every block."""
    return TrainConfig(
        unit_seconds=1800.0,
        max_windows=6,
        layer_cap=3,
        d_s=6,
        hidden_size=5,
        attention_size=4,
        d_w=6,
        heights=(2, 3),
        maps_per_height=2,
        k=2,
        n_max=8,
        fusion_hidden=6,
        dropout=0.0,
        variant="full",
    )


def full_model_report(
    seed: int = 0, epsilon: float = 1e-5, tolerance: float = 1e-3
) -> GradCheckReport:
    """Finite-difference check of d(batch loss)/d(every parameter).

    Two generated events (one per class) make the micro-batch; dropout
    stays off so the forward pass is deterministic.
    """
    config = micro_config()
    events = generate(
        SynthSpec(n_events=2, mode="both", seed=seed, posts_mean=8.0, span_seconds=7200.0)
    )
    rng = np.random.default_rng(seed)
    vectors = {
        p.post_id: rng.normal(0.0, 0.3, size=config.d_w) for e in events for p in e.posts
    }
    features = build_features(events, config, vectors)
    params = init_params(config, rng)
    labels = [e.label for e in events]
    feats = [features[e.event_id] for e in events]

    def f():
        y_hats = [forward(fe, params, config, train=False)[0] for fe in feats]
        return loss(y_hats, labels)

    return grad_check(f, params.tensors(), epsilon=epsilon, tolerance=tolerance)

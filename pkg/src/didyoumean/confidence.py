"""Confidence scores and calibration diagnostics.

Token confidence is the largest probability in one step distribution;
sequence confidence folds a decode's per-step values with min. Reliability
binning summarizes how well those scores track correctness, and
stratified_sample assembles fixed-size study batches from the
low-confidence region.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable

from .errors import BinUnderflow, EmptyDecode, EmptyInput
from .model import ScoredDecode, StepDistribution

__all__ = [
    "CalibrationReport",
    "ConfidenceBin",
    "reliability",
    "sequence_confidence",
    "stratified_sample",
    "token_confidence",
]


def token_confidence(step: StepDistribution) -> float:
    """Maximum probability across the output vocabulary at one step."""
    return max(p for _, p in step.entries)


def sequence_confidence(decode: ScoredDecode) -> float:
    """Minimum token confidence across a decode.

    An unterminated decode still gets a score from the tokens it did
    produce; callers that care must consult decode.terminated themselves.
    Raises EmptyDecode when no tokens were emitted at all.
    """
    if not decode.token_confidences:
        raise EmptyDecode("decode produced no tokens to score")
    return min(decode.token_confidences)


@dataclass(frozen=True)
class ConfidenceBin:
    """One reliability bin over [lower, upper).

    mean_confidence and accuracy are 0.0 for empty bins, which then
    contribute nothing to the calibration error.
    """

    lower: float
    upper: float
    count: int
    mean_confidence: float
    accuracy: float

    def to_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "count": self.count,
            "mean_confidence": self.mean_confidence,
            "accuracy": self.accuracy,
        }


@dataclass(frozen=True)
class CalibrationReport:
    """Reliability bins plus their expected calibration error."""

    bins: tuple[ConfidenceBin, ...]
    ece: float

    def to_dict(self) -> dict:
        return {"bins": [b.to_dict() for b in self.bins], "ece": self.ece}

    def table(self) -> str:
        """Plain-text reliability table, one row per bin."""
        lines = [f"{'bin':>14} {'count':>6} {'conf':>7} {'acc':>7}"]
        for b in self.bins:
            span = f"[{b.lower:.2f}, {b.upper:.2f})"
            lines.append(
                f"{span:>14} {b.count:>6d} {b.mean_confidence:>7.3f} {b.accuracy:>7.3f}"
            )
        lines.append(f"ece = {self.ece:.4f}")
        return "\n".join(lines)


def reliability(
    pairs: Iterable[tuple[float, bool]], n_bins: int = 10
) -> CalibrationReport:
    """Bin (confidence, correct) pairs into an equal-width reliability report.

    Bins are half-open except the last, which is closed so a confidence of
    exactly 1.0 still lands somewhere. ECE weights each bin's
    |accuracy - mean confidence| gap by its share of the input.
    """
    data = list(pairs)
    if not data:
        raise EmptyInput("reliability needs at least one (confidence, correct) pair")
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins}")
    counts = [0] * n_bins
    conf_sums = [0.0] * n_bins
    hits = [0] * n_bins
    for conf, correct in data:
        if not 0.0 <= conf <= 1.0:
            raise ValueError(f"confidence out of range: {conf!r}")
        i = min(int(conf * n_bins), n_bins - 1)
        counts[i] += 1
        conf_sums[i] += conf
        hits[i] += bool(correct)
    total = len(data)
    bins = []
    ece = 0.0
    for i in range(n_bins):
        mean_conf = conf_sums[i] / counts[i] if counts[i] else 0.0
        accuracy = hits[i] / counts[i] if counts[i] else 0.0
        bins.append(
            ConfidenceBin(i / n_bins, (i + 1) / n_bins, counts[i], mean_conf, accuracy)
        )
        ece += counts[i] / total * abs(accuracy - mean_conf)
    return CalibrationReport(tuple(bins), ece)


def stratified_sample(
    items: Iterable[tuple[str, float]],
    n_bins: int = 10,
    per_bin: int = 10,
    max_conf: float = 0.6,
    seed: int = 0,
) -> list[str]:
    """Draw per_bin ids from each equal-width confidence bin of [0, max_conf).

    Items at or above max_conf are out of scope and ignored. Buckets are
    sorted by id before the seeded draw so the result does not depend on
    input order. Raises BinUnderflow for the lowest-indexed bin that cannot
    fill its quota.
    """
    if n_bins < 1 or per_bin < 1:
        raise ValueError("n_bins and per_bin must both be >= 1")
    if not 0.0 < max_conf <= 1.0:
        raise ValueError(f"max_conf must lie in (0, 1], got {max_conf}")
    width = max_conf / n_bins
    buckets: list[list[tuple[str, float]]] = [[] for _ in range(n_bins)]
    for item_id, conf in items:
        if not 0.0 <= conf <= 1.0:
            raise ValueError(f"confidence out of range: {conf!r}")
        if conf >= max_conf:
            continue
        buckets[min(int(conf / width), n_bins - 1)].append((item_id, conf))
    rng = random.Random(seed)
    chosen: list[str] = []
    for i, bucket in enumerate(buckets):
        if len(bucket) < per_bin:
            raise BinUnderflow(i)
        bucket.sort()
        chosen.extend(item_id for item_id, _ in rng.sample(bucket, per_bin))
    return chosen

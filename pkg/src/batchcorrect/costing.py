"""Human-effort accounting in seconds.

Three primitive action prices: verifying a shown label, selecting from a
short suggestion list, and typing a word out. The two naive baselines
price per-instance work straight off the detection categories; batch cost
prices an action log produced by cluster-level correction. Relative cost
divides by the type-everything baseline, which is how results are compared.

With integer prices all totals stay exact integers; ratios alone are float.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

from batchcorrect.corpus import Corpus
from batchcorrect.lexicon import (
    DEFAULT_MAX_DISTANCE,
    DEFAULT_TOP_K,
    Categories,
    Dictionary,
)

DEFAULT_VERIFY_SECONDS = 1
DEFAULT_SELECT_SECONDS = 5
DEFAULT_TYPE_SECONDS = 15


@dataclass(frozen=True)
class CostModel:
    """Per-action prices in seconds; verification ≤ selection ≤ typing.

    Pass allow_unordered=True to experiment with prices that break the
    ordering; that downgrades the violation to a warning.
    """

    c_v: float = DEFAULT_VERIFY_SECONDS
    c_d: float = DEFAULT_SELECT_SECONDS
    c_t: float = DEFAULT_TYPE_SECONDS
    allow_unordered: bool = False

    def __post_init__(self):
        if min(self.c_v, self.c_d, self.c_t) < 0:
            raise ValueError("action costs must be non-negative")
        if not self.c_v <= self.c_d <= self.c_t:
            if not self.allow_unordered:
                raise ValueError(
                    f"expected c_v <= c_d <= c_t, got ({self.c_v}, {self.c_d}, {self.c_t})"
                )
            warnings.warn(
                f"cost ordering c_v <= c_d <= c_t violated: "
                f"({self.c_v}, {self.c_d}, {self.c_t})",
                stacklevel=2,
            )


DEFAULT_COST_MODEL = CostModel()


@dataclass(frozen=True)
class CostReport:
    """One correction run's price tag, absolute and relative to typing."""

    absolute_seconds: float
    v_t: int
    v_d: int
    v_v: int
    typing_seconds: float
    selection_seconds: float
    verification_seconds: float
    baseline_typing_seconds: float | None = None
    relative_to_typing: float | None = None
    method_tag: str = ""

    def __post_init__(self):
        if self.absolute_seconds != (
            self.typing_seconds + self.selection_seconds + self.verification_seconds
        ):
            raise ValueError("absolute_seconds does not equal the breakdown sum")


def naive_typing_cost(categories: Categories, model: CostModel = DEFAULT_COST_MODEL):
    """Type every wrongly-predicted flagged word, glance at the rest of the flags."""
    return len(categories.etp) * model.c_t + len(categories.efp) * model.c_v


def naive_selection_cost(
    categories: Categories,
    corpus: Corpus,
    dictionary: Dictionary,
    model: CostModel = DEFAULT_COST_MODEL,
    max_distance: int = DEFAULT_MAX_DISTANCE,
    top_k: int = DEFAULT_TOP_K,
):
    """Like naive typing, but a flagged error whose truth appears among the
    prediction's fuzzy suggestions is fixed by a cheaper pick-from-list."""
    selectable = 0
    for pos in categories.etp:
        inst = corpus.instances[pos]
        if inst.ground_truth is None:
            raise ValueError(f"instance {inst.id!r} has no ground truth")
        offered = dictionary.suggest(inst.prediction, max_distance, top_k)
        if any(s.word == inst.ground_truth for s in offered):
            selectable += 1
    typed = len(categories.etp) - selectable
    return typed * model.c_t + selectable * model.c_d + len(categories.efp) * model.c_v


def batch_cost(
    log,
    model: CostModel = DEFAULT_COST_MODEL,
    baseline_typing_seconds: float | None = None,
    method_tag: str = "",
) -> CostReport:
    """Price an action log: v_t typed + v_d selected + v_v verified actions."""
    typing = log.v_t * model.c_t
    selection = log.v_d * model.c_d
    verification = log.v_v * model.c_v
    absolute = typing + selection + verification
    relative = None
    if baseline_typing_seconds is not None and baseline_typing_seconds > 0:
        relative = absolute / baseline_typing_seconds
    return CostReport(
        absolute_seconds=absolute,
        v_t=log.v_t,
        v_d=log.v_d,
        v_v=log.v_v,
        typing_seconds=typing,
        selection_seconds=selection,
        verification_seconds=verification,
        baseline_typing_seconds=baseline_typing_seconds,
        relative_to_typing=relative,
        method_tag=method_tag,
    )


def relative_cost(cost, baseline):
    """cost / baseline; the baseline must be positive."""
    if baseline <= 0:
        raise ValueError("baseline must be positive")
    return cost / baseline


def write_report(report: CostReport, path: str | Path) -> None:
    """Flat key=value file, one entry per line, stable key order."""
    pairs = [
        ("method", report.method_tag),
        ("absolute_seconds", report.absolute_seconds),
        ("v_t", report.v_t),
        ("v_d", report.v_d),
        ("v_v", report.v_v),
        ("typing_seconds", report.typing_seconds),
        ("selection_seconds", report.selection_seconds),
        ("verification_seconds", report.verification_seconds),
        ("baseline_typing_seconds", report.baseline_typing_seconds),
        ("relative_to_typing", report.relative_to_typing),
    ]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, value in pairs:
            fh.write(f"{key}={'' if value is None else value}\n")


def read_report(path: str | Path) -> dict[str, str]:
    """Parse a report file back into raw string values."""
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            key, _, value = line.partition("=")
            values[key] = value
    return values

"""Server-side aggregation of per-class client knowledge."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .client import ClassKnowledge
from .errors import InvalidInputError, MissingClassError
from .numerics import check_simplex


@dataclass
class AggregatedKnowledge:
    """Count-weighted mean soft label per class, plus the total counts."""

    soft_labels: np.ndarray   # (C, C)
    counts: np.ndarray        # (C,) totals across clients
    round_index: int = field(default=-1)

    @property
    def n_classes(self) -> int:
        return len(self.counts)


def aggregate(knowledges: list[ClassKnowledge]) -> AggregatedKnowledge:
    """Combine client knowledge into the per-class weighted average.

    Clients that hold no sample of a class contribute nothing to it; a class
    that no client holds at all aborts with :class:`MissingClassError` rather
    than being silently imputed.
    """
    if not knowledges:
        raise InvalidInputError("need at least one client's knowledge")
    c = knowledges[0].n_classes
    if any(k.n_classes != c for k in knowledges):
        raise InvalidInputError("clients disagree on the number of classes")
    rounds = {k.round_index for k in knowledges}
    if len(rounds) != 1:
        raise InvalidInputError(f"knowledge records span multiple rounds: {sorted(rounds)}")

    totals = np.zeros(c, dtype=np.int64)
    weighted = np.zeros((c, c))
    for k in knowledges:
        mask = k.present()
        totals += k.counts
        weighted[mask] += k.counts[mask, None] * k.soft_labels[mask]
    missing = np.flatnonzero(totals == 0)
    if len(missing):
        raise MissingClassError(int(missing[0]))
    out = weighted / totals[:, None]
    check_simplex(out, what="aggregated knowledge")
    return AggregatedKnowledge(out, totals, round_index=knowledges[0].round_index)

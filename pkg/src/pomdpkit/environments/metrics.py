"""Safety statistics over episode outcomes."""

from __future__ import annotations

from typing import TYPE_CHECKING, Sequence

if TYPE_CHECKING:
    from ..evaluation import EpisodeRecord


def safety_metrics(records: "Sequence[EpisodeRecord]") -> tuple[float, int]:
    """(violation_rate, total_violations) over a cohort of episodes.

    violation_rate is the fraction of episodes with at least one safety event;
    total_violations sums event counts across episodes.
    """
    if not records:
        raise ValueError("safety_metrics needs at least one episode record")
    violating = sum(1 for r in records if r.safety_event_count > 0)
    total = sum(r.safety_event_count for r in records)
    return violating / len(records), total

"""Classify finished episodes by the equipment the agent ended up holding.

The label is read off the recorded observations alone - channels 6-8 carry
the agent's own equipment as full broadcast planes - so classification
works identically for full and windowed observations and never needs the
environment that produced the trajectory.

Episodes that end without a pickup (timeouts before any commitment)
classify as None. Downstream consumers treat None as miscoordination for
metrics purposes and exclude such episodes from per-action return
statistics, because there is no action to attribute the return to.
"""

from __future__ import annotations

import numpy as np

from .gridworld import CH_SELF_EQ
from .replay import Trajectory

__all__ = ["classify", "label_from_holding", "ACTION_LABELS"]

ACTION_LABELS = ("A", "B", "C")


def classify(trajectory: Trajectory) -> str | None:
    """Equipment label ("A"/"B"/"C") committed to during the episode.

    Reads the final observation's own-equipment planes. Returns None when
    no plane is set (the agent never picked anything up).
    """
    final = trajectory.obs[-1]
    held = [u for u in ACTION_LABELS if final[CH_SELF_EQ[u]].any()]
    if len(held) > 1:
        raise ValueError(f"corrupt observation: multiple equipment planes {held}")
    return held[0] if held else None


def label_from_holding(holding: str | None) -> str | None:
    """Validate and pass through an environment-side holding record."""
    if holding is not None and holding not in ACTION_LABELS:
        raise ValueError(f"unknown equipment label {holding!r}")
    return holding

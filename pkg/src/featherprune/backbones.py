"""Sparsity scheduling and per-epoch threshold assignment.

The schedule ramps the requested sparsity cubically from 0 to the final target
over the first ``ramp_fraction`` of training (no dense warm-up phase) and
holds it constant afterwards. Two backbones turn a requested sparsity into
per-layer thresholds:

* global: one threshold computed over the pooled magnitudes of every prunable
  layer, written into all of them;
* uniform: each prunable layer gets its own threshold so that every layer
  reaches the same sparsity; the first convolutional layer can be exempted
  (kept dense), which is the default for this backbone.

Biases and non-prunable parameters never participate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .feather import PruneLayerState
from .thresholding import select_threshold

__all__ = [
    "SparsitySchedule",
    "BackboneKind",
    "cubic_sparsity",
    "assign_thresholds_global",
    "assign_thresholds_uniform",
    "assign_thresholds",
    "measured_sparsity",
]

GLOBAL = "global"
UNIFORM = "uniform"


@dataclass(frozen=True)
class SparsitySchedule:
    final_sparsity: float
    total_epochs: int
    ramp_fraction: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.final_sparsity < 1.0:
            raise ValueError(f"final sparsity must be in [0, 1), got {self.final_sparsity}")
        if self.total_epochs < 1:
            raise ValueError(f"total epochs must be >= 1, got {self.total_epochs}")
        if not 0.0 < self.ramp_fraction <= 1.0:
            raise ValueError(f"ramp fraction must be in (0, 1], got {self.ramp_fraction}")


@dataclass(frozen=True)
class BackboneKind:
    """Backbone selector; ``exempt_first_conv=None`` resolves to the backbone
    default (True for uniform, False for global)."""

    kind: str = GLOBAL
    exempt_first_conv: Optional[bool] = None

    def __post_init__(self):
        if self.kind not in (GLOBAL, UNIFORM):
            raise ValueError(f"unknown backbone kind {self.kind!r}")
        if self.exempt_first_conv is None:
            object.__setattr__(self, "exempt_first_conv", self.kind == UNIFORM)


def cubic_sparsity(epoch: int, schedule: SparsitySchedule) -> float:
    """Requested global sparsity for an epoch.

    s(e) = S_final * (1 - (1 - min(e / (ramp * E), 1))^3); the final target is
    reached exactly at the end of the ramp and held from then on.
    """
    if not 0 <= epoch < schedule.total_epochs:
        raise ValueError(
            f"epoch {epoch} outside [0, {schedule.total_epochs})"
        )
    progress = min(epoch / (schedule.ramp_fraction * schedule.total_epochs), 1.0)
    return schedule.final_sparsity * (1.0 - (1.0 - progress) ** 3)


def _first_conv(states: Sequence[PruneLayerState]) -> Optional[PruneLayerState]:
    for state in states:
        if state.kind == "conv":
            return state
    return None


def _prunable(layers: Sequence[PruneLayerState]) -> list[PruneLayerState]:
    states = [s for s in layers if s.prunable]
    if not states:
        raise ValueError("no prunable layers to assign thresholds to")
    return states


def assign_thresholds_global(
    layers: Sequence[PruneLayerState], sparsity: float, exempt_first_conv: bool = False
) -> None:
    """Write one pooled-magnitude threshold into every prunable layer."""
    if not 0.0 <= sparsity < 1.0:
        raise ValueError(f"sparsity must be in [0, 1), got {sparsity}")
    states = _prunable(layers)
    exempt = _first_conv(states) if exempt_first_conv else None
    pooled = [s for s in states if s is not exempt]
    magnitudes = np.concatenate([np.abs(s.weights.data).ravel() for s in pooled])
    threshold = select_threshold(magnitudes, sparsity)
    for state in pooled:
        state.threshold = threshold
    if exempt is not None:
        exempt.threshold = 0.0


def assign_thresholds_uniform(
    layers: Sequence[PruneLayerState], sparsity: float, exempt_first_conv: bool = True
) -> None:
    """Give every prunable layer its own threshold at the same sparsity."""
    if not 0.0 <= sparsity < 1.0:
        raise ValueError(f"sparsity must be in [0, 1), got {sparsity}")
    states = _prunable(layers)
    exempt = _first_conv(states) if exempt_first_conv else None
    for state in states:
        if state is exempt:
            state.threshold = 0.0
        else:
            state.threshold = select_threshold(np.abs(state.weights.data).ravel(), sparsity)


def assign_thresholds(
    layers: Sequence[PruneLayerState], sparsity: float, backbone: BackboneKind
) -> None:
    if backbone.kind == GLOBAL:
        assign_thresholds_global(layers, sparsity, backbone.exempt_first_conv)
    else:
        assign_thresholds_uniform(layers, sparsity, backbone.exempt_first_conv)


def measured_sparsity(layers: Sequence[PruneLayerState]) -> float:
    """Fraction of prunable weights at or below their layer's threshold."""
    pruned = 0
    total = 0
    for state in layers:
        if not state.prunable:
            continue
        if state.threshold is None:
            raise ValueError(f"layer {state.name!r} has no threshold assigned")
        magnitude = np.abs(state.weights.data)
        pruned += int((magnitude <= state.threshold).sum())
        total += magnitude.size
    if total == 0:
        raise ValueError("no prunable layers")
    return pruned / total

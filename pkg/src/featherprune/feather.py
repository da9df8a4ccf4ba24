"""Straight-through sparse training block with pruned-gradient scaling.

Each prunable layer keeps its dense weights and, per forward pass, computes a
thresholded copy that the network actually uses. The backward pass treats the
thresholding as the identity (straight-through), except that gradient entries
at pruned positions are multiplied by a constant scale theta in [0, 1]:

    dense_grad[i] = grad_wrt_sparse[i]            if |w[i]| > T
    dense_grad[i] = theta * grad_wrt_sparse[i]    otherwise

theta = 1 recovers the standard straight-through update, theta = 0 blocks all
gradient flow to pruned weights. Intermediate values damp mask churn, which
matters at extreme sparsity; the automatic policy picks 1.0 for moderate final
sparsity targets and drops to 0.5 for targets at or above 95%.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .tensor import Tensor
from .thresholding import ThresholdOperator, apply_threshold

__all__ = [
    "PruneLayerState",
    "GradScalePolicy",
    "feather_forward",
    "feather_backward",
    "select_theta",
]

FIXED = "fixed"
AUTO_STEP = "auto_step"


@dataclass
class PruneLayerState:
    """Pruning state attached to one layer's weight tensor.

    ``threshold`` is assigned by a backbone before each epoch; ``mask`` always
    reflects the most recent forward pass over the current weights.
    """

    name: str
    kind: str  # "conv" or "fc"
    weights: Tensor
    op: ThresholdOperator
    theta: float = 1.0
    threshold: Optional[float] = None
    mask: Optional[np.ndarray] = None
    prunable: bool = True

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must be in [0, 1], got {self.theta}")
        if self.kind not in ("conv", "fc"):
            raise ValueError(f"layer kind must be 'conv' or 'fc', got {self.kind!r}")


@dataclass(frozen=True)
class GradScalePolicy:
    """How theta is chosen from the final sparsity target.

    ``fixed`` always uses ``theta``; ``auto_step`` uses 1.0 below the sparsity
    cutoff and ``low_theta`` at or above it.
    """

    mode: str = AUTO_STEP
    theta: float = 1.0
    threshold_sparsity: float = 0.95
    low_theta: float = 0.5

    def __post_init__(self):
        if self.mode not in (FIXED, AUTO_STEP):
            raise ValueError(f"unknown grad-scale mode {self.mode!r}")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must be in [0, 1], got {self.theta}")
        if not 0.0 <= self.low_theta <= 1.0:
            raise ValueError(f"low_theta must be in [0, 1], got {self.low_theta}")
        if not 0.0 < self.threshold_sparsity < 1.0:
            raise ValueError(
                f"threshold_sparsity must be in (0, 1), got {self.threshold_sparsity}"
            )


def select_theta(policy: GradScalePolicy, final_sparsity: float) -> float:
    """Choose the pruned-gradient scale once, at the start of training."""
    if not 0.0 <= final_sparsity <= 1.0:
        raise ValueError(f"final sparsity must be in [0, 1], got {final_sparsity}")
    if policy.mode == FIXED:
        return policy.theta
    return 1.0 if final_sparsity < policy.threshold_sparsity else policy.low_theta


def feather_forward(state: PruneLayerState) -> Tensor:
    """Threshold the dense weights for this layer's forward computation.

    Refreshes ``state.mask`` from the current weights and threshold and returns
    the sparse weights as a gradient-tracking leaf tensor. The dense weights
    are untouched.
    """
    if state.threshold is None:
        raise ValueError(f"layer {state.name!r} has no threshold assigned")
    pruned, mask = apply_threshold(state.weights.data, state.threshold, state.op)
    state.mask = mask
    return Tensor(pruned, requires_grad=True)


def feather_backward(state: PruneLayerState, grad_wrt_sparse: np.ndarray) -> np.ndarray:
    """Scale the sparse-weight gradient and install it on the dense weights.

    Must be called with the mask from the immediately preceding forward pass;
    active positions pass through unchanged, pruned positions are scaled by
    theta.
    """
    if state.mask is None:
        raise ValueError(f"layer {state.name!r} has no mask; run feather_forward first")
    grad = np.asarray(grad_wrt_sparse)
    if grad.shape != state.mask.shape:
        raise ValueError(
            f"gradient shape {grad.shape} does not match mask shape {state.mask.shape}"
        )
    scale = np.where(state.mask, np.float32(1.0), np.float32(state.theta))
    dense_grad = grad * scale
    state.weights.grad = dense_grad
    return dense_grad

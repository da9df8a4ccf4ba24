"""Mask-stability and FLOPs measurement over training runs.

Everything here is read-only over arrays already produced by the trainer;
nothing mutates model or mask state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MaskSnapshot",
    "PearsonResult",
    "LayerFlops",
    "FlopsReport",
    "mask_pearson",
    "stability_curve",
    "curve_to_csv",
    "flops_count",
]


@dataclass
class MaskSnapshot:
    """Boolean keep-masks for every layer at the end of one epoch.

    ``masks`` is insertion-ordered by model layer; concatenation order for the
    stability statistics follows that order and must match across snapshots.
    """

    epoch: int
    masks: dict[str, np.ndarray]


class PearsonResult(float):
    """A correlation value carrying a flag for the zero-variance fallback."""

    degenerate: bool

    def __new__(cls, value: float, degenerate: bool = False):
        obj = super().__new__(cls, value)
        obj.degenerate = degenerate
        return obj


def mask_pearson(a: np.ndarray, b: np.ndarray) -> PearsonResult:
    """Pearson r between two boolean masks encoded as {0,1}.

    A constant vector has no defined correlation; that case returns 1.0 when
    the inputs are identical and 0.0 otherwise, with ``degenerate`` set.
    """
    av = np.asarray(a).ravel().astype(bool)
    bv = np.asarray(b).ravel().astype(bool)
    if av.size != bv.size:
        raise ValueError(f"mask length mismatch: {av.size} vs {bv.size}")
    if av.size < 2:
        raise ValueError("Pearson needs at least 2 entries")
    if bool(av.all() or (~av).all() or bv.all() or (~bv).all()):
        return PearsonResult(1.0 if np.array_equal(av, bv) else 0.0, degenerate=True)
    if np.array_equal(av, bv):
        # corrcoef can land one ulp under 1.0; identical masks are exactly 1.
        return PearsonResult(1.0)
    af = av.astype(np.float64)
    bf = bv.astype(np.float64)
    r = float(np.corrcoef(af, bf)[0, 1])
    return PearsonResult(max(-1.0, min(1.0, r)))


def _concat_masks(snapshot: MaskSnapshot) -> np.ndarray:
    if not snapshot.masks:
        raise ValueError(f"snapshot for epoch {snapshot.epoch} holds no masks")
    return np.concatenate([np.asarray(m).ravel().astype(bool)
                           for m in snapshot.masks.values()])


def stability_curve(snapshots: list[MaskSnapshot]) -> list[tuple[int, float]]:
    """Per-epoch Pearson r of each snapshot's global mask against the final one."""
    if not snapshots:
        raise ValueError("no mask snapshots to correlate")
    final = _concat_masks(snapshots[-1])
    curve = []
    for snap in snapshots:
        current = _concat_masks(snap)
        if current.size != final.size:
            raise ValueError(
                f"epoch {snap.epoch} mask vector has {current.size} entries, "
                f"final has {final.size}"
            )
        curve.append((snap.epoch, float(mask_pearson(current, final))))
    return curve


def curve_to_csv(curve: list[tuple[int, float]]) -> str:
    lines = ["epoch,r"]
    for epoch, r in curve:
        lines.append(f"{epoch},{r!r}")
    return "\n".join(lines) + "\n"


@dataclass
class LayerFlops:
    layer: str
    dense_flops: int
    sparse_flops: int


@dataclass
class FlopsReport:
    """Dense and kept-weight FLOPs per layer (2 ops per multiply-accumulate)."""

    layers: list[LayerFlops]

    @property
    def total_dense(self) -> int:
        return sum(l.dense_flops for l in self.layers)

    @property
    def total_sparse(self) -> int:
        return sum(l.sparse_flops for l in self.layers)

    def to_csv(self) -> str:
        lines = ["layer,dense_flops,sparse_flops"]
        for l in self.layers:
            lines.append(f"{l.layer},{l.dense_flops},{l.sparse_flops}")
        lines.append(f"total,{self.total_dense},{self.total_sparse}")
        return "\n".join(lines) + "\n"


def flops_count(model, masks: dict[str, np.ndarray]) -> FlopsReport:
    """FLOPs for one forward pass at batch size 1, bias terms ignored.

    Fully connected: dense 2*in*out, sparse 2*nnz. Convolution: per output
    position every kept kernel weight costs one multiply-accumulate, so dense
    2*F*C*kh*kw*H'*W' and sparse 2*nnz*H'*W'.
    """
    rows = []
    for layer, out_shape in zip(model.layers, model.layer_output_shapes()):
        if layer.name not in masks:
            raise ValueError(f"no mask supplied for layer {layer.name}")
        mask = np.asarray(masks[layer.name])
        if mask.shape != layer.weight.shape:
            raise ValueError(
                f"mask shape {mask.shape} does not match layer {layer.name} "
                f"weights {layer.weight.shape}"
            )
        nnz = int(mask.astype(bool).sum())
        if layer.kind == "conv":
            positions = int(out_shape[1]) * int(out_shape[2])
            dense = 2 * math.prod(layer.weight.shape) * positions
            sparse = 2 * nnz * positions
        else:
            dense = 2 * math.prod(layer.weight.shape)
            sparse = 2 * nnz
        rows.append(LayerFlops(layer.name, dense, sparse))
    return FlopsReport(rows)

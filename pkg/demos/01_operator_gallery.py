"""Tour of the threshold operator family.

The power-p operator P_T(w) = sign(w) * (|w|^p - T^p)^(1/p) spans the gap
between soft thresholding (p=1, continuous but biased by T everywhere) and
hard thresholding (p -> inf, unbiased but discontinuous at the cut). This
script prints the family side by side so the tradeoff is visible in numbers:
how fast each operator's bias decays as |w| grows past T, and how sharply
each one rises just above the cut.
"""

import numpy as np

from featherprune import ThresholdOperator, apply_threshold, select_threshold

T = 0.5
OPS = [
    ("soft (p=1)", ThresholdOperator.soft()),
    ("p=2", ThresholdOperator.power(2.0)),
    ("p=3", ThresholdOperator.power(3.0)),
    ("p=8", ThresholdOperator.power(8.0)),
    ("hard", ThresholdOperator.hard()),
]


def gallery():
    ws = np.float32([0.3, 0.5, 0.5001, 0.55, 0.7, 1.0, 2.0])
    print(f"threshold T = {T}; entries are P_T(w)\n")
    header = "w".rjust(8) + "".join(name.rjust(12) for name, _ in OPS)
    print(header)
    for w in ws:
        row = f"{w:8.4f}"
        for _, op in OPS:
            out, _ = apply_threshold(np.float32([w]), T, op)
            row += f"{float(out[0]):12.4f}"
        print(row)

    print("\nbias w - P_T(w) for survivors (unbiasedness as w grows):\n")
    print(header)
    for w in ws[ws > T]:
        row = f"{w:8.4f}"
        for _, op in OPS:
            out, _ = apply_threshold(np.float32([w]), T, op)
            row += f"{w - float(out[0]):12.4f}"
        print(row)


def selection():
    rng = np.random.default_rng(7)
    weights = rng.standard_normal(10_000).astype(np.float32)
    print("\nselect_threshold on 10k Gaussian weights:")
    for target in (0.5, 0.9, 0.99):
        t = select_threshold(np.abs(weights), target)
        _, mask = apply_threshold(weights, t, ThresholdOperator.power(3.0))
        achieved = 1.0 - mask.mean()
        print(f"  target {target:4.2f} -> T = {t:.4f}, achieved {achieved:.4f}")


if __name__ == "__main__":
    gallery()
    selection()

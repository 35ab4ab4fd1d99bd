"""Audit taboo-annotated datasets for community bias.

For each (test set, community) pair: what share of the taboo-labeled texts
is highly aligned (score >= tau) with that community's language? Shares far
from zero mean the dataset labels the community's ordinary language taboo;
uneven shares mean the bias targets specific communities. Cells more than
one sample standard deviation above the column mean are flagged, and every
flagged (instance, community) pair gets a reset flag for human review.

Run:  python demos/04_audit_dataset.py
"""

import numpy as np

from clcaudit import (
    TabooInstance,
    build_report,
    dataset_bias_matrix,
    flag_for_reset,
    render_matrix,
)

rng = np.random.default_rng(5)
TAGS = ("NA", "HI", "HA", "SA", "AA")
TAU = 0.85


def column(label, high_share_by_tag, n=800):
    """Alignment scores for one labeled test set under each community model."""
    per_tag = {}
    for tag in TAGS:
        share = high_share_by_tag[tag]
        high = rng.uniform(TAU, 1.0, size=round(n * share))
        low = rng.uniform(0.0, TAU - 1e-9, size=n - len(high))
        per_tag[tag] = np.concatenate([high, low])
    return (label, per_tag)


# One even column and one skewed against AA, the usual published pattern.
columns = [
    column("EvenSet-HATE", {"NA": 0.05, "HI": 0.06, "HA": 0.05, "SA": 0.06, "AA": 0.05}),
    column("SkewedSet-OFF", {"NA": 0.04, "HI": 0.05, "HA": 0.04, "SA": 0.13, "AA": 0.31}),
]

matrix = dataset_bias_matrix(columns, TAU)
print(render_matrix(matrix, "markdown"))
print("flagged cells:", sorted(matrix.flags) or "none")

# Reset flags: taboo-labeled instances that are nonetheless highly aligned.
instances = [TabooInstance(id=f"t{k}", norm_text=f"text {k}", label="OFF") for k in range(6)]
alignments = {
    inst.id: {tag: float(rng.uniform()) for tag in TAGS} for inst in instances
}
flags = flag_for_reset(instances, alignments, TAU)
print(f"\n{len(flags)} reset flags on {len(instances)} instances:")
for f in flags:
    print(f"  {f.instance_id} ~ {f.community_tag} (alignment {f.alignment:.2f}): {f.reason}")

# Everything consolidates into one deterministic report document.
_report, text = build_report(
    seed=5, tau=TAU, decision_threshold=0.5,
    proportions=matrix, reset_flags=flags,
    clock=lambda: "2026-08-10T00:00:00+00:00",
)
print("\n--- report.md (first 20 lines) ---")
print("\n".join(text.splitlines()[:20]))

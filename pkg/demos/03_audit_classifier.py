"""Audit a taboo classifier against community language norms.

The measurement: over the instances a taboo classifier declares taboo,
correlate its confidence with the community alignment score. A classifier
that respects the community's norms concentrates its confidence on
low-alignment (uncommon, norm-violating) texts, so the correlation should
be strongly negative. Near-zero or positive correlation indicates bias
against that community.

Also shows the toxicity-API client against a mock HTTP transport.

Run:  python demos/03_audit_classifier.py
"""

import httpx
import numpy as np

from clcaudit import (
    ToxicityClientConfig,
    classifier_bias,
    emit_correlations_csv,
    fetch_toxicity,
)

rng = np.random.default_rng(3)
n = 500

alignment = rng.uniform(size=n)  # community alignment of n instances

# Scorer 1 tracks norms: confident exactly where alignment is low.
norm_aware = np.clip(1.0 - alignment + rng.normal(0, 0.05, n), 0, 1)
# Scorer 2 is biased: MORE confident on the community's common language.
biased = np.clip(alignment + rng.normal(0, 0.05, n), 0, 1)

results = []
for tag, confidence in (("norm-aware", norm_aware), ("biased", biased)):
    pairs = [(float(c), bool(c >= 0.5)) for c in confidence]  # declared-only
    result = classifier_bias(
        pairs, list(alignment), B=5000, seed=11,
        classifier_tag=tag, community_tag="AA",
    )
    results.append(result)
    print(f"{tag:>10s}: r = {result.r:+.3f}   "
          f"95% CI [{result.ci_low:+.3f}, {result.ci_high:+.3f}]   "
          f"({result.n_pairs} declared pairs, {result.n_replicates} resamples)")

print("\nnegative correlation = the classifier already avoids calling the")
print("community's ordinary language taboo; positive = it targets it.\n")

print(emit_correlations_csv(results))

# --- live-API path, demonstrated against a mock so the demo runs offline --
def fake_api(request: httpx.Request) -> httpx.Response:
    text = request.read().decode()
    value = 0.93 if "stupid" in text else 0.04
    return httpx.Response(
        200, json={"attributeScores": {"TOXICITY": {"summaryScore": {"value": value}}}}
    )


cfg = ToxicityClientConfig(
    endpoint="https://api.example/v1alpha1/comments:analyze",
    api_key="demo-key",
    requests_per_second=50.0,
)
result = fetch_toxicity(
    cfg,
    [("a", "that was a stupid take"), ("b", "lovely weather today")],
    transport=httpx.MockTransport(fake_api),
)
print("toxicity scores from the (mocked) API:", result.scores)
print("errors:", result.errors or "none")

"""Train two community classifiers and read their alignment scores.

Builds two synthetic communities with disjoint vocabularies, trains a
hashed n-gram classifier for each, and shows how alignment scores behave
on in-community, out-of-community and unseen text.

Run:  python demos/01_train_and_score.py
"""

import numpy as np

from clcaudit import (
    CommunityCorpus,
    FeatureConfig,
    TrainHyper,
    Utterance,
    build_training_set,
    normalize,
    score,
    train_clc,
)

rng = np.random.default_rng(7)

# Two "communities" that never share a word: surfer slang vs gardener slang.
surf_words = [f"surf{i:03d}" for i in range(300)]
soil_words = [f"soil{i:03d}" for i in range(300)]


def make_corpus(tag, vocab, n=600):
    utterances = []
    for k in range(n):
        text = " ".join(rng.choice(vocab, size=9))
        utterances.append(
            Utterance(id=f"{tag}-{k}", raw_text=text, norm_text=normalize(text),
                      source=tag, created_utc=1)
        )
    return CommunityCorpus(tag, tuple(utterances))


surfers = make_corpus("SURF", surf_words)
gardeners = make_corpus("SOIL", soil_words)

# 1:1 training sets: each community's texts vs equal draws from the other.
cfg = FeatureConfig(hash_dim=1 << 16)
surf_model = train_clc(build_training_set(surfers, [gardeners], seed=1), cfg,
                       TrainHyper(epochs=5), seed=1)
soil_model = train_clc(build_training_set(gardeners, [surfers], seed=1), cfg,
                       TrainHyper(epochs=5), seed=1)

print("alignment score = the classifier's confidence the text is the")
print("community's own language, in [0, 1]\n")

samples = {
    "in-community (surf)": " ".join(rng.choice(surf_words, size=9)),
    "other community (soil)": " ".join(rng.choice(soil_words, size=9)),
    "mixed half-and-half": " ".join(
        list(rng.choice(surf_words, size=5)) + list(rng.choice(soil_words, size=4))
    ),
    "never-seen words": "entirely novel phrasing outside both vocabularies",
    "empty text": "",
}

print(f"{'text kind':28s} {'SURF model':>11s} {'SOIL model':>11s}")
for kind, text in samples.items():
    s1 = score(surf_model, normalize(text))
    s2 = score(soil_model, normalize(text))
    print(f"{kind:28s} {s1:11.4f} {s2:11.4f}")

print("\nscores are invariant to case/punctuation because scoring consumes")
print("normalized text:")
raw = samples["in-community (surf)"].upper() + "!!!"
print(f"  raw: {raw[:40]}...")
print(f"  SURF score: {score(surf_model, normalize(raw)):.4f} (same as above)")

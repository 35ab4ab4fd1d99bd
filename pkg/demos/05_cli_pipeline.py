"""Drive the whole pipeline through the CLI, end to end.

Generates two synthetic community dumps (the JSONL corpus format) and a
small labeled test set (TSV), writes a run config, then runs:

    train -> calibrate -> validate -> audit-classifier -> audit-dataset -> report

in a temporary directory. With the seed and timestamp fixed in the config,
rerunning reproduces every output byte for byte.

Run:  python demos/05_cli_pipeline.py
"""

import json
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from clcaudit import cli

rng = np.random.default_rng(99)
root = Path(tempfile.mkdtemp(prefix="clcaudit_demo_"))
print(f"working in {root}\n")

words = {
    "AL": [f"al{i:03d}" for i in range(150)],
    "BR": [f"br{i:03d}" for i in range(150)],
}


def stamp(month, i):
    return int(datetime(2018, month, 2, tzinfo=timezone.utc).timestamp()) + i


for tag, fname in (("AL", "alpha.jsonl"), ("BR", "bravo.jsonl")):
    with (root / fname).open("w") as f:
        n = 0
        for month in range(1, 13):  # months 1-11 train, 12 validation
            for i in range(20):
                record = {
                    "body": " ".join(rng.choice(words[tag], size=8)),
                    "subreddit": tag,
                    "created_utc": stamp(month, i),
                    "id": f"{tag}-{n}",
                }
                f.write(json.dumps(record) + "\n")
                n += 1

with (root / "toyset.tsv").open("w") as f:
    f.write("id\ttweet\tsubtask_a\n")
    for i in range(40):
        vocab = words["AL"] if i % 3 == 0 else words["BR"]
        f.write(f"t{i}\t{' '.join(rng.choice(vocab, size=8))}\tOFF\n")

# synthetic external taboo-classifier scores for the validation utterances
with (root / "ext_scores.csv").open("w") as f:
    for tag in ("AL", "BR"):
        for i in range(220, 240):  # ids of the month-12 comments
            f.write(f"{tag}-{i},EXT,{rng.uniform(0.5, 1.0):.4f}\n")

config = {
    "seed": 20260810,
    "out_dir": str(root / "out"),
    "tau": "auto",
    "target_coverage": 0.52,
    "decision_threshold": 0.5,
    "bootstrap_replicates": 2000,
    "timestamp": "2026-08-10T00:00:00+00:00",
    "features": {"hash_dim": 65536},
    "hyper": {"epochs": 4},
    "communities": [
        {"tag": "AL", "corpus": [str(root / "alpha.jsonl")],
         "train_months": ["2018-01..2018-11"], "val_months": ["2018-12"]},
        {"tag": "BR", "corpus": [str(root / "bravo.jsonl")],
         "train_months": ["2018-01..2018-11"], "val_months": ["2018-12"]},
    ],
    "taboo_datasets": [
        {"name": "Toy", "path": str(root / "toyset.tsv"), "text_column": "tweet",
         "label_column": "subtask_a", "id_column": "id", "keep_label": "OFF"},
    ],
    "taboo_scores": [str(root / "ext_scores.csv")],
}
config_path = root / "config.json"
config_path.write_text(json.dumps(config, indent=2))

for command in ("train", "calibrate", "validate", "audit-classifier",
                "audit-dataset", "report"):
    print(f"$ clcaudit {command} --config {config_path.name}")
    code = cli.main([command, "--config", str(config_path)])
    assert code == 0, f"{command} exited {code}"
    print()

print("--- validation_matrix.tsv ---")
print((root / "out" / "validation_matrix.tsv").read_text())
print("--- proportions.md ---")
print((root / "out" / "proportions.md").read_text())
print(f"full report: {root / 'out' / 'report.md'}")

"""
The ``tten`` command line
=========================

Every subcommand writes into a fresh output directory.  The same calls work
from a shell, e.g. ``tten generate --seed 1 --out runs/data``.
"""

# %%
import tempfile
from pathlib import Path

from tten.cli import main

work = Path(tempfile.mkdtemp())
small = ["--num-users", "200", "--num-items", "100", "--interactions-per-user", "15", "--seed", "1"]

main(["generate", *small, "--out", str(work / "data")])
files = ["--train-file", str(work / "data" / "train.txt"), "--test-file", str(work / "data" / "test.txt")]

# %% train, then evaluate/analyze/sweep the saved final embeddings
main(["train", *files, "--epochs", "5", "--batch-size", "512", "--dim", "16", "--out", str(work / "model")])
emb = ["--embeddings", str(work / "model" / "final.emb")]
main(["evaluate", *files, *emb, "--p", "1", "--out", str(work / "eval")])
main(["analyze", *files, *emb, "--out", str(work / "analysis")])
main(["sweep", *files, *emb, "--p-grid", "0:1:0.5", "--out", str(work / "sweep")])
print((work / "sweep" / "sweep.csv").read_text())

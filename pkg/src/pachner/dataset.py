"""Fixed-length signature datasets: sampling, one-hot encoding and folds."""
from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels as K
from .graph import PachnerGraph

N_SYMBOLS = 64


def length_histogram(g) -> dict[int, int]:
    """Signature length -> number of nodes (accepts a graph or a list of signatures)."""
    sigs = g.nodes if isinstance(g, PachnerGraph) else g
    return dict(sorted(Counter(len(s) for s in sigs).items()))


def sample_fixed_length(g, length: int, k: int, rng_seed: int) -> list[str]:
    """Uniform sample without replacement of min(k, available) signatures of
    the given length, drawn from the nodes in index order."""
    sigs = g.nodes if isinstance(g, PachnerGraph) else list(g)
    pool = [s for s in sigs if len(s) == length]
    if not pool:
        raise ValueError(f"no signatures of length {length}")
    if k <= 0:
        return []
    rng = np.random.default_rng(rng_seed)
    pick = rng.choice(len(pool), size=min(k, len(pool)), replace=False)
    return [pool[i] for i in pick]


def one_hot(sig: str, length: int) -> np.ndarray:
    """Binary vector of size 64*length; block b has a single 1 at the
    alphabet index of character b."""
    if len(sig) != length:
        raise ValueError(f"{sig!r} has length {len(sig)}, expected {length}")
    return one_hot_batch([sig], length)[0]


def one_hot_batch(sigs, length: int, dtype=np.float64) -> np.ndarray:
    sigs = list(sigs)
    out = np.zeros((len(sigs), length * N_SYMBOLS), dtype=dtype)
    if not sigs:
        return out
    for s in sigs:
        if len(s) != length:
            raise ValueError(f"{s!r} has length {len(s)}, expected {length}")
    try:
        raw = np.frombuffer("".join(sigs).encode("ascii"), dtype=np.uint8).reshape(len(sigs), length)
    except UnicodeEncodeError:
        raise ValueError("non-alphabet character in signature") from None
    vals = K.ASCII_TO_VAL[raw]
    if (vals < 0).any():
        i, j = np.argwhere(vals < 0)[0]
        raise ValueError(f"non-alphabet character {sigs[i][j]!r} in {sigs[i]!r}")
    cols = vals + N_SYMBOLS * np.arange(length)
    out[np.arange(len(sigs))[:, None], cols] = 1
    return out


def decode_one_hot(vec, length: int) -> str:
    blocks = np.asarray(vec).reshape(length, N_SYMBOLS)
    return "".join(K.ALPHABET[i] for i in blocks.argmax(axis=1))


@dataclass
class BinaryDataset:
    sigs: list
    labels: np.ndarray
    class_names: tuple
    folds: list  # list of index arrays
    length: int
    rng_seed: int

    def __len__(self):
        return len(self.sigs)

    @property
    def X(self) -> np.ndarray:
        return one_hot_batch(self.sigs, self.length)

    def split(self, fold: int):
        """(train indices, test indices) with ``fold`` held out."""
        test = np.asarray(self.folds[fold])
        train = np.concatenate([np.asarray(f) for i, f in enumerate(self.folds) if i != fold])
        return np.sort(train), np.sort(test)


def stratified_folds(labels, k: int, rng) -> list[np.ndarray]:
    """Deal each class's shuffled indices round-robin into k folds."""
    labels = np.asarray(labels)
    folds = [[] for _ in range(k)]
    offset = 0
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        rng.shuffle(idx)
        for j, i in enumerate(idx):
            folds[(j + offset) % k].append(int(i))
        offset += len(idx)  # keeps fold sizes balanced across classes
    return [np.array(sorted(f), dtype=np.int64) for f in folds]


def build_binary_dataset(class_a, class_b, length: int, rng_seed: int,
                         class_names=("A", "B"), k: int = 5) -> BinaryDataset:
    class_a, class_b = list(class_a), list(class_b)
    if not class_a or not class_b:
        raise ValueError("both classes need at least one signature")
    for s in class_a + class_b:
        if len(s) != length:
            raise ValueError(f"{s!r} has length {len(s)}, expected {length}")
    one_hot_batch(class_a + class_b, length)  # alphabet check
    ss = np.random.SeedSequence(rng_seed)
    shuffle_rng, fold_rng = (np.random.default_rng(s) for s in ss.spawn(2))
    sigs = class_a + class_b
    labels = np.array([0] * len(class_a) + [1] * len(class_b), dtype=np.int64)
    order = shuffle_rng.permutation(len(sigs))
    sigs = [sigs[i] for i in order]
    labels = labels[order]
    folds = stratified_folds(labels, k, fold_rng)
    return BinaryDataset(sigs, labels, tuple(class_names), folds, length, rng_seed)


def save_dataset(ds: BinaryDataset, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "dataset.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["isosig", "label"])
        for s, y in zip(ds.sigs, ds.labels.tolist()):
            w.writerow([s, y])
    meta = {"rng_seed": ds.rng_seed, "length": ds.length, "class_names": list(ds.class_names),
            "folds": [f.tolist() for f in ds.folds]}
    (d / "folds.json").write_text(json.dumps(meta, indent=1), encoding="utf-8")


def load_dataset(directory) -> BinaryDataset:
    d = Path(directory)
    with open(d / "dataset.csv", newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    meta = json.loads((d / "folds.json").read_text(encoding="utf-8"))
    sigs = [r["isosig"] for r in rows]
    labels = np.array([int(r["label"]) for r in rows], dtype=np.int64)
    folds = [np.array(f, dtype=np.int64) for f in meta["folds"]]
    covered = np.sort(np.concatenate(folds)) if folds else np.zeros(0, int)
    if not np.array_equal(covered, np.arange(len(sigs))):
        raise ValueError("folds do not partition the dataset")
    return BinaryDataset(sigs, labels, tuple(meta["class_names"]), folds, int(meta["length"]),
                         int(meta["rng_seed"]))

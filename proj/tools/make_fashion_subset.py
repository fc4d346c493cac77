#!/usr/bin/env python3
"""Build a desk-scale Fashion-MNIST subset in IDX format.

Source: the per-class JSON pixel dumps shipped by the `fashion-mnist` npm
package (`npm pack fashion-mnist`, then point --src at package/src/clothes).
Classes are sampled without replacement with a fixed seed, so the output is
byte-reproducible.
"""
import argparse
import json
import pathlib
import random
import struct


def write_idx_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--src", required=True, help="directory holding 0.json .. 9.json")
    ap.add_argument("--out", required=True)
    ap.add_argument("--train-per-class", type=int, default=100)
    ap.add_argument("--test-per-class", type=int, default=50)
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    train, test = [], []
    for label in range(10):
        rows = json.load(open(pathlib.Path(args.src) / f"{label}.json"))["data"]
        picks = rng.sample(range(len(rows)), args.train_per_class + args.test_per_class)
        for k, idx in enumerate(picks):
            assert len(rows[idx]) == 784
            (train if k < args.train_per_class else test).append((rows[idx], label))
    rng.shuffle(train)
    rng.shuffle(test)

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_idx_images(out / "train-images-idx3-ubyte", [x for x, _ in train])
    write_idx_labels(out / "train-labels-idx1-ubyte", [y for _, y in train])
    write_idx_images(out / "t10k-images-idx3-ubyte", [x for x, _ in test])
    write_idx_labels(out / "t10k-labels-idx1-ubyte", [y for _, y in test])


if __name__ == "__main__":
    main()

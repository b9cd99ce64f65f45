#!/usr/bin/env python3
"""Build a 10k-digit MNIST subset in idx format from the `mnist` npm package.

The npm package (https://www.npmjs.com/package/mnist, v1.1.0) ships 10,000
MNIST digits as per-class JSON arrays of pixels scaled to [0, 1] with three
decimals. This script re-quantizes them to bytes and writes the standard idx
image/label pair, shuffled with a fixed seed so classes are interleaved.

Usage:
    npm pack mnist@1.1.0 && tar xzf mnist-1.1.0.tgz
    python3 scripts/build_mnist_subset.py package/src/digits data
"""
import json
import os
import struct
import sys

import numpy as np


def main(src: str, out: str) -> None:
    images, labels = [], []
    for digit in range(10):
        with open(os.path.join(src, f"{digit}.json")) as fh:
            flat = np.asarray(json.load(fh)["data"], dtype=np.float64)
        rows = flat.reshape(-1, 784)
        images.append(np.clip(np.rint(rows * 255.0), 0, 255).astype(np.uint8))
        labels.append(np.full(rows.shape[0], digit, dtype=np.uint8))
    images = np.concatenate(images)
    labels = np.concatenate(labels)
    order = np.random.default_rng(20190101).permutation(images.shape[0])
    images, labels = images[order], labels[order]

    os.makedirs(out, exist_ok=True)
    n = images.shape[0]
    with open(os.path.join(out, "mnist10k-images-idx3-ubyte"), "wb") as fh:
        fh.write(struct.pack(">4B3I", 0, 0, 8, 3, n, 28, 28))
        fh.write(images.tobytes())
    with open(os.path.join(out, "mnist10k-labels-idx1-ubyte"), "wb") as fh:
        fh.write(struct.pack(">4BI", 0, 0, 8, 1, n))
        fh.write(labels.tobytes())
    print(f"wrote {n} images to {out}")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])

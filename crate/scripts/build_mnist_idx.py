#!/usr/bin/env python3
"""Write the bundled MNIST digit subset as gzipped IDX files.

Source: the 10,000 MNIST digits shipped in the `mnist` npm package
(src/digits/<d>.json, pixel values pre-scaled to [0,1]). Usage:

    npm pack mnist && tar xzf mnist-*.tgz
    python3 scripts/build_mnist_idx.py package/src/digits data/mnist
"""
import gzip
import json
import struct
import sys
from pathlib import Path

import numpy as np

TRAIN = 8500


def write_idx(path, magic, arr):
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(struct.pack(">I", magic))
        for d in arr.shape:
            f.write(struct.pack(">I", d))
        f.write(arr.astype(np.uint8).tobytes())


def main(src, dst):
    images, labels = [], []
    for digit in range(10):
        data = json.loads((Path(src) / f"{digit}.json").read_text())["data"]
        block = np.rint(np.asarray(data).reshape(-1, 784) * 255.0)
        images.append(block)
        labels += [digit] * len(block)
    images = np.concatenate(images).reshape(-1, 28, 28)
    labels = np.asarray(labels)
    perm = np.random.default_rng(0).permutation(len(labels))
    images, labels = images[perm], labels[perm]
    out = Path(dst)
    out.mkdir(parents=True, exist_ok=True)
    write_idx(out / "train-images-idx3-ubyte.gz", 0x803, images[:TRAIN])
    write_idx(out / "train-labels-idx1-ubyte.gz", 0x801, labels[:TRAIN])
    write_idx(out / "t10k-images-idx3-ubyte.gz", 0x803, images[TRAIN:])
    write_idx(out / "t10k-labels-idx1-ubyte.gz", 0x801, labels[TRAIN:])


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])

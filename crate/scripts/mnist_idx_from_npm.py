#!/usr/bin/env python3
"""Rebuild MNIST-format IDX files from the digits bundled in the npm `mnist` package.

The package ships roughly 10k MNIST digits as per-class JSON arrays of
pixel/255 values rounded to three decimals. Every value maps back to a unique
byte, so the original pixels are recovered exactly. Digits are shuffled with a
fixed seed and split in half into train/test so that "first N" subsets are
class-mixed.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 scripts/mnist_idx_from_npm.py package/src/digits data/mnist
"""
import json
import pathlib
import struct
import sys

import numpy as np


def write_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        f.write(images.astype(np.uint8).tobytes())


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main():
    src = pathlib.Path(sys.argv[1])
    out = pathlib.Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    images, labels = [], []
    for digit in range(10):
        raw = np.array(json.loads((src / f"{digit}.json").read_text())["data"])
        pix = np.rint(raw * 255.0).reshape(-1, 784)
        assert np.all(np.abs(pix / 255.0 - raw.reshape(-1, 784)) < 2e-3)
        images.append(pix)
        labels.append(np.full(len(pix), digit))
    images = np.concatenate(images)
    labels = np.concatenate(labels)
    order = np.random.default_rng(20190416).permutation(len(labels))
    images, labels = images[order], labels[order]
    half = len(labels) // 2
    write_images(out / "train-images-idx3-ubyte", images[:half])
    write_labels(out / "train-labels-idx1-ubyte", labels[:half])
    write_images(out / "t10k-images-idx3-ubyte", images[half:])
    write_labels(out / "t10k-labels-idx1-ubyte", labels[half:])
    print(f"wrote {half} train / {len(labels) - half} test digits to {out}")


if __name__ == "__main__":
    main()

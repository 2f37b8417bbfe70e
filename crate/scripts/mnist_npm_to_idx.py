#!/usr/bin/env python3
"""Convert the digit JSON files shipped in the npm `mnist` package into IDX files.

The package stores 10000 MNIST training digits as per-class JSON arrays of
pixel intensities in [0, 1] rounded to three decimals. Multiplying by 255 and
rounding recovers the original u8 pixels exactly.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 scripts/mnist_npm_to_idx.py package/src/digits data/mnist
"""
import json
import random
import struct
import sys
from pathlib import Path


def main() -> None:
    if len(sys.argv) != 3:
        sys.exit("usage: mnist_npm_to_idx.py <digits-dir> <out-dir>")
    src, out = Path(sys.argv[1]), Path(sys.argv[2])
    samples = []
    for label in range(10):
        flat = json.loads((src / f"{label}.json").read_text())["data"]
        assert len(flat) % 784 == 0
        for i in range(len(flat) // 784):
            px = bytes(round(v * 255) for v in flat[i * 784:(i + 1) * 784])
            samples.append((label, px))
    random.Random(0).shuffle(samples)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "train-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(samples), 28, 28))
        for _, px in samples:
            f.write(px)
    with open(out / "train-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(samples)))
        f.write(bytes(label for label, _ in samples))
    print(f"wrote {len(samples)} samples to {out}")


if __name__ == "__main__":
    main()

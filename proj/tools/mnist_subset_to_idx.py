#!/usr/bin/env python3
"""Convert the 5000-sample MNIST subset shipped in the mlxtend wheel to IDX.

Usage: mnist_subset_to_idx.py <mlxtend-*.whl> <out_dir>

Fetch the wheel with `pip download mlxtend --no-deps -d /tmp/whl`.
"""
import gzip
import struct
import sys
import zipfile
from pathlib import Path


def main() -> int:
    if len(sys.argv) != 3:
        print(__doc__, file=sys.stderr)
        return 2
    wheel, out = Path(sys.argv[1]), Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    raw = zipfile.ZipFile(wheel).read("mlxtend/data/data/mnist_5k.csv.gz")
    rows = gzip.decompress(raw).decode().strip().split("\n")
    images, labels = bytearray(), bytearray()
    for row in rows:
        values = [int(float(v)) for v in row.split(",")]
        images.extend(values[:-1])
        labels.append(values[-1])
    n = len(rows)
    # mtime=0 keeps the output byte-stable across runs
    with open(out / "images-idx3-ubyte.gz", "wb") as f:
        with gzip.GzipFile(fileobj=f, mode="wb", mtime=0) as g:
            g.write(struct.pack(">IIII", 0x803, n, 28, 28) + bytes(images))
    with open(out / "labels-idx1-ubyte.gz", "wb") as f:
        with gzip.GzipFile(fileobj=f, mode="wb", mtime=0) as g:
            g.write(struct.pack(">II", 0x801, n) + bytes(labels))
    print(f"wrote {n} samples to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

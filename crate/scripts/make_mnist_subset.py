#!/usr/bin/env python3
"""Write the 5000-digit MNIST sample shipped inside the mlxtend wheel as
gzip-compressed IDX files (the same layout as the original MNIST release).

Usage: pip download --no-deps mlxtend -d /tmp/wh
       python3 scripts/make_mnist_subset.py /tmp/wh/mlxtend-*.whl crates/core/testdata
"""
import gzip
import struct
import sys
import zipfile
from pathlib import Path


def main(wheel: str, out_dir: str) -> None:
    raw = zipfile.ZipFile(wheel).read("mlxtend/data/data/mnist_5k.csv.gz")
    rows = gzip.decompress(raw).decode().splitlines()
    images = bytearray()
    labels = bytearray()
    for row in rows:
        values = [int(float(v)) for v in row.split(",")]
        images.extend(bytes(values[:-1]))
        labels.append(values[-1])
    n = len(rows)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    img_header = struct.pack(">IIII", 0x00000803, n, 28, 28)
    lbl_header = struct.pack(">II", 0x00000801, n)
    # mtime=0 keeps the archives byte-reproducible
    with open(out / "mnist5k-images-idx3-ubyte.gz", "wb") as f:
        f.write(gzip.compress(img_header + bytes(images), mtime=0))
    with open(out / "mnist5k-labels-idx1-ubyte.gz", "wb") as f:
        f.write(gzip.compress(lbl_header + bytes(labels), mtime=0))


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])

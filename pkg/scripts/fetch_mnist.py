"""Download the four canonical MNIST IDX files into a data directory.

Usage: python scripts/fetch_mnist.py [--dest data/mnist]

Tries a couple of well-known mirrors and stores the files gzipped (the
loaders read .gz transparently).  Afterwards point the CLI or the test
suite at the directory, e.g.::

    export CONNTRA_DATA_DIR=$PWD/data
    conntra train --model logreg --dataset mnist --seed 7 --out runs/mnist
"""

import argparse
import sys
import urllib.error
import urllib.request
from pathlib import Path

MIRRORS = [
    "https://storage.googleapis.com/cvdf-datasets/mnist/",
    "https://ossci-datasets.s3.amazonaws.com/mnist/",
]

FILES = [
    "train-images-idx3-ubyte.gz",
    "train-labels-idx1-ubyte.gz",
    "t10k-images-idx3-ubyte.gz",
    "t10k-labels-idx1-ubyte.gz",
]


def fetch(dest: Path) -> int:
    dest.mkdir(parents=True, exist_ok=True)
    failures = 0
    for name in FILES:
        target = dest / name
        if target.exists():
            print(f"{target} already present, skipping")
            continue
        for mirror in MIRRORS:
            url = mirror + name
            try:
                print(f"fetching {url}")
                with urllib.request.urlopen(url, timeout=60) as response:
                    target.write_bytes(response.read())
                break
            except (urllib.error.URLError, OSError) as exc:
                print(f"  failed: {exc}")
        else:
            failures += 1
            print(f"could not fetch {name} from any mirror")
    return failures


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--dest", default="data/mnist")
    args = parser.parse_args()
    sys.exit(1 if fetch(Path(args.dest)) else 0)

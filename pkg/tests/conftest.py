import sys
from pathlib import Path

import pytest

# allow running the suite from a source checkout without installing
_SRC = Path(__file__).resolve().parent.parent / "src"
if _SRC.is_dir() and str(_SRC) not in sys.path:
    try:
        import conntra  # noqa: F401
    except ImportError:
        sys.path.insert(0, str(_SRC))

from conntra import data  # noqa: E402


@pytest.fixture(scope="session")
def blobs():
    """Small separable 3-class problem shared across trainer tests."""
    ds = data.synthetic_blobs(240, 6, 3, seed=11)
    return data.split(ds, data.SplitSpec(0.8, seed=0))


def mnist_dir():
    """Directory holding the four canonical IDX files, or None."""
    import os

    root = Path(os.environ.get("CONNTRA_DATA_DIR", "data"))
    for candidate in (root / "mnist", root):
        if data.mnist_paths(candidate):
            return candidate
    return None

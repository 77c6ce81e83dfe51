import sys
from pathlib import Path

import numpy as np
import pytest

SRC = Path(__file__).resolve().parent.parent / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

DATA_DIR = SRC / "scsim" / "data"


@pytest.fixture(scope="session")
def toy_model():
    from scsim.network import load_model
    return load_model(DATA_DIR / "toy_model.json")


@pytest.fixture(scope="session")
def digits():
    from scsim.network import load_idx_images, load_idx_labels
    return (load_idx_images(DATA_DIR / "digits_images.idx"),
            load_idx_labels(DATA_DIR / "digits_labels.idx"))


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)

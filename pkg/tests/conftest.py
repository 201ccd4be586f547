import os

import numpy as np
import pytest

from mcmlp import autograd as ag
from mcmlp.data import load_cifar100, write_synthetic_cifar100


@pytest.fixture(autouse=True)
def _float64_default():
    """Tests run in the 64-bit oracle mode unless they opt into float32."""
    ag.set_default_dtype(np.float64)
    yield
    ag.set_default_dtype(np.float64)


def dataset_dir(tmp_path_factory, train_records, test_records, name):
    """A CIFAR-100-format dataset directory: the real files when
    MCMLP_CIFAR100_DIR points at them, a synthetic stand-in otherwise."""
    env = os.environ.get("MCMLP_CIFAR100_DIR")
    if env and os.path.exists(os.path.join(env, "train.bin")):
        return env
    out = tmp_path_factory.mktemp(name)
    write_synthetic_cifar100(out, train_records=train_records, test_records=test_records)
    return str(out)


@pytest.fixture(scope="session")
def full_dataset_dir(tmp_path_factory):
    """Full-size dataset (50,000 / 10,000 records)."""
    return dataset_dir(tmp_path_factory, 50_000, 10_000, "cifar100-full")


@pytest.fixture(scope="session")
def small_dataset_dir(tmp_path_factory):
    """Small dataset for fast pipeline tests (2,000 / 500 records)."""
    env = os.environ.get("MCMLP_CIFAR100_DIR")
    if env and os.path.exists(os.path.join(env, "train.bin")):
        return env
    out = tmp_path_factory.mktemp("cifar100-small")
    write_synthetic_cifar100(out, train_records=2_000, test_records=500)
    return str(out)


@pytest.fixture(scope="session")
def small_train_arrays(small_dataset_dir):
    from mcmlp.data import fine_labels, to_images

    records = load_cifar100(os.path.join(small_dataset_dir, "train.bin"))
    return to_images(records, dtype=np.float32), fine_labels(records)

import numpy as np
import pytest

from geeznum.imaging import preprocess
from geeznum.synthgen import PerturbationConfig, generate_dataset, load_templates, template_page

ACCEPTANCE_LINES: dict[int, str] = {}


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])


@pytest.fixture(scope="session")
def toy_set():
    """One clean preprocessed template per class."""
    X = np.array([preprocess(template_page(t)) for t in load_templates()], dtype=np.float64)
    return X, np.arange(20)


@pytest.fixture(scope="session")
def small_data(tmp_path_factory):
    """4 perturbed images per class, enough for quick split/train plumbing tests."""
    root = tmp_path_factory.mktemp("small")
    generate_dataset(root, per_class=4, cfg=PerturbationConfig(seed=3))
    return root


@pytest.fixture(scope="session")
def clean_data(tmp_path_factory):
    root = tmp_path_factory.mktemp("clean")
    generate_dataset(root, per_class=1, cfg=PerturbationConfig.identity(seed=0))
    return root


@pytest.fixture(scope="session")
def toy_model(toy_set):
    from geeznum.optimizer import CgConfig
    from geeznum.training import TrainConfig, train_arrays

    X, y = toy_set
    return train_arrays(X, y, TrainConfig(cg=CgConfig(max_iterations=500), seed=7))

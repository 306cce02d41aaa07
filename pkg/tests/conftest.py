"""Shared fixtures: a small trained model and an attacked run, built once."""

import numpy as np
import pytest

from advscope.attack import AttackConfig, attack_dataset
from advscope.data import generate_shapes_dataset, split_dataset
from advscope.nn.model import Model, mininet
from advscope.nn.train import TrainConfig, train
from advscope.workspace import Workspace, save_run


@pytest.fixture(scope="session")
def dataset():
    return generate_shapes_dataset(seed=7, count_per_class=60)


@pytest.fixture(scope="session")
def split(dataset):
    return split_dataset(dataset, test_fraction=0.5, seed=7)


@pytest.fixture(scope="session")
def model(dataset, split):
    train_idx, _ = split
    spec = mininet(class_count=4, class_names=dataset.class_names)
    m = Model.create(spec, seed=7)
    train(m, dataset.images[train_idx], dataset.labels[train_idx],
          TrainConfig(epochs=5, seed=7))
    return m


@pytest.fixture(scope="session")
def attack_config():
    return AttackConfig()


@pytest.fixture(scope="session")
def pairs(model, dataset, split, attack_config):
    _, test_idx = split
    result = attack_dataset(
        model, dataset.images[test_idx], dataset.labels[test_idx], attack_config
    )
    assert result, "fixture attack produced no pairs"
    return result


@pytest.fixture(scope="session")
def run_dir(tmp_path_factory, model, pairs, dataset, attack_config):
    from advscope.nn.io import save_model

    root = tmp_path_factory.mktemp("run")
    save_model(model, root / "model.mnet")
    save_run(root / "run", pairs, dataset.class_names, attack_config, "../model.mnet")
    return root / "run"


@pytest.fixture(scope="session")
def workspace(run_dir):
    return Workspace.load(run_dir)


@pytest.fixture(scope="session")
def rich_pair(workspace):
    """A pair whose true and adversarial classes both have >= 2 band members."""
    for p in workspace.pairs:
        benign_members = sum(q.y == p.y for q in workspace.pairs)
        adv_members = sum(q.adv_label == p.adv_label for q in workspace.pairs)
        if benign_members >= 2 and adv_members >= 2:
            return p
    raise RuntimeError("fixture run has no pair with populated class bands")


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(label): headline acceptance guarantee"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker and (report.when == "call" or report.failed):
        report.criterion_label = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    lines = []
    for reports in terminalreporter.stats.values():
        for report in reports:
            label = getattr(report, "criterion_label", None)
            if label is not None:
                lines.append((label, report.passed))
    if lines:
        terminalreporter.section("acceptance criteria")
        for label, passed in lines:
            terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}: {label}")

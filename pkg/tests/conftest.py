import numpy as np
import pytest

from snnwhiten.datasets import write_cifar10, write_stl10


def fixture_images(n: int, size: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Smooth uint8 images whose dominant hue depends on the label."""
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 10
    noise = rng.random((n, size + 4, size + 4, 3))
    blur = sum(noise[:, i:i + size, j:j + size] for i in range(5) for j in range(5)) / 25
    hue = np.stack([np.cos(labels), np.sin(labels), np.cos(2 * labels)], axis=1)[:, None, None, :]
    ramp = np.linspace(0, 1, size)[None, :, None, None] * (labels % 3 == 0)[:, None, None, None]
    img = 0.5 * blur + 0.25 * hue + 0.2 * ramp + 0.25
    return np.clip(img * 255, 0, 255).astype(np.uint8), labels


@pytest.fixture(scope="session")
def cifar_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cifar")
    tr, trl = fixture_images(60, 32, 0)
    te, tel = fixture_images(20, 32, 1)
    write_cifar10(d, tr, trl, te, tel)
    return d


@pytest.fixture(scope="session")
def stl_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("stl")
    tr, trl = fixture_images(20, 96, 2)
    te, tel = fixture_images(10, 96, 3)
    write_stl10(d, tr, trl, te, tel)
    return d


SMALL_CONFIG = """\
data.dataset = {dataset}
data.cifar10_dir = {cifar}
data.stl10_dir = {stl}
data.strict_format = 0
whitening.patch_w = 5
whitening.patch_h = 5
whitening.patch_count = 3000
network.filter_count = 4
neuron.threshold_mean = 4.0
training.epochs = 2
training.patches_per_epoch = 60
classify.svm_epochs = 3
run.run_count = 2
"""


@pytest.fixture
def write_config(tmp_path, cifar_dir, stl_dir):
    def make(dataset="cifar10", extra="", name="exp.cfg"):
        path = tmp_path / name
        path.write_text(SMALL_CONFIG.format(dataset=dataset, cifar=cifar_dir, stl=stl_dir) + extra)
        return path
    return make


# -- acceptance report ---------------------------------------------------------------

ACCEPTANCE_TITLES = {
    1: "whitening correctness (ZCA on 1e5 CIFAR-10 9x9x3 patches)",
    2: "kernel / patch-ZCA centre equivalence",
    3: "desk-scale ordering (kernels vs DoG colour vs standard ZCA)",
    4: "cross-dataset kernel stability (STL-10 vs CIFAR-10 kernels)",
    5: "SNN unit oracles",
    6: "homeostasis: single-neuron convergence to t_expected",
    7: "qualitative filter grid",
    8: "determinism of the desk-scale runs",
}
_acceptance: dict[int, tuple[str, str]] = {}


@pytest.fixture
def acceptance():
    """``record(criterion, status, detail)`` where status is PASS, FAIL, NOT RUN or MANUAL."""
    def record(number: int, status: str, detail: str = "") -> None:
        _acceptance[number] = (status, detail)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number, title in ACCEPTANCE_TITLES.items():
        status, detail = _acceptance.get(number, ("NOT RUN", "not collected"))
        line = f"criterion {number} [{status}] {title}"
        terminalreporter.write_line(f"{line}: {detail}" if detail else line)

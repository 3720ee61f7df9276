"""Fixtures: operator files and golden gradients produced by the companion
library (test-time only; the package itself reads files exclusively)."""

import numpy as np
import pytest

ACCEPTANCE_LINES = []


def record_criterion(name, passed, detail=""):
    status = "PASS" if passed else "FAIL"
    line = f"[ACCEPTANCE:secondary] {name}: {status}"
    if detail:
        line += f" - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("secondary acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def file_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("operators")


@pytest.fixture(scope="session")
def small_operator_path(file_dir):
    """7x7-patch operator (n = 49) written through the companion library."""
    from tfsr import frames

    op = frames.generate_sensing(20, 49, "gaussian", seed=3)
    path = file_dir / "small.mat"
    frames.save_operator(op, path)
    return str(path)


@pytest.fixture(scope="session")
def cs30_operator_path(file_dir):
    """33x33-patch operator at a 30% compression ratio (m = 327)."""
    from tfsr import frames

    op = frames.generate_sensing(327, 1089, "gaussian", seed=8)
    path = file_dir / "cs30.mat"
    frames.save_operator(op, path)
    return str(path)


@pytest.fixture(scope="session")
def orthogonal_operator_path(file_dir):
    """Square orthogonal 'sensing' matrix for exact-recovery fixtures."""
    from tfsr import frames

    rng = np.random.default_rng(5)
    q, _ = np.linalg.qr(rng.standard_normal((1089, 1089)))
    op = frames.SensingOperator(q, require_unit_columns=False)
    path = file_dir / "orth.mat"
    frames.save_operator(op, path)
    return str(path)


@pytest.fixture(scope="session")
def golden_gradients(file_dir, small_operator_path):
    """Reference gradients for all modes from the companion library."""
    from tfsr import fileio, frames

    op = frames.load_operator(small_operator_path)
    rng = np.random.default_rng(11)
    x = rng.standard_normal((4, 49))
    y = rng.standard_normal((4, 20))
    grads = {mode: np.stack([
        frames.grad_fidelity(op, xi, yi, mode) for xi, yi in zip(x, y)])
        for mode in ("ls", "tf", "rtf")}
    paths = {}
    fileio.write_matrix(file_dir / "golden_x.mat", x)
    fileio.write_matrix(file_dir / "golden_y.mat", y)
    for mode, g in grads.items():
        fileio.write_matrix(file_dir / f"golden_grad_{mode}.mat", g)
    return {"x": x, "y": y, "grads": grads, "dir": file_dir}

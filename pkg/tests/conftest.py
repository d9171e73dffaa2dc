import numpy as np
import pytest

from clusterreg import Dataset, MixtureParams

_acceptance_lines = []


def record_criterion(num, description, ok, detail=""):
    """Collect one pass/fail line per acceptance criterion for the summary."""
    status = "PASS" if ok else "FAIL"
    suffix = f" [{detail}]" if detail else ""
    _acceptance_lines.append((num, f"[{status}] criterion {num}: {description}{suffix}"))
    return ok


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _acceptance_lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for _, line in sorted(_acceptance_lines):
            terminalreporter.write_line(line)


def two_group_data(
    n=400,
    intercepts=(4.0, 9.0),
    slopes=None,
    variances=(1.0, 1.0),
    weights=(0.5, 0.5),
    seed=0,
    n_regressors=1,
):
    """Well-separated synthetic clusterwise-regression data."""
    rng = np.random.default_rng(seed)
    g = len(intercepts)
    if slopes is None:
        slopes = rng.uniform(-1.5, 1.5, size=(g, n_regressors))
    labels = rng.choice(g, size=n, p=np.asarray(weights))
    regressors = rng.standard_normal((n, n_regressors))
    X = np.column_stack([np.ones(n), regressors])
    coefficients = np.column_stack([np.asarray(intercepts), np.asarray(slopes)])
    y = np.einsum("ij,ij->i", X, coefficients[labels]) + rng.standard_normal(n) * np.sqrt(
        np.asarray(variances)[labels]
    )
    params = MixtureParams(np.asarray(weights, dtype=float), coefficients, np.asarray(variances, dtype=float))
    return Dataset(y, X), params, labels


def random_params(g, p, rng):
    w = rng.dirichlet(np.ones(g) * 5.0)
    return MixtureParams(w, rng.normal(size=(g, p)), rng.uniform(0.3, 3.0, size=g))


def random_dataset(n, p, rng):
    X = np.column_stack([np.ones(n), rng.standard_normal((n, p - 1))]) if p > 1 else np.ones((n, 1))
    return Dataset(rng.normal(size=n) * 2.0, X)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

import numpy as np
import pytest

from relimp.corrmat import AugmentedProblem, validate

_ACCEPTANCE = {}


def random_corr_values(rng: np.random.Generator, p: int, spread: float = 1.0, floor: float = 1e-3) -> np.ndarray:
    """A random correlation matrix from normalized Gaussian factor rows.

    Built without the package's generator so tests don't lean on code under test.
    Draws whose smallest eigenvalue is below ``floor`` are redrawn.
    """
    while True:
        k = p + rng.integers(0, 3)
        f = rng.standard_normal((p, k)) * np.exp(spread * rng.standard_normal(k))
        f += rng.standard_normal((p, 1)) * rng.uniform(0, 2)  # optional common factor
        c = f @ f.T
        d = 1.0 / np.sqrt(np.diag(c))
        c = c * d[:, None] * d[None, :]
        np.fill_diagonal(c, 1.0)
        if np.linalg.eigvalsh(c)[0] > floor:
            return c


def random_problem(rng: np.random.Generator, p: int, r2: float | None = None) -> AugmentedProblem:
    corr = validate(random_corr_values(rng, p))
    u = rng.standard_normal(p)
    u /= np.linalg.norm(u)
    r2 = rng.uniform(0.1, 0.95) if r2 is None else r2
    rho_xy = corr.sqrt @ (np.sqrt(r2) * u)
    return AugmentedProblem.from_correlations(corr, rho_xy)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def worked():
    """Two predictors with correlation 0.6 and response correlations (0.7, 0.5)."""
    corr = validate(np.array([[1.0, 0.6], [0.6, 1.0]]))
    return AugmentedProblem.from_correlations(corr, [0.7, 0.5])


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(cid, title): an acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call":
        return
    cid, title = marker.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    _ACCEPTANCE[cid] = (title, report.passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_ACCEPTANCE, key=lambda c: int(c.lstrip("AC"))):
        title, passed, detail = _ACCEPTANCE[cid]
        line = f"{cid:<5} {'PASS' if passed else 'FAIL'}  {title}"
        terminalreporter.write_line(line)
        if detail:
            terminalreporter.write_line(f"      {detail}")

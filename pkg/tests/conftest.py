import numpy as np
import pytest

from modmap import LinearGaussianMeasurement, TransitionModel


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_transition(rng, K, diagonal=False, scale=0.6):
    if diagonal:
        return TransitionModel(np.diag(rng.uniform(-scale, scale, K)))
    return TransitionModel(scale * rng.standard_normal((K, K)) / np.sqrt(K))


def random_lg(rng, K, N, P=None, shared=False):
    P = K if P is None else P
    F = rng.standard_normal((P, K) if shared else (N, P, K))
    y = rng.standard_normal((P, N))
    return LinearGaussianMeasurement(F, y)


ACCEPTANCE: list[str] = []


def record(number: int, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'}  criterion {number:2d}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)

import sys

import numpy as np
import pytest

from stapshrink.datagen import derive_rng


def random_hermitian(rng, p):
    A = rng.standard_normal((p, p)) + 1j * rng.standard_normal((p, p))
    return 0.5 * (A + A.conj().T)


def random_pd(rng, p, cond=50.0):
    """Random Hermitian positive definite matrix with eigenvalues in [1, cond]."""
    Q, _ = np.linalg.qr(rng.standard_normal((p, p)) + 1j * rng.standard_normal((p, p)))
    ev = np.exp(rng.uniform(0.0, np.log(cond), size=p))
    return (Q * ev) @ Q.conj().T


def random_unit(rng, p):
    g = rng.standard_normal(p) + 1j * rng.standard_normal(p)
    return g / np.linalg.norm(g)


@pytest.fixture
def rng(request):
    return derive_rng(20240611, request.node.name)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.format_line(k))

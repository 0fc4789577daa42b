import math
from pathlib import Path

import pytest

from picone_lab.elliptic import BoundaryCondition, EllipticProblem
from picone_lab.grid import make_grid, sample
from picone_lab.scalar_branch import Nonlinearity, ScalarProblem

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


def dirichlet_cosine(n=401, C="0"):
    g = make_grid(-math.pi / 2, math.pi / 2, n)
    return EllipticProblem.build(g, "1", C)


def neumann(n=101, x_lo=0.0, x_hi=1.0, A="1", C="0"):
    g = make_grid(x_lo, x_hi, n)
    nb = BoundaryCondition.neumann()
    return EllipticProblem.build(g, A, C, nb, nb)


def cos_problem(f, n=201):
    op = dirichlet_cosine(n)
    return ScalarProblem(op, sample(op.grid, "cos(x) - 0.9"), f)


@pytest.fixture
def cos_p2():
    return cos_problem(Nonlinearity.power(2))


@pytest.fixture
def logistic():
    op = neumann(101)
    return ScalarProblem(op, sample(op.grid, "1"), Nonlinearity.power(2))


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])

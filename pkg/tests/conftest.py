"""Shared fixtures: the worked-example connection and its printed stages.

The closed forms below are the intermediate results of the worked example
(entered as expression strings), used as oracles for each pipeline stage.
"""

import numpy as np
import pytest

from metrise3d import expr as ex
from metrise3d.fixtures import example_connection, flat_connection

# printed V^{ab}{}_c of the worked example, indexed [a][b][c]
V_PRINTED = [
    [  # a = 0
        ["0", "0", "0"],
        ["0", "x/((x*y+z)^2*(1+x^2)^4*z^2)", "2/((x*y+z)^2*(1+x^2)^4*z^2)"],
        ["0", "0", "-x/((x*y+z)^2*(1+x^2)^4*z^2)"],
    ],
    [  # a = 1
        ["0", "x/((x*y+z)^2*(1+x^2)^4*z^2)", "2/((x*y+z)^2*(1+x^2)^4*z^2)"],
        ["-2*x/(1+x^2)^4", "0", "0"],
        ["-2/(1+x^2)^4", "0", "0"],
    ],
    [  # a = 2
        ["0", "0", "-x/((x*y+z)^2*(1+x^2)^4*z^2)"],
        ["-2/(1+x^2)^4", "0", "0"],
        ["2*x/(1+x^2)^4", "0", "0"],
    ],
]

A2Z2 = "(x*y+z)^2*z^2"  # the recurring factor (xy+z)^2 z^2

RHO_PRINTED = [
    ["4/((x*y+z)^5*(1+x^2)^4*z^5)", "0", "0"],
    ["0", "0", "2*x/((x*y+z)^3*(1+x^2)^4*z^3)"],
    ["0", "2*x/((x*y+z)^3*(1+x^2)^4*z^3)",
     "4/((x*y+z)^3*(1+x^2)^4*z^3)"],
]

SIGMA_PRINTED = [
    ["1/(1+x^2)^4", "0", "0"],
    ["0", f"{A2Z2}/(1+x^2)^4", "0"],
    ["0", "0", f"{A2Z2}/(1+x^2)^4"],
]

# the degenerate/nonsingular pair in normal form, and its kernel covector
RHO_TILDE = [
    ["0", "0", "0"],
    ["0", "2/(1+x^2)^4", "-x/(1+x^2)^4"],
    ["0", "-x/(1+x^2)^4", "0"],
]

SIGMA_TILDE = [
    ["2*x^2/(1+x^2)^4", "0", "0"],
    ["0", f"2*(2+x^2)*{A2Z2}/(1+x^2)^4", f"-2*x*{A2Z2}/(1+x^2)^4"],
    ["0", f"-2*x*{A2Z2}/(1+x^2)^4", f"2*x^2*{A2Z2}/(1+x^2)^4"],
]

XI_TILDE = ("1", "0", "0")

PHI_PRINTED = "-4*x^3/((1+x^2)^9*(x*y+z)^2*z^2)"
PSI_PRINTED = "-8*x^3/(1+x^2)^9"

SIGMA_HAT_PRINTED = [
    ["2*x^2/(1+x^2)^4", "0", "0"],
    ["0", f"2*x^2*{A2Z2}/(1+x^2)^4", "0"],
    ["0", "0", f"2*x^2*{A2Z2}/(1+x^2)^4"],
]

OMEGA_POTENTIAL = "5*log(x*(x*y+z)*z/(1+x^2))"
H_PRINTED = "((1+x^2)/(x*(x*y+z)*z))^2"

SIGMA_SOLUTION = [
    [f"1/((1+x^2)^2*{A2Z2})", "0", "0"],
    ["0", "1/(1+x^2)^2", "0"],
    ["0", "0", "1/(1+x^2)^2"],
]

METRIC_DIAG = f"{A2Z2}"  # metric is proportional to diag((xy+z)^2 z^2, 1, 1)


@pytest.fixture(scope="session")
def example_spec():
    return example_connection()


@pytest.fixture(scope="session")
def flat_spec():
    return flat_connection()


@pytest.fixture(scope="session")
def fixture_points():
    """Deterministic sample points in (0.5, 1.5)^3."""
    rng = np.random.default_rng(20240401)
    return [tuple(0.5 + rng.random(3)) for _ in range(10)]


def eval_matrix(strings, p):
    return np.array([[ex.evaluate(ex.parse(strings[i][j]), p)
                      for j in range(3)] for i in range(3)])


def eval_tensor3(strings, p):
    return np.array([[[ex.evaluate(ex.parse(strings[a][b][c]), p)
                       for c in range(3)] for b in range(3)]
                     for a in range(3)])


@pytest.fixture(scope="session")
def printed():
    """Expression-level oracles from the worked example."""
    return {
        "V": V_PRINTED,
        "rho": RHO_PRINTED,
        "sigma": SIGMA_PRINTED,
        "rho_tilde": RHO_TILDE,
        "sigma_tilde": SIGMA_TILDE,
        "xi_tilde": XI_TILDE,
        "phi": PHI_PRINTED,
        "psi": PSI_PRINTED,
        "sigma_hat": SIGMA_HAT_PRINTED,
        "omega_potential": OMEGA_POTENTIAL,
        "h": H_PRINTED,
        "sigma_solution": SIGMA_SOLUTION,
    }

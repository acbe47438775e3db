"""Shared fixtures; operator sets and spectra are cached per session."""


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    rows = {}
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            if getattr(rep, "when", "call") != "call" and status == "passed":
                continue
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion" in nodeid:
                name = nodeid.split("::")[-1]
                mark = "PASS" if status == "passed" else "FAIL"
                if rows.get(name) != "FAIL":
                    rows[name] = mark
    if rows:
        terminalreporter.write_sep("=", "acceptance criteria")
        for name in sorted(rows):
            terminalreporter.write_line(f"[{rows[name]}] {name}")

import math

import numpy as np
import pytest
import scipy.sparse.linalg as spla

from zakharov import DomainSpec, Field, build_operators, solve_spectrum

PI = math.pi


@pytest.fixture(scope="session")
def ops_1d_128():
    return build_operators(DomainSpec(1, (PI,), "navier", 128))


@pytest.fixture(scope="session")
def ops_1d_512():
    return build_operators(DomainSpec(1, (PI,), "navier", 512))


@pytest.fixture(scope="session")
def ops_2d_24():
    return build_operators(DomainSpec(2, (PI, PI), "navier", 24))


@pytest.fixture(scope="session")
def ops_dir_128():
    return build_operators(DomainSpec(1, (PI,), "dirichlet", 128))


@pytest.fixture(scope="session")
def spectrum_1d_128(ops_1d_128):
    return solve_spectrum(ops_1d_128, 4)


def random_smooth_fields(ops, count, seed=0, amp_range=(-0.5, 0.5)):
    """Smooth random fields via one inverse Laplacian, X-normalized."""
    rng = np.random.default_rng(seed)
    lu = spla.splu(ops.B.tocsc())
    from zakharov.solvers import x_norm

    out = []
    for _ in range(count):
        raw = lu.solve(rng.standard_normal(ops.spec.num_nodes))
        raw /= x_norm(raw, ops) + 1e-300
        out.append(Field(ops.spec, raw * 10 ** rng.uniform(*amp_range)))
    return out

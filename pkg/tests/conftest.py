import numpy as np
import pytest

from goursat.geometry import WedgeSpec, build_wedge_grid


@pytest.fixture
def plane_grid():
    """Plane-symmetric wedge: one periodic transverse node."""
    return build_wedge_grid(WedgeSpec(T_max=1.0, sigma=5.0, h_null=0.125))


@pytest.fixture
def box_grid():
    return build_wedge_grid(WedgeSpec(T_max=0.5, sigma=5.0, B_bounds=((0, 1), (0, 1)),
                                      h_null=0.125, h_trans=0.25, periodic=False))


def observed_orders(errs):
    errs = np.asarray(errs, dtype=float)
    return np.log2(errs[:-1] / errs[1:])


ACCEPTANCE = {}


@pytest.fixture
def record():
    """Store a one-line verdict for an acceptance criterion."""

    def _record(number, title, ok, detail=""):
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        ACCEPTANCE[number] = line
        print(line)
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])

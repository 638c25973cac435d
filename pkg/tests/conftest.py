import pytest

from pinlab.kernel import KernelSpec, build_kernel


@pytest.fixture(scope="session")
def law_half():
    """Stretched zeta=0.5 at full accuracy (truncated mass <= 1e-14)."""
    return build_kernel(KernelSpec.stretched(0.5))


@pytest.fixture(scope="session")
def law_quarter():
    """Stretched zeta=0.25 at full accuracy; the table is a few million entries."""
    return build_kernel(KernelSpec.stretched(0.25))


@pytest.fixture(scope="session")
def law_three_quarters():
    return build_kernel(KernelSpec.stretched(0.75))


@pytest.fixture(scope="session")
def fast_laws():
    """Small tables for shape-only work at N <= a few hundred.

    The relaxed tail tolerance changes only the normalizing constant, so
    dynamic programs and their enumeration oracles see the same law.
    """
    return {
        zeta: build_kernel(KernelSpec.stretched(zeta, n_max=4096, tail_tolerance=0.05))
        for zeta in (0.25, 0.5, 0.75)
    }

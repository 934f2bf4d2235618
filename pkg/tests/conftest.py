import time

import pytest

from diqc import certify


class _CutoffSolver:
    """Session-wide memo so acceptance and module tests share solver runs."""

    def __init__(self):
        self.memo = {}

    def _key(self, theta, family, grid):
        return (round(float(theta), 15), family, grid)

    def get(self, theta, family="new", grid=(201, 201)):
        key = self._key(theta, family, grid)
        if key not in self.memo:
            start = time.perf_counter()
            cert = certify.find_cutoff(theta, family, grid=grid)
            self.memo[key] = (cert, time.perf_counter() - start)
        return self.memo[key][0]

    def elapsed(self, theta, family="new", grid=(201, 201)):
        self.get(theta, family, grid)
        return self.memo[self._key(theta, family, grid)][1]


@pytest.fixture(scope="session")
def cutoffs():
    return _CutoffSolver()

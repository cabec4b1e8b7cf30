"""Shared builders for hand-crafted and randomized test datasets."""

import numpy as np
import pytest

from clusterlift import Cluster, Dataset, UnitRecord


def make_unit(j=0, x=(0.0,), a=0, e1=0.5, y=0.0, rev=0.0, cost=0.0, price=10.0):
    return UnitRecord(
        unit_index=j,
        covariates=tuple(float(v) for v in x),
        treatment=a,
        propensity_treated=e1,
        converted=y,
        revenue=rev,
        cost=cost,
        price=price,
    )


def make_cluster(cluster_id, units):
    return Cluster.from_units(cluster_id, units)


def make_dataset(clusters, provenance="test"):
    return Dataset(clusters, provenance=provenance)


def random_dataset(rng, n_clusters=20, m_lo=1, m_hi=10, d=3, discount=0.08):
    """Random valid dataset: mixed sizes, propensities in [0.1, 0.9]."""
    clusters = []
    for cid in range(n_clusters):
        m = int(rng.integers(m_lo, m_hi + 1))
        units = []
        for j in range(m):
            x = rng.standard_normal(d)
            e1 = float(rng.uniform(0.1, 0.9))
            a = int(rng.random() < e1)
            y = float(rng.random() < 0.3)
            price = float(rng.uniform(10.0, 100.0))
            rev = price * (1.0 - discount * a) * y
            cost = price * discount * a * y
            units.append(make_unit(j, x, a, e1, y, rev, cost, price))
        clusters.append(make_cluster(cid, units))
    return make_dataset(clusters)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


# Collected by tests/test_acceptance.py; echoed after the run so the
# one-line verdicts are visible even when pytest captures stdout.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

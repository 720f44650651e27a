"""Shared fixtures: small hand samples and the session-scoped study runs.

The three reduced-scale studies (500 replicates each) back the acceptance
tests.  They are session-scoped so the cost is paid once per pytest run,
and only when an acceptance test actually requests them.
"""

import time

import numpy as np
import pytest

from pelsurv.data import CategorySpace, SampleUnit, StratifiedSample, make_strata
from pelsurv.simulate import SimulationConfig, run_study

ACCEPT_SEED = 1


def build_sample(seed, strata_sizes=(400, 600), n_by_stratum=(25, 30), s=4,
                 response_rate=0.75, beta=-0.4):
    """Random small sample for property tests, deterministic in seed."""
    rng = np.random.default_rng(seed)
    strata = make_strata(strata_sizes)
    cats = CategorySpace(tuple(str(j) for j in range(1, s + 1)))
    total = sum(strata_sizes)
    units = []
    for meta, n_h in zip(strata, n_by_stratum):
        w = meta.population_size / (total * n_h)
        y = rng.gamma(40.0, 0.2, size=n_h)
        cut = np.arange(1, s, dtype=float)
        cdf = 1.0 / (1.0 + np.exp(-(cut[None, :] + beta * y[:, None])))
        u = rng.uniform(size=n_h)
        z0 = (cdf < u[:, None]).sum(axis=1)
        resp = rng.uniform(size=n_h) < response_rate
        resp[0] = True  # estimation needs a respondent per stratum
        for i in range(n_h):
            units.append(SampleUnit(
                stratum=meta.h,
                weight=w,
                z=int(z0[i]) + 1,
                y=float(y[i]) if resp[i] else None,
            ))
    return StratifiedSample(categories=cats, strata=strata, units=tuple(units))


class StudyRun:
    def __init__(self, report, elapsed):
        self.report = report
        self.elapsed = elapsed


def _run(**kw):
    t0 = time.perf_counter()
    report = run_study(SimulationConfig(seed=ACCEPT_SEED, **kw))
    return StudyRun(report, time.perf_counter() - t0)


@pytest.fixture(scope="session")
def study_gamma_07():
    return _run(gamma=0.7, replicates=500, B=200)


@pytest.fixture(scope="session")
def study_gamma_neg01():
    return _run(gamma=-0.1, replicates=500, B=200)


@pytest.fixture(scope="session")
def study_gamma_03():
    # variance ordering and MSE ratios need no bootstrap
    return _run(gamma=0.3, replicates=500, B=0)

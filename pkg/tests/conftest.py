"""Shared fixtures: the synthetic recovery problem and its trained chain.

The chain fixture is expensive (hundreds of GP solves per iteration), so
it is built once per session and shared by the recovery and end-to-end
acceptance tests.
"""

import time

import pytest

from airbo.data import Dataset, generate_synthetic, preprocess
from airbo.kernels import ThetaVector, get_spec
from airbo.mcmc import run_chain

SPEC = get_spec("rbf_rbf")
GRID_SIZE = 16
CELL_KM = 7.0
N_TUNING = 10
TUNING_SEED = 101
# lengthscales of 2 and 8 cells on a 7 km grid
TRUE_THETA = ThetaVector(
    values={"sigma_r1": 1.0, "l_r1": 2 * CELL_KM, "sigma_r2": 1.0, "l_r2": 8 * CELL_KM}
)


def make_dataset(test_seed: int, n_test: int = 10) -> Dataset:
    """Fresh tuning set (fixed seed) plus held-out test snapshots."""
    tuning = generate_synthetic(
        SPEC, TRUE_THETA, GRID_SIZE, N_TUNING, seed=TUNING_SEED, cell_size_km=CELL_KM
    ).snapshots
    test = []
    if n_test:
        test = generate_synthetic(
            SPEC, TRUE_THETA, GRID_SIZE, n_test, seed=test_seed, cell_size_km=CELL_KM
        ).snapshots
        for i, snap in enumerate(test):
            snap.id = f"held-out-{test_seed}-{i:03d}"
    ds = Dataset(tuning=tuning, test=test)
    preprocess(ds)
    return ds


@pytest.fixture(scope="session")
def recovery_chain():
    """The acceptance recovery chain: H=500, burn-in 100, seed 13."""
    ds = make_dataset(test_seed=0, n_test=0)
    t0 = time.monotonic()
    result = run_chain(SPEC, ds.tuning, H=500, burn_in=100, B=5, seed=13)
    result.wall_seconds = time.monotonic() - t0
    return result


@pytest.fixture(scope="session")
def recovery_prior(recovery_chain):
    return recovery_chain.draw_prior(M=100, seed=13)


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    outcome = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
    print(f"\nACCEPTANCE {name}: {outcome}", flush=True)

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from scipy import integrate

from pinlab.disorder import (
    DisorderLaw,
    log_mgf,
    mix_seed,
    sample_environment,
    sample_replicas,
    shift_environment,
    tilt,
)
from pinlab.polymer import PolymerParams, log_partition

SQRT3 = math.sqrt(3.0)


def test_rademacher_support():
    env = sample_environment(DisorderLaw.RADEMACHER, 1000, seed=1)
    assert set(np.unique(env.values)) == {-1.0, 1.0}


def test_uniform_support():
    env = sample_environment(DisorderLaw.UNIFORM_SYM, 1000, seed=1)
    assert np.all(np.abs(env.values) <= SQRT3)


def test_gaussian_unit_variance():
    n = 100_000
    env = sample_environment(DisorderLaw.GAUSSIAN, n, seed=7)
    # chi-square concentration: Var of the sample variance is ~ 2/n
    assert abs(np.var(env.values) - 1.0) <= 3.0 * math.sqrt(2.0 / n)


def test_all_families_centered():
    for law in DisorderLaw:
        env = sample_environment(law, 200_000, seed=11)
        assert abs(env.values.mean()) <= 5.0 / math.sqrt(200_000)


def test_regeneration_is_bit_identical():
    for law in DisorderLaw:
        a = sample_environment(law, 500, seed=42)
        b = sample_environment(law, 500, seed=42)
        assert np.array_equal(a.values, b.values)


def test_mix_seed_is_frozen():
    # these constants are the versioned seed-derivation contract; a change
    # here silently invalidates every recorded run
    assert [mix_seed(20240801, k) for k in range(4)] == [
        4991187100607486500,
        7151301326022040174,
        4657293395514983574,
        2246901869883425891,
    ]
    assert mix_seed(0, 0) == 16294208416658607535
    assert mix_seed(-5, 2) == 16279276485729455169


def test_parallel_and_serial_replicas_agree():
    serial = sample_replicas(DisorderLaw.GAUSSIAN, 64, master_seed=5, replicas=8)
    with ThreadPoolExecutor(max_workers=4) as pool:
        parallel = list(pool.map(
            lambda k: sample_environment(DisorderLaw.GAUSSIAN, 64, mix_seed(5, k)),
            range(8),
        ))
    for a, b in zip(serial, parallel):
        assert np.array_equal(a.values, b.values)


def test_log_mgf_at_zero():
    for law in DisorderLaw:
        assert log_mgf(law, 0.0) == 0.0


def test_log_mgf_gaussian_closed_form():
    assert log_mgf(DisorderLaw.GAUSSIAN, 2.0) == pytest.approx(2.0, abs=1e-15)


def test_log_mgf_rademacher_closed_form():
    assert log_mgf(DisorderLaw.RADEMACHER, 1.0) == pytest.approx(math.log(math.cosh(1.0)), abs=1e-14)
    # direct two-atom average
    beta = 0.7
    direct = math.log(0.5 * (math.exp(beta) + math.exp(-beta)))
    assert log_mgf(DisorderLaw.RADEMACHER, beta) == pytest.approx(direct, abs=1e-14)


@pytest.mark.parametrize("beta", [0.3, 1.0, 2.5])
def test_log_mgf_quadrature_oracle(beta):
    gauss, _ = integrate.quad(
        lambda x: math.exp(beta * x) * math.exp(-x * x / 2.0) / math.sqrt(2.0 * math.pi),
        -40.0, 40.0)
    assert log_mgf(DisorderLaw.GAUSSIAN, beta) == pytest.approx(math.log(gauss), rel=1e-10)
    uniform, _ = integrate.quad(
        lambda x: math.exp(beta * x) / (2.0 * SQRT3), -SQRT3, SQRT3)
    assert log_mgf(DisorderLaw.UNIFORM_SYM, beta) == pytest.approx(math.log(uniform), rel=1e-10)


def test_log_mgf_uniform_small_beta_continuity():
    # series branch and closed form must agree around the switch point
    for beta in (1e-5, 5e-5, 1e-4, 2e-4):
        exact = math.log(math.sinh(SQRT3 * beta) / (SQRT3 * beta))
        assert log_mgf(DisorderLaw.UNIFORM_SYM, beta) == pytest.approx(exact, rel=1e-10)


def test_log_mgf_convex_in_beta():
    grid = np.linspace(-3.0, 3.0, 61)
    for law in DisorderLaw:
        values = np.array([log_mgf(law, float(b)) for b in grid])
        second = values[2:] - 2.0 * values[1:-1] + values[:-2]
        assert np.min(second) >= -1e-10


def test_tilt_zero_is_identity():
    env = sample_environment(DisorderLaw.GAUSSIAN, 50, seed=3)
    assert tilt(env, 0.0) is env


def test_tilt_group_property_exact():
    env = sample_environment(DisorderLaw.GAUSSIAN, 50, seed=3)
    back = tilt(tilt(env, 0.3), -0.3)
    assert back.shift == 0.0
    assert np.array_equal(back.values, env.values)
    assert back.values is back.base_values


def test_tilt_identity_against_partition_function(fast_laws):
    law = fast_laws[0.5]
    rng = np.random.default_rng(19)
    for _ in range(25):
        n = int(rng.integers(2, 200))
        beta = float(rng.uniform(0.2, 2.0))
        h = float(rng.uniform(-1.0, 1.0))
        delta = float(rng.uniform(-1.0, 1.0))
        env = sample_environment(DisorderLaw.GAUSSIAN, n, int(rng.integers(0, 2**63)))
        lhs = log_partition(law, env, PolymerParams(beta, h + delta), n)
        rhs = log_partition(law, tilt(env, delta / beta), PolymerParams(beta, h), n)
        assert abs(lhs - rhs) <= 1e-10


def test_shift_environment_view():
    env = sample_environment(DisorderLaw.GAUSSIAN, 10, seed=5)
    shifted = shift_environment(env, 4)
    assert shifted.n_sites == 6
    assert np.array_equal(shifted.values, env.values[4:])
    with pytest.raises(ValueError):
        shift_environment(env, 11)


def test_environment_export(tmp_path):
    env = sample_environment(DisorderLaw.UNIFORM_SYM, 20, seed=8)
    csv_path = tmp_path / "omega.csv"
    env.to_csv(csv_path)
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "omega"
    assert len(lines) == 21
    assert float(lines[1]) == env.values[0]
    npy_path = tmp_path / "omega.npy"
    env.to_npy(npy_path)
    assert np.array_equal(np.load(npy_path), env.values)

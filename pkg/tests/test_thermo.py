import itertools
import math
import random

import numpy as np
import pytest

from pinlab.disorder import DisorderLaw, Environment, log_mgf
from pinlab.kernel import KernelSpec, build_kernel
from pinlab.numerics import exact_mean_stderr
from pinlab.polymer import PolymerParams, brute_force_log_partition, log_partition
from pinlab.thermo import (
    annealed_free_energy,
    annealed_log_partition,
    compute_doubling_constant,
    finite_volume_bracket,
    pure_free_energy,
    pure_log_partition,
    quenched_free_energy_estimate,
)


def residual_at(law, b, h):
    """Independent fsum evaluation of |sum K(n) e^{-bn} - e^{-h}|."""
    terms = [math.exp(lm - b * n) for n, lm in enumerate(law.log_mass, start=1)
             if lm > -math.inf]
    total = math.fsum(terms) + law.truncated_tail_mass * math.exp(-b * (law.n_max + 1))
    return abs(total - math.exp(-h))


def test_pure_free_energy_zero_at_and_below_critical(law_half):
    assert pure_free_energy(law_half, 0.0) == 0.0
    assert pure_free_energy(law_half, -0.3) == 0.0


def test_pure_point_mass_closed_form():
    law = build_kernel(KernelSpec.custom({1: 1.0}))
    for h in (1e-3, 0.1, 1.0, 3.0):
        assert pure_free_energy(law, h) == pytest.approx(h, abs=1e-12)


def test_pure_root_residual(law_half):
    for h in (1e-4, 1e-3, 1e-2, 1e-1, 0.5):
        f = pure_free_energy(law_half, h)
        assert residual_at(law_half, f, h) <= 1e-13


def test_pure_small_h_slope(law_half):
    # f(0,h) ~ h / E[tau]: the finite-h ratio exceeds 1 by ~ h*Var/(2 E^2)
    # (exact Jensen direction: E[exp(-f tau)] >= exp(-f E[tau]) forces
    # f * E[tau] >= h) and decreases to 1 as h drops
    ratios = []
    for h in (1e-2, 1e-3, 1e-4):
        f = pure_free_energy(law_half, h)
        ratio = f * law_half.mean_gap / h
        assert ratio >= 1.0
        ratios.append(ratio)
    assert ratios[0] > ratios[1] > ratios[2]
    assert ratios[1] == pytest.approx(1.0, abs=1e-2)
    assert abs(ratios[2] - 1.0) <= 1e-3


def test_annealed_reduces_to_pure_at_beta_zero(law_half):
    for h in (0.01, 0.2):
        assert annealed_free_energy(law_half, DisorderLaw.GAUSSIAN, 0.0, h) == \
            pure_free_energy(law_half, h)


def test_annealed_critical_point(law_half):
    for beta in (0.5, 1.0, 2.0):
        lam = log_mgf(DisorderLaw.GAUSSIAN, beta)
        assert annealed_free_energy(law_half, DisorderLaw.GAUSSIAN, beta, -lam) == 0.0
        assert annealed_free_energy(law_half, DisorderLaw.GAUSSIAN, beta, -lam + 0.05) > 0.0


def test_annealed_finite_volume_matches_enumeration(fast_laws):
    # log E[Z_N] computed by subset enumeration with the per-contact factor
    # exp(h + lambda) equals the annealed dynamic program
    law = fast_laws[0.5]
    n = 9
    beta, h = 1.2, 0.3
    for disorder_law in DisorderLaw:
        lam = log_mgf(disorder_law, beta)
        flat = Environment(law=disorder_law, seed=0, base_values=np.zeros(n))
        enumerated = brute_force_log_partition(law, flat, PolymerParams(0.0, h + lam), n)
        assert annealed_log_partition(law, disorder_law, beta, h, n) == \
            pytest.approx(enumerated, abs=1e-12)


def test_quenched_estimate_beta_zero_collapses(fast_laws):
    law = fast_laws[0.5]
    n = 96
    est = quenched_free_energy_estimate(law, DisorderLaw.GAUSSIAN,
                                        PolymerParams(0.0, 0.1), n, 4, master_seed=7)
    u_based = pure_log_partition(law, 0.1, n) / n
    assert est.stderr == 0.0
    assert est.mean_per_site == pytest.approx(u_based, abs=1e-12)


def test_quenched_estimate_deterministic(fast_laws):
    law = fast_laws[0.5]
    a = quenched_free_energy_estimate(law, DisorderLaw.GAUSSIAN,
                                      PolymerParams(1.0, 0.0), 48, 6, master_seed=11)
    b = quenched_free_energy_estimate(law, DisorderLaw.GAUSSIAN,
                                      PolymerParams(1.0, 0.0), 48, 6, master_seed=11)
    assert a.per_site_values == b.per_site_values
    assert a.mean_per_site == b.mean_per_site
    assert a.stderr == b.stderr


def test_replica_aggregation_permutation_invariant():
    values = [0.1, -0.7, 0.31, 1.5, -2.2, 0.05, 0.9]
    mean, err = exact_mean_stderr(values)
    shuffled = values[:]
    random.Random(5).shuffle(shuffled)
    mean2, err2 = exact_mean_stderr(shuffled)
    assert mean == mean2
    assert err == err2


def test_quenched_needs_two_replicas(fast_laws):
    with pytest.raises(ValueError):
        quenched_free_energy_estimate(fast_laws[0.5], DisorderLaw.GAUSSIAN,
                                      PolymerParams(1.0, 0.0), 16, 1, master_seed=0)


def test_jensen_ordering_exhaustive_small_volume(fast_laws):
    # Rademacher disorder has 2^N equally likely environments: both sides
    # of the quenched <= annealed ordering are computed exactly
    law = fast_laws[0.5]
    n = 8
    beta, h = 1.0, 0.2
    log_zs = []
    for signs in itertools.product((-1.0, 1.0), repeat=n):
        env = Environment(law=DisorderLaw.RADEMACHER, seed=-1,
                          base_values=np.array(signs))
        log_zs.append(log_partition(law, env, PolymerParams(beta, h), n))
    quenched = math.fsum(log_zs) / len(log_zs) / n
    annealed = annealed_log_partition(law, DisorderLaw.RADEMACHER, beta, h, n) / n
    assert quenched <= annealed + 1e-12


def test_jensen_ordering_monte_carlo(fast_laws):
    law = fast_laws[0.5]
    n, replicas = 128, 64
    beta, h = 1.0, -0.1
    est = quenched_free_energy_estimate(law, DisorderLaw.GAUSSIAN,
                                        PolymerParams(beta, h), n, replicas,
                                        master_seed=23)
    annealed = annealed_log_partition(law, DisorderLaw.GAUSSIAN, beta, h, n) / n
    assert est.mean_per_site <= annealed + 3.0 * est.stderr


def test_doubling_constant_not_applicable_for_custom():
    law = build_kernel(KernelSpec.custom({1: 1.0}, n_max=64))
    dbl = compute_doubling_constant(law, 16)
    assert not dbl.applicable
    assert dbl.c_value >= 0.0


def test_doubling_constant_stable_under_refinement(law_half):
    values = [compute_doubling_constant(law_half, r).c_value for r in (16, 32, 64)]
    assert values[0] <= values[1] + 1e-12
    assert values[1] <= values[2] + 1e-12
    assert values[2] - values[0] <= 1e-9


def test_doubling_exponent_inequality_exhaustive(law_half):
    # (N-a)^z + (b-N)^z - (b-a)^z <= N^z over every admissible triple
    zeta = 0.5
    for n in range(1, 65):
        a = np.arange(0, n)
        b = np.arange(n + 1, 2 * n + 1)
        lhs = (np.power(n - a[:, None], zeta)
               + np.power(b[None, :] - n, zeta)
               - np.power(b[None, :] - a[:, None], zeta))
        assert float(lhs.max()) <= float(n) ** zeta + 1e-12


def test_doubling_range_validation(fast_laws):
    with pytest.raises(ValueError):
        compute_doubling_constant(fast_laws[0.5], 5000)


def test_bracket_orders_and_rejects_non_stretched(fast_laws):
    law = fast_laws[0.5]
    dbl = compute_doubling_constant(law, 32)
    lo, hi = finite_volume_bracket(-0.05, 128, PolymerParams(1.0, 0.3), law,
                                   DisorderLaw.GAUSSIAN, dbl)
    assert lo == -0.05
    assert hi > lo
    custom = build_kernel(KernelSpec.custom({1: 1.0}, n_max=64))
    with pytest.raises(ValueError, match="stretched"):
        finite_volume_bracket(0.0, 64, PolymerParams(0.0, 0.1), custom,
                              DisorderLaw.GAUSSIAN, dbl)


def test_bracket_contains_pure_truth(fast_laws):
    # at beta=0 the estimate is deterministic and the exact free energy is
    # available from the root solve, so the sandwich is directly testable
    law = fast_laws[0.5]
    dbl = compute_doubling_constant(law, 64)
    for h in (0.05, 0.3):
        truth = pure_free_energy(law, h)
        for n in (64, 128):
            est = quenched_free_energy_estimate(law, DisorderLaw.GAUSSIAN,
                                                PolymerParams(0.0, h), n, 2,
                                                master_seed=1, doubling=dbl)
            assert est.bracket_lo <= truth <= est.bracket_hi


def test_bracket_width_shrinks_at_the_advertised_rate(law_half):
    dbl = compute_doubling_constant(law_half, 64)
    params = PolymerParams(0.0, 0.1)
    widths = {}
    for n in (128, 256):
        lo, hi = finite_volume_bracket(0.0, n, params, law_half,
                                       DisorderLaw.GAUSSIAN, dbl)
        widths[n] = hi - lo
    ratio = widths[256] / widths[128]
    assert abs(ratio / 2.0 ** (0.5 - 1.0) - 1.0) <= 0.10


def test_quenched_estimates_monotone_in_h(fast_laws):
    # one master seed means every h sees the same environments, so the
    # estimated means inherit the pathwise monotonicity of log Z in h
    law = fast_laws[0.5]
    means = []
    for h in np.linspace(-0.5, 0.5, 6):
        est = quenched_free_energy_estimate(law, DisorderLaw.GAUSSIAN,
                                            PolymerParams(1.0, float(h)), 64, 8,
                                            master_seed=29)
        means.append(est.mean_per_site)
    assert all(b > a for a, b in zip(means, means[1:]))


def test_non_stretched_estimate_has_open_upper_bracket():
    law = build_kernel(KernelSpec.custom({1: 0.5, 2: 0.5}, n_max=64))
    est = quenched_free_energy_estimate(law, DisorderLaw.GAUSSIAN,
                                        PolymerParams(0.5, 0.1), 32, 4,
                                        master_seed=3)
    assert est.bracket_lo == est.mean_per_site
    assert math.isinf(est.bracket_hi)

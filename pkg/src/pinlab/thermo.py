"""Free energies: exact pure solver, annealed curve, quenched Monte Carlo
estimates and the deterministic finite-volume sandwich.

The sandwich turns one finite-N expectation into a two-sided bound on the
infinite-volume free energy f:

    mean <= f <= mean + N**(zeta-1) / (1 - 2**(zeta-1)) + (2*T + c) / N

where mean = (1/N) E[log Z_N], T is a positive-part term built from the
disorder log-MGF and the pinning reward, and c is twice log(2C) for the
computable doubling constant C.  The lower direction is superadditivity;
the upper direction follows from comparing Z_{2N} against the product of
two N-blocks, where C prices the cost of forcing a contact at the
midpoint.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from pinlab.disorder import DisorderLaw, Environment, log_mgf, mix_seed, sample_environment
from pinlab.kernel import STRETCHED, InterArrivalLaw
from pinlab.numerics import exact_mean_stderr
from pinlab.polymer import PolymerParams, log_partition

logger = logging.getLogger(__name__)

_ROOT_RESIDUAL_TOL = 1e-13


@dataclass(frozen=True, eq=False)
class FreeEnergyEstimate:
    """Monte Carlo estimate of (1/N) E[log Z_N] with its deterministic bracket.

    ``bracket_lo`` equals ``mean_per_site`` (the finite-N mean lower-bounds
    the free energy by superadditivity; the statistical error lives in
    ``stderr``).  ``bracket_hi`` adds the finite-volume sandwich width.
    """

    n_sites: int
    replicas: int
    mean_per_site: float
    stderr: float
    bracket_lo: float
    bracket_hi: float
    params: PolymerParams
    per_site_values: tuple[float, ...] = ()


@dataclass(frozen=True)
class DoublingConstant:
    """c = 2*log(2*C) with C the exhaustive doubling-ratio maximum.

    C = max over N <= n_range, 0 <= a < N < b <= 2N of
    K(b-a) / (K(N-a) K(b-N) exp(N**zeta)), floored at 1.  ``applicable``
    is False for families without the stretched exponent (no N**zeta
    scale to measure against).
    """

    c_value: float
    n_range: int
    applicable: bool = True


def _tilted_gap_sum(law: InterArrivalLaw, b: float, gaps: np.ndarray) -> float:
    """sum_n K(n) exp(-b n) over the table plus the bounded tail."""
    terms = law.log_mass - b * gaps
    finite = terms[np.isfinite(terms)]
    total = float(np.exp(finite).sum())
    if law.truncated_tail_mass > 0.0:
        total += law.truncated_tail_mass * math.exp(-b * (law.n_max + 1))
    return total


def pure_free_energy(law: InterArrivalLaw, h: float) -> float:
    """Free energy of the disorder-free model.

    Zero for h <= 0; for h > 0 the unique b > 0 solving
    sum_n K(n) exp(-b n) = exp(-h), located by bisection.  The left end of
    the initial bracket is 0 and the right end h + 1 always works because
    sum_n K(n) exp(-b n) <= exp(-b).
    """
    if h <= 0.0:
        return 0.0
    target = math.exp(-h)
    gaps = np.arange(1.0, law.n_max + 1.0)
    lo, hi = 0.0, h + 1.0
    while _tilted_gap_sum(law, hi, gaps) > target:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _tilted_gap_sum(law, mid, gaps) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1.0, hi):
            break
    root = 0.5 * (lo + hi)
    residual = abs(_tilted_gap_sum(law, root, gaps) - target)
    if residual > _ROOT_RESIDUAL_TOL:
        raise RuntimeError(
            f"pure free-energy solve left residual {residual:.3e} > {_ROOT_RESIDUAL_TOL:g}"
        )
    return root


def annealed_free_energy(law: InterArrivalLaw, disorder_law: DisorderLaw,
                         beta: float, h: float) -> float:
    """Free energy of the environment-averaged model.

    Averaging the partition function over the disorder shifts the reward
    by lambda(beta), so this is the pure free energy at h + lambda(beta)
    and the annealed critical point sits at -lambda(beta).
    """
    return pure_free_energy(law, h + log_mgf(disorder_law, beta))


def annealed_log_partition(law: InterArrivalLaw, disorder_law: DisorderLaw,
                           beta: float, h: float, n_sites: int) -> float:
    """log E[Z_N]: the finite-volume pure partition function at h + lambda(beta)."""
    flat = Environment(law=disorder_law, seed=0, base_values=np.zeros(n_sites))
    shifted = PolymerParams(beta=0.0, h=h + log_mgf(disorder_law, beta))
    return log_partition(law, flat, shifted, n_sites)


def pure_log_partition(law: InterArrivalLaw, h: float, n_sites: int) -> float:
    """log Z_N of the disorder-free model (beta = 0)."""
    flat = Environment(law=DisorderLaw.GAUSSIAN, seed=0, base_values=np.zeros(n_sites))
    return log_partition(law, flat, PolymerParams(beta=0.0, h=h), n_sites)


@lru_cache(maxsize=128)
def compute_doubling_constant(law: InterArrivalLaw, n_range: int) -> DoublingConstant:
    """Exhaustive scan of the doubling ratio over all N <= n_range triples.

    Works in log space on the stored table.  Non-stretched families have
    no N**zeta scale; they get the floor value C = 1 and applicable=False
    (a single-gap custom law has no admissible triples at all).
    """
    if n_range < 1:
        raise ValueError("n_range must be >= 1")
    if 2 * n_range > law.n_max:
        raise ValueError(
            f"n_range={n_range} needs table entries up to {2 * n_range}, "
            f"have {law.n_max}"
        )
    if law.spec.family != STRETCHED:
        return DoublingConstant(c_value=2.0 * math.log(2.0), n_range=n_range,
                                applicable=False)
    zeta = law.spec.zeta
    lm = law.log_mass
    best = -math.inf
    for n in range(1, n_range + 1):
        a = np.arange(0, n)
        b = np.arange(n + 1, 2 * n + 1)
        d = b[None, :] - a[:, None]
        log_ratio = (lm[d - 1]
                     - lm[(n - a) - 1][:, None]
                     - lm[(b - n) - 1][None, :]
                     - float(n) ** zeta)
        best = max(best, float(log_ratio.max()))
    log_c = max(best, 0.0)
    return DoublingConstant(c_value=2.0 * (math.log(2.0) + log_c),
                            n_range=n_range, applicable=True)


def finite_volume_bracket(estimate_mean: float, n_sites: int,
                          params: PolymerParams, law: InterArrivalLaw,
                          disorder_law: DisorderLaw,
                          doubling: DoublingConstant) -> tuple[float, float]:
    """Deterministic sandwich [lo, hi] for f given the finite-N mean.

    lo is the mean itself; hi adds N**(zeta-1)/(1-2**(zeta-1)) plus
    (2*T + c)/N.  The positive-part term T is taken conservatively as the
    larger of (lambda + h)_+ and (lambda - h)_+ with
    lambda = max(lambda(beta), lambda(-beta)); both variants are logged at
    debug level.
    """
    if law.spec.family != STRETCHED:
        raise ValueError(
            "the finite-volume bracket needs the stretched family (it is "
            f"built from the zeta exponent), got {law.spec.family!r}"
        )
    zeta = law.spec.zeta
    lam_plus = log_mgf(disorder_law, params.beta)
    lam_minus = log_mgf(disorder_law, -params.beta)
    lam = max(lam_plus, lam_minus)
    variant_a = max(lam + params.h, 0.0)
    variant_b = max(lam - params.h, 0.0)
    plus_term = max(variant_a, variant_b)
    logger.debug(
        "bracket positive-part variants: reward-aligned=%.6g reward-opposed=%.6g used=%.6g",
        variant_a, variant_b, plus_term,
    )
    width = (n_sites ** (zeta - 1.0) / (1.0 - 2.0 ** (zeta - 1.0))
             + (2.0 * plus_term + doubling.c_value) / n_sites)
    return estimate_mean, estimate_mean + width


def quenched_free_energy_estimate(law: InterArrivalLaw, disorder_law: DisorderLaw,
                                  params: PolymerParams, n_sites: int,
                                  replicas: int, master_seed: int,
                                  doubling: DoublingConstant | None = None
                                  ) -> FreeEnergyEstimate:
    """Monte Carlo estimate of (1/N) E[log Z_N] over independent environments.

    Replica k draws its environment from mix_seed(master_seed, k), so the
    estimate is deterministic and independent of evaluation order; the
    aggregation itself is exactly rounded and therefore permutation
    invariant.  For stretched laws the finite-volume bracket is attached;
    other families get bracket_hi = +inf (no zeta exponent to build the
    sandwich from).
    """
    if replicas < 2:
        raise ValueError("need at least 2 replicas")
    values = []
    for k in range(replicas):
        env = sample_environment(disorder_law, n_sites, mix_seed(master_seed, k))
        values.append(log_partition(law, env, params, n_sites) / n_sites)
    mean, stderr = exact_mean_stderr(values)
    if law.spec.family == STRETCHED:
        if doubling is None:
            doubling = compute_doubling_constant(law, min(64, law.n_max // 2))
        lo, hi = finite_volume_bracket(mean, n_sites, params, law, disorder_law,
                                       doubling)
    else:
        lo, hi = mean, math.inf
    return FreeEnergyEstimate(
        n_sites=n_sites,
        replicas=replicas,
        mean_per_site=mean,
        stderr=stderr,
        bracket_lo=lo,
        bracket_hi=hi,
        params=params,
        per_site_values=tuple(values),
    )

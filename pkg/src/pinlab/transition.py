"""Critical-point estimation, smoothing-exponent fits, correlation
inequalities and rare-region diagnostics for the disordered model.

Free energy positivity is not decidable from a finite volume, so the
critical estimator returns an interval with recorded evidence at both
ends: the upper end carries statistical proof of a positive free energy
(mean minus three standard errors above zero), the lower end carries
evidence of smallness (deterministic upper bound below a margin of the
bracket width).  The lower end is additionally clamped at the annealed
critical point -lambda(beta), which is a rigorous lower bound on the
quenched critical point by Jensen's inequality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Sequence

import numpy as np

from pinlab.disorder import DisorderLaw, Environment, log_mgf, mix_seed, sample_environment
from pinlab.kernel import CUSTOM, InterArrivalLaw, check_log_convexity
from pinlab.polymer import (
    PolymerParams,
    _enumerate_log_weights,
    contact_profile,
    exact_polymer_measure,
    log_partition,
)
from pinlab.numerics import exact_variance
from pinlab.thermo import (
    FreeEnergyEstimate,
    compute_doubling_constant,
    quenched_free_energy_estimate,
)

FKG_CAP = 12


@dataclass(frozen=True)
class CriticalConfig:
    """Knobs for the bisection on h."""

    n_sites: int
    replicas: int
    h_window: tuple[float, float]
    threshold_multiplier: float = 0.95
    seed: int = 0
    h_tol: float = 0.02
    max_evals: int = 48

    def __post_init__(self) -> None:
        lo, hi = self.h_window
        if not lo < hi:
            raise ValueError(f"h_window must satisfy lo < hi, got {self.h_window!r}")
        if self.replicas < 2:
            raise ValueError("need at least 2 replicas")
        if not 0.0 < self.threshold_multiplier <= 1.0:
            raise ValueError("threshold_multiplier must lie in (0, 1]")


@dataclass(frozen=True)
class CriticalEstimate:
    """Bracket [h_lo, h_hi] on the critical reward at a given beta.

    ``gap_lo`` is h_lo minus the annealed critical point; a strictly
    positive value is finite-volume evidence (never proof) that disorder
    shifts the critical point.
    """

    beta: float
    h_lo: float
    h_hi: float
    annealed_point: float
    gap_lo: float
    config: CriticalConfig
    evidence_lo: dict = field(repr=False, default_factory=dict)
    evidence_hi: dict = field(repr=False, default_factory=dict)


@dataclass(frozen=True)
class ExponentFit:
    """Least-squares slope of log f against log u with its admissible band."""

    zeta: float
    nu_hat: float
    fit_window: tuple[float, float]
    r_squared: float
    band_lo: float
    band_hi: float
    in_band: bool
    n_points: int


@dataclass(frozen=True)
class FkgReport:
    """Exhaustive positive-correlation audit of one finite polymer measure."""

    n_sites: int
    min_covariance: float
    worst_pair: tuple[int, int]
    lattice_condition_ok: bool
    min_lattice_ratio: float
    min_function_gap: float


@dataclass(frozen=True)
class RareRegionScan:
    """First block whose disorder sum clears the u*sqrt(N) threshold."""

    x0: int | None
    m_value: float
    within: bool
    blocks_examined: int
    block_threshold: float


@dataclass(frozen=True)
class RareRegionFrequency:
    trials: int
    hits: int
    frequency: float


@dataclass(frozen=True)
class ContactFractionPoint:
    h: float
    mean_fraction: float
    stderr: float


@dataclass(frozen=True)
class FluctuationPoint:
    n_sites: int
    var_log_z: float
    var_per_site: float


def _classify(est: FreeEnergyEstimate, threshold_multiplier: float) -> str:
    if est.bracket_lo - 3.0 * est.stderr > 0.0:
        return "supercritical"
    width = est.bracket_hi - est.bracket_lo
    if est.bracket_hi < threshold_multiplier * width:
        return "subcritical"
    return "inconclusive"


def _evidence(h: float, est: FreeEnergyEstimate, label: str) -> dict:
    return {
        "h": h,
        "label": label,
        "mean_per_site": est.mean_per_site,
        "stderr": est.stderr,
        "bracket_lo": est.bracket_lo,
        "bracket_hi": est.bracket_hi,
    }


def estimate_critical_point(law: InterArrivalLaw, disorder_law: DisorderLaw,
                            beta: float, cfg: CriticalConfig) -> CriticalEstimate:
    """Bisection bracket on the critical reward h_c(beta).

    A point is supercritical when mean - 3*stderr > 0 (free energy proven
    positive at the Monte Carlo noise level) and subcritical when the
    deterministic upper bound sits below threshold_multiplier times the
    bracket width (free energy indistinguishable from zero at this
    volume).  Inconclusive points move the lower edge, which is finally
    clamped at the annealed critical point: the quenched critical point
    can never sit below it.
    """
    annealed_point = -log_mgf(disorder_law, beta)
    doubling = compute_doubling_constant(law, min(64, law.n_max // 2))
    eval_count = 0

    def evaluate(h: float) -> tuple[FreeEnergyEstimate, str]:
        nonlocal eval_count
        est = quenched_free_energy_estimate(
            law, disorder_law, PolymerParams(beta=beta, h=h), cfg.n_sites,
            cfg.replicas, mix_seed(cfg.seed, eval_count), doubling=doubling,
        )
        eval_count += 1
        return est, _classify(est, cfg.threshold_multiplier)

    lo_h, hi_h = cfg.h_window
    est_lo, label_lo = evaluate(lo_h)
    if label_lo == "supercritical":
        raise ValueError(
            f"h window {cfg.h_window} does not bracket the transition: free "
            f"energy already positive at the lower end (mean={est_lo.mean_per_site:.4g}, "
            f"stderr={est_lo.stderr:.2g})"
        )
    est_hi, label_hi = evaluate(hi_h)
    if label_hi != "supercritical":
        raise ValueError(
            f"h window {cfg.h_window} does not bracket the transition: no "
            f"positive free-energy evidence at the upper end (mean={est_hi.mean_per_site:.4g}, "
            f"stderr={est_hi.stderr:.2g}, upper bound={est_hi.bracket_hi:.4g})"
        )
    # lo_h walks up on any non-supercritical point to keep the bisection
    # moving, but only genuinely subcritical points count as lower evidence
    evidence_lo = _evidence(lo_h, est_lo, label_lo)
    evidence_hi = _evidence(hi_h, est_hi, label_hi)
    sub_h = lo_h if label_lo == "subcritical" else None
    sub_evidence = evidence_lo if label_lo == "subcritical" else None
    while hi_h - lo_h > cfg.h_tol and eval_count < cfg.max_evals:
        mid = 0.5 * (lo_h + hi_h)
        est_mid, label_mid = evaluate(mid)
        if label_mid == "supercritical":
            hi_h = mid
            evidence_hi = _evidence(mid, est_mid, label_mid)
        else:
            lo_h = mid
            if label_mid == "subcritical":
                sub_h = mid
                sub_evidence = _evidence(mid, est_mid, label_mid)
            else:
                evidence_lo = _evidence(mid, est_mid, label_mid)
    candidate = sub_h if sub_h is not None else cfg.h_window[0]
    if sub_evidence is not None:
        evidence_lo = sub_evidence
    h_lo = min(max(candidate, annealed_point), hi_h)
    if h_lo == annealed_point and candidate < annealed_point:
        evidence_lo = {"h": annealed_point, "label": "annealed_bound"}
    return CriticalEstimate(
        beta=beta,
        h_lo=h_lo,
        h_hi=hi_h,
        annealed_point=annealed_point,
        gap_lo=h_lo - annealed_point,
        config=cfg,
        evidence_lo=evidence_lo,
        evidence_hi=evidence_hi,
    )


def relevance_gap(law: InterArrivalLaw, disorder_law: DisorderLaw, beta: float,
                  cfg: CriticalConfig) -> float:
    """h_lo minus the annealed critical point; reported, never asserted strict.

    The bracket width of the underlying critical estimate is the natural
    uncertainty to quote alongside the returned value.
    """
    return estimate_critical_point(law, disorder_law, beta, cfg).gap_lo


def contact_fraction_curve(law: InterArrivalLaw, disorder_law: DisorderLaw,
                           beta: float, h_values: Sequence[float], n_sites: int,
                           replicas: int, seed: int) -> list[ContactFractionPoint]:
    """Disorder-averaged contact fraction along an h grid.

    The same replica environments are reused across grid points (common
    random numbers), which makes the sampled curve monotone in h up to
    floating-point noise instead of Monte Carlo noise.
    """
    envs = [sample_environment(disorder_law, n_sites, mix_seed(seed, k))
            for k in range(replicas)]
    points = []
    for h in h_values:
        params = PolymerParams(beta=beta, h=h)
        fractions = [
            contact_profile(law, env, params, n_sites).expected_contacts / n_sites
            for env in envs
        ]
        mean = float(np.mean(fractions))
        stderr = (float(np.std(fractions, ddof=1)) / math.sqrt(replicas)
                  if replicas > 1 else 0.0)
        points.append(ContactFractionPoint(h=float(h), mean_fraction=mean, stderr=stderr))
    return points


def contact_fraction_upper_bound(law: InterArrivalLaw, disorder_law: DisorderLaw,
                                 params: PolymerParams, n_sites: int,
                                 replicas: int, seed: int) -> float:
    """Disorder-averaged finite-N contact fraction.

    For log-convex gap laws this quantity decreases towards the asymptotic
    slope of the free energy in h, so the finite-N value is an upper bound
    on that slope.  Refuses non-log-convex laws, where no such ordering is
    available.
    """
    if law.spec.family == CUSTOM:
        raise ValueError(
            "the contact-fraction bound needs gap masses at every length; a "
            f"finite table (support ends at {law.n_max}) has zero-mass gaps "
            "beyond its horizon, which breaks the ordering it relies on"
        )
    report = check_log_convexity(law)
    if not report.applicable:
        raise ValueError(
            "the contact-fraction bound needs a log-convex gap law with full "
            "support; this table has gaps, so the ordering it relies on is "
            "unavailable"
        )
    if not report.holds:
        raise ValueError(
            "the contact-fraction bound needs a log-convex gap law; the "
            f"condition fails with slack {report.worst_slack:.3e} at "
            f"(n, l) = {report.witness}"
        )
    fractions = []
    for k in range(replicas):
        env = sample_environment(disorder_law, n_sites, mix_seed(seed, k))
        profile = contact_profile(law, env, params, n_sites)
        fractions.append(profile.expected_contacts / n_sites)
    return float(np.mean(fractions))


def fit_smoothing_exponent(curve: Sequence[tuple[float, float, float, float]],
                           zeta: float) -> ExponentFit:
    """Fit f ~ u**nu on the points whose lower bound is strictly positive.

    ``curve`` rows are (u, f_estimate, f_lo, f_hi) with u the distance
    above the critical point.  The admissible band is [2(1-zeta),
    (1-zeta)/zeta] for zeta <= 1/2 (both ends collapse to 1 at 1/2) and
    the first-order value [1, 1] for zeta > 1/2.  A fit outside the band
    is flagged, not failed: the band is asymptotic and desk-scale windows
    sit far from it.
    """
    usable = [(u, f) for u, f, f_lo, _ in curve if u > 0.0 and f_lo > 0.0 and f > 0.0]
    if len(usable) < 4:
        raise ValueError(
            f"need at least 4 curve points with a positive lower bound, got {len(usable)}"
        )
    log_u = np.log([u for u, _ in usable])
    log_f = np.log([f for _, f in usable])
    slope, intercept = np.polyfit(log_u, log_f, 1)
    predicted = slope * log_u + intercept
    ss_res = float(((log_f - predicted) ** 2).sum())
    ss_tot = float(((log_f - log_f.mean()) ** 2).sum())
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    if zeta <= 0.5:
        band_lo, band_hi = 2.0 * (1.0 - zeta), (1.0 - zeta) / zeta
    else:
        band_lo, band_hi = 1.0, 1.0
    nu_hat = float(slope)
    return ExponentFit(
        zeta=zeta,
        nu_hat=nu_hat,
        fit_window=(min(u for u, _ in usable), max(u for u, _ in usable)),
        r_squared=r_squared,
        band_lo=band_lo,
        band_hi=band_hi,
        in_band=band_lo - 1e-9 <= nu_hat <= band_hi + 1e-9,
        n_points=len(usable),
    )


def _random_subset(rng: np.random.Generator, n_sites: int) -> tuple[int, ...]:
    mask = int(rng.integers(0, 1 << (n_sites - 1)))
    contacts = [i + 1 for i in range(n_sites - 1) if (mask >> i) & 1]
    contacts.append(n_sites)
    return tuple(contacts)


def fkg_brute_force_test(law: InterArrivalLaw, env: Environment,
                         params: PolymerParams, n_sites: int,
                         function_pairs: Sequence[tuple[Callable, Callable]] | None = None,
                         lattice_pairs: int = 1000, seed: int = 0) -> FkgReport:
    """Audit positive correlations on the exact finite polymer measure.

    Checks every pairwise contact covariance, the covariance of the total
    contact count against each indicator, any supplied increasing function
    pairs, and the lattice condition
    P(union) * P(intersection) >= P(A) * P(B) on random subset pairs.  For
    log-convex gap laws all of these are nonnegative up to rounding; for
    other laws the report is informative.
    """
    if n_sites > FKG_CAP:
        raise ValueError(f"n_sites={n_sites} exceeds the exhaustive FKG cap {FKG_CAP}")
    measure = exact_polymer_measure(law, env, params, n_sites, cap=FKG_CAP)
    marginal = np.zeros(n_sites)
    joint = np.zeros((n_sites, n_sites))
    for contacts, prob in measure.items():
        idx = np.array(contacts) - 1
        marginal[idx] += prob
        for i, j in combinations(idx, 2):
            joint[i, j] += prob
    cov = np.zeros((n_sites, n_sites))
    for i in range(n_sites):
        cov[i, i] = marginal[i] * (1.0 - marginal[i])
        for j in range(i + 1, n_sites):
            cov[i, j] = cov[j, i] = joint[i, j] - marginal[i] * marginal[j]
    min_cov = math.inf
    worst_pair = (1, 1)
    for i in range(n_sites):
        for j in range(i + 1, n_sites):
            if cov[i, j] < min_cov:
                min_cov = float(cov[i, j])
                worst_pair = (i + 1, j + 1)
    # total contact count against each indicator: column sums of cov
    count_gaps = cov.sum(axis=0)
    min_function_gap = float(count_gaps.min())
    if function_pairs:
        expectations = {}

        def expect(fn):
            key = id(fn)
            if key not in expectations:
                expectations[key] = math.fsum(
                    fn(frozenset(c)) * p for c, p in measure.items()
                )
            return expectations[key]

        for f, g in function_pairs:
            e_fg = math.fsum(f(frozenset(c)) * g(frozenset(c)) * p
                             for c, p in measure.items())
            gap = e_fg - expect(f) * expect(g)
            min_function_gap = min(min_function_gap, float(gap))
    # lattice condition on the unnormalized log weights (normalization cancels)
    log_weight = dict(_enumerate_log_weights(law, env, params, n_sites))
    rng = np.random.default_rng(mix_seed(seed, 0))
    min_ratio = math.inf
    for _ in range(lattice_pairs):
        a = _random_subset(rng, n_sites)
        b = _random_subset(rng, n_sites)
        rhs = log_weight[a] + log_weight[b]
        if rhs == -math.inf:
            continue  # zero-probability pair: condition is vacuous
        union = tuple(sorted(set(a) | set(b)))
        inter = tuple(sorted(set(a) & set(b)))
        lhs = log_weight[union] + log_weight[inter]
        ratio = 0.0 if lhs == -math.inf else math.exp(min(lhs - rhs, 700.0))
        min_ratio = min(min_ratio, ratio)
    return FkgReport(
        n_sites=n_sites,
        min_covariance=min_cov,
        worst_pair=worst_pair,
        lattice_condition_ok=min_ratio >= 1.0 - 1e-12,
        min_lattice_ratio=float(min_ratio),
        min_function_gap=min_function_gap,
    )


def rare_region_scan(disorder_law: DisorderLaw, block_size: int, u: float,
                     max_blocks: int, seed: int) -> RareRegionScan:
    """Stream disorder blocks until one has sum >= u * sqrt(block_size).

    x0 is the index of the first such block (None if max_blocks is
    exhausted); m_value = u * exp(u**2 / 2) is the block budget the
    rare-region strategy allows, and ``within`` records x0 <= m_value - 2.
    Blocks are drawn on the fly, never materialized together: the budget
    can be astronomically large.
    """
    if u < 1.0:
        raise ValueError(f"the scan assumes u >= 1, got {u!r}")
    if block_size < 1 or max_blocks < 1:
        raise ValueError("block_size and max_blocks must be >= 1")
    rng = np.random.default_rng(seed)
    threshold = u * math.sqrt(block_size)
    m_value = u * math.exp(0.5 * u * u)
    x0 = None
    examined = 0
    for index in range(max_blocks):
        if disorder_law is DisorderLaw.GAUSSIAN:
            block = rng.standard_normal(block_size)
        elif disorder_law is DisorderLaw.RADEMACHER:
            block = rng.integers(0, 2, size=block_size).astype(float) * 2.0 - 1.0
        else:
            block = rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), size=block_size)
        examined += 1
        if float(block.sum()) >= threshold:
            x0 = index
            break
    within = x0 is not None and x0 <= m_value - 2.0
    return RareRegionScan(x0=x0, m_value=m_value, within=within,
                          blocks_examined=examined, block_threshold=threshold)


def rare_region_within_frequency(disorder_law: DisorderLaw, block_size: int,
                                 u: float, trials: int,
                                 master_seed: int) -> RareRegionFrequency:
    """Empirical frequency of ``within`` over independent scans."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    budget = max(1, int(math.ceil(u * math.exp(0.5 * u * u))))
    hits = 0
    for t in range(trials):
        scan = rare_region_scan(disorder_law, block_size, u, budget,
                                mix_seed(master_seed, t))
        hits += int(scan.within)
    return RareRegionFrequency(trials=trials, hits=hits, frequency=hits / trials)


def fluctuation_diagnostic(law: InterArrivalLaw, disorder_law: DisorderLaw,
                           params: PolymerParams, n_list: Sequence[int],
                           replicas: int, seed: int) -> list[FluctuationPoint]:
    """Sample variance of log Z_N across N, as a concentration diagnostic.

    No sharp assertion is attached beyond nonnegativity (and exact zero
    without disorder); the interesting output is the scale of
    Var(log Z_N) / N.
    """
    if replicas < 30:
        raise ValueError("need at least 30 replicas for a variance diagnostic")
    points = []
    for n_sites in n_list:
        values = []
        for k in range(replicas):
            env = sample_environment(disorder_law, n_sites, mix_seed(seed, k))
            values.append(log_partition(law, env, params, n_sites))
        var = exact_variance(values)
        points.append(FluctuationPoint(n_sites=n_sites, var_log_z=var,
                                       var_per_site=var / n_sites))
    return points

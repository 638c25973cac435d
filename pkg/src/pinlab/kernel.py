"""Renewal gap laws: construction, normalization and shape diagnostics.

Three families are supported:

* ``stretched``: K(n) = exp(-n**zeta) / S with S = sum_{m>=1} exp(-m**zeta)
  and 0 < zeta < 1.  This is the law the rest of the package is built
  around; S is evaluated as a finite table sum plus a certified integral
  tail bound, so the stored law is normalized to machine precision.
* ``power_law``: K(n) proportional to n**-(1+alpha), alpha > 0, kept for
  comparison runs.  Normalizer and tail use the Hurwitz zeta function.
* ``custom``: an explicit finite table of positive masses, normalized to
  total mass one.

Masses are stored as log K(n) because exp(-n**zeta) underflows long before
the table horizons needed for accurate normalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy import special


STRETCHED = "stretched"
POWER_LAW = "power_law"
CUSTOM = "custom"

# Auto-sized stretched tables never go below this horizon so that the
# dynamic programs (which read K(1..N) directly) have room to run even
# when the normalization tail bound is met much earlier.
_AUTO_N_MAX_FLOOR = 4096
_AUTO_N_MAX_CAP = 1 << 23


@dataclass(frozen=True)
class KernelSpec:
    """Declarative description of a gap law.

    ``n_max`` is the table truncation horizon; ``tail_tolerance`` is the
    maximum mass the truncation may leave out after normalization.
    """

    family: str
    zeta: float | None = None
    alpha: float | None = None
    table: tuple[tuple[int, float], ...] | None = None
    n_max: int = 0
    tail_tolerance: float = 1e-14

    def __post_init__(self) -> None:
        if self.family not in (STRETCHED, POWER_LAW, CUSTOM):
            raise ValueError(f"unknown gap-law family {self.family!r}")
        if self.tail_tolerance <= 0.0:
            raise ValueError("tail_tolerance must be positive")
        if self.family == STRETCHED:
            if self.zeta is None or not 0.0 < self.zeta < 1.0:
                raise ValueError(
                    f"stretched family needs zeta in the open interval (0, 1), got {self.zeta!r}"
                )
        elif self.family == POWER_LAW:
            if self.alpha is None or self.alpha <= 0.0:
                raise ValueError(f"power-law family needs alpha > 0, got {self.alpha!r}")
        else:
            if not self.table:
                raise ValueError("custom family needs a non-empty mass table")
            for gap, mass in self.table:
                if int(gap) != gap or gap < 1:
                    raise ValueError(f"custom table gaps must be positive integers, got {gap!r}")
                if mass <= 0.0:
                    raise ValueError(f"custom table masses must be positive, got {mass!r} at gap {gap}")
        if self.n_max < 1:
            raise ValueError("n_max must be a positive integer")

    @classmethod
    def stretched(cls, zeta: float, n_max: int | None = None,
                  tail_tolerance: float = 1e-14) -> "KernelSpec":
        """Stretched-exponential spec; ``n_max=None`` picks the smallest
        power-of-two horizon whose truncated mass meets the tolerance."""
        if n_max is None:
            n_max = _stretched_auto_n_max(zeta, tail_tolerance)
        return cls(family=STRETCHED, zeta=zeta, n_max=int(n_max),
                   tail_tolerance=tail_tolerance)

    @classmethod
    def power_law(cls, alpha: float, n_max: int | None = None,
                  tail_tolerance: float = 1e-14) -> "KernelSpec":
        if n_max is None:
            n_max = _power_law_auto_n_max(alpha, tail_tolerance)
        return cls(family=POWER_LAW, alpha=alpha, n_max=int(n_max),
                   tail_tolerance=tail_tolerance)

    @classmethod
    def custom(cls, table: Mapping[int, float], n_max: int | None = None) -> "KernelSpec":
        """Explicit finite mass table; ``n_max`` may exceed the support to
        let the dynamic programs run past the largest gap (those entries
        carry zero mass)."""
        items = tuple(sorted((int(g), float(m)) for g, m in table.items()))
        support_max = max(g for g, _ in items) if items else 0
        if n_max is None:
            n_max = support_max
        elif n_max < support_max:
            raise ValueError(
                f"n_max={n_max} is below the largest table gap {support_max}"
            )
        return cls(family=CUSTOM, table=items, n_max=int(n_max))


@dataclass(frozen=True, eq=False)
class InterArrivalLaw:
    """Normalized gap law with log-mass table and tail metadata.

    ``log_mass[i]`` holds log K(i + 1); gaps outside a custom support are
    -inf.  ``log_norm`` is the log of the full-support normalizing sum
    (for the stretched family, log of 1/c_K).  ``truncated_tail_mass`` is
    the certified bound on the mass beyond ``n_max`` after normalization,
    so that sum(K(1..n_max)) + truncated_tail_mass == 1.
    """

    spec: KernelSpec
    log_mass: np.ndarray
    log_norm: float
    truncated_tail_mass: float
    mean_gap: float

    @property
    def n_max(self) -> int:
        return self.spec.n_max

    def log_k(self, gap: int) -> float:
        """log K(gap) for 1 <= gap <= n_max."""
        if not 1 <= gap <= self.n_max:
            raise ValueError(f"gap {gap} outside table horizon 1..{self.n_max}")
        return float(self.log_mass[gap - 1])

    def to_json_dict(self) -> dict:
        if self.spec.family == STRETCHED:
            params: dict = {"zeta": self.spec.zeta}
        elif self.spec.family == POWER_LAW:
            params = {"alpha": self.spec.alpha}
        else:
            params = {"table": {str(g): m for g, m in self.spec.table}}
        return {
            "family": self.spec.family,
            "params": params,
            "n_max": self.spec.n_max,
            "log_norm": self.log_norm,
            "truncated_tail_mass": self.truncated_tail_mass,
        }


@dataclass(frozen=True)
class LogConvexityReport:
    """Result of the exhaustive K(n+1)K(l-1) >= K(n)K(l) scan.

    ``worst_slack`` is the minimum of
    log K(n+1) + log K(l-1) - log K(n) - log K(l) over all tested pairs
    1 < l <= n < n_max; ``witness`` is a minimizing (n, l).  ``applicable``
    is False when the support has gaps, in which case only fully supported
    quadruples were tested (the condition is vacuous across gaps).
    """

    holds: bool
    worst_slack: float
    witness: tuple[int, int] | None
    applicable: bool = True


def _stretched_tail_bound(zeta: float, horizon: int) -> float:
    """Upper bound sum_{n > horizon} exp(-n**zeta) <= integral_horizon^inf exp(-x**zeta) dx.

    The integral equals (1/zeta) * Gamma(1/zeta, horizon**zeta); evaluated in
    log space so large 1/zeta does not overflow the Gamma factor.
    """
    s = 1.0 / zeta
    x = float(horizon) ** zeta
    q = float(special.gammaincc(s, x))
    if q == 0.0:
        return 0.0
    return math.exp(math.log(s) + float(special.gammaln(s)) + math.log(q))


def _stretched_tail_first_moment_bound(zeta: float, horizon: int) -> float:
    """Upper bound sum_{n > horizon} n * exp(-n**zeta) via integral of (x+1)exp(-x**zeta)."""
    x = float(horizon) ** zeta
    total = 0.0
    for s in (2.0 / zeta, 1.0 / zeta):
        q = float(special.gammaincc(s, x))
        if q > 0.0:
            total += math.exp(-math.log(zeta) + float(special.gammaln(s)) + math.log(q))
    return total


def _stretched_auto_n_max(zeta: float, tail_tolerance: float) -> int:
    if not 0.0 < zeta < 1.0:
        raise ValueError(f"zeta must lie in (0, 1), got {zeta!r}")
    horizon = _AUTO_N_MAX_FLOOR
    while True:
        n = np.arange(1.0, horizon + 1.0)
        table_sum = float(np.exp(-np.power(n, zeta)).sum())
        tail = _stretched_tail_bound(zeta, horizon)
        if tail <= tail_tolerance * (table_sum + tail):
            return horizon
        if horizon >= _AUTO_N_MAX_CAP:
            raise ValueError(
                f"no horizon <= {_AUTO_N_MAX_CAP} meets tail_tolerance={tail_tolerance:g} "
                f"for zeta={zeta:g}; pass an explicit n_max or a larger tolerance"
            )
        horizon *= 2


def _power_law_auto_n_max(alpha: float, tail_tolerance: float) -> int:
    if alpha <= 0.0:
        raise ValueError(f"alpha must be positive, got {alpha!r}")
    norm = float(special.zeta(1.0 + alpha))
    # tail ~ horizon**-alpha / alpha, solved directly then doubled for safety
    horizon = max(_AUTO_N_MAX_FLOOR, int((alpha * tail_tolerance * norm) ** (-1.0 / alpha)) * 2)
    if horizon > _AUTO_N_MAX_CAP:
        raise ValueError(
            f"power-law tail with alpha={alpha:g} needs horizon {horizon} for "
            f"tail_tolerance={tail_tolerance:g}; pass a larger tolerance"
        )
    return horizon


def build_kernel(spec: KernelSpec) -> InterArrivalLaw:
    """Construct the normalized law described by ``spec``.

    Raises ValueError when ``n_max`` is too small for ``tail_tolerance``,
    or when the spec parameters are out of range.
    """
    if spec.family == STRETCHED:
        n = np.arange(1.0, spec.n_max + 1.0)
        exponents = np.power(n, spec.zeta)
        raw = np.exp(-exponents)
        tail = _stretched_tail_bound(spec.zeta, spec.n_max)
        norm = float(raw.sum()) + tail
        truncated = tail / norm
        if truncated > spec.tail_tolerance:
            raise ValueError(
                f"n_max={spec.n_max} leaves truncated mass {truncated:.3e} > "
                f"tail_tolerance={spec.tail_tolerance:g} for zeta={spec.zeta:g}; "
                "increase n_max or relax the tolerance"
            )
        log_norm = math.log(norm)
        log_mass = -exponents - log_norm
        first_moment = float((n * raw).sum()) + _stretched_tail_first_moment_bound(spec.zeta, spec.n_max)
        mean = first_moment / norm
    elif spec.family == POWER_LAW:
        norm = float(special.zeta(1.0 + spec.alpha))
        tail = float(special.zeta(1.0 + spec.alpha, spec.n_max + 1))
        truncated = tail / norm
        if truncated > spec.tail_tolerance:
            raise ValueError(
                f"n_max={spec.n_max} leaves truncated mass {truncated:.3e} > "
                f"tail_tolerance={spec.tail_tolerance:g} for alpha={spec.alpha:g}; "
                "increase n_max or relax the tolerance"
            )
        n = np.arange(1.0, spec.n_max + 1.0)
        log_norm = math.log(norm)
        log_mass = -(1.0 + spec.alpha) * np.log(n) - log_norm
        if spec.alpha > 1.0:
            first_moment = float(np.power(n, -spec.alpha).sum()) + float(
                special.zeta(spec.alpha, spec.n_max + 1)
            )
            mean = first_moment / norm
        else:
            # the first moment diverges for alpha <= 1
            mean = math.inf
    else:
        total = math.fsum(m for _, m in spec.table)
        log_norm = math.log(total)
        log_mass = np.full(spec.n_max, -np.inf)
        for gap, mass in spec.table:
            log_mass[gap - 1] = math.log(mass) - log_norm
        mean = math.fsum(g * m for g, m in spec.table) / total
        truncated = 0.0
    return InterArrivalLaw(
        spec=spec,
        log_mass=log_mass,
        log_norm=float(log_norm),
        truncated_tail_mass=float(truncated),
        mean_gap=float(mean),
    )


def mean_gap(law: InterArrivalLaw) -> float:
    """Expected gap length E[tau_1], table sum plus certified tail correction."""
    return law.mean_gap


def check_log_convexity(law: InterArrivalLaw) -> LogConvexityReport:
    """Exhaustively test K(n+1)K(l-1) >= K(n)K(l) for all 1 < l <= n < n_max.

    For full-support laws the scan is reduced, without loss, to comparing
    each discrete slope d(j) = log K(j+1) - log K(j) against the running
    maximum of the earlier slopes: the slack of the pair (n, l) is exactly
    d(n) - d(l-1), so the minimum over all pairs is the minimum over n of
    d(n) minus the prefix maximum.  Supports with gaps fall back to a
    direct scan of the fully supported quadruples and are flagged as not
    applicable.
    """
    lm = law.log_mass
    n_max = law.n_max
    full_support = bool(np.all(np.isfinite(lm)))
    if n_max < 3:
        return LogConvexityReport(holds=True, worst_slack=math.inf, witness=None,
                                  applicable=full_support)
    if full_support:
        d = lm[1:] - lm[:-1]
        prefix_max = np.maximum.accumulate(d)[:-1]
        slack = d[1:] - prefix_max
        idx = int(np.argmin(slack))
        worst = float(slack[idx])
        n_witness = idx + 2
        l_witness = int(np.argmax(d[: idx + 1])) + 2
        return LogConvexityReport(holds=worst >= -1e-12, worst_slack=worst,
                                  witness=(n_witness, l_witness), applicable=True)
    worst = math.inf
    witness = None
    for n in range(2, n_max):
        for l in range(2, n + 1):
            quad = (lm[n], lm[l - 2], lm[n - 1], lm[l - 1])
            if not all(np.isfinite(quad)):
                continue
            slack = quad[0] + quad[1] - quad[2] - quad[3]
            if slack < worst:
                worst = float(slack)
                witness = (n, l)
    return LogConvexityReport(holds=worst >= -1e-12, worst_slack=worst,
                              witness=witness, applicable=False)


def renewal_mass_function(law: InterArrivalLaw, n_sites: int) -> np.ndarray:
    """Renewal mass function u[0..N] with u[n] = P(n is a renewal point).

    u[0] = 1 and u[n] = sum_{k=1..n} K(k) u[n-k]; this equals the
    partition function with all site energies zero, so it doubles as the
    oracle for that case.
    """
    if n_sites < 1:
        raise ValueError("n_sites must be >= 1")
    if n_sites > law.n_max:
        raise ValueError(f"n_sites={n_sites} exceeds the kernel table horizon {law.n_max}")
    pmf = np.exp(law.log_mass[:n_sites])
    u = np.empty(n_sites + 1)
    u[0] = 1.0
    for n in range(1, n_sites + 1):
        u[n] = float(np.dot(pmf[:n], u[n - 1 :: -1]))
    return u


def sample_renewal(law: InterArrivalLaw, n_sites: int, seed: int) -> np.ndarray:
    """Sample the renewal points in {0..N} (0 always included).

    Gaps are IID draws from K via inverse-CDF lookup; generation stops at
    the first point beyond N, which is discarded.  Deterministic per seed.
    """
    if n_sites < 1:
        raise ValueError("n_sites must be >= 1")
    pmf = np.exp(law.log_mass)
    cdf = np.cumsum(pmf)
    rng = np.random.default_rng(seed)
    points = [0]
    position = 0
    chunk = max(16, min(4096, int(2 * n_sites / max(law.mean_gap, 1.0)) + 16))
    while True:
        u = rng.random(chunk)
        gaps = np.searchsorted(cdf, u * cdf[-1], side="right") + 1
        gaps = np.minimum(gaps, law.n_max)
        walk = position + np.cumsum(gaps)
        beyond = np.nonzero(walk > n_sites)[0]
        if beyond.size:
            stop = beyond[0]
            points.extend(int(p) for p in walk[:stop])
            return np.array(points, dtype=int)
        points.extend(int(p) for p in walk)
        position = int(walk[-1])


def normalization_defect(law: InterArrivalLaw) -> float:
    """|sum K(1..n_max) + truncated_tail_mass - 1|, zero up to rounding."""
    table_mass = float(np.exp(law.log_mass[np.isfinite(law.log_mass)]).sum()) if law.n_max else 0.0
    return abs(table_mass + law.truncated_tail_mass - 1.0)

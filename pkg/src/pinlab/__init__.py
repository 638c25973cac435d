"""Numerical laboratory for disordered pinning of renewals with
stretched-exponential gap laws: exact finite-volume partition functions,
free-energy estimation with deterministic brackets, critical-point and
smoothing-exponent analysis, and brute-force correlation checks."""

from pinlab.kernel import (
    InterArrivalLaw,
    KernelSpec,
    LogConvexityReport,
    build_kernel,
    check_log_convexity,
    mean_gap,
    renewal_mass_function,
    sample_renewal,
)
from pinlab.disorder import (
    DisorderLaw,
    Environment,
    log_mgf,
    mix_seed,
    sample_environment,
    sample_replicas,
    shift_environment,
    tilt,
)
from pinlab.polymer import (
    ContactCountWeights,
    PartitionComputation,
    PolymerParams,
    brute_force_log_partition,
    contact_count_logweights,
    contact_profile,
    exact_polymer_measure,
    log_partition,
    log_partition_segment,
)
from pinlab.thermo import (
    DoublingConstant,
    FreeEnergyEstimate,
    annealed_free_energy,
    annealed_log_partition,
    compute_doubling_constant,
    finite_volume_bracket,
    pure_free_energy,
    pure_log_partition,
    quenched_free_energy_estimate,
)
from pinlab.transition import (
    CriticalConfig,
    CriticalEstimate,
    ExponentFit,
    FkgReport,
    contact_fraction_curve,
    contact_fraction_upper_bound,
    estimate_critical_point,
    fit_smoothing_exponent,
    fkg_brute_force_test,
    fluctuation_diagnostic,
    rare_region_scan,
    rare_region_within_frequency,
    relevance_gap,
)

__version__ = "0.1.0"

__all__ = [
    "InterArrivalLaw", "KernelSpec", "LogConvexityReport", "build_kernel",
    "check_log_convexity", "mean_gap", "renewal_mass_function", "sample_renewal",
    "DisorderLaw", "Environment", "log_mgf", "mix_seed", "sample_environment",
    "sample_replicas", "shift_environment", "tilt",
    "ContactCountWeights", "PartitionComputation", "PolymerParams",
    "brute_force_log_partition", "contact_count_logweights", "contact_profile",
    "exact_polymer_measure", "log_partition", "log_partition_segment",
    "DoublingConstant", "FreeEnergyEstimate", "annealed_free_energy",
    "annealed_log_partition", "compute_doubling_constant",
    "finite_volume_bracket", "pure_free_energy", "pure_log_partition",
    "quenched_free_energy_estimate",
    "CriticalConfig", "CriticalEstimate", "ExponentFit", "FkgReport",
    "contact_fraction_curve", "contact_fraction_upper_bound",
    "estimate_critical_point", "fit_smoothing_exponent", "fkg_brute_force_test",
    "fluctuation_diagnostic", "rare_region_scan", "rare_region_within_frequency",
    "relevance_gap",
]

"""Command-line surface: reproducible experiments with config files.

Configs are flat JSON key-value documents; command-line flags override
config keys.  Every output embeds the scientific config echo and the tool
version.  Wall-clock metadata is added unless --canonical-hash is given,
in which case the output bytes depend only on config and version (never
on thread count or scheduling) and the SHA-256 of those bytes is printed.

Exit codes: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone

import numpy as np

import pinlab
from pinlab.disorder import DisorderLaw, mix_seed, sample_environment
from pinlab.kernel import (
    CUSTOM,
    POWER_LAW,
    STRETCHED,
    KernelSpec,
    build_kernel,
    check_log_convexity,
    normalization_defect,
)
from pinlab.polymer import PolymerParams
from pinlab.thermo import (
    annealed_free_energy,
    annealed_log_partition,
    pure_free_energy,
    pure_log_partition,
    quenched_free_energy_estimate,
)
from pinlab.transition import (
    CriticalConfig,
    estimate_critical_point,
    fit_smoothing_exponent,
    fkg_brute_force_test,
    rare_region_scan,
    rare_region_within_frequency,
)

_COMMANDS = ("validate-kernel", "free-energy", "critical", "exponent", "fkg",
             "rare-region")

_KNOWN_KEYS = {
    "kernel_family", "kernel_zeta", "kernel_alpha", "kernel_table",
    "kernel_n_max", "kernel_tail_tolerance",
    "disorder", "beta", "beta_list", "h", "h_grid", "N", "N_list",
    "replicas", "master_seed", "threads", "output", "format",
    "contact_count_cap", "brute_force_cap",
    "h_window", "threshold_multiplier", "h_tol",
    "curve_source", "synthetic_nu", "fit_u_min", "fit_u_max", "fit_points",
    "curve_output",
    "fkg_environments", "lattice_pairs",
    "block_size", "u", "max_blocks", "trials",
}

_FREE_ENERGY_COLUMNS = [
    "beta", "h", "n_sites", "replicas", "mean_per_site", "stderr",
    "bracket_lo", "bracket_hi", "annealed_per_site", "pure_per_site",
    "annealed_free_energy", "pure_free_energy",
]

_CURVE_COLUMNS = ["beta", "h", "n_sites", "replicas", "value", "stderr", "lo", "hi"]


class ConfigError(ValueError):
    pass


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object of key-value pairs")
    unknown = set(cfg) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def _merge_flags(cfg: dict, args: argparse.Namespace) -> dict:
    merged = dict(cfg)
    if args.seed is not None:
        merged["master_seed"] = args.seed
    if args.threads is not None:
        merged["threads"] = args.threads
    if args.output is not None:
        merged["output"] = args.output
    if args.format is not None:
        merged["format"] = args.format
    return merged


def _kernel_from_config(cfg: dict):
    family = cfg.get("kernel_family", STRETCHED)
    n_max = cfg.get("kernel_n_max")
    tol = cfg.get("kernel_tail_tolerance", 1e-14)
    if family == STRETCHED:
        spec = KernelSpec.stretched(cfg.get("kernel_zeta", 0.5), n_max=n_max,
                                    tail_tolerance=tol)
    elif family == POWER_LAW:
        if "kernel_alpha" not in cfg:
            raise ConfigError("power_law kernels need kernel_alpha")
        spec = KernelSpec.power_law(cfg["kernel_alpha"], n_max=n_max,
                                    tail_tolerance=tol)
    elif family == CUSTOM:
        table = cfg.get("kernel_table")
        if not table:
            raise ConfigError("custom kernels need kernel_table")
        spec = KernelSpec.custom({int(k): float(v) for k, v in table.items()},
                                 n_max=n_max)
    else:
        raise ConfigError(f"unknown kernel_family {family!r}")
    return build_kernel(spec)


def _disorder_from_config(cfg: dict) -> DisorderLaw:
    return DisorderLaw.from_name(cfg.get("disorder", "gaussian"))


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"missing required config key {key!r}")
    return cfg[key]


def _canonical_config(cfg: dict) -> dict:
    """The scientific part of the config: excludes I/O and scheduling knobs."""
    return {k: v for k, v in sorted(cfg.items())
            if k not in ("output", "threads", "format")}


def _h_values(cfg: dict) -> list[float]:
    if "h_grid" in cfg:
        return [float(v) for v in cfg["h_grid"]]
    if "h" in cfg:
        return [float(cfg["h"])]
    raise ConfigError("need h or h_grid")


def _n_values(cfg: dict) -> list[int]:
    if "N_list" in cfg:
        return [int(v) for v in cfg["N_list"]]
    if "N" in cfg:
        return [int(cfg["N"])]
    raise ConfigError("need N or N_list")


def _beta_values(cfg: dict) -> list[float]:
    if "beta_list" in cfg:
        return [float(v) for v in cfg["beta_list"]]
    return [float(cfg.get("beta", 0.0))]


def _run_validate_kernel(cfg: dict) -> dict:
    law = _kernel_from_config(cfg)
    defect = normalization_defect(law)
    report = check_log_convexity(law)
    shape_defect = 0.0
    if law.spec.family == STRETCHED:
        n = np.arange(1.0, law.n_max + 1.0)
        shape_defect = float(np.max(np.abs(
            law.log_mass + np.power(n, law.spec.zeta) + law.log_norm)))
    warnings = []
    if not report.applicable:
        warnings.append("log-convexity not applicable: support has gaps")
    elif not report.holds:
        warnings.append(
            f"gap law is not log-convex (worst slack {report.worst_slack:.3e} "
            f"at {report.witness})"
        )
    passed = defect <= 1e-12 and shape_defect <= 1e-12
    return {
        "law": law.to_json_dict(),
        "mean_gap": law.mean_gap,
        "normalization_defect": defect,
        "shape_defect": shape_defect,
        "log_convexity": {
            "holds": report.holds,
            "applicable": report.applicable,
            "worst_slack": report.worst_slack,
            "witness": list(report.witness) if report.witness else None,
        },
        "warnings": warnings,
        "passed": passed,
    }


def _run_free_energy(cfg: dict) -> list[dict]:
    law = _kernel_from_config(cfg)
    disorder_law = _disorder_from_config(cfg)
    beta = float(cfg.get("beta", 0.0))
    replicas = int(cfg.get("replicas", 8))
    master_seed = int(cfg.get("master_seed", 0))
    threads = int(cfg.get("threads", 1))
    grid = [(h, n) for h in _h_values(cfg) for n in _n_values(cfg)]

    def one(item: tuple[int, tuple[float, int]]) -> dict:
        index, (h, n_sites) = item
        params = PolymerParams(beta=beta, h=h)
        est = quenched_free_energy_estimate(
            law, disorder_law, params, n_sites, replicas,
            mix_seed(master_seed, index))
        return {
            "beta": beta,
            "h": h,
            "n_sites": n_sites,
            "replicas": replicas,
            "mean_per_site": est.mean_per_site,
            "stderr": est.stderr,
            "bracket_lo": est.bracket_lo,
            "bracket_hi": est.bracket_hi,
            "annealed_per_site": annealed_log_partition(
                law, disorder_law, beta, h, n_sites) / n_sites,
            "pure_per_site": pure_log_partition(law, h, n_sites) / n_sites,
            "annealed_free_energy": annealed_free_energy(law, disorder_law, beta, h),
            "pure_free_energy": pure_free_energy(law, h),
        }

    items = list(enumerate(grid))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, items))
    else:
        rows = [one(item) for item in items]
    return rows


def _critical_config(cfg: dict) -> CriticalConfig:
    window = _require(cfg, "h_window")
    if not (isinstance(window, (list, tuple)) and len(window) == 2):
        raise ConfigError("h_window must be a [lo, hi] pair")
    return CriticalConfig(
        n_sites=int(_require(cfg, "N")),
        replicas=int(cfg.get("replicas", 8)),
        h_window=(float(window[0]), float(window[1])),
        threshold_multiplier=float(cfg.get("threshold_multiplier", 0.95)),
        seed=int(cfg.get("master_seed", 0)),
        h_tol=float(cfg.get("h_tol", 0.02)),
    )


def _run_critical(cfg: dict) -> list[dict]:
    law = _kernel_from_config(cfg)
    disorder_law = _disorder_from_config(cfg)
    critical_cfg = _critical_config(cfg)
    threads = int(cfg.get("threads", 1))

    def one(beta: float) -> dict:
        est = estimate_critical_point(law, disorder_law, beta, critical_cfg)
        return {
            "beta": beta,
            "h_lo": est.h_lo,
            "h_hi": est.h_hi,
            "annealed_point": est.annealed_point,
            "gap_lo": est.gap_lo,
            "bracket_width": est.h_hi - est.h_lo,
            "evidence_lo": est.evidence_lo,
            "evidence_hi": est.evidence_hi,
        }

    betas = _beta_values(cfg)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, betas))
    return [one(beta) for beta in betas]


def _exponent_curve(cfg: dict, law, disorder_law) -> tuple[list[tuple], float, list[dict]]:
    source = cfg.get("curve_source", "pure")
    u_min = float(cfg.get("fit_u_min", 1e-3))
    u_max = float(cfg.get("fit_u_max", 1e-1))
    points = int(cfg.get("fit_points", 10))
    if not (0.0 < u_min < u_max):
        raise ConfigError("need 0 < fit_u_min < fit_u_max")
    u_grid = np.exp(np.linspace(math.log(u_min), math.log(u_max), points))
    zeta = law.spec.zeta if law.spec.family == STRETCHED else float(
        cfg.get("kernel_zeta", 0.5))
    curve = []
    rows = []
    if source == "synthetic":
        nu = float(cfg.get("synthetic_nu", 2.0))
        for u in u_grid:
            f = float(u) ** nu
            curve.append((float(u), f, f, f))
            rows.append({"beta": 0.0, "h": float(u), "n_sites": 0, "replicas": 0,
                         "value": f, "stderr": 0.0, "lo": f, "hi": f})
    elif source == "pure":
        for u in u_grid:
            f = pure_free_energy(law, float(u))
            curve.append((float(u), f, f, f))
            rows.append({"beta": 0.0, "h": float(u), "n_sites": 0, "replicas": 0,
                         "value": f, "stderr": 0.0, "lo": f, "hi": f})
    elif source == "quenched":
        beta = float(cfg.get("beta", 1.0))
        critical_cfg = _critical_config(cfg)
        est = estimate_critical_point(law, disorder_law, beta, critical_cfg)
        for i, u in enumerate(u_grid):
            h = est.h_hi + float(u)
            fe = quenched_free_energy_estimate(
                law, disorder_law, PolymerParams(beta=beta, h=h),
                critical_cfg.n_sites, critical_cfg.replicas,
                mix_seed(critical_cfg.seed, 1000 + i))
            curve.append((float(u), fe.mean_per_site, fe.bracket_lo, fe.bracket_hi))
            rows.append({"beta": beta, "h": h, "n_sites": critical_cfg.n_sites,
                         "replicas": critical_cfg.replicas,
                         "value": fe.mean_per_site, "stderr": fe.stderr,
                         "lo": fe.bracket_lo, "hi": fe.bracket_hi})
    else:
        raise ConfigError(f"unknown curve_source {source!r}")
    return curve, zeta, rows


def _run_exponent(cfg: dict) -> dict:
    law = _kernel_from_config(cfg)
    disorder_law = _disorder_from_config(cfg)
    curve, zeta, rows = _exponent_curve(cfg, law, disorder_law)
    fit = fit_smoothing_exponent(curve, zeta)
    if "curve_output" in cfg:
        _write_curve_csv(cfg["curve_output"], rows)
    return {
        "curve_source": cfg.get("curve_source", "pure"),
        "zeta": fit.zeta,
        "nu_hat": fit.nu_hat,
        "band_lo": fit.band_lo,
        "band_hi": fit.band_hi,
        "in_band": fit.in_band,
        "r_squared": fit.r_squared,
        "fit_window": list(fit.fit_window),
        "n_points": fit.n_points,
    }


def _run_fkg(cfg: dict) -> dict:
    law = _kernel_from_config(cfg)
    disorder_law = _disorder_from_config(cfg)
    n_sites = int(cfg.get("N", 8))
    beta = float(cfg.get("beta", 1.0))
    h = float(cfg.get("h", 0.0))
    n_envs = int(cfg.get("fkg_environments", 5))
    lattice_pairs = int(cfg.get("lattice_pairs", 1000))
    master_seed = int(cfg.get("master_seed", 0))
    params = PolymerParams(beta=beta, h=h)
    reports = []
    for k in range(n_envs):
        env = sample_environment(disorder_law, n_sites, mix_seed(master_seed, k))
        rep = fkg_brute_force_test(law, env, params, n_sites,
                                   lattice_pairs=lattice_pairs,
                                   seed=mix_seed(master_seed, 10_000 + k))
        reports.append({
            "environment_index": k,
            "min_covariance": rep.min_covariance,
            "worst_pair": list(rep.worst_pair),
            "lattice_condition_ok": rep.lattice_condition_ok,
            "min_lattice_ratio": rep.min_lattice_ratio,
            "min_function_gap": rep.min_function_gap,
        })
    return {
        "n_sites": n_sites,
        "beta": beta,
        "h": h,
        "environments": n_envs,
        "seed": master_seed,
        "reports": reports,
        "min_covariance": min(r["min_covariance"] for r in reports),
        "all_lattice_ok": all(r["lattice_condition_ok"] for r in reports),
    }


def _run_rare_region(cfg: dict) -> dict:
    disorder_law = _disorder_from_config(cfg)
    block_size = int(cfg.get("block_size", 64))
    u = float(cfg.get("u", 2.0))
    master_seed = int(cfg.get("master_seed", 0))
    trials = int(cfg.get("trials", 1))
    default_budget = max(1, int(math.ceil(u * math.exp(0.5 * u * u))))
    max_blocks = int(cfg.get("max_blocks", default_budget))
    first = rare_region_scan(disorder_law, block_size, u, max_blocks,
                             mix_seed(master_seed, 0))
    payload = {
        "disorder": disorder_law.value,
        "block_size": block_size,
        "u": u,
        "seed": master_seed,
        "max_blocks": max_blocks,
        "first_scan": {
            "x0": first.x0,
            "m_value": first.m_value,
            "within": first.within,
            "blocks_examined": first.blocks_examined,
            "block_threshold": first.block_threshold,
        },
    }
    if trials > 1:
        freq = rare_region_within_frequency(disorder_law, block_size, u, trials,
                                            master_seed)
        payload["within_frequency"] = {
            "trials": freq.trials,
            "hits": freq.hits,
            "frequency": freq.frequency,
        }
    return payload


def _write_curve_csv(path: str, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_CURVE_COLUMNS)
        for row in rows:
            writer.writerow([_csv_cell(row[c]) for c in _CURVE_COLUMNS])


def _csv_cell(value):
    if isinstance(value, float):
        return repr(value)
    return value


def _render_json(command: str, cfg: dict, results, canonical: bool) -> bytes:
    payload = {
        "command": command,
        "tool": "pinlab",
        "version": pinlab.__version__,
        "config": _canonical_config(cfg),
        "results": results,
    }
    if not canonical:
        payload["generated_at"] = datetime.now(timezone.utc).isoformat()
    return (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode()


def _render_csv(command: str, cfg: dict, rows: list[dict], columns: list[str],
                canonical: bool) -> bytes:
    buf = io.StringIO()
    buf.write(f"# pinlab {command} v{pinlab.__version__}\n")
    buf.write("# config " + json.dumps(_canonical_config(cfg), sort_keys=True) + "\n")
    if not canonical:
        buf.write("# generated_at " + datetime.now(timezone.utc).isoformat() + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_cell(row[c]) for c in columns])
    return buf.getvalue().encode()


def _emit(data: bytes, cfg: dict, canonical: bool) -> None:
    output = cfg.get("output")
    if output:
        with open(output, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.write(data.decode())
    if canonical:
        print("sha256 " + hashlib.sha256(data).hexdigest())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pinlab",
        description=("Numerical laboratory for disordered pinning of renewals "
                     "with stretched-exponential gap laws"),
    )
    parser.add_argument("--version", action="version", version=pinlab.__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("validate-kernel", "build a gap law and report its normalization and shape checks"),
        ("free-energy", "quenched, annealed and pure free-energy curves with brackets"),
        ("critical", "bracket the critical reward h_c(beta) by bisection"),
        ("exponent", "fit the free-energy vanishing exponent against its admissible band"),
        ("fkg", "exhaustive positive-correlation audit at small N"),
        ("rare-region", "first-passage scan for blocks of unusually high disorder"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file (flat key-value object)")
        p.add_argument("--seed", type=int, help="override master_seed")
        p.add_argument("--threads", type=int, help="worker threads for independent items")
        p.add_argument("--output", help="output path (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"),
                       help="output format (free-energy only; others are JSON)")
        p.add_argument("--canonical-hash", action="store_true",
                       help="strip wall-clock metadata and print the SHA-256 of the output")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge_flags(_load_config(args.config), args)
        command = args.command
        fmt = cfg.get("format", "json")
        if fmt == "csv" and command != "free-energy":
            raise ConfigError(f"{command} emits JSON reports; csv is available "
                              "for free-energy curves only")
        if command == "validate-kernel":
            report = _run_validate_kernel(cfg)
            _emit(_render_json(command, cfg, report, args.canonical_hash), cfg,
                  args.canonical_hash)
            return 0 if report["passed"] else 1
        if command == "free-energy":
            rows = _run_free_energy(cfg)
            if fmt == "csv":
                data = _render_csv(command, cfg, rows, _FREE_ENERGY_COLUMNS,
                                   args.canonical_hash)
            else:
                data = _render_json(command, cfg, rows, args.canonical_hash)
            _emit(data, cfg, args.canonical_hash)
            return 0
        if command == "critical":
            results = _run_critical(cfg)
        elif command == "exponent":
            results = _run_exponent(cfg)
        elif command == "fkg":
            results = _run_fkg(cfg)
        else:
            results = _run_rare_region(cfg)
        _emit(_render_json(command, cfg, results, args.canonical_hash), cfg,
              args.canonical_hash)
        return 0
    except (ConfigError, ValueError) as exc:
        print(f"pinlab: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        print(f"pinlab: unexpected failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Seeded disorder sequences and their log moment generating functions.

The three families are centered with unit variance by construction:
standard Gaussian, Rademacher (+/-1 fair coin) and the symmetric uniform
law on [-sqrt(3), sqrt(3)].
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB

_SQRT3 = math.sqrt(3.0)


class DisorderLaw(Enum):
    GAUSSIAN = "gaussian"
    RADEMACHER = "rademacher"
    UNIFORM_SYM = "uniform_sym"

    @classmethod
    def from_name(cls, name: str) -> "DisorderLaw":
        for member in cls:
            if member.value == name:
                return member
        raise ValueError(
            f"unknown disorder law {name!r}; choose from "
            f"{[m.value for m in cls]}"
        )


def mix_seed(master_seed: int, index: int) -> int:
    """Derive the stream seed for work item ``index`` under ``master_seed``.

    SplitMix64 finalizer applied to master_seed + (index+1) * golden gamma.
    This function is part of the reproducibility contract: replica k of a
    run always uses mix_seed(master, k), so serial and parallel schedules
    produce identical streams.  Do not change it without bumping the
    package version.
    """
    x = (int(master_seed) + (int(index) + 1) * _GOLDEN) & _MASK64
    x ^= x >> 30
    x = (x * _MIX_A) & _MASK64
    x ^= x >> 27
    x = (x * _MIX_B) & _MASK64
    x ^= x >> 31
    return x


@dataclass(frozen=True, eq=False)
class Environment:
    """One frozen realization of the site energies omega_1..omega_N.

    ``base_values`` holds the values as drawn; ``shift`` is the cumulative
    tilt applied afterwards.  ``values`` is base + shift, except that a
    zero shift returns the base array itself so that tilting by a and then
    by -a restores the original environment bit for bit.
    """

    law: DisorderLaw
    seed: int
    base_values: np.ndarray
    shift: float = 0.0

    @cached_property
    def values(self) -> np.ndarray:
        if self.shift == 0.0:
            return self.base_values
        return self.base_values + self.shift

    @property
    def n_sites(self) -> int:
        return int(self.base_values.shape[0])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["omega"])
            for v in self.values:
                writer.writerow([repr(float(v))])

    def to_npy(self, path) -> None:
        np.save(path, self.values)


def sample_environment(law: DisorderLaw, n_sites: int, seed: int) -> Environment:
    """Draw omega_1..omega_N IID from ``law``, deterministically per seed."""
    if n_sites < 1:
        raise ValueError("n_sites must be >= 1")
    rng = np.random.default_rng(seed)
    if law is DisorderLaw.GAUSSIAN:
        values = rng.standard_normal(n_sites)
    elif law is DisorderLaw.RADEMACHER:
        values = rng.integers(0, 2, size=n_sites).astype(float) * 2.0 - 1.0
    else:
        values = rng.uniform(-_SQRT3, _SQRT3, size=n_sites)
    return Environment(law=law, seed=int(seed), base_values=values)


def sample_replicas(law: DisorderLaw, n_sites: int, master_seed: int,
                    replicas: int) -> list[Environment]:
    """Replica k uses mix_seed(master_seed, k); safe to generate concurrently."""
    return [sample_environment(law, n_sites, mix_seed(master_seed, k))
            for k in range(replicas)]


def log_mgf(law: DisorderLaw, beta: float) -> float:
    """lambda(beta) = log E[exp(beta * omega)]; finite for every family."""
    if law is DisorderLaw.GAUSSIAN:
        return 0.5 * beta * beta
    if law is DisorderLaw.RADEMACHER:
        # log cosh(beta), evaluated without overflow
        return float(np.logaddexp(beta, -beta)) - math.log(2.0)
    x = abs(_SQRT3 * beta)
    if x < 1e-4:
        # log(sinh(x)/x) with the removable singularity at 0
        return x * x / 6.0 - x ** 4 / 180.0
    return x + math.log1p(-math.exp(-2.0 * x)) - math.log(2.0 * x)


def tilt(env: Environment, delta: float) -> Environment:
    """Shift every site energy by ``delta``.

    Shifting by a and then by -a cancels exactly: the accumulated shift
    returns to 0.0 and ``values`` falls back to the original array.
    """
    if delta == 0.0:
        return env
    return Environment(law=env.law, seed=env.seed,
                       base_values=env.base_values, shift=env.shift + delta)


def shift_environment(env: Environment, k: int) -> Environment:
    """Drop the first k sites: site n of the result reads omega_{n+k}."""
    if not 0 <= k <= env.n_sites:
        raise ValueError(f"shift {k} outside 0..{env.n_sites}")
    return Environment(law=env.law, seed=env.seed, base_values=env.values[k:])

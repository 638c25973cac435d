"""Exact finite-volume partition functions for the pinned renewal polymer.

A trajectory is a subset of {1..N} containing N (the endpoint is pinned).
Its weight is the product of gap masses K(t_i - t_{i-1}) times
exp(sum of beta*omega_n + h over its contact points); site 0 carries no
energy.  Everything below works in log space.

Convention fixed once and for all: in the forward/backward split the site
energy of n lives in the forward table only.  forward[n] is the log weight
of trajectories on [0, n] pinned at n including the factor at n;
backward[n] is the log weight of continuations from a pinned n to a pinned
N, counting the factors of the contacts strictly after n.  Their sum minus
forward[N] is then the log marginal probability that n is a contact, with
no double counting.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from pinlab.disorder import Environment
from pinlab.kernel import InterArrivalLaw
from pinlab.numerics import logsumexp

BRUTE_FORCE_CAP = 20
EXACT_MEASURE_CAP = 14
CONTACT_COUNT_CAP = 512


@dataclass(frozen=True)
class PolymerParams:
    """Inverse temperature beta >= 0 and pinning reward h."""

    beta: float
    h: float

    def __post_init__(self) -> None:
        if self.beta < 0.0:
            raise ValueError(f"beta must be >= 0, got {self.beta!r}")


@dataclass(frozen=True, eq=False)
class PartitionComputation:
    """log Z plus optional contact marginals.

    ``contact_probabilities[i]`` is the probability that site i+1 is a
    contact; the last entry is exactly 1 because the endpoint is pinned.
    """

    log_z: float
    contact_probabilities: np.ndarray | None = None
    expected_contacts: float | None = None


@dataclass(frozen=True, eq=False)
class ContactCountWeights:
    """Log weights of trajectories grouped by their number of contacts.

    ``log_w[m-1]`` is the log weight of trajectories with exactly m
    contacts in (0, N]; unreachable counts are -inf.  The log-sum-exp over
    all m recovers the full log partition function.
    """

    n_sites: int
    log_w: np.ndarray

    def total_log_z(self) -> float:
        return float(logsumexp(self.log_w))

    def low_count_log_z(self, eps: float) -> float:
        """log weight of {at most floor(eps*N) contacts}."""
        cut = math.floor(eps * self.n_sites)
        return float(logsumexp(self.log_w[: max(cut, 0)]))

    def high_count_log_z(self, eps: float) -> float:
        """log weight of {more than floor(eps*N) contacts}; complements the above."""
        cut = math.floor(eps * self.n_sites)
        return float(logsumexp(self.log_w[max(cut, 0):]))

    def high_count_probability(self, eps: float) -> float:
        return math.exp(self.high_count_log_z(eps) - self.total_log_z())


def _validate(law: InterArrivalLaw, env: Environment, n_sites: int) -> None:
    if n_sites < 1:
        raise ValueError("n_sites must be >= 1")
    if n_sites > law.n_max:
        raise ValueError(
            f"n_sites={n_sites} exceeds the kernel table horizon {law.n_max}"
        )
    if env.n_sites < n_sites:
        raise ValueError(
            f"environment has {env.n_sites} sites, need at least {n_sites}"
        )


def _site_energies(env: Environment, params: PolymerParams, n_sites: int) -> np.ndarray:
    return params.beta * env.values[:n_sites] + params.h


def _forward(log_k: np.ndarray, site: np.ndarray) -> np.ndarray:
    n_sites = site.shape[0]
    fwd = np.empty(n_sites + 1)
    fwd[0] = 0.0
    for n in range(1, n_sites + 1):
        terms = log_k[:n] + fwd[n - 1 :: -1]
        m = terms.max()
        if m == -np.inf:
            fwd[n] = -np.inf
        else:
            fwd[n] = site[n - 1] + m + math.log(np.exp(terms - m).sum())
    return fwd


def forward_log_weights(law: InterArrivalLaw, env: Environment,
                        params: PolymerParams, n_sites: int) -> np.ndarray:
    """Forward table L[0..N]: L[n] is log Z on [0, n] (pinned at n).

    L[0] = 0 and L[n] = (beta*omega_n + h) + logsumexp_k(log K(k) + L[n-k])
    over the last gap k = 1..n.  Cost O(N^2).
    """
    _validate(law, env, n_sites)
    return _forward(law.log_mass, _site_energies(env, params, n_sites))


def backward_log_weights(law: InterArrivalLaw, env: Environment,
                         params: PolymerParams, n_sites: int) -> np.ndarray:
    """Backward table W[0..N]; W[n] sums continuations from n to the pinned end.

    W[N] = 0 and W[n] = logsumexp_k(log K(k) + (beta*omega_{n+k} + h) + W[n+k]).
    Site n itself is not counted here (it belongs to the forward table).
    """
    _validate(law, env, n_sites)
    log_k = law.log_mass
    site = _site_energies(env, params, n_sites)
    bwd = np.empty(n_sites + 1)
    bwd[n_sites] = 0.0
    for n in range(n_sites - 1, -1, -1):
        terms = log_k[: n_sites - n] + site[n:] + bwd[n + 1 :]
        m = terms.max()
        if m == -np.inf:
            bwd[n] = -np.inf
        else:
            bwd[n] = m + math.log(np.exp(terms - m).sum())
    return bwd


def log_partition(law: InterArrivalLaw, env: Environment,
                  params: PolymerParams, n_sites: int) -> float:
    """log Z_N by the renewal decomposition over the last gap."""
    return float(forward_log_weights(law, env, params, n_sites)[n_sites])


def _enumerate_log_weights(law: InterArrivalLaw, env: Environment,
                           params: PolymerParams, n_sites: int
                           ) -> Iterator[tuple[tuple[int, ...], float]]:
    """Yield (contact set, log weight) over every subset of {1..N} containing N."""
    log_k = law.log_mass
    site = _site_energies(env, params, n_sites)
    interior = n_sites - 1
    for mask in range(1 << interior):
        prev = 0
        acc = 0.0
        contacts = []
        for i in range(interior):
            if (mask >> i) & 1:
                pos = i + 1
                acc += log_k[pos - prev - 1] + site[pos - 1]
                contacts.append(pos)
                prev = pos
        acc += log_k[n_sites - prev - 1] + site[n_sites - 1]
        contacts.append(n_sites)
        yield tuple(contacts), acc


def brute_force_log_partition(law: InterArrivalLaw, env: Environment,
                              params: PolymerParams, n_sites: int,
                              cap: int = BRUTE_FORCE_CAP) -> float:
    """Independent oracle for log_partition: sum over all 2**(N-1) subsets."""
    _validate(law, env, n_sites)
    if n_sites > cap:
        raise ValueError(
            f"n_sites={n_sites} exceeds the brute-force cap {cap} "
            f"(2**(N-1) subsets)"
        )
    weights = np.fromiter(
        (w for _, w in _enumerate_log_weights(law, env, params, n_sites)),
        dtype=float,
        count=1 << (n_sites - 1),
    )
    return float(logsumexp(weights))


def log_partition_segment(law: InterArrivalLaw, env: Environment,
                          params: PolymerParams, a: int, b: int) -> float:
    """log of the segment partition function on [a, b].

    Equals (beta*omega_a + h) * 1_{a > 0} plus log Z_{b-a} run on the
    shifted environment; the energy at the left endpoint a is counted only
    for a > 0, and a segment of length zero contributes only that start
    factor (empty product convention Z_0 = 1).
    """
    if a < 0 or a > b:
        raise ValueError(f"need 0 <= a <= b, got a={a}, b={b}")
    if b > env.n_sites:
        raise ValueError(f"segment end {b} exceeds environment length {env.n_sites}")
    start = params.beta * float(env.values[a - 1]) + params.h if a > 0 else 0.0
    length = b - a
    if length == 0:
        return start
    if length > law.n_max:
        raise ValueError(
            f"segment length {length} exceeds the kernel table horizon {law.n_max}"
        )
    site = params.beta * env.values[a:b] + params.h
    return start + float(_forward(law.log_mass, site)[length])


def contact_profile(law: InterArrivalLaw, env: Environment,
                    params: PolymerParams, n_sites: int) -> PartitionComputation:
    """Contact marginals p[n] = P(n in tau) under the pinned polymer measure.

    p[n] = exp(L[n] + W[n] - L[N]) with the forward/backward tables above;
    p[N] is exactly 1 and expected_contacts is the sum of the marginals.
    """
    fwd = forward_log_weights(law, env, params, n_sites)
    bwd = backward_log_weights(law, env, params, n_sites)
    log_p = fwd[1:] + bwd[1:] - fwd[n_sites]
    probs = np.clip(np.exp(log_p), 0.0, 1.0)
    return PartitionComputation(
        log_z=float(fwd[n_sites]),
        contact_probabilities=probs,
        expected_contacts=float(probs.sum()),
    )


def contact_count_logweights(law: InterArrivalLaw, env: Environment,
                             params: PolymerParams, n_sites: int,
                             cap: int = CONTACT_COUNT_CAP) -> ContactCountWeights:
    """Two-index recursion over (position, number of contacts).

    T[n, m] is the log weight of trajectories pinned at n with exactly m
    contacts in (0, n]; T[n, m] = site(n) + logsumexp_k(log K(k) + T[n-k, m-1]).
    O(N^3) time and O(N^2) memory, hence the cap.
    """
    _validate(law, env, n_sites)
    if n_sites > cap:
        raise ValueError(
            f"n_sites={n_sites} exceeds the contact-count cap {cap}; the "
            "two-index table costs O(N^3) time and O(N^2) memory, pass a "
            "larger cap explicitly to override"
        )
    log_k = law.log_mass
    site = _site_energies(env, params, n_sites)
    table = np.full((n_sites + 1, n_sites + 1), -np.inf)
    table[0, 0] = 0.0
    for n in range(1, n_sites + 1):
        block = log_k[:n, None] + table[n - 1 :: -1, :]
        col = logsumexp(block, axis=0)
        table[n, 1:] = site[n - 1] + col[:-1]
    return ContactCountWeights(n_sites=n_sites, log_w=table[n_sites, 1:].copy())


def exact_polymer_measure(law: InterArrivalLaw, env: Environment,
                          params: PolymerParams, n_sites: int,
                          cap: int = EXACT_MEASURE_CAP) -> dict[tuple[int, ...], float]:
    """The full polymer law as a map {contact set: probability}.

    Keys are the subsets of {1..N} containing N, values sum to one.
    """
    _validate(law, env, n_sites)
    if n_sites > cap:
        raise ValueError(
            f"n_sites={n_sites} exceeds the exact-measure cap {cap} "
            f"(2**(N-1) subsets)"
        )
    subsets = []
    weights = []
    for contacts, w in _enumerate_log_weights(law, env, params, n_sites):
        subsets.append(contacts)
        weights.append(w)
    weights = np.array(weights)
    log_z = logsumexp(weights)
    probs = np.exp(weights - log_z)
    return {s: float(p) for s, p in zip(subsets, probs)}


def dump_contact_profile_csv(profile: PartitionComputation, path) -> None:
    """Write (site, contact probability) rows for plotting."""
    if profile.contact_probabilities is None:
        raise ValueError("profile carries no contact probabilities")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["site", "contact_probability"])
        for i, p in enumerate(profile.contact_probabilities, start=1):
            writer.writerow([i, repr(float(p))])


def dump_forward_table_csv(law: InterArrivalLaw, env: Environment,
                           params: PolymerParams, n_sites: int, path) -> None:
    """Write the forward log-weight table to CSV."""
    fwd = forward_log_weights(law, env, params, n_sites)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["n", "log_weight"])
        for n, value in enumerate(fwd):
            writer.writerow([n, repr(float(value))])

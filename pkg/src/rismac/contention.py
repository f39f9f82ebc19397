"""Slotted contention: analytic slot statistics and slot-level simulation.

Every slot each pair sends an RTS independently with its probability p_k.
Zero senders burn an idle slot (delta), two or more collide (tau_r), exactly
one wins and pays the RTS+feedback overhead tau_m1 = tau_r + tau_c.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ConfigError, NetworkConfig


@dataclass(frozen=True)
class ContentionOutcome:
    """One resolved contention: winning pair (1-based) and elapsed time (s).

    Idle/collision slot counts are kept so the elapsed time can be audited
    as tau_m1 + n_idle*delta + n_collisions*tau_r exactly.
    """

    winner: int
    elapsed: float
    n_idle: int
    n_collisions: int


def idle_probability(p) -> float:
    out = 1.0
    for pk in p:
        out *= 1.0 - pk
    return out


def success_probability(p) -> float:
    """P(exactly one sender in a slot) = sum_k p_k prod_{i != k} (1 - p_i)."""
    total = 0.0
    for k, pk in enumerate(p):
        term = pk
        for i, pi in enumerate(p):
            if i != k:
                term *= 1.0 - pi
        total += term
    return total


def winner_weights(p) -> np.ndarray:
    """Distribution of the winning pair conditioned on a single-sender slot."""
    ps = success_probability(p)
    if ps <= 0.0:
        raise ConfigError("no slot can have exactly one sender (p_s = 0)")
    w = np.array([pk * idle_probability([pi for i, pi in enumerate(p) if i != k])
                  for k, pk in enumerate(p)])
    return w / w.sum()


def expected_contention_time(cfg: NetworkConfig) -> float:
    """Mean time from the start of contention to a resolved winner.

    Failures before the first single-sender slot are geometric; each failure
    is an idle (delta) or a collision (tau_r) in proportion to its slot
    probability, and the closing slot costs tau_m1.
    """
    ps = success_probability(cfg.p)
    if ps <= 0.0:
        raise ConfigError("no slot can have exactly one sender (p_s = 0)")
    pi0 = idle_probability(cfg.p)
    p_coll = 1.0 - pi0 - ps
    return cfg.tau_m1 + (pi0 * cfg.delta + p_coll * cfg.tau_r) / ps


def simulate_contention(rng: np.random.Generator, cfg: NetworkConfig) -> ContentionOutcome:
    """Slot-by-slot contention until exactly one pair sends."""
    p = np.asarray(cfg.p)
    if success_probability(cfg.p) <= 0.0:
        raise ConfigError("no slot can have exactly one sender (p_s = 0)")
    n_idle = 0
    n_coll = 0
    while True:
        senders = rng.random(cfg.K) < p
        c = int(senders.sum())
        if c == 1:
            winner = int(np.flatnonzero(senders)[0]) + 1
            elapsed = cfg.tau_m1 + n_idle * cfg.delta + n_coll * cfg.tau_r
            return ContentionOutcome(winner, elapsed, n_idle, n_coll)
        if c == 0:
            n_idle += 1
        else:
            n_coll += 1


def simulate_contention_batch(rng: np.random.Generator, cfg: NetworkConfig, n: int,
                              chunk: int = 1 << 17):
    """Vectorized slot-level contention for n independent rounds.

    Returns (winners, elapsed, n_idle, n_collisions) arrays; winners are
    1-based. Identical slot semantics to simulate_contention, evaluated in
    waves over the still-unresolved rounds.
    """
    p = np.asarray(cfg.p)
    if success_probability(cfg.p) <= 0.0:
        raise ConfigError("no slot can have exactly one sender (p_s = 0)")
    winners = np.zeros(n, dtype=np.int64)
    n_idle = np.zeros(n, dtype=np.int64)
    n_coll = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    while active.size:
        for start in range(0, active.size, chunk):
            rows = active[start:start + chunk]
            senders = rng.random((rows.size, cfg.K)) < p
            counts = senders.sum(axis=1)
            done = counts == 1
            if done.any():
                winners[rows[done]] = senders[done].argmax(axis=1) + 1
            n_idle[rows] += counts == 0
            n_coll[rows] += counts >= 2
        active = active[winners[active] == 0]
    elapsed = cfg.tau_m1 + n_idle * cfg.delta + n_coll * cfg.tau_r
    return winners, elapsed, n_idle, n_coll

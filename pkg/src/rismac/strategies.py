"""Transmission disciplines for the contention winner.

The two-level decision of the proposed scheme:

  level 1 (free, direct magnitude h known):
      transmit directly now / probe the surface / release the channel
  level 2 (after paying tau_p + tau_c, boosted rate known):
      transmit via the surface / release the channel

plus the three reference disciplines it is measured against: always transmit
directly, always probe and transmit, and always probe with an optimal stop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.polynomial.hermite import hermgauss

from .channel import ChannelObservation, linear_budget, rate_direct
from .config import NetworkConfig
from .contention import expected_contention_time
from .solver import (
    SolverError,
    ThresholdTable,
    _adaptive_panels,
    _pair_tables,
    _scaled_e1,
    mean_probe_value,
    probe_value,
    solve_max_throughput,
)

_LN2 = math.log(2.0)
_LOG2E = 1.0 / _LN2
_SQRT2 = math.sqrt(2.0)
_SQRT_PI = math.sqrt(math.pi)


class Decision(Enum):
    STOP_DIRECT = "stop_direct"
    ASSIST_RIS = "assist_ris"
    STOP_RIS = "stop_ris"
    CONTINUE = "continue"


class PolicyKind(Enum):
    PROPOSED = "proposed"
    NO_WAIT_DIRECT = "no-wait-direct"
    NO_WAIT_RIS = "no-wait-ris"
    OPTIMAL_RIS_STOP = "optimal-ris-stop"


def policy_from_name(name: str) -> PolicyKind:
    for kind in PolicyKind:
        if kind.value == name:
            return kind
    raise ValueError(f"unknown policy {name!r}; choose from "
                     + ", ".join(k.value for k in PolicyKind))


def decide_level1_reference(obs: ChannelObservation, lam_star: float,
                            cfg: NetworkConfig, probe_value_fn=None) -> Decision:
    """First-level choice by direct value comparison (no thresholds).

    Stop when transmitting now is worth at least as much as both probing and
    releasing; release when neither action has positive worth; probe otherwise.
    """
    pv = probe_value_fn if probe_value_fn is not None else probe_value
    rho = linear_budget(cfg)
    a = (cfg.tau_d - cfg.tau_m1) * (rate_direct(rho, obs.h_mag) - lam_star)
    b = float(pv(lam_star, obs.h_mag, obs.pair_index, cfg))
    if a >= b and a >= 0.0:
        return Decision.STOP_DIRECT
    if a < 0.0 and b < 0.0:
        return Decision.CONTINUE
    return Decision.ASSIST_RIS


def decide_level1_threshold(h_mag: float, k: int, table: ThresholdTable,
                            cfg: NetworkConfig) -> Decision:
    """First-level choice by the precomputed per-pair magnitude thresholds."""
    if k in table.kstar:
        if h_mag >= table.eta[k]:
            return Decision.STOP_DIRECT
        if h_mag <= table.zeta[k]:
            return Decision.CONTINUE
        return Decision.ASSIST_RIS
    rho = linear_budget(cfg)
    if rate_direct(rho, h_mag) >= table.lambda_star:
        return Decision.STOP_DIRECT
    return Decision.CONTINUE


def decide_level2(rate_ris: float, stop_rate: float) -> Decision:
    """Post-probe choice: transmit via the surface iff the boosted rate
    reaches the stopping rate (ties stop)."""
    return Decision.STOP_RIS if rate_ris >= stop_rate else Decision.CONTINUE


def threshold_params(table: ThresholdTable, cfg: NetworkConfig):
    """Per-pair threshold arrays for vectorized level-1 decisions.

    Returns (zeta, eta, probe_worthy, h_cross): pairs outside the probe-worthy
    set use the single direct cutoff h_cross in place of the pair thresholds.
    """
    zeta = np.zeros(cfg.K)
    eta = np.full(cfg.K, np.inf)
    worthy = np.zeros(cfg.K, dtype=bool)
    for k in table.kstar:
        worthy[k - 1] = True
        zeta[k - 1] = table.zeta[k]
        eta[k - 1] = table.eta[k]
    rho = linear_budget(cfg)
    if rho > 0.0:
        h_cross = math.sqrt(math.expm1(table.lambda_star * _LN2) / rho)
    else:
        h_cross = 0.0
    return zeta, eta, worthy, h_cross


@dataclass(frozen=True, eq=False)
class Policy:
    """A transmission discipline plus the numbers it needs online."""

    kind: PolicyKind
    stop_rate: float = 0.0
    table: ThresholdTable | None = None


def solve_lambda_b(cfg: NetworkConfig, xtol: float = 1e-11) -> float:
    """Throughput of the always-probe discipline with its best stopping rate.

    Root of mean_probe_value(lam) = lam * tau_o; the probe value is left
    unclamped because this discipline never transmits directly and never
    releases before probing.
    """
    tau_o = expected_contention_time(cfg)
    if mean_probe_value(0.0, cfg) <= 0.0:
        return 0.0
    lo, hi = 0.0, 1.0
    for _ in range(80):
        if mean_probe_value(hi, cfg) - hi * tau_o < 0.0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise SolverError("always-probe balance point not bracketed")
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if mean_probe_value(mid, cfg) - mid * tau_o < 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def no_wait_direct_throughput(cfg: NetworkConfig) -> float:
    """Long-run throughput when every winner transmits directly at once.

    Renewal ratio in closed form: the mean direct rate of an exponential SNR
    is log2(e) * exp(1/w) * E1(1/w).
    """
    rho, v, _, _ = _pair_tables(cfg)
    if rho == 0.0:
        return 0.0
    tau1 = cfg.tau_d - cfg.tau_m1
    w = rho * v
    mean_rate = float(np.mean(_LOG2E * _scaled_e1(1.0 / w, 1.0 / w)))
    return tau1 * mean_rate / (expected_contention_time(cfg) + tau1)


def no_wait_ris_throughput(cfg: NetworkConfig, tol: float = 1e-11) -> float:
    """Long-run throughput when every winner probes and then transmits.

    The mean boosted rate is integrated over the fading law with the summed
    reflections at their Gaussian surrogate (Hermite rule inside, adaptive
    panels outside); exact up to the surrogate itself.
    """
    rho, v, mu, sigma = _pair_tables(cfg)
    if rho == 0.0:
        return 0.0
    tau1 = cfg.tau_d - cfg.tau_m1
    tau2 = cfg.tau_d - cfg.tau_m2
    tg, wg = hermgauss(64)

    def integrand(rows, h):
        shift = mu[rows][:, None] + _SQRT2 * sigma[rows][:, None] * tg[None, :]
        rates = np.log2(1.0 + rho * np.square(h[:, None] + shift))
        vr = v[rows]
        pdf = (2.0 * h / vr) * np.exp(-h * h / vr)
        return (rates @ wg) / _SQRT_PI * pdf

    h_hi = np.sqrt(v * math.log(1e14))
    root_v = np.sqrt(v)
    edges = [np.zeros(cfg.K),
             np.minimum(root_v, h_hi),
             np.minimum(3.0 * root_v, h_hi),
             h_hi]
    rows = np.concatenate([np.arange(cfg.K)] * 3)
    los = np.concatenate(edges[:3])
    his = np.concatenate(edges[1:])
    mean_rate = _adaptive_panels(integrand, rows, los, his, tol) / cfg.K
    return tau2 * mean_rate / (expected_contention_time(cfg) + tau1)


def analytic_throughput(kind: PolicyKind, cfg: NetworkConfig,
                        table: ThresholdTable | None = None) -> float:
    """Model-predicted long-run throughput of a discipline."""
    if kind is PolicyKind.PROPOSED:
        return table.lambda_star if table is not None else solve_max_throughput(cfg)
    if kind is PolicyKind.OPTIMAL_RIS_STOP:
        return solve_lambda_b(cfg)
    if kind is PolicyKind.NO_WAIT_DIRECT:
        return no_wait_direct_throughput(cfg)
    return no_wait_ris_throughput(cfg)


def make_policy(kind: PolicyKind, cfg: NetworkConfig,
                table: ThresholdTable | None = None) -> Policy:
    """Bind a discipline to its solved parameters for this network."""
    if kind is PolicyKind.PROPOSED:
        if table is None:
            raise ValueError("the proposed discipline needs a solved threshold table")
        return Policy(kind, stop_rate=table.lambda_star, table=table)
    if kind is PolicyKind.NO_WAIT_DIRECT:
        return Policy(kind)
    if kind is PolicyKind.NO_WAIT_RIS:
        return Policy(kind, stop_rate=-math.inf)
    return Policy(kind, stop_rate=solve_lambda_b(cfg))

import math

import numpy as np
import pytest
from scipy import integrate

from rismac import (
    ChannelObservation,
    Decision,
    PolicyKind,
    analytic_throughput,
    decide_level1_reference,
    decide_level1_threshold,
    decide_level2,
    direct_mean_square,
    expected_contention_time,
    linear_budget,
    make_policy,
    mean_probe_value,
    no_wait_direct_throughput,
    no_wait_ris_throughput,
    policy_from_name,
    probe_value,
    rate_direct,
    replace_config,
    solve_lambda_b,
    solve_max_throughput_bisect,
    threshold_params,
)


def test_policy_names_round_trip():
    for kind in PolicyKind:
        assert policy_from_name(kind.value) is kind
    with pytest.raises(ValueError, match="unknown policy"):
        policy_from_name("wait-forever")


def test_threshold_rule_regions(cfg, table):
    for k in sorted(table.kstar):
        zeta, eta = table.zeta[k], table.eta[k]
        mid = 0.5 * (zeta + eta)
        assert decide_level1_threshold(0.5 * zeta, k, table, cfg) is Decision.CONTINUE
        assert decide_level1_threshold(mid, k, table, cfg) is Decision.ASSIST_RIS
        assert decide_level1_threshold(2.0 * eta, k, table, cfg) is Decision.STOP_DIRECT
        # boundary ties: at eta transmit, at zeta release
        assert decide_level1_threshold(eta, k, table, cfg) is Decision.STOP_DIRECT
        assert decide_level1_threshold(zeta, k, table, cfg) is Decision.CONTINUE


def test_reference_rule_matches_regions(cfg, table):
    lam = table.lambda_star
    for k in sorted(table.kstar):
        zeta, eta = table.zeta[k], table.eta[k]
        for h, expect in [(0.5 * zeta, Decision.CONTINUE),
                          (0.5 * (zeta + eta), Decision.ASSIST_RIS),
                          (2.0 * eta, Decision.STOP_DIRECT)]:
            obs = ChannelObservation(pair_index=k, h_mag=h)
            assert decide_level1_reference(obs, lam, cfg) is expect


def test_level2_tie_is_stop():
    assert decide_level2(5.0, 5.0) is Decision.STOP_RIS
    assert decide_level2(5.0 - 1e-12, 5.0) is Decision.CONTINUE
    assert decide_level2(7.0, 5.0) is Decision.STOP_RIS


def test_rules_agree_on_dense_grid(cfg, table):
    """Threshold comparisons reproduce the value-comparison rule exactly."""
    lam = table.lambda_star
    rho = linear_budget(cfg)
    tau1 = cfg.tau_d - cfg.tau_m1
    zeta, eta, worthy, h_cross = threshold_params(table, cfg)
    for k in range(1, cfg.K + 1):
        i = k - 1
        hi = 2.0 * (eta[i] if np.isfinite(eta[i]) else h_cross)
        h = np.linspace(1e-6, hi, 10_000)
        a = tau1 * (rate_direct(rho, h) - lam)
        b = np.asarray(probe_value(lam, h, k, cfg))
        ref = np.where((a >= b) & (a >= 0.0), 0,
                       np.where((a < 0.0) & (b < 0.0), 2, 1))
        if worthy[i]:
            thr = np.where(h >= eta[i], 0, np.where(h <= zeta[i], 2, 1))
        else:
            thr = np.where(h >= h_cross, 0, 2)
        assert np.array_equal(ref, thr)
        # spot checks through the scalar entry points
        for hv in h[:: 2048]:
            obs = ChannelObservation(pair_index=k, h_mag=float(hv))
            assert decide_level1_reference(obs, lam, cfg) is decide_level1_threshold(
                float(hv), k, table, cfg)


def test_nonworthy_pair_uses_direct_cutoff(cfg):
    """With the surface off, the rule degenerates to a single rate cutoff."""
    off = replace_config(cfg, M=0)
    from rismac import build_threshold_table

    table = build_threshold_table(off)
    assert table.kstar == frozenset()
    rho = linear_budget(off)
    lam = table.lambda_star
    h_cut = math.sqrt(math.expm1(lam * math.log(2.0)) / rho)
    for h in (0.5 * h_cut, 0.999999 * h_cut, 1.000001 * h_cut, 2.0 * h_cut):
        d = decide_level1_threshold(h, 1, table, off)
        expect = (Decision.STOP_DIRECT if rate_direct(rho, h) >= lam
                  else Decision.CONTINUE)
        assert d is expect
        obs = ChannelObservation(pair_index=1, h_mag=h)
        assert decide_level1_reference(obs, lam, off) is expect


def test_make_policy_contracts(cfg, table):
    with pytest.raises(ValueError, match="threshold table"):
        make_policy(PolicyKind.PROPOSED, cfg)
    prop = make_policy(PolicyKind.PROPOSED, cfg, table)
    assert prop.stop_rate == table.lambda_star and prop.table is table
    nwd = make_policy(PolicyKind.NO_WAIT_DIRECT, cfg)
    assert nwd.table is None
    nwr = make_policy(PolicyKind.NO_WAIT_RIS, cfg)
    assert nwr.stop_rate == -math.inf  # always transmits after probing
    opt = make_policy(PolicyKind.OPTIMAL_RIS_STOP, cfg)
    assert opt.stop_rate == pytest.approx(solve_lambda_b(cfg), abs=1e-9)


def test_lambda_b_balances_and_sits_below_lambda_star(cfg, table):
    lam_b = solve_lambda_b(cfg)
    tau_o = expected_contention_time(cfg)
    assert abs(mean_probe_value(lam_b, cfg) - lam_b * tau_o) < 1e-9
    # forcing a probe can only reduce the achievable balance point
    assert lam_b < table.lambda_star


def test_no_wait_direct_closed_form_vs_quadrature(cfg):
    rho = linear_budget(cfg)
    tau1 = cfg.tau_d - cfg.tau_m1
    total = 0.0
    for k in range(1, cfg.K + 1):
        v = direct_mean_square(cfg, k)

        def f(h, v=v):
            return rate_direct(rho, h) * (2.0 * h / v) * math.exp(-h * h / v)

        val, err = integrate.quad(f, 0.0, math.sqrt(v * math.log(1e18)), limit=400,
                                  epsabs=1e-12, epsrel=1e-12)
        assert err < 1e-10
        total += val
    expect = tau1 * (total / cfg.K) / (expected_contention_time(cfg) + tau1)
    assert no_wait_direct_throughput(cfg) == pytest.approx(expect, rel=1e-9)


def test_no_wait_ris_analytic_vs_nested_quadrature(cfg):
    solo = replace_config(cfg, K=1, p=(0.3,),
                          sources=cfg.sources[:1], dests=cfg.dests[:1])
    rho = linear_budget(solo)
    v = direct_mean_square(solo, 1)
    from rismac import cascaded_moments

    mom = cascaded_moments(solo, 1)

    def inner(h):
        def g(x):
            pdf = math.exp(-0.5 * ((x - mom.mu) / mom.sigma) ** 2) / (
                mom.sigma * math.sqrt(2.0 * math.pi))
            return math.log2(1.0 + rho * (h + x) ** 2) * pdf

        lo, hi = mom.mu - 12 * mom.sigma, mom.mu + 12 * mom.sigma
        return integrate.quad(g, lo, hi, limit=200)[0]

    def outer(h):
        return inner(h) * (2.0 * h / v) * math.exp(-h * h / v)

    mean_rate, err = integrate.quad(outer, 0.0, math.sqrt(v * math.log(1e14)),
                                    limit=200)
    assert err < 1e-8
    tau1 = solo.tau_d - solo.tau_m1
    tau2 = solo.tau_d - solo.tau_m2
    expect = tau2 * mean_rate / (expected_contention_time(solo) + tau1)
    assert no_wait_ris_throughput(solo) == pytest.approx(expect, rel=1e-7)


def test_analytic_throughput_dispatch(cfg, table):
    assert analytic_throughput(PolicyKind.PROPOSED, cfg, table) == table.lambda_star
    assert analytic_throughput(PolicyKind.NO_WAIT_DIRECT, cfg) == pytest.approx(
        no_wait_direct_throughput(cfg), rel=1e-12)
    assert analytic_throughput(PolicyKind.NO_WAIT_RIS, cfg) == pytest.approx(
        no_wait_ris_throughput(cfg), rel=1e-12)
    assert analytic_throughput(PolicyKind.OPTIMAL_RIS_STOP, cfg) == pytest.approx(
        solve_lambda_b(cfg), abs=1e-9)
    # ordering of the model predictions
    lam_star = solve_max_throughput_bisect(cfg)
    assert (no_wait_direct_throughput(cfg) < no_wait_ris_throughput(cfg)
            < lam_star)

import math

import numpy as np
import pytest
from scipy import stats

from rismac import (
    ConfigError,
    cascaded_moments,
    direct_mean_square,
    draw_cascaded,
    draw_direct,
    linear_budget,
    pair_geometry,
    rate_direct,
    rate_ris,
    replace_config,
)

# frozen oracles, computed by independent arithmetic from the defaults
V1 = 2.962962962962963e-07          # 150 m direct link, exponent 3
H1 = 0.0005443310539518173          # sqrt(V1)
RD_H1 = 4.9368560170078055          # log2(1 + 1e8 * V1)
D1_PAIR8 = 80.77747210701756        # hypot(75, 30)
MU1 = 0.00014386820569171408        # 32 * pi/4 * (125*125)^-1.25
SG1 = 2.00439917673653e-05
MU8 = 0.00042856254723200825
SG8 = 5.970814835160075e-05
RR_H1_MU1 = 5.595796695995245       # log2(1 + 1e8 (H1+MU1)^2)


def test_linear_budget_default(cfg):
    assert math.isclose(linear_budget(cfg), 1e8, rel_tol=1e-10)


def test_pair_geometry(cfg):
    g1 = pair_geometry(cfg, 1)
    assert g1.d == pytest.approx(150.0, rel=1e-14)
    assert g1.d1 == pytest.approx(125.0, rel=1e-14)
    assert g1.d2 == pytest.approx(125.0, rel=1e-14)
    g8 = pair_geometry(cfg, 8)
    assert g8.d == pytest.approx(150.0, rel=1e-14)
    assert g8.d1 == pytest.approx(D1_PAIR8, rel=1e-13)
    assert g8.d2 == pytest.approx(D1_PAIR8, rel=1e-13)


def test_zero_distance_rejected(cfg):
    bad = replace_config(cfg, dests=(cfg.sources[0],) + cfg.dests[1:])
    with pytest.raises(ConfigError):
        pair_geometry(bad, 1)


def test_direct_mean_square(cfg):
    assert direct_mean_square(cfg, 1) == pytest.approx(V1, rel=1e-14)
    assert direct_mean_square(cfg, 8) == pytest.approx(V1, rel=1e-14)


def test_cascaded_moments_formula(cfg):
    m1 = cascaded_moments(cfg, 1)
    assert m1.mu == pytest.approx(MU1, rel=1e-13)
    assert m1.sigma == pytest.approx(SG1, rel=1e-13)
    m8 = cascaded_moments(cfg, 8)
    assert m8.mu == pytest.approx(MU8, rel=1e-13)
    assert m8.sigma == pytest.approx(SG8, rel=1e-13)


def test_cascaded_moments_no_surface(cfg):
    off = replace_config(cfg, M=0)
    m = cascaded_moments(off, 1)
    assert m.mu == 0.0 and m.sigma == 0.0


def test_rate_oracles(cfg):
    rho = linear_budget(cfg)
    assert rate_direct(rho, H1) == pytest.approx(RD_H1, rel=1e-12)
    assert rate_direct(rho, 0.0) == 0.0
    assert rate_ris(rho, H1, np.array([MU1])) == pytest.approx(RR_H1_MU1, rel=1e-12)
    # batch shape: rates along the last axis collapse
    h = np.array([H1, 2 * H1])
    casc = np.zeros((2, 5))
    assert np.allclose(rate_ris(rho, h, casc), rate_direct(rho, h), rtol=1e-14)


def test_rate_ris_empty_cascade_matches_direct(cfg):
    off = replace_config(cfg, M=0)
    rng = np.random.default_rng(3)
    casc = draw_cascaded(rng, off, 1, 64)
    assert casc.shape == (64, 0)
    h = draw_direct(rng, off, 1, 64)
    assert np.array_equal(rate_ris(linear_budget(off), h, casc),
                          rate_direct(linear_budget(off), h))


def test_direct_draw_law(cfg):
    rng = np.random.default_rng(2024)
    n = 20000
    draws = draw_direct(rng, cfg, 1, n)
    assert draws.shape == (n,)
    # Rayleigh with mean square V1 <=> scale sqrt(V1/2)
    ks = stats.kstest(draws, "rayleigh", args=(0.0, math.sqrt(V1 / 2.0)))
    assert ks.pvalue > 0.01
    ms = np.square(draws)
    se = ms.std(ddof=1) / math.sqrt(n)
    assert abs(ms.mean() - V1) < 5 * se


def test_cascaded_draw_moments(cfg):
    rng = np.random.default_rng(7)
    n = 40000
    sums = draw_cascaded(rng, cfg, 8, n).sum(axis=1)
    assert abs(sums.mean() - MU8) < 5 * SG8 / math.sqrt(n)
    assert abs(sums.std(ddof=1) - SG8) < 0.05 * SG8


def test_draw_determinism(cfg):
    a = draw_direct(np.random.default_rng(11), cfg, 3, 100)
    b = draw_direct(np.random.default_rng(11), cfg, 3, 100)
    assert np.array_equal(a, b)
    c = draw_cascaded(np.random.default_rng(11), cfg, 3, 10)
    d = draw_cascaded(np.random.default_rng(11), cfg, 3, 10)
    assert np.array_equal(c, d)


def test_scalar_draws(cfg):
    rng = np.random.default_rng(5)
    h = draw_direct(rng, cfg, 1)
    assert np.ndim(h) == 0 and h > 0
    casc = draw_cascaded(rng, cfg, 1)
    assert casc.shape == (cfg.M,)
    assert np.all(casc > 0)
